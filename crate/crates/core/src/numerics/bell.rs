use super::{log_add_exp, LogReal};
use crate::error::{Error, Result};

/// Triangular table of `ln B_{k,p}(theta)` for `0 <= p <= k <= k_max`.
///
/// `B_{k,p}(theta)` is the partial Bell polynomial in the variables
/// `(theta)_1, (theta)_2, ...`. Rows are filled by increasing `k` and then `p`
/// with
///
/// ```text
/// B_{k+1,p} = theta B_{k,p-1} + (p theta + k) B_{k,p},
/// B_{0,0} = 1,  B_{k,0} = B_{0,p} = 0 otherwise,
/// ```
///
/// each step evaluated with log-sum-exp.
#[derive(Debug, Clone)]
pub struct BellTable {
    theta: f64,
    k_max: usize,
    // row k holds k + 1 entries
    rows: Vec<Vec<f64>>,
}

/// Tables past this size (about 2 GiB of logs) are refused up front.
const MAX_ENTRIES: usize = 1 << 28;

impl BellTable {
    pub fn new(theta: f64, k_max: usize) -> Result<Self> {
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(Error::Domain(format!("bell table needs theta > 0, got {theta}")));
        }
        if k_max == 0 {
            return Err(Error::Domain("bell table needs k_max >= 1".into()));
        }
        let entries = (k_max + 1)
            .checked_mul(k_max + 2)
            .map(|e| e / 2)
            .filter(|&e| e <= MAX_ENTRIES)
            .ok_or_else(|| Error::Resource(format!("bell table with k_max={k_max} is too large")))?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        rows.try_reserve_exact(k_max + 1)
            .map_err(|e| Error::Resource(format!("{entries} entries: {e}")))?;
        rows.push(vec![0.0]);
        let ln_theta = theta.ln();
        for k in 0..k_max {
            let prev = &rows[k];
            let mut next = Vec::new();
            next.try_reserve_exact(k + 2)
                .map_err(|e| Error::Resource(format!("{entries} entries: {e}")))?;
            next.push(f64::NEG_INFINITY);
            for p in 1..=k + 1 {
                let from_left = ln_theta + prev[p - 1];
                let stay = if p <= k {
                    (p as f64 * theta + k as f64).ln() + prev[p]
                } else {
                    f64::NEG_INFINITY
                };
                next.push(log_add_exp(from_left, stay));
            }
            rows.push(next);
        }
        Ok(BellTable { theta, k_max, rows })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `ln B_{k,p}(theta)`; zero outside the triangle.
    pub fn get(&self, k: usize, p: usize) -> LogReal {
        assert!(k <= self.k_max, "row {k} beyond k_max {}", self.k_max);
        LogReal::from_ln(self.rows[k].get(p).copied().unwrap_or(f64::NEG_INFINITY))
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.rows[k]
    }
}

/// Row `k` of the Bell table truncated to columns `0..=p_max`.
///
/// Costs `O(k * p_max)` instead of the full triangle; used by estimators that
/// re-evaluate the table for many values of `theta`.
pub fn bell_row(theta: f64, k: usize, p_max: usize) -> Vec<f64> {
    let width = p_max.min(k) + 1;
    let ln_theta = theta.ln();
    let mut row = vec![f64::NEG_INFINITY; width];
    row[0] = 0.0;
    for kk in 0..k {
        let top = (kk + 1).min(width - 1);
        // walk p downwards so row[p-1] still holds the previous row
        for p in (1..=top).rev() {
            let stay = if p <= kk {
                (p as f64 * theta + kk as f64).ln() + row[p]
            } else {
                f64::NEG_INFINITY
            };
            row[p] = log_add_exp(ln_theta + row[p - 1], stay);
        }
        row[0] = f64::NEG_INFINITY;
    }
    row
}

pub const COMPOSITION_LIMIT: usize = 25;

/// `B_{k,p}(theta)` by brute-force enumeration of the compositions of `k`
/// into `p` positive parts:
///
/// ```text
/// B_{k,p}(theta) = k!/p! * sum over (b_1..b_p) of prod (theta)_{b_q} / b_q!
/// ```
///
/// Linear arithmetic throughout; only meant for `k <= 25`.
pub fn bell_via_compositions(theta: f64, k: usize, p: usize) -> Result<LogReal> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::Domain(format!("theta must be positive, got {theta}")));
    }
    if k > COMPOSITION_LIMIT {
        return Err(Error::Method(format!(
            "composition enumeration refused for k={k} > {COMPOSITION_LIMIT}"
        )));
    }
    if p == 0 || p > k {
        return Ok(if p == 0 && k == 0 { LogReal::ONE } else { LogReal::ZERO });
    }
    // weights[b] = (theta)_b / b!
    let mut weights = vec![1.0f64; k + 1];
    for b in 1..=k {
        weights[b] = weights[b - 1] * (theta + (b - 1) as f64) / b as f64;
    }
    let mut total = 0.0;
    sum_compositions(&weights, k, p, 1.0, &mut total);
    let mut scale = 1.0;
    for j in p + 1..=k {
        scale *= j as f64;
    }
    Ok(LogReal::from_linear(scale * total))
}

fn sum_compositions(weights: &[f64], remaining: usize, parts: usize, acc: f64, total: &mut f64) {
    if parts == 1 {
        *total += acc * weights[remaining];
        return;
    }
    // leave at least one unit for each remaining part
    for b in 1..=remaining - (parts - 1) {
        sum_compositions(weights, remaining - b, parts - 1, acc * weights[b], total);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{ln_binomial, ln_factorial, ln_poch, StirlingTables};

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn boundary_entries() {
        let t = BellTable::new(0.7, 12).unwrap();
        assert_eq!(t.get(0, 0), LogReal::ONE);
        for k in 1..=12 {
            assert!(t.get(k, 0).is_zero());
            assert!(rel(t.get(k, 1).ln(), ln_poch(0.7, k as u64)) < 1e-12);
        }
        assert!(t.get(3, 5).is_zero());
    }

    #[test]
    fn hand_worked_entry() {
        // B_{2,1}=2, B_{2,2}=1 so B_{3,2} = 1*2 + (2+2)*1 = 6
        let t = BellTable::new(1.0, 3).unwrap();
        assert!((t.get(3, 2).exp() - 6.0).abs() < 1e-12);
        assert!((bell_via_compositions(1.0, 3, 2).unwrap().exp() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn lah_numbers_at_theta_one() {
        let t = BellTable::new(1.0, 60).unwrap();
        for k in 1..=60u64 {
            for p in 1..=k {
                let lah = ln_factorial(k) - ln_factorial(p) + ln_binomial(k - 1, p - 1);
                let got = t.get(k as usize, p as usize).ln();
                assert!(
                    ((got - lah).exp() - 1.0).abs() < 1e-9,
                    "k={k} p={p}: {got} vs {lah}"
                );
            }
        }
    }

    #[test]
    fn composition_oracle_edge_cases() {
        // single composition (1, ..., 1)
        let theta: f64 = 2.3;
        for k in 1..=10 {
            let v = bell_via_compositions(theta, k, k).unwrap().ln();
            assert!((v - k as f64 * theta.ln()).abs() < 1e-12);
            let v1 = bell_via_compositions(theta, k, 1).unwrap().ln();
            assert!((v1 - ln_poch(theta, k as u64)).abs() < 1e-12);
        }
        assert!(matches!(bell_via_compositions(1.0, 26, 3), Err(Error::Method(_))));
    }

    #[test]
    fn table_matches_compositions() {
        for &theta in &[0.25, 0.5, 1.0, 1.5, 5.0] {
            let t = BellTable::new(theta, 12).unwrap();
            for k in 1..=12 {
                for p in 1..=k {
                    let oracle = bell_via_compositions(theta, k, p).unwrap().exp();
                    let got = t.get(k, p).exp();
                    assert!(rel(got, oracle) <= 1e-9, "theta={theta} k={k} p={p}");
                }
            }
        }
    }

    #[test]
    fn truncated_row_matches_table() {
        for &theta in &[0.2, 1.0, 3.0] {
            let t = BellTable::new(theta, 40).unwrap();
            for k in [1usize, 2, 7, 40] {
                for p_max in [0usize, 1, 3, 40] {
                    let row = bell_row(theta, k, p_max);
                    assert_eq!(row.len(), p_max.min(k) + 1);
                    for (p, v) in row.iter().enumerate() {
                        let want = t.get(k, p).ln();
                        if want.is_finite() {
                            assert!((v - want).abs() < 1e-9 * want.abs().max(1.0));
                        } else {
                            assert_eq!(*v, want);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn large_theta_approaches_stirling_second_kind() {
        let theta = 1e6;
        let t = BellTable::new(theta, 12).unwrap();
        let s = StirlingTables::new(12);
        for k in 1..=12 {
            for p in 1..=k {
                let ratio = (t.get(k, p).ln() - k as f64 * theta.ln()).exp();
                let want = s.second_kind(k, p).exp();
                assert!(rel(ratio, want) <= 1e-4, "k={k} p={p}: {ratio} vs {want}");
            }
        }
    }

    #[test]
    fn janzen_scale_table_is_finite() {
        let t = BellTable::new(0.2, 1000).unwrap();
        for p in 1..=1000 {
            assert!(t.get(1000, p).ln().is_finite());
        }
    }

    #[test]
    fn resource_and_domain_errors() {
        assert!(matches!(BellTable::new(1.0, usize::MAX / 2), Err(Error::Resource(_))));
        assert!(matches!(BellTable::new(0.0, 3), Err(Error::Domain(_))));
        assert!(matches!(BellTable::new(1.0, 0), Err(Error::Domain(_))));
    }
}
