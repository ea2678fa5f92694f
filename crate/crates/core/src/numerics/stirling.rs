use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use super::{log_add_exp, LogReal};

/// Rows up to this index also carry exact big-integer values.
pub const EXACT_LIMIT: usize = 60;

/// Stirling numbers of the second kind `S_{k,p}` and unsigned first kind
/// `s_{k,p}` for `0 <= p <= k <= k_max`, in log domain for every row and
/// exactly for rows `<= EXACT_LIMIT`.
#[derive(Debug, Clone)]
pub struct StirlingTables {
    k_max: usize,
    ln_second: Vec<Vec<f64>>,
    ln_first: Vec<Vec<f64>>,
    exact_second: Vec<Vec<BigUint>>,
    exact_first: Vec<Vec<BigUint>>,
}

impl StirlingTables {
    pub fn new(k_max: usize) -> Self {
        let mut ln_second = vec![vec![0.0]];
        let mut ln_first = vec![vec![0.0]];
        for k in 0..k_max {
            let (ps, pf) = (&ln_second[k], &ln_first[k]);
            let mut s2 = vec![f64::NEG_INFINITY; k + 2];
            let mut s1 = vec![f64::NEG_INFINITY; k + 2];
            for p in 1..=k + 1 {
                let (stay2, stay1) = if p <= k {
                    ((p as f64).ln() + ps[p], (k as f64).ln() + pf[p])
                } else {
                    (f64::NEG_INFINITY, f64::NEG_INFINITY)
                };
                s2[p] = log_add_exp(ps[p - 1], stay2);
                s1[p] = log_add_exp(pf[p - 1], stay1);
            }
            ln_second.push(s2);
            ln_first.push(s1);
        }

        let exact_rows = k_max.min(EXACT_LIMIT);
        let mut exact_second = vec![vec![BigUint::one()]];
        let mut exact_first = vec![vec![BigUint::one()]];
        for k in 0..exact_rows {
            let (ps, pf) = (&exact_second[k], &exact_first[k]);
            let mut s2 = vec![BigUint::zero(); k + 2];
            let mut s1 = vec![BigUint::zero(); k + 2];
            for p in 1..=k + 1 {
                s2[p] = ps[p - 1].clone();
                s1[p] = pf[p - 1].clone();
                if p <= k {
                    s2[p] += &ps[p] * BigUint::from(p);
                    s1[p] += &pf[p] * BigUint::from(k);
                }
            }
            exact_second.push(s2);
            exact_first.push(s1);
        }

        StirlingTables { k_max, ln_second, ln_first, exact_second, exact_first }
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `S_{k,p}`; zero outside the triangle.
    pub fn second_kind(&self, k: usize, p: usize) -> LogReal {
        LogReal::from_ln(lookup(&self.ln_second, k, p))
    }

    /// Unsigned `s_{k,p}`; zero outside the triangle.
    pub fn first_kind(&self, k: usize, p: usize) -> LogReal {
        LogReal::from_ln(lookup(&self.ln_first, k, p))
    }

    pub fn second_kind_exact(&self, k: usize, p: usize) -> Option<&BigUint> {
        self.exact_second.get(k).and_then(|r| r.get(p))
    }

    pub fn first_kind_exact(&self, k: usize, p: usize) -> Option<&BigUint> {
        self.exact_first.get(k).and_then(|r| r.get(p))
    }
}

fn lookup(rows: &[Vec<f64>], k: usize, p: usize) -> f64 {
    assert!(k < rows.len(), "row {k} beyond table");
    rows[k].get(p).copied().unwrap_or(f64::NEG_INFINITY)
}

/// Row `k` of `ln S_{k,p}` for `p = 0..=min(k, p_max)`, in `O(k p_max)`.
pub fn ln_stirling_second_row(k: usize, p_max: usize) -> Vec<f64> {
    ln_row(k, p_max, |p, _| p as f64)
}

/// Row `k` of unsigned `ln s_{k,p}` for `p = 0..=min(k, p_max)`.
pub fn ln_stirling_first_row(k: usize, p_max: usize) -> Vec<f64> {
    ln_row(k, p_max, |_, kk| kk as f64)
}

// shared recurrence T(k+1,p) = T(k,p-1) + c(p,k) T(k,p)
fn ln_row(k: usize, p_max: usize, coef: impl Fn(usize, usize) -> f64) -> Vec<f64> {
    let width = p_max.min(k) + 1;
    let mut row = vec![f64::NEG_INFINITY; width];
    row[0] = 0.0;
    for kk in 0..k {
        let top = (kk + 1).min(width - 1);
        for p in (1..=top).rev() {
            let stay = if p <= kk { coef(p, kk).ln() + row[p] } else { f64::NEG_INFINITY };
            row[p] = log_add_exp(row[p - 1], stay);
        }
        row[0] = f64::NEG_INFINITY;
    }
    row
}

/// Bell numbers `Bell_0..=Bell_{k_max}` from the Bell triangle.
pub fn bell_numbers_exact(k_max: usize) -> Vec<BigUint> {
    let mut out = vec![BigUint::one()];
    let mut row = vec![BigUint::one()];
    for _ in 0..k_max {
        let mut next = Vec::with_capacity(row.len() + 1);
        next.push(row.last().unwrap().clone());
        for x in &row {
            let v = next.last().unwrap() + x;
            next.push(v);
        }
        out.push(next[0].clone());
        row = next;
    }
    out.truncate(k_max + 1);
    out
}

/// Natural log of a big integer; `-inf` for zero.
pub(crate) fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}
