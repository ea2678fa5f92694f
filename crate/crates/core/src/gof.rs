//! Goodness of fit from the species vector count: expected counts `α_i`,
//! their UMVB and MLE estimates, Pearson statistics and log-likelihoods.
//!
//! Two formula families are kept side by side. `Printed` is
//! `α_i = n i C(k,i) ((n-1)θ)_{k-i}/(nθ)_{k-i}` with
//! `α̃_i = (θ)_i/(i-1)! B_{k-i,P-1}/B_{k,P}` and, for Kingman,
//! `α_i = k!/(i (k-i)!) γ/(γ+i-1)`. `Derived` is the Dirichlet moment
//! `E[A_i] = n C(k,i) (θ)_i ((n-1)θ)_{k-i}/(nθ)_k`, its conditional
//! expectation `C(k,i) (θ)_i B_{k-i,P-1}/B_{k,P}` and the Ewens mean
//! `γ/i k!/(k-i)! / (γ+k-i)_i`.

use serde::{Deserialize, Serialize};

use crate::distributions::{esf2_logpmf, ModelKind, Shape};
use crate::error::{domain, Error, Result};
use crate::estimators::{kingman_gamma, mle_n_shape};
use crate::numerics::{
    ln_binomial, ln_bracket, ln_factorial, ln_falling, ln_poch, BellTable, LogReal, StirlingTables,
};
use crate::sampling::FrequencySpectrum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AlphaVariant {
    Printed,
    #[default]
    Derived,
}

/// Expected-count parameter: a Dirichlet-type model at real `n`, or Kingman.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Param {
    Finite { shape: Shape, n: f64 },
    Kingman { gamma: f64 },
}

fn ln_alpha(param: Param, k: u64, i: u64, variant: AlphaVariant) -> f64 {
    match param {
        Param::Finite { shape, n } => {
            let head = n.ln() + ln_binomial(k, i);
            let (bracket, extra) = match shape {
                Shape::Theta(t) => (
                    ln_bracket(t, n, k - i, 1.0),
                    ln_poch(t, i) - ln_poch(n * t + (k - i) as f64, i),
                ),
                // θ → ∞ limits
                _ => ((k - i) as f64 * (-1.0 / n).ln_1p(), -(i as f64) * n.ln()),
            };
            match variant {
                AlphaVariant::Printed => head + (i as f64).ln() + bracket,
                AlphaVariant::Derived => head + bracket + extra,
            }
        }
        Param::Kingman { gamma } => {
            let lead = gamma.ln() - (i as f64).ln() + ln_falling(k, i);
            match variant {
                AlphaVariant::Printed => lead - (gamma + (i - 1) as f64).ln(),
                AlphaVariant::Derived => lead - ln_poch(gamma + (k - i) as f64, i),
            }
        }
    }
}

fn check_i(k: u64, i: u64) -> Result<()> {
    if i == 0 || i > k {
        return domain(format!("i={i} must lie in 1..={k}"));
    }
    Ok(())
}

/// Expected number of species seen exactly `i` times in `k` draws.
pub fn alpha_expected(model: &ModelKind, k: u64, i: u64, variant: AlphaVariant) -> Result<f64> {
    model.validate()?;
    check_i(k, i)?;
    let param = match (model.n(), model) {
        (Some(n), _) => Param::Finite { shape: model.shape(), n: n as f64 },
        (None, ModelKind::Kingman { gamma }) => Param::Kingman { gamma: *gamma },
        _ => unreachable!(),
    };
    Ok(ln_alpha(param, k, i, variant).exp())
}

/// `α_1..=α_k` at a real-valued `n` (as for a plug-in MLE).
pub fn alpha_expected_row(shape: Shape, n: f64, k: u64, variant: AlphaVariant) -> Result<Vec<f64>> {
    let param = match shape {
        Shape::Kingman => return domain("use alpha_kingman_row for the Kingman limit"),
        _ if !(n >= 1.0) || !n.is_finite() => return domain(format!("n must be finite and >= 1, got {n}")),
        _ => Param::Finite { shape, n },
    };
    Ok((1..=k).map(|i| ln_alpha(param, k, i, variant).exp()).collect())
}

/// Kingman `α_1..=α_k` at `γ`.
pub fn alpha_kingman_row(gamma: f64, k: u64, variant: AlphaVariant) -> Result<Vec<f64>> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return domain(format!("gamma must be positive, got {gamma}"));
    }
    Ok((1..=k).map(|i| ln_alpha(Param::Kingman { gamma }, k, i, variant).exp()).collect())
}

/// UMVB estimate `α̃_i` given `P = p` species in `k` draws under a Dirichlet
/// model with shape `theta`.
pub fn alpha_umvb(theta: f64, k: u64, p: u64, i: u64, variant: AlphaVariant) -> Result<f64> {
    check_i(k, i)?;
    Ok(alpha_umvb_row(Shape::Theta(theta), k, p, variant)?[i as usize - 1])
}

/// `α̃_1..=α̃_k` for any shape. Entries with `k - i < P - 1` are zero.
pub fn alpha_umvb_row(shape: Shape, k: u64, p: u64, variant: AlphaVariant) -> Result<Vec<f64>> {
    if k == 0 || p == 0 || p > k {
        return domain(format!("need 1 <= P={p} <= k={k}"));
    }
    let ku = k as usize;
    // ln of the count ratio T_{k-i,P-1}/T_{k,P} and the shape's weight on i
    let (ratio, weight): (Box<dyn Fn(usize) -> f64>, Box<dyn Fn(u64) -> f64>) = match shape {
        Shape::Theta(t) => {
            if !(t > 0.0) || !t.is_finite() {
                return domain(format!("theta must be positive, got {t}"));
            }
            let table = BellTable::new(t, ku)?;
            let den = table.get(ku, p as usize).ln();
            (
                Box::new(move |i| table.get(ku - i, p as usize - 1).ln() - den),
                Box::new(move |i| ln_poch(t, i)),
            )
        }
        Shape::MaxwellBoltzmann | Shape::Kingman => {
            let tables = StirlingTables::new(ku);
            let mb = shape == Shape::MaxwellBoltzmann;
            let get = move |kk: usize, pp: usize| {
                if mb { tables.second_kind(kk, pp).ln() } else { tables.first_kind(kk, pp).ln() }
            };
            let den = get(ku, p as usize);
            (
                Box::new(move |i| get(ku - i, p as usize - 1) - den),
                // (θ)_i θ^{-i} → 1 for MB; (θ)_i θ^{-1} → (i-1)! for Kingman
                Box::new(move |i| if mb { 0.0 } else { ln_factorial(i - 1) }),
            )
        }
    };
    Ok((1..=k)
        .map(|i| {
            let r = ratio(i as usize);
            if r == f64::NEG_INFINITY {
                return 0.0;
            }
            let ln = match variant {
                AlphaVariant::Printed => weight(i) - ln_factorial(i - 1),
                AlphaVariant::Derived => weight(i) + ln_binomial(k, i),
            };
            (ln + r).exp()
        })
        .collect())
}

/// The printed Bose-Einstein closed form
/// `i P(P-1)/(k-i+1) (k-i-1)!(k-P)!/(k!(k-1)!)`, kept for comparison with the
/// Bell-ratio route. Zero where a factorial argument is negative.
pub fn alpha_umvb_be_printed(k: u64, p: u64, i: u64) -> Result<f64> {
    check_i(k, i)?;
    if p == 0 || p > k {
        return domain(format!("need 1 <= P={p} <= k={k}"));
    }
    if i == k || p < 2 {
        return Ok(0.0);
    }
    let ln = (i as f64).ln() + (p as f64).ln() + ((p - 1) as f64).ln() - ((k - i + 1) as f64).ln()
        + ln_factorial(k - i - 1)
        + ln_factorial(k - p)
        - ln_factorial(k)
        - ln_factorial(k - 1);
    Ok(ln.exp())
}

/// Pearson statistic `sum (A_i - α_i)^2 / α_i` over `i = 1..=alphas.len()`.
///
/// `alphas` may stop anywhere between the largest observed class and `k`.
pub fn chi2(observed: &FrequencySpectrum, alphas: &[f64]) -> Result<f64> {
    check_alphas(observed, alphas)?;
    if let Some(i) = alphas.iter().position(|&a| !(a > 0.0)) {
        return domain(format!("expected count at i={} is not positive; pool the cells", i + 1));
    }
    Ok(cells(observed, alphas).map(|(o, e)| (o - e) * (o - e) / e).sum())
}

/// Pearson statistic after pooling every cell with expected count below
/// `min_expected` into a single right-tail cell. A tail still short of the
/// threshold is merged into the last kept cell.
pub fn chi2_pooled(observed: &FrequencySpectrum, alphas: &[f64], min_expected: f64) -> Result<f64> {
    check_alphas(observed, alphas)?;
    let mut kept: Vec<(f64, f64)> = Vec::new();
    let mut tail = (0.0, 0.0);
    for (o, e) in cells(observed, alphas) {
        if e >= min_expected {
            kept.push((o, e));
        } else {
            tail.0 += o;
            tail.1 += e;
        }
    }
    if tail.1 > 0.0 || tail.0 > 0.0 {
        match kept.last_mut() {
            Some(last) if tail.1 < min_expected => {
                last.0 += tail.0;
                last.1 += tail.1;
            }
            _ => kept.push(tail),
        }
    }
    if kept.iter().any(|&(_, e)| !(e > 0.0)) {
        return domain("all expected counts are zero");
    }
    Ok(kept.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum())
}

fn check_alphas(observed: &FrequencySpectrum, alphas: &[f64]) -> Result<()> {
    let top = observed.iter().map(|(i, _)| i).max().unwrap_or(0);
    if (alphas.len() as u64) < top || alphas.len() as u64 > observed.k() {
        return domain(format!("{} expected counts for classes up to {top} and k={}", alphas.len(), observed.k()));
    }
    if alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
        return domain("expected counts must be finite and nonnegative");
    }
    Ok(())
}

fn cells<'a>(observed: &'a FrequencySpectrum, alphas: &'a [f64]) -> impl Iterator<Item = (f64, f64)> + 'a {
    alphas.iter().enumerate().map(|(j, &e)| (observed.get(j as u64 + 1) as f64, e))
}

/// Log-likelihood of the observed spectrum; `log 0` when `P > n`.
pub fn loglik(model: &ModelKind, observed: &FrequencySpectrum) -> Result<LogReal> {
    esf2_logpmf(model, observed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaRow {
    pub i: u64,
    pub observed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expected: Option<f64>,
    pub umvb: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelLoglik {
    pub model: ModelKind,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub family: String,
    pub variant: AlphaVariant,
    pub k: u64,
    pub p: u64,
    /// Plug-in `n̂` (or `γ̂` for Kingman) behind the MLE column.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fitted: Option<f64>,
    pub alphas: Vec<AlphaRow>,
    /// Pooled statistics (cells with expected count below 1 pooled).
    pub chi2_umvb: Option<f64>,
    pub chi2_mle: Option<f64>,
    pub chi2_umvb_unpooled: Option<f64>,
    pub chi2_mle_unpooled: Option<f64>,
    pub loglik: Vec<ModelLoglik>,
    pub dof_note: String,
}

pub const DOF_NOTE: &str = "raw statistics only; no reference distribution or degrees of freedom are assigned";

fn family_name(shape: Shape) -> String {
    match shape {
        Shape::Theta(t) if t == 1.0 => "bose_einstein".into(),
        Shape::Theta(t) => format!("dirichlet(theta={t})"),
        Shape::MaxwellBoltzmann => "maxwell_boltzmann".into(),
        Shape::Kingman => "kingman".into(),
    }
}

/// Fitted finite model at the MLE, with `n` rounded but never below `P`.
fn fitted_model(shape: Shape, k: u64, p: u64) -> Result<Option<(ModelKind, f64)>> {
    Ok(match shape {
        Shape::Kingman => kingman_gamma(k, p)?.gamma_hat.map(|g| (ModelKind::Kingman { gamma: g }, g)),
        _ => mle_n_shape(shape, k, p)?.n_mle.map(|e| {
            let n = (e.value.round() as u64).max(p);
            let model = match shape {
                Shape::Theta(t) if t == 1.0 => ModelKind::BoseEinstein { n },
                Shape::Theta(t) => ModelKind::Dirichlet { n, theta: t },
                _ => ModelKind::MaxwellBoltzmann { n },
            };
            (model, e.value)
        }),
    })
}

/// Full goodness-of-fit report for one model family. `reference` adds the
/// exact `α_i` column and its log-likelihood. Log-likelihoods are also given
/// for the Bose-Einstein, Maxwell-Boltzmann and Kingman families at their
/// own MLEs.
pub fn gof_report(
    observed: &FrequencySpectrum,
    shape: Shape,
    variant: AlphaVariant,
    reference: Option<&ModelKind>,
) -> Result<GofReport> {
    let (k, p) = (observed.k(), observed.p());
    let umvb = alpha_umvb_row(shape, k, p, variant)?;
    let fitted = fitted_model(shape, k, p)?;
    let mle = match (shape, fitted) {
        (_, None) => None,
        (Shape::Kingman, Some((_, g))) => Some(alpha_kingman_row(g, k, variant)?),
        (_, Some((_, n))) => Some(alpha_expected_row(shape, n, k, variant)?),
    };
    let expected = match reference {
        Some(m) => Some((1..=k).map(|i| alpha_expected(m, k, i, variant)).collect::<Result<Vec<_>>>()?),
        None => None,
    };
    let stat = |alphas: &Option<Vec<f64>>, pooled: bool| -> Option<f64> {
        let a = alphas.as_ref()?;
        if pooled { chi2_pooled(observed, a, 1.0).ok() } else { chi2(observed, a).ok() }
    };
    let umvb_opt = Some(umvb.clone());

    let mut loglik = Vec::new();
    if let Some(m) = reference {
        loglik.push(ModelLoglik { model: m.clone(), loglik: esf2_logpmf(m, observed)?.ln() });
    }
    for s in [Shape::Theta(1.0), Shape::MaxwellBoltzmann, Shape::Kingman, shape] {
        if let Some((m, _)) = fitted_model(s, k, p)? {
            if !loglik.iter().any(|l| l.model == m) {
                loglik.push(ModelLoglik { loglik: esf2_logpmf(&m, observed)?.ln(), model: m });
            }
        }
    }

    let alphas = (1..=k)
        .map(|i| {
            let j = i as usize - 1;
            AlphaRow {
                i,
                observed: observed.get(i),
                expected: expected.as_ref().map(|e| e[j]),
                umvb: umvb[j],
                mle: mle.as_ref().map(|m| m[j]),
            }
        })
        .collect();
    Ok(GofReport {
        family: family_name(shape),
        variant,
        k,
        p,
        fitted: fitted.map(|(_, v)| v),
        alphas,
        chi2_umvb: stat(&umvb_opt, true),
        chi2_mle: stat(&mle, true),
        chi2_umvb_unpooled: stat(&umvb_opt, false),
        chi2_mle_unpooled: stat(&mle, false),
        loglik,
        dof_note: DOF_NOTE.into(),
    })
}

impl GofReport {
    pub fn check(&self) -> Result<()> {
        let bad = self.alphas.iter().any(|r| {
            r.umvb < 0.0 || r.mle.is_some_and(|m| m < 0.0) || r.expected.is_some_and(|e| e < 0.0)
        });
        let neg_stat = [self.chi2_umvb, self.chi2_mle, self.chi2_umvb_unpooled, self.chi2_mle_unpooled]
            .iter()
            .flatten()
            .any(|c| *c < 0.0);
        if bad || neg_stat {
            return Err(Error::Validation("negative expected count or statistic".into()));
        }
        Ok(())
    }
}
