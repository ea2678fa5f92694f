//! Stopping rules: waiting time to the smallest fragment, coupon-collector
//! completion, and the ε rule on the estimated chance of a new species.

use serde::{Deserialize, Serialize};

use crate::distributions::{p_logpmf, ModelKind, PMethod, Shape};
use crate::error::{domain, Error, Result};
use crate::estimators::{kingman_gamma, mle_n_shape, umvb_n_shape, umvb_rational, NEstimator};
use crate::numerics::{ln_binomial, log_sum_exp};
use crate::sampling::{polya_sequence, rng_from_seed, sample_partition_with};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    SmallestFragment,
    Coupon,
    Epsilon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
}

/// A probability with its Monte Carlo standard error, if simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailProbability {
    pub probability: f64,
    pub std_error: Option<f64>,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoppingReport {
    pub rule: Rule,
    pub method: Method,
    pub k_values: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub probabilities: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub std_errors: Option<Vec<f64>>,
    /// Sample size at which the ε rule fires.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop_index: Option<u64>,
    /// Estimated chance of a new species at each `k` (ε rule), `None` where
    /// undefined.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub r_values: Option<Vec<Option<f64>>>,
    /// Sample sizes skipped because the estimate was undefined there.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub skipped: Vec<u64>,
}

/// Partitions averaged by the Monte Carlo smallest-fragment rule.
pub const DEFAULT_MC_PARTITIONS: usize = 10_000;

/// `P(K_(n) > k)`: the chance that the smallest fragment is still unvisited
/// after `k` throws.
///
/// The Bose-Einstein closed form is
/// `1 - (k/n)(1-1/n)^{k-1} sum_j C(k-1,j) (n-1)^{-j} / (n+j)`; any θ can use
/// the Monte Carlo average of `(1 - S_(n))^k` over `reps` partitions.
pub fn smallest_fragment_tail(
    n: u64,
    theta: f64,
    k: u64,
    method: Method,
    reps: usize,
    seed: u64,
) -> Result<TailProbability> {
    Ok(smallest_fragment_tails(n, theta, &[k], method, reps, seed)?.remove(0))
}

/// As [`smallest_fragment_tail`] for several `k` over the same partitions.
pub fn smallest_fragment_tails(
    n: u64,
    theta: f64,
    ks: &[u64],
    method: Method,
    reps: usize,
    seed: u64,
) -> Result<Vec<TailProbability>> {
    if n < 2 {
        return domain("smallest fragment rule needs n >= 2");
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return domain(format!("theta must be positive, got {theta}"));
    }
    match method {
        Method::ClosedForm if theta != 1.0 => Err(Error::Method(format!(
            "closed form exists only for theta = 1, got {theta}; use monte_carlo"
        ))),
        Method::ClosedForm => Ok(ks
            .iter()
            .map(|&k| TailProbability { probability: be_smallest_tail(n, k), std_error: None, method })
            .collect()),
        Method::MonteCarlo => {
            if reps < 2 {
                return domain("Monte Carlo needs at least 2 partitions");
            }
            let mut rng = rng_from_seed(seed);
            let mut sums = vec![(0.0f64, 0.0f64); ks.len()];
            for _ in 0..reps {
                let smallest = sample_partition_with(&mut rng, n as usize, theta)?.smallest();
                let ln_keep = (-smallest).ln_1p();
                for (acc, &k) in sums.iter_mut().zip(ks) {
                    let v = (k as f64 * ln_keep).exp();
                    acc.0 += v;
                    acc.1 += v * v;
                }
            }
            let r = reps as f64;
            Ok(sums
                .into_iter()
                .map(|(s, s2)| {
                    let mean = s / r;
                    let var = ((s2 - r * mean * mean) / (r - 1.0)).max(0.0);
                    TailProbability { probability: mean, std_error: Some((var / r).sqrt()), method }
                })
                .collect())
        }
    }
}

fn be_smallest_tail(n: u64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let nf = n as f64;
    let terms: Vec<f64> = (0..k)
        .map(|j| ln_binomial(k - 1, j) - j as f64 * (nf - 1.0).ln() - (nf + j as f64).ln())
        .collect();
    let ln_hit = (k as f64 / nf).ln() + (k - 1) as f64 * (-1.0 / nf).ln_1p() + log_sum_exp(&terms);
    (-ln_hit.exp_m1()).clamp(0.0, 1.0)
}

/// `P(K_n^+ <= k)`: all `n` species seen within `k` draws, which is
/// `P(P_{n,k} = n)`.
pub fn coupon_cdf(model: &ModelKind, k: u64) -> Result<f64> {
    model.validate()?;
    let n = match model.n() {
        Some(n) => n,
        None => return Err(Error::Unsupported("the Kingman limit never completes a collection".into())),
    };
    if k < n {
        return Ok(0.0);
    }
    let method = match model {
        ModelKind::Dirichlet { theta, .. } if *theta != 1.0 => PMethod::Bell,
        _ => PMethod::Special,
    };
    Ok(p_logpmf(model, k, n, method)?.exp().min(1.0))
}

/// Coupon-collector CDF over several sample sizes as a report.
pub fn coupon_report(model: &ModelKind, ks: &[u64]) -> Result<StoppingReport> {
    let probabilities = ks.iter().map(|&k| coupon_cdf(model, k)).collect::<Result<Vec<_>>>()?;
    Ok(StoppingReport {
        rule: Rule::Coupon,
        method: Method::ClosedForm,
        k_values: ks.to_vec(),
        probabilities: Some(probabilities),
        std_errors: None,
        stop_index: None,
        r_values: None,
        skipped: Vec::new(),
    })
}

/// Smallest-fragment tail over several sample sizes as a report.
pub fn smallest_fragment_report(
    n: u64,
    theta: f64,
    ks: &[u64],
    method: Method,
    reps: usize,
    seed: u64,
) -> Result<StoppingReport> {
    let tails = smallest_fragment_tails(n, theta, ks, method, reps, seed)?;
    Ok(StoppingReport {
        rule: Rule::SmallestFragment,
        method,
        k_values: ks.to_vec(),
        probabilities: Some(tails.iter().map(|t| t.probability).collect()),
        std_errors: (method == Method::MonteCarlo).then(|| tails.iter().filter_map(|t| t.std_error).collect()),
        stop_index: None,
        r_values: None,
        skipped: Vec::new(),
    })
}

/// Estimated probability that the next draw is a new species after `k`
/// draws showing `p` species; `None` where the estimator is undefined.
///
/// With θ finite this is `(n - P) θ / (n θ + k)` at the chosen estimate of
/// `n`; at θ = 1 it reduces to `P(P-1)/(k^2-P)` (MLE) and `P(P-1)/(k(k+1))`
/// (UMVB). In the Kingman limit the UMVB is `s_{k-1,P-1}/s_{k,P}` and the
/// MLE variant `γ̂/(γ̂+k)`.
pub fn new_species_estimate(shape: Shape, k: u64, p: u64, n_estimator: NEstimator) -> Result<Option<f64>> {
    if p == 0 || p > k {
        return domain(format!("P={p} must lie in 1..={k}"));
    }
    let (kf, pf) = (k as f64, p as f64);
    Ok(match (shape, n_estimator) {
        (Shape::Theta(t), NEstimator::Mle) if t == 1.0 => {
            (p < k).then(|| pf * (pf - 1.0) / (kf * kf - pf))
        }
        (Shape::Theta(t), NEstimator::Umvb) if t == 1.0 => Some(pf * (pf - 1.0) / (kf * (kf + 1.0))),
        (Shape::Kingman, NEstimator::Umvb) => Some(umvb_rational(1, k, p)?),
        (Shape::Kingman, NEstimator::Mle) => {
            let g = kingman_gamma(k, p)?.gamma_hat;
            g.map(|g| g / (g + kf))
        }
        (_, est) => {
            let n = match est {
                NEstimator::Mle => mle_n_shape(shape, k, p)?.n_mle.map(|e| e.value),
                NEstimator::Umvb => umvb_n_shape(shape, k, p)?.n_umvb,
            };
            n.map(|n| match shape {
                Shape::Theta(t) => (n - pf) * t / (n * t + kf),
                _ => (n - pf) / n,
            })
        }
    })
}

/// First `k` of the trajectory at which the estimated new-species
/// probability drops below `epsilon`.
pub fn epsilon_stop(
    shape: Shape,
    epsilon: f64,
    trajectory: &[(u64, u64)],
    n_estimator: NEstimator,
) -> Result<StoppingReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return domain(format!("epsilon must lie in (0, 1), got {epsilon}"));
    }
    for w in trajectory.windows(2) {
        if w[1].0 <= w[0].0 || w[1].1 < w[0].1 {
            return domain("trajectory needs increasing k and nondecreasing P");
        }
    }
    let mut report = StoppingReport {
        rule: Rule::Epsilon,
        method: Method::ClosedForm,
        k_values: Vec::new(),
        probabilities: None,
        std_errors: None,
        stop_index: None,
        r_values: Some(Vec::new()),
        skipped: Vec::new(),
    };
    for &(k, p) in trajectory {
        let r = new_species_estimate(shape, k, p, n_estimator)?;
        report.k_values.push(k);
        report.r_values.as_mut().unwrap().push(r);
        match r {
            None => report.skipped.push(k),
            Some(r) if r < epsilon => {
                report.stop_index = Some(k);
                break;
            }
            Some(_) => {}
        }
    }
    Ok(report)
}

/// `(k, P_k)` for `k = 1..=labels.len()`.
pub fn trajectory_from_labels(labels: &[u32]) -> Vec<(u64, u64)> {
    let mut seen = std::collections::HashSet::new();
    labels
        .iter()
        .enumerate()
        .map(|(j, l)| {
            seen.insert(*l);
            (j as u64 + 1, seen.len() as u64)
        })
        .collect()
}

/// Richness trajectory of a simulated Pólya urn sample.
pub fn simulate_trajectory(n: usize, theta: f64, k_max: usize, seed: u64) -> Result<Vec<(u64, u64)>> {
    if n == 0 || !(theta > 0.0) {
        return domain("trajectory needs n >= 1 and theta > 0");
    }
    let labels = polya_sequence(&mut rng_from_seed(seed), n, theta, k_max);
    Ok(trajectory_from_labels(&labels))
}
