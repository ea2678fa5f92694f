//! Replicated estimation over one simulated partition.
//!
//! One partition is drawn per `(n, θ)`; each replication throws `max(ks)`
//! labels onto it and every `k` in the grid reuses the first `k` of them, so
//! the sample sizes share their random numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::estimators::{joint_estimate, mle_n, umvb_n, EstimateReport, JointStatistic, NEstimator, Scheme};
use crate::sampling::{
    occupancy_stats, pair_match_d, psi_simpson, sample_partition_with, stream_rng, throw_labels, OccupancyVector,
    PartitionWeights,
};

pub const DEFAULT_REPS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub theta: f64,
    pub ks: Vec<u64>,
    pub reps: usize,
    pub seed: u64,
    /// Also run the UMVB `ñ` with θ known.
    pub include_umvb: bool,
    pub scheme: Scheme,
}

impl SimConfig {
    /// The grid `k ∈ {2n/3, n, 3n/2}` (rounded down).
    pub fn standard_grid(n: usize, theta: f64, reps: usize, seed: u64) -> Self {
        let n64 = n as u64;
        SimConfig {
            n,
            theta,
            ks: vec![2 * n64 / 3, n64, 3 * n64 / 2],
            reps,
            seed,
            include_umvb: false,
            scheme: Scheme::Pilot,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.theta > 0.0) || !self.theta.is_finite() {
            return domain("simulation needs n >= 1 and a positive finite theta");
        }
        if self.reps == 0 || self.ks.is_empty() || self.ks.contains(&0) {
            return domain("simulation needs reps >= 1 and positive sample sizes");
        }
        Ok(())
    }
}

/// One estimator evaluation. `diverged` marks a value taken from the last
/// iterate of a run that did not converge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub value: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub k: u64,
    pub p: u64,
    pub n_hat: Option<Outcome>,
    pub n_tilde: Option<Outcome>,
    pub n1: Option<Outcome>,
    pub theta1: Option<Outcome>,
    pub n2: Option<Outcome>,
    pub theta2: Option<Outcome>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Replications contributing a value, diverged ones included.
    pub count: usize,
    pub diverged: usize,
    /// Replications with no value at all.
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRow {
    pub k: u64,
    pub p_mean: f64,
    pub n_hat: Summary,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_tilde: Option<Summary>,
    pub n1: Summary,
    pub theta1: Summary,
    pub n2: Summary,
    pub theta2: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    /// Smallest and largest fragment of the simulated partition.
    pub partition_range: (f64, f64),
    pub rows: Vec<SimRow>,
}

/// The partition shared by all replications (stream 0 of the seed).
pub fn simulation_partition(config: &SimConfig) -> Result<PartitionWeights> {
    config.validate()?;
    sample_partition_with(&mut stream_rng(config.seed, 0), config.n, config.theta)
}

fn n_outcome(r: &EstimateReport) -> Option<Outcome> {
    match (r.n(), r.last_iterate()) {
        (Some(v), _) => Some(Outcome { value: v, diverged: false }),
        (None, Some(v)) => Some(Outcome { value: v, diverged: true }),
        _ => None,
    }
}

fn theta_outcome(r: &EstimateReport) -> Option<Outcome> {
    r.theta_hat.map(|v| Outcome { value: v, diverged: r.diverged() })
}

/// Replication `rep` (stream `rep + 1` of the seed) over `partition`.
pub fn replicate(config: &SimConfig, partition: &PartitionWeights, rep: usize) -> Result<Vec<SampleOutcome>> {
    let k_max = *config.ks.iter().max().unwrap() as usize;
    let labels = throw_labels(&mut stream_rng(config.seed, rep as u64 + 1), partition, k_max);
    config
        .ks
        .iter()
        .map(|&k| {
            let occ = OccupancyVector::from_labels(config.n, &labels[..k as usize]);
            let stats = occupancy_stats(&occ)?;
            let p = stats.p;
            let n_hat = n_outcome(&mle_n(config.theta, k, p)?);
            let n_tilde = if config.include_umvb { n_outcome(&umvb_n(config.theta, k, p)?) } else { None };
            let joint = |stat: JointStatistic, s: f64| -> Result<Option<EstimateReport>> {
                if !(s > 0.0 && s < 1.0) {
                    return Ok(None);
                }
                joint_estimate(stat, k, p, s, NEstimator::Mle, config.scheme).map(Some)
            };
            let d = if k >= 2 { pair_match_d(&stats.spectrum)? } else { f64::NAN };
            let by_d = joint(JointStatistic::D, d)?;
            let by_psi = joint(JointStatistic::Psi, psi_simpson(&stats.spectrum))?;
            Ok(SampleOutcome {
                k,
                p,
                n_hat,
                n_tilde,
                n1: by_d.as_ref().and_then(n_outcome),
                theta1: by_d.as_ref().and_then(theta_outcome),
                n2: by_psi.as_ref().and_then(n_outcome),
                theta2: by_psi.as_ref().and_then(theta_outcome),
            })
        })
        .collect()
}

/// Sum in a fixed pairwise order, independent of thread scheduling.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

pub fn summarize(outcomes: &[Option<Outcome>]) -> Summary {
    let values: Vec<f64> = outcomes.iter().flatten().map(|o| o.value).filter(|v| v.is_finite()).collect();
    let diverged = outcomes.iter().flatten().filter(|o| o.diverged).count();
    let count = values.len();
    let mean = (count > 0).then(|| pairwise_sum(&values) / count as f64);
    let std = mean.filter(|_| count > 1).map(|m| {
        let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
        (pairwise_sum(&sq) / (count - 1) as f64).sqrt()
    });
    Summary { mean, std, count, diverged, missing: outcomes.len() - count }
}

/// Run all replications in parallel and reduce them in replication order.
pub fn simulate(config: &SimConfig) -> Result<SimReport> {
    let partition = simulation_partition(config)?;
    let reps: Vec<Vec<SampleOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|r| replicate(config, &partition, r))
        .collect::<Result<_>>()?;
    let rows = config
        .ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let col = |f: fn(&SampleOutcome) -> Option<Outcome>| -> Vec<Option<Outcome>> {
                reps.iter().map(|r| f(&r[j])).collect()
            };
            let ps: Vec<f64> = reps.iter().map(|r| r[j].p as f64).collect();
            SimRow {
                k,
                p_mean: pairwise_sum(&ps) / ps.len() as f64,
                n_hat: summarize(&col(|s| s.n_hat)),
                n_tilde: config.include_umvb.then(|| summarize(&col(|s| s.n_tilde))),
                n1: summarize(&col(|s| s.n1)),
                theta1: summarize(&col(|s| s.theta1)),
                n2: summarize(&col(|s| s.n2)),
                theta2: summarize(&col(|s| s.theta2)),
            }
        })
        .collect();
    Ok(SimReport { config: config.clone(), partition_range: (partition.smallest(), partition.largest()), rows })
}
