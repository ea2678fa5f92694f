//! Random Dirichlet partitions, throws and Pólya urn sequences, and the
//! reductions of a sample to the observables (P, B, A, D, ψ).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::log_sum_exp;

/// Generator used by every stochastic routine.
pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A realized partition of the unit interval into `n` positive weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionWeights {
    weights: Vec<f64>,
}

impl PartitionWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return domain("partition needs at least one weight");
        }
        if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
            return domain(format!("partition weights must be positive, found {w}"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 * weights.len().max(1) as f64 {
            return domain(format!("partition weights sum to {total}, not 1"));
        }
        Ok(PartitionWeights { weights })
    }

    pub fn uniform(n: usize) -> Self {
        PartitionWeights { weights: vec![1.0 / n as f64; n] }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn smallest(&self) -> f64 {
        self.weights.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn largest(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

/// Visit counts `K(1)..K(n)` after `k` throws.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccupancyVector {
    counts: Vec<u64>,
    k: u64,
}

impl OccupancyVector {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return domain("occupancy vector needs at least one cell");
        }
        let k = counts.iter().sum();
        Ok(OccupancyVector { counts, k })
    }

    /// Tally a label sequence over `n` cells.
    pub fn from_labels(n: usize, labels: &[u32]) -> Self {
        let mut counts = vec![0u64; n];
        for &m in labels {
            counts[m as usize] += 1;
        }
        OccupancyVector { counts, k: labels.len() as u64 }
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }
}

/// Counts `B_1..B_P` of the visited species, all positive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeciesCounts {
    counts: Vec<u64>,
}

impl SpeciesCounts {
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() || counts.contains(&0) {
            return domain("species counts must be a nonempty list of positive integers");
        }
        Ok(SpeciesCounts { counts })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn p(&self) -> u64 {
        self.counts.len() as u64
    }

    pub fn k(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn spectrum(&self) -> FrequencySpectrum {
        let mut map = BTreeMap::new();
        for &b in &self.counts {
            *map.entry(b).or_insert(0) += 1;
        }
        FrequencySpectrum { map }
    }
}

/// Species vector count: `i -> A(i)`, the number of species seen exactly `i`
/// times. Zero entries are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<u64, u64>", into = "BTreeMap<u64, u64>")]
pub struct FrequencySpectrum {
    map: BTreeMap<u64, u64>,
}

impl TryFrom<BTreeMap<u64, u64>> for FrequencySpectrum {
    type Error = Error;

    fn try_from(map: BTreeMap<u64, u64>) -> Result<Self> {
        FrequencySpectrum::new(map)
    }
}

impl From<FrequencySpectrum> for BTreeMap<u64, u64> {
    fn from(s: FrequencySpectrum) -> Self {
        s.map
    }
}

impl FrequencySpectrum {
    pub fn new(map: BTreeMap<u64, u64>) -> Result<Self> {
        if map.is_empty() {
            return Err(Error::Validation("empty frequency spectrum".into()));
        }
        if map.contains_key(&0) {
            return Err(Error::Validation("occurrence class 0 is not observable".into()));
        }
        if let Some((i, _)) = map.iter().find(|(_, a)| **a == 0) {
            return Err(Error::Validation(format!("zero species count for class {i}")));
        }
        let s = FrequencySpectrum { map };
        s.k_checked()
            .ok_or_else(|| Error::Validation("sample size overflows".into()))?;
        Ok(s)
    }

    pub fn from_pairs<I: IntoIterator<Item = (u64, u64)>>(pairs: I) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, a) in pairs {
            if map.insert(i, a).is_some() {
                return Err(Error::Validation(format!("duplicate occurrence class {i}")));
            }
        }
        FrequencySpectrum::new(map)
    }

    fn k_checked(&self) -> Option<u64> {
        self.map
            .iter()
            .try_fold(0u64, |acc, (i, a)| i.checked_mul(*a).and_then(|t| acc.checked_add(t)))
    }

    /// Sample size `sum i A(i)`.
    pub fn k(&self) -> u64 {
        self.map.iter().map(|(i, a)| i * a).sum()
    }

    /// Observed species `sum A(i)`.
    pub fn p(&self) -> u64 {
        self.map.values().sum()
    }

    pub fn get(&self, i: u64) -> u64 {
        self.map.get(&i).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.map.iter().map(|(i, a)| (*i, *a))
    }

    pub fn as_map(&self) -> &BTreeMap<u64, u64> {
        &self.map
    }

    /// Expand into species counts in increasing order.
    pub fn species_counts(&self) -> SpeciesCounts {
        let counts = self
            .iter()
            .flat_map(|(i, a)| std::iter::repeat_n(i, a as usize))
            .collect();
        SpeciesCounts { counts }
    }
}

const MAX_RESAMPLES: usize = 64;

/// Draw a partition from the symmetric Dirichlet `D_n(theta)`.
pub fn sample_partition(n: usize, theta: f64, seed: u64) -> Result<PartitionWeights> {
    sample_partition_with(&mut rng_from_seed(seed), n, theta)
}

/// Normalized gamma(θ) draws. For `theta < 1` the draws are formed in log
/// space as `ln G(1+θ) + ln(U)/θ`, which keeps tiny weights representable
/// until the final normalization. A partition with a weight that still
/// underflows to zero is redrawn.
pub fn sample_partition_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    theta: f64,
) -> Result<PartitionWeights> {
    if n == 0 {
        return domain("n must be at least 1");
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return domain(format!("theta must be positive, got {theta}"));
    }
    if n == 1 {
        return Ok(PartitionWeights { weights: vec![1.0] });
    }
    let boost = theta < 1.0;
    let gamma = Gamma::new(if boost { theta + 1.0 } else { theta }, 1.0)
        .map_err(|e| Error::Domain(e.to_string()))?;
    let mut ln_draws = vec![0.0; n];
    for _ in 0..MAX_RESAMPLES {
        for d in ln_draws.iter_mut() {
            let g: f64 = gamma.sample(rng);
            *d = if boost {
                let u: f64 = 1.0 - rng.random::<f64>();
                g.ln() + u.ln() / theta
            } else {
                g.ln()
            };
        }
        let total = log_sum_exp(&ln_draws);
        let weights: Vec<f64> = ln_draws.iter().map(|d| (d - total).exp()).collect();
        if weights.iter().all(|w| *w > 0.0) {
            let sum: f64 = weights.iter().sum();
            return Ok(PartitionWeights { weights: weights.into_iter().map(|w| w / sum).collect() });
        }
    }
    Err(Error::Resource(format!(
        "every one of {MAX_RESAMPLES} draws of D_{n}({theta}) had a weight underflow to zero"
    )))
}

/// Labels of `k` independent throws on the partition (inverse-CDF lookup).
pub fn throw_labels<R: Rng + ?Sized>(rng: &mut R, partition: &PartitionWeights, k: usize) -> Vec<u32> {
    let mut cdf = Vec::with_capacity(partition.n());
    let mut acc = 0.0;
    for w in partition.weights() {
        acc += w;
        cdf.push(acc);
    }
    let last = cdf.len() - 1;
    (0..k)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cdf.partition_point(|c| *c <= u).min(last) as u32
        })
        .collect()
}

/// Multinomial occupancy of `k` throws with cell probabilities `partition`.
pub fn sample_throws(partition: &PartitionWeights, k: usize, seed: u64) -> OccupancyVector {
    let labels = throw_labels(&mut rng_from_seed(seed), partition, k);
    OccupancyVector::from_labels(partition.n(), &labels)
}

/// Pólya urn labels: the next label is `m` with probability
/// `(θ + count of m) / (nθ + draws so far)`.
pub fn polya_sequence<R: Rng + ?Sized>(rng: &mut R, n: usize, theta: f64, k: usize) -> Vec<u32> {
    let nt = n as f64 * theta;
    let mut labels: Vec<u32> = Vec::with_capacity(k);
    for j in 0..k {
        // fresh uniform label with weight nθ, otherwise copy a past draw
        let fresh = j == 0 || rng.random::<f64>() * (nt + j as f64) < nt;
        let m = if fresh {
            rng.random_range(0..n) as u32
        } else {
            labels[rng.random_range(0..j)]
        };
        labels.push(m);
    }
    labels
}

pub fn sample_polya(n: usize, theta: f64, k: usize, seed: u64) -> Result<OccupancyVector> {
    if n == 0 || n > u32::MAX as usize {
        return domain(format!("n={n} out of range"));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return domain(format!("theta must be positive, got {theta}"));
    }
    if k == 0 {
        return domain("k must be at least 1");
    }
    let labels = polya_sequence(&mut rng_from_seed(seed), n, theta, k);
    Ok(OccupancyVector::from_labels(n, &labels))
}

/// Observables of one sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyStats {
    pub p: u64,
    pub species: SpeciesCounts,
    pub spectrum: FrequencySpectrum,
}

/// Reduce an occupancy vector to P, B (index order) and A.
pub fn occupancy_stats(occupancy: &OccupancyVector) -> Result<OccupancyStats> {
    let positive: Vec<u64> = occupancy.counts().iter().copied().filter(|c| *c > 0).collect();
    if positive.is_empty() {
        return domain("occupancy vector has no visited cell");
    }
    let species = SpeciesCounts { counts: positive };
    Ok(OccupancyStats { p: species.p(), spectrum: species.spectrum(), species })
}

/// Pair-matching statistic `D = sum A(i) i (i-1) / (k (k-1))`.
pub fn pair_match_d(spectrum: &FrequencySpectrum) -> Result<f64> {
    let k = spectrum.k();
    if k < 2 {
        return domain("pair matching needs k >= 2");
    }
    let pairs: u128 = spectrum.iter().map(|(i, a)| a as u128 * i as u128 * (i as u128 - 1)).sum();
    Ok(pairs as f64 / (k as f64 * (k - 1) as f64))
}

/// Coverage-adjusted Simpson estimate
/// `ψ = sum A(i) (i/k)^2 / (1 - (1 - i/k)^k)`.
pub fn psi_simpson(spectrum: &FrequencySpectrum) -> f64 {
    let k = spectrum.k() as f64;
    spectrum
        .iter()
        .map(|(i, a)| {
            let f = i as f64 / k;
            let coverage = if i as f64 == k { 1.0 } else { -(k * (-f).ln_1p()).exp_m1() };
            a as f64 * f * f / coverage
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DiversityKind {
    Simpson,
    Shannon,
    Renyi(f64),
}

/// Simpson `sum S^2`, Shannon `-sum S ln S`, or Rényi
/// `ln(sum S^α)/(1-α)`; Rényi of order 1 is the Shannon index.
pub fn diversity_index(partition: &PartitionWeights, kind: DiversityKind) -> Result<f64> {
    let w = partition.weights();
    match kind {
        DiversityKind::Simpson => Ok(w.iter().map(|s| s * s).sum()),
        DiversityKind::Shannon => Ok(-w.iter().map(|s| s * s.ln()).sum::<f64>()),
        DiversityKind::Renyi(alpha) if alpha == 1.0 => diversity_index(partition, DiversityKind::Shannon),
        DiversityKind::Renyi(alpha) if alpha > 1.0 && alpha.is_finite() => {
            let terms: Vec<f64> = w.iter().map(|s| alpha * s.ln()).collect();
            Ok(log_sum_exp(&terms) / (1.0 - alpha))
        }
        DiversityKind::Renyi(alpha) => domain(format!("Rényi order must be >= 1, got {alpha}")),
    }
}

/// Posterior mean `(θ + k_m) / (nθ + k)` of the weights given the counts.
pub fn posterior_mean(theta: f64, occupancy: &OccupancyVector) -> Result<PartitionWeights> {
    if !(theta > 0.0) || !theta.is_finite() {
        return domain(format!("theta must be positive, got {theta}"));
    }
    let denom = occupancy.n() as f64 * theta + occupancy.k() as f64;
    let weights = occupancy.counts().iter().map(|c| (theta + *c as f64) / denom).collect();
    Ok(PartitionWeights { weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn chi2_pvalue(stat: f64, dof: usize) -> f64 {
        1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat)
    }

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn single_fragment() {
        assert_eq!(sample_partition(1, 0.3, 1).unwrap().weights(), &[1.0]);
        let part = sample_partition(1, 2.0, 1).unwrap();
        assert_eq!(sample_throws(&part, 17, 3).counts(), &[17]);
    }

    #[test]
    fn partitions_are_valid_and_reproducible() {
        for &theta in &[0.01, 0.2, 1.0, 7.5] {
            let a = sample_partition(200, theta, 42).unwrap();
            let b = sample_partition(200, theta, 42).unwrap();
            assert_eq!(a, b);
            assert!(a.weights().iter().all(|w| *w > 0.0));
            assert!((a.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_moments() {
        // 10^4 partitions of n=100 at θ=1; S_1 only, so draws are independent
        let (n, reps) = (100usize, 10_000usize);
        let mut rng = rng_from_seed(7);
        let s1: Vec<f64> = (0..reps)
            .map(|_| sample_partition_with(&mut rng, n, 1.0).unwrap().weights()[0])
            .collect();
        let (m, v) = mean_var(&s1);
        let se_mean = (v / reps as f64).sqrt();
        assert!((m - 0.01).abs() < 3.0 * se_mean, "mean {m}");
        let target = 99.0 / (1e4 * 101.0);
        let fourth = s1.iter().map(|x| (x - m).powi(4)).sum::<f64>() / reps as f64;
        let se_var = ((fourth - v * v) / reps as f64).sqrt();
        assert!((v - target).abs() < 3.0 * se_var, "var {v} vs {target}");
    }

    #[test]
    fn small_theta_partition_moments() {
        // boosted path: E S_1 = 1/n still
        let mut rng = rng_from_seed(8);
        let s1: Vec<f64> = (0..20_000)
            .map(|_| sample_partition_with(&mut rng, 4, 0.3).unwrap().weights()[0])
            .collect();
        let (m, v) = mean_var(&s1);
        assert!((m - 0.25).abs() < 3.0 * (v / 20_000.0).sqrt());
        let target = 3.0 / (16.0 * 2.2);
        assert!((v - target).abs() < 0.05 * target, "var {v} vs {target}");
    }

    #[test]
    fn fair_coin_throws() {
        let part = PartitionWeights::uniform(2);
        let k = 100_000;
        let occ = sample_throws(&part, k, 11);
        let frac = occ.counts()[0] as f64 / k as f64;
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / k as f64).sqrt());
    }

    #[test]
    fn invalid_partitions_are_rejected() {
        assert!(PartitionWeights::new(vec![1.0, 0.0]).is_err());
        assert!(PartitionWeights::new(vec![0.5, 0.6]).is_err());
        assert!(PartitionWeights::new(vec![]).is_err());
    }

    #[test]
    fn polya_single_draw_is_uniform() {
        let mut hits = [0usize; 4];
        for seed in 0..4000 {
            let occ = sample_polya(4, 0.8, 1, seed).unwrap();
            assert_eq!(occ.counts().iter().sum::<u64>(), 1);
            hits[occ.counts().iter().position(|c| *c == 1).unwrap()] += 1;
        }
        let stat: f64 = hits.iter().map(|h| (*h as f64 - 1000.0).powi(2) / 1000.0).sum();
        assert!(chi2_pvalue(stat, 3) > 0.01);
    }

    #[test]
    fn polya_pair_matches() {
        let runs = 100_000;
        let mut rng = rng_from_seed(5);
        let same = (0..runs)
            .filter(|_| {
                let l = polya_sequence(&mut rng, 2, 1.0, 2);
                l[0] == l[1]
            })
            .count();
        let p = 2.0 / 3.0;
        let sd = (p * (1.0 - p) / runs as f64).sqrt();
        assert!((same as f64 / runs as f64 - p).abs() < 3.0 * sd);
    }

    #[test]
    fn polya_matches_partition_then_throws() {
        // n=3, θ=1, k=4: two-sample homogeneity test on the 15 occupancy vectors
        let runs = 50_000;
        let mut rng_a = rng_from_seed(21);
        let mut rng_b = rng_from_seed(22);
        let mut a: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        let mut b: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for _ in 0..runs {
            let l = polya_sequence(&mut rng_a, 3, 1.0, 4);
            *a.entry(OccupancyVector::from_labels(3, &l).counts().to_vec()).or_default() += 1.0;
            let part = sample_partition_with(&mut rng_b, 3, 1.0).unwrap();
            let l = throw_labels(&mut rng_b, &part, 4);
            *b.entry(OccupancyVector::from_labels(3, &l).counts().to_vec()).or_default() += 1.0;
        }
        let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).cloned().collect();
        assert_eq!(keys.len(), 15);
        let mut stat = 0.0;
        for key in &keys {
            let (x, y) = (a.get(key).copied().unwrap_or(0.0), b.get(key).copied().unwrap_or(0.0));
            let e = (x + y) / 2.0;
            stat += (x - e).powi(2) / e + (y - e).powi(2) / e;
        }
        assert!(chi2_pvalue(stat, keys.len() - 1) > 0.01, "stat {stat}");
    }

    #[test]
    fn polya_sequences_are_exchangeable() {
        // n=3, θ=0.5, k=3: every label sequence against the symmetric exact law
        // Π (θ)_{k_m} / (nθ)_k, which is invariant under permuting positions
        let (theta, runs) = (0.5f64, 100_000usize);
        let poch = |x: f64, k: u64| (0..k).map(|j| x + j as f64).product::<f64>();
        let mut counts = [0usize; 27];
        let mut rng = rng_from_seed(9);
        for _ in 0..runs {
            let l = polya_sequence(&mut rng, 3, theta, 3);
            counts[(l[0] * 9 + l[1] * 3 + l[2]) as usize] += 1;
        }
        let mut stat = 0.0;
        for (idx, obs) in counts.iter().enumerate() {
            let labels = [idx / 9, (idx / 3) % 3, idx % 3];
            let occ = (0..3).map(|m| labels.iter().filter(|l| **l == m).count() as u64);
            let p = occ.map(|c| poch(theta, c)).product::<f64>() / poch(3.0 * theta, 3);
            let e = p * runs as f64;
            stat += (*obs as f64 - e).powi(2) / e;
        }
        assert!(chi2_pvalue(stat, 26) > 0.01, "stat {stat}");
        // and directly: swapping the first two positions leaves the law unchanged
        let mut swap = 0.0;
        let mut cells = 0;
        for i in 0..3 {
            for j in 0..3 {
                for l in 0..3 {
                    if i < j {
                        let x = counts[i * 9 + j * 3 + l] as f64;
                        let y = counts[j * 9 + i * 3 + l] as f64;
                        swap += (x - y).powi(2) / (x + y);
                        cells += 1;
                    }
                }
            }
        }
        assert!(chi2_pvalue(swap, cells) > 0.01, "swap stat {swap}");
    }

    #[test]
    fn empirical_frequencies_converge_to_weights() {
        // max |K/k - S| over k = 10^3, 10^4, 10^5 on a fixed n=5, θ=1 partition
        let mut decreasing = 0;
        for run in 0..10u64 {
            let part = sample_partition(5, 1.0, 1000 + run).unwrap();
            let labels = throw_labels(&mut rng_from_seed(2000 + run), &part, 100_000);
            let gaps: Vec<f64> = [1_000usize, 10_000, 100_000]
                .iter()
                .map(|&k| {
                    let occ = OccupancyVector::from_labels(5, &labels[..k]);
                    occ.counts()
                        .iter()
                        .zip(part.weights())
                        .map(|(c, s)| (*c as f64 / k as f64 - s).abs())
                        .fold(0.0, f64::max)
                })
                .collect();
            if gaps[0] > gaps[1] && gaps[1] > gaps[2] {
                decreasing += 1;
            }
            assert!(gaps[2] < 0.02);
        }
        assert!(decreasing >= 9, "decreasing in {decreasing} of 10 runs");
    }

    #[test]
    fn occupancy_reduction() {
        let s = occupancy_stats(&OccupancyVector::new(vec![3, 0, 1]).unwrap()).unwrap();
        assert_eq!(s.p, 2);
        assert_eq!(s.species.counts(), &[3, 1]);
        assert_eq!(s.spectrum, FrequencySpectrum::from_pairs([(1, 1), (3, 1)]).unwrap());
        let s = occupancy_stats(&OccupancyVector::new(vec![1, 1, 1]).unwrap()).unwrap();
        assert_eq!(s.p, 3);
        assert_eq!(s.spectrum.as_map(), &BTreeMap::from([(1, 3)]));
        assert!(occupancy_stats(&OccupancyVector::new(vec![0, 0]).unwrap()).is_err());
    }

    #[test]
    fn pair_match_examples() {
        let k = 9;
        assert_eq!(pair_match_d(&FrequencySpectrum::from_pairs([(1, k)]).unwrap()).unwrap(), 0.0);
        assert_eq!(pair_match_d(&FrequencySpectrum::from_pairs([(k, 1)]).unwrap()).unwrap(), 1.0);
        assert!(pair_match_d(&FrequencySpectrum::from_pairs([(1, 1)]).unwrap()).is_err());
        let madison =
            FrequencySpectrum::from_pairs([(1, 63), (2, 29), (3, 8), (4, 4), (5, 1), (6, 1)]).unwrap();
        let oracle: f64 = [(2.0, 29.0), (3.0, 8.0), (4.0, 4.0), (5.0, 1.0), (6.0, 1.0)]
            .iter()
            .map(|(i, a)| a * i * (i - 1.0))
            .sum::<f64>()
            / (172.0 * 171.0);
        assert_eq!(oracle, 204.0 / 29412.0);
        assert!((pair_match_d(&madison).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi_simpson(&FrequencySpectrum::from_pairs([(7, 1)]).unwrap()), 1.0);
        let v = psi_simpson(&FrequencySpectrum::from_pairs([(1, 2)]).unwrap());
        assert!((v - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn psi_is_asymptotically_unbiased() {
        let (reps, k) = (10_000usize, 2000usize);
        let mut rng = rng_from_seed(31);
        let xs: Vec<f64> = (0..reps)
            .map(|_| {
                let l = polya_sequence(&mut rng, 5, 1.0, k);
                let s = occupancy_stats(&OccupancyVector::from_labels(5, &l)).unwrap();
                psi_simpson(&s.spectrum)
            })
            .collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 1.0 / 3.0).abs() < 3.0 * (v / reps as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn diversity_examples() {
        let u = PartitionWeights::uniform(8);
        assert!((diversity_index(&u, DiversityKind::Simpson).unwrap() - 0.125).abs() < 1e-15);
        assert!((diversity_index(&u, DiversityKind::Shannon).unwrap() - 8f64.ln()).abs() < 1e-12);
        assert!((diversity_index(&u, DiversityKind::Renyi(2.0)).unwrap() - 8f64.ln()).abs() < 1e-12);
        let one = PartitionWeights::uniform(1);
        assert_eq!(diversity_index(&one, DiversityKind::Simpson).unwrap(), 1.0);
        assert_eq!(diversity_index(&one, DiversityKind::Shannon).unwrap(), 0.0);
        assert_eq!(
            diversity_index(&u, DiversityKind::Renyi(1.0)).unwrap(),
            diversity_index(&u, DiversityKind::Shannon).unwrap()
        );
        assert!(diversity_index(&u, DiversityKind::Renyi(0.5)).is_err());
    }

    #[test]
    fn simpson_expectation() {
        let reps = 20_000;
        let mut rng = rng_from_seed(12);
        let xs: Vec<f64> = (0..reps)
            .map(|_| {
                let p = sample_partition_with(&mut rng, 4, 2.0).unwrap();
                diversity_index(&p, DiversityKind::Simpson).unwrap()
            })
            .collect();
        let (m, v) = mean_var(&xs);
        assert!((m - 3.0 / 9.0).abs() < 3.0 * (v / reps as f64).sqrt(), "mean {m}");
    }

    #[test]
    fn posterior_mean_examples() {
        let empty = OccupancyVector::new(vec![0, 0, 0, 0]).unwrap();
        assert!(posterior_mean(1.3, &empty).unwrap().weights().iter().all(|w| (*w - 0.25).abs() < 1e-15));
        let occ = OccupancyVector::new(vec![2, 0]).unwrap();
        assert_eq!(posterior_mean(1.0, &occ).unwrap().weights(), &[0.75, 0.25]);
        let w = posterior_mean(1e9, &occ).unwrap();
        assert!((w.weights()[0] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn spectrum_serde_round_trip() {
        let s = FrequencySpectrum::from_pairs([(1, 4), (3, 2)]).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"1":4,"3":2}"#);
        assert_eq!(serde_json::from_str::<FrequencySpectrum>(&text).unwrap(), s);
        assert!(serde_json::from_str::<FrequencySpectrum>(r#"{"1":0}"#).is_err());
    }

    proptest! {
        #[test]
        fn spectrum_sums(counts in proptest::collection::vec(0u64..6, 1..30)) {
            prop_assume!(counts.iter().any(|c| *c > 0));
            let occ = OccupancyVector::new(counts.clone()).unwrap();
            let s = occupancy_stats(&occ).unwrap();
            prop_assert_eq!(s.spectrum.k(), occ.k());
            prop_assert_eq!(s.spectrum.p(), s.p);
            prop_assert_eq!(occupancy_stats(&occ).unwrap(), s.clone());
            prop_assert_eq!(s.spectrum.species_counts().spectrum(), s.spectrum);
        }

        #[test]
        fn pair_match_forms_agree(counts in proptest::collection::vec(1u64..40, 1..25)) {
            let species = SpeciesCounts::new(counts.clone()).unwrap();
            let k = species.k();
            prop_assume!(k >= 2);
            let b_form: u64 = counts.iter().map(|b| b * (b - 1)).sum();
            let b_form = b_form as f64 / (k as f64 * (k - 1) as f64);
            prop_assert_eq!(pair_match_d(&species.spectrum()).unwrap(), b_form);
        }

        #[test]
        fn statistics_ignore_labelling(mut counts in proptest::collection::vec(0u64..9, 2..12), seed in 0u64..1000) {
            prop_assume!(counts.iter().sum::<u64>() >= 2);
            let before = occupancy_stats(&OccupancyVector::new(counts.clone()).unwrap()).unwrap();
            use rand::seq::SliceRandom;
            counts.shuffle(&mut rng_from_seed(seed));
            let after = occupancy_stats(&OccupancyVector::new(counts).unwrap()).unwrap();
            prop_assert_eq!(&before.spectrum, &after.spectrum);
            prop_assert_eq!(pair_match_d(&before.spectrum).unwrap(), pair_match_d(&after.spectrum).unwrap());
            prop_assert_eq!(psi_simpson(&before.spectrum), psi_simpson(&after.spectrum));
        }
    }
}
