//! Exact log-domain sampling formulae: occupancy law, ESF I and II, the law
//! of `P_{n,k}` and its recursion, conditional laws given `P`, and the
//! succession probabilities.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{
    bell_row, ln_big, ln_binomial, ln_factorial, ln_falling, ln_poch, ln_stirling_first_row,
    ln_stirling_second_row, LogReal,
};
use crate::sampling::{FrequencySpectrum, OccupancyVector, SpeciesCounts};

/// The four regimes of the symmetric Dirichlet model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind {
    Dirichlet { n: u64, theta: f64 },
    /// θ = 1.
    BoseEinstein { n: u64 },
    /// θ → ∞.
    MaxwellBoltzmann { n: u64 },
    /// n → ∞ with nθ = γ.
    Kingman { gamma: f64 },
}

/// What a conditional law given `P` depends on: θ alone, or one of the two
/// limiting regimes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Theta(f64),
    MaxwellBoltzmann,
    Kingman,
}

impl ModelKind {
    pub fn validate(&self) -> Result<()> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match *self {
            ModelKind::Dirichlet { n, theta } if n >= 1 && positive(theta) => Ok(()),
            ModelKind::BoseEinstein { n } | ModelKind::MaxwellBoltzmann { n } if n >= 1 => Ok(()),
            ModelKind::Kingman { gamma } if positive(gamma) => Ok(()),
            _ => domain(format!("model parameters must be positive: {self:?}")),
        }
    }

    /// Number of species; `None` for the Kingman limit.
    pub fn n(&self) -> Option<u64> {
        match *self {
            ModelKind::Dirichlet { n, .. }
            | ModelKind::BoseEinstein { n }
            | ModelKind::MaxwellBoltzmann { n } => Some(n),
            ModelKind::Kingman { .. } => None,
        }
    }

    /// Finite θ of the model, if any.
    pub fn theta(&self) -> Option<f64> {
        match *self {
            ModelKind::Dirichlet { theta, .. } => Some(theta),
            ModelKind::BoseEinstein { .. } => Some(1.0),
            _ => None,
        }
    }

    pub fn shape(&self) -> Shape {
        match *self {
            ModelKind::Dirichlet { theta, .. } => Shape::Theta(theta),
            ModelKind::BoseEinstein { .. } => Shape::Theta(1.0),
            ModelKind::MaxwellBoltzmann { .. } => Shape::MaxwellBoltzmann,
            ModelKind::Kingman { .. } => Shape::Kingman,
        }
    }

    fn is_bose_einstein(&self) -> bool {
        matches!(self, ModelKind::BoseEinstein { .. })
            || matches!(self, ModelKind::Dirichlet { theta, .. } if *theta == 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Bell,
    Alternating,
    Special,
}

/// Largest `n` or `k` accepted by the alternating-sum route.
pub const ALTERNATING_LIMIT: u64 = 40;

fn ln_prod_poch(theta: f64, parts: impl Iterator<Item = (u64, u64)>) -> f64 {
    parts.map(|(size, mult)| mult as f64 * ln_poch(theta, size)).sum()
}

/// Log-pmf of the occupancy vector under the multinomial-Dirichlet law
/// `k!/prod k_m! * prod (θ)_{k_m} / (nθ)_k`.
pub fn occupancy_logpmf(model: &ModelKind, occupancy: &OccupancyVector) -> Result<LogReal> {
    model.validate()?;
    let n = match model.n() {
        Some(n) => n,
        None => return Err(Error::Unsupported("the Kingman limit has no finite occupancy vector".into())),
    };
    if occupancy.n() as u64 != n {
        return domain(format!("occupancy has {} cells, model has n={n}", occupancy.n()));
    }
    let k = occupancy.k();
    let multinomial = ln_factorial(k) - occupancy.counts().iter().map(|c| ln_factorial(*c)).sum::<f64>();
    let ln = match *model {
        ModelKind::MaxwellBoltzmann { .. } => multinomial - k as f64 * (n as f64).ln(),
        _ => {
            let theta = model.theta().unwrap();
            multinomial + ln_prod_poch(theta, occupancy.counts().iter().map(|c| (*c, 1)))
                - ln_poch(n as f64 * theta, k)
        }
    };
    Ok(LogReal::from_ln(ln))
}

/// Joint log-probability of labelled species counts `b` and `P = p`.
pub fn esf1_logpmf(model: &ModelKind, b: &SpeciesCounts) -> Result<LogReal> {
    model.validate()?;
    let (k, p) = (b.k(), b.p());
    if let Some(n) = model.n() {
        if p > n {
            return Ok(LogReal::ZERO);
        }
    }
    let ln_b_fact: f64 = b.counts().iter().map(|x| ln_factorial(*x)).sum();
    let ln = match *model {
        _ if model.is_bose_einstein() => {
            let n = model.n().unwrap();
            ln_binomial(n, p) - ln_binomial(n + k - 1, k)
        }
        ModelKind::Dirichlet { n, theta } => {
            ln_binomial(n, p) + ln_factorial(k) - ln_b_fact
                + ln_prod_poch(theta, b.counts().iter().map(|x| (*x, 1)))
                - ln_poch(n as f64 * theta, k)
        }
        ModelKind::MaxwellBoltzmann { n } => {
            ln_binomial(n, p) + ln_factorial(k) - ln_b_fact - k as f64 * (n as f64).ln()
        }
        ModelKind::Kingman { gamma } => {
            ln_factorial(k) - ln_factorial(p) + p as f64 * gamma.ln()
                - ln_poch(gamma, k)
                - b.counts().iter().map(|x| (*x as f64).ln()).sum::<f64>()
        }
        ModelKind::BoseEinstein { .. } => unreachable!(),
    };
    Ok(LogReal::from_ln(ln))
}

/// `sum a_i ln i!` and `sum ln a_i!`.
fn spectrum_factorials(a: &FrequencySpectrum) -> (f64, f64) {
    a.iter().fold((0.0, 0.0), |(fi, fa), (i, ai)| {
        (fi + ai as f64 * ln_factorial(i), fa + ln_factorial(ai))
    })
}

/// Joint log-probability of the species vector count `a` and `P = p`.
///
/// The Maxwell-Boltzmann case uses the limit
/// `n!/(n-p)! k!/prod(i!^{a_i} a_i!) n^{-k}`.
pub fn esf2_logpmf(model: &ModelKind, a: &FrequencySpectrum) -> Result<LogReal> {
    model.validate()?;
    let (k, p) = (a.k(), a.p());
    if let Some(n) = model.n() {
        if p > n {
            return Ok(LogReal::ZERO);
        }
    }
    let (ln_i_fact, ln_a_fact) = spectrum_factorials(a);
    let ln = match *model {
        _ if model.is_bose_einstein() => {
            let n = model.n().unwrap();
            ln_factorial(p) + ln_binomial(n, p) - ln_binomial(n + k - 1, k) - ln_a_fact
        }
        ModelKind::Dirichlet { n, theta } => {
            ln_falling(n, p) + ln_factorial(k) - ln_i_fact - ln_a_fact
                + ln_prod_poch(theta, a.iter())
                - ln_poch(n as f64 * theta, k)
        }
        ModelKind::MaxwellBoltzmann { n } => {
            ln_falling(n, p) + ln_factorial(k) - ln_i_fact - ln_a_fact - k as f64 * (n as f64).ln()
        }
        ModelKind::Kingman { gamma } => {
            let ln_i: f64 = a.iter().map(|(i, ai)| ai as f64 * (i as f64).ln()).sum();
            ln_factorial(k) + p as f64 * gamma.ln() - ln_poch(gamma, k) - ln_i - ln_a_fact
        }
        ModelKind::BoseEinstein { .. } => unreachable!(),
    };
    Ok(LogReal::from_ln(ln))
}

fn p_upper(model: &ModelKind, k: u64) -> u64 {
    model.n().map_or(k, |n| n.min(k))
}

/// `ln P(P_{n,k} = p)` for `p = 0..=min(n, k)` via the Bell table (Stirling
/// tables in the Maxwell-Boltzmann and Kingman limits).
pub fn p_log_pmf_row(model: &ModelKind, k: u64) -> Result<Vec<f64>> {
    model.validate()?;
    let p_max = p_upper(model, k) as usize;
    let k_us = k as usize;
    Ok(match *model {
        ModelKind::MaxwellBoltzmann { n } => {
            let s = ln_stirling_second_row(k_us, p_max);
            let ln_nk = k as f64 * (n as f64).ln();
            s.iter().enumerate().map(|(p, v)| ln_falling(n, p as u64) + v - ln_nk).collect()
        }
        ModelKind::Kingman { gamma } => {
            let s = ln_stirling_first_row(k_us, p_max);
            let norm = ln_poch(gamma, k);
            s.iter().enumerate().map(|(p, v)| p as f64 * gamma.ln() + v - norm).collect()
        }
        _ => {
            let (n, theta) = (model.n().unwrap(), model.theta().unwrap());
            let b = bell_row(theta, k_us, p_max);
            let norm = ln_poch(n as f64 * theta, k);
            b.iter().enumerate().map(|(p, v)| ln_falling(n, p as u64) + v - norm).collect()
        }
    })
}

/// `ln P(P_{n,k} = p)` by the chosen route.
///
/// `Bell` uses the triangular recurrence, `Alternating` the signed sum
/// `sum_q (-1)^{p-q} C(n,p) C(p,q) ((qθ)_k / (nθ)_k)` in exact integer
/// arithmetic (small instances only),
/// `Special` the Bose-Einstein, Maxwell-Boltzmann and Kingman closed forms.
pub fn p_logpmf(model: &ModelKind, k: u64, p: u64, method: PMethod) -> Result<LogReal> {
    model.validate()?;
    if p > k || model.n().is_some_and(|n| p > n) {
        return Ok(LogReal::ZERO);
    }
    if k == 0 {
        return Ok(if p == 0 { LogReal::ONE } else { LogReal::ZERO });
    }
    match method {
        PMethod::Bell => Ok(LogReal::from_ln(p_log_pmf_row(model, k)?[p as usize])),
        PMethod::Alternating => p_alternating(model, k, p),
        PMethod::Special => p_special(model, k, p),
    }
}

/// `theta = mantissa / 2^shift` exactly.
fn dyadic(theta: f64) -> (BigInt, u64) {
    let bits = theta.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1 << 52), exp - 1075) };
    let tz = mant.trailing_zeros() as i64;
    let (mant, e) = (mant >> tz, e + tz);
    if e >= 0 {
        (BigInt::from(mant) << e as usize, 0)
    } else {
        (BigInt::from(mant), (-e) as u64)
    }
}

// The alternating sum cancels catastrophically in floating point, so it is
// evaluated exactly: with θ = M/2^E every (qθ)_k is prod (qM + j 2^E) / 2^{Ek}
// and the common power of two drops out of the ratio.
fn p_alternating(model: &ModelKind, k: u64, p: u64) -> Result<LogReal> {
    let n = match model.n() {
        Some(n) => n,
        None => return Err(Error::Method("alternating sum needs a finite n".into())),
    };
    if k > ALTERNATING_LIMIT || n > ALTERNATING_LIMIT {
        return Err(Error::Method(format!(
            "alternating sum refused for n={n}, k={k} (limit {ALTERNATING_LIMIT})"
        )));
    }
    let rising = |base: &BigInt, step: &BigInt| -> BigInt {
        (0..k).fold(BigInt::one(), |acc, j| acc * (base + step * BigInt::from(j)))
    };
    // numerator and denominator of each ratio ((qθ)_k / (nθ)_k) up to a common factor
    let (term, denom): (Box<dyn Fn(u64) -> BigInt>, BigInt) = match model.theta() {
        Some(theta) => {
            let (m, shift) = dyadic(theta);
            let step = BigInt::one() << shift as usize;
            let den = rising(&(&m * BigInt::from(n)), &step);
            (Box::new(move |q| rising(&(&m * BigInt::from(q)), &step)), den)
        }
        None => (Box::new(|q| BigInt::from(q).pow(k as u32)), BigInt::from(n).pow(k as u32)),
    };
    let mut total = BigInt::zero();
    let mut binom = BigInt::one(); // C(p, q), built up from q = 0
    for q in 1..=p {
        binom = binom * BigInt::from(p - q + 1) / BigInt::from(q);
        let t = &binom * term(q);
        if (p - q) % 2 == 1 {
            total -= t;
        } else {
            total += t;
        }
    }
    let total = match total.to_biguint() {
        Some(t) => t,
        None => return Err(Error::Method("alternating sum came out negative".into())),
    };
    let ln = ln_binomial(n, p) + ln_big(&total) - ln_big(&denom.to_biguint().unwrap());
    Ok(LogReal::from_ln(ln))
}

fn p_special(model: &ModelKind, k: u64, p: u64) -> Result<LogReal> {
    let ln = match *model {
        _ if model.is_bose_einstein() => {
            let n = model.n().unwrap();
            ln_binomial(n, p) + ln_binomial(k - 1, p - 1) - ln_binomial(n + k - 1, k)
        }
        ModelKind::Dirichlet { theta, .. } => {
            return Err(Error::Method(format!("no closed form for theta={theta}; use the bell route")))
        }
        ModelKind::MaxwellBoltzmann { .. } | ModelKind::Kingman { .. } => {
            return p_logpmf(model, k, p, PMethod::Bell);
        }
        ModelKind::BoseEinstein { .. } => unreachable!(),
    };
    Ok(LogReal::from_ln(ln))
}

/// Transition probabilities `(new, stay)` out of state `p` at sample size `k`.
fn transition(model: &ModelKind, k: u64, p: u64) -> (f64, f64) {
    let (k, p) = (k as f64, p as f64);
    match *model {
        ModelKind::MaxwellBoltzmann { n } => {
            let n = n as f64;
            ((n - p) / n, p / n)
        }
        ModelKind::Kingman { gamma } => (gamma / (gamma + k), k / (gamma + k)),
        _ => {
            let (n, theta) = (model.n().unwrap() as f64, model.theta().unwrap());
            let d = n * theta + k;
            ((n - p) * theta / d, (p * theta + k) / d)
        }
    }
}

/// One step of the chain `P_{n,k} -> P_{n,k+1}`. `pmf_k[p]` is
/// `P(P_{n,k} = p)`; the result has one more entry.
pub fn p_recursion_step(model: &ModelKind, k: u64, pmf_k: &[f64]) -> Result<Vec<f64>> {
    model.validate()?;
    let total: f64 = pmf_k.iter().sum();
    if (total - 1.0).abs() > 1e-10 {
        return domain(format!("pmf sums to {total}"));
    }
    let mut next = vec![0.0; pmf_k.len() + 1];
    for (p, &mass) in pmf_k.iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let (new, stay) = if k == 0 { (1.0, 0.0) } else { transition(model, k, p as u64) };
        next[p] += mass * stay;
        next[p + 1] += mass * new;
    }
    Ok(next)
}

/// Law of `P_{n,k}` by iterating the recursion from `k = 0`.
pub fn p_pmf_by_recursion(model: &ModelKind, k: u64) -> Result<Vec<f64>> {
    let mut pmf = vec![1.0];
    for kk in 0..k {
        pmf = p_recursion_step(model, kk, &pmf)?;
    }
    Ok(pmf)
}

fn ln_norm_given_p(shape: Shape, k: u64, p: u64) -> Result<f64> {
    let (k_us, p_us) = (k as usize, p as usize);
    Ok(match shape {
        Shape::Theta(theta) => {
            if !(theta > 0.0) || !theta.is_finite() {
                return domain(format!("theta must be positive, got {theta}"));
            }
            bell_row(theta, k_us, p_us)[p_us]
        }
        Shape::MaxwellBoltzmann => ln_stirling_second_row(k_us, p_us)[p_us],
        Shape::Kingman => ln_stirling_first_row(k_us, p_us)[p_us],
    })
}

/// Conditional log-pmf of the labelled counts given `P = p`; free of `n`.
pub fn conditional_esf1(shape: Shape, b: &SpeciesCounts) -> Result<LogReal> {
    let (k, p) = (b.k(), b.p());
    let weights: f64 = match shape {
        Shape::Theta(theta) => b.counts().iter().map(|x| ln_poch(theta, *x) - ln_factorial(*x)).sum(),
        Shape::MaxwellBoltzmann => -b.counts().iter().map(|x| ln_factorial(*x)).sum::<f64>(),
        Shape::Kingman => -b.counts().iter().map(|x| (*x as f64).ln()).sum::<f64>(),
    };
    let ln = ln_factorial(k) - ln_factorial(p) + weights - ln_norm_given_p(shape, k, p)?;
    Ok(LogReal::from_ln(ln))
}

/// Conditional log-pmf of the species vector count given `P = p`.
pub fn conditional_esf2(shape: Shape, a: &FrequencySpectrum) -> Result<LogReal> {
    let (k, p) = (a.k(), a.p());
    let (ln_i_fact, ln_a_fact) = spectrum_factorials(a);
    let weights = match shape {
        Shape::Theta(theta) => ln_prod_poch(theta, a.iter()) - ln_i_fact,
        Shape::MaxwellBoltzmann => -ln_i_fact,
        Shape::Kingman => -a.iter().map(|(i, ai)| ai as f64 * (i as f64).ln()).sum::<f64>(),
    };
    let ln = ln_factorial(k) - ln_a_fact + weights - ln_norm_given_p(shape, k, p)?;
    Ok(LogReal::from_ln(ln))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Succession {
    /// The next draw is a species not seen so far.
    New,
    /// The next draw is a given species already seen `b_r` times.
    Seen(u64),
}

/// Probability that draw `k+1` is a new species, or a given seen one, after
/// `k` draws showing `p` species.
pub fn succession_probability(model: &ModelKind, k: u64, p: u64, event: Succession) -> Result<f64> {
    model.validate()?;
    if model.n().is_some_and(|n| p > n) || p > k {
        return domain(format!("p={p} inconsistent with k={k} and the model"));
    }
    if let Succession::Seen(b) = event {
        if b == 0 || b > k {
            return domain(format!("seen count {b} outside 1..={k}"));
        }
    }
    let (kf, pf) = (k as f64, p as f64);
    Ok(match (*model, event) {
        (ModelKind::Kingman { gamma }, Succession::New) => gamma / (gamma + kf),
        (ModelKind::Kingman { gamma }, Succession::Seen(b)) => b as f64 / (gamma + kf),
        (ModelKind::MaxwellBoltzmann { n }, Succession::New) => (n as f64 - pf) / n as f64,
        (ModelKind::MaxwellBoltzmann { n }, Succession::Seen(_)) => 1.0 / n as f64,
        (m, e) => {
            let (n, theta) = (m.n().unwrap() as f64, m.theta().unwrap());
            let d = n * theta + kf;
            match e {
                Succession::New => (n - pf) * theta / d,
                Succession::Seen(b) => (theta + b as f64) / d,
            }
        }
    })
}
