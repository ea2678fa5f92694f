//! Point estimators of the number of species `n`, of `γ` in the Kingman
//! limit, and of the pair `(θ, n)` from `(P, D)` or `(P, ψ)`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::Shape;
use crate::error::{domain, Error, Result};
use crate::numerics::{
    bell_row, ln_bracket, ln_stirling_first_row, ln_stirling_second_row, solve_monotone_report,
};

/// Upper end of every search over `n`.
pub const N_CAP: f64 = 1e10;

/// Evaluation budget of the fixed-point fallback in joint estimation.
pub const MAX_EVALUATIONS: usize = 10_000;

/// Largest admissible residual of a reported root.
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Which observed statistics fed an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    #[serde(rename = "P")]
    P,
    #[serde(rename = "P,D")]
    PD,
    #[serde(rename = "P,psi")]
    PPsi,
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Statistic::P => "P",
            Statistic::PD => "P,D",
            Statistic::PPsi => "P,psi",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mle,
    Umvb,
    KingmanGamma,
    Joint,
}

/// Numerical outcomes that are reported rather than raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "flag", rename_all = "snake_case")]
pub enum Flag {
    /// No finite root; carries the last iterate of the search.
    Divergence { last_iterate: f64 },
    /// The constraints admit no positive θ.
    NoSolution { reason: String },
    /// The estimate sits at zero.
    BoundaryZero,
    /// The estimate is infinite.
    BoundaryInfinite,
}

/// Real root of an `n` equation and the integer short of it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NEstimate {
    pub value: f64,
    pub floor: u64,
}

impl NEstimate {
    fn new(value: f64) -> Self {
        NEstimate { value, floor: value.floor() as u64 }
    }
}

/// Echo of the inputs an estimate was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateInputs {
    pub k: u64,
    pub p: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stat_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub scheme: Option<Scheme>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub statistic_used: Statistic,
    pub inputs: EstimateInputs,
    pub n_mle: Option<NEstimate>,
    pub n_umvb: Option<f64>,
    pub theta_hat: Option<f64>,
    pub gamma_hat: Option<f64>,
    pub iterations: u64,
    pub residual: f64,
    pub flags: Vec<Flag>,
}

impl EstimateReport {
    fn empty(estimator: EstimatorKind, statistic_used: Statistic, inputs: EstimateInputs) -> Self {
        EstimateReport {
            estimator,
            statistic_used,
            inputs,
            n_mle: None,
            n_umvb: None,
            theta_hat: None,
            gamma_hat: None,
            iterations: 0,
            residual: 0.0,
            flags: Vec::new(),
        }
    }

    /// The `n` estimate, whichever equation produced it.
    pub fn n(&self) -> Option<f64> {
        self.n_mle.map(|e| e.value).or(self.n_umvb)
    }

    pub fn diverged(&self) -> bool {
        self.flags.iter().any(|f| matches!(f, Flag::Divergence { .. }))
    }

    pub fn last_iterate(&self) -> Option<f64> {
        self.flags.iter().find_map(|f| match f {
            Flag::Divergence { last_iterate } => Some(*last_iterate),
            _ => None,
        })
    }
}

fn check_kp(k: u64, p: u64) -> Result<()> {
    if p == 0 {
        return domain("P must be at least 1");
    }
    if p > k {
        return domain(format!("P={p} exceeds k={k}"));
    }
    Ok(())
}

fn shape_name(shape: Shape) -> String {
    match shape {
        Shape::Theta(t) if t == 1.0 => "bose_einstein".into(),
        Shape::Theta(_) => "dirichlet".into(),
        Shape::MaxwellBoltzmann => "maxwell_boltzmann".into(),
        Shape::Kingman => "kingman".into(),
    }
}

fn shape_theta(shape: Shape) -> Option<f64> {
    match shape {
        Shape::Theta(t) => Some(t),
        _ => None,
    }
}

/// `E(P_{n,k}) = n (1 - ((n-1)θ)_k / (nθ)_k)` for real `n > 0`;
/// `n (1 - (1 - 1/n)^k)` in the Maxwell-Boltzmann limit.
pub fn expected_richness(shape: Shape, n: f64, k: u64) -> Result<f64> {
    let ln_ratio = match shape {
        Shape::Theta(theta) => {
            if !(theta > 0.0) || !theta.is_finite() {
                return domain(format!("theta must be positive, got {theta}"));
            }
            ln_bracket(theta, n, k, 1.0)
        }
        Shape::MaxwellBoltzmann => k as f64 * (-1.0 / n).ln_1p(),
        Shape::Kingman => return Err(Error::Unsupported("richness under Kingman is not finite-n".into())),
    };
    Ok(-n * ln_ratio.exp_m1())
}

fn mle_residual(shape: Shape, n: f64, k: u64, p: u64) -> f64 {
    expected_richness(shape, n, k).map_or(f64::NAN, |e| e - p as f64)
}

/// MLE of `n` with θ known: root over `n >= P` of
/// `n - P - n ((n-1)θ)_k / (nθ)_k = 0`, reported with its floor.
pub fn mle_n(theta: f64, k: u64, p: u64) -> Result<EstimateReport> {
    mle_n_shape(Shape::Theta(theta), k, p)
}

pub fn mle_n_shape(shape: Shape, k: u64, p: u64) -> Result<EstimateReport> {
    check_kp(k, p)?;
    if matches!(shape, Shape::Kingman) {
        return Err(Error::Unsupported("use kingman_gamma in the Kingman limit".into()));
    }
    let inputs = EstimateInputs {
        k,
        p,
        theta: shape_theta(shape),
        stat_value: None,
        model: Some(shape_name(shape)),
        scheme: None,
    };
    let mut report = EstimateReport::empty(EstimatorKind::Mle, Statistic::P, inputs);
    if p == k {
        report.flags.push(Flag::Divergence { last_iterate: N_CAP });
        return Ok(report);
    }
    if p == 1 {
        report.n_mle = Some(NEstimate::new(1.0));
        return Ok(report);
    }
    let g_cap = mle_residual(shape, N_CAP, k, p);
    if g_cap < 0.0 {
        report.iterations = 1;
        report.residual = g_cap;
        report.flags.push(Flag::Divergence { last_iterate: N_CAP });
        return Ok(report);
    }
    let root = solve_monotone_report(|n| mle_residual(shape, n, k, p), 0.0, p as f64, N_CAP, 0.0)?;
    report.n_mle = Some(NEstimate::new(root.x));
    report.iterations = root.evaluations as u64;
    report.residual = root.residual;
    Ok(report)
}

/// `ln B_{k,P-1}(θ) - ln B_{k,P}(θ)`, or the Stirling analogue in the limits.
fn ln_umvb_ratio(shape: Shape, k: u64, p: u64) -> f64 {
    let (k, p) = (k as usize, p as usize);
    let row = match shape {
        Shape::Theta(theta) => bell_row(theta, k, p),
        Shape::MaxwellBoltzmann => ln_stirling_second_row(k, p),
        Shape::Kingman => ln_stirling_first_row(k, p),
    };
    row[p - 1] - row[p]
}

/// UMVB estimator `P + B_{k,P-1}(θ) / B_{k,P}(θ)`.
pub fn umvb_n(theta: f64, k: u64, p: u64) -> Result<EstimateReport> {
    umvb_n_shape(Shape::Theta(theta), k, p)
}

pub fn umvb_n_shape(shape: Shape, k: u64, p: u64) -> Result<EstimateReport> {
    check_kp(k, p)?;
    let value = match shape {
        Shape::Theta(theta) if !(theta > 0.0) || !theta.is_finite() => {
            return domain(format!("theta must be positive, got {theta}"))
        }
        Shape::Theta(theta) if theta == 1.0 => (p * k) as f64 / (k - p + 1) as f64,
        Shape::Kingman => return Err(Error::Unsupported("no UMVB of n in the Kingman limit".into())),
        _ => p as f64 + ln_umvb_ratio(shape, k, p).exp(),
    };
    let inputs = EstimateInputs {
        k,
        p,
        theta: shape_theta(shape),
        stat_value: None,
        model: Some(shape_name(shape)),
        scheme: None,
    };
    let mut report = EstimateReport::empty(EstimatorKind::Umvb, Statistic::P, inputs);
    report.n_umvb = Some(value);
    report.iterations = 1;
    Ok(report)
}

/// `ξ_k(γ) = sum_{l<k} γ/(γ+l)`.
pub fn xi(k: u64, gamma: f64) -> f64 {
    (0..k).map(|l| gamma / (gamma + l as f64)).sum()
}

/// Root of `ξ_k(γ) = P`. Boundary flags for `P <= 1` and `P >= k`.
pub fn kingman_gamma(k: u64, p: u64) -> Result<EstimateReport> {
    check_kp(k, p)?;
    let inputs = EstimateInputs { k, p, theta: None, stat_value: None, model: Some("kingman".into()), scheme: None };
    let mut report = EstimateReport::empty(EstimatorKind::KingmanGamma, Statistic::P, inputs);
    if p == k {
        report.flags.push(Flag::BoundaryInfinite);
        return Ok(report);
    }
    if p == 1 {
        report.gamma_hat = Some(0.0);
        report.flags.push(Flag::BoundaryZero);
        return Ok(report);
    }
    let root = solve_monotone_report(|g| xi(k, g), p as f64, 0.5, 2.0, 0.0)?;
    report.gamma_hat = Some(root.x);
    report.iterations = root.evaluations as u64;
    report.residual = root.residual;
    Ok(report)
}

/// UMVB estimator `s_{k-l,P-1} / s_{k,P}` of `r_l(γ) = γ (γ)_{k-l} / (γ)_k`;
/// `l = 1` gives `γ/(γ+k-1)`, the chance that draw `k` is a new species.
pub fn umvb_rational(l: u64, k: u64, p: u64) -> Result<f64> {
    if l == 0 || l > k {
        return domain(format!("l must lie in 1..={k}, got {l}"));
    }
    if p == 0 || p > k {
        return domain(format!("s_{{k,P}} vanishes for P={p}, k={k}"));
    }
    let den = ln_stirling_first_row(k as usize, p as usize)[p as usize];
    let num_row = ln_stirling_first_row((k - l) as usize, (p - 1) as usize);
    let num = num_row.get((p - 1) as usize).copied().unwrap_or(f64::NEG_INFINITY);
    Ok((num - den).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JointStatistic {
    D,
    Psi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NEstimator {
    Mle,
    Umvb,
}

/// How the pair `(θ, n)` is obtained from `(P, stat)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `θ(n) = (1-s)/(ns-1)` substituted into the `n` equation, which is then
    /// solved in `n` alone.
    Coupled,
    /// `n` from the Bose-Einstein closed form of the chosen estimator, then
    /// `θ = (1-s)/(ns-1)`.
    Pilot,
}

/// `θ(n) = (1 - s) / (n s - 1)`; nonpositive when `n s <= 1`.
pub fn theta_from_statistic(n: f64, s: f64) -> f64 {
    (1.0 - s) / (n * s - 1.0)
}

/// Residual `F(n) - n` of the `n` equation at `θ = θ(n)`, where `F` is the
/// right-hand side of the fixed point.
fn joint_fixed_point(n_est: NEstimator, n: f64, s: f64, k: u64, p: u64) -> f64 {
    let theta = theta_from_statistic(n, s);
    if !(theta > 0.0) || !theta.is_finite() {
        return f64::NAN;
    }
    match n_est {
        NEstimator::Mle => p as f64 + n * ln_bracket(theta, n, k, 1.0).exp(),
        NEstimator::Umvb => p as f64 + ln_umvb_ratio(Shape::Theta(theta), k, p).exp(),
    }
}

/// Joint estimate of `(θ, n)` from `P` and the pair-matching statistic `D`
/// or the coverage-adjusted Simpson estimate `ψ`.
pub fn joint_estimate(
    statistic: JointStatistic,
    k: u64,
    p: u64,
    stat_value: f64,
    n_estimator: NEstimator,
    scheme: Scheme,
) -> Result<EstimateReport> {
    check_kp(k, p)?;
    if !(stat_value > 0.0 && stat_value < 1.0) {
        return domain(format!("statistic must lie in (0, 1), got {stat_value}"));
    }
    let s = stat_value;
    let inputs = EstimateInputs {
        k,
        p,
        theta: None,
        stat_value: Some(s),
        model: Some("dirichlet".into()),
        scheme: Some(scheme),
    };
    let used = match statistic {
        JointStatistic::D => Statistic::PD,
        JointStatistic::Psi => Statistic::PPsi,
    };
    let mut report = EstimateReport::empty(EstimatorKind::Joint, used, inputs);
    let set_n = |report: &mut EstimateReport, n: f64| match n_estimator {
        NEstimator::Mle => report.n_mle = Some(NEstimate::new(n)),
        NEstimator::Umvb => report.n_umvb = Some(n),
    };

    if scheme == Scheme::Pilot {
        let n = match n_estimator {
            NEstimator::Mle if p == k => {
                report.flags.push(Flag::Divergence { last_iterate: N_CAP });
                return Ok(report);
            }
            NEstimator::Mle if p == 1 => 1.0,
            NEstimator::Mle => (p * (k - 1)) as f64 / (k - p) as f64,
            NEstimator::Umvb => (p * k) as f64 / (k - p + 1) as f64,
        };
        report.iterations = 1;
        if n * s <= 1.0 {
            report.flags.push(Flag::NoSolution {
                reason: format!("n s = {} <= 1 makes theta nonpositive", n * s),
            });
            return Ok(report);
        }
        set_n(&mut report, n);
        report.theta_hat = Some(theta_from_statistic(n, s));
        return Ok(report);
    }

    let lower = (p as f64).max(1.0 / s) * (1.0 + 1e-9);
    if lower >= N_CAP {
        report.flags.push(Flag::NoSolution {
            reason: format!("n s <= 1 on the whole range up to {N_CAP:e}"),
        });
        return Ok(report);
    }
    let residual = |n: f64| joint_fixed_point(n_estimator, n, s, k, p) - n;
    let mut evaluations = 0usize;

    // scan a geometric grid for the first sign change
    const GRID: usize = 400;
    let ratio = (N_CAP / lower).powf(1.0 / GRID as f64);
    let mut prev = (lower, residual(lower));
    evaluations += 1;
    let mut bracket = None;
    for i in 1..=GRID {
        let x = if i == GRID { N_CAP } else { lower * ratio.powi(i as i32) };
        let gx = residual(x);
        evaluations += 1;
        if prev.1.is_finite() && gx.is_finite() && (prev.1 < 0.0) != (gx < 0.0) {
            bracket = Some((prev.0, x));
            break;
        }
        if gx == 0.0 {
            bracket = Some((x, x));
            break;
        }
        prev = (x, gx);
    }
    if let Some((a, b)) = bracket {
        let root = solve_monotone_report(residual, 0.0, a, b, 0.0)?;
        report.iterations = (evaluations + root.evaluations) as u64;
        report.residual = root.residual;
        set_n(&mut report, root.x);
        report.theta_hat = Some(theta_from_statistic(root.x, s));
        return Ok(report);
    }

    // no sign change: damped fixed-point iteration from the pilot value
    let mut n = ((p * (k.max(2) - 1)) as f64 / (k - p).max(1) as f64).clamp(lower, N_CAP);
    let damping = 0.5;
    while evaluations < MAX_EVALUATIONS {
        let f = joint_fixed_point(n_estimator, n, s, k, p);
        evaluations += 1;
        if !f.is_finite() {
            break;
        }
        let next = ((1.0 - damping) * n + damping * f).clamp(lower, N_CAP);
        let step = (next - n).abs();
        n = next;
        if step <= 1e-12 * n && (f - n).abs() <= RESIDUAL_TOL * n.max(1.0) {
            report.iterations = evaluations as u64;
            report.residual = f - n;
            set_n(&mut report, n);
            report.theta_hat = Some(theta_from_statistic(n, s));
            return Ok(report);
        }
        if n >= N_CAP || n <= lower {
            break;
        }
    }
    report.iterations = evaluations as u64;
    report.residual = residual(n);
    report.theta_hat = Some(theta_from_statistic(n, s));
    report.flags.push(Flag::Divergence { last_iterate: n });
    Ok(report)
}

/// Limit `ρ*` of `n̂/k` when `P/k → ρ`: the positive root of
/// `ρ = ρ* (1 - (θρ*/(1+θρ*))^θ)`, which is `ρ/(1-ρ)` at `θ = 1`.
pub fn rho_star(rho: f64, theta: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return domain(format!("rho must lie in (0, 1), got {rho}"));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return domain(format!("theta must be positive, got {theta}"));
    }
    if theta == 1.0 {
        return Ok(rho / (1.0 - rho));
    }
    let h = |x: f64| -x * (theta * (theta * x / (1.0 + theta * x)).ln()).exp_m1();
    solve_monotone_report(h, rho, rho, 2.0 * rho / (1.0 - rho), 0.0).map(|r| r.x)
}
