//! Log-domain special functions and combinatorial tables.
//!
//! Every probability-scale quantity in this crate is carried as a natural
//! logarithm. At the sample sizes found in field data (k near 1000) the rising
//! factorials involved overflow `f64` long before the probabilities they
//! define become small, so linear values are only materialised at the edges.

mod bell;
mod roots;
mod stirling;

pub use bell::{bell_row, bell_via_compositions, BellTable, COMPOSITION_LIMIT};
pub use roots::{solve_monotone, solve_monotone_report, Root, MAX_EXPANSIONS, ROOT_TOL};
pub use stirling::{
    bell_numbers_exact, ln_stirling_first_row, ln_stirling_second_row, StirlingTables, EXACT_LIMIT,
};
pub(crate) use stirling::ln_big;

use std::fmt;
use std::ops::{Add, Div, Mul};
use std::sync::OnceLock;

use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

/// A positive real number stored as its natural logarithm.
///
/// `LogReal::ZERO` (log 0 = -inf) is a valid value. Addition happens in the
/// linear domain through log-sum-exp, multiplication and division are plain
/// additions and subtractions of logs.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogReal(f64);

impl LogReal {
    pub const ZERO: LogReal = LogReal(f64::NEG_INFINITY);
    pub const ONE: LogReal = LogReal(0.0);

    /// Wraps a value that is already a logarithm.
    pub fn from_ln(ln: f64) -> Self {
        LogReal(ln)
    }

    pub fn from_linear(x: f64) -> Self {
        debug_assert!(x >= 0.0, "LogReal::from_linear({x})");
        LogReal(x.ln())
    }

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    pub fn powi(self, e: i32) -> Self {
        if e == 0 {
            LogReal::ONE
        } else {
            LogReal(self.0 * f64::from(e))
        }
    }
}

impl fmt::Display for LogReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "exp({})", self.0)
    }
}

impl Mul for LogReal {
    type Output = LogReal;
    fn mul(self, rhs: LogReal) -> LogReal {
        if self.is_zero() || rhs.is_zero() {
            LogReal::ZERO
        } else {
            LogReal(self.0 + rhs.0)
        }
    }
}

impl Div for LogReal {
    type Output = LogReal;
    fn div(self, rhs: LogReal) -> LogReal {
        assert!(!rhs.is_zero(), "division of LogReal by zero");
        if self.is_zero() {
            LogReal::ZERO
        } else {
            LogReal(self.0 - rhs.0)
        }
    }
}

impl Add for LogReal {
    type Output = LogReal;
    fn add(self, rhs: LogReal) -> LogReal {
        LogReal(log_add_exp(self.0, rhs.0))
    }
}

impl std::iter::Sum for LogReal {
    fn sum<I: Iterator<Item = LogReal>>(iter: I) -> LogReal {
        let logs: Vec<f64> = iter.map(LogReal::ln).collect();
        LogReal(log_sum_exp(&logs))
    }
}

/// `ln(exp(a) + exp(b))`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln(exp(a) - exp(b))` for `a >= b`; returns -inf when the two are equal.
#[inline]
pub fn log_diff_exp(a: f64, b: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return a;
    }
    if b >= a {
        return f64::NEG_INFINITY;
    }
    a + (-(b - a).exp()).ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// Accumulates a sum of terms with mixed signs, each given by its log-magnitude.
///
/// Positive and negative parts are reduced separately and subtracted once at
/// the end.
#[derive(Debug, Default, Clone)]
pub struct SignedLogSum {
    positive: Vec<f64>,
    negative: Vec<f64>,
}

impl SignedLogSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, ln_magnitude: f64, negative: bool) {
        if negative {
            self.negative.push(ln_magnitude);
        } else {
            self.positive.push(ln_magnitude);
        }
    }

    /// Log of the total. A non-positive total (cancellation) maps to `ZERO`.
    pub fn total(&self) -> LogReal {
        LogReal(log_diff_exp(
            log_sum_exp(&self.positive),
            log_sum_exp(&self.negative),
        ))
    }
}

const FACTORIAL_TABLE: usize = 4096;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(FACTORIAL_TABLE);
        t.push(0.0);
        for i in 1..FACTORIAL_TABLE {
            t.push(t[i - 1] + (i as f64).ln());
        }
        t
    })
}

/// `ln n!`
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < FACTORIAL_TABLE {
        ln_factorial_table()[n as usize]
    } else {
        ln_gamma(n as f64 + 1.0)
    }
}

/// `ln C(n, r)`, -inf when `r > n`.
pub fn ln_binomial(n: u64, r: u64) -> f64 {
    if r > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(r) - ln_factorial(n - r)
}

/// `ln n!/(n-r)!`, -inf when `r > n`.
pub fn ln_falling(n: u64, r: u64) -> f64 {
    if r > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(n - r)
}

const DIRECT_POCHHAMMER: u64 = 1024;

/// `ln (theta)_k` without argument checks. `theta` must be positive.
pub(crate) fn ln_poch(theta: f64, k: u64) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k <= DIRECT_POCHHAMMER {
        (0..k).map(|j| (theta + j as f64).ln()).sum()
    } else {
        ln_gamma(theta + k as f64) - ln_gamma(theta)
    }
}

/// Log of the rising factorial `(theta)_k = theta (theta+1) ... (theta+k-1)`.
pub fn log_pochhammer(theta: f64, k: u64) -> Result<LogReal> {
    if !(theta > 0.0) || !theta.is_finite() {
        return domain(format!("pochhammer needs theta > 0, got {theta}"));
    }
    Ok(LogReal(ln_poch(theta, k)))
}

/// `ln ((n-m) theta)_k / (n theta)_k` for real `n` and `m`, summed term by term.
///
/// Written as a sum of `ln_1p(-m theta / (n theta + j))` so that the result
/// keeps full relative precision when `n` is huge and the ratio is close to 1.
pub(crate) fn ln_bracket(theta: f64, n: f64, k: u64, m: f64) -> f64 {
    let base = n * theta;
    let shift = m * theta;
    (0..k).map(|j| (-shift / (base + j as f64)).ln_1p()).sum()
}

/// Log of `<theta>_{n,k;m} = ((n-m) theta)_k / (n theta)_k`.
pub fn log_theta_bracket(theta: f64, n: u64, k: u64, m: u64) -> Result<LogReal> {
    if !(theta > 0.0) || !theta.is_finite() {
        return domain(format!("bracket needs theta > 0, got {theta}"));
    }
    if m >= n {
        return domain(format!("bracket needs m < n, got m={m}, n={n}"));
    }
    Ok(LogReal(ln_bracket(theta, n as f64, k, m as f64)))
}
