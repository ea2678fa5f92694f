use crate::error::{Error, Result};

/// Default tolerance on the argument, relative to `max(1, |x|)`.
pub const ROOT_TOL: f64 = 1e-10;

/// Bracket expansions attempted before giving up.
pub const MAX_EXPANSIONS: usize = 200;

/// Result of a bracketed solve with its diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub x: f64,
    /// Function evaluations spent, expansions included.
    pub evaluations: usize,
    /// `f(x) - target`.
    pub residual: f64,
}

/// Solve `f(x) = target` for monotone `f` (either direction).
///
/// Starts from `[lo, hi]` and doubles the bracket toward the side where the
/// root must lie until `f - target` changes sign. A positive lower end is
/// halved rather than pushed through zero so that functions defined only on
/// `(0, inf)` stay in their domain. Bisection then stops once the interval is
/// below `tol * max(1, |x|)`; `tol = 0` runs to float resolution.
pub fn solve_monotone<F>(f: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    solve_monotone_report(f, target, lo, hi, tol).map(|r| r.x)
}

pub fn solve_monotone_report<F>(mut f: F, target: f64, lo: f64, hi: f64, tol: f64) -> Result<Root>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite()) || lo > hi || !(tol >= 0.0) {
        return Err(Error::Domain(format!("bad bracket [{lo}, {hi}] or tolerance {tol}")));
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut evaluations = 0usize;
    let mut g = |x: f64| {
        evaluations += 1;
        f(x) - target
    };
    let mut glo = g(lo);
    let mut ghi = if hi == lo { glo } else { g(hi) };
    let mut expansions = 0;
    loop {
        if glo.is_nan() || ghi.is_nan() {
            return Err(Error::NoSolution(format!("function undefined on [{lo}, {hi}]")));
        }
        if glo == 0.0 {
            return Ok(Root { x: lo, evaluations, residual: 0.0 });
        }
        if ghi == 0.0 {
            return Ok(Root { x: hi, evaluations, residual: 0.0 });
        }
        if (glo < 0.0) != (ghi < 0.0) {
            break;
        }
        if expansions == MAX_EXPANSIONS {
            return Err(Error::NoSolution(format!(
                "no sign change of f - {target} on [{lo}, {hi}] after {MAX_EXPANSIONS} expansions"
            )));
        }
        expansions += 1;
        let width = (hi - lo).max(f64::MIN_POSITIVE);
        let move_lo = ghi == glo || (ghi > glo) == (glo > 0.0);
        let move_hi = ghi == glo || !move_lo;
        if move_lo {
            lo = if lo > 0.0 { lo / 2.0 } else { lo - width };
            glo = g(lo);
        }
        if move_hi {
            hi += width;
            ghi = g(hi);
        }
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NoSolution("bracket expansion overflowed".into()));
        }
    }
    let lo_negative = glo < 0.0;
    loop {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi || hi - lo <= tol * mid.abs().max(1.0) {
            break;
        }
        let gm = g(mid);
        if gm.is_nan() {
            return Err(Error::NoSolution(format!("function undefined at {mid}")));
        }
        if gm == 0.0 {
            return Ok(Root { x: mid, evaluations, residual: 0.0 });
        }
        if (gm < 0.0) == lo_negative {
            lo = mid;
            glo = gm;
        } else {
            hi = mid;
            ghi = gm;
        }
    }
    let (x, residual) = if glo.abs() <= ghi.abs() { (lo, glo) } else { (hi, ghi) };
    Ok(Root { x, evaluations, residual })
}
