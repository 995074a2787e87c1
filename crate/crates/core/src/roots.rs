//! Scalar root finding for increasing functions on `(0, inf)`.
//!
//! Every equation solved in this crate has a strictly monotone left-hand
//! side, so a bracket can always be found by geometric expansion and the
//! root polished with a Newton step that falls back to bisection whenever
//! it would leave the bracket.

use crate::error::{ChordError, Result};

/// Hard cap on iterations for both the bracket search and the polish.
pub const MAX_ITERATIONS: usize = 200;

/// Expands `[start/2^k, start*2^k]` until `f` changes sign, for an
/// increasing `f` on `(0, inf)`. Returns `(lo, hi)` with `f(lo) <= 0 <= f(hi)`.
pub fn bracket_increasing<F>(f: F, start: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let fs = f(start);
    if fs == 0.0 {
        return Ok((start, start));
    }
    let (mut lo, mut hi) = (start, start);
    for _ in 0..MAX_ITERATIONS {
        if fs < 0.0 {
            lo = hi;
            hi *= 2.0;
            if f(hi) >= 0.0 {
                return Ok((lo, hi));
            }
        } else {
            hi = lo;
            lo *= 0.5;
            if f(lo) <= 0.0 {
                return Ok((lo, hi));
            }
        }
    }
    Err(ChordError::ConvergenceFailure {
        what: "bracket expansion",
        iterations: MAX_ITERATIONS,
    })
}

/// Safeguarded Newton iteration for an increasing function on `[lo, hi]`.
///
/// `f` returns the value and derivative. Iteration stops once the step is
/// below `rel_tol` relative to the iterate.
pub fn solve_increasing<F>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    if lo == hi {
        return Ok(lo);
    }
    let (mut lo, mut hi) = (lo, hi);
    let mut x = 0.5 * (lo + hi);
    let mut step_old = hi - lo;
    let mut step = step_old;
    let (mut fx, mut dfx) = f(x);
    for _ in 0..MAX_ITERATIONS {
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton_leaves = ((x - hi) * dfx - fx) * ((x - lo) * dfx - fx) > 0.0;
        let newton_slow = (2.0 * fx).abs() > (step_old * dfx).abs();
        step_old = step;
        if !dfx.is_finite() || dfx <= 0.0 || newton_leaves || newton_slow {
            step = 0.5 * (hi - lo);
            x = lo + step;
        } else {
            step = fx / dfx;
            x -= step;
        }
        if step.abs() <= rel_tol * x.abs() || hi - lo <= rel_tol * hi {
            return Ok(x);
        }
        (fx, dfx) = f(x);
    }
    Err(ChordError::ConvergenceFailure {
        what: "safeguarded Newton",
        iterations: MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let f = |x: f64| x * x * x - 5.0;
        let (lo, hi) = bracket_increasing(f, 1.0).unwrap();
        assert!(f(lo) <= 0.0 && f(hi) >= 0.0);
        let r = solve_increasing(|x| (f(x), 3.0 * x * x), lo, hi, 1e-14).unwrap();
        assert!((r - 5f64.cbrt()).abs() < 1e-13);
    }

    #[test]
    fn brackets_downward() {
        let f = |x: f64| x - 1e-6;
        let (lo, hi) = bracket_increasing(f, 3.0).unwrap();
        assert!(lo <= 1e-6 && 1e-6 <= hi);
    }

    #[test]
    fn bisection_fallback_with_useless_derivative() {
        let r = solve_increasing(|x| (x - 0.3, 0.0), 0.0, 1.0, 1e-13).unwrap();
        assert!((r - 0.3).abs() < 1e-12);
    }

    #[test]
    fn unbracketable_function_fails() {
        assert!(bracket_increasing(|_| -1.0, 1.0).is_err());
    }
}
