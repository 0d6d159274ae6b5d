//! Small numerical integration helpers used by the optics module.

use crate::error::{Error, Result};

const MAX_EVALUATIONS: usize = 2_000_000;

/// Adaptive Simpson integration of `f` over `[a, b]`.
///
/// Converges when the Richardson error estimate falls below
/// `max(rel_tol * |estimate|, abs_tol)`.
pub fn adaptive_simpson<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: f64| -> Result<f64> {
        evals.set(evals.get() + 1);
        f(x)
    };
    let fa = eval(a)?;
    let fm = eval(0.5 * (a + b))?;
    let fb = eval(b)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);

    // Explicit stack instead of recursion so the evaluation budget is global.
    let mut total = 0.0;
    let mut stack = vec![(a, b, fa, fm, fb, whole, abs_tol.max(rel_tol * whole.abs()), 0u32)];
    while let Some((a, b, fa, fm, fb, whole, tol, depth)) = stack.pop() {
        let m = 0.5 * (a + b);
        let lm = eval(0.5 * (a + m))?;
        let rm = eval(0.5 * (m + b))?;
        let left = (m - a) / 6.0 * (fa + 4.0 * lm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * rm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            total += left + right + delta / 15.0;
        } else if depth >= 48 || evals.get() > MAX_EVALUATIONS {
            return Err(Error::QuadratureDiverged { evaluations: evals.get(), estimate: total });
        } else {
            stack.push((a, m, fa, lm, fm, left, tol / 2.0, depth + 1));
            stack.push((m, b, fm, rm, fb, right, tol / 2.0, depth + 1));
        }
    }
    Ok(total)
}

/// Integral of a smooth `2 pi`-periodic function over one period.
///
/// The trapezoid rule converges geometrically for such integrands; the node
/// count doubles until two successive estimates agree.
pub fn periodic_trapezoid<F>(f: F, rel_tol: f64, abs_tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let tau = std::f64::consts::TAU;
    let mut n = 8usize;
    let mut sum: f64 = (0..n).map(|k| f(tau * k as f64 / n as f64)).sum();
    let mut estimate = sum * tau / n as f64;
    while n < 1 << 16 {
        // The refined grid reuses every old node; only the midpoints are new.
        let mid: f64 = (0..n).map(|k| f(tau * (k as f64 + 0.5) / n as f64)).sum();
        sum += mid;
        n *= 2;
        let refined = sum * tau / n as f64;
        if (refined - estimate).abs() <= abs_tol.max(rel_tol * refined.abs()) {
            return Ok(refined);
        }
        estimate = refined;
    }
    Err(Error::QuadratureDiverged { evaluations: n, estimate })
}
