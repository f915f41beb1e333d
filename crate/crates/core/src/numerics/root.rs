//! Safeguarded bracketed root finding.

use crate::{lit, Error, Real, Result};

/// Finds the root of a monotone `f` inside `[lo, hi]`.
///
/// Requires a sign change over the bracket. Secant steps are taken when they
/// fall safely inside the current bracket, bisection otherwise, so the
/// bracket width shrinks to `tol` in at most ~`log2((hi-lo)/tol)` extra
/// bisections regardless of how well the secant behaves.
pub fn find_root<F: Real>(f: impl Fn(F) -> F, lo: F, hi: F, tol: F) -> Result<F> {
    if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
        return Err(Error::parameter("find_root requires finite lo < hi"));
    }
    if tol <= F::zero() {
        return Err(Error::parameter("find_root tolerance must be positive"));
    }
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == F::zero() {
        return Ok(a);
    }
    if fb == F::zero() {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::parameter(
            "find_root precondition violated: no sign change over bracket",
        ));
    }

    let half = lit::<F>(0.5);
    let mut x = a;
    for _ in 0..512 {
        if (b - a) <= tol {
            break;
        }
        let mid = a + (b - a) * half;
        // secant through the bracket endpoints
        let denom = fb - fa;
        let mut cand = if denom != F::zero() {
            a - fa * (b - a) / denom
        } else {
            mid
        };
        // keep the candidate strictly interior; otherwise bisect
        let margin = (b - a) * lit(0.01);
        if !(cand > a + margin && cand < b - margin) {
            cand = mid;
        }
        let fc = f(cand);
        x = cand;
        if fc == F::zero() {
            return Ok(cand);
        }
        if fc.signum() == fa.signum() {
            a = cand;
            fa = fc;
        } else {
            b = cand;
            fb = fc;
        }
    }
    if (b - a) > tol {
        return Err(Error::Numeric {
            context: "find_root failed to shrink bracket".into(),
            estimate: x.to_f64().unwrap_or(f64::NAN),
            achieved: (b - a).to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(a + (b - a) * half)
}
