//! Bracketed scalar root finding.

use crate::error::{Error, Result};
use crate::model::SolverSettings;
use crate::scalar::{lit, to_f64, Real};

/// True once `[lo, hi]` cannot be split further at this precision.
fn collapsed<T: Real>(lo: T, hi: T) -> bool {
    let scale = lo.abs().max(hi.abs()).max(T::min_positive_value());
    hi - lo <= scale * T::epsilon() * lit(4.0)
}

/// Safeguarded Newton iteration on a bracket `[lo, hi]` with a sign change.
///
/// `f` returns the residual and its derivative. Newton steps that leave the
/// current bracket, or fail to halve the residual, are replaced by bisection,
/// so convergence is guaranteed for any continuous `f`.
pub fn newton_bisect<T, F>(mut f: F, lo: T, hi: T, settings: &SolverSettings<T>) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> (T, T),
{
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let (f_lo, _) = f(lo);
    let (f_hi, _) = f(hi);
    if f_lo.abs() <= settings.abs_tol {
        return Ok(lo);
    }
    if f_hi.abs() <= settings.abs_tol {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::NoBracket { lo: to_f64(lo), hi: to_f64(hi) });
    }
    let rising = f_hi > T::zero();
    let two = lit::<T>(2.0);
    let mut x = (lo + hi) / two;
    let mut last_abs = T::infinity();
    let mut residual = T::infinity();
    for _ in 0..settings.max_iter {
        let (fx, dfx) = f(x);
        residual = fx;
        if fx.abs() <= settings.abs_tol {
            return Ok(x);
        }
        if (fx > T::zero()) == rising {
            hi = x;
        } else {
            lo = x;
        }
        if collapsed(lo, hi) {
            return Ok(x);
        }
        let newton = x - fx / dfx;
        let fast = fx.abs() < last_abs * lit(0.5) || last_abs.is_infinite();
        x = if newton.is_finite() && newton > lo && newton < hi && fast {
            newton
        } else {
            (lo + hi) / two
        };
        last_abs = fx.abs();
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        residual: to_f64(residual),
    })
}

/// Derivative-free bracketed solve (Illinois variant of regula falsi,
/// falling back to bisection when the bracket shrinks too slowly).
pub fn bisect_secant<T, F>(mut f: F, lo: T, hi: T, settings: &SolverSettings<T>) -> Result<T>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.abs() <= settings.abs_tol {
        return Ok(a);
    }
    if fb.abs() <= settings.abs_tol {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoBracket { lo: to_f64(a), hi: to_f64(b) });
    }
    let half = lit::<T>(0.5);
    let mut side = 0i8;
    let mut residual = T::infinity();
    for it in 0..settings.max_iter {
        // every third step is a plain bisection so the width always shrinks
        let c = if it % 3 == 2 {
            (a + b) * half
        } else {
            let s = b - fb * (b - a) / (fb - fa);
            if s.is_finite() && s > a && s < b {
                s
            } else {
                (a + b) * half
            }
        };
        let fc = f(c);
        residual = fc;
        if fc.abs() <= settings.abs_tol {
            return Ok(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == 1 {
                fa = fa * half;
            }
            side = 1;
        } else {
            a = c;
            fa = fc;
            if side == -1 {
                fb = fb * half;
            }
            side = -1;
        }
        if collapsed(a, b) {
            return Ok(c);
        }
    }
    Err(Error::NoConvergence {
        iterations: settings.max_iter,
        residual: to_f64(residual),
    })
}

/// Evaluates `f` on `points` equally spaced nodes of `[lo, hi]` and returns
/// every cell whose endpoints have strictly opposite signs (exact zeros at a
/// node are reported as a degenerate cell `[x, x]`).
pub fn sign_changes<T, F>(mut f: F, lo: T, hi: T, points: usize) -> Vec<(T, T)>
where
    T: Real,
    F: FnMut(T) -> T,
{
    let n = points.max(2);
    let step = (hi - lo) / lit::<T>((n - 1) as f64);
    let mut out = Vec::new();
    let mut prev_x = lo;
    let mut prev_f = f(lo);
    if prev_f == T::zero() {
        out.push((lo, lo));
    }
    for i in 1..n {
        let x = if i == n - 1 { hi } else { lo + step * lit((i) as f64) };
        let fx = f(x);
        if fx == T::zero() {
            out.push((x, x));
        } else if prev_f != T::zero() && fx.is_finite() && prev_f.is_finite() && fx.signum() != prev_f.signum() {
            out.push((prev_x, x));
        }
        prev_x = x;
        prev_f = fx;
    }
    out
}
