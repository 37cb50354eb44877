//! Generic scalar numerics used by the model solvers.

pub mod minimize;
pub mod roots;

pub use minimize::{golden_section, minimize_on_grid, Boundary, GridMinimum, LocalMinimum};
pub use roots::{bisect_secant, newton_bisect, sign_changes};

use crate::scalar::{lit, Real};

/// Central difference with step `h = cbrt(eps) * max(1, |x|)`, shrunk so that
/// `x - h` stays above `floor` when one is given.
pub fn central_difference<T, F>(mut f: F, x: T, floor: Option<T>) -> Option<T>
where
    T: Real,
    F: FnMut(T) -> Option<T>,
{
    let mut h = T::epsilon().cbrt() * x.abs().max(T::one());
    if let Some(fl) = floor {
        let room = (x - fl) * lit(0.5);
        if room <= T::zero() {
            return None;
        }
        h = h.min(room);
    }
    let up = f(x + h)?;
    let down = f(x - h)?;
    Some((up - down) / (h + h))
}
