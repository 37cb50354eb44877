//! Grid-bracketed golden-section minimization.
//!
//! The objective is first sampled on a uniform grid; every grid local
//! minimum is then polished by golden-section search inside its two
//! neighbouring cells. Points where the objective fails evaluate to `+inf`.

use serde::{Deserialize, Serialize};

use crate::scalar::{lit, Real};

/// Which end of the search interval an optimum sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalMinimum<T> {
    pub x: T,
    pub value: T,
    pub boundary: Option<Boundary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum<T> {
    /// Global minimizer among the refined local minima.
    pub argmin: T,
    pub value: T,
    pub boundary: Option<Boundary>,
    /// Every local minimum found, in increasing `x`.
    pub minima: Vec<LocalMinimum<T>>,
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
pub fn golden_section<T, F>(mut f: F, lo: T, hi: T, width: T, max_iter: usize) -> (T, T)
where
    T: Real,
    F: FnMut(T) -> T,
{
    let inv_phi = lit::<T>((5f64.sqrt() - 1.0) / 2.0);
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..max_iter {
        if (b - a).abs() <= width {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Minimizes `f` over `[lo, hi]`; returns `None` when no grid point is finite.
pub fn minimize_on_grid<T, F>(mut f: F, lo: T, hi: T, points: usize, width: T) -> Option<GridMinimum<T>>
where
    T: Real,
    F: FnMut(T) -> Option<T>,
{
    let n = points.max(3);
    let step = (hi - lo) / lit::<T>((n - 1) as f64);
    let xs: Vec<T> = (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * lit(i as f64) })
        .collect();
    let mut eval = |x: T| f(x).filter(|v| v.is_finite()).unwrap_or(T::infinity());
    let vs: Vec<T> = xs.iter().map(|&x| eval(x)).collect();
    if vs.iter().all(|v| v.is_infinite()) {
        return None;
    }

    let mut minima = Vec::new();
    if vs[0] < vs[1] {
        minima.push(LocalMinimum { x: xs[0], value: vs[0], boundary: Some(Boundary::Lower) });
    }
    for i in 1..n - 1 {
        // plateaus count once, at their left end
        let left_higher = vs[i - 1] > vs[i];
        let right_not_lower = vs[i + 1] >= vs[i];
        if left_higher && right_not_lower && vs[i].is_finite() {
            let iters = 400;
            let (x, v) = golden_section(&mut eval, xs[i - 1], xs[i + 1], width, iters);
            let (x, v) = if v <= vs[i] { (x, v) } else { (xs[i], vs[i]) };
            minima.push(LocalMinimum { x, value: v, boundary: None });
        }
    }
    if vs[n - 1] < vs[n - 2] {
        minima.push(LocalMinimum { x: xs[n - 1], value: vs[n - 1], boundary: Some(Boundary::Upper) });
    }

    let best = minima
        .iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap_or(std::cmp::Ordering::Equal))?
        .clone();
    Some(GridMinimum {
        argmin: best.x,
        value: best.value,
        boundary: best.boundary,
        minima,
    })
}
