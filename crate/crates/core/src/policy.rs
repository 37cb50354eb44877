//! Thresholds, optimizers and sweeps over the bias and the tax rate.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benchmark::team_loading;
use crate::equilibrium::{equilibrium, price_stats, Equilibrium, THETA_FLOOR_GAP};
use crate::error::{Error, Result};
use crate::model::{Bias, MarketParams, Regime, SolverSettings, TaxSpec};
use crate::numeric::{bisect_secant, central_difference, minimize_on_grid, Boundary};
use crate::scalar::{lit, to_f64, Real};
use crate::welfare::{breakdown, dwl_ddelta_at_zero, dwl_dtheta_closed, wl_tax_at};

/// Default search range for the bias.
pub const THETA_RANGE: (f64, f64) = (-0.999, 10.0);

/// Width to which optimizers refine a bracketed minimum.
const MIN_WIDTH: f64 = 1e-10;

fn alpha_at<T: Real>(p: &MarketParams<T>, theta: T, tax: &TaxSpec<T>, s: &SolverSettings<T>) -> Result<Equilibrium<T>> {
    equilibrium(p, &Bias::new(theta), tax, s)
}

/// Grows `hi` geometrically until `f(hi)` is positive.
fn expand_upper<T: Real, F: FnMut(T) -> Result<T>>(mut f: F, start: T, max_doublings: usize) -> Result<T> {
    let mut hi = start;
    for _ in 0..max_doublings {
        if f(hi)? > T::zero() {
            return Ok(hi);
        }
        hi = hi + hi.abs().max(T::one());
    }
    Err(Error::NoBracket { lo: f64::NAN, hi: to_f64(hi) })
}

/// Bias `theta'` at which the untaxed private loading equals `a^T`.
///
/// The fixed point is inverted directly: for a target `alpha`, the base
/// loading is `a = tau_eps / (gamma (tau_eps + tau0 + alpha^2 beta^2 tau_s))`
/// and `theta' = alpha / a - 1`.
pub fn threshold_theta_private<T: Real>(params: &MarketParams<T>, settings: &SolverSettings<T>) -> Result<T> {
    let target = team_loading(params, settings)?;
    Ok(theta_for_alpha(params, target))
}

pub(crate) fn theta_for_alpha<T: Real>(p: &MarketParams<T>, alpha: T) -> T {
    let tau = p.tau0 + alpha * alpha * p.beta * p.beta * p.tau_s;
    let a = p.tau_eps / (p.gamma * (p.tau_eps + tau));
    alpha / a - T::one()
}

/// Bias `theta''` at which the public loading equals `1/gamma - a^T`.
pub fn threshold_theta_public<T: Real>(params: &MarketParams<T>, settings: &SolverSettings<T>) -> Result<T> {
    let a_team = team_loading(params, settings)?;
    let target = T::one() / params.gamma - a_team;
    let none = TaxSpec::none();
    let gap = |th: T| alpha_at(params, th, &none, settings).map(|eq| eq.eta - target);
    let lo = lit::<T>(-1.0 + 2.0 * THETA_FLOOR_GAP);
    if gap(lo)? >= T::zero() {
        return Err(Error::NoBracket { lo: to_f64(lo), hi: to_f64(lo) });
    }
    let hi = expand_upper(gap, T::one(), 60)?;
    bisect_secant(|th| gap(th).unwrap_or(T::nan()), lo, hi, settings)
}

/// Tax rate at which the private loading equals `a^T` for the given bias.
pub fn threshold_delta_star<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    regime: Regime,
    settings: &SolverSettings<T>,
) -> Result<T> {
    let target = team_loading(params, settings)?;
    let bound = TaxSpec::lower_bound(regime, params);
    let lo = bound + lit::<T>(1e-9) * bound.abs().max(T::one());
    let excess = |d: T| equilibrium(params, bias, &TaxSpec::new(d, regime), settings).map(|eq| eq.alpha - target);
    let at_lo = excess(lo)?;
    if at_lo < T::zero() {
        return Err(Error::Infeasible {
            bound: to_f64(bound),
            alpha_at_bound: to_f64(at_lo + target),
            target: to_f64(target),
        });
    }
    if at_lo == T::zero() {
        return Ok(lo);
    }
    // alpha falls in delta, so look for the first point below target
    let hi = expand_upper(|d| excess(d).map(|x| -x), params.gamma.max(T::one()), 60)?;
    bisect_secant(|d| excess(d).unwrap_or(T::nan()), lo, hi, settings)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaOptimum<T = f64> {
    /// Global minimizer of the welfare loss over the search range.
    pub theta_opt: T,
    pub wl: T,
    /// Leftmost and rightmost local minimizers; below the first the loss
    /// falls in `theta`, above the second it rises.
    pub theta_low: T,
    pub theta_high: T,
    pub local_minima: usize,
    pub boundary: Option<Boundary>,
}

/// Minimizes the untaxed welfare loss over `(-0.999, 10]`.
pub fn optimal_theta<T: Real>(params: &MarketParams<T>, settings: &SolverSettings<T>) -> Result<ThetaOptimum<T>> {
    optimal_theta_on(params, lit(THETA_RANGE.0), lit(THETA_RANGE.1), settings)
}

pub fn optimal_theta_on<T: Real>(
    params: &MarketParams<T>,
    lo: T,
    hi: T,
    settings: &SolverSettings<T>,
) -> Result<ThetaOptimum<T>> {
    settings.check()?;
    let none = TaxSpec::none();
    let wl = |th: T| {
        alpha_at(params, th, &none, settings)
            .ok()
            .map(|eq| breakdown(params, &eq).wl_total)
    };
    let grid = minimize_on_grid(wl, lo, hi, settings.scan_points, lit(MIN_WIDTH))
        .ok_or(Error::NoBracket { lo: to_f64(lo), hi: to_f64(hi) })?;
    let step = (hi - lo) / lit::<T>((settings.scan_points - 1) as f64);

    // polish interior minima on the first-order condition, which is far
    // better conditioned than the flat objective
    let polish = |x: T| -> T {
        let foc = |t: T| dwl_dtheta_closed(params, t, settings).unwrap_or(T::nan());
        let (l, h) = ((x - step).max(lo), (x + step).min(hi));
        bisect_secant(foc, l, h, settings).unwrap_or(x)
    };
    let xs: Vec<T> = grid
        .minima
        .iter()
        .map(|m| if m.boundary.is_none() { polish(m.x) } else { m.x })
        .collect();
    let best = grid
        .minima
        .iter()
        .position(|m| m.x == grid.argmin && m.value == grid.value)
        .unwrap_or(0);
    let theta_opt = xs[best];
    let value = wl(theta_opt).unwrap_or(grid.value);
    Ok(ThetaOptimum {
        theta_opt,
        wl: value,
        theta_low: xs[0],
        theta_high: xs[xs.len() - 1],
        local_minima: xs.len(),
        boundary: grid.boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxOptimum<T = f64> {
    pub delta_opt: T,
    pub wl: T,
    pub regime: Regime,
    pub local_minima: usize,
    /// Set when the optimum sits on the edge of the feasible search range.
    pub boundary: Option<Boundary>,
}

/// Feasible search range for the tax rate.
pub fn tax_range<T: Real>(params: &MarketParams<T>, regime: Regime) -> (T, T) {
    let lo = TaxSpec::lower_bound(regime, params) * lit::<T>(0.999);
    (lo, params.gamma * lit::<T>(10.0))
}

/// Minimizes the taxed welfare loss over the feasible range of `delta`.
pub fn optimal_tax<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    regime: Regime,
    settings: &SolverSettings<T>,
) -> Result<TaxOptimum<T>> {
    settings.check()?;
    let (lo, hi) = tax_range(params, regime);
    let wl = |d: T| {
        equilibrium(params, bias, &TaxSpec::new(d, regime), settings)
            .ok()
            .map(|eq| wl_tax_at(params, &eq))
    };
    let grid = minimize_on_grid(wl, lo, hi, settings.scan_points, lit(MIN_WIDTH))
        .ok_or(Error::NoBracket { lo: to_f64(lo), hi: to_f64(hi) })?;
    Ok(TaxOptimum {
        delta_opt: grid.argmin,
        wl: grid.value,
        regime,
        local_minima: grid.minima.len(),
        boundary: grid.boundary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport<T = f64> {
    pub theta_prime: T,
    pub theta_dprime: T,
    /// `None` when the required tax is infeasible.
    pub delta_star_both: Option<T>,
    pub delta_star_informed: Option<T>,
    pub theta_opt: ThetaOptimum<T>,
    pub tax_opt_both: TaxOptimum<T>,
    pub tax_opt_informed: TaxOptimum<T>,
}

pub fn policy_report<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    settings: &SolverSettings<T>,
) -> Result<PolicyReport<T>> {
    let star = |r| match threshold_delta_star(params, bias, r, settings) {
        Ok(d) => Ok(Some(d)),
        Err(Error::Infeasible { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(PolicyReport {
        theta_prime: threshold_theta_private(params, settings)?,
        theta_dprime: threshold_theta_public(params, settings)?,
        delta_star_both: star(Regime::BothSides)?,
        delta_star_informed: star(Regime::InformedOnly)?,
        theta_opt: optimal_theta(params, settings)?,
        tax_opt_both: optimal_tax(params, bias, Regime::BothSides, settings)?,
        tax_opt_informed: optimal_tax(params, bias, Regime::InformedOnly, settings)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Theta,
    Delta,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Theta => "theta",
            Axis::Delta => "delta",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "theta" => Ok(Axis::Theta),
            "delta" => Ok(Axis::Delta),
            other => Err(format!("unknown axis {other:?} (expected theta|delta)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow<T = f64> {
    pub axis_value: T,
    pub a: T,
    pub alpha: T,
    pub eta: T,
    pub eta_p: T,
    pub tau: T,
    #[serde(rename = "A")]
    pub price_a: T,
    #[serde(rename = "B")]
    pub price_b: T,
    #[serde(rename = "C")]
    pub price_c: T,
    pub var_p: T,
    pub wl_total: T,
    pub wl_bayes: T,
    pub wl_diag: T,
    pub dwl_daxis: T,
    /// `ok`, or the error that prevented the row from being solved.
    pub flag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable<T = f64> {
    pub axis: Axis,
    pub rows: Vec<SweepRow<T>>,
}

pub const SWEEP_COLUMNS: [&str; 15] = [
    "axis_value",
    "a",
    "alpha",
    "eta",
    "eta_p",
    "tau",
    "A",
    "B",
    "C",
    "var_p",
    "wl_total",
    "wl_bayes",
    "wl_diag",
    "dwl_daxis",
    "flag",
];

fn failed_row<T: Real>(x: T, err: &Error) -> SweepRow<T> {
    let nan = T::nan();
    SweepRow {
        axis_value: x,
        a: nan,
        alpha: nan,
        eta: nan,
        eta_p: nan,
        tau: nan,
        price_a: nan,
        price_b: nan,
        price_c: nan,
        var_p: nan,
        wl_total: nan,
        wl_bayes: nan,
        wl_diag: nan,
        dwl_daxis: nan,
        flag: err.to_string(),
    }
}

fn sweep_row<T: Real>(
    params: &MarketParams<T>,
    axis: Axis,
    x: T,
    bias: &Bias<T>,
    tax: &TaxSpec<T>,
    settings: &SolverSettings<T>,
) -> Result<SweepRow<T>> {
    let (bias, tax) = match axis {
        Axis::Theta => (Bias::new(x), *tax),
        Axis::Delta => (*bias, TaxSpec::new(x, tax.regime)),
    };
    let eq = equilibrium(params, &bias, &tax, settings)?;
    let nan = T::nan();
    let (wl_total, wl_bayes, wl_diag) = if tax.delta == T::zero() {
        let w = breakdown(params, &eq);
        (w.wl_total, w.wl_bayes, w.wl_diag)
    } else {
        // the Bayesian/diagnostic split is only defined without a tax
        (wl_tax_at(params, &eq), nan, nan)
    };
    let dwl_daxis = match axis {
        Axis::Theta if tax.delta == T::zero() => dwl_dtheta_closed(params, x, settings)?,
        Axis::Theta => central_difference(
            |t| {
                equilibrium(params, &Bias::new(t), &tax, settings)
                    .ok()
                    .map(|e| wl_tax_at(params, &e))
            },
            x,
            Some(lit(-1.0 + THETA_FLOOR_GAP)),
        )
        .unwrap_or(nan),
        Axis::Delta if x == T::zero() => dwl_ddelta_at_zero(params, &bias, tax.regime, settings)?,
        Axis::Delta => central_difference(
            |d| {
                equilibrium(params, &bias, &TaxSpec::new(d, tax.regime), settings)
                    .ok()
                    .map(|e| wl_tax_at(params, &e))
            },
            x,
            Some(TaxSpec::lower_bound(tax.regime, params)),
        )
        .unwrap_or(nan),
    };
    Ok(SweepRow {
        axis_value: x,
        a: eq.a,
        alpha: eq.alpha,
        eta: eq.eta,
        eta_p: eq.eta_p,
        tau: eq.tau,
        price_a: eq.price_a,
        price_b: eq.price_b,
        price_c: eq.price_c,
        var_p: price_stats(&eq).var_p,
        wl_total,
        wl_bayes,
        wl_diag,
        dwl_daxis,
        flag: "ok".to_string(),
    })
}

/// Evaluates the equilibrium and welfare along `grid`, which must be
/// strictly increasing. On the theta axis the tax in `tax` is held fixed;
/// on the delta axis the bias is held fixed and the regime taken from `tax`.
/// Rows that fail carry the error in `flag` and NaN elsewhere.
pub fn sweep<T: Real>(
    params: &MarketParams<T>,
    axis: Axis,
    grid: &[T],
    bias: &Bias<T>,
    tax: &TaxSpec<T>,
    settings: &SolverSettings<T>,
) -> Result<SweepTable<T>> {
    settings.check()?;
    if grid.is_empty() || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NoBracket {
            lo: grid.first().map(|&x| to_f64(x)).unwrap_or(f64::NAN),
            hi: grid.last().map(|&x| to_f64(x)).unwrap_or(f64::NAN),
        });
    }
    let rows = grid
        .par_iter()
        .map(|&x| sweep_row(params, axis, x, bias, tax, settings).unwrap_or_else(|e| failed_row(x, &e)))
        .collect();
    Ok(SweepTable { axis, rows })
}

/// `n` equally spaced points from `lo` to `hi` inclusive.
pub fn linspace<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / lit::<T>((n - 1) as f64);
            (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + step * lit(i as f64) })
                .collect()
        }
    }
}

impl<T: Real> SweepTable<T> {
    /// Writes the table as CSV. `extra` columns hold one value per row and
    /// are appended after `flag`.
    pub fn write_csv<W: Write>(&self, out: W, extra: &[(&str, Vec<T>)]) -> std::io::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header: Vec<&str> = SWEEP_COLUMNS.to_vec();
        header.extend(extra.iter().map(|(name, _)| *name));
        w.write_record(&header)?;
        for (i, r) in self.rows.iter().enumerate() {
            let mut rec: Vec<String> = [
                r.axis_value,
                r.a,
                r.alpha,
                r.eta,
                r.eta_p,
                r.tau,
                r.price_a,
                r.price_b,
                r.price_c,
                r.var_p,
                r.wl_total,
                r.wl_bayes,
                r.wl_diag,
                r.dwl_daxis,
            ]
            .iter()
            .map(|v| fmt_float(*v))
            .collect();
            rec.push(r.flag.clone());
            rec.extend(extra.iter().map(|(_, col)| fmt_float(col[i])));
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

/// Shortest decimal that parses back to the same float.
pub fn fmt_float<T: Real>(x: T) -> String {
    format!("{x}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn s() -> SolverSettings<f64> {
        SolverSettings::default()
    }

    #[test]
    fn theta_prime_hits_team_loading() {
        for p in [presets::fig1a(), presets::fig1b()] {
            let at = team_loading(&p, &s()).unwrap();
            let tp = threshold_theta_private(&p, &s()).unwrap();
            let eq = alpha_at(&p, tp, &TaxSpec::none(), &s()).unwrap();
            assert!((eq.alpha - at).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_star_zero_at_theta_prime() {
        let p = presets::fig1b();
        let tp = threshold_theta_private(&p, &s()).unwrap();
        for r in Regime::ALL {
            let d = threshold_delta_star(&p, &Bias::new(tp), r, &s()).unwrap();
            assert!(d.abs() < 1e-9, "{r}: {d}");
        }
    }

    #[test]
    fn delta_star_signs() {
        let b = Bias::bayesian();
        for r in Regime::ALL {
            assert!(threshold_delta_star(&presets::fig1b(), &b, r, &s()).unwrap() > 0.0);
            assert!(threshold_delta_star(&presets::fig1a(), &b, r, &s()).unwrap() < 0.0);
        }
    }

    #[test]
    fn delta_only_sweep_matches_untaxed_solve() {
        let p = presets::fig1a();
        let t = sweep(&p, Axis::Delta, &[0.0], &Bias::new(0.2), &TaxSpec::none(), &s()).unwrap();
        let w = crate::welfare::welfare_loss(&p, &Bias::new(0.2), &s()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].wl_total, w.wl_total);
        assert_eq!(t.rows[0].wl_diag, w.wl_diag);
    }

    #[test]
    fn failing_rows_are_flagged() {
        let p = presets::fig1a();
        let grid = [-1.5, 0.0];
        let t = sweep(&p, Axis::Theta, &grid, &Bias::bayesian(), &TaxSpec::none(), &s()).unwrap();
        assert!(t.rows[0].flag.contains("theta must exceed -1"));
        assert!(t.rows[0].a.is_nan());
        assert_eq!(t.rows[1].flag, "ok");
    }

    #[test]
    fn csv_header_is_fixed() {
        let p = presets::fig1b();
        let t = sweep(&p, Axis::Theta, &linspace(-0.1, 0.1, 3), &Bias::bayesian(), &TaxSpec::none(), &s()).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf, &[]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), SWEEP_COLUMNS.join(","));
        assert_eq!(text.lines().count(), 4);
        let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first[0].parse::<f64>().unwrap(), -0.1);
    }

    #[test]
    fn non_increasing_grid_rejected() {
        let p = presets::fig1b();
        assert!(sweep(&p, Axis::Theta, &[0.1, 0.1], &Bias::bayesian(), &TaxSpec::none(), &s()).is_err());
    }
}
