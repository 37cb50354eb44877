//! Bayesian benchmarks: first best, market loading `a*`, team loading `a^T`.

use serde::{Deserialize, Serialize};

use crate::equilibrium::solve_loading;
use crate::error::{Error, Result};
use crate::model::{validate, Bias, MarketParams, SolverSettings, TaxSpec};
use crate::numeric::{bisect_secant, sign_changes};
use crate::scalar::{lit, to_f64, Real};

/// Which externality wins when traders are Bayesian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balance {
    /// `a* < a^T`: traders under-use private information.
    LearningDominates,
    /// `a* > a^T`: traders over-use private information.
    PecuniaryDominates,
    Balanced,
}

impl Balance {
    /// Sign of `a* - a^T` as -1, 0 or 1.
    pub fn sign(self) -> i8 {
        match self {
            Balance::LearningDominates => -1,
            Balance::PecuniaryDominates => 1,
            Balance::Balanced => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport<T = f64> {
    pub a_star: T,
    pub a_team: T,
    pub delta_fn_at_team: T,
    pub balance: Balance,
    /// Points where the denominator of `a = tau_eps / den(a)` changes sign on
    /// the scan range. These are poles of the uncleared fixed point, not roots.
    pub denominator_poles: Vec<T>,
}

/// Full-information allocation `(V + mu_s + S) / (beta + gamma)`.
pub fn first_best_demand<T: Real>(params: &MarketParams<T>, v: T, s: T) -> T {
    (v + params.mu_s + s) / (params.beta + params.gamma)
}

/// `tau(a) = tau0 + a^2 beta^2 tau_s` for a Bayesian loading `a`.
fn team_tau<T: Real>(p: &MarketParams<T>, a: T) -> T {
    p.tau0 + a * a * p.beta * p.beta * p.tau_s
}

/// `Delta(a)`, the pecuniary correction in the team fixed point.
pub fn delta_fn<T: Real>(p: &MarketParams<T>, a: T) -> T {
    let tau = team_tau(p, a);
    let u = T::one() - p.gamma * a;
    u * u * p.beta * p.beta * p.tau_s * p.tau_eps / (p.gamma * tau)
}

fn team_denominator<T: Real>(p: &MarketParams<T>, a: T) -> T {
    let tau = team_tau(p, a);
    p.gamma * (tau + p.tau_eps) + p.beta * tau - delta_fn(p, a)
}

/// Pole-free team residual `a * den(a) - tau_eps`.
fn team_residual<T: Real>(p: &MarketParams<T>, a: T) -> T {
    a * team_denominator(p, a) - p.tau_eps
}

fn scan_upper<T: Real>(p: &MarketParams<T>) -> T {
    lit::<T>(10.0) / p.gamma
}

/// Sign changes of the team denominator on the scan range, refined.
pub fn team_denominator_poles<T: Real>(params: &MarketParams<T>, settings: &SolverSettings<T>) -> Vec<T> {
    let hi = scan_upper(params);
    let lo = hi / lit::<T>(settings.scan_points as f64 * 16.0);
    sign_changes(|a| team_denominator(params, a), lo, hi, settings.scan_points)
        .into_iter()
        .map(|(l, h)| {
            if l == h {
                l
            } else {
                bisect_secant(|a| team_denominator(params, a), l, h, settings).unwrap_or((l + h) / lit(2.0))
            }
        })
        .collect()
}

/// Team (second-best) loading `a^T`.
///
/// Solved in the cleared form `a * den(a) = tau_eps`, which has no poles;
/// the root is searched on `(0, 10/gamma]`.
pub fn team_loading<T: Real>(params: &MarketParams<T>, settings: &SolverSettings<T>) -> Result<T> {
    validate(params, &Bias::bayesian(), &TaxSpec::none()).into_result()?;
    settings.check()?;
    let hi = scan_upper(params);
    // refine to bracket collapse: the cleared residual is scaled by den(a),
    // so a small residual alone does not pin down a
    let tight = SolverSettings {
        abs_tol: T::min_positive_value(),
        ..*settings
    };
    let settings = &tight;
    // r(0) = -tau_eps < 0, so starting the scan at 0 loses nothing
    let cells = sign_changes(|a| team_residual(params, a), T::zero(), hi, settings.scan_points);
    match cells.len() {
        0 => Err(Error::NoRoot { upper: to_f64(hi) }),
        1 => {
            let (l, h) = cells[0];
            if l == h {
                return Ok(l);
            }
            bisect_secant(|a| team_residual(params, a), l, h, settings)
        }
        _ => {
            let roots = cells
                .iter()
                .map(|&(l, h)| {
                    let r = bisect_secant(|a| team_residual(params, a), l, h, settings).unwrap_or(l);
                    to_f64(r)
                })
                .collect();
            Err(Error::MultipleRoots { roots })
        }
    }
}

/// Classifies which externality dominates in the Bayesian market.
pub fn externality_balance<T: Real>(
    params: &MarketParams<T>,
    settings: &SolverSettings<T>,
) -> Result<BenchmarkReport<T>> {
    let a_star = solve_loading(params, &Bias::bayesian(), &TaxSpec::none(), settings)?;
    let a_team = team_loading(params, settings)?;
    let tol = lit::<T>(1e-9) * a_team.max(T::one());
    let balance = if (a_star - a_team).abs() < tol {
        Balance::Balanced
    } else if a_star < a_team {
        Balance::LearningDominates
    } else {
        Balance::PecuniaryDominates
    };
    Ok(BenchmarkReport {
        a_star,
        a_team,
        delta_fn_at_team: delta_fn(params, a_team),
        balance,
        denominator_poles: team_denominator_poles(params, settings),
    })
}

/// Finds the supply slope in `[lo, hi]` at which `a* = a^T`, holding every
/// other parameter of `base` fixed.
pub fn balanced_beta<T: Real>(base: &MarketParams<T>, lo: T, hi: T, settings: &SolverSettings<T>) -> Result<T> {
    let gap = |beta: T| -> T {
        let p = base.with_beta(beta);
        match (
            solve_loading(&p, &Bias::bayesian(), &TaxSpec::none(), settings),
            team_loading(&p, settings),
        ) {
            (Ok(s), Ok(t)) => s - t,
            _ => T::nan(),
        }
    };
    bisect_secant(gap, lo, hi, settings)
}
