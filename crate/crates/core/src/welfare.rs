//! Welfare loss relative to the first best, measured in surplus units.

use serde::{Deserialize, Serialize};

use crate::equilibrium::{dalpha_ddelta, equilibrium, Equilibrium, THETA_FLOOR_GAP};
use crate::error::Result;
use crate::model::{Bias, MarketParams, Regime, SolverSettings, TaxSpec};
use crate::numeric::central_difference;
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WelfareBreakdown<T = f64> {
    pub wl_total: T,
    /// Loss a Bayesian market with the same private loading would incur.
    pub wl_bayes: T,
    /// Extra loss from the distortion of public-information use.
    pub wl_diag: T,
}

/// Welfare loss of arbitrary linear loadings `(alpha, eta)` without tax.
pub fn wl_general<T: Real>(params: &MarketParams<T>, alpha: T, eta: T) -> T {
    let (g, b) = (params.gamma, params.beta);
    let half = lit::<T>(0.5);
    let tau = params.tau0 + alpha * alpha * b * b * params.tau_s;
    let u = T::one() - g * alpha;
    let w = u - g * eta;
    half * u * u / ((b + g) * tau)
        + half * w * w / (b + g) * (T::one() / params.tau0 - T::one() / tau)
        + g * alpha * alpha / (lit::<T>(2.0) * params.tau_eps)
}

/// Decomposition of an untaxed equilibrium's loss.
pub fn breakdown<T: Real>(params: &MarketParams<T>, eq: &Equilibrium<T>) -> WelfareBreakdown<T> {
    let (g, b) = (params.gamma, params.beta);
    let half = lit::<T>(0.5);
    let u = T::one() - g * eq.alpha;
    let wl_bayes = half * u * u / ((b + g) * eq.tau) + g * eq.alpha * eq.alpha / (lit::<T>(2.0) * params.tau_eps);
    let wl_diag = eq.theta * eq.theta / (lit::<T>(2.0) * (b + g)) * (T::one() / params.tau0 - T::one() / eq.tau);
    WelfareBreakdown {
        wl_total: wl_general(params, eq.alpha, eq.eta),
        wl_bayes,
        wl_diag,
    }
}

pub fn welfare_loss<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    settings: &SolverSettings<T>,
) -> Result<WelfareBreakdown<T>> {
    let eq = equilibrium(params, bias, &TaxSpec::none(), settings)?;
    Ok(breakdown(params, &eq))
}

/// Loss of a taxed equilibrium (rebate included, so only allocations count).
pub fn wl_tax_at<T: Real>(params: &MarketParams<T>, eq: &Equilibrium<T>) -> T {
    let (g, beta) = (params.gamma, params.beta);
    let (tau0, tau_s) = (params.tau0, params.tau_s);
    let (d, th, alpha) = (eq.delta, eq.theta, eq.alpha);
    let one = T::one();
    let two = lit::<T>(2.0);
    let c = match eq.regime {
        Regime::BothSides => two,
        Regime::InformedOnly => one,
    };
    let bb = eq.slope;
    let bg = beta + g;
    let s = bg + c * d;
    let s2 = s * s;
    let x = one - (g + d) * alpha;
    let tau = tau0 + alpha * alpha * bb * bb * tau_s;
    let spread = one / tau0 - one / tau;

    let allocation = x / (s2 * tau) * (x * bg + two * c * d * (one + bb * alpha));
    let volatility = c * c * d * d * (params.mu_s * params.mu_s + one / tau_s + one / tau0) / (bg * s2);
    let cross = if d == T::zero() {
        T::zero()
    } else {
        two * c * d * th * (one - tau0 / (bb * alpha * tau_s))
    };
    let diag = (th * th * bg - cross) / s2 * spread;
    let dispersion = g * alpha * alpha / params.tau_eps;
    (allocation + volatility + diag + dispersion) / two
}

/// Welfare loss `WL^delta` under a quadratic tax.
pub fn welfare_loss_tax<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    tax: &TaxSpec<T>,
    settings: &SolverSettings<T>,
) -> Result<T> {
    let eq = equilibrium(params, bias, tax, settings)?;
    Ok(wl_tax_at(params, &eq))
}

/// `dWL/dtheta` by central differences of [`welfare_loss`].
pub fn dwl_dtheta<T: Real>(params: &MarketParams<T>, theta: T, settings: &SolverSettings<T>) -> Option<T> {
    let floor = lit::<T>(-1.0 + THETA_FLOOR_GAP);
    central_difference(
        |t| welfare_loss(params, &Bias::new(t), settings).ok().map(|w| w.wl_total),
        theta,
        Some(floor),
    )
}

/// `dWL/dtheta` from the chain rule through `alpha(theta)`.
pub fn dwl_dtheta_closed<T: Real>(params: &MarketParams<T>, theta: T, settings: &SolverSettings<T>) -> Result<T> {
    let eq = equilibrium(params, &Bias::new(theta), &TaxSpec::none(), settings)?;
    let bg = params.beta + params.gamma;
    let dwl_dalpha = dwl_dalpha_untaxed(params, &eq);
    let dwl_dth = theta / bg * (T::one() / params.tau0 - T::one() / eq.tau);
    Ok(dwl_dalpha * crate::equilibrium::dalpha_dtheta(&eq, params) + dwl_dth)
}

/// Partial of the untaxed loss in `alpha`, holding `theta` fixed.
fn dwl_dalpha_untaxed<T: Real>(p: &MarketParams<T>, eq: &Equilibrium<T>) -> T {
    let (g, b) = (p.gamma, p.beta);
    let alpha = eq.alpha;
    let tau2 = eq.tau * eq.tau;
    let k = alpha * b * b * p.tau_s;
    let u = T::one() - g * alpha;
    -(u * (g * p.tau0 + k) - eq.theta * eq.theta * k) / ((b + g) * tau2) + g * alpha / p.tau_eps
}

/// Total derivative of `WL^delta` in `delta` at `delta = 0`, in closed form.
pub fn dwl_ddelta_at_zero<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    regime: Regime,
    settings: &SolverSettings<T>,
) -> Result<T> {
    let eq = equilibrium(params, bias, &TaxSpec::new(T::zero(), regime), settings)?;
    let (g, b) = (params.gamma, params.beta);
    let (tau0, tau_s) = (params.tau0, params.tau_s);
    let (al, th, tau) = (eq.alpha, eq.theta, eq.tau);
    let one = T::one();
    let two = lit::<T>(2.0);
    let bg = b + g;
    let partial_delta = match regime {
        Regime::BothSides => {
            let t1 = tau0 * tau0 * (bg * (one - al * g) + two * b * th);
            let t2 = two * al.powi(3) * b.powi(4) * th * (th + one) * tau_s * tau_s;
            let inner = (al * g - one) * bg * (al * bg - one) - two * b * th * (al * b - one) + th * th * (b - g);
            let t3 = al * b * tau0 * tau_s * inner;
            al * (t1 - t2 - t3) / (tau0 * bg * bg * tau * tau)
        }
        Regime::InformedOnly => -al * b * th * (al * b * (th + one) * tau_s - tau0) / (tau0 * bg * bg * tau),
    };
    Ok(partial_delta + dwl_dalpha_untaxed(params, &eq) * dalpha_ddelta(&eq, params, regime))
}

/// Same derivative by central differences of [`welfare_loss_tax`].
pub fn dwl_ddelta_numeric<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    regime: Regime,
    settings: &SolverSettings<T>,
) -> Option<T> {
    central_difference(
        |d| welfare_loss_tax(params, bias, &TaxSpec::new(d, regime), settings).ok(),
        T::zero(),
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::presets;

    fn s() -> SolverSettings<f64> {
        SolverSettings::default()
    }

    #[test]
    fn only_dispersion_when_cost_cancels() {
        let p = presets::fig1b();
        let alpha = 1.0 / p.gamma;
        let wl = wl_general(&p, alpha, 0.0);
        assert!((wl - p.gamma * alpha * alpha / (2.0 * p.tau_eps)).abs() < 1e-15);
    }

    #[test]
    fn bayesian_has_no_diag_term() {
        let w = welfare_loss(&presets::fig1a(), &Bias::bayesian(), &s()).unwrap();
        assert_eq!(w.wl_diag, 0.0);
        assert!((w.wl_total - w.wl_bayes).abs() <= 1e-12 * w.wl_total);
    }

    #[test]
    fn zero_tax_matches_untaxed() {
        let p = presets::fig1b();
        for th in [-0.5, 0.0, 0.7] {
            let base = welfare_loss(&p, &Bias::new(th), &s()).unwrap().wl_total;
            for r in Regime::ALL {
                let w = welfare_loss_tax(&p, &Bias::new(th), &TaxSpec::new(0.0, r), &s()).unwrap();
                assert!((w - base).abs() < 1e-12 * base);
            }
        }
    }

    #[test]
    fn closed_dtheta_matches_numeric() {
        let p = presets::fig1a();
        for th in [-0.5, 0.0, 0.3, 2.0] {
            let c = dwl_dtheta_closed(&p, th, &s()).unwrap();
            let n = dwl_dtheta(&p, th, &s()).unwrap();
            assert!((c - n).abs() < 1e-6 * c.abs().max(1e-3), "theta {th}: {c} vs {n}");
        }
    }
}
