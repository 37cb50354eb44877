//! Linear equilibrium of the diagnostic-expectations market.
//!
//! Every trader demands `D_i = alpha s_i + eta E(V|p) - eta_p p` and the
//! price is `p = A + B V - C S`. The base loading `a` solves
//!
//! ```text
//! g a = tau_eps / (tau_eps + tau0 + a^2 (theta+1)^2 b^2 tau_s)
//! ```
//!
//! with `g` the traders' effective cost curvature and `b` the effective
//! supply slope (see [`TaxSpec::cost`] and [`TaxSpec::slope`]).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate, Bias, MarketParams, Regime, SolverSettings, TaxSpec};
use crate::numeric::newton_bisect;
use crate::scalar::{lit, to_f64, Real};

/// Distance from `theta = -1` below which pricing is treated as degenerate.
pub const THETA_FLOOR_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium<T = f64> {
    pub theta: T,
    pub delta: T,
    pub regime: Regime,
    /// Effective curvature `g`.
    pub cost: T,
    /// Effective supply slope `b`.
    pub slope: T,
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
    pub kappa: T,
    pub tau0: T,
    pub tau_s: T,
}

/// Trader demand as an affine function of signal and price:
/// `D = signal * s + price * p + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemandSchedule<T = f64> {
    pub signal: T,
    pub price: T,
    pub intercept: T,
}

impl<T: Real> DemandSchedule<T> {
    #[inline]
    pub fn eval(&self, s: T, p: T) -> T {
        self.signal * s + self.price * p + self.intercept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceStats<T = f64> {
    pub var_p: T,
    /// Precision of the price as a signal of `V`, `B^2/C^2 * tau_s`.
    pub price_precision: T,
}

fn check_inputs<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    tax: &TaxSpec<T>,
    settings: &SolverSettings<T>,
) -> Result<()> {
    validate(params, bias, tax).into_result()?;
    settings.check()?;
    if bias.theta <= lit::<T>(-1.0 + THETA_FLOOR_GAP) {
        return Err(Error::DegeneratePricing { theta: to_f64(bias.theta) });
    }
    Ok(())
}

/// Residual `g a - tau_eps / (tau_eps + tau(a))` and its derivative in `a`.
fn loading_residual<T: Real>(a: T, g: T, k: T, tau0: T, tau_eps: T) -> (T, T) {
    // k = (theta+1)^2 b^2 tau_s
    let den = tau_eps + tau0 + a * a * k;
    let r = g * a - tau_eps / den;
    let dr = g + tau_eps * lit::<T>(2.0) * a * k / (den * den);
    (r, dr)
}

/// Base loading `a`: the unique positive root of the loading fixed point.
pub fn solve_loading<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    tax: &TaxSpec<T>,
    settings: &SolverSettings<T>,
) -> Result<T> {
    check_inputs(params, bias, tax, settings)?;
    let g = tax.cost(params);
    let b = tax.slope(params);
    let th1 = bias.theta + T::one();
    let k = th1 * th1 * b * b * params.tau_s;
    let (tau0, tau_eps) = (params.tau0, params.tau_eps);
    let hi = (T::one() / g).min(tau_eps / (g * tau0));
    newton_bisect(|a| loading_residual(a, g, k, tau0, tau_eps), T::zero(), hi, settings)
}

/// Full linear equilibrium for the given bias and tax.
pub fn equilibrium<T: Real>(
    params: &MarketParams<T>,
    bias: &Bias<T>,
    tax: &TaxSpec<T>,
    settings: &SolverSettings<T>,
) -> Result<Equilibrium<T>> {
    let a = solve_loading(params, bias, tax, settings)?;
    Ok(assemble(params, bias.theta, tax, a))
}

/// Builds the equilibrium around a given base loading (no solve).
pub(crate) fn assemble<T: Real>(params: &MarketParams<T>, theta: T, tax: &TaxSpec<T>, a: T) -> Equilibrium<T> {
    let g = tax.cost(params);
    let b = tax.slope(params);
    let th1 = theta + T::one();
    let alpha = a * th1;
    let tau = params.tau0 + alpha * alpha * b * b * params.tau_s;
    let kappa = (tau - params.tau0) / tau;
    // g alpha + g eta kappa: weight of V in aggregate demand per unit of g
    let weight = th1 * (g * a + (T::one() - g * a) * kappa);
    Equilibrium {
        theta,
        delta: tax.delta,
        regime: tax.regime,
        cost: g,
        slope: b,
        a,
        alpha,
        eta: th1 / g - alpha,
        eta_p: T::one() / g,
        tau,
        price_a: -(g * params.mu_s) / (g + b) + T::zero(),  // + 0 drops the sign of -0
        price_b: b * weight / (g + b),
        price_c: weight / (alpha * (g + b)),
        kappa,
        tau0: params.tau0,
        tau_s: params.tau_s,
    }
}

/// Pricing coefficients `(A, B, C)` obtained when the public loading `eta`
/// is applied to the raw price signal `(p - A)/B` instead of to `E(V|p)`:
/// `B = b(theta+1)/(g+b)`, `C = 1/(a(g+b))`.
///
/// They share `A` and the ratio `B/C = alpha b` with the market-clearing
/// coefficients, but the price they describe does not clear the market when
/// traders condition on `E(V|p)`. Kept for comparison only.
pub fn raw_signal_pricing<T: Real>(eq: &Equilibrium<T>) -> (T, T, T) {
    let (g, b) = (eq.cost, eq.slope);
    let th1 = eq.theta + T::one();
    (eq.price_a, b * th1 / (g + b), T::one() / (eq.a * (g + b)))
}

impl<T: Real> Equilibrium<T> {
    /// Demand coefficients after substituting `E(V|p) = kappa (p - A) / B`.
    pub fn schedule(&self) -> Result<DemandSchedule<T>> {
        if self.price_b == T::zero() {
            return Err(Error::DegeneratePricing { theta: to_f64(self.theta) });
        }
        let m = self.eta * self.kappa / self.price_b;
        Ok(DemandSchedule {
            signal: self.alpha,
            price: m - self.eta_p,
            intercept: -m * self.price_a,
        })
    }

    /// `E(V|p)` under the equilibrium pricing rule.
    pub fn public_mean(&self, p: T) -> T {
        self.kappa * (p - self.price_a) / self.price_b
    }
}

/// Trade of a trader with signal `s_i` at price `p`.
pub fn demand<T: Real>(eq: &Equilibrium<T>, s_i: T, p: T) -> Result<T> {
    Ok(eq.schedule()?.eval(s_i, p))
}

pub fn price_stats<T: Real>(eq: &Equilibrium<T>) -> PriceStats<T> {
    let b2 = eq.price_b * eq.price_b;
    let c2 = eq.price_c * eq.price_c;
    PriceStats {
        var_p: b2 / eq.tau0 + c2 / eq.tau_s,
        price_precision: eq.alpha * eq.alpha * eq.slope * eq.slope * eq.tau_s,
    }
}

/// `d alpha / d theta` by implicit differentiation of the fixed point.
pub fn dalpha_dtheta<T: Real>(eq: &Equilibrium<T>, params: &MarketParams<T>) -> T {
    let x = eq.tau - params.tau0;
    let two = lit::<T>(2.0);
    eq.a - two * eq.a * x / (params.tau_eps + params.tau0 + lit::<T>(3.0) * x)
}

/// `d alpha / d delta` at the equilibrium's tax rate.
pub fn dalpha_ddelta<T: Real>(eq: &Equilibrium<T>, params: &MarketParams<T>, regime: Regime) -> T {
    let (g, alpha) = (eq.cost, eq.alpha);
    let (tau0, tau_eps, tau_s) = (params.tau0, params.tau_eps, params.tau_s);
    let a2 = alpha * alpha;
    let three = lit::<T>(3.0);
    match regime {
        Regime::BothSides => {
            let b = params.beta + eq.delta;
            -alpha * (a2 * b * tau_s * (b + lit::<T>(2.0) * g) + tau0 + tau_eps)
                / (g * (three * a2 * b * b * tau_s + tau0 + tau_eps))
        }
        Regime::InformedOnly => {
            let b = params.beta;
            let x = a2 * b * b * tau_s;
            -alpha * (x + tau0 + tau_eps) / (g * (three * x + tau0 + tau_eps))
        }
    }
}
