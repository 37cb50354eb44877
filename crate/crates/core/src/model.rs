//! Parameter containers, validation and shared numeric settings.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, to_f64, Real};

/// The exogenous economy.
///
/// Informed traders face transaction-cost curvature `gamma`; liquidity
/// suppliers trade along `p = -mu_s - S + beta * D`. The fundamental is
/// `V ~ N(0, 1/tau0)`, private signals are `s_i = V + e_i` with
/// `e_i ~ N(0, 1/tau_eps)` and supply noise is `S ~ N(0, 1/tau_s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams<T = f64> {
    pub gamma: T,
    pub beta: T,
    pub tau0: T,
    pub tau_eps: T,
    pub tau_s: T,
    pub mu_s: T,
}

impl<T: Real> MarketParams<T> {
    pub fn new(gamma: T, beta: T, tau0: T, tau_eps: T, tau_s: T, mu_s: T) -> Self {
        Self {
            gamma,
            beta,
            tau0,
            tau_eps,
            tau_s,
            mu_s,
        }
    }

    /// Converts the parameter set into another float type.
    pub fn cast<U: Real>(&self) -> MarketParams<U> {
        MarketParams {
            gamma: lit(to_f64(self.gamma)),
            beta: lit(to_f64(self.beta)),
            tau0: lit(to_f64(self.tau0)),
            tau_eps: lit(to_f64(self.tau_eps)),
            tau_s: lit(to_f64(self.tau_s)),
            mu_s: lit(to_f64(self.mu_s)),
        }
    }

    pub fn with_beta(mut self, beta: T) -> Self {
        self.beta = beta;
        self
    }
}

/// Strength of the diagnostic distortion. `theta > 0` overreacts,
/// `theta < 0` underreacts, `theta = 0` is Bayesian.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Bias<T = f64> {
    pub theta: T,
}

impl<T: Real> Bias<T> {
    pub fn new(theta: T) -> Self {
        Self { theta }
    }

    pub fn bayesian() -> Self {
        Self { theta: T::zero() }
    }
}

/// Who pays the quadratic transaction tax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Informed traders and liquidity suppliers; the supply slope becomes `beta + delta`.
    #[default]
    BothSides,
    /// Informed traders only; the supply slope stays `beta`.
    InformedOnly,
}

impl Regime {
    pub const ALL: [Regime; 2] = [Regime::BothSides, Regime::InformedOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::BothSides => "both",
            Regime::InformedOnly => "informed",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "both" | "both_sides" => Ok(Regime::BothSides),
            "informed" | "informed_only" => Ok(Regime::InformedOnly),
            other => Err(format!("unknown regime {other:?} (expected both|informed)")),
        }
    }
}

/// Quadratic tax `delta/2 * D^2` per trader (negative is a subsidy),
/// rebated lump-sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TaxSpec<T = f64> {
    pub delta: T,
    pub regime: Regime,
}

impl<T: Real> TaxSpec<T> {
    pub fn new(delta: T, regime: Regime) -> Self {
        Self { delta, regime }
    }

    pub fn none() -> Self {
        Self {
            delta: T::zero(),
            regime: Regime::BothSides,
        }
    }

    /// Effective curvature faced by informed traders.
    pub fn cost(&self, params: &MarketParams<T>) -> T {
        params.gamma + self.delta
    }

    /// Effective supply slope.
    pub fn slope(&self, params: &MarketParams<T>) -> T {
        match self.regime {
            Regime::BothSides => params.beta + self.delta,
            Regime::InformedOnly => params.beta,
        }
    }

    /// Smallest admissible tax rate (exclusive) for this regime.
    pub fn lower_bound(regime: Regime, params: &MarketParams<T>) -> T {
        match regime {
            Regime::BothSides => (-params.gamma).max(-params.beta),
            Regime::InformedOnly => -params.gamma,
        }
    }
}

/// Tolerances and grid sizes used by the root finders and optimizers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings<T = f64> {
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_iter: usize,
    pub scan_points: usize,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        // 1e-12 / 1e-10 in f64; scaled up to what f32 can actually resolve.
        let eps = T::epsilon();
        Self {
            abs_tol: lit::<T>(1e-12).max(eps * lit(4.0)),
            rel_tol: lit::<T>(1e-10).max(eps * lit(256.0)),
            max_iter: 200,
            scan_points: 2048,
        }
    }
}

impl<T: Real> SolverSettings<T> {
    pub fn check(&self) -> Result<()> {
        let mut report = ValidationReport::default();
        if !(self.abs_tol > T::zero()) {
            report.push(Violation::Setting("abs_tol must be positive"));
        }
        if !(self.rel_tol > T::zero()) {
            report.push(Violation::Setting("rel_tol must be positive"));
        }
        if self.max_iter < 1 {
            report.push(Violation::Setting("max_iter must be at least 1"));
        }
        if self.scan_points < 16 {
            report.push(Violation::Setting("scan_points must be at least 16"));
        }
        report.into_result()
    }
}

/// One violated input constraint.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonFinite { field: &'static str, value: f64 },
    NonPositive { field: &'static str, value: f64 },
    ThetaAtOrBelowMinusOne { theta: f64 },
    DeltaBelowMinusGamma { delta: f64, gamma: f64 },
    DeltaBelowMinusBeta { delta: f64, beta: f64 },
    Setting(&'static str),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { field, value } => write!(f, "{field} must be finite (got {value})"),
            Violation::NonPositive { field, value } => {
                write!(f, "{field} must be strictly positive (got {value})")
            }
            Violation::ThetaAtOrBelowMinusOne { theta } => {
                write!(f, "theta must exceed -1 (got {theta})")
            }
            Violation::DeltaBelowMinusGamma { delta, gamma } => {
                write!(f, "delta must exceed -gamma (got delta {delta}, gamma {gamma})")
            }
            Violation::DeltaBelowMinusBeta { delta, beta } => {
                write!(f, "delta must exceed -beta (got delta {delta}, beta {beta})")
            }
            Violation::Setting(msg) => f.write_str(msg),
        }
    }
}

/// Outcome of [`validate`]: empty when every invariant holds.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Invalid(self))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl Serialize for ValidationReport {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let msgs: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        msgs.serialize(s)
    }
}

/// Checks every domain restriction on the inputs. Pure; never fails.
pub fn validate<T: Real>(params: &MarketParams<T>, bias: &Bias<T>, tax: &TaxSpec<T>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let positive = [
        ("gamma", params.gamma),
        ("beta", params.beta),
        ("tau0", params.tau0),
        ("tau_eps", params.tau_eps),
        ("tau_s", params.tau_s),
    ];
    for (field, value) in positive {
        if !value.is_finite() {
            report.push(Violation::NonFinite { field, value: to_f64(value) });
        } else if value <= T::zero() {
            report.push(Violation::NonPositive { field, value: to_f64(value) });
        }
    }
    for (field, value) in [("mu_s", params.mu_s), ("theta", bias.theta), ("delta", tax.delta)] {
        if !value.is_finite() {
            report.push(Violation::NonFinite { field, value: to_f64(value) });
        }
    }
    if bias.theta.is_finite() && bias.theta <= -T::one() {
        report.push(Violation::ThetaAtOrBelowMinusOne { theta: to_f64(bias.theta) });
    }
    if tax.delta.is_finite() && params.gamma.is_finite() && tax.delta <= -params.gamma {
        report.push(Violation::DeltaBelowMinusGamma {
            delta: to_f64(tax.delta),
            gamma: to_f64(params.gamma),
        });
    }
    if tax.regime == Regime::BothSides && tax.delta.is_finite() && params.beta.is_finite() && tax.delta <= -params.beta {
        report.push(Violation::DeltaBelowMinusBeta {
            delta: to_f64(tax.delta),
            beta: to_f64(params.beta),
        });
    }
    report
}

/// Parameter sets used by the figures.
pub mod presets {
    use super::MarketParams;

    /// Learning externality dominates (`a* < a^T`).
    pub fn fig1a() -> MarketParams<f64> {
        MarketParams::new(3.0, 0.1, 0.01, 0.01, 50.0, 0.0)
    }

    /// Pecuniary externality dominates (`a* > a^T`).
    pub fn fig1b() -> MarketParams<f64> {
        MarketParams::new(3.0, 2.0, 1.0, 5.0, 1.0, 0.0)
    }

    /// Base economy for the balanced case; `beta` is found by
    /// [`crate::benchmark::balanced_beta`] on `[0.1, 0.5]`.
    pub fn balanced_base() -> MarketParams<f64> {
        MarketParams::new(3.0, 0.3, 0.1, 1.0, 10.0, 0.0)
    }
}
