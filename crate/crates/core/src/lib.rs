//! Closed-form equilibrium, welfare and policy analysis for a noisy
//! rational-expectations market whose informed traders hold diagnostic
//! (over- or under-reacting) expectations, with a finite-agent Monte Carlo
//! oracle for every closed form.
//!
//! The analytic layer is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the bottom of this file fix it to `f64`.

pub mod benchmark;
pub mod equilibrium;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod numeric;
pub mod oracle;
pub mod policy;
pub mod scalar;
pub mod welfare;

pub use equilibrium::{
    dalpha_ddelta, dalpha_dtheta, demand, equilibrium, price_stats, raw_signal_pricing, solve_loading, DemandSchedule, Equilibrium,
    PriceStats,
};
pub use error::{Error, Result};
pub use model::{presets, validate, Bias, MarketParams, Regime, SolverSettings, TaxSpec, ValidationReport, Violation};
pub use scalar::Real;
pub use benchmark::{
    balanced_beta, externality_balance, first_best_demand, team_loading, Balance, BenchmarkReport,
};
pub use welfare::{
    dwl_ddelta_at_zero, dwl_ddelta_numeric, dwl_dtheta, dwl_dtheta_closed, welfare_loss, welfare_loss_tax,
    wl_general, WelfareBreakdown,
};
pub use policy::{
    linspace, optimal_tax, optimal_theta, policy_report, sweep, threshold_delta_star, threshold_theta_private,
    threshold_theta_public, Axis, PolicyReport, SweepRow, SweepTable, TaxOptimum, ThetaOptimum, SWEEP_COLUMNS,
};
pub use montecarlo::{
    mc_posterior_check, mc_price_regression, mc_price_variance, mc_welfare_loss, simulate_market, Estimate,
    SimConfig, SimRecord, SimResult, SimSummary,
};
pub use oracle::{oracle_draws, run_suite, Check, Fault, OracleDraw, SuiteConfig, SuiteReport, SuiteRun};

pub type MarketParamsF64 = MarketParams<f64>;
pub type BiasF64 = Bias<f64>;
pub type TaxSpecF64 = TaxSpec<f64>;
pub type SolverSettingsF64 = SolverSettings<f64>;
pub type EquilibriumF64 = Equilibrium<f64>;
pub type WelfareBreakdownF64 = WelfareBreakdown<f64>;

pub type MarketParamsF32 = MarketParams<f32>;
pub type BiasF32 = Bias<f32>;
pub type TaxSpecF32 = TaxSpec<f32>;
pub type SolverSettingsF32 = SolverSettings<f32>;
pub type EquilibriumF32 = Equilibrium<f32>;
pub type WelfareBreakdownF32 = WelfareBreakdown<f32>;
