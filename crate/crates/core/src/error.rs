use thiserror::Error;

use crate::model::ValidationReport;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid inputs: {0}")]
    Invalid(ValidationReport),

    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("pricing is degenerate at theta = {theta}: price carries no information (B = 0)")]
    DegeneratePricing { theta: f64 },

    #[error("team fixed point has {} roots on the scan range: {roots:?}", roots.len())]
    MultipleRoots { roots: Vec<f64> },

    #[error("team fixed point has no sign change on (0, {upper}]")]
    NoRoot { upper: f64 },

    #[error("function does not change sign on [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("required tax lies below the feasibility bound {bound} (loading at the bound {alpha_at_bound} < target {target})")]
    Infeasible {
        bound: f64,
        alpha_at_bound: f64,
        target: f64,
    },

    #[error("market clearing coefficient on the price vanishes")]
    DegenerateClearing,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
