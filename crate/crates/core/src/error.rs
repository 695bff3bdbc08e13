//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("weight {weight} at index {index} is negative")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("weights sum to {sum}, expected 1 within 1e-12")]
    WeightsNotNormalized { sum: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("measure must carry at least one atom")]
    EmptyMeasure,

    #[error("family must carry at least one extreme measure")]
    EmptyFamily,

    #[error("scale factor {value} must be positive")]
    NonPositiveScale { value: String },

    #[error("invalid penalty: {reason}")]
    PenaltyInvalid { reason: String },

    #[error("family is not centered: extreme {measure} has x-mean {mean:e} in component {component}")]
    CenteringViolated {
        measure: usize,
        component: usize,
        mean: f64,
    },

    #[error("lattice overflow at level {level}: {nodes} nodes exceed cap {cap}")]
    LatticeOverflow { level: u32, nodes: usize, cap: usize },

    #[error("generator sequence does not converge: consecutive gaps {prev_gap:e} -> {last_gap:e}")]
    NonConvergent { prev_gap: f64, last_gap: f64 },

    #[error("time step {tau:e} violates the monotonicity (CFL) bound {max_tau:e}")]
    CflViolation { tau: f64, max_tau: f64 },

    #[error("domain too small in {axis}: extent {actual} below required influence margin {required}")]
    BoundaryInfluence {
        axis: char,
        actual: f64,
        required: f64,
    },

    #[error("payoff must carry a finite sup-norm bound here (got {bound})")]
    PayoffUnbounded { bound: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
