//! Numerical models for limit theorems under nonlinear expectations.
//!
//! The library works with finitely supported ambiguity sets: a weakly compact
//! convex set of probability measures is represented as the convex hull of a
//! small list of extreme measures with exact rational atom coordinates.  On
//! top of that it provides
//!
//! * one-step sublinear, convex (penalized), and inf-sup nonlinear
//!   expectations ([`expectation`]),
//! * exact n-step nested expectations of normalized partial sums by backward
//!   induction on a recombining lattice ([`lattice`]),
//! * the limit generator `G(A, p)` in closed form and as a numeric limit
//!   ([`generator`]),
//! * a monotone explicit finite-difference solver for the limiting parabolic
//!   equation `du/dt = G(D2x u, Dy u)` ([`pde`]),
//! * declarative model files describing a complete expectation spec
//!   ([`model`]).
//!
//! All values are immutable after construction and every operation is a pure
//! function, so concurrent evaluation needs no synchronization.  Results are
//! deterministic: atom summation, candidate enumeration, and grid iteration
//! all use fixed orders.

pub mod error;
pub mod expectation;
pub mod generator;
pub mod lattice;
pub mod measure;
pub mod model;
pub mod payoff;
pub mod pde;
pub mod penalty;
pub mod rational;
pub mod spec;

pub use error::{Error, Result};
pub use expectation::{
    check_domination, convex_expect, mean_certainty_shift_check, nonlinear_expect, one_step_value,
    sublinear_expect,
};
pub use generator::{
    generator_closed_form, generator_limit, homogeneity_check, lipschitz_bounds, GeneratorEval,
    GeneratorLimit,
};
pub use lattice::{
    independence_product_check, nested_expect, quadratic_identity_check,
    truncation_estimate_check, uniform_integrability_profile, NestedRun,
};
pub use measure::{Atom, DiscreteMeasure, MeasureFamily, SymMat};
pub use payoff::Payoff;
pub use pde::{cfl_suggest, evaluate_origin, pde_solve, richardson_refine, AxisSpec, PDEField, PDEGrid};
pub use penalty::{AffinePiece, ConvexPenalty, PenaltySpec};
pub use rational::Rat;
pub use spec::{ExpectationSpec, PenaltyScaling, XScalingRule, YScalingRule};
