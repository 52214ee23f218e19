//! Approximate proximal methods with injected, statistically modelled
//! computation errors, together with closed-form probabilistic bounds on
//! their suboptimality and a model-predictive-control problem builder.

pub mod bounds;
pub mod builtin;
pub mod error;
pub mod error_models;
pub mod io;
pub mod linalg;
pub mod mpc;
pub mod problem;
pub mod prox;
pub mod solvers;
pub mod trace;

pub use bounds::{
    admm_bounds, axapgd_bounds, axpgd_bounds, bernstein_tail, floor_is_vacuous, prior_bounds,
    probability_floor, AdmmBoundParams, BoundParams, BoundValues, PriorBound, Regime, RegimeBounds,
    RegimeThresholds,
};
pub use error::{Error, Result};
pub use error_models::{
    sample_gradient_error, sample_prox_error, validate_data_independence, validate_error_stream,
    ErrorStream, GradientErrorMode, GradientErrorModel, ProxErrorModel, StreamExpectation,
    ValidationReport,
};
pub use mpc::{build_lasso, condense, MpcProblem, MpcSpec, StateSpace, Weight};
pub use problem::{eval_objective, CompositeProblem, Quadratic, Reference, SmoothFunction};
pub use prox::ProxFunction;
pub use solvers::admm::{ax_wlm_admm, AdmmSpec};
pub use solvers::{ax_apgd, ax_pgd, reference_optimum, Momentum, SolverConfig};
pub use trace::{IterateRecord, IterateTrace};
