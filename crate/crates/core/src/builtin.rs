//! Ready-made problem instances for tests, examples and the CLI.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::mpc::{example_spacecraft, MpcSpec, Weight};
use crate::problem::{CompositeProblem, Quadratic};
use crate::prox::ProxFunction;

/// Parts of the random LASSO `½‖Ax − b‖² + λ‖x‖₁` with standard normal
/// `A` (`m×n`) and `b`.
pub fn random_lasso_parts(m: usize, n: usize, lambda: f64, seed: u64) -> Result<(Quadratic, ProxFunction)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
    let b = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
    Ok((Quadratic::least_squares(&a, &b)?, ProxFunction::L1 { weight: lambda }))
}

pub fn random_lasso(m: usize, n: usize, lambda: f64, seed: u64) -> Result<CompositeProblem> {
    let (g, h) = random_lasso_parts(m, n, lambda, seed)?;
    CompositeProblem::from_quadratic(g, h)
}

pub const TEST_LASSO_ROWS: usize = 30;
pub const TEST_LASSO_DIM: usize = 20;
pub const TEST_LASSO_LAMBDA: f64 = 1.0;

/// The built-in test problem: a 30×20 random LASSO with `λ = 1`.
pub fn test_lasso(seed: u64) -> Result<CompositeProblem> {
    random_lasso(TEST_LASSO_ROWS, TEST_LASSO_DIM, TEST_LASSO_LAMBDA, seed)
}

pub fn test_lasso_parts(seed: u64) -> Result<(Quadratic, ProxFunction)> {
    random_lasso_parts(TEST_LASSO_ROWS, TEST_LASSO_DIM, TEST_LASSO_LAMBDA, seed)
}

pub const EXAMPLE_SAMPLING_PERIOD: f64 = 0.5;
pub const EXAMPLE_NP: usize = 20;
pub const EXAMPLE_NC: usize = 4;
pub const EXAMPLE_Q_WEIGHT: f64 = 1.0;
pub const EXAMPLE_R_WEIGHT: f64 = 0.01;
pub const EXAMPLE_LAMBDA_L1: f64 = 0.01;

/// One MPC step on the shipped spacecraft model: move the attitude from
/// rest at the origin to a small roll/pitch/yaw setpoint.
pub fn example_mpc_spec() -> Result<MpcSpec> {
    let ss = example_spacecraft(EXAMPLE_SAMPLING_PERIOD)?;
    MpcSpec::with_weights(
        ss,
        EXAMPLE_NP,
        EXAMPLE_NC,
        &Weight::Scalar(EXAMPLE_Q_WEIGHT),
        &Weight::Scalar(EXAMPLE_R_WEIGHT),
        EXAMPLE_LAMBDA_L1,
        DVector::from_vec(vec![0.1, -0.05, 0.2]),
        DVector::zeros(10),
    )
}
