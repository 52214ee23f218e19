use nalgebra::DVector;

use crate::solvers::SolverConfig;

/// One row of a solver trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub f_value: f64,
    /// `f_value − f★`, absent when the problem carries no reference optimum.
    pub suboptimality: Option<f64>,
    /// `‖ε_g‖∞` of the gradient error injected to produce this iterate.
    pub grad_error_inf_norm: f64,
    /// Proximal error `ε_h` drawn for this iterate.
    pub prox_error_eps: f64,
    /// `‖r‖₂` of the residual actually added to the prox output.
    pub prox_residual_norm: f64,
    /// `‖Ax + Bz − c‖₂` for splitting methods.
    pub constraint_residual: Option<f64>,
}

/// Full trajectory of one solver run. Record `k = 0` is the starting point.
#[derive(Debug, Clone)]
pub struct IterateTrace {
    pub records: Vec<IterateRecord>,
    pub seed: Option<u64>,
    pub config: SolverConfig,
    pub final_x: DVector<f64>,
    pub final_z: Option<DVector<f64>>,
    /// `sup ‖∇g(xⁱ)‖∞` over the evaluated gradients.
    pub max_grad_inf_norm: f64,
}

impl IterateTrace {
    pub fn f_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f_value).collect()
    }

    pub fn suboptimality(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.suboptimality).collect()
    }

    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }
}
