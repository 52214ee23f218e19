use nalgebra::{DMatrix, DVector};

use super::{Injection, SolverConfig};
use crate::error::{check_dim, Error, Result};
use crate::error_models::{PROX_STREAM, PROX_X_STREAM};
use crate::linalg::cholesky;
use crate::problem::{Quadratic, SmoothFunction};
use crate::prox::{PreparedWeightedProx, ProxFunction, WeightedTarget};
use crate::trace::{IterateRecord, IterateTrace};

/// Data of `min g(x) + h(z)  s.t.  Ax + Bz = c` for the weighted-Lagrangian
/// generalized-proximal ADMM. Weights are held fixed over the run.
#[derive(Debug, Clone)]
pub struct AdmmSpec {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    /// `λ = 1/ρ`.
    pub lambda_dual: f64,
    pub l_weight: DMatrix<f64>,
    pub m_x: DMatrix<f64>,
    pub m_z: DMatrix<f64>,
    pub lambda_x: f64,
    pub lambda_z: f64,
    /// Starting `z`; zero when absent.
    pub z0: Option<DVector<f64>>,
}

impl AdmmSpec {
    /// Consensus splitting `x − z = 0` with `L = I`, `λ_x = λ_z = 1`.
    pub fn consensus(n: usize, lambda_dual: f64, m_x: DMatrix<f64>, m_z: DMatrix<f64>) -> Self {
        Self {
            a: DMatrix::identity(n, n),
            b: -DMatrix::identity(n, n),
            c: DVector::zeros(n),
            lambda_dual,
            l_weight: DMatrix::identity(n, n),
            m_x,
            m_z,
            lambda_x: 1.0,
            lambda_z: 1.0,
            z0: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let p = self.a.nrows();
        check_dim("ADMM B rows", p, self.b.nrows())?;
        check_dim("ADMM c", p, self.c.len())?;
        check_dim("ADMM L rows", p, self.l_weight.nrows())?;
        check_dim("ADMM L cols", p, self.l_weight.ncols())?;
        check_dim("ADMM M_x rows", self.a.ncols(), self.m_x.nrows())?;
        check_dim("ADMM M_x cols", self.a.ncols(), self.m_x.ncols())?;
        check_dim("ADMM M_z rows", self.b.ncols(), self.m_z.nrows())?;
        check_dim("ADMM M_z cols", self.b.ncols(), self.m_z.ncols())?;
        for (name, v) in [
            ("lambda_dual", self.lambda_dual),
            ("lambda_x", self.lambda_x),
            ("lambda_z", self.lambda_z),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be > 0, got {v}")));
            }
        }
        cholesky(&self.l_weight, "ADMM weight L")?;
        Ok(())
    }

    /// `Λ₁ = (1/λ)AᵀLA + M_x`.
    pub fn lambda1(&self) -> DMatrix<f64> {
        self.a.transpose() * &self.l_weight * &self.a / self.lambda_dual + &self.m_x
    }

    /// `Λ₂ = (1/λ)BᵀLB + M_z`.
    pub fn lambda2(&self) -> DMatrix<f64> {
        self.b.transpose() * &self.l_weight * &self.b / self.lambda_dual + &self.m_z
    }

    fn residual(&self, x: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * z - &self.c
    }
}

/// Approximate WLM-ADMM.
///
/// Each sweep takes the generalized proximal steps
/// `x⁺ = argmin (1/λ_x)g(x) + ½‖x − Λ₁⁻¹γ₁‖²_{Λ₁}` and
/// `z⁺ = argmin (1/λ_z)h(z) + ½‖z − Λ₂⁻¹γ₂‖²_{Λ₂}` with
/// `γ₁ = M_x x − (1/λ)AᵀL(Bz − c + v)` and `γ₂ = M_z z − (1/λ)BᵀL(Ax⁺ − c + v)`,
/// then `v⁺ = v + Ax⁺ + Bz⁺ − c`. Proximal errors from `config.error_x` and
/// `config.error_h` perturb the two block outputs.
///
/// The trace records `g(x) + h(z)` and `‖Ax + Bz − c‖₂`; `f_star` fills the
/// suboptimality column.
pub fn ax_wlm_admm(
    g: &Quadratic,
    h: &ProxFunction,
    spec: &AdmmSpec,
    config: &SolverConfig,
    f_star: Option<f64>,
) -> Result<IterateTrace> {
    spec.validate()?;
    h.validate()?;
    let n = spec.a.ncols();
    let m = spec.b.ncols();
    check_dim("ADMM x-block dimension", n, g.dim())?;

    let lambda1 = spec.lambda1();
    let lambda2 = spec.lambda2();
    let x_step = PreparedWeightedProx::new(&lambda1, 1.0 / spec.lambda_x, WeightedTarget::Quadratic(g))?;
    let z_step = PreparedWeightedProx::new(&lambda2, 1.0 / spec.lambda_z, WeightedTarget::Simple(h))?;

    let mut x = config.x0.clone().unwrap_or_else(|| DVector::zeros(n));
    let mut z = spec.z0.clone().unwrap_or_else(|| DVector::zeros(m));
    check_dim("ADMM x0", n, x.len())?;
    check_dim("ADMM z0", m, z.len())?;
    let mut v = DVector::zeros(spec.c.len());

    let mut x_errors = Injection::new(None, config.error_x.as_ref(), PROX_X_STREAM)?;
    let mut z_errors = Injection::new(None, config.error_h.as_ref(), PROX_STREAM)?;

    // AᵀL/λ and BᵀL/λ are fixed.
    let at_l = spec.a.transpose() * &spec.l_weight / spec.lambda_dual;
    let bt_l = spec.b.transpose() * &spec.l_weight / spec.lambda_dual;

    let make_record = |k: usize, x: &DVector<f64>, z: &DVector<f64>, eps: f64, r: f64| {
        let f_value = g.value(x) + h.value(z);
        IterateRecord {
            k,
            f_value,
            suboptimality: f_star.map(|fs| f_value - fs),
            grad_error_inf_norm: 0.0,
            prox_error_eps: eps,
            prox_residual_norm: r,
            constraint_residual: Some(spec.residual(x, z).norm()),
        }
    };

    let mut records = Vec::with_capacity(config.max_iter + 1);
    records.push(make_record(0, &x, &z, 0.0, 0.0));

    for k in 0..config.max_iter {
        let gamma1 = &spec.m_x * &x - &at_l * (&spec.b * &z - &spec.c + &v);
        let mut x_next = x_step.apply(&gamma1)?;
        x_errors.perturb_prox(&mut x_next, |d| spec.lambda_x * d.dot(&(&lambda1 * d)));

        let gamma2 = &spec.m_z * &z - &bt_l * (&spec.a * &x_next - &spec.c + &v);
        let mut z_next = z_step.apply(&gamma2)?;
        let (eps, r_norm) = z_errors.perturb_prox(&mut z_next, |d| spec.lambda_z * d.dot(&(&lambda2 * d)));

        v += spec.residual(&x_next, &z_next);
        x = x_next;
        z = z_next;
        if x.iter().chain(z.iter()).any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("ADMM iterate"));
        }
        records.push(make_record(k + 1, &x, &z, eps, r_norm));
    }

    Ok(IterateTrace {
        records,
        seed: config.seed(),
        config: config.clone(),
        final_x: x,
        final_z: Some(z),
        max_grad_inf_norm: 0.0,
    })
}
