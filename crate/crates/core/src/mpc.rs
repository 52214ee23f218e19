//! Condensed model-predictive control: zero-order-hold discretization,
//! incremental state augmentation, prediction matrices and the resulting
//! LASSO problem in the stacked input increments `ΔU`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::io::parse_matrix;
use crate::linalg::{all_finite, cholesky, max_eigenvalue, symmetrize};
use crate::problem::{CompositeProblem, Quadratic};
use crate::prox::ProxFunction;

/// Continuous-time model `ẋ = Ax + Bu`, `y = Cx + Du` sampled every `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Kept for completeness; the condensed problem does not use it.
    pub d: DMatrix<f64>,
    pub h: f64,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>, h: f64) -> Result<Self> {
        let ss = Self { a, b, c, d, h };
        ss.validate()?;
        Ok(ss)
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        check_dim("state matrix columns", n, self.a.ncols())?;
        check_dim("input matrix rows", n, self.b.nrows())?;
        check_dim("output matrix columns", n, self.c.ncols())?;
        check_dim("feedthrough rows", self.c.nrows(), self.d.nrows())?;
        check_dim("feedthrough columns", self.b.ncols(), self.d.ncols())?;
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::config(format!("sampling period must be > 0, got {}", self.h)));
        }
        for m in [&self.a, &self.b, &self.c, &self.d] {
            if !all_finite(m) {
                return Err(Error::NonFinite("state-space matrices"));
            }
        }
        Ok(())
    }
}

/// `A_d = e^{Ah}`, `B_d = ∫₀ʰ e^{At}B dt`, read off the exponential of
/// `[[A, B], [0, 0]]·h`.
pub fn zoh_discretize(ss: &StateSpace) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    ss.validate()?;
    let n = ss.states();
    let m = ss.inputs();
    let mut block = DMatrix::zeros(n + m, n + m);
    block.view_mut((0, 0), (n, n)).copy_from(&(&ss.a * ss.h));
    block.view_mut((0, n), (n, m)).copy_from(&(&ss.b * ss.h));
    let e = block.exp();
    if !all_finite(&e) {
        return Err(Error::NonFinite("matrix exponential"));
    }
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()))
}

/// Incremental form with state `[Δx; y]`:
/// `A_a = [[A_d, 0], [C·A_d, I]]`, `B_a = [B_d; C·B_d]`, `C_a = [0, I]`.
pub fn augment(
    a_d: &DMatrix<f64>,
    b_d: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let n = a_d.nrows();
    check_dim("discrete state matrix columns", n, a_d.ncols())?;
    check_dim("discrete input matrix rows", n, b_d.nrows())?;
    check_dim("output matrix columns", n, c.ncols())?;
    let q = c.nrows();
    let m = b_d.ncols();

    let mut a_a = DMatrix::zeros(n + q, n + q);
    a_a.view_mut((0, 0), (n, n)).copy_from(a_d);
    a_a.view_mut((n, 0), (q, n)).copy_from(&(c * a_d));
    a_a.view_mut((n, n), (q, q)).fill_with_identity();

    let mut b_a = DMatrix::zeros(n + q, m);
    b_a.view_mut((0, 0), (n, m)).copy_from(b_d);
    b_a.view_mut((n, 0), (q, m)).copy_from(&(c * b_d));

    let mut c_a = DMatrix::zeros(q, n + q);
    c_a.view_mut((0, n), (q, q)).fill_with_identity();
    Ok((a_a, b_a, c_a))
}

/// `F_a` stacks `C_a·A_aⁱ` for `i = 1..Np`; `Φ_a` is block lower-Toeplitz
/// with block `(i, j) = C_a·A_a^{i−j}·B_a` for `i ≥ j` and `Nc` block columns.
pub fn prediction_matrices(
    a_a: &DMatrix<f64>,
    b_a: &DMatrix<f64>,
    c_a: &DMatrix<f64>,
    np: usize,
    nc: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let na = a_a.nrows();
    check_dim("augmented state matrix columns", na, a_a.ncols())?;
    check_dim("augmented input matrix rows", na, b_a.nrows())?;
    check_dim("augmented output matrix columns", na, c_a.ncols())?;
    if np == 0 || nc == 0 || nc > np {
        return Err(Error::config(format!(
            "horizons must satisfy 1 <= Nc <= Np, got Np={np}, Nc={nc}"
        )));
    }
    let q = c_a.nrows();
    let m = b_a.ncols();

    // markov[i] = C_a·A_aⁱ·B_a for i = 0..Np-1
    let mut f_a = DMatrix::zeros(q * np, na);
    let mut markov = Vec::with_capacity(np);
    let mut c_pow = c_a.clone();
    for i in 0..np {
        markov.push(&c_pow * b_a);
        c_pow = &c_pow * a_a;
        f_a.view_mut((i * q, 0), (q, na)).copy_from(&c_pow);
    }

    let mut phi = DMatrix::zeros(q * np, m * nc);
    for i in 0..np {
        for j in 0..nc.min(i + 1) {
            phi.view_mut((i * q, j * m), (q, m)).copy_from(&markov[i - j]);
        }
    }
    Ok((f_a, phi))
}

/// Weights of the MPC cost, either full matrices or scalar multiples of
/// the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Weight {
    Scalar(f64),
    Matrix(Vec<Vec<f64>>),
}

impl Weight {
    fn to_matrix(&self, dim: usize, what: &'static str) -> Result<DMatrix<f64>> {
        match self {
            Weight::Scalar(w) => Ok(DMatrix::identity(dim, dim) * *w),
            Weight::Matrix(rows) => {
                check_dim(what, dim, rows.len())?;
                let mut m = DMatrix::zeros(dim, dim);
                for (i, row) in rows.iter().enumerate() {
                    check_dim(what, dim, row.len())?;
                    for (j, v) in row.iter().enumerate() {
                        m[(i, j)] = *v;
                    }
                }
                Ok(m)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSpec {
    pub ss: StateSpace,
    pub np: usize,
    pub nc: usize,
    /// Output weight, `(q·Np)×(q·Np)`.
    pub q: DMatrix<f64>,
    /// Input weight, `(m·Nc)×(m·Nc)`.
    pub r: DMatrix<f64>,
    pub lambda_l1: f64,
    /// Setpoint over the horizon, length `q·Np` (or `q`, tiled).
    pub rs: DVector<f64>,
    /// Augmented state `[Δx; y]`.
    pub x_current: DVector<f64>,
}

impl MpcSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn with_weights(
        ss: StateSpace,
        np: usize,
        nc: usize,
        q: &Weight,
        r: &Weight,
        lambda_l1: f64,
        rs: DVector<f64>,
        x_current: DVector<f64>,
    ) -> Result<Self> {
        let q = q.to_matrix(ss.outputs() * np, "output weight")?;
        let r = r.to_matrix(ss.inputs() * nc, "input weight")?;
        Ok(Self {
            ss,
            np,
            nc,
            q,
            r,
            lambda_l1,
            rs,
            x_current,
        })
    }

    fn setpoint(&self) -> Result<DVector<f64>> {
        let q = self.ss.outputs();
        if self.rs.len() == q * self.np {
            Ok(self.rs.clone())
        } else if self.rs.len() == q {
            Ok(DVector::from_fn(q * self.np, |i, _| self.rs[i % q]))
        } else {
            Err(Error::DimensionMismatch {
                context: "setpoint",
                expected: q * self.np,
                got: self.rs.len(),
            })
        }
    }
}

/// Every intermediate of the condensation, for inspection and testing.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    pub a_d: DMatrix<f64>,
    pub b_d: DMatrix<f64>,
    pub a_a: DMatrix<f64>,
    pub b_a: DMatrix<f64>,
    pub c_a: DMatrix<f64>,
    pub f_a: DMatrix<f64>,
    pub phi: DMatrix<f64>,
    /// `H = ΦᵀQΦ + R`.
    pub h: DMatrix<f64>,
    /// `ΦᵀQ(R_s − F_a·x)`.
    pub q: DVector<f64>,
    pub lambda_l1: f64,
    pub quadratic: Quadratic,
    pub problem: CompositeProblem,
}

/// Builds `g(ΔU) = ΔUᵀHΔU − 2qᵀΔU + qᵀH⁻¹q` and `h = λ‖ΔU‖₁`.
///
/// The constant makes `g` equal the squared-norm form
/// `‖H^{1/2}ΔU − H^{−1/2}q‖²`.
pub fn condense(spec: &MpcSpec) -> Result<MpcProblem> {
    let (a_d, b_d) = zoh_discretize(&spec.ss)?;
    let (a_a, b_a, c_a) = augment(&a_d, &b_d, &spec.ss.c)?;
    let (f_a, phi) = prediction_matrices(&a_a, &b_a, &c_a, spec.np, spec.nc)?;
    check_dim("augmented state", a_a.nrows(), spec.x_current.len())?;
    check_dim("output weight", phi.nrows(), spec.q.nrows())?;
    check_dim("output weight", phi.nrows(), spec.q.ncols())?;
    check_dim("input weight", phi.ncols(), spec.r.nrows())?;
    check_dim("input weight", phi.ncols(), spec.r.ncols())?;
    if !(spec.lambda_l1.is_finite() && spec.lambda_l1 >= 0.0) {
        return Err(Error::config(format!("lambda_l1 must be >= 0, got {}", spec.lambda_l1)));
    }
    let qw = symmetrize(&spec.q);
    cholesky(&qw, "output weight Q").map_err(|_| Error::config("output weight Q is not positive definite"))?;

    let rs = spec.setpoint()?;
    let phi_t_q = phi.transpose() * &qw;
    let h = symmetrize(&(&phi_t_q * &phi + symmetrize(&spec.r)));
    let chol = cholesky(&h, "condensed Hessian")
        .map_err(|_| Error::config("condensed Hessian ΦᵀQΦ + R is not positive definite"))?;
    let q = &phi_t_q * (rs - &f_a * &spec.x_current);
    let constant = q.dot(&chol.solve(&q));

    let quad = Quadratic::new(&h * 2.0, &q * 2.0, constant)?;
    let lipschitz = 2.0 * max_eigenvalue(&h)?;
    let problem = CompositeProblem::new(
        Arc::new(quad.clone()),
        ProxFunction::L1 {
            weight: spec.lambda_l1,
        },
        lipschitz,
    )?;
    Ok(MpcProblem {
        a_d,
        b_d,
        a_a,
        b_a,
        c_a,
        f_a,
        phi,
        h,
        q,
        lambda_l1: spec.lambda_l1,
        quadratic: quad,
        problem,
    })
}

pub fn build_lasso(spec: &MpcSpec) -> Result<CompositeProblem> {
    Ok(condense(spec)?.problem)
}

/// The shipped example attitude model (7 states, 4 inputs, 3 outputs).
/// Illustrative only; see `data/spacecraft/README.md`.
pub fn example_spacecraft(h: f64) -> Result<StateSpace> {
    StateSpace::new(
        parse_matrix(include_str!("../data/spacecraft/A.txt"))?,
        parse_matrix(include_str!("../data/spacecraft/B.txt"))?,
        parse_matrix(include_str!("../data/spacecraft/C.txt"))?,
        parse_matrix(include_str!("../data/spacecraft/D.txt"))?,
        h,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) -> bool {
        a.shape() == b.shape() && (a - b).amax() <= tol
    }

    #[test]
    fn zoh_constant_integrand() {
        let ss = StateSpace::new(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::zeros(2, 2),
            0.1,
        )
        .unwrap();
        let (ad, bd) = zoh_discretize(&ss).unwrap();
        assert!(close(&ad, &DMatrix::identity(2, 2), 1e-14));
        assert!(close(&bd, &(DMatrix::identity(2, 2) * 0.1), 1e-14));
    }

    #[test]
    fn zoh_double_integrator() {
        let ss = StateSpace::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
            1.0,
        )
        .unwrap();
        let (ad, bd) = zoh_discretize(&ss).unwrap();
        assert!(close(&ad, &DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), 1e-13));
        assert!(close(&bd, &DMatrix::from_row_slice(2, 1, &[0.5, 1.0]), 1e-13));
    }

    #[test]
    fn non_finite_model_rejected() {
        let mut a = DMatrix::zeros(1, 1);
        a[(0, 0)] = f64::NAN;
        let r = StateSpace::new(a, DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), DMatrix::zeros(1, 1), 0.1);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn augment_identity_blocks() {
        let i = DMatrix::<f64>::identity(2, 2);
        let (aa, ba, ca) = augment(&i, &i, &i).unwrap();
        let z = DMatrix::<f64>::zeros(2, 2);
        let mut expect_a = DMatrix::zeros(4, 4);
        expect_a.view_mut((0, 0), (2, 2)).copy_from(&i);
        expect_a.view_mut((2, 0), (2, 2)).copy_from(&i);
        expect_a.view_mut((2, 2), (2, 2)).copy_from(&i);
        assert_eq!(aa, expect_a);
        let mut expect_b = DMatrix::zeros(4, 2);
        expect_b.view_mut((0, 0), (2, 2)).copy_from(&i);
        expect_b.view_mut((2, 0), (2, 2)).copy_from(&i);
        assert_eq!(ba, expect_b);
        assert_eq!(ca.view((0, 0), (2, 2)).into_owned(), z);
        assert_eq!(ca.view((0, 2), (2, 2)).into_owned(), i);
        assert!(augment(&i, &DMatrix::zeros(3, 1), &i).is_err());
    }

    #[test]
    fn scalar_prediction_matrices() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let one = DMatrix::from_element(1, 1, 1.0);
        let (f, phi) = prediction_matrices(&a, &one, &one, 3, 2).unwrap();
        assert!(close(&f, &DMatrix::from_row_slice(3, 1, &[0.5, 0.25, 0.125]), 1e-15));
        assert!(close(
            &phi,
            &DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 1.0, 0.25, 0.5]),
            1e-15
        ));
        let (f, phi) = prediction_matrices(&a, &one, &one, 1, 1).unwrap();
        assert_eq!(f, a);
        assert_eq!(phi, one);
        assert!(matches!(prediction_matrices(&a, &one, &one, 2, 3), Err(Error::Config(_))));
    }

    #[test]
    fn zero_target_gives_zero_optimum() {
        let ss = example_spacecraft(0.1).unwrap();
        let spec = MpcSpec::with_weights(
            ss,
            5,
            2,
            &Weight::Scalar(1.0),
            &Weight::Scalar(0.1),
            0.0,
            DVector::zeros(3),
            DVector::zeros(10),
        )
        .unwrap();
        let p = condense(&spec).unwrap();
        assert_eq!(p.q.amax(), 0.0);
        let x = DVector::zeros(8);
        assert_eq!(p.problem.eval_g(&x), 0.0);
        assert_eq!(p.problem.grad_g(&x).amax(), 0.0);
    }

    #[test]
    fn scalar_instance_matches_hand_expansion() {
        // A = -1, B = 2, C = 3, h = 0.5, Np = Nc = 1
        let ss = StateSpace::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 3.0),
            DMatrix::zeros(1, 1),
            0.5,
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![0.3, -0.2]);
        let spec = MpcSpec::with_weights(
            ss,
            1,
            1,
            &Weight::Scalar(2.0),
            &Weight::Scalar(0.5),
            0.1,
            DVector::from_element(1, 1.5),
            x0.clone(),
        )
        .unwrap();
        let p = condense(&spec).unwrap();
        let ad = (-0.5f64).exp();
        let bd = 2.0 * (1.0 - ad);
        let phi = 3.0 * bd;
        let f = [3.0 * ad, 1.0];
        let h = phi * 2.0 * phi + 0.5;
        let q = phi * 2.0 * (1.5 - f[0] * x0[0] - f[1] * x0[1]);
        let u = DVector::from_element(1, 0.7);
        let g = h * 0.49 - 2.0 * q * 0.7 + q * q / h;
        assert!((p.problem.eval_g(&u) - g).abs() < 1e-14 * g.abs().max(1.0));
        assert!((p.problem.grad_g(&u)[0] - (2.0 * h * 0.7 - 2.0 * q)).abs() < 1e-13);
        assert!((p.problem.lipschitz() - 2.0 * h).abs() < 1e-12);
    }

    #[test]
    fn hessian_symmetric_and_condensed_shape() {
        let ss = example_spacecraft(0.1).unwrap();
        let spec = MpcSpec::with_weights(
            ss,
            20,
            4,
            &Weight::Scalar(1.0),
            &Weight::Scalar(0.1),
            0.5,
            DVector::from_vec(vec![0.1, -0.05, 0.2]),
            DVector::zeros(10),
        )
        .unwrap();
        let p = condense(&spec).unwrap();
        assert_eq!(p.problem.dim(), 16);
        assert!((&p.h - p.h.transpose()).amax() <= 1e-12);
    }

    #[test]
    fn indefinite_hessian_is_a_config_error() {
        let ss = example_spacecraft(0.1).unwrap();
        let spec = MpcSpec::with_weights(
            ss,
            2,
            2,
            &Weight::Scalar(1.0),
            &Weight::Scalar(-100.0),
            0.0,
            DVector::zeros(3),
            DVector::zeros(10),
        )
        .unwrap();
        assert!(matches!(condense(&spec), Err(Error::Config(_))));
    }
}
