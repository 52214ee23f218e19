//! Composite problems `f(x) = g(x) + h(x)` with a smooth `g` and a
//! proximable `h`.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{all_finite, max_eigenvalue, symmetrize};
use crate::prox::ProxFunction;

/// Value and gradient oracle for the smooth part.
pub trait SmoothFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// `g(x) = ½xᵀPx − qᵀx + c` with symmetric positive semidefinite `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratic {
    p: DMatrix<f64>,
    q: DVector<f64>,
    c: f64,
}

impl Quadratic {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, c: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::DimensionMismatch {
                context: "quadratic hessian",
                expected: p.nrows(),
                got: p.ncols(),
            });
        }
        check_dim("quadratic linear term", p.nrows(), q.len())?;
        if !all_finite(&p) || q.iter().any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::NonFinite("quadratic coefficients"));
        }
        Ok(Self {
            p: symmetrize(&p),
            q,
            c,
        })
    }

    /// `½‖Ax − b‖²` expanded as `½xᵀAᵀAx − (Aᵀb)ᵀx + ½bᵀb`.
    pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        check_dim("least squares rhs", a.nrows(), b.len())?;
        let at = a.transpose();
        Self::new(&at * a, &at * b, 0.5 * b.norm_squared())
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn linear(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn constant(&self) -> f64 {
        self.c
    }

    /// Lipschitz constant of the gradient, `λ_max(P)`.
    pub fn lipschitz(&self) -> Result<f64> {
        max_eigenvalue(&self.p)
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.q.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) - self.q.dot(x) + self.c
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * x - &self.q
    }
}

/// Known minimizer and optimal value of a problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x_star: DVector<f64>,
    pub f_star: f64,
}

/// Minimize `g(x) + h(x)` over `ℝⁿ`.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    smooth: Arc<dyn SmoothFunction>,
    nonsmooth: ProxFunction,
    lipschitz: f64,
    reference: Option<Reference>,
}

impl CompositeProblem {
    pub fn new(
        smooth: Arc<dyn SmoothFunction>,
        nonsmooth: ProxFunction,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(lipschitz.is_finite() && lipschitz >= 0.0) {
            return Err(Error::config(format!(
                "Lipschitz constant must be finite and >= 0, got {lipschitz}"
            )));
        }
        nonsmooth.validate()?;
        Ok(Self {
            smooth,
            nonsmooth,
            lipschitz,
            reference: None,
        })
    }

    /// Quadratic `g` with its Lipschitz constant computed from the Hessian.
    pub fn from_quadratic(g: Quadratic, h: ProxFunction) -> Result<Self> {
        let l = g.lipschitz()?;
        Self::new(Arc::new(g), h, l)
    }

    pub fn with_reference(mut self, reference: Reference) -> Result<Self> {
        check_dim("reference optimum", self.dim(), reference.x_star.len())?;
        self.reference = Some(reference);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn smooth(&self) -> &dyn SmoothFunction {
        self.smooth.as_ref()
    }

    pub fn nonsmooth(&self) -> &ProxFunction {
        &self.nonsmooth
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn reference(&self) -> Option<&Reference> {
        self.reference.as_ref()
    }

    pub fn eval_g(&self, x: &DVector<f64>) -> f64 {
        self.smooth.value(x)
    }

    pub fn grad_g(&self, x: &DVector<f64>) -> DVector<f64> {
        self.smooth.gradient(x)
    }

    pub fn eval_h(&self, x: &DVector<f64>) -> f64 {
        self.nonsmooth.value(x)
    }

    pub fn prox_h(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        self.nonsmooth.prox(v, step)
    }

    /// `g(x) + h(x)` without a dimension check; solvers use this on
    /// iterates they produced themselves.
    pub(crate) fn objective_unchecked(&self, x: &DVector<f64>) -> f64 {
        self.eval_g(x) + self.eval_h(x)
    }
}

/// `f(x) = g(x) + h(x)`; `+∞` when `x` lies outside the domain of `h`.
pub fn eval_objective(problem: &CompositeProblem, x: &DVector<f64>) -> Result<f64> {
    check_dim("eval_objective", problem.dim(), x.len())?;
    Ok(problem.objective_unchecked(x))
}

/// Central-difference approximation of `∇g(x)`. Test oracle only.
pub fn finite_diff_gradient(problem: &CompositeProblem, x: &DVector<f64>, step: f64) -> DVector<f64> {
    debug_assert!(step > 0.0);
    let mut probe = x.clone();
    DVector::from_fn(x.len(), |i, _| {
        let orig = probe[i];
        probe[i] = orig + step;
        let up = problem.eval_g(&probe);
        probe[i] = orig - step;
        let down = problem.eval_g(&probe);
        probe[i] = orig;
        (up - down) / (2.0 * step)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn half_norm_sq(n: usize) -> Quadratic {
        Quadratic::new(DMatrix::identity(n, n), DVector::zeros(n), 0.0).unwrap()
    }

    #[test]
    fn objective_of_simple_problems() {
        let p = CompositeProblem::from_quadratic(half_norm_sq(2), ProxFunction::Zero).unwrap();
        assert_eq!(eval_objective(&p, &DVector::zeros(2)).unwrap(), 0.0);
        let p = CompositeProblem::from_quadratic(half_norm_sq(2), ProxFunction::L1 { weight: 1.0 }).unwrap();
        let x = DVector::from_vec(vec![1.0, -1.0]);
        assert_eq!(eval_objective(&p, &x).unwrap(), 3.0);
    }

    #[test]
    fn objective_dimension_mismatch() {
        let p = CompositeProblem::from_quadratic(half_norm_sq(2), ProxFunction::Zero).unwrap();
        assert!(matches!(
            eval_objective(&p, &DVector::zeros(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn objective_is_infinite_outside_box() {
        let p = CompositeProblem::from_quadratic(half_norm_sq(1), ProxFunction::Box { lower: 0.0, upper: 1.0 })
            .unwrap();
        assert_eq!(eval_objective(&p, &DVector::from_vec(vec![2.0])).unwrap(), f64::INFINITY);
    }

    #[test]
    fn lasso_objective_matches_residual_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(8, 5, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0));
        let lam = 0.3;
        let p = CompositeProblem::from_quadratic(
            Quadratic::least_squares(&a, &b).unwrap(),
            ProxFunction::L1 { weight: lam },
        )
        .unwrap();
        for _ in 0..10 {
            let x = DVector::from_fn(5, |_, _| rng.random_range(-2.0..2.0));
            // independent path: residual norm plus explicit absolute sum
            let r = &a * &x - &b;
            let direct = 0.5 * r.iter().map(|v| v * v).sum::<f64>()
                + lam * x.iter().map(|v| v.abs()).sum::<f64>();
            let got = eval_objective(&p, &x).unwrap();
            assert!((got - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn finite_differences() {
        let p = CompositeProblem::from_quadratic(half_norm_sq(1), ProxFunction::Zero).unwrap();
        let g = finite_diff_gradient(&p, &DVector::from_vec(vec![2.0]), 1e-5);
        assert!((g[0] - 2.0).abs() < 1e-8);

        let zero = Quadratic::new(DMatrix::zeros(3, 3), DVector::zeros(3), 0.0).unwrap();
        let p = CompositeProblem::from_quadratic(zero, ProxFunction::Zero).unwrap();
        assert_eq!(finite_diff_gradient(&p, &DVector::from_element(3, 1.5), 1e-4), DVector::zeros(3));

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = DMatrix::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0));
        let spd = m.transpose() * &m + DMatrix::identity(6, 6);
        let q = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let p = CompositeProblem::from_quadratic(Quadratic::new(spd, q, 0.7).unwrap(), ProxFunction::Zero).unwrap();
        let x = DVector::from_fn(6, |_, _| rng.random_range(-1.0..1.0));
        let fd = finite_diff_gradient(&p, &x, 1e-5);
        let an = p.grad_g(&x);
        assert!((fd - &an).amax() <= 1e-6 * an.amax().max(1.0));
    }

    #[test]
    fn quadratic_gradient_is_lipschitz() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(7, 4, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
        let p = CompositeProblem::from_quadratic(Quadratic::least_squares(&a, &b).unwrap(), ProxFunction::Zero)
            .unwrap();
        let l = p.lipschitz();
        for _ in 0..200 {
            let x = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
            let y = DVector::from_fn(4, |_, _| rng.random_range(-3.0..3.0));
            let lhs = (p.grad_g(&y) - p.grad_g(&x)).norm();
            assert!(lhs <= l * (&y - &x).norm() * (1.0 + 1e-12));
        }
    }
}
