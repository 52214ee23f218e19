//! Closed-form proximal operators and the weighted (generalized) proximal
//! step used by the ADMM iteration.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, is_diagonal, l1_norm};
use crate::problem::{Quadratic, SmoothFunction};

/// Nonsmooth terms with a closed-form proximal map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProxFunction {
    Zero,
    /// `weight·‖x‖₁`
    L1 { weight: f64 },
    /// `(weight/2)·‖x‖₂²`
    SquaredL2 { weight: f64 },
    /// Indicator of the box `[lower, upper]ⁿ`.
    Box { lower: f64, upper: f64 },
}

impl ProxFunction {
    /// Function value; `+∞` outside the domain of an indicator.
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match *self {
            ProxFunction::Zero => 0.0,
            ProxFunction::L1 { weight } => weight * l1_norm(x),
            ProxFunction::SquaredL2 { weight } => 0.5 * weight * x.norm_squared(),
            ProxFunction::Box { lower, upper } => {
                if x.iter().all(|v| (lower..=upper).contains(v)) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_z h(z) + ‖z − v‖² / (2·step)`.
    pub fn prox(&self, v: &DVector<f64>, step: f64) -> DVector<f64> {
        match *self {
            ProxFunction::Zero => v.clone(),
            ProxFunction::L1 { weight } => soft_threshold(v, step * weight),
            ProxFunction::SquaredL2 { weight } => v / (1.0 + step * weight),
            ProxFunction::Box { lower, upper } => v.map(|x| x.clamp(lower, upper)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ProxFunction::Zero => Ok(()),
            ProxFunction::L1 { weight } | ProxFunction::SquaredL2 { weight } => {
                if weight.is_finite() && weight >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("prox weight must be >= 0, got {weight}")))
                }
            }
            ProxFunction::Box { lower, upper } => {
                if lower <= upper {
                    Ok(())
                } else {
                    Err(Error::config(format!("empty box [{lower}, {upper}]")))
                }
            }
        }
    }
}

/// Componentwise shrinkage `sign(vᵢ)·max(|vᵢ| − tau, 0)`.
///
/// `tau` must be nonnegative; `tau = 0` returns `v` unchanged.
pub fn soft_threshold(v: &DVector<f64>, tau: f64) -> DVector<f64> {
    debug_assert!(tau >= 0.0, "soft_threshold needs tau >= 0");
    v.map(|x| shrink(x, tau))
}

#[inline]
fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Value of the Moreau envelope `inf_z h(z) + ‖z − x‖²/(2λ)`, attained at
/// `prox_{λh}(x)`.
pub fn moreau_envelope(h: &ProxFunction, x: &DVector<f64>, lambda: f64) -> f64 {
    let p = h.prox(x, lambda);
    h.value(&p) + (&p - x).norm_squared() / (2.0 * lambda)
}

/// Data of one generalized proximal step: minimize
/// `scale·f(x) + ½‖x − Λ⁻¹γ‖²_Λ`.
#[derive(Debug, Clone)]
pub struct WeightedProxSpec {
    pub lambda: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub scale: f64,
}

/// The function whose weighted prox is taken.
#[derive(Debug, Clone, Copy)]
pub enum WeightedTarget<'a> {
    Quadratic(&'a Quadratic),
    Simple(&'a ProxFunction),
}

/// `argmin_x scale·f(x) + ½(x − Λ⁻¹γ)ᵀΛ(x − Λ⁻¹γ)`.
///
/// Quadratics and the zero or squared-L2 functions accept any SPD `Λ`; the
/// L1 norm and box indicator need a diagonal `Λ`.
pub fn weighted_prox(spec: &WeightedProxSpec, fun: WeightedTarget<'_>) -> Result<DVector<f64>> {
    check_dim("weighted_prox gamma", spec.lambda.nrows(), spec.gamma.len())?;
    PreparedWeightedProx::new(&spec.lambda, spec.scale, fun)?.apply(&spec.gamma)
}

/// A weighted prox with `Λ`, `scale` and the function fixed, so repeated
/// calls with new `γ` reuse one factorization.
#[derive(Debug, Clone)]
pub struct PreparedWeightedProx {
    dim: usize,
    kind: PreparedKind,
}

#[derive(Debug, Clone)]
enum PreparedKind {
    /// Solve `K x = γ + offset`.
    Linear {
        factor: Cholesky<f64, Dyn>,
        offset: Option<DVector<f64>>,
    },
    /// Separable prox with per-component metric `diag`.
    Diagonal {
        diag: DVector<f64>,
        fun: ProxFunction,
        scale: f64,
    },
}

impl PreparedWeightedProx {
    pub fn new(lambda: &DMatrix<f64>, scale: f64, fun: WeightedTarget<'_>) -> Result<Self> {
        if !lambda.is_square() {
            return Err(Error::DimensionMismatch {
                context: "weighted prox metric",
                expected: lambda.nrows(),
                got: lambda.ncols(),
            });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::config(format!("weighted prox scale must be > 0, got {scale}")));
        }
        let dim = lambda.nrows();
        // Λ itself must be SPD regardless of the function.
        cholesky(lambda, "weighted prox metric")?;
        let kind = match fun {
            WeightedTarget::Quadratic(q) => {
                check_dim("weighted prox quadratic", dim, q.dim())?;
                let k = lambda + q.hessian() * scale;
                PreparedKind::Linear {
                    factor: cholesky(&k, "weighted prox system")?,
                    offset: Some(q.linear() * scale),
                }
            }
            WeightedTarget::Simple(ProxFunction::Zero) => PreparedKind::Linear {
                factor: cholesky(lambda, "weighted prox metric")?,
                offset: None,
            },
            WeightedTarget::Simple(ProxFunction::SquaredL2 { weight }) => {
                let k = lambda + DMatrix::identity(dim, dim) * (scale * weight);
                PreparedKind::Linear {
                    factor: cholesky(&k, "weighted prox system")?,
                    offset: None,
                }
            }
            WeightedTarget::Simple(f @ (ProxFunction::L1 { .. } | ProxFunction::Box { .. })) => {
                if !is_diagonal(lambda) {
                    return Err(Error::Unsupported(
                        "weighted prox of a separable nonsmooth term needs a diagonal metric".into(),
                    ));
                }
                PreparedKind::Diagonal {
                    diag: lambda.diagonal(),
                    fun: f.clone(),
                    scale,
                }
            }
        };
        Ok(Self { dim, kind })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn apply(&self, gamma: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("weighted prox gamma", self.dim, gamma.len())?;
        Ok(match &self.kind {
            PreparedKind::Linear { factor, offset } => match offset {
                Some(off) => factor.solve(&(gamma + off)),
                None => factor.solve(gamma),
            },
            PreparedKind::Diagonal { diag, fun, scale } => {
                DVector::from_fn(self.dim, |i, _| {
                    let d = diag[i];
                    let center = gamma[i] / d;
                    match *fun {
                        ProxFunction::L1 { weight } => shrink(center, scale * weight / d),
                        ProxFunction::Box { lower, upper } => center.clamp(lower, upper),
                        _ => unreachable!("only separable nonsmooth terms are prepared diagonally"),
                    }
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn soft_threshold_closed_form() {
        assert_eq!(soft_threshold(&v(&[0.0, 0.0]), 1.0), v(&[0.0, 0.0]));
        assert_eq!(soft_threshold(&v(&[3.0, -0.5, -3.0]), 1.0), v(&[2.0, 0.0, -2.0]));
    }

    #[test]
    fn soft_threshold_matches_grid_minimizer() {
        let (tau, x) = (0.4, 1.7);
        let obj = |z: f64| tau * z.abs() + 0.5 * (z - x) * (z - x);
        let mut best = (f64::INFINITY, 0.0);
        let steps = 600_000;
        for i in 0..=steps {
            let z = -3.0 + 6.0 * i as f64 / steps as f64;
            let val = obj(z);
            if val < best.0 {
                best = (val, z);
            }
        }
        let got = soft_threshold(&v(&[x]), tau)[0];
        assert!((got - best.1).abs() <= 1e-4, "{got} vs {}", best.1);
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(moreau_envelope(&ProxFunction::Zero, &v(&[3.0, -1.0]), 0.7), 0.0);
        let l1 = ProxFunction::L1 { weight: 1.0 };
        assert!((moreau_envelope(&l1, &v(&[3.0]), 1.0) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn envelope_is_a_minorant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let l1 = ProxFunction::L1 { weight: 1.3 };
        for _ in 0..1000 {
            let x = DVector::from_fn(4, |_, _| rng.random_range(-5.0..5.0));
            let lam = rng.random_range(0.01..3.0);
            assert!(moreau_envelope(&l1, &x, lam) <= l1.value(&x) + 1e-12);
        }
    }

    #[test]
    fn prox_of_each_supported_function() {
        let x = v(&[2.0, -3.0]);
        assert_eq!(ProxFunction::SquaredL2 { weight: 1.0 }.prox(&x, 1.0), v(&[1.0, -1.5]));
        let b = ProxFunction::Box { lower: -1.0, upper: 1.0 };
        assert_eq!(b.prox(&x, 5.0), v(&[1.0, -1.0]));
        assert_eq!(b.value(&x), f64::INFINITY);
        assert_eq!(b.value(&v(&[0.5, -1.0])), 0.0);
    }

    #[test]
    fn weighted_prox_zero_function_is_weighted_projection() {
        let lambda = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let gamma = v(&[1.0, -2.0]);
        let spec = WeightedProxSpec { lambda: lambda.clone(), gamma: gamma.clone(), scale: 1.0 };
        let got = weighted_prox(&spec, WeightedTarget::Simple(&ProxFunction::Zero)).unwrap();
        let expect = lambda.try_inverse().unwrap() * gamma;
        assert!((got - expect).norm() < 1e-14);
    }

    #[test]
    fn weighted_prox_identity_l1_reduces_to_shrinkage() {
        let spec = WeightedProxSpec { lambda: DMatrix::identity(1, 1), gamma: v(&[3.0]), scale: 1.0 };
        let got = weighted_prox(&spec, WeightedTarget::Simple(&ProxFunction::L1 { weight: 1.0 })).unwrap();
        assert_eq!(got, v(&[2.0]));
    }

    #[test]
    fn weighted_prox_quadratic_first_order_condition() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DMatrix::from_fn(6, 4, |_, _| rng.random_range(-1.0..1.0));
        let p = a.transpose() * &a + DMatrix::identity(4, 4) * 0.1;
        let q = DVector::from_fn(4, |_, _| rng.random_range(-1.0..1.0));
        let quad = Quadratic::new(p.clone(), q.clone(), 0.0).unwrap();
        let b = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let lambda = b.transpose() * &b + DMatrix::identity(4, 4);
        let gamma = DVector::from_fn(4, |_, _| rng.random_range(-2.0..2.0));
        let scale = 0.8;
        let spec = WeightedProxSpec { lambda: lambda.clone(), gamma: gamma.clone(), scale };
        let x = weighted_prox(&spec, WeightedTarget::Quadratic(&quad)).unwrap();
        // scale·(Px − q) + Λ(x − Λ⁻¹γ) = scale·(Px − q) + Λx − γ
        let residual = (&p * &x - &q) * scale + &lambda * &x - &gamma;
        assert!(residual.amax() <= 1e-10, "{}", residual.amax());
    }

    #[test]
    fn weighted_prox_l1_with_dense_metric_is_unsupported() {
        let lambda = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let spec = WeightedProxSpec { lambda, gamma: v(&[1.0, 1.0]), scale: 1.0 };
        let err = weighted_prox(&spec, WeightedTarget::Simple(&ProxFunction::L1 { weight: 1.0 }));
        assert!(matches!(err, Err(Error::Unsupported(_))));
    }

    #[test]
    fn weighted_prox_rejects_indefinite_metric() {
        let lambda = DMatrix::from_diagonal(&v(&[1.0, -1.0]));
        let spec = WeightedProxSpec { lambda, gamma: v(&[1.0, 1.0]), scale: 1.0 };
        let err = weighted_prox(&spec, WeightedTarget::Simple(&ProxFunction::Zero));
        assert!(matches!(err, Err(Error::NotPositiveDefinite(_))));
    }

    proptest! {
        #[test]
        fn identity_metric_reproduces_scaled_prox(
            xs in prop::collection::vec(-10.0f64..10.0, 1..6),
            s in 0.05f64..4.0,
            w in 0.0f64..3.0,
        ) {
            let x = DVector::from_vec(xs);
            let n = x.len();
            for f in [
                ProxFunction::L1 { weight: w },
                ProxFunction::SquaredL2 { weight: w },
                ProxFunction::Box { lower: -1.0, upper: 2.0 },
                ProxFunction::Zero,
            ] {
                let spec = WeightedProxSpec { lambda: DMatrix::identity(n, n), gamma: x.clone(), scale: s };
                let got = weighted_prox(&spec, WeightedTarget::Simple(&f)).unwrap();
                let expect = f.prox(&x, s);
                prop_assert!((got - expect).amax() <= 1e-12);
            }
        }

        #[test]
        fn soft_threshold_is_nonexpansive(
            pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..8),
            tau in 0.0f64..5.0,
        ) {
            let u = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.0));
            let w = DVector::from_iterator(pairs.len(), pairs.iter().map(|p| p.1));
            let d = (soft_threshold(&u, tau) - soft_threshold(&w, tau)).norm();
            prop_assert!(d <= (&u - &w).norm() + 1e-12);
        }
    }

    #[test]
    fn quadratic_prox_is_nonexpansive() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let a = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let quad = Quadratic::new(a.transpose() * &a, DVector::from_element(3, 0.3), 0.0).unwrap();
        let prep = PreparedWeightedProx::new(&DMatrix::identity(3, 3), 1.5, WeightedTarget::Quadratic(&quad)).unwrap();
        for _ in 0..1000 {
            let u = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let w = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let d = (prep.apply(&u).unwrap() - prep.apply(&w).unwrap()).norm();
            assert!(d <= (&u - &w).norm() + 1e-12);
        }
    }
}
