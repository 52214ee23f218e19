//! Dense linear-algebra helpers shared by the solvers and the MPC builder.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const POWER_MAX_ITER: usize = 100_000;
const POWER_REL_TOL: f64 = 1e-12;

/// Returns `(m + mᵀ) / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|v| v.is_finite())
}

/// Largest eigenvalue of a symmetric matrix by power iteration.
///
/// The input is symmetrized first. A plain power iteration finds the
/// eigenvalue of largest magnitude; when that one is negative, or when two
/// eigenvalues of opposite sign tie in magnitude, the iteration is repeated
/// on `M + ‖M‖∞·I`, which is positive semidefinite and has the same top
/// eigenvector.
pub fn max_eigenvalue(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "max_eigenvalue",
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    if !all_finite(m) {
        return Err(Error::NonFinite("max_eigenvalue input"));
    }
    let n = m.nrows();
    if n == 0 {
        return Err(Error::Domain("max_eigenvalue of an empty matrix".into()));
    }
    let s = symmetrize(m);
    let norm_inf = s
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if norm_inf == 0.0 {
        return Ok(0.0);
    }

    let (lambda, v) = power_iteration(&s, 0.0);
    let residual = (&s * &v - &v * lambda).norm();
    if lambda >= 0.0 && residual <= 1e-4 * norm_inf {
        return Ok(lambda);
    }
    let (shifted, _) = power_iteration(&s, norm_inf);
    Ok(shifted - norm_inf)
}

/// Runs power iteration on `s + shift·I` and returns the Rayleigh quotient
/// of `s + shift·I` together with the final unit vector.
fn power_iteration(s: &DMatrix<f64>, shift: f64) -> (f64, DVector<f64>) {
    let n = s.nrows();
    // Irregular start vector so that it is not orthogonal to structured eigenvectors.
    let mut v = DVector::from_fn(n, |i, _| 1.0 + 0.25 * ((i + 1) as f64).sin());
    v /= v.norm();
    let mut lambda = f64::NAN;
    for _ in 0..POWER_MAX_ITER {
        let mut w = s * &v;
        if shift != 0.0 {
            w.axpy(shift, &v, 1.0);
        }
        let next = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            return (0.0, v);
        }
        v = w / norm;
        let converged = (next - lambda).abs() <= POWER_REL_TOL * next.abs();
        lambda = next;
        if converged {
            break;
        }
    }
    (lambda, v)
}

/// Cholesky factorization that reports failure as a typed error.
pub fn cholesky(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    if !all_finite(m) {
        return Err(Error::NonFinite(what));
    }
    Cholesky::new(symmetrize(m)).ok_or(Error::NotPositiveDefinite(what))
}

pub fn is_diagonal(m: &DMatrix<f64>) -> bool {
    m.is_square()
        && m
            .iter()
            .enumerate()
            .all(|(idx, v)| idx % m.nrows() == idx / m.nrows() || *v == 0.0)
}

/// `‖v‖∞`, zero for empty vectors.
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::SymmetricEigen;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_and_diagonal() {
        assert_eq!(max_eigenvalue(&DMatrix::identity(3, 3)).unwrap(), 1.0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 7.0]));
        let l = max_eigenvalue(&d).unwrap();
        assert!((l - 7.0).abs() <= 1e-10 * 7.0);
    }

    #[test]
    fn negative_dominant_and_symmetric_tie() {
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -5.0]));
        assert!((max_eigenvalue(&d).unwrap() - 1.0).abs() < 1e-9);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        assert!((max_eigenvalue(&d).unwrap() - 1.0).abs() < 1e-9);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, -3.0]));
        assert!((max_eigenvalue(&d).unwrap() + 2.0).abs() < 1e-9);
    }

    #[test]
    fn random_symmetric_matches_dense_eigensolver() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let a = DMatrix::from_fn(10, 10, |_, _| rng.random_range(-1.0..1.0));
            let s = symmetrize(&a);
            let oracle = SymmetricEigen::new(s.clone()).eigenvalues.max();
            let got = max_eigenvalue(&s).unwrap();
            assert!(
                (got - oracle).abs() <= 1e-8 * oracle.abs().max(1.0),
                "{got} vs {oracle}"
            );
        }
    }

    #[test]
    fn psd_gram_matrix_relative_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = DMatrix::from_fn(30, 12, |_, _| rng.random_range(-1.0..1.0));
        let g = a.transpose() * &a;
        let oracle = SymmetricEigen::new(g.clone()).eigenvalues.max();
        assert!((max_eigenvalue(&g).unwrap() - oracle).abs() <= 1e-10 * oracle);
    }

    #[test]
    fn rejects_non_finite() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(max_eigenvalue(&m), Err(Error::NonFinite(_))));
    }

    #[test]
    fn diagonal_detection() {
        assert!(is_diagonal(&DMatrix::identity(3, 3)));
        let mut m = DMatrix::identity(3, 3);
        m[(2, 0)] = 1e-3;
        assert!(!is_diagonal(&m));
    }
}
