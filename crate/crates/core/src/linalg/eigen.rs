use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Added to every entry so the Perron vector is unique.
pub const PERRON_EPSILON: f64 = 1e-12;
pub const DEFAULT_POWER_TOL: f64 = 1e-10;
pub const DEFAULT_POWER_MAX_ITER: usize = 1000;

/// Dominant eigenpair of a nonnegative matrix by power iteration.
///
/// Iterates on `M + ε·11ᵀ` from the uniform vector, normalizing by the L1
/// norm. Returns the unit-L1 eigenvector and its eigenvalue once
/// `‖Mv − λv‖₁ ≤ tol`.
pub fn power_iteration(m: &Matrix, tol: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: "power_iteration",
            expected: m.rows(),
            found: m.cols(),
        });
    }
    let n = m.rows();
    if n == 0 {
        return Err(Error::InvalidArgument("power iteration on an empty matrix".into()));
    }
    if m.data().iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidArgument("power iteration needs a nonnegative matrix".into()));
    }
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let shift = PERRON_EPSILON * v.iter().sum::<f64>();
        for (i, wi) in w.iter_mut().enumerate() {
            *wi = super::dot(m.row(i), &v) + shift;
        }
        let lambda: f64 = w.iter().sum();
        residual = w.iter().zip(&v).map(|(a, b)| (a - lambda * b).abs()).sum();
        if residual <= tol {
            return Ok((v, lambda));
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / lambda;
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity() {
        let (v, l) = power_iteration(&Matrix::identity(2), 1e-10, 1000).unwrap();
        assert!((l - 1.0).abs() < 1e-10);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal() {
        let (v, l) = power_iteration(&Matrix::from_diag(&[3.0, 1.0]), 1e-10, 1000).unwrap();
        assert!((l - 3.0).abs() < 1e-9);
        assert!((v[0] - 1.0).abs() < 1e-9 && v[1] < 1e-9);
    }

    #[test]
    fn consistent_tournament_order() {
        let p = Matrix::from_rows(&[[0.5, 1.0, 1.0], [0.0, 0.5, 1.0], [0.0, 0.0, 0.5]]).unwrap();
        let (v, _) = power_iteration(&p, 1e-10, 10_000_000).unwrap();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    }

    #[test]
    fn rejects_negative_and_reports_no_convergence() {
        let m = Matrix::from_rows(&[[1.0, -1.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(power_iteration(&m, 1e-10, 10), Err(Error::InvalidArgument(_))));
        let p = Matrix::from_rows(&[[0.5, 1.0], [0.0, 0.5]]).unwrap();
        assert!(matches!(
            power_iteration(&p, 1e-10, 5),
            Err(Error::NoConvergence { iterations: 5, .. })
        ));
    }
}
