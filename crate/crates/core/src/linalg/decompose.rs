//! Cholesky factorization, triangular solves and conjugate gradients.

use super::matrix::{axpy, dot, norm2, Matrix};
use crate::error::{Error, Result};

/// Diagonal jitter applied to every kernel-matrix factorization.
pub const DEFAULT_JITTER: f64 = 1e-6;

/// Lower Cholesky factor `L` of `A + jitter·I`.
///
/// Only the lower triangle of `a` is read.
pub fn cholesky(a: &Matrix, jitter: f64) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: "cholesky",
            expected: a.rows(),
            found: a.cols(),
        });
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)] + jitter;
        {
            let lj = &l.row(j)[..j];
            d -= dot(lj, lj);
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Factors with `jitter`, retrying with ten times the jitter up to `retries` times.
pub fn cholesky_escalating(a: &Matrix, jitter: f64, retries: usize) -> Result<Matrix> {
    let mut j = jitter;
    let mut last = None;
    for _ in 0..=retries {
        match cholesky(a, j) {
            Ok(l) => return Ok(l),
            Err(e) => last = Some(e),
        }
        j = if j > 0.0 { j * 10.0 } else { 1e-10 };
    }
    Err(last.expect("at least one attempt"))
}

/// Solves `L x = b` for lower-triangular `L`.
pub fn solve_lower(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim("solve_lower", l.rows(), b.len())?;
    let n = b.len();
    let mut x = vec![0.0; n];
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &x[..i]);
        x[i] = s / l[(i, i)];
    }
    Ok(x)
}

/// Solves `Lᵀ x = b` for lower-triangular `L`.
pub fn solve_lower_t(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Error::check_dim("solve_lower_t", l.rows(), b.len())?;
    let n = b.len();
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        // column i of Lᵀ above the diagonal is row i of L left of the diagonal
        axpy(-xi, &l.row(i)[..i], &mut x[..i]);
    }
    Ok(x)
}

/// Solves `(L Lᵀ) x = b`.
pub fn cholesky_solve(l: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    let y = solve_lower(l, b)?;
    solve_lower_t(l, &y)
}

/// Solves `L X = B` column by column; `B` is `n × k`.
pub fn solve_lower_matrix(l: &Matrix, b: &Matrix) -> Result<Matrix> {
    Error::check_dim("solve_lower_matrix", l.rows(), b.rows())?;
    let (n, k) = b.shape();
    let mut x = b.clone();
    for i in 0..n {
        let lii = l[(i, i)];
        for p in 0..i {
            let lip = l[(i, p)];
            if lip == 0.0 {
                continue;
            }
            for c in 0..k {
                let v = x[(p, c)];
                x[(i, c)] -= lip * v;
            }
        }
        for c in 0..k {
            x[(i, c)] /= lii;
        }
    }
    Ok(x)
}

/// `(L Lᵀ)⁻¹` from the Cholesky factor.
pub fn cholesky_inverse(l: &Matrix) -> Result<Matrix> {
    let n = l.rows();
    // L⁻¹ by forward substitution on the identity, then L⁻ᵀ L⁻¹.
    let linv = solve_lower_matrix(l, &Matrix::identity(n))?;
    let mut inv = linv.t_matmul(&linv)?;
    symmetrize(&mut inv);
    Ok(inv)
}

/// `log |L Lᵀ|`.
pub fn chol_log_det(l: &Matrix) -> f64 {
    2.0 * l.diag().iter().map(|d| d.ln()).sum::<f64>()
}

pub fn symmetrize(a: &mut Matrix) {
    let n = a.rows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Conjugate-gradient solve of `A x = b` for SPD `A`.
///
/// Stops once `‖Ax − b‖ / ‖b‖ ≤ tol`; a zero right-hand side returns zero.
pub fn cg_solve(a: &Matrix, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    Error::check_dim("cg_solve", a.rows(), b.len())?;
    Error::check_dim("cg_solve", a.cols(), b.len())?;
    let n = b.len();
    let b_norm = norm2(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        let ap = a.matvec(&p)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite { pivot: 0, value: pap });
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_new = dot(&r, &r);
        if rr_new.sqrt() / b_norm <= tol {
            // recompute the true residual; the recursive one drifts
            let ax = a.matvec(&x)?;
            let true_res: f64 = ax.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
            if true_res.sqrt() / b_norm <= tol {
                return Ok(x);
            }
            r = b.iter().zip(&ax).map(|(u, v)| u - v).collect();
            p = r.clone();
            rr = dot(&r, &r);
            continue;
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: rr.sqrt() / b_norm,
    })
}
