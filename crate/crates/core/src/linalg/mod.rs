//! Dense linear algebra and reproducible stochastic primitives.
//!
//! All routines are double precision and single-threaded; results depend only
//! on their inputs and, for sampling, on the [`SeededRng`] stream.

mod decompose;
mod eigen;
mod matrix;
mod normal;
mod quadrature;
mod random;

pub use decompose::{
    cg_solve, chol_log_det, cholesky, cholesky_escalating, cholesky_inverse, cholesky_solve,
    solve_lower, solve_lower_matrix, solve_lower_t, symmetrize, DEFAULT_JITTER,
};
pub use eigen::{power_iteration, DEFAULT_POWER_MAX_ITER, DEFAULT_POWER_TOL, PERRON_EPSILON};
pub use matrix::{axpy, dot, norm2, squared_distance, Matrix};
pub use normal::{inv_mills, log_norm_cdf, norm_cdf, norm_pdf, norm_quantile};
pub use quadrature::{gauss_hermite, QuadratureRule};
pub use random::{mvn_sample, SeededRng};
