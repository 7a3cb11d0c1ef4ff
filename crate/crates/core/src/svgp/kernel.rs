use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{squared_distance, Matrix};

/// RBF kernel hyperparameters and the constant prior mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub outputscale: f64,
    pub lengthscale: f64,
    pub mean_const: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            outputscale: 1.0,
            lengthscale: 1.0,
            mean_const: 0.0,
        }
    }
}

impl KernelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.outputscale > 0.0 && self.lengthscale > 0.0 && self.mean_const.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "kernel needs positive outputscale and lengthscale, got {} and {}",
                self.outputscale, self.lengthscale
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.outputscale * (-squared_distance(x, y) / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

/// `K_ij = outputscale · exp(−‖x_i − y_j‖² / (2 lengthscale²))`.
pub fn kernel_matrix(x: &Matrix, y: &Matrix, kp: &KernelParams) -> Result<Matrix> {
    Error::check_dim("kernel_matrix", x.cols(), y.cols())?;
    let mut k = Matrix::zeros(x.rows(), y.rows());
    for i in 0..x.rows() {
        let xi = x.row(i);
        for (j, v) in k.row_mut(i).iter_mut().enumerate() {
            *v = kp.eval(xi, y.row(j));
        }
    }
    Ok(k)
}

/// Gradients of a scalar through `K = kernel_matrix(X, Y)`.
#[derive(Debug, Clone, Default)]
pub(crate) struct KernelGrad {
    pub log_outputscale: f64,
    pub log_lengthscale: f64,
}

/// Chains `G = ∂F/∂K` back to the kernel's log-hyperparameters and inputs.
///
/// `k` is the kernel matrix without jitter. `grad_x` and `grad_y` are
/// accumulated when given.
pub(crate) fn kernel_backward(
    x: &Matrix,
    y: &Matrix,
    k: &Matrix,
    g: &Matrix,
    kp: &KernelParams,
    mut grad_x: Option<&mut Matrix>,
    mut grad_y: Option<&mut Matrix>,
) -> KernelGrad {
    let inv_l2 = 1.0 / (kp.lengthscale * kp.lengthscale);
    let dim = x.cols();
    let mut out = KernelGrad::default();
    for i in 0..x.rows() {
        let xi = x.row(i);
        for j in 0..y.rows() {
            let gk = g[(i, j)] * k[(i, j)];
            if gk == 0.0 {
                continue;
            }
            let yj = y.row(j);
            out.log_outputscale += gk;
            out.log_lengthscale += gk * squared_distance(xi, yj) * inv_l2;
            if let Some(gx) = grad_x.as_deref_mut() {
                let row = gx.row_mut(i);
                for d in 0..dim {
                    row[d] -= gk * (xi[d] - yj[d]) * inv_l2;
                }
            }
            if let Some(gy) = grad_y.as_deref_mut() {
                let row = gy.row_mut(j);
                for d in 0..dim {
                    row[d] += gk * (xi[d] - yj[d]) * inv_l2;
                }
            }
        }
    }
    out
}
