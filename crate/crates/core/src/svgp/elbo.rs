//! Evidence lower bound of the probit SVGP and its exact gradient.
//!
//! Unwhitened parameterization: `q(u) = N(μ, L Lᵀ)` at inducing inputs `Z`,
//! prior `p(u) = N(m·1, K_uu)`. For a point with cross-covariance row `k_i`,
//! `a_i = K_uu⁻¹ k_i`, the marginal is
//! `q(f_i) = N(m + a_iᵀ(μ − m·1), k_ii − a_iᵀk_i + a_iᵀΣa_i)`.

use super::kernel::{kernel_backward, kernel_matrix, KernelParams};
use super::model::{ModelGrad, ModelParams, VariationalState};
use crate::error::{Error, Result};
use crate::linalg::{
    chol_log_det, cholesky, cholesky_inverse, cholesky_solve, dot, inv_mills, log_norm_cdf, solve_lower_matrix,
    Matrix, QuadratureRule,
};

/// Factored prior at the inducing inputs.
pub(crate) struct PriorFactor {
    /// kernel part of `K_uu`, without jitter
    pub kuu: Matrix,
    pub lu: Matrix,
    /// `μ − m·1`
    pub delta: Vec<f64>,
    /// `K_uu⁻¹ δ`
    pub alpha: Vec<f64>,
}

pub(crate) fn prior_factor(vs: &VariationalState, kp: &KernelParams, jitter: f64) -> Result<PriorFactor> {
    vs.validate()?;
    let kuu = kernel_matrix(&vs.z, &vs.z, kp)?;
    let lu = cholesky(&kuu, jitter)?;
    let delta: Vec<f64> = vs.mu.iter().map(|u| u - kp.mean_const).collect();
    let alpha = cholesky_solve(&lu, &delta)?;
    Ok(PriorFactor { kuu, lu, delta, alpha })
}

fn kl_from_factor(pf: &PriorFactor, vs: &VariationalState, map_mode: bool) -> Result<f64> {
    let m = vs.n_inducing() as f64;
    let quad = dot(&pf.delta, &pf.alpha);
    let log_det_kuu = chol_log_det(&pf.lu);
    if map_mode {
        return Ok(0.5 * (quad - m + log_det_kuu));
    }
    let diag = vs.l_sigma.diag();
    if let Some((pivot, &value)) = diag.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::NotPositiveDefinite { pivot, value });
    }
    // tr(K⁻¹Σ) = ‖L_u⁻¹ L_σ‖²
    let x = solve_lower_matrix(&pf.lu, &vs.l_sigma.lower_triangle())?;
    let trace = x.data().iter().map(|v| v * v).sum::<f64>();
    let log_det_sigma = 2.0 * diag.iter().map(|d| d.ln()).sum::<f64>();
    Ok(0.5 * (trace + quad - m + log_det_kuu - log_det_sigma))
}

/// `KL(N(μ, Σ) ‖ N(m·1, K_uu + jitter·I))` in closed form.
pub fn kl_gaussians(vs: &VariationalState, kp: &KernelParams, jitter: f64) -> Result<f64> {
    let pf = prior_factor(vs, kp, jitter)?;
    kl_from_factor(&pf, vs, false)
}

/// Marginals of `q(f)` at the rows of `x`.
pub(crate) struct Marginals {
    pub kfu: Matrix,
    /// rows `a_i = K_uu⁻¹ k_i`
    pub a: Matrix,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub(crate) fn marginals(x: &Matrix, model: &ModelParams, pf: &PriorFactor) -> Result<Marginals> {
    let kp = &model.kernel;
    let vs = &model.variational;
    let kfu = kernel_matrix(x, &vs.z, kp)?;
    let n = x.rows();
    let m = vs.n_inducing();
    let mut a = Matrix::zeros(n, m);
    let mut mean = Vec::with_capacity(n);
    let mut var = Vec::with_capacity(n);
    let l = vs.l_sigma.lower_triangle();
    for i in 0..n {
        let ki = kfu.row(i);
        let ai = cholesky_solve(&pf.lu, ki)?;
        mean.push(kp.mean_const + dot(&ai, &pf.delta));
        let mut v = kp.outputscale - dot(&ai, ki);
        if !model.map_mode {
            let t = l.t_matvec(&ai)?;
            v += dot(&t, &t);
        }
        var.push(v);
        a.row_mut(i).copy_from_slice(&ai);
    }
    Ok(Marginals { kfu, a, mean, var })
}

/// `E_{N(mean, var)}[log Φ(s f)]` and its derivatives in mean and variance.
fn expected_log_lik(y: bool, mean: f64, var: f64, quad: &QuadratureRule) -> (f64, f64, f64) {
    let s = if y { 1.0 } else { -1.0 };
    let sd = var.max(0.0).sqrt();
    let (mut ell, mut gm, mut gv_node, mut gv_price) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &w) in quad.nodes.iter().zip(&quad.weights) {
        let z = s * (mean + sd * t);
        let psi = inv_mills(z);
        ell += w * log_norm_cdf(z);
        gm += w * s * psi;
        gv_node += w * s * psi * t;
        gv_price += w * (-psi * (z + psi));
    }
    // differentiate the rule itself; fall back to Price's theorem at sd ≈ 0
    let gv = if sd > 1e-8 { gv_node / (2.0 * sd) } else { 0.5 * gv_price };
    (ell, gm, gv)
}

fn map_log_lik(y: bool, mean: f64) -> (f64, f64) {
    let s = if y { 1.0 } else { -1.0 };
    (log_norm_cdf(s * mean), s * inv_mills(s * mean))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboValue {
    pub value: f64,
    /// scaled data term `(total_n / |batch|) Σ E[log p(y | f)]`
    pub expected_log_lik: f64,
    pub kl: f64,
}

/// Gradient of the ELBO with respect to the batch embeddings and the GP
/// parameters (`encoder` left empty).
#[derive(Debug, Clone)]
pub struct ElboGrad {
    pub x: Matrix,
    pub model: ModelGrad,
}

fn check_batch(x: &Matrix, labels: &[bool], model: &ModelParams) -> Result<()> {
    Error::check_dim("elbo labels", x.rows(), labels.len())?;
    Error::check_dim("elbo embedding dim", model.embed_dim(), x.cols())?;
    if x.rows() == 0 {
        return Err(Error::InvalidArgument("elbo batch is empty".into()));
    }
    Ok(())
}

/// `(total_n/|batch|) Σ_i E_q[log Φ(s_i f_i)] − KL`, `s_i = ±1` from the label.
///
/// In MAP mode the likelihood is evaluated at the marginal mean and the KL
/// keeps only its `Σ`-free terms.
pub fn elbo(x: &Matrix, labels: &[bool], total_n: usize, model: &ModelParams, quad: &QuadratureRule) -> Result<ElboValue> {
    check_batch(x, labels, model)?;
    let pf = prior_factor(&model.variational, &model.kernel, model.jitter)?;
    let kl = kl_from_factor(&pf, &model.variational, model.map_mode)?;
    let mg = marginals(x, model, &pf)?;
    let sum: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            if model.map_mode {
                map_log_lik(y, mg.mean[i]).0
            } else {
                expected_log_lik(y, mg.mean[i], mg.var[i], quad).0
            }
        })
        .sum();
    let c = total_n as f64 / x.rows() as f64;
    Ok(ElboValue {
        value: c * sum - kl,
        expected_log_lik: c * sum,
        kl,
    })
}

pub fn elbo_with_grad(
    x: &Matrix,
    labels: &[bool],
    total_n: usize,
    model: &ModelParams,
    quad: &QuadratureRule,
) -> Result<(ElboValue, ElboGrad)> {
    check_batch(x, labels, model)?;
    let kp = &model.kernel;
    let vs = &model.variational;
    let map = model.map_mode;
    let (n, m) = (x.rows(), vs.n_inducing());
    let pf = prior_factor(vs, kp, model.jitter)?;
    let kl = kl_from_factor(&pf, vs, map)?;
    let mg = marginals(x, model, &pf)?;

    let mut sum = 0.0;
    let mut gm = vec![0.0; n];
    let mut gv = vec![0.0; n];
    for i in 0..n {
        if map {
            let (l, g) = map_log_lik(labels[i], mg.mean[i]);
            sum += l;
            gm[i] = g;
        } else {
            let (l, g1, g2) = expected_log_lik(labels[i], mg.mean[i], mg.var[i], quad);
            sum += l;
            gm[i] = g1;
            gv[i] = g2;
        }
    }
    let c = n_scale(total_n, n);
    let value = ElboValue {
        value: c * sum - kl,
        expected_log_lik: c * sum,
        kl,
    };

    let alpha = &pf.alpha;
    let kinv = cholesky_inverse(&pf.lu)?;
    let l = vs.l_sigma.lower_triangle();
    let a = &mg.a;

    // b_i = K⁻¹Σ a_i, stacked as rows: B = A Σ K⁻¹
    let b = if map {
        Matrix::zeros(n, m)
    } else {
        let sk = l.matmul_t(&l)?.matmul(&kinv)?;
        a.matmul(&sk)?
    };

    let mut g_kfu = Matrix::zeros(n, m);
    for i in 0..n {
        let (ai, bi) = (a.row(i), b.row(i));
        let row = g_kfu.row_mut(i);
        for j in 0..m {
            row[j] = c * (gm[i] * alpha[j] + gv[i] * 2.0 * (bi[j] - ai[j]));
        }
    }

    let mut da = a.clone();
    for i in 0..n {
        let s = gv[i];
        da.row_mut(i).iter_mut().for_each(|v| *v *= s);
    }
    let a_t_gm = a.t_matvec(&gm)?;
    let g_sigma = {
        let mut g = a.t_matmul(&da)?;
        g.scale(c);
        g
    };
    let mut g_kuu = Matrix::zeros(m, m);
    let kinv_l = kinv.matmul(&l)?;
    let s_kinv = kinv_l.matmul_t(&kinv_l)?;
    {
        let adb = da.t_matmul(&b)?;
        for p in 0..m {
            for q in 0..m {
                let data = -a_t_gm[p] * alpha[q] + (adb[(p, q)] + adb[(q, p)]) * -1.0;
                let mut v = c * data + g_sigma[(p, q)];
                let kl_part = if map {
                    kinv[(p, q)] - alpha[p] * alpha[q]
                } else {
                    kinv[(p, q)] - s_kinv[(p, q)] - alpha[p] * alpha[q]
                };
                v -= 0.5 * kl_part;
                g_kuu[(p, q)] = v;
            }
        }
    }

    let mut gx = Matrix::zeros(n, x.cols());
    let mut gz = Matrix::zeros(m, x.cols());
    let k1 = kernel_backward(x, &vs.z, &mg.kfu, &g_kfu, kp, Some(&mut gx), Some(&mut gz));
    let mut gz2 = Matrix::zeros(m, x.cols());
    let k2 = kernel_backward(&vs.z, &vs.z, &pf.kuu, &g_kuu, kp, Some(&mut gz2), None);
    let mut gz3 = Matrix::zeros(m, x.cols());
    // y-side of K_uu: same kernel, gradient seen from the second argument
    kernel_backward(&vs.z, &vs.z, &pf.kuu, &g_kuu, kp, None, Some(&mut gz3));
    gz.add_assign(&gz2)?;
    gz.add_assign(&gz3)?;
    let g_kff: f64 = c * gv.iter().sum::<f64>();

    let mut g_l = Matrix::zeros(m, m);
    if !map {
        let two_gl = g_sigma.matmul(&l)?;
        for i in 0..m {
            for j in 0..=i {
                g_l[(i, j)] = 2.0 * two_gl[(i, j)] - kinv_l[(i, j)];
            }
            g_l[(i, i)] += 1.0 / l[(i, i)];
        }
    }

    let mut g_mu = a_t_gm.clone();
    g_mu.iter_mut().zip(alpha).for_each(|(g, al)| *g = c * *g - al);

    let g_mean = c * (0..n)
        .map(|i| gm[i] * (1.0 - a.row(i).iter().sum::<f64>()))
        .sum::<f64>()
        + alpha.iter().sum::<f64>();

    let grad = ElboGrad {
        x: gx,
        model: ModelGrad {
            encoder: None,
            log_outputscale: k1.log_outputscale + k2.log_outputscale + g_kff * kp.outputscale,
            log_lengthscale: k1.log_lengthscale + k2.log_lengthscale,
            mean_const: g_mean,
            z: gz,
            mu: g_mu,
            l_sigma: g_l,
        },
    };
    Ok((value, grad))
}

fn n_scale(total_n: usize, batch: usize) -> f64 {
    total_n as f64 / batch as f64
}
