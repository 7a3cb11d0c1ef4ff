use super::elbo::{marginals, prior_factor};
use super::model::ModelParams;
use super::train::{embed, Inputs};
use crate::error::Result;
use crate::linalg::{norm_cdf, symmetrize, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceKind {
    Full,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Full(Matrix),
    Diagonal(Vec<f64>),
}

impl Covariance {
    pub fn diag(&self) -> Vec<f64> {
        match self {
            Covariance::Full(m) => m.diag(),
            Covariance::Diagonal(d) => d.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Covariance::Full(m) => m.rows(),
            Covariance::Diagonal(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDistribution {
    pub mean: Vec<f64>,
    pub cov: Covariance,
    pub class_prob: Vec<f64>,
    /// filled by sampling; see the ranking module
    pub class_prob_std: Option<Vec<f64>>,
    pub map_mode: bool,
}

impl PredictiveDistribution {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn variance(&self) -> Vec<f64> {
        self.cov.diag()
    }
}

/// `Φ(mean / √(1 + var))`, the probit-marginal class probability.
pub fn class_probability(mean: f64, var: f64) -> f64 {
    norm_cdf(mean / (1.0 + var.max(0.0)).sqrt())
}

/// Predictive distribution at embedding rows `x_star`.
///
/// `cov = K** − A K_uf + A Σ Aᵀ`, `A = K_*u K_uu⁻¹`; in MAP mode `Σ = 0` and
/// class probabilities are `Φ(mean)`.
pub fn predict_embeddings(x_star: &Matrix, model: &ModelParams, kind: CovarianceKind) -> Result<PredictiveDistribution> {
    let pf = prior_factor(&model.variational, &model.kernel, model.jitter)?;
    let mg = marginals(x_star, model, &pf)?;
    let var: Vec<f64> = mg.var.iter().map(|v| v.max(0.0)).collect();
    let cov = match kind {
        CovarianceKind::Diagonal => Covariance::Diagonal(var.clone()),
        CovarianceKind::Full => {
            let mut k = super::kernel::kernel_matrix(x_star, x_star, &model.kernel)?;
            let akf = mg.a.matmul_t(&mg.kfu)?;
            k = k.sub(&akf)?;
            if !model.map_mode {
                let al = mg.a.matmul(&model.variational.l_sigma.lower_triangle())?;
                k.add_assign(&al.matmul_t(&al)?)?;
            }
            symmetrize(&mut k);
            for (i, v) in var.iter().enumerate() {
                k[(i, i)] = *v;
            }
            Covariance::Full(k)
        }
    };
    let class_prob = mg
        .mean
        .iter()
        .zip(&var)
        .map(|(&m, &v)| if model.map_mode { norm_cdf(m) } else { class_probability(m, v) })
        .collect();
    Ok(PredictiveDistribution {
        mean: mg.mean,
        cov,
        class_prob,
        class_prob_std: None,
        map_mode: model.map_mode,
    })
}

/// Embeds `inputs` with the model's encoder, then predicts.
pub fn predict(inputs: Inputs<'_>, model: &ModelParams, kind: CovarianceKind) -> Result<PredictiveDistribution> {
    let x = embed(model, inputs)?;
    predict_embeddings(&x, model, kind)
}
