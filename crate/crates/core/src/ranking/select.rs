use serde::{Deserialize, Serialize};

use super::precedence::PrecedenceMatrix;
use crate::error::{Error, Result};
use crate::linalg::power_iteration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Score,
    Eigen,
    BayesMean,
    MapMean,
}

impl SelectionMethod {
    pub fn name(self) -> &'static str {
        match self {
            SelectionMethod::Score => "score",
            SelectionMethod::Eigen => "eigen",
            SelectionMethod::BayesMean => "bayes_mean",
            SelectionMethod::MapMean => "map_mean",
        }
    }
}

impl std::str::FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(SelectionMethod::Score),
            "eigen" => Ok(SelectionMethod::Eigen),
            "bayes_mean" => Ok(SelectionMethod::BayesMean),
            "map_mean" => Ok(SelectionMethod::MapMean),
            other => Err(Error::InvalidArgument(format!("unknown selection method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub method: SelectionMethod,
    pub k: usize,
    /// selected items, best first
    pub indices: Vec<usize>,
    /// score of every item
    pub scores: Vec<f64>,
    /// per posterior sample FDR, filled by [`super::fdr_posterior`]
    pub fdr_samples: Vec<f64>,
}

/// Indices of the `k` largest scores, descending, ties by ascending index.
pub fn top_k(scores: &[f64], k: usize) -> Result<Vec<usize>> {
    let n = scores.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx.truncate(k);
    Ok(idx)
}

fn result(method: SelectionMethod, k: usize, scores: Vec<f64>) -> Result<SelectionResult> {
    let indices = top_k(&scores, k)?;
    Ok(SelectionResult {
        method,
        k,
        indices,
        scores,
        fdr_samples: Vec::new(),
    })
}

/// Row means of `P`, diagonal included.
pub fn score_select(p: &PrecedenceMatrix, k: usize) -> Result<SelectionResult> {
    let n = p.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let m = p.matrix();
    let scores = (0..n).map(|i| m.row(i).iter().sum::<f64>() / n as f64).collect();
    result(SelectionMethod::Score, k, scores)
}

/// Components of the Perron vector of `P + ε·11ᵀ`.
pub fn eigen_select(p: &PrecedenceMatrix, k: usize, tol: f64, max_iter: usize) -> Result<SelectionResult> {
    let n = p.len();
    if k == 0 || k > n {
        return Err(Error::KOutOfRange { k, n });
    }
    let (v, _) = power_iteration(p.matrix(), tol, max_iter)?;
    result(SelectionMethod::Eigen, k, v)
}

/// Top-K of point class probabilities: `bayes_mean` for the posterior
/// predictive mean, `map_mean` for a MAP model's `Φ(mean)`.
pub fn mean_select(class_prob: &[f64], k: usize, method: SelectionMethod) -> Result<SelectionResult> {
    if !matches!(method, SelectionMethod::BayesMean | SelectionMethod::MapMean) {
        return Err(Error::InvalidArgument(format!("{} does not select by mean", method.name())));
    }
    result(method, k, class_prob.to_vec())
}
