use rayon::prelude::*;

use super::sampling::PredictiveSamples;
use crate::error::{Error, Result};
use crate::linalg::{norm_cdf, Matrix};
use crate::svgp::{Covariance, PredictiveDistribution};

/// Below this the difference `f_i − f_j` is treated as deterministic.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

/// `P_ij = p(f_i > f_j)`; `P + Pᵀ = 1` and the diagonal is ½.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecedenceMatrix {
    p: Matrix,
}

impl PrecedenceMatrix {
    /// Wraps `p` after checking the tournament identities exactly.
    pub fn from_matrix(p: Matrix) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::DimensionMismatch {
                context: "PrecedenceMatrix",
                expected: p.rows(),
                found: p.cols(),
            });
        }
        let n = p.rows();
        for i in 0..n {
            if p[(i, i)] != 0.5 {
                return Err(Error::InvalidArgument(format!("diagonal entry {i} is not 0.5")));
            }
            for j in (i + 1)..n {
                let v = p[(i, j)];
                if !(0.0..=1.0).contains(&v) || v + p[(j, i)] != 1.0 {
                    return Err(Error::InvalidArgument(format!("entries ({i},{j}) do not sum to one")));
                }
            }
        }
        Ok(Self { p })
    }

    /// Fills the upper triangle from `upper(i, j)` and mirrors it.
    fn build(n: usize, upper: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| ((i + 1)..n).map(|j| upper(i, j)).collect())
            .collect();
        let mut p = Matrix::filled(n, n, 0.5);
        for (i, row) in rows.into_iter().enumerate() {
            for (k, v) in row.into_iter().enumerate() {
                let j = i + 1 + k;
                // store the larger side as 1 − smaller: exact when the smaller is ≤ ½
                if v <= 0.5 {
                    p[(i, j)] = v;
                    p[(j, i)] = 1.0 - v;
                } else {
                    p[(j, i)] = 1.0 - v;
                    p[(i, j)] = 1.0 - p[(j, i)];
                }
            }
        }
        Self { p }
    }

    pub fn len(&self) -> usize {
        self.p.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.p.rows() == 0
    }

    pub fn matrix(&self) -> &Matrix {
        &self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }
}

/// Empirical exceedance frequencies; ties count one half.
pub fn precedence_from_samples(ps: &PredictiveSamples) -> PrecedenceMatrix {
    let items = ps.by_item();
    let s = ps.n_samples() as f64;
    PrecedenceMatrix::build(ps.n_items(), |i, j| {
        let (a, b) = (items.row(i), items.row(j));
        let mut wins = 0u64;
        let mut ties = 0u64;
        for (x, y) in a.iter().zip(b) {
            if x > y {
                wins += 1;
            } else if x == y {
                ties += 1;
            }
        }
        (wins as f64 + 0.5 * ties as f64) / s
    })
}

/// Gaussian exceedance `Φ((μ_i − μ_j) / √(σ_ii + σ_jj − 2σ_ij))`.
pub fn precedence_analytic(dist: &PredictiveDistribution) -> PrecedenceMatrix {
    let var = dist.variance();
    let mean = &dist.mean;
    let cov = match &dist.cov {
        Covariance::Full(c) => Some(c),
        Covariance::Diagonal(_) => None,
    };
    PrecedenceMatrix::build(dist.len(), |i, j| {
        let cij = cov.map_or(0.0, |c| c[(i, j)]);
        let d = var[i] + var[j] - 2.0 * cij;
        let diff = mean[i] - mean[j];
        if d < DEGENERATE_VARIANCE {
            if diff > 0.0 {
                1.0
            } else if diff < 0.0 {
                0.0
            } else {
                0.5
            }
        } else {
            norm_cdf(diff / d.sqrt())
        }
    })
}
