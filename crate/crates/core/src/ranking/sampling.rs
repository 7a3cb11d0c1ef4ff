use crate::error::{Error, Result};
use crate::linalg::{cholesky_escalating, Matrix, SeededRng};
use crate::svgp::{Covariance, PredictiveDistribution};

/// Relative diagonal jitter before the joint factorization.
pub const SAMPLING_JITTER: f64 = 1e-10;
const JITTER_RETRIES: usize = 6;

/// `S × N*` latent draws from a predictive distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveSamples {
    pub values: Matrix,
    pub seed: u64,
    pub joint: bool,
}

impl PredictiveSamples {
    pub fn n_samples(&self) -> usize {
        self.values.rows()
    }

    pub fn n_items(&self) -> usize {
        self.values.cols()
    }

    /// Item-major copy: row `i` holds the draws of item `i`.
    pub fn by_item(&self) -> Matrix {
        self.values.transpose()
    }
}

/// Factor of a PSD covariance; items with zero variance get a zero row.
fn psd_factor(cov: &Matrix) -> Result<Matrix> {
    let n = cov.rows();
    let active: Vec<usize> = (0..n).filter(|&i| cov[(i, i)] > 0.0).collect();
    let mut l = Matrix::zeros(n, n);
    if active.is_empty() {
        return Ok(l);
    }
    let mut sub = Matrix::zeros(active.len(), active.len());
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate() {
            sub[(a, b)] = cov[(i, j)];
        }
    }
    let scale = sub.trace() / active.len() as f64;
    let ls = cholesky_escalating(&sub, SAMPLING_JITTER * scale, JITTER_RETRIES)?;
    for (a, &i) in active.iter().enumerate() {
        for (b, &j) in active.iter().enumerate().take(a + 1) {
            l[(i, j)] = ls[(a, b)];
        }
    }
    Ok(l)
}

/// Draws `s` latent vectors, jointly through the Cholesky factor of the full
/// covariance or independently per marginal.
pub fn sample_predictive(
    dist: &PredictiveDistribution,
    s: usize,
    joint: bool,
    rng: &mut SeededRng,
) -> Result<PredictiveSamples> {
    if s == 0 {
        return Err(Error::InvalidArgument("at least one sample is required".into()));
    }
    let n = dist.len();
    Error::check_dim("sample_predictive cov", n, dist.cov.len())?;
    let mut values = Matrix::zeros(s, n);
    if joint {
        let Covariance::Full(cov) = &dist.cov else {
            return Err(Error::InvalidArgument("joint sampling needs the full covariance".into()));
        };
        let l = psd_factor(cov)?;
        let nz: Vec<Vec<(usize, f64)>> = (0..n)
            .map(|i| (0..=i).filter(|&j| l[(i, j)] != 0.0).map(|j| (j, l[(i, j)])).collect())
            .collect();
        let mut z = vec![0.0; n];
        for r in 0..s {
            z.iter_mut().for_each(|v| *v = rng.normal());
            let row = values.row_mut(r);
            for i in 0..n {
                row[i] = dist.mean[i] + nz[i].iter().map(|&(j, v)| v * z[j]).sum::<f64>();
            }
        }
    } else {
        let sd: Vec<f64> = dist.variance().iter().map(|v| v.max(0.0).sqrt()).collect();
        for r in 0..s {
            let row = values.row_mut(r);
            for i in 0..n {
                row[i] = dist.mean[i] + sd[i] * rng.normal();
            }
        }
    }
    Ok(PredictiveSamples {
        values,
        seed: rng.seed(),
        joint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cholesky;

    fn dist(mean: Vec<f64>, cov: Matrix) -> PredictiveDistribution {
        PredictiveDistribution {
            class_prob: vec![0.5; mean.len()],
            mean,
            cov: Covariance::Full(cov),
            class_prob_std: None,
            map_mode: false,
        }
    }

    #[test]
    fn zero_covariance_rows_equal_mean() {
        let d = dist(vec![0.3, -1.0, 2.0], Matrix::zeros(3, 3));
        for joint in [true, false] {
            let ps = sample_predictive(&d, 20, joint, &mut SeededRng::new(0)).unwrap();
            for r in 0..20 {
                assert_eq!(ps.values.row(r), &d.mean[..]);
            }
        }
    }

    #[test]
    fn marginal_variances_converge() {
        let cov = Matrix::from_rows(&[[1.0, 0.5, 0.0], [0.5, 2.0, -0.3], [0.0, -0.3, 0.25]]).unwrap();
        let d = dist(vec![0.0, 1.0, -1.0], cov.clone());
        let s = 100_000;
        for joint in [true, false] {
            let ps = sample_predictive(&d, s, joint, &mut SeededRng::new(1)).unwrap();
            let items = ps.by_item();
            for i in 0..3 {
                let x = items.row(i);
                let m = x.iter().sum::<f64>() / s as f64;
                let v = x.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / (s - 1) as f64;
                // var of the sample variance for a normal: 2σ⁴/(S−1)
                let se = (2.0 * cov[(i, i)].powi(2) / (s - 1) as f64).sqrt();
                assert!((v - cov[(i, i)]).abs() < 5.0 * se, "joint={joint} item {i}: {v}");
            }
        }
    }

    #[test]
    fn joint_draws_carry_correlation() {
        let cov = Matrix::from_rows(&[[1.0, 0.9], [0.9, 1.0]]).unwrap();
        let d = dist(vec![0.0, 0.0], cov);
        let ps = sample_predictive(&d, 20_000, true, &mut SeededRng::new(2)).unwrap();
        let c: f64 = (0..20_000).map(|r| ps.values[(r, 0)] * ps.values[(r, 1)]).sum::<f64>() / 20_000.0;
        assert!((c - 0.9).abs() < 0.05, "{c}");
    }

    #[test]
    fn reproducible_per_seed() {
        let l = cholesky(&Matrix::from_rows(&[[2.0, 0.3], [0.3, 1.0]]).unwrap(), 0.0).unwrap();
        let cov = l.matmul_t(&l).unwrap();
        let d = dist(vec![1.0, 2.0], cov);
        let a = sample_predictive(&d, 50, true, &mut SeededRng::new(3)).unwrap();
        let b = sample_predictive(&d, 50, true, &mut SeededRng::new(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn joint_needs_full_covariance() {
        let d = PredictiveDistribution {
            mean: vec![0.0],
            cov: Covariance::Diagonal(vec![1.0]),
            class_prob: vec![0.5],
            class_prob_std: None,
            map_mode: false,
        };
        assert!(sample_predictive(&d, 1, true, &mut SeededRng::new(0)).is_err());
        assert!(sample_predictive(&d, 1, false, &mut SeededRng::new(0)).is_ok());
        assert!(sample_predictive(&d, 0, false, &mut SeededRng::new(0)).is_err());
    }
}
