use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Reproducible random stream backed by ChaCha20.
///
/// The same seed and call sequence yields the same stream on every platform.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha20Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, keyed by `stream`.
    pub fn fork(&self, stream: u64) -> SeededRng {
        let mut inner = ChaCha20Rng::seed_from_u64(self.seed);
        inner.set_stream(stream.wrapping_add(1));
        Self {
            seed: self.seed,
            inner,
        }
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        use rand::seq::SliceRandom;
        items.shuffle(&mut self.inner);
    }

    /// `k` distinct indices from `0..n`, in draw order.
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        rand::seq::index::sample(&mut self.inner, n, k.min(n)).into_vec()
    }
}

/// Draws `n` rows `mean + L·z` with `z` standard normal.
pub fn mvn_sample(mean: &[f64], cov_chol: &Matrix, n: usize, rng: &mut SeededRng) -> Result<Matrix> {
    let dim = mean.len();
    Error::check_dim("mvn_sample rows", dim, cov_chol.rows())?;
    Error::check_dim("mvn_sample cols", dim, cov_chol.cols())?;
    let mut out = Matrix::zeros(n, dim);
    let mut z = vec![0.0; dim];
    for s in 0..n {
        z.iter_mut().for_each(|v| *v = rng.normal());
        let row = out.row_mut(s);
        for i in 0..dim {
            let li = &cov_chol.row(i)[..=i];
            row[i] = mean[i] + li.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        }
    }
    Ok(out)
}
