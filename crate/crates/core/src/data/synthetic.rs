//! Synthetic interaction data with known class probabilities.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureStore, InteractionRecord, SparseBits};
use crate::error::{Error, Result};
use crate::linalg::{norm_cdf, Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_compounds: usize,
    pub n_proteins: usize,
    pub compound_dim: usize,
    pub protein_dim: usize,
    /// observed fraction of the compound × protein matrix
    pub sparsity: f64,
    /// probability that a fingerprint bit is set
    pub bit_density: f64,
    pub noise_scale: f64,
    pub heteroscedastic: bool,
    /// noise multiplier for the noisy half of compounds
    pub noise_inflation: f64,
    pub compounds_per_group: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_compounds: 200,
            n_proteins: 10,
            compound_dim: 64,
            protein_dim: 8,
            sparsity: 0.5,
            bit_density: 0.1,
            noise_scale: 0.5,
            heteroscedastic: false,
            noise_inflation: 4.0,
            compounds_per_group: 4,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            self.n_compounds,
            self.n_proteins,
            self.compound_dim,
            self.protein_dim,
            self.compounds_per_group,
        ];
        if counts.contains(&0) {
            return Err(Error::InvalidArgument("synthetic counts must be at least 1".into()));
        }
        for (name, v) in [("sparsity", self.sparsity), ("bit_density", self.bit_density)] {
            if !(v > 0.0 && v < 1.0) && v != 1.0 {
                return Err(Error::InvalidArgument(format!("{name} must lie in (0, 1]")));
            }
        }
        if !(self.noise_scale >= 0.0) || !(self.noise_inflation >= 1.0) {
            return Err(Error::InvalidArgument("noise_scale ≥ 0 and noise_inflation ≥ 1 required".into()));
        }
        Ok(())
    }
}

/// Per-record generating quantities, aligned with the dataset records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// unit-variance bilinear score
    pub latent: Vec<f64>,
    /// noise scale applied to each record
    pub noise: Vec<f64>,
    /// `Φ(latent / noise)`
    pub prob: Vec<f64>,
    pub noisy_compounds: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    pub features: FeatureStore,
    pub truth: GroundTruth,
}

fn probit(latent: f64, noise: f64) -> f64 {
    if noise == 0.0 {
        match latent.partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Greater) => 1.0,
            Some(std::cmp::Ordering::Less) => 0.0,
            _ => 0.5,
        }
    } else {
        norm_cdf(latent / noise)
    }
}

/// Generates fingerprints, protein embeddings and probit-distributed labels.
///
/// Each record's value is `f*/σ + ε` with `ε ~ N(0, 1)`, so binarizing at 0
/// (direction `ge`) yields labels distributed as `Bernoulli(Φ(f*/σ))`; the
/// returned dataset is already binarized that way. Groups are consecutive
/// blocks of `compounds_per_group` compounds.
pub fn synthetic_generate(cfg: &SyntheticConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = SeededRng::new(cfg.seed);
    let cname = |c: usize| format!("C{c:05}");
    let pname = |p: usize| format!("P{p:04}");

    let mut features = FeatureStore {
        compound_dim: cfg.compound_dim,
        protein_dim: cfg.protein_dim,
        compounds: BTreeMap::new(),
        proteins: BTreeMap::new(),
    };
    let mut fps = Vec::with_capacity(cfg.n_compounds);
    for c in 0..cfg.n_compounds {
        let idx: Vec<u32> = (0..cfg.compound_dim as u32).filter(|_| rng.bernoulli(cfg.bit_density)).collect();
        let bits = SparseBits::new(cfg.compound_dim, idx)?;
        features.compounds.insert(cname(c), bits.clone());
        fps.push(bits);
    }
    let mut prots = Vec::with_capacity(cfg.n_proteins);
    for p in 0..cfg.n_proteins {
        let v: Vec<f64> = (0..cfg.protein_dim).map(|_| rng.normal()).collect();
        features.proteins.insert(pname(p), v.clone());
        prots.push(v);
    }

    let mut interaction = Matrix::zeros(cfg.compound_dim, cfg.protein_dim);
    for v in interaction.data_mut() {
        *v = rng.normal();
    }
    // projected protein vectors B·x_p, so the bilinear form is a sparse sum
    let projected: Vec<Vec<f64>> = prots.iter().map(|p| interaction.matvec(p)).collect::<Result<_>>()?;

    let noisy: Vec<bool> = (0..cfg.n_compounds)
        .map(|_| cfg.heteroscedastic && rng.bernoulli(0.5))
        .collect();

    let mut pairs = Vec::new();
    for c in 0..cfg.n_compounds {
        for p in 0..cfg.n_proteins {
            if rng.bernoulli(cfg.sparsity) {
                pairs.push((c, p));
            }
        }
    }
    if pairs.is_empty() {
        pairs.push((0, 0));
    }
    let raw: Vec<f64> = pairs
        .iter()
        .map(|&(c, p)| fps[c].indices.iter().map(|&j| projected[p][j as usize]).sum())
        .collect();
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };

    let mut records = Vec::with_capacity(pairs.len());
    let mut truth = GroundTruth {
        latent: Vec::with_capacity(pairs.len()),
        noise: Vec::with_capacity(pairs.len()),
        prob: Vec::with_capacity(pairs.len()),
        noisy_compounds: (0..cfg.n_compounds).filter(|&c| noisy[c]).map(cname).collect(),
    };
    for (&(c, p), &r) in pairs.iter().zip(&raw) {
        let latent = r / scale;
        let noise = cfg.noise_scale * if noisy[c] { cfg.noise_inflation } else { 1.0 };
        let prob = probit(latent, noise);
        let eps = rng.normal();
        let value = if noise == 0.0 {
            // deterministic sign; ties resolved by the noise draw
            if latent != 0.0 { latent.signum() } else { eps }
        } else {
            latent / noise + eps
        };
        records.push(InteractionRecord {
            compound_id: cname(c),
            protein_id: pname(p),
            value,
            label: Some(value >= 0.0),
            group_id: format!("G{:05}", c / cfg.compounds_per_group),
            fold: None,
        });
        truth.latent.push(latent);
        truth.noise.push(noise);
        truth.prob.push(prob);
    }
    Ok(SyntheticData {
        dataset: Dataset::new(records, 0),
        features,
        truth,
    })
}

/// Points in embedding space with labels.
#[derive(Debug, Clone)]
pub struct EmbeddingSample {
    pub inputs: Matrix,
    pub labels: Vec<bool>,
    /// true `P(y = 1 | x)`
    pub prob: Vec<f64>,
}

/// Standard-normal 2-D points labelled by the sign of `x₀ + x₁`.
pub fn separable_2d(n: usize, rng: &mut SeededRng) -> EmbeddingSample {
    let mut inputs = Matrix::zeros(n, 2);
    let mut labels = Vec::with_capacity(n);
    let mut prob = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = (rng.normal(), rng.normal());
        inputs[(i, 0)] = a;
        inputs[(i, 1)] = b;
        let y = a + b > 0.0;
        labels.push(y);
        prob.push(if y { 1.0 } else { 0.0 });
    }
    EmbeddingSample { inputs, labels, prob }
}

/// A latent function drawn from an approximate RBF-kernel GP prior
/// (random Fourier features), observed through the probit link.
#[derive(Debug, Clone)]
pub struct ProbitGpTask {
    pub dim: usize,
    pub mean: f64,
    frequencies: Matrix,
    phases: Vec<f64>,
    amplitudes: Vec<f64>,
    scale: f64,
}

impl ProbitGpTask {
    pub fn new(dim: usize, lengthscale: f64, outputscale: f64, mean: f64, n_features: usize, rng: &mut SeededRng) -> Self {
        let mut frequencies = Matrix::zeros(n_features, dim);
        for v in frequencies.data_mut() {
            *v = rng.normal() / lengthscale;
        }
        let phases = (0..n_features).map(|_| rng.uniform() * std::f64::consts::TAU).collect();
        let amplitudes = (0..n_features).map(|_| rng.normal()).collect();
        Self {
            dim,
            mean,
            frequencies,
            phases,
            amplitudes,
            scale: (2.0 * outputscale / n_features as f64).sqrt(),
        }
    }

    pub fn latent(&self, x: &[f64]) -> f64 {
        let s: f64 = (0..self.frequencies.rows())
            .map(|k| {
                let arg = crate::linalg::dot(self.frequencies.row(k), x) + self.phases[k];
                self.amplitudes[k] * arg.cos()
            })
            .sum();
        self.mean + self.scale * s
    }

    /// Inputs uniform on `[-2, 2]^dim`, labels `Bernoulli(Φ(f(x)))`.
    pub fn draw(&self, n: usize, rng: &mut SeededRng) -> EmbeddingSample {
        let mut inputs = Matrix::zeros(n, self.dim);
        let mut labels = Vec::with_capacity(n);
        let mut prob = Vec::with_capacity(n);
        for i in 0..n {
            for v in inputs.row_mut(i) {
                *v = 4.0 * rng.uniform() - 2.0;
            }
            let p = norm_cdf(self.latent(inputs.row(i)));
            labels.push(rng.bernoulli(p));
            prob.push(p);
        }
        EmbeddingSample { inputs, labels, prob }
    }
}
