use std::path::Path;

use serde::{Deserialize, Serialize};

use super::kernel::KernelParams;
use crate::encoder::{EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, DEFAULT_JITTER};

/// Inducing inputs and the Gaussian `q(u) = N(μ, L Lᵀ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalState {
    /// `M × E`
    pub z: Matrix,
    pub mu: Vec<f64>,
    /// lower triangular, positive diagonal
    pub l_sigma: Matrix,
}

impl VariationalState {
    pub fn n_inducing(&self) -> usize {
        self.z.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.z.rows();
        if m == 0 {
            return Err(Error::InvalidArgument("at least one inducing point is required".into()));
        }
        Error::check_dim("variational mu", m, self.mu.len())?;
        Error::check_dim("variational L rows", m, self.l_sigma.rows())?;
        Error::check_dim("variational L cols", m, self.l_sigma.cols())?;
        Ok(())
    }
}

/// Everything a trained classifier needs for prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `None` means inputs are already embeddings.
    pub encoder: Option<EncoderParams>,
    pub kernel: KernelParams,
    pub variational: VariationalState,
    /// Dirac-delta `q(u)`: `Σ ≡ 0`.
    pub map_mode: bool,
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_jitter() -> f64 {
    DEFAULT_JITTER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// number of inducing points
    pub m: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub quadrature_order: usize,
    pub jitter: f64,
    pub map_mode: bool,
    pub seed: u64,
    /// optimize the inducing inputs; otherwise they stay at their initial embeddings
    pub train_inducing: bool,
    pub encoder: EncoderConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            m: 64,
            batch_size: 256,
            learning_rate: 1e-2,
            epochs: 50,
            quadrature_order: 20,
            jitter: DEFAULT_JITTER,
            map_mode: false,
            seed: 0,
            train_inducing: true,
            encoder: EncoderConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.m == 0 {
            return bad("m must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.quadrature_order < 5 {
            return bad("quadrature_order must be at least 5");
        }
        if !(self.jitter > 0.0) {
            return bad("jitter must be positive");
        }
        if self.encoder.hidden == 0 || self.encoder.embed == 0 {
            return bad("encoder widths must be positive");
        }
        Ok(())
    }
}

/// Gradient of the objective in natural (constrained) coordinates.
#[derive(Debug, Clone)]
pub struct ModelGrad {
    pub encoder: Option<EncoderParams>,
    pub log_outputscale: f64,
    pub log_lengthscale: f64,
    pub mean_const: f64,
    pub z: Matrix,
    pub mu: Vec<f64>,
    /// with respect to the entries of `L_sigma` (lower triangle)
    pub l_sigma: Matrix,
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn softplus_inv(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl ModelParams {
    /// Unconstrained parameter vector: encoder blocks, log outputscale,
    /// log lengthscale, mean, `Z`, `μ`, then the lower triangle of `L`
    /// row by row with softplus-inverse diagonal (omitted in MAP mode).
    pub fn pack(&self) -> Vec<f64> {
        let mut v = Vec::new();
        if let Some(e) = &self.encoder {
            for s in e.slices() {
                v.extend_from_slice(s);
            }
        }
        v.push(self.kernel.outputscale.ln());
        v.push(self.kernel.lengthscale.ln());
        v.push(self.kernel.mean_const);
        v.extend_from_slice(self.variational.z.data());
        v.extend_from_slice(&self.variational.mu);
        if !self.map_mode {
            let l = &self.variational.l_sigma;
            for i in 0..l.rows() {
                for j in 0..i {
                    v.push(l[(i, j)]);
                }
                v.push(softplus_inv(l[(i, i)]));
            }
        }
        v
    }

    /// Inverse of [`ModelParams::pack`]; `self` supplies the shapes.
    pub fn unpack(&mut self, theta: &[f64]) -> Result<()> {
        Error::check_dim("ModelParams::unpack", self.n_params(), theta.len())?;
        let mut off = 0;
        let mut take = |n: usize| {
            let s = &theta[off..off + n];
            off += n;
            s
        };
        if let Some(e) = &mut self.encoder {
            for s in e.slices_mut() {
                let n = s.len();
                s.copy_from_slice(take(n));
            }
        }
        self.kernel.outputscale = take(1)[0].exp();
        self.kernel.lengthscale = take(1)[0].exp();
        self.kernel.mean_const = take(1)[0];
        let nz = self.variational.z.data().len();
        self.variational.z.data_mut().copy_from_slice(take(nz));
        let m = self.variational.mu.len();
        self.variational.mu.copy_from_slice(take(m));
        if !self.map_mode {
            let l = &mut self.variational.l_sigma;
            for i in 0..l.rows() {
                for j in 0..i {
                    l[(i, j)] = take(1)[0];
                }
                l[(i, i)] = softplus(take(1)[0]);
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        let enc = self
            .encoder
            .as_ref()
            .map_or(0, |e| e.slices().iter().map(|s| s.len()).sum());
        let m = self.variational.mu.len();
        let l = if self.map_mode { 0 } else { m * (m + 1) / 2 };
        enc + 3 + self.variational.z.data().len() + m + l
    }

    /// Gradient in the coordinates of [`ModelParams::pack`].
    pub fn pack_grad(&self, g: &ModelGrad) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.n_params());
        if let (Some(_), Some(ge)) = (&self.encoder, &g.encoder) {
            for s in ge.slices() {
                v.extend_from_slice(s);
            }
        }
        v.push(g.log_outputscale);
        v.push(g.log_lengthscale);
        v.push(g.mean_const);
        v.extend_from_slice(g.z.data());
        v.extend_from_slice(&g.mu);
        if !self.map_mode {
            let l = &self.variational.l_sigma;
            for i in 0..l.rows() {
                for j in 0..i {
                    v.push(g.l_sigma[(i, j)]);
                }
                // d softplus(r)/dr = sigmoid(r)
                v.push(g.l_sigma[(i, i)] * sigmoid(softplus_inv(l[(i, i)])));
            }
        }
        v
    }

    pub fn embed_dim(&self) -> usize {
        self.variational.z.cols()
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: ModelParams,
    pub config: TrainConfig,
    /// entity ids used as protein anchors, in anchor-row order
    #[serde(default)]
    pub anchor_ids: Vec<String>,
}

impl Checkpoint {
    pub fn new(model: ModelParams, config: TrainConfig, anchor_ids: Vec<String>) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            model,
            config,
            anchor_ids,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer(std::io::BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(f))?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                ck.version
            )));
        }
        ck.model.variational.validate()?;
        ck.model.kernel.validate()?;
        Ok(ck)
    }
}
