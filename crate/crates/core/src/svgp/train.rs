use std::collections::BTreeSet;
use std::path::Path;

use super::elbo::{elbo, elbo_with_grad};
use super::kernel::{kernel_matrix, KernelParams};
use super::model::{ModelParams, TrainConfig, VariationalState};
use crate::data::{Dataset, FeatureStore};
use crate::encoder::{backward_pairs, embed_pairs, EncoderParams, PairCache, PairIndex};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, gauss_hermite, norm_quantile, squared_distance, Matrix, QuadratureRule, SeededRng};

/// Training inputs: fixed embeddings, or pairs that go through the encoder.
#[derive(Debug, Clone, Copy)]
pub enum Inputs<'a> {
    Embeddings(&'a Matrix),
    Pairs(&'a PairIndex),
}

impl Inputs<'_> {
    pub fn len(&self) -> usize {
        match self {
            Inputs::Embeddings(x) => x.rows(),
            Inputs::Pairs(p) => p.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Full-data ELBO after each epoch; entry 0 is the initialization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainTrace {
    pub points: Vec<(usize, f64)>,
}

impl TrainTrace {
    pub fn initial(&self) -> Option<f64> {
        self.points.first().map(|p| p.1)
    }

    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|p| p.1)
    }
}

pub fn write_trace(path: &Path, trace: &TrainTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "elbo"])?;
    for (e, v) in &trace.points {
        w.write_record([e.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub(crate) fn embed_rows(model: &ModelParams, inputs: Inputs<'_>, idx: &[usize]) -> Result<(Matrix, Option<PairCache>)> {
    match inputs {
        Inputs::Embeddings(x) => {
            Error::check_dim("embedding dim", model.embed_dim(), x.cols())?;
            Ok((x.select_rows(idx), None))
        }
        Inputs::Pairs(index) => {
            let enc = model
                .encoder
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("pair inputs need a model with an encoder".into()))?;
            let (x, cache) = embed_pairs(enc, index, idx)?;
            Ok((x, Some(cache)))
        }
    }
}

/// Embeddings of every input row.
pub fn embed(model: &ModelParams, inputs: Inputs<'_>) -> Result<Matrix> {
    let idx: Vec<usize> = (0..inputs.len()).collect();
    Ok(embed_rows(model, inputs, &idx)?.0)
}

const EVAL_CHUNK: usize = 4096;

/// ELBO over the whole training set (scaling factor one).
pub fn full_elbo(model: &ModelParams, inputs: Inputs<'_>, labels: &[bool], quad: &QuadratureRule) -> Result<f64> {
    Error::check_dim("full_elbo labels", inputs.len(), labels.len())?;
    let n = inputs.len();
    let mut data = 0.0;
    let mut kl = 0.0;
    let mut start = 0;
    while start < n {
        let end = (start + EVAL_CHUNK).min(n);
        let idx: Vec<usize> = (start..end).collect();
        let (x, _) = embed_rows(model, inputs, &idx)?;
        let v = elbo(&x, &labels[start..end], end - start, model, quad)?;
        data += v.expected_log_lik;
        kl = v.kl;
        start = end;
    }
    Ok(data - kl)
}

fn median_distance(z: &Matrix) -> f64 {
    let mut d = Vec::new();
    for i in 0..z.rows() {
        for j in (i + 1)..z.rows() {
            d.push(squared_distance(z.row(i), z.row(j)).sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let med = d[d.len() / 2];
    if med > 1e-8 {
        med
    } else {
        1.0
    }
}

/// Initial model: inducing inputs at the embeddings of a seeded random
/// subset, lengthscale at their median distance, mean at the probit of the
/// prevalence and `q(u)` equal to the prior.
pub fn init_model(
    inputs: Inputs<'_>,
    labels: &[bool],
    cfg: &TrainConfig,
    encoder: Option<EncoderParams>,
) -> Result<ModelParams> {
    cfg.validate()?;
    let n = inputs.len();
    if n == 0 {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    Error::check_dim("init labels", n, labels.len())?;
    let mut rng = SeededRng::new(cfg.seed).fork(1);
    let m = cfg.m.min(n);
    let idx = rng.sample_indices(n, m);
    let dim = match (&encoder, inputs) {
        (Some(e), _) => e.embed_dim(),
        (None, Inputs::Embeddings(x)) => x.cols(),
        (None, Inputs::Pairs(_)) => {
            return Err(Error::InvalidArgument("pair inputs need an encoder".into()));
        }
    };
    let mut model = ModelParams {
        encoder,
        kernel: KernelParams::default(),
        variational: VariationalState {
            z: Matrix::zeros(m, dim),
            mu: vec![0.0; m],
            l_sigma: Matrix::zeros(m, m),
        },
        map_mode: cfg.map_mode,
        jitter: cfg.jitter,
    };
    let (z, _) = embed_rows(&model, inputs, &idx)?;
    let prevalence = labels.iter().filter(|&&y| y).count() as f64 / n as f64;
    model.kernel = KernelParams {
        outputscale: 1.0,
        lengthscale: median_distance(&z),
        mean_const: norm_quantile(prevalence.clamp(0.01, 0.99)),
    };
    model.variational.mu = vec![model.kernel.mean_const; m];
    if !cfg.map_mode {
        let kuu = kernel_matrix(&z, &z, &model.kernel)?;
        model.variational.l_sigma = cholesky(&kuu, cfg.jitter)?;
    }
    model.variational.z = z;
    Ok(model)
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    lr: f64,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            lr,
        }
    }

    /// Ascent step on `theta` along `grad`.
    fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for k in 0..theta.len() {
            let g = grad[k];
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * g;
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * g * g;
            let mh = self.m[k] / c1;
            let vh = self.v[k] / c2;
            theta[k] += self.lr * mh / (vh.sqrt() + Self::EPS);
        }
    }
}

/// Minibatch ELBO at rows `idx` and its gradient in the coordinates of
/// [`ModelParams::pack`], back-propagated through the encoder for pair inputs.
pub fn objective_with_grad(
    model: &ModelParams,
    inputs: Inputs<'_>,
    labels: &[bool],
    idx: &[usize],
    total_n: usize,
    quad: &QuadratureRule,
    train_inducing: bool,
) -> Result<(f64, Vec<f64>)> {
    let (x, cache) = embed_rows(model, inputs, idx)?;
    let y: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
    let (value, mut g) = elbo_with_grad(&x, &y, total_n, model, quad)?;
    if let (Inputs::Pairs(index), Some(cache), Some(enc)) = (inputs, &cache, &model.encoder) {
        let mut ge = enc.zeros_like();
        backward_pairs(enc, index, cache, &g.x, &mut ge)?;
        g.model.encoder = Some(ge);
    }
    if !train_inducing {
        g.model.z.scale(0.0);
    }
    Ok((value.value, model.pack_grad(&g.model)))
}

/// Runs Adam on all parameters of `model` from its current values.
pub fn fit(
    mut model: ModelParams,
    inputs: Inputs<'_>,
    labels: &[bool],
    cfg: &TrainConfig,
) -> Result<(ModelParams, TrainTrace)> {
    cfg.validate()?;
    let n = inputs.len();
    Error::check_dim("fit labels", n, labels.len())?;
    if n == 0 {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let quad = gauss_hermite(cfg.quadrature_order);
    let mut trace = TrainTrace::default();
    let initial = full_elbo(&model, inputs, labels, &quad)?;
    if !initial.is_finite() {
        return Err(Error::NoProgress {
            epoch: 0,
            step: 0,
            value: initial,
        });
    }
    trace.points.push((0, initial));
    if cfg.epochs == 0 {
        return Ok((model, trace));
    }

    let mut theta = model.pack();
    let mut adam = Adam::new(theta.len(), cfg.learning_rate);
    let mut rng = SeededRng::new(cfg.seed).fork(2);
    let mut order: Vec<usize> = (0..n).collect();
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let (value, grad) = objective_with_grad(&model, inputs, labels, batch, n, &quad, cfg.train_inducing)?;
            if !value.is_finite() {
                return Err(Error::NoProgress { epoch, step, value });
            }
            if let Some(bad) = grad.iter().find(|v| !v.is_finite()) {
                return Err(Error::NoProgress { epoch, step, value: *bad });
            }
            adam.step(&mut theta, &grad);
            model.unpack(&theta)?;
        }
        let v = full_elbo(&model, inputs, labels, &quad)?;
        if !v.is_finite() {
            return Err(Error::NoProgress { epoch, step, value: v });
        }
        trace.points.push((epoch, v));
    }
    Ok((model, trace))
}

/// Training proteins sorted by id, optionally thinned to a seeded subset.
pub fn anchor_ids(ds: &Dataset, max_anchors: Option<usize>, seed: u64) -> Vec<String> {
    let all: Vec<String> = ds
        .records
        .iter()
        .map(|r| r.protein_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    match max_anchors {
        Some(k) if k < all.len() => {
            let mut rng = SeededRng::new(seed).fork(3);
            let mut idx = rng.sample_indices(all.len(), k.max(1));
            idx.sort_unstable();
            idx.into_iter().map(|i| all[i].clone()).collect()
        }
        _ => all,
    }
}

/// Trains encoder and SVGP on a labelled dataset.
pub fn train(ds: &Dataset, fs: &FeatureStore, cfg: &TrainConfig) -> Result<(ModelParams, TrainTrace)> {
    cfg.validate()?;
    if ds.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let labels = ds.labels()?;
    fs.check_covers(ds)?;
    let index = PairIndex::new(ds, fs)?;
    let ids = anchor_ids(ds, cfg.encoder.max_anchors, cfg.seed);
    let rows: Vec<&[f64]> = ids.iter().map(|id| fs.protein(id)).collect::<Result<_>>()?;
    let anchors = Matrix::from_rows(&rows)?;
    let mut rng = SeededRng::new(cfg.seed).fork(0);
    let enc = EncoderParams::init(&cfg.encoder, fs.compound_dim, anchors, fs.mean_bits(), &mut rng)?;
    let model = init_model(Inputs::Pairs(&index), &labels, cfg, Some(enc))?;
    fit(model, Inputs::Pairs(&index), &labels, cfg)
}

/// Initializes and trains on fixed embeddings.
pub fn train_embeddings(x: &Matrix, labels: &[bool], cfg: &TrainConfig) -> Result<(ModelParams, TrainTrace)> {
    let model = init_model(Inputs::Embeddings(x), labels, cfg, None)?;
    fit(model, Inputs::Embeddings(x), labels, cfg)
}
