//! Pairwise embedding: one-hidden-layer compound network times an
//! RBF-similarity protein network, combined by elementwise product.
//!
//! Gradients are hand-written reverse passes for this fixed architecture.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureStore, SparseBits};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, squared_distance, Matrix, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    /// hidden width of the compound network
    pub hidden: usize,
    /// shared embedding width of both paths
    pub embed: usize,
    /// cap on protein anchors; `None` keeps every training protein
    pub max_anchors: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden: 32,
            embed: 16,
            max_anchors: None,
        }
    }
}

impl EncoderConfig {
    /// Widths used for full-size fingerprints and protein embeddings.
    pub fn full_scale() -> Self {
        Self {
            hidden: 512,
            embed: 512,
            max_anchors: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams {
    /// `H × D_c`
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `E × H`
    pub w2: Matrix,
    pub b2: Vec<f64>,
    /// `M_a × D_p`
    pub anchors: Matrix,
    pub log_lengthscale_sim: f64,
    /// `E × M_a`
    pub wp: Matrix,
    pub bp: Vec<f64>,
}

/// Combined embedding `e_mol ⊙ e_prot`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairEmbedding(pub Vec<f64>);

/// Forward values kept for the compound backward pass.
#[derive(Debug, Clone)]
pub struct CompoundActivations {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

impl EncoderParams {
    pub fn hidden(&self) -> usize {
        self.w1.rows()
    }
    pub fn embed_dim(&self) -> usize {
        self.w2.rows()
    }
    pub fn compound_dim(&self) -> usize {
        self.w1.cols()
    }
    pub fn protein_dim(&self) -> usize {
        self.anchors.cols()
    }
    pub fn n_anchors(&self) -> usize {
        self.anchors.rows()
    }
    pub fn lengthscale_sim(&self) -> f64 {
        self.log_lengthscale_sim.exp()
    }

    /// Random initialization with `anchors` rows as the protein similarity
    /// anchors. `mean_bits` scales the first layer to the fingerprint density.
    pub fn init(
        cfg: &EncoderConfig,
        compound_dim: usize,
        anchors: Matrix,
        mean_bits: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let (h, e, ma) = (cfg.hidden, cfg.embed, anchors.rows());
        if h == 0 || e == 0 || ma == 0 || compound_dim == 0 {
            return Err(Error::InvalidArgument("encoder dimensions must be positive".into()));
        }
        let gaussian = |rows: usize, cols: usize, sd: f64, rng: &mut SeededRng| {
            let mut m = Matrix::zeros(rows, cols);
            m.data_mut().iter_mut().for_each(|v| *v = sd * rng.normal());
            m
        };
        let w1 = gaussian(h, compound_dim, 1.0 / mean_bits.max(1.0).sqrt(), rng);
        let w2 = gaussian(e, h, 1.0 / (h as f64).sqrt(), rng);
        let wp = gaussian(e, ma, 0.5 / (ma as f64).sqrt(), rng);
        // similarity scale from the anchor spread
        let mut d2 = Vec::new();
        for i in 0..ma {
            for j in (i + 1)..ma {
                d2.push(squared_distance(anchors.row(i), anchors.row(j)));
            }
        }
        let ls = if d2.is_empty() {
            1.0
        } else {
            d2.sort_by(f64::total_cmp);
            d2[d2.len() / 2].sqrt().max(1e-3)
        };
        Ok(Self {
            w1,
            b1: vec![0.0; h],
            w2,
            b2: vec![0.0; e],
            anchors,
            log_lengthscale_sim: ls.ln(),
            wp,
            // protein path starts near the multiplicative identity
            bp: vec![1.0; e],
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w1: Matrix::zeros(self.w1.rows(), self.w1.cols()),
            b1: vec![0.0; self.b1.len()],
            w2: Matrix::zeros(self.w2.rows(), self.w2.cols()),
            b2: vec![0.0; self.b2.len()],
            anchors: Matrix::zeros(self.anchors.rows(), self.anchors.cols()),
            log_lengthscale_sim: 0.0,
            wp: Matrix::zeros(self.wp.rows(), self.wp.cols()),
            bp: vec![0.0; self.bp.len()],
        }
    }

    /// Parameter blocks in a fixed order.
    pub fn slices(&self) -> Vec<&[f64]> {
        vec![
            self.w1.data(),
            &self.b1,
            self.w2.data(),
            &self.b2,
            self.anchors.data(),
            std::slice::from_ref(&self.log_lengthscale_sim),
            self.wp.data(),
            &self.bp,
        ]
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.data_mut(),
            &mut self.b1,
            self.w2.data_mut(),
            &mut self.b2,
            self.anchors.data_mut(),
            std::slice::from_mut(&mut self.log_lengthscale_sim),
            self.wp.data_mut(),
            &mut self.bp,
        ]
    }
}

pub fn compound_forward(x: &SparseBits, p: &EncoderParams) -> Result<CompoundActivations> {
    Error::check_dim("encode_compound", p.compound_dim(), x.dim)?;
    let h_dim = p.hidden();
    let d_c = p.compound_dim();
    let w1 = p.w1.data();
    let hidden: Vec<f64> = (0..h_dim)
        .map(|h| {
            let row = &w1[h * d_c..(h + 1) * d_c];
            let pre = p.b1[h] + x.indices.iter().map(|&j| row[j as usize]).sum::<f64>();
            pre.tanh()
        })
        .collect();
    let mut output = p.w2.matvec(&hidden)?;
    axpy(1.0, &p.b2, &mut output);
    Ok(CompoundActivations { hidden, output })
}

/// `W2·tanh(W1·x + b1) + b2`, touching only the set-bit columns of `W1`.
pub fn encode_compound(x: &SparseBits, p: &EncoderParams) -> Result<Vec<f64>> {
    Ok(compound_forward(x, p)?.output)
}

/// Accumulates `∂L/∂θ` of the compound path into `grad` given `∂L/∂e_mol`.
pub fn compound_backward(
    x: &SparseBits,
    acts: &CompoundActivations,
    grad_out: &[f64],
    p: &EncoderParams,
    grad: &mut EncoderParams,
) -> Result<()> {
    Error::check_dim("compound_backward", p.embed_dim(), grad_out.len())?;
    let h_dim = p.hidden();
    for (e, &g) in grad_out.iter().enumerate() {
        grad.b2[e] += g;
        axpy(g, &acts.hidden, grad.w2.row_mut(e));
    }
    let g_hidden = p.w2.t_matvec(grad_out)?;
    let d_c = p.compound_dim();
    let gw1 = grad.w1.data_mut();
    for h in 0..h_dim {
        let a = acts.hidden[h];
        let g_pre = g_hidden[h] * (1.0 - a * a);
        grad.b1[h] += g_pre;
        let row = &mut gw1[h * d_c..(h + 1) * d_c];
        for &j in &x.indices {
            row[j as usize] += g_pre;
        }
    }
    Ok(())
}

/// `exp(−‖x − a_j‖² / (2ℓ²))` for every anchor `a_j`.
pub fn protein_similarity(x: &[f64], p: &EncoderParams) -> Result<Vec<f64>> {
    Error::check_dim("protein_similarity", p.protein_dim(), x.len())?;
    let ls = p.lengthscale_sim();
    let inv = 1.0 / (2.0 * ls * ls);
    Ok((0..p.n_anchors())
        .map(|j| (-squared_distance(x, p.anchors.row(j)) * inv).exp())
        .collect())
}

/// Linear head `Wp·s + bp` on a similarity row.
pub fn encode_protein(sim: &[f64], p: &EncoderParams) -> Result<Vec<f64>> {
    Error::check_dim("encode_protein", p.n_anchors(), sim.len())?;
    let mut out = p.wp.matvec(sim)?;
    axpy(1.0, &p.bp, &mut out);
    Ok(out)
}

/// Accumulates protein-path gradients (head, anchors, similarity scale).
pub fn protein_backward(
    x: &[f64],
    sim: &[f64],
    grad_out: &[f64],
    p: &EncoderParams,
    grad: &mut EncoderParams,
) -> Result<()> {
    Error::check_dim("protein_backward", p.embed_dim(), grad_out.len())?;
    for (e, &g) in grad_out.iter().enumerate() {
        grad.bp[e] += g;
        axpy(g, sim, grad.wp.row_mut(e));
    }
    let g_sim = p.wp.t_matvec(grad_out)?;
    let ls = p.lengthscale_sim();
    let ls2 = ls * ls;
    for j in 0..p.n_anchors() {
        let gs = g_sim[j] * sim[j];
        if gs == 0.0 {
            continue;
        }
        let a = p.anchors.row(j);
        let d2 = squared_distance(x, a);
        // ∂s/∂a = s (x − a)/ℓ², ∂s/∂log ℓ = s d²/ℓ²
        let ga = grad.anchors.row_mut(j);
        for k in 0..x.len() {
            ga[k] += gs * (x[k] - a[k]) / ls2;
        }
        grad.log_lengthscale_sim += gs * d2 / ls2;
    }
    Ok(())
}

pub fn combine(e_mol: &[f64], e_prot: &[f64]) -> Result<PairEmbedding> {
    Error::check_dim("combine", e_mol.len(), e_prot.len())?;
    Ok(PairEmbedding(e_mol.iter().zip(e_prot).map(|(a, b)| a * b).collect()))
}

/// Records resolved against a feature store: unique compounds and proteins
/// plus the (compound, protein) index of every pair.
#[derive(Debug, Clone)]
pub struct PairIndex {
    pub compounds: Vec<SparseBits>,
    pub proteins: Vec<Vec<f64>>,
    pub pairs: Vec<(usize, usize)>,
    pub compound_ids: Vec<String>,
    pub protein_ids: Vec<String>,
}

impl PairIndex {
    pub fn new(ds: &Dataset, fs: &FeatureStore) -> Result<Self> {
        let mut c_map: BTreeMap<&str, usize> = BTreeMap::new();
        let mut p_map: BTreeMap<&str, usize> = BTreeMap::new();
        let mut out = PairIndex {
            compounds: Vec::new(),
            proteins: Vec::new(),
            pairs: Vec::with_capacity(ds.len()),
            compound_ids: Vec::new(),
            protein_ids: Vec::new(),
        };
        for r in &ds.records {
            let ci = match c_map.get(r.compound_id.as_str()) {
                Some(&i) => i,
                None => {
                    let bits = fs.compound(&r.compound_id)?.clone();
                    c_map.insert(&r.compound_id, out.compounds.len());
                    out.compounds.push(bits);
                    out.compound_ids.push(r.compound_id.clone());
                    out.compounds.len() - 1
                }
            };
            let pi = match p_map.get(r.protein_id.as_str()) {
                Some(&i) => i,
                None => {
                    let v = fs.protein(&r.protein_id)?.to_vec();
                    p_map.insert(&r.protein_id, out.proteins.len());
                    out.proteins.push(v);
                    out.protein_ids.push(r.protein_id.clone());
                    out.proteins.len() - 1
                }
            };
            out.pairs.push((ci, pi));
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Per-batch forward values for the backward pass.
#[derive(Debug, Clone)]
pub struct PairCache {
    compounds: Vec<(usize, CompoundActivations)>,
    proteins: Vec<(usize, Vec<f64>, Vec<f64>)>,
    /// (slot in `compounds`, slot in `proteins`) per batch row
    slots: Vec<(usize, usize)>,
}

/// Embeds the pairs at `idx`, computing each distinct entity once.
pub fn embed_pairs(p: &EncoderParams, index: &PairIndex, idx: &[usize]) -> Result<(Matrix, PairCache)> {
    let mut c_slot: BTreeMap<usize, usize> = BTreeMap::new();
    let mut p_slot: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cache = PairCache {
        compounds: Vec::new(),
        proteins: Vec::new(),
        slots: Vec::with_capacity(idx.len()),
    };
    for &i in idx {
        let (ci, pi) = index.pairs[i];
        let cs = match c_slot.get(&ci) {
            Some(&s) => s,
            None => {
                let acts = compound_forward(&index.compounds[ci], p)?;
                c_slot.insert(ci, cache.compounds.len());
                cache.compounds.push((ci, acts));
                cache.compounds.len() - 1
            }
        };
        let ps = match p_slot.get(&pi) {
            Some(&s) => s,
            None => {
                let sim = protein_similarity(&index.proteins[pi], p)?;
                let out = encode_protein(&sim, p)?;
                p_slot.insert(pi, cache.proteins.len());
                cache.proteins.push((pi, sim, out));
                cache.proteins.len() - 1
            }
        };
        cache.slots.push((cs, ps));
    }
    let e = p.embed_dim();
    let mut x = Matrix::zeros(idx.len(), e);
    for (row, &(cs, ps)) in cache.slots.iter().enumerate() {
        let a = &cache.compounds[cs].1.output;
        let b = &cache.proteins[ps].2;
        for (k, v) in x.row_mut(row).iter_mut().enumerate() {
            *v = a[k] * b[k];
        }
    }
    Ok((x, cache))
}

/// Back-propagates `∂L/∂X` of a batch from [`embed_pairs`] into `grad`.
pub fn backward_pairs(
    p: &EncoderParams,
    index: &PairIndex,
    cache: &PairCache,
    grad_x: &Matrix,
    grad: &mut EncoderParams,
) -> Result<()> {
    let e = p.embed_dim();
    let mut g_mol = vec![vec![0.0; e]; cache.compounds.len()];
    let mut g_prot = vec![vec![0.0; e]; cache.proteins.len()];
    for (row, &(cs, ps)) in cache.slots.iter().enumerate() {
        let gx = grad_x.row(row);
        let a = &cache.compounds[cs].1.output;
        let b = &cache.proteins[ps].2;
        for k in 0..e {
            g_mol[cs][k] += gx[k] * b[k];
            g_prot[ps][k] += gx[k] * a[k];
        }
    }
    for ((ci, acts), g) in cache.compounds.iter().zip(&g_mol) {
        compound_backward(&index.compounds[*ci], acts, g, p, grad)?;
    }
    for ((pi, sim, _), g) in cache.proteins.iter().zip(&g_prot) {
        protein_backward(&index.proteins[*pi], sim, g, p, grad)?;
    }
    Ok(())
}

/// Dense reference for the compound path, used to check the sparse one.
pub fn encode_compound_dense(x: &[f64], p: &EncoderParams) -> Result<Vec<f64>> {
    Error::check_dim("encode_compound_dense", p.compound_dim(), x.len())?;
    let hidden: Vec<f64> = (0..p.hidden())
        .map(|h| (dot(p.w1.row(h), x) + p.b1[h]).tanh())
        .collect();
    let mut out = p.w2.matvec(&hidden)?;
    axpy(1.0, &p.b2, &mut out);
    Ok(out)
}
