use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sampling::PredictiveSamples;
use super::select::SelectionResult;
use crate::error::{Error, Result};
use crate::linalg::{norm_cdf, SeededRng};
use crate::svgp::PredictiveDistribution;

/// Class-probability std below which a prediction counts as confident.
pub const DEFAULT_REJECT_TAU: f64 = 0.05;

/// Mean and sample standard deviation of `Φ(f_i^s)` over the draws.
pub fn class_prob_moments(ps: &PredictiveSamples) -> (Vec<f64>, Vec<f64>) {
    let items = ps.by_item();
    let s = ps.n_samples();
    (0..ps.n_items())
        .map(|i| {
            let probs: Vec<f64> = items.row(i).iter().map(|&f| norm_cdf(f)).collect();
            let m = probs.iter().sum::<f64>() / s as f64;
            let sd = if s > 1 {
                (probs.iter().map(|p| (p - m) * (p - m)).sum::<f64>() / (s - 1) as f64).sqrt()
            } else {
                0.0
            };
            (m, sd)
        })
        .unzip()
}

/// Keep-mask of items whose class-probability std is below `tau`.
///
/// Also records the std in `dist.class_prob_std`.
pub fn reject(dist: &mut PredictiveDistribution, ps: &PredictiveSamples, tau: f64) -> Result<Vec<bool>> {
    Error::check_dim("reject", dist.len(), ps.n_items())?;
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument("rejection threshold must be nonnegative".into()));
    }
    let (_, sd) = class_prob_moments(ps);
    let keep = sd.iter().map(|&s| s < tau).collect();
    dist.class_prob_std = Some(sd);
    Ok(keep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdrSummary {
    pub k: usize,
    pub n_samples: usize,
    pub mean: f64,
    pub std: f64,
    /// `(t, P(FDR > t))`
    pub exceedance: Vec<(f64, f64)>,
    pub bernoulli: bool,
}

/// Posterior distribution of the selection's false discovery rate.
///
/// Per draw `s`, `FDR^s = 1 − (1/K) Σ_{i ∈ sel} Φ(f_i^s)`. With `bernoulli`
/// set, labels are drawn as `Bernoulli(Φ(f_i^s))` and the realized fraction
/// of inactives is used instead.
pub fn fdr_posterior(
    sel: &mut SelectionResult,
    ps: &PredictiveSamples,
    thresholds: &[f64],
    bernoulli: Option<&mut SeededRng>,
) -> Result<FdrSummary> {
    let n = ps.n_items();
    if let Some(&bad) = sel.indices.iter().find(|&&i| i >= n) {
        return Err(Error::KOutOfRange { k: bad, n });
    }
    let k = sel.indices.len();
    if k == 0 {
        return Err(Error::KOutOfRange { k: 0, n });
    }
    let use_bernoulli = bernoulli.is_some();
    let mut rng = bernoulli;
    let samples: Vec<f64> = (0..ps.n_samples())
        .map(|s| {
            let row = ps.values.row(s);
            let hits: f64 = sel
                .indices
                .iter()
                .map(|&i| {
                    let p = norm_cdf(row[i]);
                    match rng.as_deref_mut() {
                        Some(r) => f64::from(u8::from(r.bernoulli(p))),
                        None => p,
                    }
                })
                .sum();
            1.0 - hits / k as f64
        })
        .collect();
    let summary = summarize(&samples, k, thresholds, use_bernoulli);
    sel.fdr_samples = samples;
    Ok(summary)
}

fn summarize(samples: &[f64], k: usize, thresholds: &[f64], bernoulli: bool) -> FdrSummary {
    let s = samples.len();
    let mean = samples.iter().sum::<f64>() / s as f64;
    let std = if s > 1 {
        (samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (s - 1) as f64).sqrt()
    } else {
        0.0
    };
    let exceedance = thresholds
        .iter()
        .map(|&t| (t, samples.iter().filter(|&&v| v > t).count() as f64 / s as f64))
        .collect();
    FdrSummary {
        k,
        n_samples: s,
        mean,
        std,
        exceedance,
        bernoulli,
    }
}

/// `sample,fdr` CSV of per-draw FDR values.
pub fn write_fdr_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample", "fdr"])?;
    for (s, v) in samples.iter().enumerate() {
        w.write_record([s.to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Identifiers written next to each selected item.
pub struct ItemIds<'a> {
    pub compound: &'a [String],
    pub protein: &'a [String],
}

/// `rank,index,compound_id,protein_id,score,class_prob_mean,class_prob_std`.
pub fn write_selection(
    path: &Path,
    sel: &SelectionResult,
    ids: &ItemIds<'_>,
    class_prob_mean: &[f64],
    class_prob_std: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "rank",
        "index",
        "compound_id",
        "protein_id",
        "score",
        "class_prob_mean",
        "class_prob_std",
    ])?;
    for (rank, &i) in sel.indices.iter().enumerate() {
        w.write_record([
            (rank + 1).to_string(),
            i.to_string(),
            ids.compound[i].clone(),
            ids.protein[i].clone(),
            sel.scores[i].to_string(),
            class_prob_mean[i].to_string(),
            class_prob_std[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
