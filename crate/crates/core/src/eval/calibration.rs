use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm_cdf;
use crate::ranking::{PredictiveSamples, SelectionResult};

pub const DEFAULT_BINS: usize = 10;

/// Equal-width bin of `p ∈ [0, 1]`; the last bin includes 1.
fn bin_of(p: f64, n_bins: usize) -> usize {
    ((p * n_bins as f64).floor() as usize).min(n_bins - 1)
}

fn edges(n_bins: usize) -> Vec<f64> {
    (0..=n_bins).map(|b| b as f64 / n_bins as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub n_bins: usize,
    pub bin_edges: Vec<f64>,
    /// `None` for empty bins
    pub bin_confidence: Vec<Option<f64>>,
    pub bin_accuracy: Vec<Option<f64>>,
    pub bin_counts: Vec<usize>,
    pub ece: f64,
}

/// Reliability diagram and expected calibration error.
pub fn reliability(probs: &[f64], labels: &[bool], n_bins: usize) -> Result<CalibrationReport> {
    Error::check_dim("reliability", probs.len(), labels.len())?;
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be positive".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    let mut conf = vec![0.0; n_bins];
    let mut acc = vec![0.0; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = bin_of(p, n_bins);
        conf[b] += p;
        acc[b] += f64::from(u8::from(y));
        counts[b] += 1;
    }
    let n = probs.len() as f64;
    let mut ece = 0.0;
    let mut bin_confidence = Vec::with_capacity(n_bins);
    let mut bin_accuracy = Vec::with_capacity(n_bins);
    for b in 0..n_bins {
        if counts[b] == 0 {
            bin_confidence.push(None);
            bin_accuracy.push(None);
            continue;
        }
        let c = counts[b] as f64;
        let (cb, ab) = (conf[b] / c, acc[b] / c);
        ece += c / n * (ab - cb).abs();
        bin_confidence.push(Some(cb));
        bin_accuracy.push(Some(ab));
    }
    Ok(CalibrationReport {
        n_bins,
        bin_edges: edges(n_bins),
        bin_confidence,
        bin_accuracy,
        bin_counts: counts,
        ece,
    })
}

impl CalibrationReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["bin_lo", "bin_hi", "count", "confidence", "accuracy"])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for b in 0..self.n_bins {
            w.write_record([
                self.bin_edges[b].to_string(),
                self.bin_edges[b + 1].to_string(),
                self.bin_counts[b].to_string(),
                opt(self.bin_confidence[b]),
                opt(self.bin_accuracy[b]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Where selected items' class probabilities come from.
#[derive(Debug, Clone, Copy)]
pub enum ProbSource<'a> {
    /// one probability per item
    Mean(&'a [f64]),
    /// `Φ(f)` pooled over every draw
    Samples(&'a PredictiveSamples),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        for (b, c) in self.counts.iter().enumerate() {
            w.write_record([self.bin_edges[b].to_string(), self.bin_edges[b + 1].to_string(), c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Histogram of the class probabilities of the selected items.
pub fn topk_histogram(sel: &SelectionResult, source: ProbSource<'_>, n_bins: usize) -> Result<Histogram> {
    if n_bins == 0 {
        return Err(Error::InvalidArgument("n_bins must be positive".into()));
    }
    let n = match source {
        ProbSource::Mean(p) => p.len(),
        ProbSource::Samples(ps) => ps.n_items(),
    };
    if let Some(&bad) = sel.indices.iter().find(|&&i| i >= n) {
        return Err(Error::KOutOfRange { k: bad, n });
    }
    let mut counts = vec![0usize; n_bins];
    let mut add = |p: f64| counts[bin_of(p.clamp(0.0, 1.0), n_bins)] += 1;
    match source {
        ProbSource::Mean(p) => sel.indices.iter().for_each(|&i| add(p[i])),
        ProbSource::Samples(ps) => {
            for s in 0..ps.n_samples() {
                let row = ps.values.row(s);
                sel.indices.iter().for_each(|&i| add(norm_cdf(row[i])));
            }
        }
    }
    Ok(Histogram {
        bin_edges: edges(n_bins),
        counts,
    })
}
