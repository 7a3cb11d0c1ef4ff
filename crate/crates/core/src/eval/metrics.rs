use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

fn counts(labels: &[bool]) -> (usize, usize) {
    let pos = labels.iter().filter(|&&y| y).count();
    (pos, labels.len() - pos)
}

/// Items by descending score, ties by ascending index.
fn ranked(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// Probability a random positive outranks a random negative, ties ½.
pub fn auroc(labels: &[bool], scores: &[f64]) -> Result<f64> {
    Error::check_dim("auroc", labels.len(), scores.len())?;
    let (p, n) = counts(labels);
    if p == 0 || n == 0 {
        return Err(Error::DegenerateLabels("auroc needs at least one positive and one negative"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the Mann–Whitney count, kept integral
    let mut twice: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut start = 0;
    while start < idx.len() {
        let mut end = start;
        while end < idx.len() && scores[idx[end]] == scores[idx[start]] {
            end += 1;
        }
        let gp = idx[start..end].iter().filter(|&&i| labels[i]).count() as u64;
        let gn = (end - start) as u64 - gp;
        twice += 2 * gp * neg_below + gp * gn;
        neg_below += gn;
        start = end;
    }
    Ok(twice as f64 / (2 * p * n) as f64)
}

/// Largest integer below which every `u64` converts to `f64` exactly.
const EXACT_INT: u64 = 1 << 53;

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `a/b + c/d` in lowest terms, `None` once it leaves the exact range.
fn add_fraction((a, b): (u64, u64), (c, d): (u64, u64)) -> Option<(u64, u64)> {
    let g = gcd(b, d);
    let den = (b / g).checked_mul(d)?;
    let num = a.checked_mul(den / b)?.checked_add(c.checked_mul(den / d)?)?;
    let r = gcd(num, den);
    let out = (num / r, den / r);
    (out.1 < EXACT_INT && out.0 < EXACT_INT).then_some(out)
}

/// Average precision: mean of precision@k over the ranks of the positives.
///
/// The sum is kept as an exact fraction while it fits, so small instances
/// are correctly rounded.
pub fn aupr(labels: &[bool], scores: &[f64]) -> Result<f64> {
    Error::check_dim("aupr", labels.len(), scores.len())?;
    let (p, _) = counts(labels);
    if p == 0 {
        return Err(Error::DegenerateLabels("aupr needs at least one positive"));
    }
    let mut tp = 0usize;
    let mut sum = 0.0;
    let mut exact = Some((0u64, 1u64));
    for (rank, &i) in ranked(scores).iter().enumerate() {
        if labels[i] {
            tp += 1;
            sum += tp as f64 / (rank + 1) as f64;
            exact = exact.and_then(|f| add_fraction(f, (tp as u64, rank as u64 + 1)));
        }
    }
    if let Some((num, den)) = exact {
        if let Some(d) = den.checked_mul(p as u64).filter(|&d| d < EXACT_INT) {
            return Ok(num as f64 / d as f64);
        }
    }
    Ok(sum / p as f64)
}

/// `(fpr, tpr)` after each distinct score threshold, from `(0, 0)`.
pub fn roc_curve(labels: &[bool], scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    Error::check_dim("roc_curve", labels.len(), scores.len())?;
    let (p, n) = counts(labels);
    if p == 0 || n == 0 {
        return Err(Error::DegenerateLabels("roc curve needs both classes"));
    }
    let order = ranked(scores);
    let mut out = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        if labels[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let last_of_group = k + 1 == order.len() || scores[order[k + 1]] != scores[i];
        if last_of_group {
            out.push((fp as f64 / n as f64, tp as f64 / p as f64));
        }
    }
    Ok(out)
}

/// `(recall, precision)` at every rank.
pub fn pr_curve(labels: &[bool], scores: &[f64]) -> Result<Vec<(f64, f64)>> {
    Error::check_dim("pr_curve", labels.len(), scores.len())?;
    let (p, _) = counts(labels);
    if p == 0 {
        return Err(Error::DegenerateLabels("pr curve needs at least one positive"));
    }
    let mut tp = 0usize;
    Ok(ranked(scores)
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            tp += usize::from(labels[i]);
            (tp as f64 / p as f64, tp as f64 / (k + 1) as f64)
        })
        .collect())
}

/// CSV `x,y` for external plotting.
pub fn write_xy(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y"])?;
    for (x, y) in points {
        w.write_record([x.to_string(), y.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Minimum actives and inactives for a protein to be evaluated.
pub const DEFAULT_MIN_POS: usize = 50;
pub const DEFAULT_MIN_NEG: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskwiseRow {
    pub protein_id: String,
    pub n_pos: usize,
    pub n_neg: usize,
    pub auroc: f64,
    pub aupr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskwiseReport {
    pub rows: Vec<TaskwiseRow>,
    pub auroc_mean: Option<f64>,
    pub auroc_std: Option<f64>,
    pub aupr_mean: Option<f64>,
    pub aupr_std: Option<f64>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (Some(m), Some(var.sqrt()))
}

/// Per-protein AUROC and AUPR over proteins with enough of both classes,
/// aggregated by mean and population standard deviation.
pub fn taskwise_eval(test: &Dataset, scores: &[f64], min_pos: usize, min_neg: usize) -> Result<TaskwiseReport> {
    Error::check_dim("taskwise_eval", test.len(), scores.len())?;
    let labels = test.labels()?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in test.records.iter().enumerate() {
        groups.entry(r.protein_id.as_str()).or_default().push(i);
    }
    let mut rows = Vec::new();
    for (protein, idx) in groups {
        let y: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
        let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
        let (n_pos, n_neg) = counts(&y);
        if n_pos < min_pos.max(1) || n_neg < min_neg.max(1) {
            continue;
        }
        rows.push(TaskwiseRow {
            protein_id: protein.to_string(),
            n_pos,
            n_neg,
            auroc: auroc(&y, &s)?,
            aupr: aupr(&y, &s)?,
        });
    }
    let (auroc_mean, auroc_std) = mean_std(&rows.iter().map(|r| r.auroc).collect::<Vec<_>>());
    let (aupr_mean, aupr_std) = mean_std(&rows.iter().map(|r| r.aupr).collect::<Vec<_>>());
    Ok(TaskwiseReport {
        rows,
        auroc_mean,
        auroc_std,
        aupr_mean,
        aupr_std,
    })
}

impl TaskwiseReport {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["protein_id", "n_pos", "n_neg", "auroc", "aupr"])?;
        for r in &self.rows {
            w.write_record([
                r.protein_id.clone(),
                r.n_pos.to_string(),
                r.n_neg.to_string(),
                r.auroc.to_string(),
                r.aupr.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}
