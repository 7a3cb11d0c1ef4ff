use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::SeededRng;

/// Realized FDR of `select(K)` against held-out labels for each `K`.
pub fn fdr_curve<F>(mut select: F, ks: &[usize], labels: &[bool]) -> Result<Vec<(usize, f64)>>
where
    F: FnMut(usize) -> Result<Vec<usize>>,
{
    let n = labels.len();
    ks.iter()
        .map(|&k| {
            if k == 0 || k > n {
                return Err(Error::KOutOfRange { k, n });
            }
            let idx = select(k)?;
            Error::check_dim("fdr_curve selection", k, idx.len())?;
            if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
                return Err(Error::KOutOfRange { k: bad, n });
            }
            let false_hits = idx.iter().filter(|&&i| !labels[i]).count();
            Ok((k, false_hits as f64 / k as f64))
        })
        .collect()
}

pub fn write_fdr_curve(path: &Path, curve: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y"])?;
    for (k, f) in curve {
        w.write_record([k.to_string(), f.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Bottom and top groups of the variance learning curve.
pub const LOW_GROUP_MAX: f64 = 0.05;
pub const HIGH_GROUP_MIN: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbGroup {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceRow {
    pub fraction: f64,
    pub group: ProbGroup,
    pub n_points: usize,
    /// mean class-probability std in the group, `None` if the group is empty
    pub mean_std: Option<f64>,
}

/// Retrains on growing fractions of `train` and tracks the predictive spread
/// of test points that full-data training puts below 0.05 or above 0.95.
///
/// `fit_predict` trains on the given subset and returns test-set class
/// probabilities and their standard deviations. `fractions` must lie in
/// `(0, 1]` and contain `1.0`; subsets are prefixes of one seeded shuffle.
pub fn variance_learning_curve<F>(
    train: &Dataset,
    fractions: &[f64],
    rng: &mut SeededRng,
    mut fit_predict: F,
) -> Result<Vec<VarianceRow>>
where
    F: FnMut(&Dataset) -> Result<(Vec<f64>, Vec<f64>)>,
{
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidArgument(format!("fraction {f} outside (0, 1]")));
    }
    if !fractions.contains(&1.0) {
        return Err(Error::InvalidArgument("fractions must include 1.0, which defines the groups".into()));
    }
    let mut order: Vec<usize> = (0..train.len()).collect();
    rng.shuffle(&mut order);
    let subset = |f: f64| {
        let n = ((f * train.len() as f64).ceil() as usize).clamp(1, train.len());
        let mut idx = order[..n].to_vec();
        idx.sort_unstable();
        train.subset(&idx)
    };

    let (p_full, sd_full) = fit_predict(train)?;
    Error::check_dim("variance curve std", p_full.len(), sd_full.len())?;
    let low: Vec<usize> = (0..p_full.len()).filter(|&i| p_full[i] < LOW_GROUP_MAX).collect();
    let high: Vec<usize> = (0..p_full.len()).filter(|&i| p_full[i] > HIGH_GROUP_MIN).collect();
    let row = |fraction: f64, group: ProbGroup, members: &[usize], sd: &[f64]| VarianceRow {
        fraction,
        group,
        n_points: members.len(),
        mean_std: if members.is_empty() {
            None
        } else {
            Some(members.iter().map(|&i| sd[i]).sum::<f64>() / members.len() as f64)
        },
    };
    let mut rows = Vec::with_capacity(2 * fractions.len());
    for &f in fractions {
        let sd = if f == 1.0 {
            sd_full.clone()
        } else {
            let (_, sd) = fit_predict(&subset(f))?;
            Error::check_dim("variance curve predictions", p_full.len(), sd.len())?;
            sd
        };
        rows.push(row(f, ProbGroup::Low, &low, &sd));
        rows.push(row(f, ProbGroup::High, &high, &sd));
    }
    Ok(rows)
}

pub fn write_variance_curve(path: &Path, rows: &[VarianceRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["fraction", "group", "n_points", "mean_std"])?;
    for r in rows {
        let g = match r.group {
            ProbGroup::Low => "low",
            ProbGroup::High => "high",
        };
        w.write_record([
            r.fraction.to_string(),
            g.to_string(),
            r.n_points.to_string(),
            r.mean_std.map_or(String::new(), |v| v.to_string()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
