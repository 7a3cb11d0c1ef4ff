use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SeededRng;

/// Folds used by the scaffold split when none is configured.
pub const DEFAULT_N_FOLDS: usize = 6;

/// One observed cell of the compound × protein interaction matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub compound_id: String,
    pub protein_id: String,
    pub value: f64,
    pub label: Option<bool>,
    pub group_id: String,
    pub fold: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub records: Vec<InteractionRecord>,
    pub n_folds: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdDirection {
    /// active iff value ≥ threshold
    #[default]
    Ge,
    /// active iff value ≤ threshold
    Le,
}

/// How duplicate (compound, protein) rows are merged on load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Mean,
    First,
    Max,
    Min,
}

/// Column names of the interactions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnSchema {
    pub compound: String,
    pub protein: String,
    pub value: String,
    pub group: String,
    /// optional; read when present
    pub label: String,
    /// optional; read when present
    pub fold: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            compound: "compound_id".into(),
            protein: "protein_id".into(),
            value: "value".into(),
            group: "group_id".into(),
            label: "label".into(),
            fold: "fold".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub compounds: usize,
    pub proteins: usize,
    pub interactions: usize,
    pub active: usize,
    pub inactive: usize,
    pub groups: usize,
    /// observed fraction of the compound × protein matrix
    pub sparsity: f64,
}

impl Dataset {
    pub fn new(records: Vec<InteractionRecord>, n_folds: usize) -> Self {
        Self { records, n_folds }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn n_active(&self) -> usize {
        self.records.iter().filter(|r| r.label == Some(true)).count()
    }

    pub fn n_inactive(&self) -> usize {
        self.records.iter().filter(|r| r.label == Some(false)).count()
    }

    /// Labels of all records; errors if any record is not binarized.
    pub fn labels(&self) -> Result<Vec<bool>> {
        self.records
            .iter()
            .map(|r| {
                r.label
                    .ok_or_else(|| Error::InvalidArgument(format!("record {}/{} has no label", r.compound_id, r.protein_id)))
            })
            .collect()
    }

    pub fn summary(&self) -> DatasetSummary {
        let compounds: BTreeSet<&str> = self.records.iter().map(|r| r.compound_id.as_str()).collect();
        let proteins: BTreeSet<&str> = self.records.iter().map(|r| r.protein_id.as_str()).collect();
        let groups: BTreeSet<&str> = self.records.iter().map(|r| r.group_id.as_str()).collect();
        let cells = compounds.len() * proteins.len();
        DatasetSummary {
            compounds: compounds.len(),
            proteins: proteins.len(),
            interactions: self.records.len(),
            active: self.n_active(),
            inactive: self.n_inactive(),
            groups: groups.len(),
            sparsity: if cells == 0 { 0.0 } else { self.records.len() as f64 / cells as f64 },
        }
    }

    /// Records whose fold is (test) or is not (train) in `test_folds`.
    ///
    /// Records without a fold go to the training side.
    pub fn split(&self, test_folds: &[usize]) -> (Dataset, Dataset) {
        let (test, train): (Vec<_>, Vec<_>) = self
            .records
            .iter()
            .cloned()
            .partition(|r| r.fold.is_some_and(|f| test_folds.contains(&f)));
        (Dataset::new(train, self.n_folds), Dataset::new(test, self.n_folds))
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset::new(idx.iter().map(|&i| self.records[i].clone()).collect(), self.n_folds)
    }
}

/// Reads an interactions CSV.
///
/// Duplicate (compound, protein) pairs are merged with `reduction`; the first
/// occurrence fixes the record position, group, label and fold.
pub fn load_interactions(path: &Path, schema: &ColumnSchema, reduction: Reduction) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_interactions(file, schema, reduction)
}

pub fn read_interactions<R: std::io::Read>(reader: R, schema: &ColumnSchema, reduction: Reduction) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let required = |name: &str| find(name).ok_or_else(|| Error::MissingColumn(name.to_string()));
    let c_idx = required(&schema.compound)?;
    let p_idx = required(&schema.protein)?;
    let v_idx = required(&schema.value)?;
    let g_idx = required(&schema.group)?;
    let l_idx = find(&schema.label);
    let f_idx = find(&schema.fold);

    let mut records: Vec<InteractionRecord> = Vec::new();
    let mut merged: Vec<Vec<f64>> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut max_fold = None;

    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(i).unwrap_or("");
        let malformed = |message: String| Error::MalformedRow { line, message };

        let compound_id = field(c_idx).to_string();
        let protein_id = field(p_idx).to_string();
        if compound_id.is_empty() || protein_id.is_empty() {
            return Err(malformed("empty compound or protein id".into()));
        }
        let value: f64 = field(v_idx)
            .parse()
            .map_err(|_| malformed(format!("value `{}` is not a number", field(v_idx))))?;
        if !value.is_finite() {
            return Err(malformed(format!("value `{}` is not finite", field(v_idx))));
        }
        let label = match l_idx.map(field) {
            None | Some("") => None,
            Some("1") | Some("true") => Some(true),
            Some("0") | Some("false") => Some(false),
            Some(other) => return Err(malformed(format!("label `{other}` is not binary"))),
        };
        let fold = match f_idx.map(field) {
            None | Some("") => None,
            Some(s) => Some(s.parse::<usize>().map_err(|_| malformed(format!("fold `{s}` is not a count")))?),
        };
        if let Some(f) = fold {
            max_fold = Some(max_fold.map_or(f, |m: usize| m.max(f)));
        }

        let key = (compound_id.clone(), protein_id.clone());
        match index.get(&key) {
            Some(&i) => merged[i].push(value),
            None => {
                index.insert(key, records.len());
                merged.push(vec![value]);
                records.push(InteractionRecord {
                    compound_id,
                    protein_id,
                    value,
                    label,
                    group_id: field(g_idx).to_string(),
                    fold,
                });
            }
        }
    }

    for (rec, values) in records.iter_mut().zip(&merged) {
        if values.len() > 1 {
            rec.value = match reduction {
                Reduction::Mean => values.iter().sum::<f64>() / values.len() as f64,
                Reduction::First => values[0],
                Reduction::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                Reduction::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            };
        }
    }
    let n_folds = max_fold.map_or(0, |m| m + 1);
    Ok(Dataset::new(records, n_folds))
}

/// Writes the prepared format: the input columns plus `label` and `fold`.
pub fn write_interactions(path: &Path, ds: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    w.write_record(["compound_id", "protein_id", "value", "group_id", "label", "fold"])?;
    for r in &ds.records {
        let label = r.label.map_or(String::new(), |l| if l { "1".into() } else { "0".into() });
        let fold = r.fold.map_or(String::new(), |f| f.to_string());
        w.write_record([
            r.compound_id.as_str(),
            r.protein_id.as_str(),
            &r.value.to_string(),
            r.group_id.as_str(),
            &label,
            &fold,
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Label = 1 iff the value reaches the threshold in `direction`, inclusive.
pub fn binarize(ds: &Dataset, threshold: f64, direction: ThresholdDirection) -> Dataset {
    let mut out = ds.clone();
    for r in &mut out.records {
        r.label = Some(match direction {
            ThresholdDirection::Ge => r.value >= threshold,
            ThresholdDirection::Le => r.value <= threshold,
        });
    }
    out
}

/// Assigns each distinct group a uniform fold in `0..n_folds`.
///
/// Groups draw their folds in sorted id order, so the result does not depend
/// on record order.
pub fn assign_folds(ds: &Dataset, n_folds: usize, rng: &mut SeededRng) -> Result<Dataset> {
    if n_folds == 0 {
        return Err(Error::InvalidArgument("n_folds must be at least 1".into()));
    }
    if let Some(pos) = ds.records.iter().position(|r| r.group_id.is_empty()) {
        // header is line 1
        return Err(Error::MissingGroup { line: pos + 2 });
    }
    let groups: BTreeSet<&str> = ds.records.iter().map(|r| r.group_id.as_str()).collect();
    let folds: BTreeMap<&str, usize> = groups.into_iter().map(|g| (g, rng.below(n_folds))).collect();
    let mut out = ds.clone();
    out.n_folds = n_folds;
    for r in &mut out.records {
        r.fold = Some(folds[r.group_id.as_str()]);
    }
    Ok(out)
}
