use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::Dataset;

/// Sorted set-bit indices of a binary fingerprint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseBits {
    pub dim: usize,
    pub indices: Vec<u32>,
}

impl SparseBits {
    pub fn new(dim: usize, mut indices: Vec<u32>) -> Result<Self> {
        indices.sort_unstable();
        indices.dedup();
        if let Some(&last) = indices.last() {
            if last as usize >= dim {
                return Err(Error::InvalidArgument(format!("bit {last} out of range for dimension {dim}")));
            }
        }
        Ok(Self { dim, indices })
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        for &i in &self.indices {
            v[i as usize] = 1.0;
        }
        v
    }
}

/// Precomputed entity features keyed by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureStore {
    pub compound_dim: usize,
    pub protein_dim: usize,
    pub compounds: BTreeMap<String, SparseBits>,
    pub proteins: BTreeMap<String, Vec<f64>>,
}

impl FeatureStore {
    pub fn compound(&self, id: &str) -> Result<&SparseBits> {
        self.compounds.get(id).ok_or_else(|| Error::MissingFeature {
            kind: "compound",
            id: id.to_string(),
        })
    }

    pub fn protein(&self, id: &str) -> Result<&[f64]> {
        self.proteins.get(id).map(Vec::as_slice).ok_or_else(|| Error::MissingFeature {
            kind: "protein",
            id: id.to_string(),
        })
    }

    /// Every compound and protein referenced by `ds` resolves.
    pub fn check_covers(&self, ds: &Dataset) -> Result<()> {
        for r in &ds.records {
            self.compound(&r.compound_id)?;
            self.protein(&r.protein_id)?;
        }
        Ok(())
    }

    /// Mean number of set bits per compound.
    pub fn mean_bits(&self) -> f64 {
        if self.compounds.is_empty() {
            return 0.0;
        }
        self.compounds.values().map(|b| b.indices.len()).sum::<usize>() as f64 / self.compounds.len() as f64
    }

    pub fn load(compound_path: &Path, protein_path: &Path) -> Result<Self> {
        let (compound_dim, compounds) = load_compound_features(compound_path)?;
        let (protein_dim, proteins) = load_protein_features(protein_path)?;
        Ok(Self {
            compound_dim,
            protein_dim,
            compounds,
            proteins,
        })
    }

    pub fn write(&self, compound_path: &Path, protein_path: &Path) -> Result<()> {
        write_compound_features(compound_path, self)?;
        write_protein_features(protein_path, self)
    }
}

/// Reads `id<TAB>D_c<TAB>i1,i2,...` lines.
pub fn load_compound_features(path: &Path) -> Result<(usize, BTreeMap<String, SparseBits>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dim = None;
    let mut out = BTreeMap::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedRow { line: lineno, message };
        let mut parts = line.splitn(3, '\t');
        let id = parts.next().unwrap_or("").to_string();
        let d: usize = parts
            .next()
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| malformed("missing or invalid fingerprint dimension".into()))?;
        if *dim.get_or_insert(d) != d {
            return Err(malformed(format!("dimension {d} differs from {}", dim.unwrap())));
        }
        let bits = parts.next().unwrap_or("").trim();
        let mut indices = Vec::new();
        if !bits.is_empty() {
            for tok in bits.split(',') {
                indices.push(tok.trim().parse::<u32>().map_err(|_| malformed(format!("bad bit index `{tok}`")))?);
            }
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(malformed("bit indices must be strictly increasing".into()));
        }
        let bits = SparseBits::new(d, indices).map_err(|e| malformed(e.to_string()))?;
        out.insert(id, bits);
    }
    Ok((dim.unwrap_or(0), out))
}

/// Reads `id,x1,...,x_Dp` rows; a header row is skipped when its second field
/// is not numeric.
pub fn load_protein_features(path: &Path) -> Result<(usize, BTreeMap<String, Vec<f64>>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut dim = None;
    let mut out = BTreeMap::new();
    for (n, row) in rdr.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(n + 1, |p| p.line() as usize);
        if n == 0 && row.get(1).is_some_and(|s| s.parse::<f64>().is_err()) {
            continue;
        }
        let malformed = |message: String| Error::MalformedRow { line, message };
        let id = row.get(0).unwrap_or("").to_string();
        let values = row
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| malformed(format!("`{s}` is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        if *dim.get_or_insert(values.len()) != values.len() {
            return Err(malformed(format!("{} columns, expected {}", values.len(), dim.unwrap())));
        }
        out.insert(id, values);
    }
    Ok((dim.unwrap_or(0), out))
}

pub fn write_compound_features(path: &Path, fs: &FeatureStore) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for (id, bits) in &fs.compounds {
        let idx: Vec<String> = bits.indices.iter().map(u32::to_string).collect();
        writeln!(w, "{id}\t{}\t{}", bits.dim, idx.join(",")).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_protein_features(path: &Path, fs: &FeatureStore) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["protein_id".to_string()];
    header.extend((0..fs.protein_dim).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for (id, v) in &fs.proteins {
        let mut row = vec![id.clone()];
        row.extend(v.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
