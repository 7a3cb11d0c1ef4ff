use std::path::{Path, PathBuf};

use dtigp_core::data::{ColumnSchema, Reduction, SyntheticConfig, ThresholdDirection, DEFAULT_N_FOLDS};
use dtigp_core::linalg::{DEFAULT_POWER_TOL, SeededRng};
use dtigp_core::ranking::{SelectionMethod, DEFAULT_REJECT_TAU};
use dtigp_core::svgp::TrainConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    /// raw or prepared interactions; defaults to `<output_dir>/interactions.csv`
    pub interactions: Option<PathBuf>,
    pub compound_features: Option<PathBuf>,
    pub protein_features: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            interactions: None,
            compound_features: None,
            protein_features: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareConfig {
    pub schema: ColumnSchema,
    pub reduction: Reduction,
    pub threshold: f64,
    pub direction: ThresholdDirection,
}

impl Default for PrepareConfig {
    fn default() -> Self {
        Self {
            schema: ColumnSchema::default(),
            reduction: Reduction::Mean,
            threshold: 0.0,
            direction: ThresholdDirection::Ge,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub n_folds: usize,
    pub test_folds: Vec<usize>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_folds: DEFAULT_N_FOLDS,
            test_folds: vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub method: SelectionMethod,
    pub k: usize,
    /// posterior draws
    pub n_samples: usize,
    pub joint: bool,
    /// drop candidates whose class-probability std is not below `tau`
    pub tau: Option<f64>,
    pub fdr_thresholds: Vec<f64>,
    pub power_tol: f64,
    pub power_max_iter: usize,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            method: SelectionMethod::Eigen,
            k: 150,
            n_samples: 1000,
            joint: true,
            tau: None,
            fdr_thresholds: vec![0.1, 0.2, 0.3, 0.5],
            power_tol: DEFAULT_POWER_TOL,
            power_max_iter: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub bins: usize,
    pub min_pos: usize,
    pub min_neg: usize,
    pub ks: Vec<usize>,
    pub selectors: Vec<SelectionMethod>,
    /// rejection variant; `None` skips it
    pub tau: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            bins: 10,
            min_pos: 50,
            min_neg: 50,
            ks: vec![10, 25, 50, 100, 150],
            selectors: vec![
                SelectionMethod::Score,
                SelectionMethod::Eigen,
                SelectionMethod::BayesMean,
                SelectionMethod::MapMean,
            ],
            tau: Some(DEFAULT_REJECT_TAU),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub paths: Paths,
    pub prepare: PrepareConfig,
    pub split: SplitConfig,
    /// `model.seed` is replaced by the run seed
    pub model: TrainConfig,
    pub selection: SelectionConfig,
    pub eval: EvalConfig,
    /// `synth.seed` is replaced by the run seed
    pub synth: SyntheticConfig,
}

/// RNG streams derived from the run seed.
pub mod streams {
    pub const FOLDS: u64 = 10;
    pub const POSTERIOR: u64 = 11;
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.seed.expect("validated config has a seed")
    }

    pub fn rng(&self, stream: u64) -> SeededRng {
        SeededRng::new(self.seed()).fork(stream)
    }

    pub fn out(&self) -> &Path {
        &self.paths.output_dir
    }

    pub fn out_file(&self, name: &str) -> PathBuf {
        self.paths.output_dir.join(name)
    }

    pub fn interactions_path(&self) -> PathBuf {
        self.paths.interactions.clone().unwrap_or_else(|| self.out_file("interactions.csv"))
    }

    pub fn compound_features_path(&self) -> PathBuf {
        self.paths.compound_features.clone().unwrap_or_else(|| self.out_file("compound_features.tsv"))
    }

    pub fn protein_features_path(&self) -> PathBuf {
        self.paths.protein_features.clone().unwrap_or_else(|| self.out_file("protein_features.csv"))
    }

    pub fn prepared_path(&self) -> PathBuf {
        self.out_file("prepared.csv")
    }

    pub fn checkpoint_path(&self, map: bool) -> PathBuf {
        self.out_file(if map { "model_map.json" } else { "model.json" })
    }

    /// Train config with the run seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed(),
            ..self.model.clone()
        }
    }

    pub fn synth_config(&self) -> SyntheticConfig {
        SyntheticConfig {
            seed: self.seed(),
            ..self.synth.clone()
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.seed.is_none() {
            return bad("seed is required (config `seed` or --seed)".into());
        }
        self.model.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.synth.validate().map_err(|e| CliError::Config(e.to_string()))?;
        if !self.prepare.threshold.is_finite() {
            return bad("prepare.threshold must be finite".into());
        }
        let sp = &self.split;
        if sp.n_folds == 0 {
            return bad("split.n_folds must be positive".into());
        }
        if let Some(f) = sp.test_folds.iter().find(|&&f| f >= sp.n_folds) {
            return bad(format!("split.test_folds entry {f} is not below n_folds = {}", sp.n_folds));
        }
        if sp.test_folds.is_empty() {
            return bad("split.test_folds must not be empty".into());
        }
        let sel = &self.selection;
        if sel.k == 0 || sel.n_samples == 0 || sel.power_max_iter == 0 {
            return bad("selection.k, n_samples and power_max_iter must be positive".into());
        }
        if !(sel.power_tol > 0.0) {
            return bad("selection.power_tol must be positive".into());
        }
        for tau in [sel.tau, self.eval.tau].into_iter().flatten() {
            if !(tau > 0.0 && tau <= 1.0) {
                return bad(format!("rejection tau {tau} outside (0, 1]"));
            }
        }
        if let Some(t) = sel.fdr_thresholds.iter().find(|t| !(0.0..=1.0).contains(*t)) {
            return bad(format!("fdr threshold {t} outside [0, 1]"));
        }
        let ev = &self.eval;
        if ev.bins == 0 {
            return bad("eval.bins must be positive".into());
        }
        if ev.ks.is_empty() || ev.ks.contains(&0) {
            return bad("eval.ks must be a nonempty list of positive K".into());
        }
        Ok(())
    }
}

/// Command-line overrides on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub map: bool,
    /// `(dotted.key, raw value)` from `--key value` flags
    pub values: Vec<(String, String)>,
}

/// Recursively copies `src` into `dst`, rejecting keys `dst` does not have.
///
/// `null` slots in `dst` (unset optional fields) accept any value.
fn merge(dst: &mut Value, src: Value, path: &str) -> CliResult<()> {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (k, v) in s {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match d.get_mut(&k) {
                    Some(slot) if slot.is_null() => *slot = v,
                    Some(slot) => merge(slot, v, &here)?,
                    None => return Err(CliError::Config(format!("unknown config key `{here}`"))),
                }
            }
            Ok(())
        }
        (d, s) => {
            *d = s;
            Ok(())
        }
    }
}

fn set_path(root: &mut Value, key: &str, raw: &str) -> CliResult<()> {
    let mut slot = root;
    for part in key.split('.') {
        let part = part.replace('-', "_");
        slot = match slot {
            Value::Object(m) => m
                .get_mut(&part)
                .ok_or_else(|| CliError::Config(format!("unknown config key `{key}`")))?,
            _ => return Err(CliError::Config(format!("`{key}` does not name a config field"))),
        };
    }
    // bare words such as method names are strings
    *slot = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

/// Defaults, then the config file, then command-line overrides.
pub fn load_config(file: Option<&Path>, ov: &Overrides) -> CliResult<RunConfig> {
    let mut root = serde_json::to_value(RunConfig::default()).expect("default config serializes");
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let parsed: Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        if !parsed.is_object() {
            return Err(CliError::Config(format!("{}: top level must be an object", path.display())));
        }
        merge(&mut root, parsed, "")?;
    }
    for (k, v) in &ov.values {
        set_path(&mut root, k, v)?;
    }
    let mut cfg: RunConfig = serde_json::from_value(root).map_err(|e| CliError::Config(e.to_string()))?;
    if ov.seed.is_some() {
        cfg.seed = ov.seed;
    }
    if let Some(out) = &ov.out {
        cfg.paths.output_dir = out.clone();
    }
    if ov.map {
        cfg.model.map_mode = true;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ov(values: &[(&str, &str)]) -> Overrides {
        Overrides {
            seed: Some(1),
            values: values.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            ..Default::default()
        }
    }

    #[test]
    fn defaults_need_a_seed() {
        assert!(matches!(load_config(None, &Overrides::default()), Err(CliError::Config(_))));
        let cfg = load_config(None, &ov(&[])).unwrap();
        assert_eq!(cfg.selection.k, 150);
        assert_eq!(cfg.train_config().seed, 1);
    }

    #[test]
    fn key_value_overrides() {
        let cfg = load_config(
            None,
            &ov(&[("model.epochs", "3"), ("selection.method", "score"), ("eval.ks", "[5,10]"), ("selection.tau", "0.1")]),
        )
        .unwrap();
        assert_eq!(cfg.model.epochs, 3);
        assert_eq!(cfg.selection.method, SelectionMethod::Score);
        assert_eq!(cfg.eval.ks, vec![5, 10]);
        assert_eq!(cfg.selection.tau, Some(0.1));
        assert!(load_config(None, &ov(&[("model.epoch", "3")])).is_err());
        assert!(load_config(None, &ov(&[("selection.method", "best")])).is_err());
    }

    #[test]
    fn file_keys_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"seed": 3, "model": {"m": 8, "encoder": {"max_anchors": 4}}}"#).unwrap();
        let cfg = load_config(Some(&p), &Overrides::default()).unwrap();
        assert_eq!((cfg.seed, cfg.model.m, cfg.model.encoder.max_anchors), (Some(3), 8, Some(4)));
        std::fs::write(&p, r#"{"seed": 3, "modle": {}}"#).unwrap();
        assert!(load_config(Some(&p), &Overrides::default()).is_err());
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for (k, v) in [("split.test_folds", "[6]"), ("selection.k", "0"), ("model.m", "0"), ("eval.tau", "2")] {
            assert!(matches!(load_config(None, &ov(&[(k, v)])), Err(CliError::Config(_))), "{k}");
        }
    }
}
