use std::path::Path;

use dtigp_core::data::{
    assign_folds, binarize, load_interactions, synthetic_generate, write_interactions, ColumnSchema, Dataset,
    DatasetSummary, FeatureStore, Reduction,
};
use dtigp_core::encoder::PairIndex;
use dtigp_core::eval::{
    aupr, auroc, fdr_curve, pr_curve, reliability, roc_curve, taskwise_eval, topk_histogram, write_fdr_curve,
    write_xy, ProbSource,
};
use dtigp_core::ranking::{
    class_prob_moments, eigen_select, fdr_posterior, precedence_from_samples, sample_predictive,
    score_select, top_k, write_fdr_samples, write_selection, FdrSummary, ItemIds, PredictiveSamples,
    SelectionMethod, SelectionResult,
};
use dtigp_core::svgp::{
    anchor_ids, predict, train as train_model, write_trace, Checkpoint, CovarianceKind, Inputs, ModelParams,
    PredictiveDistribution,
};
use serde::Serialize;

use crate::config::{streams, RunConfig};
use crate::error::{AtStage, CliError, CliResult, Stage};

fn data_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {msg}", path.display()))
}

fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(data_err(path, "file not found"))
    }
}

fn ensure_out(cfg: &RunConfig) -> CliResult<()> {
    std::fs::create_dir_all(cfg.out()).map_err(|e| data_err(cfg.out(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| data_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| data_err(path, e))
}

fn load_features(cfg: &RunConfig) -> CliResult<FeatureStore> {
    let (cp, pp) = (cfg.compound_features_path(), cfg.protein_features_path());
    require_file(&cp)?;
    require_file(&pp)?;
    FeatureStore::load(&cp, &pp).at(Stage::Data)
}

pub fn synth(cfg: &RunConfig) -> CliResult<()> {
    ensure_out(cfg)?;
    let sc = cfg.synth_config();
    let data = synthetic_generate(&sc).at(Stage::Data)?;
    write_interactions(&cfg.interactions_path(), &data.dataset).at(Stage::Data)?;
    data.features
        .write(&cfg.compound_features_path(), &cfg.protein_features_path())
        .at(Stage::Data)?;

    let path = cfg.out_file("truth.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| data_err(&path, e))?;
    let t = &data.truth;
    let rows = std::iter::once(["compound_id", "protein_id", "latent", "noise", "prob"].map(String::from));
    let body = data.dataset.records.iter().enumerate().map(|(i, r)| {
        [
            r.compound_id.clone(),
            r.protein_id.clone(),
            t.latent[i].to_string(),
            t.noise[i].to_string(),
            t.prob[i].to_string(),
        ]
    });
    for row in rows.chain(body) {
        w.write_record(&row).map_err(|e| data_err(&path, e))?;
    }
    w.flush().map_err(|e| data_err(&path, e))?;

    #[derive(Serialize)]
    struct Summary<'a> {
        config: &'a dtigp_core::data::SyntheticConfig,
        dataset: DatasetSummary,
        noisy_compounds: usize,
    }
    write_json(
        &cfg.out_file("synth_summary.json"),
        &Summary {
            config: &sc,
            dataset: data.dataset.summary(),
            noisy_compounds: t.noisy_compounds.len(),
        },
    )
}

#[derive(Serialize)]
struct FoldCount {
    fold: usize,
    interactions: usize,
    active: usize,
    inactive: usize,
}

pub fn prepare(cfg: &RunConfig) -> CliResult<()> {
    let ip = cfg.interactions_path();
    require_file(&ip)?;
    let fs = load_features(cfg)?;
    ensure_out(cfg)?;
    let raw = load_interactions(&ip, &cfg.prepare.schema, cfg.prepare.reduction)
        .map_err(|e| data_err(&ip, e))?;
    if raw.is_empty() {
        return Err(data_err(&ip, "no interactions"));
    }
    fs.check_covers(&raw).at(Stage::Data)?;
    let ds = binarize(&raw, cfg.prepare.threshold, cfg.prepare.direction);
    let ds = assign_folds(&ds, cfg.split.n_folds, &mut cfg.rng(streams::FOLDS)).at(Stage::Data)?;
    write_interactions(&cfg.prepared_path(), &ds).at(Stage::Data)?;

    let folds = (0..cfg.split.n_folds)
        .map(|f| {
            let recs = ds.records.iter().filter(|r| r.fold == Some(f));
            let (n, a) = recs.fold((0, 0), |(n, a), r| (n + 1, a + usize::from(r.label == Some(true))));
            FoldCount {
                fold: f,
                interactions: n,
                active: a,
                inactive: n - a,
            }
        })
        .collect::<Vec<_>>();
    #[derive(Serialize)]
    struct Summary {
        dataset: DatasetSummary,
        threshold: f64,
        direction: dtigp_core::data::ThresholdDirection,
        n_folds: usize,
        folds: Vec<FoldCount>,
    }
    write_json(
        &cfg.out_file("prepare_summary.json"),
        &Summary {
            dataset: ds.summary(),
            threshold: cfg.prepare.threshold,
            direction: cfg.prepare.direction,
            n_folds: cfg.split.n_folds,
            folds,
        },
    )
}

fn load_prepared(cfg: &RunConfig) -> CliResult<(Dataset, FeatureStore)> {
    let path = cfg.prepared_path();
    require_file(&path)?;
    let mut ds = load_interactions(&path, &ColumnSchema::default(), Reduction::First).map_err(|e| data_err(&path, e))?;
    if ds.records.iter().any(|r| r.label.is_none() || r.fold.is_none()) {
        return Err(data_err(&path, "records lack labels or folds; run `prepare` first"));
    }
    ds.n_folds = cfg.split.n_folds;
    let fs = load_features(cfg)?;
    fs.check_covers(&ds).at(Stage::Data)?;
    Ok((ds, fs))
}

pub fn train(cfg: &RunConfig) -> CliResult<()> {
    let (ds, fs) = load_prepared(cfg)?;
    let (train, _) = ds.split(&cfg.split.test_folds);
    if train.is_empty() {
        return Err(CliError::Data("training folds are empty".into()));
    }
    let tc = cfg.train_config();
    let (model, trace) = train_model(&train, &fs, &tc).at(Stage::Train)?;
    let map = tc.map_mode;
    let anchors = anchor_ids(&train, tc.encoder.max_anchors, tc.seed);
    let n_params = model.n_params();
    Checkpoint::new(model, tc.clone(), anchors)
        .save(&cfg.checkpoint_path(map))
        .at(Stage::Data)?;
    write_trace(&cfg.out_file(if map { "trace_map.csv" } else { "trace.csv" }), &trace).at(Stage::Data)?;

    #[derive(Serialize)]
    struct Summary {
        map_mode: bool,
        n_train: usize,
        n_params: usize,
        epochs: usize,
        initial_elbo: Option<f64>,
        final_elbo: Option<f64>,
    }
    write_json(
        &cfg.out_file(if map { "train_summary_map.json" } else { "train_summary.json" }),
        &Summary {
            map_mode: map,
            n_train: train.len(),
            n_params,
            epochs: tc.epochs,
            initial_elbo: trace.initial(),
            final_elbo: trace.last(),
        },
    )
}

fn load_checkpoint(cfg: &RunConfig, map: bool) -> CliResult<Checkpoint> {
    let path = cfg.checkpoint_path(map);
    require_file(&path)?;
    Checkpoint::load(&path).map_err(|e| data_err(&path, e))
}

/// Test-fold records resolved against the feature store.
struct TestSet {
    ds: Dataset,
    index: PairIndex,
    labels: Vec<bool>,
}

impl TestSet {
    fn ids(&self) -> (Vec<String>, Vec<String>) {
        self.ds
            .records
            .iter()
            .map(|r| (r.compound_id.clone(), r.protein_id.clone()))
            .unzip()
    }
}

fn load_test(cfg: &RunConfig) -> CliResult<TestSet> {
    let (ds, fs) = load_prepared(cfg)?;
    let (_, test) = ds.split(&cfg.split.test_folds);
    let index = PairIndex::new(&test, &fs).at(Stage::Data)?;
    let labels = test.labels().at(Stage::Data)?;
    Ok(TestSet { ds: test, index, labels })
}

fn predict_test(model: &ModelParams, test: &TestSet, kind: CovarianceKind) -> dtigp_core::Result<PredictiveDistribution> {
    predict(Inputs::Pairs(&test.index), model, kind)
}

pub fn predict_cmd(cfg: &RunConfig) -> CliResult<()> {
    let ck = load_checkpoint(cfg, cfg.model.map_mode)?;
    let test = load_test(cfg)?;
    if test.ds.is_empty() {
        return Err(CliError::Data("test folds are empty".into()));
    }
    let dist = predict_test(&ck.model, &test, CovarianceKind::Diagonal).at(Stage::Data)?;
    let var = dist.variance();
    let path = cfg.out_file(if cfg.model.map_mode { "predictions_map.csv" } else { "predictions.csv" });
    let mut w = csv::Writer::from_path(&path).map_err(|e| data_err(&path, e))?;
    let mut put = |row: [String; 6]| w.write_record(&row).map_err(|e| data_err(&path, e));
    put(["compound_id", "protein_id", "label", "latent_mean", "latent_var", "class_prob"].map(String::from))?;
    for (i, r) in test.ds.records.iter().enumerate() {
        put([
            r.compound_id.clone(),
            r.protein_id.clone(),
            u8::from(test.labels[i]).to_string(),
            dist.mean[i].to_string(),
            var[i].to_string(),
            dist.class_prob[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| data_err(&path, e))
}

/// Predictive distribution and posterior draws on the test set.
struct Posterior {
    dist: PredictiveDistribution,
    samples: PredictiveSamples,
    prob_mean: Vec<f64>,
    prob_std: Vec<f64>,
}

fn posterior(cfg: &RunConfig, model: &ModelParams, test: &TestSet) -> dtigp_core::Result<Posterior> {
    let joint = cfg.selection.joint;
    let kind = if joint { CovarianceKind::Full } else { CovarianceKind::Diagonal };
    let mut dist = predict_test(model, test, kind)?;
    let samples = sample_predictive(&dist, cfg.selection.n_samples, joint, &mut cfg.rng(streams::POSTERIOR))?;
    let (prob_mean, prob_std) = class_prob_moments(&samples);
    dist.class_prob_std = Some(prob_std.clone());
    Ok(Posterior {
        dist,
        samples,
        prob_mean,
        prob_std,
    })
}

/// Draws restricted to the items in `keep`.
fn restrict(ps: &PredictiveSamples, keep: &[usize]) -> PredictiveSamples {
    PredictiveSamples {
        values: ps.by_item().select_rows(keep).transpose(),
        seed: ps.seed,
        joint: ps.joint,
    }
}

/// `Φ(mean)` of the MAP checkpoint, or of the loaded model if it is one.
fn map_probabilities(cfg: &RunConfig, primary: &Checkpoint, test: &TestSet) -> CliResult<Option<Vec<f64>>> {
    let model = if primary.model.map_mode {
        primary.model.clone()
    } else if cfg.checkpoint_path(true).is_file() {
        load_checkpoint(cfg, true)?.model
    } else {
        return Ok(None);
    };
    let d = predict_test(&model, test, CovarianceKind::Diagonal).at(Stage::Data)?;
    Ok(Some(d.class_prob))
}

/// Item scores of `method` over the candidates; higher is better.
fn method_scores(
    cfg: &RunConfig,
    method: SelectionMethod,
    ps: &PredictiveSamples,
    bayes_prob: &[f64],
    map_prob: Option<&[f64]>,
) -> dtigp_core::Result<Vec<f64>> {
    let n = ps.n_items();
    match method {
        SelectionMethod::Score => Ok(score_select(&precedence_from_samples(ps), n)?.scores),
        SelectionMethod::Eigen => {
            let sel = &cfg.selection;
            Ok(eigen_select(&precedence_from_samples(ps), n, sel.power_tol, sel.power_max_iter)?.scores)
        }
        SelectionMethod::BayesMean => Ok(bayes_prob.to_vec()),
        SelectionMethod::MapMean => map_prob.map(<[f64]>::to_vec).ok_or_else(|| {
            dtigp_core::Error::InvalidArgument("map_mean needs a MAP checkpoint; run `train --map`".into())
        }),
    }
}

fn pick<T: Clone>(v: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| v[i].clone()).collect()
}

pub fn select(cfg: &RunConfig) -> CliResult<()> {
    let sel_cfg = &cfg.selection;
    let ck = load_checkpoint(cfg, cfg.model.map_mode)?;
    let test = load_test(cfg)?;
    ensure_out(cfg)?;
    let n = test.ds.len();
    if n == 0 {
        return Err(CliError::Selection("no candidates: test folds are empty".into()));
    }
    let map_prob = if sel_cfg.method == SelectionMethod::MapMean {
        map_probabilities(cfg, &ck, &test)?
    } else {
        None
    };
    let post = posterior(cfg, &ck.model, &test).at(Stage::Select)?;
    let keep: Vec<usize> = match sel_cfg.tau {
        Some(tau) => (0..n).filter(|&i| post.prob_std[i] < tau).collect(),
        None => (0..n).collect(),
    };
    if sel_cfg.k > keep.len() {
        return Err(CliError::Selection(format!(
            "k = {} exceeds the {} candidates left after rejection",
            sel_cfg.k,
            keep.len()
        )));
    }
    let ps = restrict(&post.samples, &keep);
    let bayes = pick(&post.dist.class_prob, &keep);
    let map_sub = map_prob.as_ref().map(|p| pick(p, &keep));
    let scores = method_scores(cfg, sel_cfg.method, &ps, &bayes, map_sub.as_deref()).at(Stage::Select)?;
    let mut sel = SelectionResult {
        method: sel_cfg.method,
        k: sel_cfg.k,
        indices: top_k(&scores, sel_cfg.k).at(Stage::Select)?,
        scores,
        fdr_samples: Vec::new(),
    };
    let fdr = fdr_posterior(&mut sel, &ps, &sel_cfg.fdr_thresholds, None).at(Stage::Select)?;

    // back to test-set positions; rejected items never appear in the output
    let mut full_scores = vec![f64::NAN; n];
    for (c, &i) in keep.iter().enumerate() {
        full_scores[i] = sel.scores[c];
    }
    let full = SelectionResult {
        indices: sel.indices.iter().map(|&c| keep[c]).collect(),
        scores: full_scores,
        ..sel.clone()
    };
    let (compound, protein) = test.ids();
    let ids = ItemIds {
        compound: &compound,
        protein: &protein,
    };
    write_selection(&cfg.out_file("selection.csv"), &full, &ids, &post.prob_mean, &post.prob_std).at(Stage::Data)?;
    write_fdr_samples(&cfg.out_file("fdr_samples.csv"), &sel.fdr_samples).at(Stage::Data)?;

    let realized = full.indices.iter().filter(|&&i| !test.labels[i]).count() as f64 / full.k as f64;
    #[derive(Serialize)]
    struct Summary {
        method: SelectionMethod,
        k: usize,
        n_items: usize,
        n_candidates: usize,
        tau: Option<f64>,
        joint: bool,
        n_samples: usize,
        fdr_posterior: FdrSummary,
        realized_fdr: f64,
    }
    write_json(
        &cfg.out_file("selection_summary.json"),
        &Summary {
            method: sel_cfg.method,
            k: sel_cfg.k,
            n_items: n,
            n_candidates: keep.len(),
            tau: sel_cfg.tau,
            joint: sel_cfg.joint,
            n_samples: sel_cfg.n_samples,
            fdr_posterior: fdr,
            realized_fdr: realized,
        },
    )
}

#[derive(Serialize)]
struct SelectorReport {
    method: SelectionMethod,
    /// `(K, realized FDR)`
    fdr: Vec<(usize, f64)>,
    skipped_ks: Vec<usize>,
}

#[derive(Serialize)]
struct RejectionReport {
    tau: f64,
    n_kept: usize,
    auroc: Option<f64>,
    aupr: Option<f64>,
    ece: Option<f64>,
}

pub fn evaluate(cfg: &RunConfig) -> CliResult<()> {
    let ev = &cfg.eval;
    let ck = load_checkpoint(cfg, cfg.model.map_mode)?;
    let test = load_test(cfg)?;
    ensure_out(cfg)?;
    let n = test.ds.len();
    if n == 0 {
        return Err(CliError::Evaluation("test folds are empty".into()));
    }
    let y = &test.labels;
    let post = posterior(cfg, &ck.model, &test).at(Stage::Evaluate)?;
    let prob = &post.dist.class_prob;

    let global_auroc = auroc(y, prob).at(Stage::Evaluate)?;
    let global_aupr = aupr(y, prob).at(Stage::Evaluate)?;
    write_xy(&cfg.out_file("roc.csv"), &roc_curve(y, prob).at(Stage::Evaluate)?).at(Stage::Data)?;
    write_xy(&cfg.out_file("pr.csv"), &pr_curve(y, prob).at(Stage::Evaluate)?).at(Stage::Data)?;
    let taskwise = taskwise_eval(&test.ds, prob, ev.min_pos, ev.min_neg).at(Stage::Evaluate)?;
    taskwise.write_csv(&cfg.out_file("taskwise.csv")).at(Stage::Data)?;
    let calib = reliability(prob, y, ev.bins).at(Stage::Evaluate)?;
    calib.write_csv(&cfg.out_file("reliability.csv")).at(Stage::Data)?;

    let map_prob = if ev.selectors.contains(&SelectionMethod::MapMean) {
        map_probabilities(cfg, &ck, &test)?
    } else {
        None
    };
    let mut selectors = Vec::new();
    let mut skipped_selectors = Vec::new();
    let hist_k = cfg.selection.k.min(n);
    for &method in &ev.selectors {
        if method == SelectionMethod::MapMean && map_prob.is_none() {
            // no `train --map` run in this output directory
            skipped_selectors.push(method);
            continue;
        }
        let scores = method_scores(cfg, method, &post.samples, prob, map_prob.as_deref()).at(Stage::Evaluate)?;
        let (ks, skipped): (Vec<usize>, Vec<usize>) = ev.ks.iter().partition(|&&k| k <= n);
        let fdr = fdr_curve(|k| top_k(&scores, k), &ks, y).at(Stage::Evaluate)?;
        write_fdr_curve(&cfg.out_file(&format!("fdr_{}.csv", method.name())), &fdr).at(Stage::Data)?;
        let sel = SelectionResult {
            method,
            k: hist_k,
            indices: top_k(&scores, hist_k).at(Stage::Evaluate)?,
            scores,
            fdr_samples: Vec::new(),
        };
        topk_histogram(&sel, ProbSource::Samples(&post.samples), ev.bins)
            .at(Stage::Evaluate)?
            .write_csv(&cfg.out_file(&format!("topk_hist_{}.csv", method.name())))
            .at(Stage::Data)?;
        selectors.push(SelectorReport {
            method,
            fdr,
            skipped_ks: skipped,
        });
    }

    let rejection = ev.tau.map(|tau| {
        let keep: Vec<usize> = (0..n).filter(|&i| post.prob_std[i] < tau).collect();
        let (yk, pk) = (pick(y, &keep), pick(prob, &keep));
        RejectionReport {
            tau,
            n_kept: keep.len(),
            auroc: auroc(&yk, &pk).ok(),
            aupr: aupr(&yk, &pk).ok(),
            ece: (!keep.is_empty()).then(|| reliability(&pk, &yk, ev.bins).map(|r| r.ece).ok()).flatten(),
        }
    });

    #[derive(Serialize)]
    struct Summary {
        n_test: usize,
        n_active: usize,
        map_mode: bool,
        auroc: f64,
        aupr: f64,
        ece: f64,
        taskwise_proteins: usize,
        taskwise_auroc_mean: Option<f64>,
        taskwise_auroc_std: Option<f64>,
        taskwise_aupr_mean: Option<f64>,
        taskwise_aupr_std: Option<f64>,
        selectors: Vec<SelectorReport>,
        skipped_selectors: Vec<SelectionMethod>,
        rejection: Option<RejectionReport>,
    }
    write_json(
        &cfg.out_file("evaluate_summary.json"),
        &Summary {
            n_test: n,
            n_active: y.iter().filter(|&&v| v).count(),
            map_mode: ck.model.map_mode,
            auroc: global_auroc,
            aupr: global_aupr,
            ece: calib.ece,
            taskwise_proteins: taskwise.rows.len(),
            taskwise_auroc_mean: taskwise.auroc_mean,
            taskwise_auroc_std: taskwise.auroc_std,
            taskwise_aupr_mean: taskwise.aupr_mean,
            taskwise_aupr_std: taskwise.aupr_std,
            selectors,
            skipped_selectors,
            rejection,
        },
    )
}
