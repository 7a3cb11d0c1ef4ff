//! Acceptance criteria, one PASS/FAIL line each.
//!
//! `cargo test --test acceptance -- 3 7` runs only criteria 3 and 7.

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dtigp_core::data::{
    assign_folds, separable_2d, synthetic_generate, Dataset, FeatureStore, ProbitGpTask, SyntheticConfig,
};
use dtigp_core::encoder::{EncoderConfig, EncoderParams, PairIndex};
use dtigp_core::eval::{aupr, auroc, reliability};
use dtigp_core::linalg::{gauss_hermite, power_iteration, Matrix, SeededRng, PERRON_EPSILON};
use dtigp_core::ranking::{
    eigen_select, fdr_posterior, mean_select, precedence_analytic, precedence_from_samples, sample_predictive,
    score_select, PrecedenceMatrix, SelectionMethod,
};
use dtigp_core::svgp::{
    init_model, kl_gaussians, objective_with_grad, predict, predict_embeddings, train, train_embeddings, Covariance,
    CovarianceKind, Inputs, KernelParams, PredictiveDistribution, TrainConfig, VariationalState,
};
use nalgebra::{DMatrix, DVector};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

type Check = fn() -> Outcome;

fn main() {
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, Option<u64>, Check); 10] = [
        (1, "ELBO gradients vs central differences", Some(30), gradient_correctness),
        (2, "Gaussian KL vs Monte Carlo", None, variational_math),
        (3, "precedence consistency", None, precedence_consistency),
        (4, "selection oracles on transitive tournaments", None, selection_oracles),
        (5, "metric oracles", None, metric_oracles),
        (6, "learning sanity on separable 2-D data", Some(60), learning_sanity),
        (7, "calibration machinery", Some(300), calibration_machinery),
        (8, "enrichment ordering", Some(600), enrichment_ordering),
        (9, "FDR posterior coverage", None, fdr_coverage),
        (10, "pipeline determinism", None, determinism),
    ];
    let (mut ran, mut passed) = (0, 0);
    for (id, name, limit, check) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let mut out = std::panic::catch_unwind(check)
            .unwrap_or_else(|_| Outcome::new(false, "panicked"));
        let secs = start.elapsed().as_secs_f64();
        if let Some(limit) = limit {
            if start.elapsed() > Duration::from_secs(limit) {
                out.pass = false;
                out.detail += &format!("; runtime exceeds {limit} s");
            }
        }
        passed += usize::from(out.pass);
        let verdict = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {id:>2} {verdict}  {name}: {} [{secs:.1} s]", out.detail);
    }
    println!("acceptance: {passed}/{ran} criteria passed");
    if passed < ran {
        std::process::exit(1);
    }
}

/// Enough optimizer steps for a few thousand points to settle; the
/// defaults are sized for large minibatched datasets.
fn converged(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        epochs: 300,
        learning_rate: 0.05,
        ..Default::default()
    }
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

// ---------------------------------------------------------------- 1

/// Tiny pair datasets with the encoder in the loop; every packed parameter
/// is checked against `(F(θ + h) − F(θ − h)) / 2h`.
fn gradient_correctness() -> Outcome {
    const REL: f64 = 1e-4;
    // round-off of the central difference at these objective magnitudes
    const ABS_FLOOR: f64 = 1e-8;
    let quad = gauss_hermite(20);
    let (mut checked, mut bad, mut worst) = (0usize, Vec::new(), 0.0f64);
    let instances = 24;
    for inst in 0..instances {
        let mut rng = SeededRng::new(1000 + inst);
        let map_mode = inst % 4 == 3;
        let data = synthetic_generate(&SyntheticConfig {
            n_compounds: 2 + rng.below(3),
            n_proteins: 2 + rng.below(2),
            compound_dim: 10,
            protein_dim: 3,
            sparsity: 1.0,
            bit_density: 0.4,
            seed: inst,
            ..Default::default()
        })
        .unwrap();
        let (ds, fs) = (data.dataset, data.features);
        let n = ds.len();
        assert!(n <= 12);
        let labels = ds.labels().unwrap();
        let index = PairIndex::new(&ds, &fs).unwrap();
        let cfg = TrainConfig {
            m: 1 + rng.below(4),
            map_mode,
            seed: inst,
            encoder: EncoderConfig {
                hidden: 3 + rng.below(3),
                embed: 2 + rng.below(5),
                max_anchors: None,
            },
            ..Default::default()
        };
        let anchor_rows: Vec<&[f64]> = fs.proteins.values().map(Vec::as_slice).collect();
        let anchors = Matrix::from_rows(&anchor_rows).unwrap();
        let enc = EncoderParams::init(&cfg.encoder, fs.compound_dim, anchors, fs.mean_bits(), &mut rng.fork(0)).unwrap();
        let mut model = init_model(Inputs::Pairs(&index), &labels, &cfg, Some(enc)).unwrap();
        let mut theta = model.pack();
        // away from the prior-matching initialization
        theta.iter_mut().for_each(|t| *t += 0.3 * rng.normal());
        model.unpack(&theta).unwrap();
        let idx: Vec<usize> = (0..n).collect();
        let value = |th: &[f64]| {
            let mut m = model.clone();
            m.unpack(th).unwrap();
            objective_with_grad(&m, Inputs::Pairs(&index), &labels, &idx, n, &quad, true).unwrap().0
        };
        let (_, grad) = objective_with_grad(&model, Inputs::Pairs(&index), &labels, &idx, n, &quad, true).unwrap();
        for k in 0..theta.len() {
            let h = 1e-5 * (1.0 + theta[k].abs());
            let mut tp = theta.clone();
            tp[k] += h;
            let mut tm = theta.clone();
            tm[k] -= h;
            let fd = (value(&tp) - value(&tm)) / (2.0 * h);
            let err = (grad[k] - fd).abs();
            let scale = grad[k].abs().max(fd.abs());
            checked += 1;
            if scale > 0.0 && err > ABS_FLOOR {
                worst = worst.max(err / scale);
            }
            if err > REL * scale && err > ABS_FLOOR {
                bad.push(format!("instance {inst} param {k}: {} vs {fd}", grad[k]));
            }
        }
    }
    Outcome::new(
        bad.is_empty(),
        format!(
            "{instances} instances, {checked} parameters, worst relative error {worst:.1e}{}",
            bad.first().map_or(String::new(), |b| format!("; {} failing, e.g. {b}", bad.len()))
        ),
    )
}

// ---------------------------------------------------------------- 2

fn rbf(z: &Matrix, kp: &KernelParams) -> DMatrix<f64> {
    DMatrix::from_fn(z.rows(), z.rows(), |i, j| {
        let d2: f64 = z.row(i).iter().zip(z.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
        kp.outputscale * (-d2 / (2.0 * kp.lengthscale * kp.lengthscale)).exp()
    })
}

fn random_state(rng: &mut SeededRng, m: usize, d: usize) -> (VariationalState, KernelParams) {
    let mut z = Matrix::zeros(m, d);
    z.data_mut().iter_mut().for_each(|v| *v = rng.normal());
    let kp = KernelParams {
        outputscale: (0.5 * rng.normal()).exp(),
        lengthscale: 0.5 + (0.3 * rng.normal()).exp(),
        mean_const: 0.5 * rng.normal(),
    };
    let mu = (0..m).map(|_| kp.mean_const + 0.7 * rng.normal()).collect();
    let mut l = Matrix::zeros(m, m);
    for i in 0..m {
        for j in 0..i {
            l[(i, j)] = 0.3 * rng.normal();
        }
        l[(i, i)] = 0.5 * (0.3 * rng.normal()).exp();
    }
    (VariationalState { z, mu, l_sigma: l }, kp)
}

fn variational_math() -> Outcome {
    let jitter = 1e-6;
    let (m, d, n_mc) = (4, 3, 100_000);
    let mut misses = Vec::new();
    let mut worst_z = 0.0f64;
    for inst in 0..20 {
        let mut rng = SeededRng::new(2000 + inst);
        let (vs, kp) = random_state(&mut rng, m, d);
        let kl = kl_gaussians(&vs, &kp, jitter).unwrap();
        let k = rbf(&vs.z, &kp) + DMatrix::identity(m, m) * jitter;
        let kc = k.clone().cholesky().expect("prior is positive definite");
        let log_det_k = 2.0 * kc.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let l = to_na(&vs.l_sigma);
        let log_det_s = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let mu = DVector::from_column_slice(&vs.mu);
        let prior_mean = DVector::from_element(m, kp.mean_const);
        let (mut sum, mut sum2) = (0.0, 0.0);
        for _ in 0..n_mc {
            let eps = DVector::from_fn(m, |_, _| rng.normal());
            let u = &mu + &l * &eps;
            let r = &u - &prior_mean;
            let log_q = -0.5 * eps.dot(&eps) - 0.5 * log_det_s;
            let log_p = -0.5 * r.dot(&kc.solve(&r)) - 0.5 * log_det_k;
            let x = log_q - log_p;
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n_mc as f64;
        let se = ((sum2 / n_mc as f64 - mean * mean) / (n_mc - 1) as f64).sqrt();
        let z = (kl - mean).abs() / se;
        worst_z = worst_z.max(z);
        if z > 3.0 {
            misses.push(format!("instance {inst}: closed {kl:.5} vs MC {mean:.5} ± {se:.1e}"));
        }
    }
    let mut worst_zero = 0.0f64;
    for inst in 0..20 {
        let mut rng = SeededRng::new(2100 + inst);
        let (mut vs, kp) = random_state(&mut rng, m, d);
        vs.mu = vec![kp.mean_const; m];
        let kc = (rbf(&vs.z, &kp) + DMatrix::identity(m, m) * jitter).cholesky().unwrap();
        let lk = kc.l();
        vs.l_sigma = Matrix::from_vec(m, m, lk.transpose().as_slice().to_vec()).unwrap();
        worst_zero = worst_zero.max(kl_gaussians(&vs, &kp, jitter).unwrap().abs());
    }
    let pass = misses.is_empty() && worst_zero <= 1e-10;
    Outcome::new(
        pass,
        format!(
            "20 instances, max |closed − MC| = {worst_z:.2} SE, {} beyond 3 SE{}; max |KL| at prior {worst_zero:.1e}",
            misses.len(),
            misses.first().map_or(String::new(), |m| format!(" ({m})"))
        ),
    )
}

// ---------------------------------------------------------------- 3

fn random_distribution(rng: &mut SeededRng, n: usize, full: bool) -> PredictiveDistribution {
    let mean: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let cov = if full {
        let r = 3;
        let mut b = Matrix::zeros(n, r);
        b.data_mut().iter_mut().for_each(|v| *v = 0.5 * rng.normal());
        let mut c = b.matmul_t(&b).unwrap();
        for i in 0..n {
            c[(i, i)] += 0.05 + rng.uniform();
        }
        Covariance::Full(c)
    } else {
        Covariance::Diagonal((0..n).map(|_| 0.05 + 1.5 * rng.uniform()).collect())
    };
    PredictiveDistribution {
        class_prob: vec![0.5; n],
        mean,
        cov,
        class_prob_std: None,
        map_mode: false,
    }
}

fn complement_exact(p: &PrecedenceMatrix) -> bool {
    let m = p.matrix();
    (0..p.len()).all(|i| (0..p.len()).all(|j| m[(i, j)] + m[(j, i)] == 1.0))
}

fn precedence_consistency() -> Outcome {
    let s = 100_000;
    let (mut pairs, mut beyond, mut exact_ok) = (0usize, 0usize, true);
    let mut worst_z = 0.0f64;
    let mut rng = SeededRng::new(3000);
    for &n in &[2usize, 5, 10, 20, 35, 50] {
        for full in [false, true] {
            let dist = random_distribution(&mut rng, n, full);
            let ps = sample_predictive(&dist, s, full, &mut rng.fork(n as u64)).unwrap();
            let emp = precedence_from_samples(&ps);
            let ana = precedence_analytic(&dist);
            exact_ok &= complement_exact(&emp) && complement_exact(&ana);
            for i in 0..n {
                for j in (i + 1)..n {
                    let p = ana.get(i, j);
                    let se = (p * (1.0 - p) / s as f64).sqrt();
                    let diff = (emp.get(i, j) - p).abs();
                    pairs += 1;
                    let z = if se > 0.0 { diff / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
                    worst_z = worst_z.max(z);
                    beyond += usize::from(z > 3.0);
                }
            }
        }
    }
    let expected = pairs as f64 * 0.0027;
    Outcome::new(
        exact_ok && beyond == 0,
        format!(
            "P + Pᵀ = 1 exactly: {exact_ok}; {pairs} distinct pairs at S = {s}, {beyond} beyond 3 SE \
             (about {expected:.1} expected by chance), max {worst_z:.2} SE"
        ),
    )
}

// ---------------------------------------------------------------- 4

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// `P_ij = 1` when `i` is ranked above `j` in `order` (best first).
fn tournament(order: &[usize]) -> Matrix {
    let n = order.len();
    let mut rank = vec![0; n];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let mut p = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            p[(i, j)] = match rank[i].cmp(&rank[j]) {
                std::cmp::Ordering::Less => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Greater => 0.0,
            };
        }
    }
    p
}

/// Perron vector of `P + ε11ᵀ` from `v ∝ (λI − P)⁻¹1`, with `λ` the root
/// above the spectrum of `P` of `ε·1ᵀ(λI − P)⁻¹1 = 1`. Rows are put in
/// win-count order first so `λI − P` is upper triangular and back
/// substitution involves no cancellation.
fn secular_perron(p: &Matrix) -> Vec<f64> {
    let n = p.rows();
    let mut perm: Vec<usize> = (0..n).collect();
    let wins = |i: usize| p.row(i).iter().sum::<f64>();
    perm.sort_by(|&a, &b| wins(b).total_cmp(&wins(a)));
    let pn = DMatrix::from_fn(n, n, |i, j| p[(perm[i], perm[j])]);
    let ones = DVector::from_element(n, 1.0);
    let rho = 0.5;
    let solve = |delta: f64| {
        let a = DMatrix::identity(n, n) * (rho + delta) - &pn;
        a.solve_upper_triangular(&ones).expect("λ above the spectrum")
    };
    let f = |delta: f64| PERRON_EPSILON * solve(delta).sum() - 1.0;
    // bisection on log δ; f decreases in δ
    let (mut lo, mut hi) = ((1e-15f64).ln(), (2.0 * n as f64).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid.exp()) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = solve((0.5 * (lo + hi)).exp());
    let s = x.sum();
    let mut v = vec![0.0; n];
    for (i, &orig) in perm.iter().enumerate() {
        v[orig] = x[i] / s;
    }
    v
}

/// Dominant eigenvector from a dense Schur decomposition and an SVD null
/// vector of `M − λI`.
fn dense_perron(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let a = to_na(m) + DMatrix::from_element(n, n, PERRON_EPSILON);
    let lambda = a
        .clone()
        .schur()
        .complex_eigenvalues()
        .iter()
        .map(|c| c.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let svd = (a - DMatrix::identity(n, n) * lambda).svd(false, true);
    let vt = svd.v_t.expect("requested");
    let k = svd.singular_values.imin();
    let v: Vec<f64> = vt.row(k).iter().copied().collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn selection_oracles() -> Outcome {
    let (tol, max_iter) = (1e-14, 100_000_000);
    let (mut cases, mut order_fail, mut worst) = (0usize, 0usize, 0.0f64);
    for n in 1..=6 {
        for order in permutations(n) {
            let p = PrecedenceMatrix::from_matrix(tournament(&order)).unwrap();
            let oracle = secular_perron(p.matrix());
            for k in 1..=n {
                cases += 1;
                let want = &order[..k];
                let s = score_select(&p, k).unwrap();
                let e = eigen_select(&p, k, tol, max_iter).unwrap();
                order_fail += usize::from(s.indices != want || e.indices != want);
                for (a, b) in e.scores.iter().zip(&oracle) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    // stochastic tournaments against a general dense eigensolver
    let mut worst_dense = 0.0f64;
    let mut rng = SeededRng::new(4000);
    for _ in 0..50 {
        let n = 2 + rng.below(5);
        let mut m = Matrix::filled(n, n, 0.5);
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.05 + 0.9 * rng.uniform();
                m[(i, j)] = v;
                m[(j, i)] = 1.0 - v;
            }
        }
        let (v, _) = power_iteration(&m, 1e-14, 1_000_000).unwrap();
        for (a, b) in v.iter().zip(dense_perron(&m)) {
            worst_dense = worst_dense.max((a - b).abs());
        }
    }
    let pass = order_fail == 0 && worst <= 1e-6 && worst_dense <= 1e-6;
    Outcome::new(
        pass,
        format!(
            "{cases} (tournament, K) cases, {order_fail} wrong top-K; eigen scores vs secular-equation oracle \
             max {worst:.1e}; 50 stochastic tournaments vs dense eigensolver max {worst_dense:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- 5

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn auroc_oracle(y: &[bool], s: &[f64]) -> f64 {
    let (mut twice, mut pairs) = (0u64, 0u64);
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] && !y[j] {
                pairs += 1;
                twice += if s[i] > s[j] { 2 } else { u64::from(s[i] == s[j]) };
            }
        }
    }
    twice as f64 / (2 * pairs) as f64
}

/// Exact rational average precision, rounded once.
fn aupr_oracle(y: &[bool], s: &[f64]) -> f64 {
    let ahead = |j: usize, i: usize| s[j] > s[i] || (s[j] == s[i] && j <= i);
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let (mut num, mut den) = (0u128, 1u128);
    for &i in &pos {
        let above = (0..y.len()).filter(|&j| ahead(j, i)).count() as u128;
        let hits = pos.iter().filter(|&&j| ahead(j, i)).count() as u128;
        num = num * above + hits * den;
        den *= above;
        let g = gcd(num, den);
        (num, den) = (num / g, den / g);
    }
    num as f64 / (den * pos.len() as u128) as f64
}

fn metric_oracles() -> Outcome {
    let mut rng = SeededRng::new(5000);
    let (mut done, mut mismatches) = (0, 0);
    while done < 1000 {
        let n = 2 + rng.below(11);
        let y: Vec<bool> = (0..n).map(|_| rng.bernoulli(0.5)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.below(5) as f64 / 4.0).collect();
        let p = y.iter().filter(|&&v| v).count();
        if p == 0 || p == n {
            continue;
        }
        done += 1;
        mismatches += usize::from(auroc(&y, &s).unwrap() != auroc_oracle(&y, &s));
        mismatches += usize::from(aupr(&y, &s).unwrap() != aupr_oracle(&y, &s));
    }
    let ex_auroc = auroc(&[true, false, true, false], &[0.9, 0.8, 0.7, 0.6]).unwrap();
    let ex_aupr = aupr(&[true, false, true], &[0.9, 0.8, 0.7]).unwrap();
    let pass = mismatches == 0 && ex_auroc == 0.75 && ex_aupr == 5.0 / 6.0;
    Outcome::new(
        pass,
        format!("{done} random instances, {mismatches} mismatches; worked examples AUROC {ex_auroc}, AUPR {ex_aupr}"),
    )
}

// ---------------------------------------------------------------- 6

fn learning_sanity() -> Outcome {
    let mut rng = SeededRng::new(6000);
    let train_set = separable_2d(2000, &mut rng);
    let test = separable_2d(2000, &mut rng);
    let cfg = TrainConfig { seed: 6, ..Default::default() };
    let (model, trace) = train_embeddings(&train_set.inputs, &train_set.labels, &cfg).unwrap();
    let dist = predict_embeddings(&test.inputs, &model, CovarianceKind::Diagonal).unwrap();
    let a = auroc(&test.labels, &dist.class_prob).unwrap();
    let (first, last) = (trace.initial().unwrap(), trace.last().unwrap());
    Outcome::new(
        a >= 0.95 && last > first,
        format!("test AUROC {a:.4} (≥ 0.95); ELBO {first:.1} → {last:.1}"),
    )
}

// ---------------------------------------------------------------- 7

fn calibration_machinery() -> Outcome {
    let mut eces = Vec::new();
    for seed in 0..5u64 {
        let mut rng = SeededRng::new(7000 + seed);
        let task = ProbitGpTask::new(2, 1.0, 1.0, 0.0, 200, &mut rng);
        let train_set = task.draw(2000, &mut rng);
        let test = task.draw(10_000, &mut rng);
        let (model, _) = train_embeddings(&train_set.inputs, &train_set.labels, &converged(seed)).unwrap();
        let dist = predict_embeddings(&test.inputs, &model, CovarianceKind::Diagonal).unwrap();
        eces.push(reliability(&dist.class_prob, &test.labels, 10).unwrap().ece);
    }
    let mean = eces.iter().sum::<f64>() / eces.len() as f64;
    let list: Vec<String> = eces.iter().map(|e| format!("{e:.4}")).collect();
    Outcome::new(mean < 0.05, format!("mean ECE {mean:.4} (< 0.05) over seeds [{}]", list.join(", ")))
}

// ---------------------------------------------------------------- 8

struct Split {
    train: Dataset,
    test: Dataset,
    features: FeatureStore,
}

fn hetero_split(seed: u64) -> Split {
    let data = synthetic_generate(&SyntheticConfig {
        n_compounds: 400,
        n_proteins: 10,
        heteroscedastic: true,
        seed,
        ..Default::default()
    })
    .unwrap();
    let ds = assign_folds(&data.dataset, 6, &mut SeededRng::new(seed).fork(10)).unwrap();
    let (train, test) = ds.split(&[0]);
    Split {
        train,
        test,
        features: data.features,
    }
}

fn realized_fdr(indices: &[usize], labels: &[bool]) -> f64 {
    indices.iter().filter(|&&i| !labels[i]).count() as f64 / indices.len() as f64
}

fn enrichment_ordering() -> Outcome {
    let k = 50;
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    let seeds = 10u64;
    for seed in 0..seeds {
        let sp = hetero_split(8000 + seed);
        let labels = sp.test.labels().unwrap();
        let index = PairIndex::new(&sp.test, &sp.features).unwrap();
        let cfg = TrainConfig { seed, ..Default::default() };
        let (bayes, _) = train(&sp.train, &sp.features, &cfg).unwrap();
        let (map, _) = train(&sp.train, &sp.features, &TrainConfig { map_mode: true, ..cfg }).unwrap();

        let dist = predict(Inputs::Pairs(&index), &bayes, CovarianceKind::Full).unwrap();
        let ps = sample_predictive(&dist, 1000, true, &mut SeededRng::new(seed).fork(11)).unwrap();
        let p = precedence_from_samples(&ps);
        let score = score_select(&p, k).unwrap();
        let eigen = eigen_select(&p, k, 1e-10, 1_000_000).unwrap();
        let map_dist = predict(Inputs::Pairs(&index), &map, CovarianceKind::Diagonal).unwrap();
        let map_sel = mean_select(&map_dist.class_prob, k, SelectionMethod::MapMean).unwrap();
        *sums.entry("score").or_default() += realized_fdr(&score.indices, &labels);
        *sums.entry("eigen").or_default() += realized_fdr(&eigen.indices, &labels);
        *sums.entry("map_mean").or_default() += realized_fdr(&map_sel.indices, &labels);
    }
    let mean = |m: &str| sums[m] / seeds as f64;
    let (s, e, m) = (mean("score"), mean("eigen"), mean("map_mean"));
    Outcome::new(
        s <= m + 0.01 && e <= m + 0.01,
        format!("mean FDR@{k} over {seeds} seeds: score {s:.4}, eigen {e:.4}, map_mean {m:.4} (+0.01 allowed)"),
    )
}

// ---------------------------------------------------------------- 9

fn fdr_coverage() -> Outcome {
    let (k, s, redraws) = (100, 2000, 10);
    let mut rng = SeededRng::new(9000);
    let task = ProbitGpTask::new(2, 1.0, 1.0, 0.0, 200, &mut rng);
    let train_set = task.draw(3000, &mut rng);
    let test = task.draw(1000, &mut rng);
    let (model, _) = train_embeddings(&train_set.inputs, &train_set.labels, &converged(9)).unwrap();
    let dist = predict_embeddings(&test.inputs, &model, CovarianceKind::Full).unwrap();
    let ps = sample_predictive(&dist, s, true, &mut rng.fork(11)).unwrap();
    let mut sel = score_select(&precedence_from_samples(&ps), k).unwrap();
    let post = fdr_posterior(&mut sel, &ps, &[], None).unwrap();

    let realized: Vec<f64> = (0..redraws)
        .map(|_| {
            let y: Vec<bool> = test.prob.iter().map(|&p| rng.bernoulli(p)).collect();
            realized_fdr(&sel.indices, &y)
        })
        .collect();
    let r_mean = realized.iter().sum::<f64>() / redraws as f64;
    let r_var = realized.iter().map(|v| (v - r_mean) * (v - r_mean)).sum::<f64>() / (redraws - 1) as f64;
    let se = (r_var / redraws as f64 + post.std * post.std / s as f64).sqrt();
    let expected_true = 1.0 - sel.indices.iter().map(|&i| test.prob[i]).sum::<f64>() / k as f64;
    let z = (post.mean - r_mean).abs() / se;
    Outcome::new(
        z <= 3.0,
        format!(
            "posterior mean FDR@{k} {:.4} vs realized {r_mean:.4} ± {se:.4} over {redraws} redraws ({z:.2} SE); \
             true expectation {expected_true:.4}",
            post.mean
        ),
    )
}

// ---------------------------------------------------------------- 10

fn run_pipeline(out: &Path) -> Result<(), String> {
    let common = ["--seed", "10", "--model.epochs", "5", "--selection.k", "40"];
    for cmd in ["synth", "prepare", "train", "select", "evaluate"] {
        let o = Command::new(env!("CARGO_BIN_EXE_dtigp"))
            .arg(cmd)
            .args(common)
            .arg("--out")
            .arg(out)
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(format!("{cmd}: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    Ok(())
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    if let Err(e) = run_pipeline(a.path()).and_then(|_| run_pipeline(b.path())) {
        return Outcome::new(false, e);
    }
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    let differing: Vec<&String> = sa.keys().filter(|f| sa.get(*f) != sb.get(*f)).collect();
    let same_names = sa.keys().eq(sb.keys());
    Outcome::new(
        same_names && differing.is_empty(),
        format!(
            "{} artifact files, {} differ{}",
            sa.len(),
            differing.len(),
            differing.first().map_or(String::new(), |f| format!(" (first: {f})"))
        ),
    )
}

