use dtigp_core::linalg::{Matrix, SeededRng};
use dtigp_core::ranking::{
    eigen_select, mean_select, precedence_analytic, precedence_from_samples, sample_predictive, score_select,
    PrecedenceMatrix, PredictiveSamples, SelectionMethod,
};
use dtigp_core::svgp::{class_probability, Covariance, PredictiveDistribution};
use proptest::prelude::*;

fn diag_dist(mean: Vec<f64>, var: Vec<f64>) -> PredictiveDistribution {
    let class_prob = mean.iter().zip(&var).map(|(&m, &v)| class_probability(m, v)).collect();
    PredictiveDistribution {
        mean,
        cov: Covariance::Diagonal(var),
        class_prob,
        class_prob_std: None,
        map_mode: false,
    }
}

fn check_complement(p: &PrecedenceMatrix) -> Result<(), TestCaseError> {
    let m = p.matrix();
    for i in 0..p.len() {
        prop_assert_eq!(m[(i, i)], 0.5);
        for j in 0..p.len() {
            prop_assert_eq!(m[(i, j)] + m[(j, i)], 1.0);
            prop_assert!((0.0..=1.0).contains(&m[(i, j)]));
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_precedence_complements(n in 1usize..20, s in 1usize..40, seed in any::<u64>()) {
        let mut rng = SeededRng::new(seed);
        let mut values = Matrix::zeros(s, n);
        // coarse values force ties
        values.data_mut().iter_mut().for_each(|v| *v = (rng.normal() * 2.0).round());
        let ps = PredictiveSamples { values, seed, joint: false };
        check_complement(&precedence_from_samples(&ps))?;
    }

    #[test]
    fn analytic_precedence_complements(
        mean in prop::collection::vec(-3.0f64..3.0, 1..20),
        seed in any::<u64>(),
    ) {
        let mut rng = SeededRng::new(seed);
        let var = mean.iter().map(|_| if rng.bernoulli(0.2) { 0.0 } else { rng.uniform() * 2.0 }).collect();
        check_complement(&precedence_analytic(&diag_dist(mean, var)))?;
    }

    #[test]
    fn score_select_permutation_equivariant(
        mean in prop::collection::vec(-3.0f64..3.0, 2..15),
        seed in any::<u64>(),
    ) {
        let n = mean.len();
        let var: Vec<f64> = (0..n).map(|i| 0.1 + 0.05 * i as f64).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        SeededRng::new(seed).shuffle(&mut perm);
        let a = score_select(&precedence_analytic(&diag_dist(mean.clone(), var.clone())), n).unwrap();
        let pm: Vec<f64> = perm.iter().map(|&i| mean[i]).collect();
        let pv: Vec<f64> = perm.iter().map(|&i| var[i]).collect();
        let b = score_select(&precedence_analytic(&diag_dist(pm, pv)), n).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            prop_assert!((b.scores[k] - a.scores[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_variance_selectors_agree(
        mean in prop::collection::hash_set(-300i32..300, 2..25),
        v in 0.01f64..2.0,
        k_frac in 0.0f64..1.0,
    ) {
        let mean: Vec<f64> = mean.into_iter().map(|m| f64::from(m) / 100.0).collect();
        let n = mean.len();
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let dist = diag_dist(mean, vec![v; n]);
        let p = precedence_analytic(&dist);
        let by_score = score_select(&p, k).unwrap().indices;
        let by_mean = mean_select(&dist.class_prob, k, SelectionMethod::BayesMean).unwrap().indices;
        let by_eigen = eigen_select(&p, k, 1e-13, 1_000_000).unwrap().indices;
        prop_assert_eq!(&by_score, &by_mean);
        prop_assert_eq!(&by_eigen, &by_mean);
    }
}

#[test]
fn sampled_precedence_converges_to_analytic() {
    let mean = vec![0.3, 0.0, -0.2, 1.0, 0.25];
    let var = vec![0.5, 1.0, 0.2, 2.0, 0.01];
    let dist = diag_dist(mean, var);
    let s = 200_000;
    let ps = sample_predictive(&dist, s, false, &mut SeededRng::new(5)).unwrap();
    let emp = precedence_from_samples(&ps);
    let ana = precedence_analytic(&dist);
    for i in 0..5 {
        for j in 0..5 {
            let p = ana.get(i, j);
            let se = (p * (1.0 - p) / s as f64).sqrt().max(1e-12);
            assert!((emp.get(i, j) - p).abs() < 4.5 * se, "({i},{j}) {} vs {p}", emp.get(i, j));
        }
    }
}

#[test]
fn joint_sampling_reproduces_covariance() {
    let c = Matrix::from_rows(&[[1.0, 0.8, 0.0], [0.8, 1.0, 0.3], [0.0, 0.3, 0.5]]).unwrap();
    let dist = PredictiveDistribution {
        mean: vec![1.0, -1.0, 0.0],
        cov: Covariance::Full(c.clone()),
        class_prob: vec![0.5; 3],
        class_prob_std: None,
        map_mode: false,
    };
    let s = 100_000;
    let ps = sample_predictive(&dist, s, true, &mut SeededRng::new(8)).unwrap();
    let items = ps.by_item();
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = (items.row(i), items.row(j));
            let ma = a.iter().sum::<f64>() / s as f64;
            let mb = b.iter().sum::<f64>() / s as f64;
            let cov = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (s - 1) as f64;
            assert!((cov - c[(i, j)]).abs() < 0.02, "({i},{j}) {cov}");
        }
    }
}
