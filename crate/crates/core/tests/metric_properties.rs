use dtigp_core::eval::{aupr, auroc, roc_curve};
use proptest::prelude::*;

/// Pairwise count over all (positive, negative) pairs.
fn auroc_brute(y: &[bool], s: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..y.len() {
        for j in 0..y.len() {
            if y[i] && !y[j] {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn gcd(a: u128, b: u128) -> u128 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// Precision at each positive's position in the (score desc, index asc)
/// order, summed as an exact fraction and rounded once.
fn ap_brute(y: &[bool], s: &[f64]) -> f64 {
    let ahead = |j: usize, i: usize| s[j] > s[i] || (s[j] == s[i] && j <= i);
    let pos: Vec<usize> = (0..y.len()).filter(|&i| y[i]).collect();
    let (mut num, mut den) = (0u128, 1u128);
    for &i in &pos {
        let above = (0..y.len()).filter(|&j| ahead(j, i)).count() as u128;
        let pos_above = pos.iter().filter(|&&j| ahead(j, i)).count() as u128;
        num = num * above + pos_above * den;
        den *= above;
        let g = gcd(num, den);
        (num, den) = (num / g, den / g);
    }
    num as f64 / (den * pos.len() as u128) as f64
}

fn instance() -> impl Strategy<Value = (Vec<bool>, Vec<f64>)> {
    (2usize..=12).prop_flat_map(|n| {
        // few score levels so ties are common
        (prop::collection::vec(any::<bool>(), n), prop::collection::vec(0u8..5, n))
            .prop_map(|(y, s)| (y, s.into_iter().map(f64::from).collect()))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn auroc_matches_pair_count((y, s) in instance()) {
        let p = y.iter().filter(|&&v| v).count();
        prop_assume!(p > 0 && p < y.len());
        prop_assert_eq!(auroc(&y, &s).unwrap(), auroc_brute(&y, &s));
    }

    #[test]
    fn aupr_matches_rank_definition((y, s) in instance()) {
        prop_assume!(y.iter().any(|&v| v));
        prop_assert_eq!(aupr(&y, &s).unwrap(), ap_brute(&y, &s));
    }

    #[test]
    fn auroc_label_flip_symmetry((y, s) in instance()) {
        let p = y.iter().filter(|&&v| v).count();
        prop_assume!(p > 0 && p < y.len());
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        let total = auroc(&y, &s).unwrap() + auroc(&flipped, &s).unwrap();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn roc_trapezoid_equals_auroc((y, s) in instance()) {
        let p = y.iter().filter(|&&v| v).count();
        prop_assume!(p > 0 && p < y.len());
        let c = roc_curve(&y, &s).unwrap();
        let area: f64 = c.windows(2).map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0).sum();
        prop_assert!((area - auroc(&y, &s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn auroc_monotone_transform_invariant((y, s) in instance()) {
        let p = y.iter().filter(|&&v| v).count();
        prop_assume!(p > 0 && p < y.len());
        let t: Vec<f64> = s.iter().map(|v| (v * 0.7).exp() - 3.0).collect();
        prop_assert_eq!(auroc(&y, &s).unwrap(), auroc(&y, &t).unwrap());
    }
}
