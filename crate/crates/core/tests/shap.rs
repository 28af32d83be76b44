use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hpscope_core::forest::{fit_forest, ForestParams, MaxFeatures, RegressionForest};
use hpscope_core::shap::exact::{forest_shapley_bruteforce, shapley_bruteforce, shapley_from_value_fn};
use hpscope_core::shap::{dependence_series, explain_all, rank_features, select_interaction, tree_shap};

fn random_forest(seed: u64, p: usize, n_trees: usize, depth: usize) -> (RegressionForest, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Vec<Vec<f64>> = (0..80)
        .map(|_| (0..p).map(|_| (rng.random_range(0..6) as f64) / 5.0).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| r.iter().enumerate().map(|(j, v)| v * (j as f64 - 1.5)).sum::<f64>() + rng.random::<f64>())
        .collect();
    let params = ForestParams {
        n_trees,
        max_depth: Some(depth),
        min_samples_leaf: 1,
        max_features: MaxFeatures::Third,
        bootstrap: true,
        seed,
    };
    (fit_forest(&x, &y, &params).unwrap(), x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tree_shap_matches_enumeration(seed in any::<u64>(), p in 1usize..=8, n_trees in 1usize..=6, depth in 1usize..=5) {
        let (forest, x) = random_forest(seed, p, n_trees, depth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 7);
        for _ in 0..5 {
            let point: Vec<f64> = if rng.random() {
                x[rng.random_range(0..x.len())].clone()
            } else {
                (0..p).map(|_| rng.random_range(-0.2..1.2)).collect()
            };
            let fast = tree_shap(&forest, &point).unwrap();
            let slow = forest_shapley_bruteforce(&forest, &point).unwrap();
            prop_assert!((fast.base - slow.base).abs() <= 1e-9);
            for (a, b) in fast.attributions.iter().zip(&slow.attributions) {
                prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
            }
            prop_assert!(fast.efficiency_gap().abs() <= 1e-9);
        }
    }
}

#[test]
fn interventional_oracle_recovers_linear_effects() {
    let w = [2.0, -1.0, 0.5];
    let model = |r: &[f64]| r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() + 3.0;
    let background = vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 4.0], vec![2.0, 2.0, 0.0]];
    let x = [5.0, -1.0, 1.0];
    let row = shapley_bruteforce(model, &background, &x).unwrap();
    for j in 0..3 {
        let mean = background.iter().map(|b| b[j]).sum::<f64>() / 3.0;
        assert!((row.attributions[j] - w[j] * (x[j] - mean)).abs() < 1e-12);
    }
}

#[test]
fn symmetric_players_share_equally() {
    // v(S) depends on players 0 and 1 only through their count.
    let v = |s: &[bool]| {
        let pair = usize::from(s[0]) + usize::from(s[1]);
        (pair * pair) as f64 + if s[2] { 0.5 } else { 0.0 }
    };
    let row = shapley_from_value_fn(3, v).unwrap();
    assert!((row.attributions[0] - row.attributions[1]).abs() < 1e-15);
    assert!((row.attributions[2] - 0.5).abs() < 1e-15);
}

#[test]
fn unused_feature_gets_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.random(), 0.25, rng.random()]).collect();
    let y: Vec<f64> = x.iter().map(|r| r[0] - r[2]).collect();
    let forest = fit_forest(
        &x,
        &y,
        &ForestParams {
            n_trees: 10,
            ..ForestParams::default()
        },
    )
    .unwrap();
    for row in &x[..20] {
        assert_eq!(tree_shap(&forest, row).unwrap().attributions[1], 0.0);
    }
}

#[test]
fn attributions_are_linear_in_the_ensemble() {
    let (a, _) = random_forest(1, 4, 3, 4);
    let (b, _) = random_forest(2, 4, 5, 3);
    let mut both = a.clone();
    both.trees.extend(b.trees.iter().cloned());
    let point = [0.3, 0.7, 0.1, 0.9];
    let (sa, sb, sab) = (
        tree_shap(&a, &point).unwrap(),
        tree_shap(&b, &point).unwrap(),
        tree_shap(&both, &point).unwrap(),
    );
    for j in 0..4 {
        let mixed = (3.0 * sa.attributions[j] + 5.0 * sb.attributions[j]) / 8.0;
        assert!((sab.attributions[j] - mixed).abs() < 1e-12);
    }
}

#[test]
fn ranking_orders_by_mean_absolute_attribution() {
    let (forest, x) = random_forest(3, 4, 10, 5);
    let m = explain_all(&forest, &x, None).unwrap();
    let ranking = rank_features(&m).unwrap();
    for pair in ranking.windows(2) {
        assert!(pair[0].1 >= pair[1].1);
    }
    let j = m.column_index(&ranking[0].0).unwrap();
    let direct = m.rows.iter().map(|r| r.attributions[j].abs()).sum::<f64>() / m.len() as f64;
    assert!((direct - ranking[0].1).abs() < 1e-15);
}

#[test]
fn interaction_partner_is_the_most_correlated_column() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<Vec<f64>> = (0..200)
        .map(|_| {
            let a: f64 = rng.random();
            vec![a, rng.random(), a + 0.1 * rng.random::<f64>(), rng.random()]
        })
        .collect();
    let cols: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
    let choice = select_interaction(&x, &cols, "a").unwrap();
    assert_eq!(choice.column, "c");
    assert!(!choice.low_confidence);

    let y: Vec<f64> = x.iter().map(|r| r[0]).collect();
    let forest = fit_forest(
        &x,
        &y,
        &ForestParams {
            n_trees: 5,
            ..ForestParams::default()
        },
    )
    .unwrap();
    let m = explain_all(&forest, &x, None).unwrap();
    let d = dependence_series(&m, "x0", "x2").unwrap();
    assert_eq!(d.points.len(), x.len());
    assert_eq!(d.points[7].0, x[7][0]);
    assert_eq!(d.points[7].2, x[7][2]);
}
