use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

use hpscope_core::study::{encode_config, ColumnDef, Fixture, ParamDef, SearchSpace, Study, TrialRecord};
use hpscope_core::tpe::{
    argmax_ei, fit_parzen, random_config, split_trials, suggest_column, suggest_config, ParzenPair, TpeConfig,
};

fn column(p: ParamDef) -> ColumnDef {
    SearchSpace::new(vec![p]).unwrap().column_defs().remove(0)
}

fn phi(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

proptest! {
    #[test]
    fn split_partitions_by_rank(ys in prop::collection::vec(0.0f64..1.0, 1..80), gamma in 0.01f64..0.99) {
        let s = split_trials(&ys, gamma);
        let n_good = (gamma * ys.len() as f64).ceil() as usize;
        prop_assert_eq!(s.good.len(), n_good.min(ys.len()));
        prop_assert_eq!(s.good.len() + s.bad.len(), ys.len());
        let mut all: Vec<usize> = s.good.iter().chain(&s.bad).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..ys.len()).collect::<Vec<_>>());
        let worst_good = s.good.iter().map(|&i| ys[i]).fold(f64::INFINITY, f64::min);
        let best_bad = s.bad.iter().map(|&i| ys[i]).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(worst_good >= best_bad);
    }

    #[test]
    fn ei_argmax_ignores_common_weight_scale(
        good in prop::collection::vec(0.0f64..1.0, 1..10),
        bad in prop::collection::vec(0.0f64..1.0, 1..30),
        exponent in -20i32..20,
    ) {
        let col = column(ParamDef::continuous("x", 0.0, 1.0));
        let pair = ParzenPair {
            l: fit_parzen(&good, &col, 1.0).unwrap(),
            g: fit_parzen(&bad, &col, 1.0).unwrap(),
        };
        let factor = 2f64.powi(exponent);
        let scaled = ParzenPair {
            l: pair.l.with_scaled_weights(factor),
            g: pair.g.with_scaled_weights(factor),
        };
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        prop_assert_eq!(argmax_ei(&pair, &grid).unwrap(), argmax_ei(&scaled, &grid).unwrap());
        for &x in &grid {
            prop_assert_eq!(pair.expected_improvement(x).unwrap(), scaled.expected_improvement(x).unwrap());
        }
    }

    #[test]
    fn suggestions_are_valid_configs(seed in any::<u64>(), which in 0usize..3, n in 0usize..30) {
        let space = Fixture::ALL[which].space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trials = (0..n)
            .map(|i| TrialRecord::new(format!("t{i}"), random_config(&space, &mut rng), rng.random()))
            .collect();
        let study = Study::new(space.clone(), trials).unwrap();
        let cfg = suggest_config(&study, &TpeConfig::default(), &mut rng).unwrap();
        prop_assert!(encode_config(&space, "s", &cfg).is_ok());
    }
}

#[test]
fn identical_densities_give_unit_ratio() {
    let col = column(ParamDef::continuous("x", 0.0, 1.0));
    let values = [0.1, 0.4, 0.45, 0.9];
    let pair = ParzenPair {
        l: fit_parzen(&values, &col, 1.0).unwrap(),
        g: fit_parzen(&values, &col, 1.0).unwrap(),
    };
    for i in 0..=100 {
        assert_eq!(pair.expected_improvement(i as f64 / 100.0).unwrap(), 1.0);
    }
}

#[test]
fn suggestions_follow_the_good_region() {
    let col = column(ParamDef::continuous("x", 0.0, 1.0));
    let mut inside = 0;
    for seed in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let history: Vec<(f64, f64)> = (0..40)
            .map(|_| {
                let x: f64 = rng.random();
                (x, x)
            })
            .collect();
        let s = suggest_column(&history, &col, &TpeConfig::default(), &mut rng).unwrap();
        if (0.5..=1.0).contains(&s) {
            inside += 1;
        }
    }
    assert!(inside >= 95, "{inside}/100 suggestions in [0.5, 1]");
}

#[test]
fn numeric_density_integrates_to_one() {
    let col = column(ParamDef::continuous("x", -2.0, 3.0));
    let est = fit_parzen(&[-1.9, 0.0, 0.1, 2.5, 2.99], &col, 1.0).unwrap();
    let n = 20_000;
    let h = 5.0 / n as f64;
    let mut area = 0.0;
    for i in 0..=n {
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        area += w * est.density(-2.0 + i as f64 * h).unwrap();
    }
    area *= h;
    assert!((area - 1.0).abs() < 1e-6, "area {area}");
}

#[test]
fn single_kernel_peak_matches_closed_form() {
    let col = column(ParamDef::continuous("x", 0.0, 1.0));
    let c = 0.3;
    let est = fit_parzen(&[c], &col, 0.0).unwrap();
    // One observation: bandwidth is width / 2.
    let h = 0.5;
    let mass = phi((1.0 - c) / h) - phi((0.0 - c) / h);
    let expected = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt()) / mass;
    assert!((est.density(c).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn integer_and_categorical_suggestions_keep_their_kind() {
    let int_col = column(ParamDef::integer("k", 1.0, 8.0));
    let cat_col = column(ParamDef::categorical("act", ["a", "b", "c"]));
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let history: Vec<(f64, f64)> = (0..30).map(|i| ((i % 8 + 1) as f64, (i % 8) as f64 / 8.0)).collect();
    let cats: Vec<(f64, f64)> = (0..30)
        .map(|i| ((i % 3) as f64, if i % 3 == 2 { 1.0 } else { 0.0 }))
        .collect();
    for _ in 0..50 {
        let k = suggest_column(&history, &int_col, &TpeConfig::default(), &mut rng).unwrap();
        assert!(k.fract() == 0.0 && (1.0..=8.0).contains(&k));
        let a = suggest_column(&cats, &cat_col, &TpeConfig::default(), &mut rng).unwrap();
        assert!(a.fract() == 0.0 && (0.0..3.0).contains(&a));
    }
}
