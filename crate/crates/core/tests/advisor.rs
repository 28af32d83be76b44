use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};

use hpscope_core::advisor::{
    advise_from_shap, advise_from_skew, extreme_pairs, histogram, pearson, pearson_matrix, skewness, surface_grid,
    Action, AdvisorThresholds, CorrelationMatrix, Suggested,
};
use hpscope_core::shap::DependenceSeries;
use hpscope_core::study::{encode, ColumnDef, ParamDef, SearchSpace, Study, TrialRecord};
use hpscope_core::tpe::random_config;

fn column(p: ParamDef) -> ColumnDef {
    SearchSpace::new(vec![p]).unwrap().column_defs().remove(0)
}

fn two_pass(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

/// Top `k` pairs of one sign by repeated selection: largest magnitude
/// first, earliest pair in row-major order on ties.
fn exhaustive_top(c: &CorrelationMatrix, k: usize, positive: bool) -> Vec<(String, String, f64)> {
    let p = c.columns.len();
    let mut taken = std::collections::HashSet::new();
    let mut out = Vec::new();
    while out.len() < k {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..p {
            for j in i + 1..p {
                let Some(r) = c.get(i, j) else { continue };
                if taken.contains(&(i, j)) || (positive && r <= 0.0) || (!positive && r >= 0.0) {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((_, _, b)) => {
                        if positive {
                            r > b
                        } else {
                            r < b
                        }
                    }
                };
                if better {
                    best = Some((i, j, r));
                }
            }
        }
        let Some((i, j, r)) = best else { break };
        taken.insert((i, j));
        out.push((c.columns[i].clone(), c.columns[j].clone(), r));
    }
    out
}

proptest! {
    #[test]
    fn pearson_matches_two_pass(pairs in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 3..200)) {
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Some(r) = pearson(&a, &b) {
            prop_assert!((r - two_pass(&a, &b)).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn skewness_flips_sign_under_negation(v in prop::collection::vec(-10.0f64..10.0, 2..100)) {
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        prop_assert!((skewness(&v) + skewness(&neg)).abs() <= 1e-12);
    }

    #[test]
    fn extreme_pairs_match_exhaustive_search(seed in any::<u64>(), p in 2usize..=8, k in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let z: f64 = rng.random();
                (0..p).map(|j| if j % 3 == 2 { 1.0 } else { z * (j as f64 - 2.0) + rng.random::<f64>() }).collect()
            })
            .collect();
        let names: Vec<String> = (0..p).map(|j| format!("c{j}")).collect();
        let c = pearson_matrix(&x, &names).unwrap();
        let e = extreme_pairs(&c, k);
        let got = |v: &[hpscope_core::advisor::CorrelatedPair]| {
            v.iter().map(|q| (q.a.clone(), q.b.clone(), q.r)).collect::<Vec<_>>()
        };
        prop_assert_eq!(got(&e.positive), exhaustive_top(&c, k, true));
        prop_assert_eq!(got(&e.negative), exhaustive_top(&c, k, false));
    }

    #[test]
    fn surface_conserves_trials_and_mass(seed in any::<u64>(), n in 1usize..150, res in 2usize..12) {
        let space = SearchSpace::new(vec![
            ParamDef::continuous("a", 0.0, 1.0),
            ParamDef::continuous("b", 1e-4, 1.0).with_log_scale(),
        ]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trials = (0..n)
            .map(|i| TrialRecord::new(format!("t{i}"), random_config(&space, &mut rng), rng.random()))
            .collect();
        let m = encode(&Study::new(space.clone(), trials).unwrap()).unwrap();
        let defs = space.column_defs();
        let g = surface_grid(&m, &defs[0], &defs[1], res).unwrap();
        prop_assert_eq!(g.total_count(), n);
        let mean = m.y.iter().sum::<f64>() / n as f64;
        prop_assert!((g.weighted_mean().unwrap() - mean).abs() <= 1e-12);
        for (row_m, row_c) in g.cell_mean.iter().zip(&g.cell_count) {
            for (cm, &cc) in row_m.iter().zip(row_c) {
                prop_assert_eq!(cm.is_some(), cc > 0);
            }
        }
    }

    #[test]
    fn advice_is_deterministic(seed in any::<u64>()) {
        let col = column(ParamDef::continuous("x", 0.0, 1.0));
        let t = AdvisorThresholds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..60).map(|_| rng.random::<f64>().powi(2)).collect();
        let h = histogram(&values, &col, t.n_bins).unwrap();
        prop_assert_eq!(advise_from_skew(&h, &col, &t), advise_from_skew(&h.clone(), &col, &t));
        let d = DependenceSeries {
            feature: "x".into(),
            interaction: "x".into(),
            points: values.iter().map(|&v| (v, v - 0.3, v)).collect(),
        };
        prop_assert_eq!(advise_from_shap(&d, &col, &t), advise_from_shap(&d.clone(), &col, &t));
    }
}

#[test]
fn uniform_samples_look_uniform() {
    let col = column(ParamDef::continuous("x", 0.0, 1.0));
    let passes = (0..20u64)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..200).map(|_| rng.random()).collect();
            histogram(&v, &col, 20).unwrap().uniform_p > 0.05
        })
        .count();
    assert!(passes >= 18, "{passes}/20");
}

#[test]
fn beta_samples_shift_the_bounds() {
    let col = column(ParamDef::continuous("x", 0.0, 1.0));
    let t = AdvisorThresholds::default();
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let up: Vec<f64> = Beta::new(8.0, 2.0).unwrap().sample_iter(&mut rng).take(300).collect();
        let down: Vec<f64> = Beta::new(2.0, 8.0).unwrap().sample_iter(&mut rng).take(300).collect();
        let r = advise_from_skew(&histogram(&up, &col, 20).unwrap(), &col, &t);
        assert_eq!(r.action, Action::ShiftUp);
        assert_eq!(
            r.suggested,
            Suggested::Bounds {
                lower: 0.25,
                upper: 1.25
            }
        );
        let r = advise_from_skew(&histogram(&down, &col, 20).unwrap(), &col, &t);
        assert_eq!(r.action, Action::ShiftDown);
    }
}

#[test]
fn hard_limits_clamp_the_advice() {
    let col = column(ParamDef::continuous("q", 0.5, 0.8).with_hard_limits(Some(0.0), Some(1.0)));
    let t = AdvisorThresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v: Vec<f64> = (0..300).map(|_| 0.5 + 0.3 * rng.random::<f64>()).collect();
    let r = advise_from_skew(&histogram(&v, &col, 20).unwrap(), &col, &t);
    assert_eq!(r.action, Action::Expand);
    match r.suggested {
        Suggested::Bounds { lower, upper } => {
            assert!((lower - 0.425).abs() < 1e-12);
            assert!((upper - 0.875).abs() < 1e-12);
        }
        other => panic!("{other:?}"),
    }
    let wide = column(ParamDef::continuous("q", 0.1, 0.95).with_hard_limits(Some(0.0), Some(1.0)));
    let v: Vec<f64> = (0..300).map(|_| 0.1 + 0.85 * rng.random::<f64>()).collect();
    let r = advise_from_skew(&histogram(&v, &wide, 20).unwrap(), &wide, &t);
    assert_eq!(r.suggested, Suggested::Bounds { lower: 0.0, upper: 1.0 });
}

#[test]
fn tight_positive_cluster_fixes_the_value() {
    let col = column(ParamDef::continuous("x", 0.0, 10.0));
    let t = AdvisorThresholds::default();
    let points: Vec<(f64, f64, f64)> = (0..100)
        .map(|i| {
            let v = if i % 2 == 0 {
                8.0 + 0.001 * i as f64
            } else {
                i as f64 / 10.0
            };
            let phi = if i % 2 == 0 { 0.1 } else { -0.1 };
            (v, phi, v)
        })
        .collect();
    let d = DependenceSeries {
        feature: "x".into(),
        interaction: "x".into(),
        points,
    };
    let r = advise_from_shap(&d, &col, &t);
    assert_eq!(r.action, Action::FixValue);
    assert!(matches!(r.suggested, Suggested::Fixed { value } if (8.0..8.1).contains(&value)));
}
