use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hpscope_core::study::{
    aggregate_duplicates, coverage, decode_row, encode, encode_config, filter_by_objective, parse_study,
    parse_study_with, Config, Fixture, ObjectiveSense, ParamDef, ParamValue, SearchSpace, Study, StudyError,
    TrialRecord,
};
use hpscope_core::tpe::random_config;

/// A small discrete space so random studies contain duplicates.
fn coarse_space() -> SearchSpace {
    SearchSpace::new(vec![
        ParamDef::integer("n", 1.0, 3.0),
        ParamDef::categorical("act", ["relu", "tanh"]),
    ])
    .unwrap()
}

fn coarse_study(draws: &[(u8, bool, f64)]) -> Study {
    let trials = draws
        .iter()
        .enumerate()
        .map(|(i, &(n, act, y))| {
            let mut c = Config::new();
            c.insert("n".into(), ParamValue::number(f64::from(n % 3 + 1)));
            c.insert("act".into(), ParamValue::label(if act { "relu" } else { "tanh" }));
            TrialRecord::new(format!("t{i}"), c, y)
        })
        .collect();
    Study::new(coarse_space(), trials).unwrap()
}

fn ids(s: &Study) -> BTreeSet<String> {
    s.trials.iter().map(|t| t.trial_id.clone()).collect()
}

proptest! {
    #[test]
    fn filters_nest(draws in prop::collection::vec((0u8..3, any::<bool>(), 0.0f64..1.0), 1..60),
                    t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
        let s = coarse_study(&draws);
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let strict = ids(&filter_by_objective(&s, hi));
        let loose = ids(&filter_by_objective(&s, lo));
        prop_assert!(strict.is_subset(&loose));
        for t in filter_by_objective(&s, hi).trials {
            prop_assert!(t.objective > hi);
        }
    }

    #[test]
    fn aggregation_is_idempotent_and_conserves_counts(
        draws in prop::collection::vec((0u8..3, any::<bool>(), 0.0f64..1.0), 1..60)
    ) {
        let s = coarse_study(&draws);
        let once = aggregate_duplicates(&s);
        let twice = aggregate_duplicates(&once);
        prop_assert_eq!(&once, &twice);
        let sizes: usize = once.trials.iter().map(TrialRecord::group_size).sum();
        prop_assert_eq!(sizes, s.len());
        // Group means against a direct recomputation.
        for merged in &once.trials {
            let key = s.encode_trial(merged);
            let members: Vec<f64> = s.trials.iter()
                .filter(|t| s.encode_trial(t) == key)
                .map(|t| t.objective)
                .collect();
            let mean = members.iter().sum::<f64>() / members.len() as f64;
            prop_assert!((merged.objective - mean).abs() <= 1e-12);
        }
        // Total objective mass is preserved.
        let before: f64 = s.trials.iter().map(|t| t.objective).sum();
        let after: f64 = once.trials.iter().map(|t| t.objective * t.group_size() as f64).sum();
        prop_assert!((before - after).abs() <= 1e-9);
    }

    #[test]
    fn encode_decode_roundtrip(seed in any::<u64>(), which in 0usize..3) {
        let space = Fixture::ALL[which].space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = random_config(&space, &mut rng);
        let row = encode_config(&space, "r", &cfg).unwrap();
        prop_assert_eq!(row.len(), space.n_columns());
        let again = encode_config(&space, "r", &decode_row(&space, &row)).unwrap();
        for (a, b) in row.iter().zip(&again) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }

    #[test]
    fn coverage_complements(flags in prop::collection::vec(any::<bool>(), 1..100)) {
        let negated: Vec<bool> = flags.iter().map(|f| !f).collect();
        let sum = coverage(&flags).unwrap() + coverage(&negated).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-15);
    }
}

#[test]
fn coverage_of_nothing_is_an_error() {
    assert!(matches!(coverage(&[]), Err(StudyError::EmptyCoverage)));
}

#[test]
fn parses_jsonl_and_flips_losses() {
    let space = SearchSpace::new(vec![ParamDef::continuous("x", 0.0, 1.0)]).unwrap();
    let text = "{\"trial_id\":\"a\",\"params\":{\"x\":0.25},\"objective\":0.9}\n\n{\"trial_id\":\"b\",\"params\":{\"x\":0.5},\"objective\":0.2}\n";
    let s = parse_study(text.as_bytes(), space.clone()).unwrap();
    assert_eq!(s.objectives(), vec![0.9, 0.2]);
    let m = parse_study_with(text.as_bytes(), space, ObjectiveSense::Minimize).unwrap();
    assert!((m.objectives()[0] - 0.1).abs() < 1e-15);
    assert_eq!(m.best().unwrap().trial_id, "b");
}

#[test]
fn rejects_out_of_bounds_and_malformed_lines() {
    let space = SearchSpace::new(vec![ParamDef::continuous("x", 0.0, 1.0)]).unwrap();
    let oob = "{\"trial_id\":\"a\",\"params\":{\"x\":1.5},\"objective\":0.9}\n";
    assert!(matches!(
        parse_study(oob.as_bytes(), space.clone()),
        Err(StudyError::Validation { .. })
    ));
    let broken = "{\"trial_id\":\"a\",\"params\":{\"x\":0.5},\"objective\":0.9}\nnot json\n";
    match parse_study(broken.as_bytes(), space) {
        Err(StudyError::Parse { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a parse error, got {other:?}"),
    }
}

#[test]
fn jsonl_roundtrip_preserves_study() {
    let space = Fixture::Final.space();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let trials = (0..25)
        .map(|i| TrialRecord::new(format!("t{i}"), random_config(&space, &mut rng), i as f64 / 25.0))
        .collect();
    let s = Study::new(space.clone(), trials).unwrap();
    let mut buf = Vec::new();
    s.write_jsonl(&mut buf).unwrap();
    let back = parse_study(buf.as_slice(), space).unwrap();
    assert_eq!(encode(&s).unwrap(), encode(&back).unwrap());
}

#[test]
fn variable_arity_adds_a_length_column() {
    let space = Fixture::Initial.space();
    let names = space.column_names();
    assert!(names.contains(&"hidden_layers.len".to_string()));
    assert!(names.contains(&"hidden_layers[2]".to_string()));
    assert!(!names.contains(&"hidden_layers[3]".to_string()));
}
