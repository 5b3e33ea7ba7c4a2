use humer_core::corpus::{Dataset, FunctionSample};
use humer_core::difficulty::{
    ds_from, model_difficulty, model_scores, score_dataset, train_submodels, ScoringConfig,
    Strategy as ScoreStrategy, SubmodelStats, TrainBudget,
};
use humer_core::model::ClassifierSpec;
use humer_core::synthetic::{generate, SyntheticConfig};
use proptest::prelude::*;

/// Direct transcription: a sum over every other submodel of its correct
/// rate on the sample's class times its signed confidence.
fn brute_ds(label: u8, owner: usize, stats: &[SubmodelStats], probs: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 0..stats.len() {
        if i == owner {
            continue;
        }
        let s = &stats[i];
        if label == 1 {
            let r = if s.tp + s.fp == 0 {
                0.0
            } else {
                s.tp as f64 / (s.tp + s.fp) as f64
            };
            total += r * (probs[i] - 0.5);
        } else {
            let r = if s.tn + s.fn_ == 0 {
                0.0
            } else {
                s.tn as f64 / (s.tn + s.fn_) as f64
            };
            total += r * (0.5 - probs[i]);
        }
    }
    -total
}

fn stats_strategy(m: usize) -> impl Strategy<Value = Vec<SubmodelStats>> {
    prop::collection::vec((0usize..50, 0usize..50, 0usize..50, 0usize..50), m).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (tp, tn, fp, fn_))| SubmodelStats {
                subset_index: i,
                tp,
                tn,
                fp,
                fn_,
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn ds_matches_brute_force(
        (stats, probs, owner) in (2usize..7).prop_flat_map(|m| (
            stats_strategy(m),
            prop::collection::vec(0.0f64..=1.0, m),
            0..m,
        )),
        label in 0u8..2,
    ) {
        let sample = FunctionSample::new("s", "int f(void) { return 0; }", label);
        let got = model_difficulty(&sample, owner, &stats, &probs).value;
        prop_assert!((got - brute_ds(label, owner, &stats, &probs)).abs() < 1e-12);
    }

    #[test]
    fn confidence_in_the_true_class_lowers_difficulty(
        (weights, probs, owner, k) in (2usize..6).prop_flat_map(|m| (
            prop::collection::vec(0.01f64..1.0, m),
            prop::collection::vec(0.0f64..0.9, m),
            0..m,
            0..m,
        )),
        bump in 0.01f64..0.1,
        label in 0u8..2,
    ) {
        prop_assume!(k != owner);
        let base = ds_from(label, owner, &weights, &probs);
        let mut moved = probs.clone();
        moved[k] = if label == 1 { probs[k] + bump } else { (probs[k] - bump).max(0.0) };
        prop_assume!(moved[k] != probs[k]);
        prop_assert!(ds_from(label, owner, &weights, &moved) < base);
        // the owner's own opinion never matters
        let mut own = probs.clone();
        own[owner] = 1.0 - own[owner];
        prop_assert_eq!(ds_from(label, owner, &weights, &own), base);
    }

    #[test]
    fn unanimous_correct_predictions_are_easy(
        weights in prop::collection::vec(0.01f64..1.0, 3),
        label in 0u8..2,
    ) {
        let p = if label == 1 { 0.9 } else { 0.1 };
        prop_assert!(ds_from(label, 0, &weights, &[0.5, p, p]) < 0.0);
        prop_assert!(ds_from(label, 0, &weights, &[0.5, 1.0 - p, 1.0 - p]) > 0.0);
    }
}

fn toy() -> Dataset {
    generate(&SyntheticConfig {
        samples: 90,
        seed: 11,
        ..Default::default()
    })
    .unwrap()
}

#[test]
fn model_scores_match_an_independent_loop() {
    let data = toy();
    let spec = ClassifierSpec::reference(5);
    let budget = TrainBudget::default();
    let mut subs = train_submodels(&data, 3, &spec, 2, &budget).unwrap();
    // recompute stats and every out-of-subset probability by hand
    let mut stats = Vec::new();
    for (i, sm) in subs.iter_mut().enumerate() {
        let mut s = SubmodelStats {
            subset_index: i,
            ..Default::default()
        };
        for sample in sm.subset.iter() {
            let p = sm.classifier.predict(sample).unwrap().probability;
            match (sample.label, p > 0.5) {
                (1, true) => s.tp += 1,
                (0, false) => s.tn += 1,
                (0, true) => s.fp += 1,
                _ => s.fn_ += 1,
            }
        }
        assert_eq!(s, sm.stats);
        stats.push(s);
    }
    let subsets: Vec<Dataset> = subs.iter().map(|s| s.subset.clone()).collect();
    let mut expected = Vec::new();
    for (j, d) in subsets.iter().enumerate() {
        for sample in d.iter() {
            let probs: Vec<f64> = subs
                .iter_mut()
                .map(|sm| sm.classifier.predict(sample).unwrap().probability)
                .collect();
            expected.push((sample.id.clone(), brute_ds(sample.label, j, &stats, &probs)));
        }
    }
    let got = model_scores(&mut subs).unwrap();
    assert_eq!(got.len(), data.len());
    for (g, (id, v)) in got.iter().zip(&expected) {
        assert_eq!(&g.sample_id, id);
        assert!((g.value - v).abs() < 1e-12, "{id}: {} vs {v}", g.value);
        assert_eq!(g.strategy, ScoreStrategy::Model);
        assert_eq!(g.m, Some(3));
    }
}

#[test]
fn scoring_is_sorted_complete_and_repeatable() {
    let data = toy();
    for cfg in [
        ScoringConfig::code(),
        ScoringConfig::model(2, ClassifierSpec::reference(1), 4),
    ] {
        let a = score_dataset(&data, &cfg).unwrap();
        assert_eq!(a.len(), data.len());
        assert!(a
            .windows(2)
            .all(|w| (w[0].value, &w[0].sample_id) <= (w[1].value, &w[1].sample_id)));
        let mut ids: Vec<_> = a.iter().map(|s| s.sample_id.clone()).collect();
        ids.sort();
        let mut want: Vec<_> = data.iter().map(|s| s.id.clone()).collect();
        want.sort();
        assert_eq!(ids, want);
        assert_eq!(a, score_dataset(&data, &cfg).unwrap());
    }
}
