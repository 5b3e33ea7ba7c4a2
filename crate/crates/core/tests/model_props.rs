use humer_core::corpus::Dataset;
use humer_core::model::{
    featurize, logistic_objective, mean_log_loss, new_classifier, restore, ClassifierSpec,
    ConvergencePolicy, SparseVec,
};
use humer_core::synthetic::{generate, SyntheticConfig};
use proptest::prelude::*;

fn toy(n: usize, seed: u64) -> Dataset {
    generate(&SyntheticConfig {
        samples: n,
        seed,
        ..Default::default()
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn analytic_gradient_matches_finite_differences(
        raw in prop::collection::vec(prop::collection::vec((0usize..8, -1.0f64..1.0), 1..5), 1..6),
        labels in prop::collection::vec(0u8..2, 6),
        w in prop::collection::vec(-2.0f64..2.0, 8),
        b in -1.0f64..1.0,
        l2 in 0.0f64..0.1,
    ) {
        let feats: Vec<SparseVec> = raw;
        let labels = &labels[..feats.len()];
        let obj = logistic_objective(&w, b, &feats, labels, l2);
        let h = 1e-6;
        for i in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[i] += h;
            down[i] -= h;
            let num = (logistic_objective(&up, b, &feats, labels, l2).loss
                - logistic_objective(&down, b, &feats, labels, l2).loss) / (2.0 * h);
            prop_assert!((num - obj.grad_weights[i]).abs() < 1e-5, "w[{}]: {} vs {}", i, num, obj.grad_weights[i]);
        }
        let num = (logistic_objective(&w, b + h, &feats, labels, l2).loss
            - logistic_objective(&w, b - h, &feats, labels, l2).loss) / (2.0 * h);
        prop_assert!((num - obj.grad_bias).abs() < 1e-5);
    }

    #[test]
    fn features_are_unit_length(code in "[a-z]{1,6}( [-+*=<>;(){}]| [a-z]{1,6}){0,30}") {
        let f = featurize(&code, 1024);
        let norm: f64 = f.iter().map(|(_, v)| v * v).sum();
        prop_assert!(f.is_empty() || (norm - 1.0).abs() < 1e-9);
        prop_assert!(f.iter().all(|&(i, _)| i < 1024));
    }
}

#[test]
fn training_is_deterministic_and_restorable() {
    let data = toy(120, 3);
    let spec = ClassifierSpec::reference(9);
    let run = || {
        let mut c = new_classifier(&spec).unwrap();
        let report = c.train(&data, 10, &ConvergencePolicy::default()).unwrap();
        (c, report)
    };
    let (mut a, ra) = run();
    let (mut b, rb) = run();
    assert_eq!(ra, rb);
    assert!(ra.epochs_run >= 1 && ra.epochs_run <= 10);
    assert_eq!(ra.epoch_losses.len(), ra.epochs_run);
    let pa = a.predict_all(&data.samples).unwrap();
    assert_eq!(pa, b.predict_all(&data.samples).unwrap());
    let mut r = restore(&a.snapshot().unwrap()).unwrap();
    assert_eq!(pa, r.predict_all(&data.samples).unwrap());
}

#[test]
fn fine_tuning_reduces_loss_on_its_data() {
    let data = toy(200, 4);
    let subset = Dataset::new("sub", data.samples[..30].to_vec()).unwrap();
    let mut c = new_classifier(&ClassifierSpec::reference(2)).unwrap();
    c.train(&data, 2, &ConvergencePolicy::default()).unwrap();
    let before = mean_log_loss(c.as_mut(), &subset).unwrap();
    let report = c.fine_tune(&subset, 3).unwrap();
    assert_eq!(report.epochs_run, 3);
    assert!(mean_log_loss(c.as_mut(), &subset).unwrap() < before);
}

#[test]
fn training_stops_once_loss_stops_improving() {
    let data = toy(150, 8);
    let policy = ConvergencePolicy { epsilon: 1.0 };
    let mut c = new_classifier(&ClassifierSpec::reference(0)).unwrap();
    let report = c.train(&data, 10, &policy).unwrap();
    assert!(report.converged);
    assert_eq!(report.epochs_run, 2);
}
