use nlm::eval::{confidence_at_least, evaluate, lower_bound, DEFAULT_CONFIDENCE};
use nlm_core::rng::derive;
use nlm_core::tasks::{EnvMode, TaskKind};
use nlm_core::Model;
use proptest::prelude::*;

#[test]
fn perfect_thousand_sample_bound() {
    // At 99.7% confidence a clean 1000-sample run certifies about 98.84%.
    let b = lower_bound(1000, 0, DEFAULT_CONFIDENCE);
    assert!((b - 0.98838).abs() < 1e-4, "{b}");
    // Certifying 99.9% from 1000 clean samples holds only at ~39% confidence.
    let c = confidence_at_least(1000, 0, 0.999);
    assert!((c - 0.3935).abs() < 1e-3, "{c}");
    assert!((lower_bound(1000, 0, c - 1e-9) - 0.999).abs() < 1e-6);
}

#[test]
fn hundred_thousand_clean_samples_certify_99_98_percent() {
    assert!(lower_bound(100_000, 0, DEFAULT_CONFIDENCE) >= 0.9998);
}

#[test]
fn bound_clamps_at_zero() {
    assert_eq!(lower_bound(5, 5, 0.99), 0.0);
    assert_eq!(confidence_at_least(10, 5, 0.9), 0.0);
}

proptest! {
    #[test]
    fn bound_is_monotone(n in 1usize..5000, k in 0usize..50, conf in 0.5f64..0.9999) {
        let k = k.min(n);
        let b = lower_bound(n, k, conf);
        prop_assert!((0.0..=1.0).contains(&b));
        prop_assert!(b <= 1.0 - k as f64 / n as f64 + 1e-12);
        if k < n {
            prop_assert!(lower_bound(n, k + 1, conf) <= b);
        }
        prop_assert!(lower_bound(n + 1, k, conf) >= b);
        prop_assert!(lower_bound(n, k, (conf + 1.0) / 2.0) <= b);
    }

    #[test]
    fn confidence_inverts_the_bound(n in 10usize..5000, k in 0usize..20, conf in 0.5f64..0.999) {
        let b = lower_bound(n, k.min(n), conf);
        prop_assume!(b > 0.0);
        prop_assert!((confidence_at_least(n, k.min(n), b) - conf).abs() < 1e-9);
    }
}

fn model(task: TaskKind) -> Model {
    Model::new(task.model_config().unwrap(), derive(1, "init")).unwrap()
}

#[test]
fn reports_do_not_depend_on_workers() {
    for (task, m) in [(TaskKind::HasFather, 6), (TaskKind::Sorting, 4), (TaskKind::Path, 5)] {
        let model = model(task);
        let one = evaluate(&model, task, m, 7, 3, DEFAULT_CONFIDENCE, 1).unwrap();
        let many = evaluate(&model, task, m, 7, 3, DEFAULT_CONFIDENCE, 4).unwrap();
        assert_eq!(one, many, "{task}");
        assert_eq!(one, evaluate(&model, task, m, 7, 3, DEFAULT_CONFIDENCE, 1).unwrap());
    }
}

#[test]
fn sequential_reports_match_the_core_evaluator() {
    let model = model(TaskKind::Sorting);
    let ours = evaluate(&model, TaskKind::Sorting, 4, 20, 9, DEFAULT_CONFIDENCE, 3).unwrap();
    let core = nlm_core::train::evaluate(&model, TaskKind::Sorting, 4, 20, 9, EnvMode::Eval).unwrap();
    assert_eq!(ours.successes, core.successes);
    assert_eq!(ours.average_moves, Some(core.average_moves));
}

#[test]
fn empty_evaluation_is_an_error() {
    let e = evaluate(&model(TaskKind::HasFather), TaskKind::HasFather, 5, 0, 0, DEFAULT_CONFIDENCE, 1).unwrap_err();
    assert!(matches!(e, nlm::Error::Config(_)));
}
