use super::*;

fn failures(checks: &[Check]) -> Vec<String> {
    checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect::<Vec<_>>()
}

#[test]
fn every_suite_passes_on_the_real_operators() {
    for scope in Scope::SUITES {
        let checks = run(scope, &Options::default());
        assert!(!checks.is_empty());
        assert!(checks.iter().all(|c| c.suite == scope));
        assert_eq!(failures(&checks), Vec::<String>::new(), "{scope}");
    }
}

#[test]
fn tampered_reduce_is_caught_by_the_oracle_suite() {
    let opts = Options { reduce: reduce_including_masked, random_programs: 5, ..Options::default() };
    let checks = oracle(&opts);
    let plans = checks.iter().find(|c| c.name == "compiled-plans-vs-brute-force").unwrap();
    assert!(!plans.passed);
    assert!(plans.detail.contains("with quantifiers"), "{}", plans.detail);
    // The chaining engine does not use tensors and still agrees.
    assert!(checks.iter().find(|c| c.name == "forward-chain-vs-brute-force").unwrap().passed);
}

#[test]
fn tampered_reduce_differs_only_through_the_mask() {
    let t = PredTensor::from_fn(2, 3, 1, |_, _| 1.0);
    assert_eq!(reduce(&t).unwrap().data()[..2], [1.0, 1.0]);
    assert_eq!(reduce_including_masked(&t).unwrap().data()[..2], [1.0, 0.0]);
}

#[test]
fn all_aggregates_every_suite() {
    let opts = Options { random_programs: 10, random_clauses: 10, ..Options::default() };
    let all = run(Scope::All, &opts);
    let sum: usize = Scope::SUITES.iter().map(|&s| run(s, &opts).len()).sum();
    assert_eq!(all.len(), sum);
    assert!(all_passed(&all));
}

#[test]
fn scope_names_round_trip() {
    for s in Scope::SUITES.iter().chain([Scope::All].iter()) {
        assert_eq!(s.to_string().parse::<Scope>().unwrap(), *s);
    }
    assert!("grad".parse::<Scope>().is_err());
}
