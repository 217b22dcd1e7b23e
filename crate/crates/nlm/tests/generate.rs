use nlm::dataset::{self, instance_seed};
use nlm_core::tasks::{generate_labeled, EnvMode, Environment, RlEnv, TaskKind};

fn family(count: usize, seed: u64) -> Vec<u8> {
    dataset::generate(TaskKind::HasFather, 20, count, seed, EnvMode::Train).unwrap()
}

#[test]
fn same_seed_gives_identical_bytes() {
    let (a, b) = (family(100, 7), family(100, 7));
    assert_eq!(a, b);
    assert_eq!(nlm::digest(&a), nlm::digest(&b));
}

#[test]
fn digest_changes_with_the_seed() {
    assert_ne!(nlm::digest(&family(5, 7)), nlm::digest(&family(5, 8)));
}

#[test]
fn zero_count_is_a_header_only_file() {
    let bytes = family(0, 7);
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(text.lines().count(), 1);
    let (header, records) = dataset::parse(&text).unwrap();
    assert_eq!(header.count, 0);
    assert!(records.is_empty());
}

#[test]
fn supervised_records_round_trip() {
    let text = String::from_utf8(dataset::generate(TaskKind::AdjacentToRed, 6, 4, 3, EnvMode::Train).unwrap()).unwrap();
    let (_, records) = dataset::parse(&text).unwrap();
    for (k, r) in records.iter().enumerate() {
        let expected = generate_labeled(TaskKind::AdjacentToRed, 6, instance_seed(3, k as u64)).unwrap();
        assert_eq!(r.to_labeled().unwrap(), expected);
    }
}

#[test]
fn sequential_records_rebuild_their_environment() {
    for task in [TaskKind::Sorting, TaskKind::Path, TaskKind::BlocksWorld] {
        let text = String::from_utf8(dataset::generate(task, 5, 3, 11, EnvMode::Eval).unwrap()).unwrap();
        let (header, records) = dataset::parse(&text).unwrap();
        assert_eq!(header.mode, EnvMode::Eval);
        for (k, r) in records.iter().enumerate() {
            let expected = RlEnv::generate(task, 5, instance_seed(11, k as u64), EnvMode::Eval).unwrap();
            let env = r.to_env().unwrap();
            assert_eq!(env.observe(), expected.observe(), "{task}");
        }
    }
}

#[test]
fn too_few_objects_is_a_config_error() {
    let e = dataset::generate(TaskKind::HasFather, 1, 1, 0, EnvMode::Train).unwrap_err();
    assert!(matches!(e, nlm::Error::Config(_)), "{e}");
}

#[test]
fn count_mismatch_is_reported() {
    let text = String::from_utf8(family(2, 1)).unwrap();
    let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
    assert!(dataset::parse(&truncated).unwrap_err().to_string().contains("announces 2"));
}
