use nlm::config::{RunConfig, Trainer};
use nlm_core::tasks::{TaskKind, PRESET_TASKS};

/// (task, depth, breadth, residual, max examples or episodes), transcribed
/// from the published hyper-parameter table.
const MODEL_TABLE: [(&str, usize, usize, bool, usize); 14] = [
    ("hasfather", 4, 3, false, 50_000),
    ("hassister", 4, 3, false, 50_000),
    ("isgrandparent", 4, 3, false, 100_000),
    ("isuncle", 4, 3, false, 100_000),
    ("ismguncle", 4, 3, false, 200_000),
    ("adjacenttored", 4, 3, false, 100_000),
    ("4-connectivity", 4, 3, false, 50_000),
    ("6-connectivity", 8, 3, true, 50_000),
    ("1-outdegree", 4, 3, false, 50_000),
    ("2-outdegree", 5, 4, true, 100_000),
    ("sorting", 3, 2, true, 1_000),
    ("path", 5, 3, true, 24_000),
    ("blocksworld", 7, 2, true, 50_000),
    ("shouldmove", 7, 2, true, 50_000),
];

/// (task, m range, beta_init, omega, epochs, train epoch episodes, exam episodes).
const RL_TABLE: [(&str, (usize, usize), f64, f64, usize, usize, usize); 3] = [
    ("sorting", (4, 10), 0.01, 0.5, 5, 200, 200),
    ("path", (3, 12), 0.1, 0.5, 40, 600, 3000),
    ("blocksworld", (2, 12), 0.2, 0.6, 50, 1000, 3000),
];

fn preset(task: &str) -> nlm::config::Resolved {
    RunConfig::preset(task.parse().unwrap()).resolve_with_env(|_| None).unwrap()
}

#[test]
fn presets_match_the_embedded_table() {
    assert_eq!(PRESET_TASKS.len(), MODEL_TABLE.len());
    for (task, depth, breadth, residual, budget) in MODEL_TABLE {
        let r = preset(task);
        assert_eq!((r.model.depth, r.model.breadth, r.model.residual), (depth, breadth, residual), "{task}");
        assert_eq!(r.model.channels, 8, "{task}");
        assert_eq!(r.model.mlp_hidden, None, "{task}");
        let kind: TaskKind = task.parse().unwrap();
        assert_eq!(kind.model_preset().unwrap().budget, budget, "{task}");
        if let Trainer::Supervised { config, .. } = &r.trainer {
            assert_eq!(config.max_examples, budget, "{task}");
            assert_eq!(config.batch_size, 4);
            assert_eq!(config.adam.lr, 0.005);
            assert_eq!(config.loss_threshold, 1e-6);
        }
    }
    for (task, (lo, hi), beta, omega, epochs, train, exam) in RL_TABLE {
        let Trainer::Curriculum { config } = preset(task).trainer else { panic!("{task} is sequential") };
        assert_eq!((config.m_min, config.m_max), (lo, hi), "{task}");
        assert_eq!((config.beta, config.omega), (beta, omega), "{task}");
        assert_eq!(config.episodes_per_epoch, train, "{task}");
        assert_eq!(config.exam_episodes, exam, "{task}");
        assert_eq!(config.gamma, 0.99);
        assert_eq!(config.adam.lr, 0.005);
        assert_eq!(config.max_epochs, epochs, "{task}");
        assert_eq!(config.max_epochs * config.episodes_per_epoch, kind_budget(task), "{task}");
    }
}

#[test]
fn hasfather_and_path_presets() {
    let r = preset("hasfather");
    assert_eq!((r.model.depth, r.model.breadth, r.model.residual), (4, 3, false));
    let r = preset("path");
    assert_eq!((r.model.depth, r.model.breadth, r.model.residual), (5, 3, true));
    let r = preset("blocksworld");
    assert_eq!((r.model.depth, r.model.breadth, r.model.residual), (7, 2, true));
}

#[test]
fn overrides_apply() {
    let c = RunConfig::parse(
        r#"
version = 1
task = "hasfather"
seed = 9
[model]
depth = 2
channels = 4
[supervised]
train_m = 10
max_examples = 200
"#,
    )
    .unwrap();
    let r = c.resolve_with_env(|_| None).unwrap();
    assert_eq!((r.seed, r.model.depth, r.model.channels), (9, 2, 4));
    let Trainer::Supervised { train_m, config } = r.trainer else { panic!() };
    assert_eq!((train_m, config.max_examples), (10, 200));
    assert!(r.deterministic);
}

fn config_error(text: &str) -> String {
    let e = RunConfig::parse(text).and_then(|c| c.resolve_with_env(|_| None).map(|_| ())).unwrap_err();
    assert!(matches!(e, nlm::Error::Config(_)), "{e}");
    e.to_string()
}

#[test]
fn unknown_keys_are_errors() {
    let e = config_error("version = 1\ntask = \"sorting\"\n[rl]\nomgea = 0.5\n");
    assert!(e.contains("omgea"), "{e}");
    let e = config_error("version = 1\ntask = \"sorting\"\nsede = 1\n");
    assert!(e.contains("sede"), "{e}");
}

#[test]
fn validation_names_the_field() {
    let e = config_error("version = 1\ntask = \"sorting\"\n[rl]\nomega = 1.5\n");
    assert!(e.contains("rl.omega"), "{e}");
    let e = config_error("version = 1\ntask = \"path\"\n[rl]\nm_min = 9\nm_max = 4\n");
    assert!(e.contains("rl.m_min"), "{e}");
    let e = config_error("version = 1\ntask = \"hasfather\"\n[supervised]\ntrain_m = 1\n");
    assert!(e.contains("supervised.train_m"), "{e}");
    let e = config_error("version = 1\ntask = \"hasfather\"\n[model]\nbreadth = 1\n");
    assert!(e.contains("model.breadth"), "{e}");
    let e = config_error("version = 2\ntask = \"hasfather\"\n");
    assert!(e.contains("version"), "{e}");
    let e = config_error("version = 1\ntask = \"sorting\"\n[supervised]\n");
    assert!(e.contains("supervised"), "{e}");
    let e = config_error("version = 1\ntask = \"nosuchtask\"\n");
    assert!(e.contains("nosuchtask"), "{e}");
}

#[test]
fn environment_overrides_paths_only() {
    let c = RunConfig::parse("version = 1\ntask = \"sorting\"\nseed = 3\n[paths]\nlog = \"a.jsonl\"\n").unwrap();
    let env = |k: &str| match k {
        "NLM_LOG" => Some("b.jsonl".to_string()),
        "NLM_CHECKPOINT" => Some("c.ckpt".to_string()),
        _ => None,
    };
    let r = c.resolve_with_env(env).unwrap();
    assert_eq!(r.log.unwrap().to_str(), Some("b.jsonl"));
    assert_eq!(r.checkpoint.unwrap().to_str(), Some("c.ckpt"));
    assert_eq!(r.dataset, None);
    assert_eq!(r.seed, 3);
}

fn kind_budget(task: &str) -> usize {
    MODEL_TABLE.iter().find(|row| row.0 == task).unwrap().4
}
