//! The binary end to end: exit codes, reports and file outputs.

use nlm::facts::FactsJson;
use nlm_core::logic::SHOULDMOVE_RULES;
use nlm_core::tasks::blocks::{should_move_labels, World};
use nlm_core::tasks::BlocksEnv;
use std::path::Path;
use std::process::{Command, Output};

fn nlm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlm")).args(args).env_remove("NLM_CHECKPOINT").env_remove("NLM_LOG").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_prints_the_digest_of_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let o = nlm(&["generate", "--task", "hasfather", "--m", "20", "--count", "3", "--seed", "7", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let digest = nlm::digest(&std::fs::read(&out).unwrap());
    assert!(text(&o.stdout).starts_with(&digest));
    let o = nlm(&["generate", "--task", "hasfather", "--m", "1", "--count", "3", "--out", p(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_exit_codes() {
    let o = nlm(&["verify", "--scope", "shapes"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stdout).lines().all(|l| l.contains("\"passed\":true")));
    let o = nlm(&["verify", "--scope", "oracle", "--tamper-reduce"]);
    assert_eq!(code(&o), 4, "{}", text(&o.stderr));
    assert!(text(&o.stdout).contains("\"passed\":false"));
    let o = nlm(&["verify", "--scope", "nonsense"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn oracle_derives_shouldmove_on_a_two_block_swap() {
    let dir = tempfile::tempdir().unwrap();
    // Block 2 sits on block 1; the target puts block 1 on block 2.
    let env = BlocksEnv::new(World { on: vec![0, 0, 1] }, World { on: vec![0, 2, 0] });
    let rules = dir.path().join("rules.txt");
    let facts = dir.path().join("facts.json");
    let out = dir.path().join("out.json");
    std::fs::write(&rules, SHOULDMOVE_RULES).unwrap();
    std::fs::write(&facts, FactsJson::from_fact_set(&env.facts()).to_pretty()).unwrap();
    let o = nlm(&["oracle", "--rules", p(&rules), "--facts", p(&facts), "--out", p(&out), "--plan"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    assert!(text(&o.stderr).contains("ShouldMove(x) <-"));
    let derived = FactsJson::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let should = &derived.relations["ShouldMove"];
    assert_eq!(should.tuples, vec![vec![2]], "only block 2 of the operating world must move");
    let labels = should_move_labels(&env).unwrap();
    let expected: Vec<Vec<usize>> = (0..labels.num_objects()).filter(|&i| labels.get(&[i])).map(|i| vec![i]).collect();
    assert_eq!(should.tuples, expected);
}

#[test]
fn oracle_with_no_rules_echoes_the_facts() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("empty.txt");
    let facts = dir.path().join("facts.json");
    std::fs::write(&rules, "").unwrap();
    let given = r#"{"objects": 3, "relations": {"Edge": {"arity": 2, "tuples": [[2, 0], [0, 1]]}, "Red": {"arity": 1, "tuples": [[1]]}}}"#;
    std::fs::write(&facts, given).unwrap();
    let o = nlm(&["oracle", "--rules", p(&rules), "--facts", p(&facts)]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let echoed = FactsJson::parse(&text(&o.stdout)).unwrap();
    let mut expected = FactsJson::parse(given).unwrap();
    expected.relations.get_mut("Edge").unwrap().tuples.sort();
    assert_eq!(echoed, expected);
}

#[test]
fn oracle_names_the_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("cyclic.txt");
    let facts = dir.path().join("facts.json");
    std::fs::write(&rules, "A(x) <- B(x)\nB(x) <- A(x) & C(x)\n").unwrap();
    std::fs::write(&facts, r#"{"objects": 2, "relations": {"C": {"arity": 1, "tuples": [[0]]}}}"#).unwrap();
    let o = nlm(&["oracle", "--rules", p(&rules), "--facts", p(&facts)]);
    assert_eq!(code(&o), 3);
    let err = text(&o.stderr);
    assert!(err.contains("A -> B -> A") || err.contains("B -> A -> B"), "{err}");
}

#[test]
fn oracle_reports_parse_positions() {
    let dir = tempfile::tempdir().unwrap();
    let rules = dir.path().join("bad.txt");
    let facts = dir.path().join("facts.json");
    std::fs::write(&rules, "A(x) <- B(x)\nC(x) <- & B(x)\n").unwrap();
    std::fs::write(&facts, r#"{"objects": 2}"#).unwrap();
    let o = nlm(&["oracle", "--rules", p(&rules), "--facts", p(&facts)]);
    assert_eq!(code(&o), 3);
    assert!(text(&o.stderr).contains("line 2"), "{}", text(&o.stderr));
}

#[test]
fn train_then_eval_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    let ckpt = dir.path().join("run.ckpt");
    let log = dir.path().join("run.jsonl");
    std::fs::write(
        &config,
        format!(
            "version = 1\ntask = \"sorting\"\nseed = 2\n[rl]\nm_min = 2\nm_max = 3\nmax_epochs = 2\nepisodes_per_epoch = 4\nexam_episodes = 4\n[paths]\ncheckpoint = {:?}\nlog = {:?}\n",
            p(&ckpt),
            p(&log)
        ),
    )
    .unwrap();
    let o = nlm(&["train", "--config", p(&config), "--deterministic"]);
    assert_eq!(code(&o), 0, "{}", text(&o.stderr));
    let first = (std::fs::read(&ckpt).unwrap(), std::fs::read(&log).unwrap());
    let o = nlm(&["train", "--config", p(&config), "--deterministic"]);
    assert_eq!(code(&o), 0);
    assert_eq!(first, (std::fs::read(&ckpt).unwrap(), std::fs::read(&log).unwrap()));

    let eval = |extra: &[&str]| {
        let mut args = vec!["eval", "--checkpoint", p(&ckpt), "--m", "3,4", "--episodes", "25", "--seed", "4"];
        args.extend_from_slice(extra);
        nlm(&args)
    };
    let a = eval(&[]);
    assert_eq!(code(&a), 0, "{}", text(&a.stderr));
    let b = eval(&["--deterministic"]);
    assert_eq!(a.stdout, b.stdout);
    let reports: Vec<nlm::eval::Report> = text(&a.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(reports.len(), 2);
    assert!(text(&a.stderr).contains("confidence"));
    assert_eq!(code(&eval(&["--episodes", "0"])), 2);
    assert_eq!(code(&eval(&["--task", "hasfather"])), 2);

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "version = 1\ntask = \"sorting\"\n[rl]\ngamma = 0\n").unwrap();
    let o = nlm(&["train", "--config", p(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(text(&o.stderr).contains("rl.gamma"));
}
