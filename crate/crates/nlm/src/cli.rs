//! The `nlm` command line. Every command is a plain function over parsed
//! arguments so tests can drive it in-process.

use crate::checkpoint::{Checkpoint, Metadata, TrainingState};
use crate::config::{Resolved, RunConfig, Trainer};
use crate::log::{Event, Log};
use crate::{dataset, eval, facts::FactsJson, Error, Result};
use clap::{Args, Parser, Subcommand};
use nlm_core::logic::{compile_clause_plan, forward_chain, parse_program, PlanStep};
use nlm_core::rng::derive;
use nlm_core::tasks::{EnvMode, LabeledInstance, TaskKind};
use nlm_core::train::{
    curriculum_train, train_supervised, CurriculumEvent, Dataset, Generated, TrainError,
};
use nlm_core::verify::{self, Scope};
use nlm_core::Model;
use std::io::Write;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "nlm", version, about = "Neural Logic Machines: generate, train, evaluate, verify")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a dataset file and print its SHA-256 digest.
    Generate(GenerateArgs),
    /// Train a model from a run config or a task preset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on fresh instances.
    Eval(EvalArgs),
    /// Run the invariant suites; exits 4 on any failure.
    Verify(VerifyArgs),
    /// Forward-chain a rule file over a facts file.
    Oracle(OracleArgs),
    /// Print the resolved preset of every task.
    Presets,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub task: TaskKind,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Instance distribution (only path finding distinguishes the two).
    #[arg(long, default_value = "train", value_parser = parse_mode)]
    pub mode: EnvMode,
}

fn parse_mode(s: &str) -> std::result::Result<EnvMode, String> {
    match s {
        "train" => Ok(EnvMode::Train),
        "eval" => Ok(EnvMode::Eval),
        _ => Err(format!("unknown mode `{s}` (train, eval)")),
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// TOML run config.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    pub config: Option<PathBuf>,
    /// Train a task with all preset settings.
    #[arg(long)]
    pub preset: Option<TaskKind>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Continue from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Null wall times in the log, single worker.
    #[arg(long)]
    pub deterministic: bool,
    /// Stop (with a checkpoint) after this many log records.
    #[arg(long)]
    pub stop_after: Option<u64>,
    /// Checkpoint path (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Log path (overrides the config).
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Task to evaluate on; defaults to the checkpoint's.
    #[arg(long)]
    pub task: Option<TaskKind>,
    /// Instance sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub m: Vec<usize>,
    /// Instances (supervised) or episodes (sequential) per size.
    #[arg(long, default_value_t = 1000)]
    pub episodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = eval::DEFAULT_CONFIDENCE)]
    pub confidence: f64,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Single worker.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = Scope::All)]
    pub scope: Scope,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Swap in a reduce that ignores the distinct-object mask, to check
    /// that the suites catch it.
    #[arg(long, hide = true)]
    pub tamper_reduce: bool,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub rules: PathBuf,
    #[arg(long)]
    pub facts: PathBuf,
    /// Output facts file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also print the compiled tensor plan of every clause (to stderr).
    #[arg(long)]
    pub plan: bool,
}

/// Runs a parsed command, writing reports to `out` and summaries to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Generate(a) => cmd_generate(&a, out),
        Command::Train(a) => cmd_train(&a, out, err),
        Command::Eval(a) => cmd_eval(&a, out, err),
        Command::Verify(a) => cmd_verify(&a, out, err),
        Command::Oracle(a) => cmd_oracle(&a, out, err),
        Command::Presets => cmd_presets(out),
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::Runtime(format!("writing output: {e}"))
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let bytes = dataset::generate(a.task, a.m, a.count, a.seed, a.mode)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(&a.out, &bytes).map_err(|e| Error::io(&a.out, e))?;
    writeln!(out, "{}  {}", crate::digest(&bytes), a.out.display()).map_err(io_out)
}

/// What a training invocation ended with.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// The run reached its end (graduated or spent its budget), as opposed
    /// to stopping early.
    pub finished: bool,
    pub graduated: bool,
    pub checkpoint: Checkpoint,
}

fn load_dataset(path: &Path, task: TaskKind) -> Result<Vec<LabeledInstance>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (header, records) = dataset::parse(&text).map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))?;
    if header.task != task {
        return Err(Error::Config(format!("dataset {} holds {} instances, config trains {task}", path.display(), header.task)));
    }
    if records.is_empty() {
        return Err(Error::Config(format!("dataset {} is empty", path.display())));
    }
    records.iter().map(|r| r.to_labeled()).collect()
}

fn train_error(e: TrainError) -> Error {
    match e {
        TrainError::Config(s) => Error::Config(s),
        e => Error::Runtime(format!("training failed: {e}")),
    }
}

/// Trains per `r`, optionally resuming, and stops early after `stop_after`
/// new log records. Checkpoints are written on every lesson pass, on
/// graduation, every `checkpoint_every` records, on an early stop and at
/// the end.
pub fn train(r: &Resolved, resume: Option<Checkpoint>, stop_after: Option<u64>) -> Result<TrainOutcome> {
    let trainer = r.trainer.canonical();
    let (mut model, mut training, keep) = match resume {
        Some(ck) => {
            let mismatch = |what: &str| Error::Config(format!("cannot resume: checkpoint {what} differs from the config"));
            if ck.task != r.task {
                return Err(mismatch("task"));
            }
            if ck.seed != r.seed {
                return Err(mismatch("seed"));
            }
            if ck.model.config != r.model {
                return Err(mismatch("model config"));
            }
            if ck.metadata.trainer != trainer {
                return Err(mismatch("trainer settings"));
            }
            if ck.metadata.finished {
                return Ok(TrainOutcome { finished: true, graduated: ck.metadata.graduated, checkpoint: ck });
            }
            (ck.model, ck.metadata.training, ck.metadata.log_records)
        }
        None => {
            let model = Model::new(r.model.clone(), derive(r.seed, "init")).map_err(|e| Error::Config(e.to_string()))?;
            (model, TrainingState::Untrained, 0)
        }
    };
    let mut log = Log::open(r.log.as_deref(), keep, r.deterministic)?;
    if keep == 0 {
        log.write(Event::Start { task: r.task, seed: r.seed, trainer: trainer.clone() })?;
    }
    let mut written = 0u64;
    let every = r.checkpoint_every as u64;
    let save = |log: &mut Log, model: &Model, training: &TrainingState, graduated: bool, finished: bool| -> Result<Checkpoint> {
        log.flush()?;
        let ck = Checkpoint {
            task: r.task,
            seed: r.seed,
            model: model.clone(),
            metadata: Metadata {
                training: training.clone(),
                trainer: trainer.clone(),
                graduated,
                log_records: log.records(),
                finished,
            },
        };
        if let Some(p) = &r.checkpoint {
            ck.save(p)?;
        }
        Ok(ck)
    };
    loop {
        let mut user_stop = false;
        let mut failure: Option<Error> = None;
        let mut note = |log: &mut Log, event: Event, pause: bool| -> ControlFlow<()> {
            if let Err(e) = log.write(event) {
                failure.get_or_insert(e);
                return ControlFlow::Break(());
            }
            written += 1;
            if stop_after.is_some_and(|n| written >= n) {
                user_stop = true;
            }
            if user_stop || pause || (every > 0 && log.records() % every == 0) {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        };
        let (stopped, graduated, end) = match &r.trainer {
            Trainer::Supervised { train_m, config } => {
                let state = match &training {
                    TrainingState::Supervised { state } => Some(state.clone()),
                    _ => None,
                };
                let data: Box<dyn Dataset> = match &r.dataset {
                    Some(p) => Box::new(load_dataset(p, r.task)?),
                    None => Box::new(Generated { task: r.task, m: *train_m, seed: r.seed }),
                };
                let res = train_supervised(config, &mut model, &*data, r.seed, state, &mut |rec, _| {
                    note(&mut log, Event::Step(rec.clone()), false)
                });
                let (state, report) = res.map_err(train_error)?;
                training = TrainingState::Supervised { state: state.clone() };
                let end = Event::End {
                    graduated: report.graduated,
                    steps: report.steps,
                    final_loss: state.last_loss,
                };
                (report.stopped, report.graduated, end)
            }
            Trainer::Curriculum { config } => {
                let state = match &training {
                    TrainingState::Curriculum { state } => Some(state.clone()),
                    _ => None,
                };
                let res = curriculum_train(config, r.task, &mut model, r.seed, state, &mut |ev, _, _| match ev {
                    CurriculumEvent::Epoch(rec) => note(&mut log, Event::Epoch((*rec).clone()), false),
                    CurriculumEvent::LessonPassed(l) => {
                        note(&mut log, Event::LessonPassed { lesson: l.index, m: l.m }, true)
                    }
                    CurriculumEvent::Graduated => note(&mut log, Event::Graduated, true),
                });
                let (state, report) = res.map_err(train_error)?;
                training = TrainingState::Curriculum { state };
                let end = Event::End { graduated: report.graduated, steps: report.epochs_used as u64, final_loss: None };
                (report.stopped, report.graduated, end)
            }
        };
        if let Some(e) = failure {
            return Err(e);
        }
        if stopped {
            let ck = save(&mut log, &model, &training, graduated, false)?;
            if user_stop {
                return Ok(TrainOutcome { finished: false, graduated, checkpoint: ck });
            }
            continue;
        }
        if graduated && matches!(r.trainer, Trainer::Supervised { .. }) {
            log.write(Event::Graduated)?;
        }
        log.write(end)?;
        let ck = save(&mut log, &model, &training, graduated, true)?;
        return Ok(TrainOutcome { finished: true, graduated, checkpoint: ck });
    }
}

pub fn cmd_train(a: &TrainArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut config = match (&a.config, a.preset) {
        (Some(p), _) => RunConfig::load(p)?,
        (None, Some(task)) => RunConfig::preset(task),
        (None, None) => return Err(Error::Config("either --config or --preset is required".into())),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if a.deterministic {
        config.deterministic = true;
    }
    if let Some(p) = &a.out {
        config.paths.checkpoint = Some(p.clone());
    }
    if let Some(p) = &a.log {
        config.paths.log = Some(p.clone());
    }
    let mut resolved = config.resolve()?;
    // Explicit flags beat environment overrides.
    if let Some(p) = &a.out {
        resolved.checkpoint = Some(p.clone());
    }
    if let Some(p) = &a.log {
        resolved.log = Some(p.clone());
    }
    let resume = a.resume.as_deref().map(Checkpoint::load).transpose()?;
    let outcome = train(&resolved, resume, a.stop_after)?;
    let state = if !outcome.finished {
        "stopped early"
    } else if outcome.graduated {
        "graduated"
    } else {
        "finished without graduating"
    };
    let summary = serde_json::json!({
        "task": resolved.task,
        "seed": resolved.seed,
        "finished": outcome.finished,
        "graduated": outcome.graduated,
        "log_records": outcome.checkpoint.metadata.log_records,
        "checkpoint": resolved.checkpoint,
    });
    writeln!(out, "{summary}").map_err(io_out)?;
    let ckpt = resolved.checkpoint.as_ref().map_or("not saved".to_string(), |p| p.display().to_string());
    writeln!(err, "{} (seed {}): {state}; checkpoint {ckpt}", resolved.task, resolved.seed).map_err(io_out)
}

pub fn cmd_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let task = a.task.unwrap_or(ck.task);
    let cfg = &ck.model.config;
    if task.head() != cfg.head {
        return Err(Error::Config(format!("{task} needs a {:?} head, the checkpoint has {:?}", task.head(), cfg.head)));
    }
    let mut inputs = task.input_channels();
    inputs.resize(cfg.breadth + 1, 0);
    if inputs.len() != cfg.input_channels.len() || inputs != cfg.input_channels {
        return Err(Error::Config(format!(
            "{task} premises have channels {:?} per arity, the checkpoint expects {:?}",
            task.input_channels(),
            cfg.input_channels
        )));
    }
    if a.episodes == 0 {
        return Err(Error::Config("nothing to evaluate: --episodes must be positive".into()));
    }
    let min = task.min_objects();
    if let Some(m) = a.m.iter().find(|&&m| m < min) {
        return Err(Error::Config(format!("--m {m} is below the {min} objects {task} needs")));
    }
    let workers = if a.deterministic {
        1
    } else {
        a.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    };
    let mut footer = Vec::new();
    for &m in &a.m {
        let report = eval::evaluate(&ck.model, task, m, a.episodes, a.seed, a.confidence, workers)?;
        writeln!(out, "{}", serde_json::to_string(&report).expect("serializable")).map_err(io_out)?;
        footer.push(report.summary());
    }
    for line in footer {
        writeln!(err, "{line}").map_err(io_out)?;
    }
    Ok(())
}

pub fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let mut opts = verify::Options { seed: a.seed, ..verify::Options::default() };
    if a.tamper_reduce {
        opts.reduce = verify::reduce_including_masked;
    }
    let checks = verify::run(a.scope, &opts);
    for c in &checks {
        writeln!(out, "{}", serde_json::to_string(c).expect("serializable")).map_err(io_out)?;
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).collect();
    for suite in Scope::SUITES {
        let of: Vec<_> = checks.iter().filter(|c| c.suite == suite).collect();
        if !of.is_empty() {
            let ok = of.iter().filter(|c| c.passed).count();
            writeln!(err, "{suite}: {ok}/{} checks passed", of.len()).map_err(io_out)?;
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        let names: Vec<_> = failed.iter().map(|c| format!("{}/{}", c.suite, c.name)).collect();
        Err(Error::Verification(names.join(", ")))
    }
}

fn describe_step(step: &PlanStep, body: &[String]) -> String {
    match step {
        PlanStep::Expand { literal, added } if added.is_empty() => format!("take {}", body[*literal]),
        PlanStep::Expand { literal, added } => format!("expand {} by {}", body[*literal], added.join(", ")),
        PlanStep::Boolean { order, .. } => format!("conjoin over ({})", order.join(", ")),
        PlanStep::Reduce { var, quantifier } => format!("reduce {var} ({quantifier:?})"),
        PlanStep::FinalExpand { var } => format!("expand by head variable {var}"),
        PlanStep::FinalPermute { permutation } => format!("permute axes {:?}", permutation.as_slice()),
    }
}

pub fn cmd_oracle(a: &OracleArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let rules = std::fs::read_to_string(&a.rules).map_err(|e| Error::io(&a.rules, e))?;
    let program = parse_program(&rules).map_err(|e| Error::Runtime(format!("{}: {e}", a.rules.display())))?;
    let text = std::fs::read_to_string(&a.facts).map_err(|e| Error::io(&a.facts, e))?;
    let base = FactsJson::parse(&text)?.to_fact_set()?;
    let derived = forward_chain(&program, &base).map_err(|e| Error::Runtime(e.to_string()))?;
    if a.plan {
        for clause in &program.clauses {
            let plan = compile_clause_plan(clause, usize::MAX).map_err(|e| Error::Runtime(e.to_string()))?;
            let body: Vec<String> =
                clause.body.iter().map(|l| format!("{}{}", if l.negated { "!" } else { "" }, l.atom)).collect();
            writeln!(err, "{clause}    [arity <= {}]", plan.max_arity).map_err(io_out)?;
            for step in &plan.steps {
                writeln!(err, "  {}", describe_step(step, &body)).map_err(io_out)?;
            }
        }
    }
    let json = FactsJson::from_fact_set(&derived).to_pretty();
    match &a.out {
        Some(p) => std::fs::write(p, json + "\n").map_err(|e| Error::io(p, e)),
        None => writeln!(out, "{json}").map_err(io_out),
    }
}

pub fn cmd_presets(out: &mut dyn Write) -> Result<()> {
    for task in nlm_core::tasks::PRESET_TASKS {
        let r = RunConfig::preset(task).resolve_with_env(|_| None)?;
        let line = serde_json::json!({ "task": task, "model": r.model, "trainer": r.trainer });
        writeln!(out, "{line}").map_err(io_out)?;
    }
    Ok(())
}
