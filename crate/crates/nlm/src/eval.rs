//! Evaluation reports with a Chernoff confidence note.
//!
//! Instances are drawn exactly as `nlm_core::train::evaluate` draws them
//! (`derive_index(derive(seed, "eval"), k)`), so the parallel paths here
//! agree with the sequential ones bit for bit.

use crate::{Error, Result};
use nlm_core::rng::{derive, derive_index};
use nlm_core::tasks::{generate_labeled, EnvMode, RlEnv, TaskKind};
use nlm_core::train::{accuracy, rollout, Policy, TrainError};
use nlm_core::Model;
use serde::{Deserialize, Serialize};

/// Confidence of the bound when none is requested.
pub const DEFAULT_CONFIDENCE: f64 = 0.997;

/// Lower bound on the true success probability after `failures` failures in
/// `n` independent trials, holding with probability `confidence`.
///
/// Multiplicative Chernoff: with mean failures `mu`, `P[X <= k] <=
/// exp(-(mu - k)^2 / (2 mu))`. Solving for the `mu` where that equals
/// `1 - confidence` gives `mu = k + L + sqrt(L^2 + 2kL)`, `L = ln(1/(1-c))`.
pub fn lower_bound(n: usize, failures: usize, confidence: f64) -> f64 {
    assert!(n > 0 && failures <= n && confidence > 0.0 && confidence < 1.0);
    let k = failures as f64;
    let l = -(1.0 - confidence).ln();
    let mu = k + l + (l * l + 2.0 * k * l).sqrt();
    1.0 - (mu / n as f64).min(1.0)
}

/// Confidence with which `failures` in `n` trials certify a success
/// probability of at least `target` (0 if they do not).
pub fn confidence_at_least(n: usize, failures: usize, target: f64) -> f64 {
    let mu = n as f64 * (1.0 - target);
    let k = failures as f64;
    if mu <= k {
        return 0.0;
    }
    1.0 - (-(mu - k).powi(2) / (2.0 * mu)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub task: TaskKind,
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    /// Instances (supervised) or episodes (sequential) without any error.
    pub successes: usize,
    /// `successes / samples`.
    pub success_rate: f64,
    /// Supervised: micro accuracy over every object or pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Sequential: mean actions over successful episodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub average_moves: Option<f64>,
    pub confidence: f64,
    /// Bound on the per-sample success probability at `confidence`.
    pub lower_bound: f64,
}

/// Per-sample outcome: (fully correct, correct entries, entries, moves).
type Outcome = (bool, u64, u64, usize);

fn sample(model: &Model, task: TaskKind, m: usize, seed: u64) -> Result<Outcome, TrainError> {
    if task.is_supervised() {
        let inst = generate_labeled(task, m, seed)?;
        let acc = accuracy(model, &inst)?;
        Ok((acc.correct == acc.total, acc.correct, acc.total, 0))
    } else {
        let mut env = RlEnv::generate(task, m, seed, EnvMode::Eval)?;
        let ep = rollout(model, &mut env, &mut Policy::Greedy)?;
        Ok((ep.success, 0, 0, ep.transitions.len()))
    }
}

/// Evaluates `model` on `samples` fresh instances of size `m` using up to
/// `workers` threads; the result does not depend on `workers`.
pub fn evaluate(
    model: &Model,
    task: TaskKind,
    m: usize,
    samples: usize,
    seed: u64,
    confidence: f64,
    workers: usize,
) -> Result<Report> {
    if samples == 0 {
        return Err(Error::Config("nothing to evaluate: samples must be positive".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Config(format!("confidence must lie in (0, 1), got {confidence}")));
    }
    let base = derive(seed, "eval");
    let workers = workers.clamp(1, samples);
    let chunk = samples.div_ceil(workers);
    let outcomes: Vec<Outcome> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w * chunk..((w + 1) * chunk).min(samples))
                        .map(|k| sample(model, task, m, derive_index(base, k as u64)))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("eval worker panicked")).collect::<Result<Vec<_>, _>>()
    })
    .map_err(|e| Error::Runtime(e.to_string()))?
    .into_iter()
    .flatten()
    .collect();
    let successes = outcomes.iter().filter(|o| o.0).count();
    let (correct, total): (u64, u64) = outcomes.iter().fold((0, 0), |(c, t), o| (c + o.1, t + o.2));
    let moves: usize = outcomes.iter().filter(|o| o.0).map(|o| o.3).sum();
    let supervised = task.is_supervised();
    Ok(Report {
        task,
        m,
        samples,
        seed,
        successes,
        success_rate: successes as f64 / samples as f64,
        accuracy: supervised.then(|| if total == 0 { 1.0 } else { correct as f64 / total as f64 }),
        average_moves: (!supervised).then(|| if successes == 0 { 0.0 } else { moves as f64 / successes as f64 }),
        confidence,
        lower_bound: lower_bound(samples, samples - successes, confidence),
    })
}

impl Report {
    /// One human-readable line.
    pub fn summary(&self) -> String {
        let unit = if self.task.is_supervised() { "instances" } else { "episodes" };
        let mut s = format!(
            "{} m={}: {}/{} {unit} solved ({:.2}%)",
            self.task,
            self.m,
            self.successes,
            self.samples,
            100.0 * self.success_rate
        );
        if let Some(a) = self.accuracy {
            s += &format!(", micro accuracy {:.4}%", 100.0 * a);
        }
        if let Some(mv) = self.average_moves {
            s += &format!(", {mv:.2} moves on average");
        }
        s += &format!(
            "; success probability >= {:.3}% with {:.1}% confidence",
            100.0 * self.lower_bound,
            100.0 * self.confidence
        );
        s
    }
}
