use super::TrainError;
use crate::autodiff::{accumulate, Adam, AutodiffError, Tape};
use crate::model::Model;
use crate::rng::{derive, derive_index, rng_from, Rng};
use crate::tasks::{EnvMode, Environment, Episode, RlEnv, TaskKind, Transition};
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng as _;

/// How actions are picked from the policy.
pub enum Policy<'a> {
    /// Most probable action; the first in index order on ties.
    Greedy,
    Sample(&'a mut Rng),
}

/// Picks an action from a probability vector (zeros mark masked actions).
pub fn choose_action(probs: &[f64], policy: &mut Policy<'_>) -> usize {
    match policy {
        Policy::Greedy => {
            let mut best = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > probs[best] {
                    best = i;
                }
            }
            best
        }
        Policy::Sample(rng) => {
            let total: f64 = probs.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut last = 0;
            for (i, &p) in probs.iter().enumerate() {
                if p > 0.0 {
                    last = i;
                    if u < p {
                        return i;
                    }
                    u -= p;
                }
            }
            last
        }
    }
}

/// Plays one episode to completion or the step limit.
pub fn rollout(model: &Model, env: &mut RlEnv, policy: &mut Policy<'_>) -> Result<Episode, TrainError> {
    let mut episode = Episode::default();
    let wants_legal = env.task() == TaskKind::BlocksWorld;
    while !env.is_done() {
        let observation = env.observe();
        let head_input = env.head_input();
        let probs = model.action_probs(&observation, &head_input)?;
        let action = choose_action(&probs, policy);
        let legal = wants_legal.then(|| (0..env.num_actions()).map(|a| env.applies(a)).collect());
        let out = env.step(action)?;
        episode.transitions.push(Transition { observation, head_input, action, reward: out.reward, legal });
        episode.success = out.solved;
    }
    episode.success = env.is_solved();
    Ok(episode)
}

/// Coefficients of the per-episode objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReinforceTerms {
    pub beta: f64,
    pub gamma: f64,
    /// Weight of the mean validity cross-entropy per step (blocks world).
    pub aux_weight: f64,
    /// Subtracted from every return; 0 for plain REINFORCE.
    pub baseline: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EpisodeLoss {
    /// `policy + entropy + aux_weight * aux`.
    pub total: f64,
    /// `-sum_t v_t log pi(a_t | s_t)`.
    pub policy: f64,
    /// `-beta * sum_t H(pi(s_t))`.
    pub entropy: f64,
    /// Unweighted `sum_t` of the mean validity cross-entropy.
    pub aux: f64,
}

/// Loss and parameter gradients of one recorded episode:
///
/// ```text
/// L = -sum_t [ v_t log pi(a_t|s_t) + beta H(pi(s_t)) ] + aux_weight * sum_t aux_t
/// ```
///
/// Descending `L` is the REINFORCE update with entropy bonus.
pub fn reinforce_gradients(
    model: &Model,
    episode: &Episode,
    terms: &ReinforceTerms,
) -> Result<(EpisodeLoss, Vec<Vec<f64>>), TrainError> {
    let returns = episode.returns(terms.gamma);
    let mut grads: Vec<Vec<f64>> = model.params.iter().map(|p| vec![0.0; p.data.len()]).collect();
    let mut loss = EpisodeLoss::default();
    for (t, step) in episode.transitions.iter().enumerate() {
        let v = returns[t] - terms.baseline;
        let mut tape = Tape::new();
        let binding = tape.bind(&model.params);
        let out = model.action(&mut tape, &binding, &step.observation, &step.head_input)?;
        let logp = tape.pick(out.log_probs, step.action);
        if !tape.scalar(logp).is_finite() {
            return Err(TrainError::ZeroProbability { step: t, action: step.action });
        }
        let h = tape.entropy(out.log_probs);
        let mut parts = vec![(logp, -v), (h, -terms.beta)];
        loss.policy -= v * tape.scalar(logp);
        loss.entropy -= terms.beta * tape.scalar(h);
        if let (Some(aux), Some(legal)) = (out.aux_logits, &step.legal) {
            let ids = libm::sqrt(legal.len() as f64) as usize;
            let targets: Vec<(usize, f64)> = (0..legal.len())
                .filter(|a| a / ids != a % ids)
                .map(|a| (a, if legal[a] { 1.0 } else { 0.0 }))
                .collect();
            let bce = tape.bce_with_logits(aux, &targets);
            let mean = tape.scalar(bce) / targets.len() as f64;
            loss.aux += mean;
            if terms.aux_weight != 0.0 {
                parts.push((bce, terms.aux_weight / targets.len() as f64));
            }
        }
        let total = tape.lin(&parts)?;
        let g = tape.backward(total)?;
        accumulate(&mut grads, &g.for_params(&model.params, &binding));
    }
    loss.total = loss.policy + loss.entropy + terms.aux_weight * loss.aux;
    Ok((loss, grads))
}

/// One Adam step on the episode's objective.
pub fn reinforce_update(
    model: &mut Model,
    adam: &mut Adam,
    episode: &Episode,
    terms: &ReinforceTerms,
) -> Result<EpisodeLoss, TrainError> {
    let (loss, grads) = reinforce_gradients(model, episode, terms)?;
    if !loss.total.is_finite() {
        return Err(TrainError::Diverged { step: adam.step, loss: loss.total });
    }
    adam.apply(&mut model.params, &grads).map_err(|e| match e {
        AutodiffError::NonFiniteGradient { .. } => TrainError::Diverged { step: adam.step, loss: f64::NAN },
        e => e.into(),
    })?;
    Ok(loss)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub episodes: usize,
    pub successes: usize,
    /// Mean number of actions over successful episodes.
    pub average_moves: f64,
}

impl EvalReport {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.episodes as f64
    }
}

/// Greedy play on `episodes` fresh instances of size `m`; instance `k` is
/// drawn from `derive_index(derive(seed, "eval"), k)`.
pub fn evaluate(
    model: &Model,
    task: TaskKind,
    m: usize,
    episodes: usize,
    seed: u64,
    mode: EnvMode,
) -> Result<EvalReport, TrainError> {
    if episodes == 0 {
        return Err(TrainError::EmptyEvaluation);
    }
    let base = derive(seed, "eval");
    let (mut successes, mut moves) = (0, 0);
    for k in 0..episodes {
        let mut env = RlEnv::generate(task, m, derive_index(base, k as u64), mode)?;
        let ep = rollout(model, &mut env, &mut Policy::Greedy)?;
        if ep.success {
            successes += 1;
            moves += ep.transitions.len();
        }
    }
    let average_moves = if successes == 0 { 0.0 } else { moves as f64 / successes as f64 };
    Ok(EvalReport { episodes, successes, average_moves })
}

/// A sampling policy stream for training episode `index`.
pub(crate) fn episode_rng(seed: u64, index: u64) -> Rng {
    rng_from(derive_index(derive(seed, "train-episode"), index))
}
