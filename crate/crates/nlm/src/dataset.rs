//! Line-delimited dataset files: a header record, then one instance per
//! line. Supervised instances carry premises and labels; sequential ones
//! carry their initial state and first observation.

use crate::tensor_io::TensorRecord;
use crate::{Error, Result};
use nlm_core::logic::Relation;
use nlm_core::rng::{derive, derive_index};
use nlm_core::tasks::blocks::World;
use nlm_core::tasks::graph::Graph;
use nlm_core::tasks::{
    generate_labeled, BlocksEnv, EnvMode, Environment, LabeledInstance, PathEnv, RlEnv, SortEnv, TaskKind,
};
use serde::{Deserialize, Serialize};

pub const DATASET_FORMAT: &str = "nlm-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub task: TaskKind,
    pub m: usize,
    pub count: usize,
    pub seed: u64,
    pub mode: EnvMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Sorting { array: Vec<usize> },
    Path { nodes: usize, edges: Vec<(usize, usize)>, start: usize, target: usize },
    Blocks { current: Vec<usize>, target: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub task: TaskKind,
    pub m: usize,
    /// Regenerates the instance with the task generator.
    pub seed: u64,
    pub premises: Vec<TensorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<TensorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<InitialState>,
}

/// Seed of instance `index` in a dataset generated from `seed`.
pub fn instance_seed(seed: u64, index: u64) -> u64 {
    derive_index(derive(seed, "dataset"), index)
}

fn state_of(env: &RlEnv) -> InitialState {
    match env {
        RlEnv::Sorting(e) => InitialState::Sorting { array: e.array.clone() },
        RlEnv::Path(e) => {
            let n = e.graph.m;
            let edges = (0..n).flat_map(|x| (0..n).map(move |y| (x, y))).filter(|&(x, y)| e.graph.edges[x][y]).collect();
            InitialState::Path { nodes: n, edges, start: e.current, target: e.target }
        }
        RlEnv::Blocks(e) => InitialState::Blocks { current: e.current.on.clone(), target: e.target.on.clone() },
    }
}

pub fn make_record(task: TaskKind, m: usize, seed: u64, mode: EnvMode) -> Result<Record> {
    let runtime = |e: nlm_core::tasks::TaskError| Error::Runtime(e.to_string());
    if task.is_supervised() {
        let inst = generate_labeled(task, m, seed).map_err(runtime)?;
        Ok(Record {
            task,
            m,
            seed,
            premises: inst.premises.iter().map(TensorRecord::from).collect(),
            labels: Some(TensorRecord::from(&inst.labels.to_tensor())),
            state: None,
        })
    } else {
        let env = RlEnv::generate(task, m, seed, mode).map_err(runtime)?;
        Ok(Record {
            task,
            m,
            seed,
            premises: env.observe().iter().map(TensorRecord::from).collect(),
            labels: None,
            state: Some(state_of(&env)),
        })
    }
}

/// The whole file as bytes, header first, one JSON object per line.
pub fn generate(task: TaskKind, m: usize, count: usize, seed: u64, mode: EnvMode) -> Result<Vec<u8>> {
    if m < 2 && !matches!(task, TaskKind::BlocksWorld | TaskKind::ShouldMove) {
        return Err(Error::Config(format!("m must be at least 2, got {m}")));
    }
    let header = Header {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        task,
        m,
        count,
        seed,
        mode,
    };
    let mut out = serde_json::to_vec(&header).expect("serializable");
    out.push(b'\n');
    for k in 0..count {
        let record = make_record(task, m, instance_seed(seed, k as u64), mode)?;
        serde_json::to_writer(&mut out, &record).expect("serializable");
        out.push(b'\n');
    }
    Ok(out)
}

pub fn parse(text: &str) -> Result<(Header, Vec<Record>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| Error::Runtime("dataset is empty (no header record)".into()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| Error::Runtime(format!("line 1: bad dataset header: {e}")))?;
    if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
        return Err(Error::Runtime(format!("unsupported dataset format {} v{}", header.format, header.version)));
    }
    let mut records = Vec::with_capacity(header.count);
    for (i, line) in lines {
        let r: Record = serde_json::from_str(line).map_err(|e| Error::Runtime(format!("line {}: {e}", i + 1)))?;
        if r.task != header.task {
            return Err(Error::Runtime(format!("line {}: task {} in a {} dataset", i + 1, r.task, header.task)));
        }
        records.push(r);
    }
    if records.len() != header.count {
        return Err(Error::Runtime(format!("header announces {} records, found {}", header.count, records.len())));
    }
    Ok((header, records))
}

impl Record {
    pub fn to_labeled(&self) -> Result<LabeledInstance> {
        let bad = |s: String| Error::Runtime(format!("record {}: {s}", self.seed));
        let premises = self.premises.iter().map(|p| p.to_tensor().map_err(bad)).collect::<Result<Vec<_>>>()?;
        let labels = self.labels.as_ref().ok_or_else(|| bad("no labels".into()))?.to_tensor().map_err(bad)?;
        if labels.channels() != 1 || labels.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(bad("labels must be one 0/1 channel".into()));
        }
        let values = labels.data().iter().map(|&v| v == 1.0).collect();
        let labels = Relation::from_values(labels.arity(), labels.num_objects(), values)
            .ok_or_else(|| bad("labels do not fit the object count".into()))?;
        Ok(LabeledInstance { task: self.task, seed: self.seed, premises, labels })
    }

    pub fn to_env(&self) -> Result<RlEnv> {
        let bad = |s: &str| Error::Runtime(format!("record {}: {s}", self.seed));
        match (self.task, self.state.as_ref().ok_or_else(|| bad("no initial state"))?) {
            (TaskKind::Sorting, InitialState::Sorting { array }) => Ok(RlEnv::Sorting(SortEnv::new(array.clone()))),
            (TaskKind::Path, InitialState::Path { nodes, edges, start, target }) => {
                let graph = Graph::from_edges(*nodes, edges, false);
                PathEnv::new(graph, *start, *target).map(RlEnv::Path).ok_or_else(|| bad("target unreachable"))
            }
            (TaskKind::BlocksWorld, InitialState::Blocks { current, target }) => {
                let (c, t) = (World { on: current.clone() }, World { on: target.clone() });
                if !c.is_valid() || !t.is_valid() || c.num_blocks() != t.num_blocks() {
                    return Err(bad("invalid blocks worlds"));
                }
                Ok(RlEnv::Blocks(BlocksEnv::new(c, t)))
            }
            _ => Err(bad("state does not match the task")),
        }
    }
}
