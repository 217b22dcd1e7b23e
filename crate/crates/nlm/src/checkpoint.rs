//! Binary checkpoints.
//!
//! ```text
//! magic      8 bytes  "NLMCKPT\0"
//! version    u32 LE
//! header     u32 LE length + JSON {task, seed, config, metadata}
//! params     u32 LE count, then per parameter:
//!              u32 LE name length, UTF-8 name, u32 LE rows, u32 LE cols,
//!              rows*cols f64 LE values
//! checksum   32 bytes SHA-256 of everything above
//! ```
//!
//! Field order is fixed and no wall-clock data is stored, so identical runs
//! write identical bytes.

use crate::{Error, Result};
use nlm_core::autodiff::Params;
use nlm_core::tasks::TaskKind;
use nlm_core::train::{CurriculumState, SupervisedState};
use nlm_core::{Model, NlmConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MAGIC: &[u8; 8] = b"NLMCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

/// Where training stood when the checkpoint was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrainingState {
    /// A freshly initialized model.
    Untrained,
    Supervised { state: SupervisedState },
    Curriculum { state: CurriculumState },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    pub training: TrainingState,
    /// Canonical JSON of the resolved trainer settings; resuming under
    /// different settings is refused.
    pub trainer: String,
    pub graduated: bool,
    /// Log records written up to this checkpoint; a resume truncates the
    /// log to this many.
    #[serde(default)]
    pub log_records: u64,
    /// The run ended (graduated or out of budget); resuming is a no-op.
    #[serde(default)]
    pub finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    task: TaskKind,
    seed: u64,
    config: NlmConfig,
    metadata: Metadata,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task: TaskKind,
    pub seed: u64,
    pub model: Model,
    pub metadata: Metadata,
}

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("fits u32").to_le_bytes());
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let header = Header {
            task: self.task,
            seed: self.seed,
            config: self.model.config.clone(),
            metadata: self.metadata.clone(),
        };
        let json = serde_json::to_vec(&header).expect("serializable");
        put_u32(&mut out, json.len());
        out.extend_from_slice(&json);
        put_u32(&mut out, self.model.params.len());
        for p in self.model.params.iter() {
            put_u32(&mut out, p.name.len());
            out.extend_from_slice(p.name.as_bytes());
            put_u32(&mut out, p.rows);
            put_u32(&mut out, p.cols);
            for v in &p.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = Sha256::digest(&out);
        out.extend_from_slice(&sum);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |s: &str| Error::Runtime(format!("bad checkpoint: {s}"));
        if bytes.len() < MAGIC.len() + 4 + 32 || &bytes[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let (body, sum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != sum {
            return Err(bad("checksum mismatch"));
        }
        let mut r = Reader { bytes: body, pos: 8 };
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(bad(&format!("unsupported format version {version}")));
        }
        let n = r.u32()? as usize;
        let header: Header = serde_json::from_slice(r.take(n)?).map_err(|e| bad(&e.to_string()))?;
        let mut params = Params::new();
        for _ in 0..r.u32()? {
            let n = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(n)?).map_err(|_| bad("parameter name is not UTF-8"))?.to_string();
            let (rows, cols) = (r.u32()? as usize, r.u32()? as usize);
            let raw = r.take(rows * cols * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            params.add(name, rows, cols, data);
        }
        if r.pos != body.len() {
            return Err(bad("trailing bytes"));
        }
        let mut model = Model::new(header.config, 0).map_err(|e| bad(&e.to_string()))?;
        let expected: Vec<_> = model.param_shapes();
        let got: Vec<_> = params.iter().map(|p| (p.name.clone(), p.rows, p.cols)).collect();
        if expected != got {
            return Err(bad("parameter shapes do not match the model config"));
        }
        model.params = params;
        Ok(Self { task: header.task, seed: header.seed, model, metadata: header.metadata })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        // Write-then-rename so an interrupted save never leaves a torn file.
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Runtime("bad checkpoint: truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }
}
