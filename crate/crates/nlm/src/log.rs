//! Line-delimited training log. In deterministic mode `wall_time` is null,
//! so repeated runs write identical bytes.

use crate::{Error, Result};
use nlm_core::tasks::TaskKind;
use nlm_core::train::{RlRecord, SupervisedRecord};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Start { task: TaskKind, seed: u64, trainer: String },
    Step(SupervisedRecord),
    Epoch(RlRecord),
    LessonPassed { lesson: usize, m: usize },
    Graduated,
    End { graduated: bool, steps: u64, final_loss: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    #[serde(flatten)]
    pub event: Event,
    /// Seconds since this process started training.
    pub wall_time: Option<f64>,
}

pub struct Log {
    out: Option<(PathBuf, std::io::BufWriter<std::fs::File>)>,
    started: Option<Instant>,
    records: u64,
}

impl Log {
    /// Opens `path` keeping only its first `keep` records; anything beyond
    /// them (written after the last checkpoint) is dropped. `None` discards
    /// records.
    pub fn open(path: Option<&Path>, keep: u64, deterministic: bool) -> Result<Self> {
        let mut out = None;
        if let Some(p) = path {
            let mut kept = Vec::new();
            if keep > 0 {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                let lines: Vec<&str> = text.lines().collect();
                if (lines.len() as u64) < keep {
                    return Err(Error::Runtime(format!(
                        "{}: log has {} records, the checkpoint expects {keep}",
                        p.display(),
                        lines.len()
                    )));
                }
                for l in &lines[..keep as usize] {
                    kept.extend_from_slice(l.as_bytes());
                    kept.push(b'\n');
                }
            }
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            let mut f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
            f.write_all(&kept).map_err(|e| Error::io(p, e))?;
            out = Some((p.to_path_buf(), std::io::BufWriter::new(f)));
        }
        Ok(Self { out, started: (!deterministic).then(Instant::now), records: keep })
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    pub fn write(&mut self, event: Event) -> Result<()> {
        let line = Line { event, wall_time: self.started.map(|t| t.elapsed().as_secs_f64()) };
        if let Some((p, w)) = &mut self.out {
            serde_json::to_writer(&mut *w, &line).map_err(|e| Error::Runtime(format!("{}: {e}", p.display())))?;
            w.write_all(b"\n").map_err(|e| Error::io(p, e))?;
        }
        self.records += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some((p, w)) = &mut self.out {
            w.flush().map_err(|e| Error::io(p, e))?;
        }
        Ok(())
    }
}

pub fn parse(text: &str) -> Result<Vec<Line>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Runtime(format!("log line {}: {e}", i + 1))))
        .collect()
}
