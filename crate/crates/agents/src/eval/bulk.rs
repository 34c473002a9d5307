//! Parallel, resumable bulk evaluation of a corpus against a backend.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use layoutpilot_core::layout::Layout;
use layoutpilot_core::validate::{evaluate_response, Expected, ResponseEnvelope, ValidationReport};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::corpus::{CorpusRecord, Label};
use crate::knowledge::NetlistContext;
use crate::steps::{generate_commands, generate_single_agent, Agents, TurnCalls};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envelope: Option<ResponseEnvelope>,
    pub report: ValidationReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub id: String,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BulkConfig {
    pub jobs: usize,
    pub single_agent: bool,
}

impl Default for BulkConfig {
    fn default() -> Self {
        BulkConfig {
            jobs: 1,
            single_agent: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BulkSummary {
    pub total: usize,
    pub resumed: usize,
    pub evaluated: usize,
    pub errors: usize,
}

#[derive(Debug, Error)]
pub enum BulkError {
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {message}")]
    Record { path: PathBuf, line: usize, message: String },
    #[error("thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> BulkError + '_ {
    move |source| BulkError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn expected_of(label: Label) -> Expected {
    match label {
        Label::Valid => Expected::Valid,
        Label::Invalid => Expected::Invalid,
    }
}

pub fn timing_path(results: &Path) -> PathBuf {
    results.with_extension("timing.jsonl")
}

/// Runs one request through generation and scores it.
pub fn evaluate_one(
    agents: &Agents,
    netlist_ctx: &NetlistContext,
    ctx: &Layout,
    turn: u32,
    rec: &CorpusRecord,
    single_agent: bool,
) -> ResultRecord {
    let mut calls = TurnCalls::new(turn, &rec.text);
    let generated = if single_agent {
        generate_single_agent(agents, &mut calls, netlist_ctx, &rec.text, ctx)
    } else {
        generate_commands(agents, &mut calls, netlist_ctx, &rec.text, ctx)
    };
    let expected = Some(expected_of(rec.label));
    match generated {
        Ok(g) => {
            let (envelope, report) = evaluate_response(&g.raw, expected, ctx);
            ResultRecord {
                id: rec.id.clone(),
                label: rec.label,
                raw: Some(g.raw),
                envelope,
                report,
                error: None,
            }
        }
        Err(e) => ResultRecord {
            id: rec.id.clone(),
            label: rec.label,
            raw: None,
            envelope: None,
            report: evaluate_response("", expected, ctx).1,
            error: Some(e.to_string()),
        },
    }
}

/// Records that parse; a torn trailing line from an interrupted run is
/// skipped.
fn read_partial(path: &Path) -> Result<BTreeMap<String, ResultRecord>, BulkError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut done = BTreeMap::new();
    for line in text.lines() {
        if let Ok(r) = serde_json::from_str::<ResultRecord>(line) {
            done.entry(r.id.clone()).or_insert(r);
        }
    }
    Ok(done)
}

/// Strict reader for a finished results file.
pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>, BulkError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| BulkError::Record {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

fn open_append(path: &Path) -> Result<File, BulkError> {
    let mut f = OpenOptions::new()
        .create(true)
        .read(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    let mut text = String::new();
    f.read_to_string(&mut text).map_err(io_err(path))?;
    if !text.is_empty() && !text.ends_with('\n') {
        f.write_all(b"\n").map_err(io_err(path))?;
    }
    Ok(f)
}

fn append_line<T: Serialize>(file: &Mutex<File>, path: &Path, value: &T) -> Result<(), BulkError> {
    let line = serde_json::to_string(value).expect("record serializes") + "\n";
    let mut f = file.lock().expect("results file lock");
    f.write_all(line.as_bytes()).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

/// Evaluates every record not already present in `out`, then rewrites
/// `out` sorted by id. Wall times go to a sidecar so reruns produce
/// identical result files.
pub fn run_bulk(
    corpus: &[CorpusRecord],
    agents: &Agents,
    ctx: &Layout,
    out: &Path,
    cfg: BulkConfig,
) -> Result<BulkSummary, BulkError> {
    let done = read_partial(out)?;
    let pending: Vec<(u32, &CorpusRecord)> = corpus
        .iter()
        .enumerate()
        .filter(|(_, r)| !done.contains_key(&r.id))
        .map(|(i, r)| (i as u32 + 1, r))
        .collect();
    let netlist_ctx = NetlistContext::of(ctx.netlist());
    let results = Mutex::new(open_append(out)?);
    let tpath = timing_path(out);
    let timings = Mutex::new(open_append(&tpath)?);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| BulkError::Pool(e.to_string()))?;
    let outcomes: Vec<Result<bool, BulkError>> = pool.install(|| {
        pending
            .par_iter()
            .map(|&(turn, rec)| {
                let t0 = Instant::now();
                let r = evaluate_one(agents, &netlist_ctx, ctx, turn, rec, cfg.single_agent);
                let failed = r.error.is_some();
                append_line(&results, out, &r)?;
                append_line(
                    &timings,
                    &tpath,
                    &TimingRecord {
                        id: rec.id.clone(),
                        wall_ms: t0.elapsed().as_millis() as u64,
                    },
                )?;
                Ok(failed)
            })
            .collect()
    });
    let mut errors = 0;
    for o in outcomes {
        if o? {
            errors += 1;
        }
    }
    drop(results);
    let all = read_partial(out)?;
    let tmp = out.with_extension("jsonl.tmp");
    let body: String = all
        .values()
        .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
        .collect();
    fs::write(&tmp, body).map_err(io_err(&tmp))?;
    fs::rename(&tmp, out).map_err(io_err(out))?;
    Ok(BulkSummary {
        total: all.len(),
        resumed: done.len(),
        evaluated: pending.len(),
        errors,
    })
}
