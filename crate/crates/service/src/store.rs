//! On-disk session state: the inputs plus an append-only event log that is
//! replayed on load.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use layoutpilot_agents::pipeline::{restore_turn, AppliedScript, ScriptOrigin, Session, Stage, TurnOutcome};
use layoutpilot_core::layout::load_layout;
use layoutpilot_core::netlist::parse_netlist;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const NETLIST_FILE: &str = "netlist.ckt";
const PLACEMENT_FILE: &str = "placement.txt";
const EVENTS_FILE: &str = "events.jsonl";
const SNAPSHOT_DIR: &str = "snapshots";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Turn { outcome: Box<TurnOutcome> },
    Commands { label: String, hash: String, script: String },
    /// A refine loop hit its limit and the session went back to idle.
    StageReset,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("session inputs do not load: {0}")]
    Inputs(String),
    #[error("{path}:{line}: corrupt event: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("replay failed: {0}")]
    Replay(String),
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a temporary file so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(io_at(&tmp))?;
    f.write_all(bytes).map_err(io_at(&tmp))?;
    f.sync_all().map_err(io_at(&tmp))?;
    fs::rename(&tmp, path).map_err(io_at(path))
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        let root = data_dir.join("sessions");
        fs::create_dir_all(&root).map_err(io_at(&root))?;
        Ok(Store { root })
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn exists(&self, id: &str) -> bool {
        self.dir(id).join(EVENTS_FILE).is_file()
    }

    pub fn create(&self, id: &str, netlist: &str, placement: &str) -> Result<(), StoreError> {
        let dir = self.dir(id);
        fs::create_dir_all(dir.join(SNAPSHOT_DIR)).map_err(io_at(&dir))?;
        write_atomic(&dir.join(NETLIST_FILE), netlist.as_bytes())?;
        write_atomic(&dir.join(PLACEMENT_FILE), placement.as_bytes())?;
        // The event log appears last: its presence marks a complete session.
        write_atomic(&dir.join(EVENTS_FILE), b"")
    }

    pub fn append(&self, id: &str, event: &Event) -> Result<(), StoreError> {
        let path = self.dir(id).join(EVENTS_FILE);
        let mut f = OpenOptions::new().append(true).open(&path).map_err(io_at(&path))?;
        let line = serde_json::to_string(event).expect("event serializes") + "\n";
        f.write_all(line.as_bytes()).map_err(io_at(&path))?;
        f.sync_data().map_err(io_at(&path))
    }

    pub fn write_snapshot(&self, id: &str, label: &str, doc: &str) -> Result<(), StoreError> {
        write_atomic(&self.dir(id).join(SNAPSHOT_DIR).join(format!("{label}.json")), doc.as_bytes())
    }

    /// Rebuilds a session from its inputs and event log. A torn final line
    /// from a crash mid-append is ignored; damage anywhere else is an error.
    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let dir = self.dir(id);
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read_to_string(&p).map_err(io_at(&p))
        };
        let netlist = parse_netlist(&read(NETLIST_FILE)?).map_err(|e| StoreError::Inputs(e.to_string()))?;
        let layout = load_layout(Arc::new(netlist), &read(PLACEMENT_FILE)?).map_err(|e| StoreError::Inputs(e.to_string()))?;
        let mut session = Session::new(layout);
        let events_path = dir.join(EVENTS_FILE);
        let text = read(EVENTS_FILE)?;
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: Event = match serde_json::from_str(line) {
                Ok(e) => e,
                Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                    // Drop the torn tail so later appends start on a clean line.
                    let keep = text.rfind('\n').map_or(0, |n| n + 1);
                    write_atomic(&events_path, &text.as_bytes()[..keep])?;
                    break;
                }
                Err(e) => {
                    return Err(StoreError::Corrupt {
                        path: events_path,
                        line: i + 1,
                        message: e.to_string(),
                    })
                }
            };
            apply(&mut session, &event)?;
        }
        Ok(session)
    }

    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_at(&self.root))? {
            let entry = entry.map_err(io_at(&self.root))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if self.exists(&name) {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }
}

pub fn apply(session: &mut Session, event: &Event) -> Result<(), StoreError> {
    match event {
        Event::Turn { outcome } => restore_turn(session, outcome).map_err(|e| StoreError::Replay(e.to_string())),
        Event::Commands { label, hash, script } => {
            let applied = AppliedScript {
                label: label.clone(),
                origin: ScriptOrigin::Commands,
                text: script.clone(),
            };
            session
                .replay_script(&applied, hash)
                .map_err(|e| StoreError::Replay(e.to_string()))
        }
        Event::StageReset => {
            session.stage = Stage::Idle;
            Ok(())
        }
    }
}
