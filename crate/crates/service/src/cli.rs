//! Command-line interface: the server plus offline batch tools.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use layoutpilot_agents::eval::corpus::{from_jsonl, to_jsonl};
use layoutpilot_agents::eval::metrics::CLASSIFICATION_DECIMALS;
use layoutpilot_agents::eval::worksheet::{grading_sample, import_grades, WorksheetRow, SAMPLE_PERCENT};
use layoutpilot_agents::eval::{
    classification_report, compute_metrics, corpus_context, read_results, run_bulk, synthesize_corpus,
    synthesize_kind_corpus, BulkConfig, CorpusRecord, CorpusSpec, EchoOracle, Rate,
};
use layoutpilot_agents::{client_from_env, heuristic_kind, Agents, ModelClient, ScriptedClient};
use layoutpilot_core::layout::{load_layout, Layout};
use layoutpilot_core::netlist::parse_netlist;
use layoutpilot_core::routing::route_all;
use layoutpilot_core::script::{execute, parse_script};
use layoutpilot_core::validate::{validate_script, Grade};

use crate::app::{router, AppState};
use crate::store::Store;

#[derive(Debug, Parser)]
#[command(name = "layoutpilot", version, about = "Conversational analog layout editor")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    /// Recorded replies from FIXTURE_PATH or --fixture.
    Scripted,
    /// The HTTP endpoint in MODEL_ENDPOINT.
    Remote,
    /// Answers every request with its ground truth.
    EchoOracle,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the HTTP service.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// 0 picks a free port.
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, env = "DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
    },
    /// Validate and execute a command script against a layout.
    Exec {
        script: PathBuf,
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        placement: PathBuf,
        #[arg(long)]
        snapshot_out: Option<PathBuf>,
    },
    /// Route every net of a layout and print the report.
    RouteAll {
        #[arg(long)]
        netlist: PathBuf,
        #[arg(long)]
        placement: PathBuf,
        #[arg(long)]
        snapshot_out: Option<PathBuf>,
    },
    /// Write a synthetic request corpus as JSONL.
    Corpus {
        /// `valid,invalid,min..max[,seed]`
        #[arg(long, default_value = "1134,116,5..40")]
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the bulk evaluation and print the metrics table.
    Eval {
        /// A corpus JSONL file or an inline spec.
        #[arg(long, default_value = "1134,116,5..40")]
        spec: String,
        #[arg(long, value_enum, default_value = "scripted")]
        backend: Backend,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        single_agent: bool,
        #[arg(long, env = "FIXTURE_PATH")]
        fixture: Option<PathBuf>,
    },
    /// Recompute the metrics table from a results file.
    Metrics {
        results: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Draw a stratified grading sample.
    Worksheet {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value_t = SAMPLE_PERCENT)]
        percent: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Summarize a graded worksheet.
    Grades { worksheet: PathBuf },
    /// Measure the keyword classifier on a synthetic labeled set.
    ClassifyEval {
        #[arg(long, default_value_t = 1000)]
        concrete: usize,
        #[arg(long, default_value_t = 1000)]
        abstract_: usize,
        #[arg(long, default_value_t = 21)]
        seed: u64,
    },
}

fn read(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<(), String> {
    fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn load(netlist: &Path, placement: &Path) -> Result<Layout, String> {
    let n = parse_netlist(&read(netlist)?).map_err(|e| format!("{}: {e}", netlist.display()))?;
    load_layout(Arc::new(n), &read(placement)?).map_err(|e| format!("{}: {e}", placement.display()))
}

fn load_corpus(spec: &str) -> Result<Vec<CorpusRecord>, String> {
    let path = Path::new(spec);
    if path.is_file() {
        from_jsonl(&read(path)?).map_err(|e| format!("{spec}: {e}"))
    } else {
        let s = CorpusSpec::parse(spec).map_err(|e| e.to_string())?;
        Ok(synthesize_corpus(&s, &corpus_context()))
    }
}

fn backend_client(
    backend: Backend,
    fixture: Option<&Path>,
    corpus: &[CorpusRecord],
) -> Result<Arc<dyn ModelClient>, String> {
    match backend {
        Backend::EchoOracle => Ok(Arc::new(EchoOracle::new(corpus))),
        Backend::Scripted => {
            let path = fixture.ok_or("scripted backend needs --fixture or FIXTURE_PATH")?;
            Ok(Arc::new(ScriptedClient::load(path).map_err(|e| e.to_string())?))
        }
        Backend::Remote => client_from_env()
            .map_err(|e| e.to_string())?
            .ok_or_else(|| "remote backend needs MODEL_ENDPOINT".to_string()),
    }
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32, String> {
    match cli.command {
        Cmd::Serve { host, port, data_dir } => serve(&host, port, data_dir),
        Cmd::Exec {
            script,
            netlist,
            placement,
            snapshot_out,
        } => {
            let mut l = load(&netlist, &placement)?;
            let s = parse_script(&read(&script)?).map_err(|e| format!("{}: {e}", script.display()))?;
            let report = validate_script(&s, &l);
            if !report.is_clean() {
                println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                return Ok(2);
            }
            match execute(&mut l, &s) {
                Ok(log) => {
                    for e in &log {
                        println!("{}", serde_json::to_string(e).expect("log serializes"));
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    return Ok(1);
                }
            }
            println!("hash {}", l.snapshot_hash());
            if let Some(out) = snapshot_out {
                write(&out, &l.snapshot())?;
            }
            Ok(0)
        }
        Cmd::RouteAll {
            netlist,
            placement,
            snapshot_out,
        } => {
            let mut l = load(&netlist, &placement)?;
            let report = route_all(&mut l);
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            println!("hpwl {}", l.hpwl());
            if let Some(out) = snapshot_out {
                write(&out, &l.snapshot())?;
            }
            Ok(if report.failed.is_empty() { 0 } else { 1 })
        }
        Cmd::Corpus { spec, out } => {
            let s = CorpusSpec::parse(&spec).map_err(|e| e.to_string())?;
            let corpus = synthesize_corpus(&s, &corpus_context());
            write(&out, &to_jsonl(&corpus))?;
            println!("{} records", corpus.len());
            Ok(0)
        }
        Cmd::Eval {
            spec,
            backend,
            jobs,
            out,
            single_agent,
            fixture,
        } => {
            let corpus = load_corpus(&spec)?;
            write(&out.with_extension("corpus.jsonl"), &to_jsonl(&corpus))?;
            let client = backend_client(backend, fixture.as_deref(), &corpus)?;
            let agents = Agents::new(Some(client));
            let cfg = BulkConfig { jobs, single_agent };
            let summary = run_bulk(&corpus, &agents, &corpus_context(), &out, cfg).map_err(|e| e.to_string())?;
            eprintln!(
                "{} records: {} resumed, {} evaluated, {} errors",
                summary.total, summary.resumed, summary.evaluated, summary.errors
            );
            let results = read_results(&out).map_err(|e| e.to_string())?;
            let table = compute_metrics(&results).map_err(|e| e.to_string())?;
            print!("{table}");
            Ok(0)
        }
        Cmd::Metrics { results, json } => {
            let rs = read_results(&results).map_err(|e| e.to_string())?;
            let table = compute_metrics(&rs).map_err(|e| e.to_string())?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table.to_json()).expect("json"));
            } else {
                print!("{table}");
            }
            Ok(0)
        }
        Cmd::Worksheet {
            results,
            corpus,
            percent,
            seed,
            out,
        } => {
            let rs = read_results(&results).map_err(|e| e.to_string())?;
            let cs: Vec<CorpusRecord> = from_jsonl(&read(&corpus)?).map_err(|e| e.to_string())?;
            let rows = grading_sample(&rs, &cs, percent, seed);
            write(&out, &to_jsonl(&rows))?;
            println!("{} rows", rows.len());
            Ok(0)
        }
        Cmd::Grades { worksheet } => {
            let rows: Vec<WorksheetRow> = from_jsonl(&read(&worksheet)?).map_err(|e| e.to_string())?;
            let d = import_grades(&rows).map_err(|e| e.to_string())?;
            for g in Grade::ALL {
                let rate = Rate {
                    pass: d.counts.get(&g).copied().unwrap_or(0),
                    total: d.total,
                };
                println!("{g}: {}%", rate.percent(CLASSIFICATION_DECIMALS));
            }
            Ok(0)
        }
        Cmd::ClassifyEval {
            concrete,
            abstract_,
            seed,
        } => {
            let records = synthesize_kind_corpus(concrete, abstract_, seed, &corpus_context());
            let r = classification_report(&records, heuristic_kind).map_err(|e| e.to_string())?;
            println!("Concrete {}%", r.concrete.percent(CLASSIFICATION_DECIMALS));
            println!("Abstract {}%", r.abstract_.percent(CLASSIFICATION_DECIMALS));
            Ok(0)
        }
    }
}

fn serve(host: &str, port: u16, data_dir: PathBuf) -> Result<i32, String> {
    let client = client_from_env().map_err(|e| e.to_string())?;
    let store = Store::open(&data_dir).map_err(|e| e.to_string())?;
    let state = AppState::new(store, Agents::new(client));
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| format!("bind {host}:{port}: {e}"))?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        println!("listening on {addr}");
        axum::serve(listener, router(state)).await.map_err(|e| e.to_string())?;
        Ok(0)
    })
}
