//! Corpus synthesis, bulk runs and scoring.

pub mod bulk;
pub mod corpus;
pub mod metrics;
pub mod mutants;
pub mod oracle;
pub mod worksheet;

pub use bulk::{read_results, run_bulk, BulkConfig, BulkError, BulkSummary, ResultRecord};
pub use corpus::{
    corpus_context, synthesize_corpus, synthesize_kind_corpus, CorpusRecord, CorpusSpec, Defect, KindRecord, Label,
};
pub use metrics::{classification_report, compute_metrics, ClassificationReport, EmptyResults, MetricsTable, Rate};
pub use oracle::EchoOracle;
