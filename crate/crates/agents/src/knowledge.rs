//! Tagged knowledge chunks and lexical tf-idf retrieval.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use layoutpilot_core::netlist::Netlist;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnowledgeSource {
    ToolManual,
    CommandList,
    ExampleArchive,
    DesignNote,
    /// Slices of a netlist too large to inline in a prompt.
    NetlistExcerpt,
}

impl KnowledgeSource {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "tool_manual" => KnowledgeSource::ToolManual,
            "command_list" => KnowledgeSource::CommandList,
            "example_archive" => KnowledgeSource::ExampleArchive,
            "design_note" => KnowledgeSource::DesignNote,
            "netlist_excerpt" => KnowledgeSource::NetlistExcerpt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeChunk {
    pub id: String,
    pub tags: Vec<String>,
    pub text: String,
    pub source: KnowledgeSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnowledgeError {
    #[error("chunk has no `---` line closing its header")]
    NoHeader,
    #[error("header line {line}: {message}")]
    Header { line: usize, message: String },
    #[error("chunk `{0}` has empty text")]
    EmptyText(String),
    #[error("duplicate chunk id `{0}`")]
    DuplicateId(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Parses one knowledge file:
///
/// ```text
/// id: symmetry-basics
/// source: design_note
/// tags: symmetry, cmrr
/// ---
/// Body text.
/// ```
pub fn parse_chunk(text: &str) -> Result<KnowledgeChunk, KnowledgeError> {
    let mut id = None;
    let mut source = None;
    let mut tags = Vec::new();
    let mut body_start = None;
    let mut offset = 0;
    for (i, line) in text.split_inclusive('\n').enumerate() {
        offset += line.len();
        let t = line.trim();
        if t == "---" {
            body_start = Some(offset);
            break;
        }
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let header = |message: String| KnowledgeError::Header { line: i + 1, message };
        let (key, value) = t.split_once(':').ok_or_else(|| header("expected `key: value`".into()))?;
        let value = value.trim();
        match key.trim() {
            "id" if !value.is_empty() => id = Some(value.to_string()),
            "source" => source = Some(KnowledgeSource::parse(value).ok_or_else(|| header(format!("unknown source `{value}`")))?),
            "tags" => {
                tags = value
                    .split(',')
                    .map(|s| s.trim().to_lowercase())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            other => return Err(header(format!("unexpected key `{other}`"))),
        }
    }
    let start = body_start.ok_or(KnowledgeError::NoHeader)?;
    let id = id.ok_or(KnowledgeError::Header {
        line: 1,
        message: "missing id".into(),
    })?;
    let source = source.ok_or(KnowledgeError::Header {
        line: 1,
        message: "missing source".into(),
    })?;
    let body = text[start..].trim().to_string();
    if body.is_empty() {
        return Err(KnowledgeError::EmptyText(id));
    }
    Ok(KnowledgeChunk {
        id,
        tags,
        text: body,
        source,
    })
}

const STOPWORDS: [&str; 24] = [
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "in", "is", "it", "of", "on", "or", "that", "the",
    "this", "to", "with", "which", "can", "its",
];

/// Lowercase alphanumeric runs, stopwords dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_ascii_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_ascii_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

#[derive(Debug, Clone, Default)]
struct Doc {
    counts: BTreeMap<String, usize>,
    len: usize,
}

/// A set of chunks ordered by id, with precomputed term statistics.
#[derive(Debug, Clone, Default)]
pub struct KnowledgeStore {
    chunks: Vec<KnowledgeChunk>,
    docs: Vec<Doc>,
    df: BTreeMap<String, usize>,
}

const BUILTIN: [&str; 12] = [
    include_str!("../knowledge/command_list.txt"),
    include_str!("../knowledge/manual_placement.txt"),
    include_str!("../knowledge/manual_routing.txt"),
    include_str!("../knowledge/note_symmetry.txt"),
    include_str!("../knowledge/note_matching.txt"),
    include_str!("../knowledge/note_parasitics.txt"),
    include_str!("../knowledge/note_crosstalk.txt"),
    include_str!("../knowledge/note_routing_priority.txt"),
    include_str!("../knowledge/note_passives.txt"),
    include_str!("../knowledge/note_bias.txt"),
    include_str!("../knowledge/archive_ota.txt"),
    include_str!("../knowledge/archive_comparator.txt"),
];

impl KnowledgeStore {
    pub fn new(mut chunks: Vec<KnowledgeChunk>) -> Result<Self, KnowledgeError> {
        chunks.sort_by(|a, b| a.id.cmp(&b.id));
        for w in chunks.windows(2) {
            if w[0].id == w[1].id {
                return Err(KnowledgeError::DuplicateId(w[0].id.clone()));
            }
        }
        if let Some(c) = chunks.iter().find(|c| c.text.trim().is_empty()) {
            return Err(KnowledgeError::EmptyText(c.id.clone()));
        }
        let docs: Vec<Doc> = chunks.iter().map(doc_of).collect();
        let mut df = BTreeMap::new();
        for d in &docs {
            for t in d.counts.keys() {
                *df.entry(t.clone()).or_insert(0) += 1;
            }
        }
        Ok(KnowledgeStore { chunks, docs, df })
    }

    /// The curated corpus compiled into the crate.
    pub fn builtin() -> Self {
        let chunks = BUILTIN
            .iter()
            .map(|t| parse_chunk(t).expect("builtin knowledge parses"))
            .collect();
        KnowledgeStore::new(chunks).expect("builtin knowledge is consistent")
    }

    /// Loads every `*.txt` file of a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, KnowledgeError> {
        let io = |e: std::io::Error, p: &Path| KnowledgeError::Io {
            path: p.display().to_string(),
            message: e.to_string(),
        };
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| io(e, dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        paths.sort();
        let mut chunks = Vec::new();
        for p in paths {
            let text = std::fs::read_to_string(&p).map_err(|e| io(e, &p))?;
            chunks.push(parse_chunk(&text)?);
        }
        KnowledgeStore::new(chunks)
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn chunks(&self) -> &[KnowledgeChunk] {
        &self.chunks
    }

    pub fn get(&self, id: &str) -> Option<&KnowledgeChunk> {
        self.chunks
            .binary_search_by(|c| c.id.as_str().cmp(id))
            .ok()
            .map(|i| &self.chunks[i])
    }

    /// Smoothed inverse document frequency.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.chunks.len() as f64;
        let df = self.df.get(term).copied().unwrap_or(0) as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    /// Sum over distinct query terms of normalized term frequency times idf.
    pub fn score(&self, index: usize, query_terms: &BTreeSet<String>) -> f64 {
        let d = &self.docs[index];
        if d.len == 0 {
            return 0.0;
        }
        query_terms
            .iter()
            .map(|t| d.counts.get(t).copied().unwrap_or(0) as f64 / d.len as f64 * self.idf(t))
            .sum()
    }

    /// The `k` best chunks for `query`, best first, ties by id.
    pub fn retrieve(&self, query: &str, k: usize) -> Vec<&KnowledgeChunk> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let mut scored: Vec<(f64, usize)> = (0..self.chunks.len()).map(|i| (self.score(i, &terms), i)).collect();
        scored.sort_by(|a, b| match b.0.total_cmp(&a.0) {
            Ordering::Equal => self.chunks[a.1].id.cmp(&self.chunks[b.1].id),
            o => o,
        });
        scored.into_iter().take(k).map(|(_, i)| &self.chunks[i]).collect()
    }
}

fn doc_of(c: &KnowledgeChunk) -> Doc {
    let mut counts = BTreeMap::new();
    let mut len = 0;
    for t in tokenize(&c.text).into_iter().chain(c.tags.iter().flat_map(|t| tokenize(t))) {
        *counts.entry(t).or_insert(0) += 1;
        len += 1;
    }
    Doc { counts, len }
}

/// Netlists up to this many cards are inlined into prompts.
pub const INLINE_NETLIST_LIMIT: usize = 200;
const EXCERPT_CARDS: usize = 50;

/// How a netlist reaches the agents.
#[derive(Debug, Clone)]
pub enum NetlistContext {
    Inline(String),
    /// Too large to inline: a summary line for the prompt plus searchable
    /// excerpts.
    Chunked { summary: String, store: KnowledgeStore },
}

impl NetlistContext {
    pub fn of(netlist: &Netlist) -> Self {
        let text = netlist.to_ckt();
        if netlist.card_count() <= INLINE_NETLIST_LIMIT {
            return NetlistContext::Inline(text);
        }
        let cards: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let chunks = cards
            .chunks(EXCERPT_CARDS)
            .enumerate()
            .map(|(i, part)| KnowledgeChunk {
                id: format!("netlist-{:04}", i + 1),
                tags: vec!["netlist".into(), netlist.name.clone()],
                text: part.join("\n"),
                source: KnowledgeSource::NetlistExcerpt,
            })
            .collect();
        let store = KnowledgeStore::new(chunks).expect("excerpt ids are unique");
        NetlistContext::Chunked {
            summary: format!(
                "netlist {} has {} cards; relevant excerpts are attached below",
                netlist.name,
                netlist.card_count()
            ),
            store,
        }
    }

    /// Prompt text for the netlist, with excerpts matching `query` when chunked.
    pub fn prompt_text(&self, query: &str, k: usize) -> String {
        match self {
            NetlistContext::Inline(t) => t.trim_end().to_string(),
            NetlistContext::Chunked { summary, store } => {
                let mut out = summary.clone();
                for c in store.retrieve(query, k) {
                    out.push_str("\n\n");
                    out.push_str(&c.text);
                }
                out
            }
        }
    }
}
