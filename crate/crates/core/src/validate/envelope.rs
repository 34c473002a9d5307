//! Response envelopes: free prose followed by one structured JSON payload.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    InvalidRequest,
    NeedsInfo,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payload {
    pub status: Status,
    #[serde(default)]
    pub commands: Vec<String>,
    #[serde(default)]
    pub notes: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseEnvelope {
    pub prose: String,
    pub payload: Payload,
}

impl ResponseEnvelope {
    pub fn script_text(&self) -> String {
        self.payload.commands.iter().map(|c| format!("{c}\n")).collect()
    }

    /// Renders prose plus a fenced payload block.
    pub fn render(&self) -> String {
        // Backticks only occur inside JSON strings; escaping them keeps a
        // fence in the notes from closing the block early.
        let json = serde_json::to_string_pretty(&self.payload)
            .expect("payload serializes")
            .replace('`', "\\u0060");
        if self.prose.is_empty() {
            format!("```json\n{json}\n```\n")
        } else {
            format!("{}\n\n```json\n{json}\n```\n", self.prose.trim_end())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[error("format error: {0}")]
pub struct FormatError(pub String);

const FENCE_OPEN: &str = "```json";
const FENCE: &str = "```";

struct Block<'a> {
    start: usize,
    end: usize,
    body: &'a str,
}

fn fenced_blocks(text: &str) -> Result<Vec<Block<'_>>, FormatError> {
    let mut blocks = Vec::new();
    let mut from = 0;
    while let Some(rel) = text[from..].find(FENCE_OPEN) {
        let start = from + rel;
        let body_start = start + FENCE_OPEN.len();
        let Some(close_rel) = text[body_start..].find(FENCE) else {
            return Err(FormatError("unterminated payload block".into()));
        };
        let end = body_start + close_rel + FENCE.len();
        blocks.push(Block {
            start,
            end,
            body: &text[body_start..body_start + close_rel],
        });
        from = end;
    }
    Ok(blocks)
}

/// A bare JSON object that ends the text, if there is one.
fn trailing_object(text: &str) -> Option<(usize, &str)> {
    let trimmed = text.trim_end();
    if !trimmed.ends_with('}') {
        return None;
    }
    trimmed
        .char_indices()
        .filter(|&(_, c)| c == '{')
        .map(|(i, _)| (i, &trimmed[i..]))
        .find(|(_, cand)| serde_json::from_str::<serde_json::Value>(cand).is_ok_and(|v| v.is_object()))
}

/// Extracts the trailing payload of an agent reply.
pub fn check_envelope(text: &str) -> Result<ResponseEnvelope, FormatError> {
    let blocks = fenced_blocks(text)?;
    let (prose_end, body) = match blocks.as_slice() {
        [] => match trailing_object(text) {
            Some((start, body)) => (start, body),
            None => return Err(FormatError("no payload".into())),
        },
        [b] => {
            if !text[b.end..].trim().is_empty() {
                return Err(FormatError("payload is not the trailing block".into()));
            }
            (b.start, b.body)
        }
        _ => return Err(FormatError("ambiguous payload".into())),
    };
    let payload: Payload =
        serde_json::from_str(body.trim()).map_err(|e| FormatError(format!("malformed payload: {e}")))?;
    Ok(ResponseEnvelope {
        prose: text[..prose_end].trim().to_string(),
        payload,
    })
}
