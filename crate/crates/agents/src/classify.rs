//! Concrete/abstract request classification.

use std::fmt;

use layoutpilot_core::script::{COMMAND_NAMES, WIRE_SPACING_ALIAS};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Concrete,
    Abstract,
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequestKind::Concrete => "Concrete",
            RequestKind::Abstract => "Abstract",
        })
    }
}

/// Words naming an edit.
const ACTION_WORDS: [&str; 22] = [
    "move", "moved", "swap", "exchange", "array", "arrays", "reroute", "route", "remove", "delete", "width", "widen",
    "narrow", "spacing", "space", "priority", "priorities", "topology", "guide", "waypoint", "symmetry", "symmetric",
];

/// Words naming a goal rather than an edit.
const INTENT_WORDS: [&str; 40] = [
    "improve", "improving", "enhance", "better", "boost", "reduce", "lower", "minimize", "maximize", "optimize",
    "performance", "cmrr", "psrr", "gain", "bandwidth", "noise", "offset", "mismatch", "matching", "parasitics",
    "parasitic", "crosstalk", "coupling", "stability", "phase", "margin", "linearity", "robust", "robustness", "poor",
    "bad", "terrible", "weak", "how", "suggest", "should", "quality", "speed", "power", "drift",
];

fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-'))
        .map(|t| t.trim_matches(|c: char| c == '.' || c == '-'))
        .filter(|t| !t.is_empty())
}

fn is_number(t: &str) -> bool {
    t.trim_start_matches('-').parse::<f64>().is_ok()
}

/// Letters followed by digits somewhere: device, net, wire or group names.
fn is_identifier(t: &str) -> bool {
    t.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && t.chars().any(|c| c.is_ascii_digit())
}

/// (concrete evidence, abstract evidence) for a request.
pub fn heuristic_scores(text: &str) -> (u32, u32) {
    let mut concrete = 0;
    let mut intent = 0;
    for w in words(text) {
        let lower = w.to_ascii_lowercase();
        if COMMAND_NAMES.iter().chain([&WIRE_SPACING_ALIAS]).any(|c| c.eq_ignore_ascii_case(w)) {
            concrete += 2;
        } else if ACTION_WORDS.contains(&lower.as_str()) || is_identifier(w) || is_number(w) {
            concrete += 1;
        }
        if INTENT_WORDS.contains(&lower.as_str()) {
            intent += 2;
        }
    }
    (concrete, intent)
}

/// The fallback classifier. Ties go to Concrete when any explicit edit
/// evidence is present.
pub fn heuristic_kind(text: &str) -> RequestKind {
    let (c, a) = heuristic_scores(text);
    if c > a || (c == a && c > 0) {
        RequestKind::Concrete
    } else {
        RequestKind::Abstract
    }
}

/// Reads the first `concrete` or `abstract` word of a model answer.
pub fn parse_kind_answer(text: &str) -> Option<RequestKind> {
    words(text).find_map(|w| match w.to_ascii_lowercase().as_str() {
        "concrete" => Some(RequestKind::Concrete),
        "abstract" => Some(RequestKind::Abstract),
        _ => None,
    })
}
