//! Agent identities and `---To XXX---` message routing.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentId {
    Designer,
    Classifier,
    Analyzer,
    Refiner,
    Adapter,
    Generator,
}

impl AgentId {
    pub const ALL: [AgentId; 6] = [
        AgentId::Designer,
        AgentId::Classifier,
        AgentId::Analyzer,
        AgentId::Refiner,
        AgentId::Adapter,
        AgentId::Generator,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AgentId::Designer => "Designer",
            AgentId::Classifier => "Classifier",
            AgentId::Analyzer => "Analyzer",
            AgentId::Refiner => "Refiner",
            AgentId::Adapter => "Adapter",
            AgentId::Generator => "Generator",
        }
    }

    /// Resolves a recipient name written by a model. Case, spacing and a
    /// trailing "agent" are ignored; long role names map to the short id.
    pub fn normalize(name: &str) -> Option<AgentId> {
        let mut key: String = name
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        if key.len() > "agent".len() && key.ends_with("agent") {
            key.truncate(key.len() - "agent".len());
        }
        Some(match key.as_str() {
            "designer" | "user" => AgentId::Designer,
            "classifier" => AgentId::Classifier,
            "analyzer" | "analyser" => AgentId::Analyzer,
            "refiner" | "solutionrefiner" => AgentId::Refiner,
            "adapter" | "solutionadapter" => AgentId::Adapter,
            "generator" | "commandgenerator" | "concreterequestprocessor" | "processor" => AgentId::Generator,
            _ => return None,
        })
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown agent `{0}`")]
pub struct UnknownAgent(pub String);

impl FromStr for AgentId {
    type Err = UnknownAgent;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AgentId::normalize(s).ok_or_else(|| UnknownAgent(s.to_string()))
    }
}

impl Serialize for AgentId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for AgentId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMessage {
    pub sender: AgentId,
    pub recipient: AgentId,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoutingError {
    #[error("output has no `---To XXX---` delimiter")]
    NoDelimiter,
    #[error("unknown recipient `{name}` on line {line}")]
    UnknownRecipient { name: String, line: usize },
    #[error("unterminated delimiter on line {line}")]
    Malformed { line: usize },
    #[error("text before the first delimiter has no recipient")]
    StrayText,
}

const OPEN: &str = "---To";
const CLOSE: &str = "---";

/// Splits a model reply into one message per `---To XXX---` segment.
pub fn route_message(sender: AgentId, raw: &str) -> Result<Vec<AgentMessage>, RoutingError> {
    let mut out: Vec<AgentMessage> = Vec::new();
    let mut body: Vec<&str> = Vec::new();
    let mut stray = false;
    for (i, line) in raw.lines().enumerate() {
        let t = line.trim_start();
        let Some(rest) = t.strip_prefix(OPEN) else {
            if out.is_empty() {
                stray |= !line.trim().is_empty();
            } else {
                body.push(line);
            }
            continue;
        };
        let Some(end) = rest.find(CLOSE) else {
            return Err(RoutingError::Malformed { line: i + 1 });
        };
        let name = rest[..end].trim();
        let recipient = AgentId::normalize(name).ok_or_else(|| RoutingError::UnknownRecipient {
            name: name.to_string(),
            line: i + 1,
        })?;
        if let Some(last) = out.last_mut() {
            last.body = join_body(&body);
        }
        body.clear();
        let tail = &rest[end + CLOSE.len()..];
        if !tail.trim().is_empty() {
            body.push(tail.trim_start());
        }
        out.push(AgentMessage {
            sender,
            recipient,
            body: String::new(),
        });
    }
    if out.is_empty() {
        return Err(RoutingError::NoDelimiter);
    }
    if stray {
        return Err(RoutingError::StrayText);
    }
    if let Some(last) = out.last_mut() {
        last.body = join_body(&body);
    }
    Ok(out)
}

fn join_body(lines: &[&str]) -> String {
    lines.join("\n").trim().to_string()
}

/// Inverse of [`route_message`] for well-formed bodies.
pub fn render_messages(messages: &[AgentMessage]) -> String {
    let mut s = String::new();
    for m in messages {
        s.push_str(&format!("---To {}---\n{}\n", m.recipient, m.body));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_segment() {
        let m = route_message(AgentId::Refiner, "---To Designer---\nhello").unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].recipient, AgentId::Designer);
        assert_eq!(m[0].body, "hello");
    }

    #[test]
    fn two_segments_in_order() {
        let raw = "---To Designer---\nfirst\n\n---To Solution Adapter Agent---\nsecond\nmore\n";
        let m = route_message(AgentId::Refiner, raw).unwrap();
        assert_eq!(
            m.iter().map(|x| (x.recipient, x.body.as_str())).collect::<Vec<_>>(),
            vec![(AgentId::Designer, "first"), (AgentId::Adapter, "second\nmore")]
        );
    }

    #[test]
    fn errors() {
        assert_eq!(
            route_message(AgentId::Refiner, "---To Wizard---\nhi"),
            Err(RoutingError::UnknownRecipient {
                name: "Wizard".into(),
                line: 1
            })
        );
        assert_eq!(route_message(AgentId::Refiner, "plain text"), Err(RoutingError::NoDelimiter));
        assert_eq!(route_message(AgentId::Refiner, "hi\n---To Designer---\nx"), Err(RoutingError::StrayText));
        assert_eq!(route_message(AgentId::Refiner, "---To Designer\nx"), Err(RoutingError::Malformed { line: 1 }));
    }

    #[test]
    fn names_normalize() {
        assert_eq!(AgentId::normalize("concrete request processor"), Some(AgentId::Generator));
        assert_eq!(AgentId::normalize("ANALYZER AGENT"), Some(AgentId::Analyzer));
        assert_eq!(AgentId::normalize("agent"), None);
        for a in AgentId::ALL {
            assert_eq!(a.as_str().parse::<AgentId>(), Ok(a));
        }
    }
}
