//! Manual functionality grades (A/B/C) and their distribution.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Grade {
    A,
    B,
    C,
}

impl Grade {
    pub const ALL: [Grade; 3] = [Grade::A, Grade::B, Grade::C];
}

impl fmt::Display for Grade {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown grade label `{0}`")]
pub struct UnknownLabel(pub String);

impl FromStr for Grade {
    type Err = UnknownLabel;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Grade::A),
            "B" | "b" => Ok(Grade::B),
            "C" | "c" => Ok(Grade::C),
            other => Err(UnknownLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradedRecord {
    pub request_id: String,
    pub grade: Grade,
}

pub fn grade_functionality(request_id: &str, label: &str) -> Result<GradedRecord, UnknownLabel> {
    Ok(GradedRecord {
        request_id: request_id.to_string(),
        grade: label.parse()?,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GradeDistribution {
    pub counts: BTreeMap<Grade, u64>,
    pub total: u64,
}

impl GradeDistribution {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a GradedRecord>) -> Self {
        let mut d = GradeDistribution::default();
        for r in records {
            *d.counts.entry(r.grade).or_insert(0) += 1;
            d.total += 1;
        }
        d
    }

    /// Exact share of `grade`; `None` for an empty set.
    pub fn fraction(&self, grade: Grade) -> Option<Ratio<u64>> {
        (self.total > 0).then(|| Ratio::new(self.counts.get(&grade).copied().unwrap_or(0), self.total))
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}
