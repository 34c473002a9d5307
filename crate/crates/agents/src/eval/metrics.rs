//! Pass-rate tables over bulk results.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::bulk::ResultRecord;
use super::corpus::KindRecord;
use crate::classify::RequestKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("no results to score")]
pub struct EmptyResults;

/// `pass` out of `total`, printed as a percentage rounded half-up to
/// `decimals` places using integer arithmetic only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub pass: u64,
    pub total: u64,
}

impl Rate {
    /// The percentage scaled by `10^decimals`, rounded half-up.
    pub fn scaled(self, decimals: u32) -> u64 {
        let scale = 100 * 10u64.pow(decimals);
        (2 * self.pass * scale + self.total) / (2 * self.total)
    }

    pub fn percent(self, decimals: u32) -> String {
        let v = self.scaled(decimals);
        if decimals == 0 {
            return v.to_string();
        }
        let d = 10u64.pow(decimals);
        format!("{}.{:0width$}", v / d, v % d, width = decimals as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub total: u64,
    pub formatting: Rate,
    pub validity: Rate,
    pub syntax: Rate,
    pub logic: Rate,
    pub overall: Rate,
}

pub const METRIC_DECIMALS: u32 = 2;

pub fn compute_metrics(results: &[ResultRecord]) -> Result<MetricsTable, EmptyResults> {
    if results.is_empty() {
        return Err(EmptyResults);
    }
    let total = results.len() as u64;
    let count = |f: &dyn Fn(&ResultRecord) -> bool| Rate {
        pass: results.iter().filter(|r| f(r)).count() as u64,
        total,
    };
    Ok(MetricsTable {
        total,
        formatting: count(&|r| r.report.formatting.pass),
        validity: count(&|r| r.report.validity.is_some_and(|v| v.is_correct())),
        syntax: count(&|r| r.report.formatting.pass && r.report.syntax.is_empty()),
        logic: count(&|r| r.report.formatting.pass && r.report.logic.is_empty()),
        overall: count(&|r| r.report.overall),
    })
}

impl MetricsTable {
    pub fn rows(&self) -> [(&'static str, Rate); 5] {
        [
            ("Formatting", self.formatting),
            ("Validity", self.validity),
            ("Syntax", self.syntax),
            ("Logic", self.logic),
            ("Overall", self.overall),
        ]
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        m.insert("total".into(), self.total.into());
        for (name, rate) in self.rows() {
            m.insert(
                name.to_lowercase(),
                serde_json::json!({"pass": rate.pass, "total": rate.total, "percent": rate.percent(METRIC_DECIMALS)}),
            );
        }
        serde_json::Value::Object(m)
    }
}

impl fmt::Display for MetricsTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>9} {:>9}", "Category", "Pass", "Rate")?;
        for (name, rate) in self.rows() {
            writeln!(
                f,
                "{name:<12} {:>9} {:>8}%",
                format!("{}/{}", rate.pass, rate.total),
                rate.percent(METRIC_DECIMALS)
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub concrete: Rate,
    pub abstract_: Rate,
}

pub const CLASSIFICATION_DECIMALS: u32 = 1;

/// Accuracy per true kind for a classifier over labeled requests.
pub fn classification_report(
    records: &[KindRecord],
    mut classify: impl FnMut(&str) -> RequestKind,
) -> Result<ClassificationReport, EmptyResults> {
    let mut c = Rate { pass: 0, total: 0 };
    let mut a = Rate { pass: 0, total: 0 };
    for r in records {
        let slot = match r.kind {
            RequestKind::Concrete => &mut c,
            RequestKind::Abstract => &mut a,
        };
        slot.total += 1;
        if classify(&r.text) == r.kind {
            slot.pass += 1;
        }
    }
    if c.total == 0 || a.total == 0 {
        return Err(EmptyResults);
    }
    Ok(ClassificationReport {
        concrete: c,
        abstract_: a,
    })
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, r) in [("Concrete", self.concrete), ("Abstract", self.abstract_)] {
            writeln!(f, "{name:<9} {}/{} {}%", r.pass, r.total, r.percent(CLASSIFICATION_DECIMALS))?;
        }
        Ok(())
    }
}
