//! Stratified samples for manual functionality grading.

use std::collections::BTreeMap;

use layoutpilot_core::validate::{grade_functionality, GradeDistribution, UnknownLabel};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bulk::ResultRecord;
use super::corpus::{CorpusRecord, Label};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorksheetRow {
    pub id: String,
    pub label: Label,
    pub request: String,
    pub response: String,
    /// Filled in by the grader: A, B or C.
    #[serde(default)]
    pub grade: String,
}

/// Default share of results sent for manual grading, in percent.
pub const SAMPLE_PERCENT: u64 = 2;

/// Splits `n` across strata of the given sizes by largest remainder; ties
/// go to the earlier stratum.
pub fn largest_remainder(n: u64, sizes: &[u64]) -> Vec<u64> {
    let total: u64 = sizes.iter().sum();
    if total == 0 {
        return vec![0; sizes.len()];
    }
    let mut quota: Vec<u64> = sizes.iter().map(|s| n * s / total).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by_key(|&i| std::cmp::Reverse(n * sizes[i] % total));
    let short = n - quota.iter().sum::<u64>();
    for &i in order.iter().take(short as usize) {
        quota[i] += 1;
    }
    quota
}

/// Picks `percent`% of results (rounded half-up), stratified by label.
pub fn grading_sample(results: &[ResultRecord], corpus: &[CorpusRecord], percent: u64, seed: u64) -> Vec<WorksheetRow> {
    let texts: BTreeMap<&str, &str> = corpus.iter().map(|r| (r.id.as_str(), r.text.as_str())).collect();
    let mut strata: BTreeMap<Label, Vec<&ResultRecord>> = BTreeMap::new();
    for r in results {
        strata.entry(r.label).or_default().push(r);
    }
    let n = (results.len() as u64 * percent * 2 + 100) / 200;
    let sizes: Vec<u64> = strata.values().map(|v| v.len() as u64).collect();
    let quotas = largest_remainder(n, &sizes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<WorksheetRow> = strata
        .values()
        .zip(quotas)
        .flat_map(|(members, q)| {
            members
                .choose_multiple(&mut rng, q as usize)
                .map(|r| WorksheetRow {
                    id: r.id.clone(),
                    label: r.label,
                    request: texts.get(r.id.as_str()).copied().unwrap_or_default().to_string(),
                    response: r.raw.clone().unwrap_or_default(),
                    grade: String::new(),
                })
                .collect::<Vec<_>>()
        })
        .collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    rows
}

/// Reads graded rows back into a distribution.
pub fn import_grades(rows: &[WorksheetRow]) -> Result<GradeDistribution, UnknownLabel> {
    let graded = rows
        .iter()
        .map(|r| grade_functionality(&r.id, &r.grade))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(GradeDistribution::from_records(&graded))
}
