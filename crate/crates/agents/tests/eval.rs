use std::collections::BTreeSet;
use std::fs;
use std::sync::Arc;

use layoutpilot_agents::eval::corpus::{from_jsonl, to_jsonl};
use layoutpilot_agents::eval::mutants::mutant_suite;
use layoutpilot_agents::eval::worksheet::{grading_sample, import_grades};
use layoutpilot_agents::eval::{
    corpus_context, compute_metrics, read_results, run_bulk, synthesize_corpus, BulkConfig, CorpusRecord, CorpusSpec,
    Defect, EchoOracle, Label,
};
use layoutpilot_agents::model::{ModelClient, ModelError, ModelRequest};
use layoutpilot_agents::Agents;
use layoutpilot_core::layout::Layout;
use layoutpilot_core::validate::{validate_text, RuleId};
use proptest::prelude::*;
use std::sync::OnceLock;

fn ctx() -> &'static Layout {
    static CTX: OnceLock<Layout> = OnceLock::new();
    CTX.get_or_init(corpus_context)
}

fn small_corpus() -> Vec<CorpusRecord> {
    synthesize_corpus(&CorpusSpec::new(90, 30, 1, 40, 11).unwrap(), ctx())
}

fn defect_rule(d: Defect) -> RuleId {
    match d {
        Defect::MissingParameter => RuleId::S2,
        Defect::UnknownDevice => RuleId::S3,
        Defect::RuleOrder => RuleId::L2,
    }
}

#[test]
fn corpus_labels_agree_with_the_validator() {
    let c = small_corpus();
    assert_eq!(c.iter().filter(|r| r.label == Label::Valid).count(), 90);
    assert_eq!(c.iter().filter(|r| r.label == Label::Invalid).count(), 30);
    let ids: BTreeSet<&str> = c.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids.len(), c.len());
    for r in &c {
        let n = r.ground_truth_script.lines().count();
        assert!((1..=40).contains(&n), "{} has {n} commands", r.id);
        let report = validate_text(&r.ground_truth_script, ctx());
        match r.label {
            Label::Valid => assert!(report.is_clean(), "{}: {:?}", r.id, report.rules()),
            Label::Invalid => {
                let d = r.defect.expect("invalid records carry a defect");
                assert!(report.rules().contains(&defect_rule(d)), "{} {d:?}: {:?}", r.id, report.rules());
            }
        }
    }
    let kinds: BTreeSet<Defect> = c.iter().filter_map(|r| r.defect).collect();
    assert_eq!(kinds.len(), 3);
}

#[test]
fn corpus_is_reproducible_and_round_trips() {
    let a = small_corpus();
    assert_eq!(a, small_corpus());
    assert_eq!(from_jsonl::<CorpusRecord>(&to_jsonl(&a)).unwrap(), a);
    let other = synthesize_corpus(&CorpusSpec::new(90, 30, 1, 40, 12).unwrap(), ctx());
    assert_ne!(a, other);
}

fn echo_agents(c: &[CorpusRecord]) -> Agents {
    Agents::new(Some(Arc::new(EchoOracle::new(c))))
}

#[test]
fn echo_oracle_scores_perfectly_and_reruns_identically() {
    let c = small_corpus();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("results.jsonl");
    let cfg = BulkConfig {
        jobs: 4,
        single_agent: false,
    };
    let summary = run_bulk(&c, &echo_agents(&c), ctx(), &out, cfg).unwrap();
    assert_eq!((summary.total, summary.evaluated, summary.errors), (120, 120, 0));
    let results = read_results(&out).unwrap();
    let ids: Vec<&str> = results.iter().map(|r| r.id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);
    let m = compute_metrics(&results).unwrap();
    assert_eq!(m.overall.percent(2), "100.00");
    assert_eq!(m.validity.percent(2), "100.00");

    let first = fs::read(&out).unwrap();
    let again = dir.path().join("again.jsonl");
    run_bulk(&c, &echo_agents(&c), ctx(), &again, BulkConfig { jobs: 1, ..cfg }).unwrap();
    assert_eq!(fs::read(&again).unwrap(), first);
}

#[test]
fn interrupted_runs_resume() {
    let c = small_corpus();
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.jsonl");
    run_bulk(&c, &echo_agents(&c), ctx(), &full, BulkConfig::default()).unwrap();
    let text = fs::read_to_string(&full).unwrap();
    let kept: Vec<&str> = text.lines().take(40).collect();
    let partial = dir.path().join("partial.jsonl");
    let torn = &text.lines().nth(40).unwrap()[..25];
    fs::write(&partial, format!("{}\n{torn}", kept.join("\n"))).unwrap();
    let s = run_bulk(&c, &echo_agents(&c), ctx(), &partial, BulkConfig::default()).unwrap();
    assert_eq!((s.resumed, s.evaluated), (40, 80));
    assert_eq!(fs::read_to_string(&partial).unwrap(), text);
}

/// Counts straight from the JSON, without the results types.
fn recount(path: &std::path::Path) -> [u64; 5] {
    let mut n = [0u64; 5];
    for line in fs::read_to_string(path).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let r = &v["report"];
        let fmt = r["formatting"]["pass"] == true;
        let empty = |k: &str| r[k].as_array().is_some_and(|a| a.is_empty());
        let valid = matches!(r["validity"].as_str(), Some("correctly_rejected" | "correctly_accepted"));
        for (i, ok) in [fmt, valid, fmt && empty("syntax"), fmt && empty("logic"), r["overall"] == true]
            .into_iter()
            .enumerate()
        {
            n[i] += ok as u64;
        }
    }
    n
}

/// Answers every Generator call with the ground truth of a different
/// request, so a mix of categories fails.
struct Shuffled(Vec<CorpusRecord>);

impl ModelClient for Shuffled {
    fn complete(&self, req: &ModelRequest) -> Result<String, ModelError> {
        let i = self.0.iter().position(|r| r.text == req.request).unwrap();
        if i % 7 == 3 {
            return Ok("Sure, I moved things around.".into());
        }
        if i % 11 == 5 {
            return Err(ModelError::unavailable("flaky"));
        }
        let donor = &self.0[(i * 5 + 1) % self.0.len()];
        Ok(layoutpilot_agents::eval::oracle::ground_truth_reply(donor))
    }

    fn backend_name(&self) -> &'static str {
        "shuffled"
    }
}

#[test]
fn metrics_match_an_independent_recount() {
    let c = small_corpus();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mixed.jsonl");
    let a = Agents::new(Some(Arc::new(Shuffled(c.clone()))));
    let s = run_bulk(&c, &a, ctx(), &out, BulkConfig { jobs: 3, single_agent: true }).unwrap();
    assert!(s.errors > 0);
    let m = compute_metrics(&read_results(&out).unwrap()).unwrap();
    let got = [m.formatting.pass, m.validity.pass, m.syntax.pass, m.logic.pass, m.overall.pass];
    assert_eq!(got, recount(&out));
    assert!(m.overall.pass < m.total && m.overall.pass > 0);
}

#[test]
fn prose_only_backend_fails_formatting_everywhere() {
    struct Prose;
    impl ModelClient for Prose {
        fn complete(&self, _: &ModelRequest) -> Result<String, ModelError> {
            Ok("I would move the input pair closer together.".into())
        }
        fn backend_name(&self) -> &'static str {
            "prose"
        }
    }
    let c = &small_corpus()[..20];
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("prose.jsonl");
    run_bulk(c, &Agents::new(Some(Arc::new(Prose))), ctx(), &out, BulkConfig::default()).unwrap();
    let m = compute_metrics(&read_results(&out).unwrap()).unwrap();
    assert_eq!(m.formatting.pass, 0);
    assert_eq!(m.overall.pass, 0);
}

#[test]
fn every_mutant_is_caught_with_its_own_rule() {
    for (golden, mutants) in mutant_suite(ctx(), 50, 3) {
        assert!(validate_text(&golden, ctx()).is_clean(), "golden flagged:\n{golden}");
        for m in mutants {
            let rules = validate_text(&m.text, ctx()).rules();
            assert_eq!(rules, BTreeSet::from([m.rule]), "line {} of\n{}", m.index, m.text);
        }
    }
}

#[test]
fn worksheet_is_stratified_and_grades_import() {
    let c = synthesize_corpus(&CorpusSpec::new(450, 50, 1, 3, 5).unwrap(), ctx());
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.jsonl");
    run_bulk(&c, &echo_agents(&c), ctx(), &out, BulkConfig { jobs: 4, single_agent: false }).unwrap();
    let results = read_results(&out).unwrap();
    let mut rows = grading_sample(&results, &c, 2, 1);
    assert_eq!(rows.len(), 10);
    assert_eq!(rows.iter().filter(|r| r.label == Label::Invalid).count(), 1);
    assert!(import_grades(&rows).is_err());
    for (i, r) in rows.iter_mut().enumerate() {
        r.grade = ["A", "A", "B", "C"][i % 4].to_string();
    }
    let d = import_grades(&rows).unwrap();
    assert_eq!(d.total, 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generated_valid_requests_always_validate(seed in any::<u64>(), lo in 1usize..10, extra in 0usize..30) {
        let spec = CorpusSpec::new(6, 2, lo, lo + extra, seed).unwrap();
        for r in synthesize_corpus(&spec, ctx()) {
            let report = validate_text(&r.ground_truth_script, ctx());
            prop_assert_eq!(report.is_clean(), r.label == Label::Valid, "{}", r.ground_truth_script);
        }
    }
}
