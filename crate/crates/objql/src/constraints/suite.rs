//! Runs the constraint suite end to end and scores the reported
//! violations against the injected ground truth.
//!
//! Each constraint runs twice: once as a host-API query plan (with the
//! box matching inside UDFs) and once as the script from the corpus
//! (over the matched views). Both paths must recover exactly the
//! injected faults on generator data.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::time::Instant;

use super::corpus::{build_corpus, truth_keys, CorpusEntry};
use super::gen;
use super::queries;
use crate::engine::{eval_program, Database, EngineError};
use crate::qlang::{compile_program, parse_source, ProgramAst, StmtAst};
use crate::value::{CanonicalKey, Value};

#[derive(Debug, Clone)]
pub struct ConstraintReport {
    pub name: String,
    pub flagged: usize,
    pub truth: usize,
    pub precision: f64,
    pub recall: f64,
    pub seconds: f64,
}

impl ConstraintReport {
    pub fn is_exact(&self) -> bool {
        self.precision == 1.0 && self.recall == 1.0
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<32} flagged {:>5}  truth {:>5}  precision {:.3}  recall {:.3}  ({:.2}s)",
            self.name, self.flagged, self.truth, self.precision, self.recall, self.seconds
        )
    }
}

/// Precision and recall of `reported` against `truth` keys, comparing
/// as sets under value equality. An empty denominator scores 1.0.
pub fn precision_recall(reported: &[Value], truth: &[Value]) -> (f64, f64) {
    let truth_set: HashSet<CanonicalKey> = truth.iter().map(|r| r.canonical_encode()).collect();
    let reported_set: HashSet<CanonicalKey> =
        reported.iter().map(|r| r.canonical_encode()).collect();
    let hits = reported_set.intersection(&truth_set).count();
    let precision = if reported_set.is_empty() {
        1.0
    } else {
        hits as f64 / reported_set.len() as f64
    };
    let recall = if truth_set.is_empty() {
        1.0
    } else {
        hits as f64 / truth_set.len() as f64
    };
    (precision, recall)
}

fn score(
    name: impl Into<String>,
    reported: Vec<Value>,
    truth: &[Value],
    start: Instant,
) -> ConstraintReport {
    let (precision, recall) = precision_recall(&reported, truth);
    ConstraintReport {
        name: name.into(),
        flagged: reported.len(),
        truth: truth.len(),
        precision,
        recall,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs the five host-API constraint plans over freshly generated data
/// and scores each against its ground truth.
pub fn run_host_suite(seed: u64) -> Result<Vec<ConstraintReport>, EngineError> {
    let mut reports = Vec::new();

    let (preds, truth) = gen::gen_detections(seed, 20, 30, 0.35);
    let start = Instant::now();
    let db = Database::new().register("preds", preds, false)?;
    let out = queries::q_temporal_consistency(&db)?;
    let reported: Vec<Value> = out
        .rows
        .iter()
        .map(|r| {
            let lb = r.field("lb").unwrap().as_list().unwrap();
            let frame = match r.field("frame_id").unwrap() {
                Value::Int(t) => Value::Int(t + 2),
                other => other.clone(),
            };
            Value::List(vec![r.field("seq_id").unwrap().clone(), frame, lb[0].clone()])
        })
        .collect();
    reports.push(score("temporal_consistency (host)", reported, &truth_keys(&truth), start));

    let (preds, truth) = gen::gen_teleports(seed ^ 1, 10, 30, 0.4);
    let start = Instant::now();
    let db = Database::new().register("preds", preds, false)?;
    let out = queries::q_high_velocity(&db, queries::VELOCITY_CUTOFF)?;
    let reported: Vec<Value> = out
        .rows
        .iter()
        .map(|r| r.as_list().unwrap()[0].clone())
        .collect();
    reports.push(score("high_velocity (host)", reported, &truth_keys(&truth), start));

    let (series, truth) = gen::gen_timeseries(seed ^ 2, 40, 4, 48, 0.25);
    let start = Instant::now();
    let db = Database::new().register("series", series, false)?;
    for use_all in [false, true] {
        let out = queries::q_iqr_outliers(&db, use_all)?;
        let reported: Vec<Value> = out
            .rows
            .iter()
            .map(|r| {
                Value::List(vec![
                    r.field("sample_id").unwrap().clone(),
                    r.field("feature").unwrap().clone(),
                    r.field("t").unwrap().clone(),
                ])
            })
            .collect();
        let mode = if use_all { "all values" } else { "ground truth" };
        reports.push(score(
            format!("iqr_outliers (host, {mode})"),
            reported,
            &truth_keys(&truth),
            start,
        ));
    }

    let (labels, truth) = gen::gen_multilabel(seed ^ 3, 300, 5, 0.15);
    let start = Instant::now();
    let db = Database::new().register("labels", labels, false)?;
    let out = queries::q_multilabel_sequences(&db)?;
    let reported: Vec<Value> = out
        .rows
        .iter()
        .map(|r| r.as_list().unwrap()[0].clone())
        .collect();
    reports.push(score("multilabel_sequences (host)", reported, &truth_keys(&truth), start));

    let (frames, truth) = gen::gen_empty_frames(seed ^ 4, 2000, 0.05);
    let start = Instant::now();
    let db = Database::new().register("frames", frames, false)?;
    let out = queries::q_empty_frame_mislabels(&db, queries::EMPTY_FRAME_THRESH)?;
    let reported: Vec<Value> = out
        .rows
        .iter()
        .map(|r| r.field("frame_id").unwrap().clone())
        .collect();
    reports.push(score("empty_frame_mislabels (host)", reported, &truth_keys(&truth), start));

    Ok(reports)
}

/// Compiles a corpus script against in-memory tables: register
/// statements are dropped from the AST and the tables bound directly.
pub fn run_entry(entry: &CorpusEntry) -> Result<ConstraintReport, String> {
    let start = Instant::now();
    let ast = parse_source(entry.script).map_err(|e| format!("{}: {e}", entry.name))?;
    let queries_only = ProgramAst {
        statements: ast
            .statements
            .into_iter()
            .filter(|s| matches!(s, StmtAst::Query { .. }))
            .collect(),
    };
    let program = compile_program(&queries_only, Path::new("."))
        .map_err(|e| format!("{}: {e}", entry.name))?;
    let mut db = Database::new();
    for (name, table) in &entry.tables {
        db = db
            .register(name, table.clone(), false)
            .map_err(|e| format!("{}: {e}", entry.name))?;
    }
    let out = eval_program(&db, &program).map_err(|e| format!("{}: {e}", entry.name))?;
    let flagged = out
        .get("violations")
        .map_err(|e| format!("{}: {e}", entry.name))?;
    Ok(score(
        format!("{} (script)", entry.name),
        flagged.rows.clone(),
        &truth_keys(&entry.truth),
        start,
    ))
}

/// Runs the whole suite for `seed`: host-API plans plus the script
/// corpus.
pub fn run_suite(seed: u64) -> Result<Vec<ConstraintReport>, String> {
    let mut reports = run_host_suite(seed).map_err(|e| e.to_string())?;
    for entry in build_corpus(seed) {
        reports.push(run_entry(&entry)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_exact_on_seeded_data() {
        for seed in [1, 42] {
            for report in run_suite(seed).unwrap() {
                assert!(report.is_exact(), "seed {seed}: {report}");
                assert!(report.truth > 0, "seed {seed}: {} found no faults to score", report.name);
            }
        }
    }

    #[test]
    fn broken_threshold_breaks_precision() {
        // cutoff 0 flags every matched movement, so precision collapses
        let (preds, truth) = gen::gen_teleports(3, 4, 10, 0.5);
        let db = Database::new().register("preds", preds, false).unwrap();
        let out = queries::q_high_velocity(&db, 0.0).unwrap();
        let reported: Vec<Value> = out
            .rows
            .iter()
            .map(|r| r.as_list().unwrap()[0].clone())
            .collect();
        let (precision, recall) = precision_recall(&reported, &truth_keys(&truth));
        assert!(precision < 1.0);
        assert_eq!(recall, 1.0);
    }

    #[test]
    fn precision_recall_conventions() {
        let some = vec![Value::Int(1)];
        let none: Vec<Value> = Vec::new();
        assert_eq!(precision_recall(&none, &none), (1.0, 1.0));
        assert_eq!(precision_recall(&none, &some), (1.0, 0.0));
        assert_eq!(precision_recall(&some, &none), (0.0, 1.0));
        assert_eq!(precision_recall(&some, &some), (1.0, 1.0));
    }
}
