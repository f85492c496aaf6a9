//! The constraint corpus: the five integrity constraints as
//! query-language scripts, plus an exporter that materializes the
//! synthetic datasets and scripts into a directory runnable with
//! `objql run`.
//!
//! The geometric box matching cannot be written in the expression
//! sublanguage, so the detection scripts run over the matched views
//! from [`super::prep`]; everything else (joins, grouping, fences
//! comparisons) is in the scripts themselves. Script outputs are the
//! ground-truth keys of the violations they report.

use std::fs;
use std::path::Path;

use super::gen;
use super::prep::{build_motion_pairs, build_series_bounds, build_triples};
use crate::ingest::{save_jsonl, IngestError};
use crate::value::{Table, Value};

/// Objects with the same label in two consecutive frames and no match
/// two frames out, restricted to centered boxes.
pub const TEMPORAL_TQL: &str = "\
# One-frame detection dropouts: same label in frames t and t+1, no
# match at t+2, box centered in the image.
register triples \"triples.jsonl\";
violations <- triples
  .filter(it.labels[0] == it.labels[1] && it.labels[2] == \"No Match\" && it.centered)
  .project([it.seq_id, it.frame_id + 2, it.labels[0]]);
";

/// Matched detections whose centers moved implausibly fast.
pub const VELOCITY_TQL: &str = "\
# Implausibly fast motion between matched detections.
register pairs \"pairs.jsonl\";
violations <- pairs
  .filter(it.dist / it.gap > 51.62)
  .project([it.seq_id, it.frame_id])
  .unique();
";

/// Imputed series entries strictly outside their series' Tukey fences.
pub const IQR_TQL: &str = "\
# Imputed entries strictly outside the per-series Tukey fences.
register series \"series.jsonl\";
register bounds \"series_bounds.jsonl\";
violations <- series
  .join(bounds, key=[it.sample_id, it.feature], fkey=[it.sample_id, it.feature])
  .filter(_0.imputed && _0.value != null && (_0.value < _1.lower || _0.value > _1.upper))
  .project([_0.sample_id, _0.feature, _0.t]);
";

/// Sequences carrying more than one distinct label, most-mixed first.
pub const MULTILABEL_TQL: &str = "\
# Sequences labeled inconsistently across their records.
register labels \"labels.jsonl\";
violations <- labels
  .group_by(it.seq_id)
  .project([it[0], len(setof(col(it[1], \"label\")))])
  .filter(it[1] > 1)
  .order_by(it[1], reverse=true)
  .project(it[0]);
";

/// Near-static frame pairs labeled as containing an object.
pub const EMPTY_FRAME_TQL: &str = "\
# Near-empty frame differences labeled as containing an object.
register frames \"frames.jsonl\";
violations <- frames
  .filter(it.label != \"empty\" && it.mean > 0 && it.mean <= 0.13)
  .project(it.frame_id);
";

/// One corpus entry: a script, the tables it registers, and the ground
/// truth (as `{kind, key}` rows) for its `violations` result, whose
/// rows are the keys of the reported faults.
pub struct CorpusEntry {
    pub name: &'static str,
    pub script: &'static str,
    /// `(table_name, table)` pairs the script expects registered.
    pub tables: Vec<(&'static str, Table)>,
    pub truth: Table,
}

/// Builds the five corpus entries from seeded synthetic data.
pub fn build_corpus(seed: u64) -> Vec<CorpusEntry> {
    let (detections, drop_truth) = gen::gen_detections(seed, 20, 30, 0.35);
    let (teleport_dets, spike_truth) = gen::gen_teleports(seed ^ 1, 10, 30, 0.4);
    let (series, outlier_truth) = gen::gen_timeseries(seed ^ 2, 40, 4, 48, 0.25);
    let (labels, flip_truth) = gen::gen_multilabel(seed ^ 3, 300, 5, 0.15);
    let (frames, mislabel_truth) = gen::gen_empty_frames(seed ^ 4, 2000, 0.05);
    let series_bounds = build_series_bounds(&series);
    vec![
        CorpusEntry {
            name: "temporal_consistency",
            script: TEMPORAL_TQL,
            tables: vec![("triples", build_triples(&detections))],
            truth: drop_truth,
        },
        CorpusEntry {
            name: "high_velocity",
            script: VELOCITY_TQL,
            tables: vec![("pairs", build_motion_pairs(&teleport_dets))],
            truth: spike_truth,
        },
        CorpusEntry {
            name: "iqr_outliers",
            script: IQR_TQL,
            tables: vec![("series", series), ("bounds", series_bounds)],
            truth: outlier_truth,
        },
        CorpusEntry {
            name: "multilabel_sequences",
            script: MULTILABEL_TQL,
            tables: vec![("labels", labels)],
            truth: flip_truth,
        },
        CorpusEntry {
            name: "empty_frame_mislabels",
            script: EMPTY_FRAME_TQL,
            tables: vec![("frames", frames)],
            truth: mislabel_truth,
        },
    ]
}

/// The `{kind, key}` ground-truth rows reduced to their keys.
pub fn truth_keys(truth: &Table) -> Vec<Value> {
    truth
        .rows
        .iter()
        .map(|r| r.field("key").expect("ground truth rows carry a key").clone())
        .collect()
}

/// Writes the corpus to `dir`: one `<name>.tql` script per constraint,
/// the registered tables under `data/`, and the ground truth as
/// `data/truth_<name>.jsonl`.
pub fn export_corpus(dir: &Path, seed: u64) -> Result<(), IngestError> {
    let data = dir.join("data");
    fs::create_dir_all(&data)?;
    for entry in build_corpus(seed) {
        fs::write(dir.join(format!("{}.tql", entry.name)), entry.script)?;
        for (table_name, table) in &entry.tables {
            // the bounds table registers under its file name
            let file = if *table_name == "bounds" {
                "series_bounds"
            } else {
                table_name
            };
            save_jsonl(&data.join(format!("{file}.jsonl")), table)?;
        }
        save_jsonl(&data.join(format!("truth_{}.jsonl", entry.name)), &entry.truth)?;
    }
    Ok(())
}
