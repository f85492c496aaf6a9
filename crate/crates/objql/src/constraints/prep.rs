//! Host-side preprocessing for the script form of the detection
//! constraints.
//!
//! Box correspondence between frames is geometric (greedy max-IoU), not
//! an equijoin, so the script corpus cannot express it directly; these
//! helpers materialize the matched views as plain tables that the
//! `.tql` scripts then query. The host-API plans in [`super::queries`]
//! run the same matching inside projection UDFs instead.

use std::collections::BTreeMap;

use super::gen::{IMG_H, IMG_W};
use super::geometry::{match_boxes_greedy, BBox};
use super::queries::{iqr_bounds, IOU_THRESH, NO_MATCH};
use crate::row;
use crate::value::{Table, Value};

struct Frame {
    boxes: Vec<BBox>,
    labels: Vec<Value>,
}

fn by_seq_frame(preds: &Table) -> BTreeMap<i64, BTreeMap<i64, Frame>> {
    let mut out: BTreeMap<i64, BTreeMap<i64, Frame>> = BTreeMap::new();
    for r in &preds.rows {
        let get_i64 = |name: &str| match r.field(name) {
            Some(Value::Int(i)) => *i,
            other => panic!("detection field `{name}` should be an integer, got {other:?}"),
        };
        let boxes = r
            .field("boxes")
            .and_then(Value::as_list)
            .expect("field `boxes` should be a list")
            .iter()
            .map(|b| {
                let b = b.as_list().expect("each box should be a list");
                BBox::new(
                    b[0].as_f64().unwrap(),
                    b[1].as_f64().unwrap(),
                    b[2].as_f64().unwrap(),
                    b[3].as_f64().unwrap(),
                )
            })
            .collect();
        let labels = r
            .field("labels")
            .and_then(Value::as_list)
            .expect("field `labels` should be a list")
            .to_vec();
        out.entry(get_i64("seq_id"))
            .or_default()
            .insert(get_i64("frame_id"), Frame { boxes, labels });
    }
    out
}

fn label_of(m: Option<usize>, labels: &[Value]) -> Value {
    match m {
        Some(j) => labels[j].clone(),
        None => Value::text(NO_MATCH),
    }
}

/// One row per box over each `(t, t+1, t+2)` frame triple:
/// `{seq_id, frame_id, labels: [own, match@t+1, match@t+2], centered}`.
pub fn build_triples(preds: &Table) -> Table {
    let grouped = by_seq_frame(preds);
    let mut rows = Vec::new();
    for (seq, frames) in &grouped {
        for (&t, f0) in frames {
            let (Some(f1), Some(f2)) = (frames.get(&(t + 1)), frames.get(&(t + 2))) else {
                continue;
            };
            let m01 = match_boxes_greedy(&f0.boxes, &f1.boxes, IOU_THRESH);
            let m02 = match_boxes_greedy(&f0.boxes, &f2.boxes, IOU_THRESH);
            for i in 0..f0.boxes.len() {
                rows.push(row! {
                    seq_id: *seq,
                    frame_id: t,
                    labels: Value::List(vec![
                        f0.labels[i].clone(),
                        label_of(m01[i], &f1.labels),
                        label_of(m02[i], &f2.labels),
                    ]),
                    centered: f0.boxes[i].is_center(IMG_W, IMG_H)
                });
            }
        }
    }
    Table::new(rows)
}

/// One row per box matched between consecutive frames:
/// `{seq_id, frame_id, dist, gap}` with `frame_id` the arrival frame.
pub fn build_motion_pairs(preds: &Table) -> Table {
    let grouped = by_seq_frame(preds);
    let mut rows = Vec::new();
    for (seq, frames) in &grouped {
        for (&t, f0) in frames {
            let Some(f1) = frames.get(&(t + 1)) else {
                continue;
            };
            let m = match_boxes_greedy(&f0.boxes, &f1.boxes, IOU_THRESH);
            for (i, m_i) in m.iter().enumerate() {
                let Some(j) = m_i else { continue };
                let (ax, ay) = f0.boxes[i].center();
                let (bx, by) = f1.boxes[*j].center();
                rows.push(row! {
                    seq_id: *seq,
                    frame_id: t + 1,
                    dist: ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt(),
                    gap: 1i64
                });
            }
        }
    }
    Table::new(rows)
}

/// Per-series Tukey fences over all non-null values:
/// `{sample_id, feature, lower, upper}`. Series with no values are
/// skipped.
pub fn build_series_bounds(series: &Table) -> Table {
    let mut grouped: BTreeMap<(i64, String), Vec<f64>> = BTreeMap::new();
    for r in &series.rows {
        let sid = match r.field("sample_id") {
            Some(Value::Int(i)) => *i,
            other => panic!("field `sample_id` should be an integer, got {other:?}"),
        };
        let feat = match r.field("feature") {
            Some(Value::Text(s)) => s.clone(),
            other => panic!("field `feature` should be text, got {other:?}"),
        };
        let entry = grouped.entry((sid, feat)).or_default();
        if let Some(Value::Float(x)) = r.field("value") {
            entry.push(*x);
        }
    }
    let mut rows = Vec::new();
    for ((sid, feat), values) in grouped {
        let Ok((lower, upper)) = iqr_bounds(&values) else {
            continue;
        };
        rows.push(row! {sample_id: sid, feature: feat, lower: lower, upper: upper});
    }
    Table::new(rows)
}

#[cfg(test)]
mod tests {
    use super::super::gen::{gen_detections, gen_teleports};
    use super::*;

    #[test]
    fn triples_flag_exactly_the_injected_drops() {
        let (d, truth) = gen_detections(21, 3, 12, 0.5);
        let triples = build_triples(&d);
        let mut flagged: Vec<Value> = triples
            .rows
            .iter()
            .filter(|r| {
                let lb = r.field("labels").unwrap().as_list().unwrap();
                lb[0] == lb[1]
                    && lb[2] == Value::text(NO_MATCH)
                    && r.field("centered") == Some(&Value::Bool(true))
            })
            .map(|r| {
                let t = match r.field("frame_id").unwrap() {
                    Value::Int(t) => *t,
                    _ => unreachable!(),
                };
                Value::List(vec![
                    r.field("seq_id").unwrap().clone(),
                    Value::Int(t + 2),
                    r.field("labels").unwrap().as_list().unwrap()[0].clone(),
                ])
            })
            .collect();
        flagged.sort();
        let mut expect: Vec<Value> = truth
            .rows
            .iter()
            .map(|t| t.field("key").unwrap().clone())
            .collect();
        expect.sort();
        assert_eq!(flagged, expect);
    }

    #[test]
    fn motion_pairs_slow_without_teleports() {
        let (d, _) = gen_teleports(22, 2, 6, 0.0);
        let pairs = build_motion_pairs(&d);
        // 4 tracks x 2 seqs x 5 transitions, all matched
        assert_eq!(pairs.len(), 40);
        for p in &pairs.rows {
            let dist = p.field("dist").unwrap().as_f64().unwrap();
            assert!(dist < 10.0, "ordinary jitter should be slow, got {dist}");
        }
    }

    #[test]
    fn bounds_rows_cover_every_series() {
        use super::super::gen::gen_timeseries;
        let (series, _) = gen_timeseries(5, 4, 3, 24, 0.2);
        let bounds = build_series_bounds(&series);
        assert_eq!(bounds.len(), 12);
        for b in &bounds.rows {
            let lo = b.field("lower").unwrap().as_f64().unwrap();
            let hi = b.field("upper").unwrap().as_f64().unwrap();
            assert!(lo < hi);
        }
    }
}
