//! The constraint queries as engine query plans.
//!
//! Each constraint is a plan over a registered base table; the box
//! matching and fence arithmetic live in projection/filter UDFs, so the
//! whole pipeline runs through the engine.

use crate::engine::{eval_query, Database, EngineError, QueryPlan, Udf};
use crate::qlang::quantile;
use crate::value::{Table, Value};

use super::gen::{box_value, IMG_H, IMG_W};
use super::geometry::{match_boxes_greedy, BBox};

pub const NO_MATCH: &str = "No Match";
pub const VELOCITY_CUTOFF: f64 = 51.62;
pub const EMPTY_FRAME_THRESH: f64 = 0.13;
pub const IOU_THRESH: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("empty series")]
pub struct EmptySeries;

/// Tukey fences of a value list: quartiles +- 1.5 IQR.
pub fn iqr_bounds(values: &[f64]) -> Result<(f64, f64), EmptySeries> {
    if values.is_empty() {
        return Err(EmptySeries);
    }
    let mut xs = values.to_vec();
    let lq = quantile(&mut xs, 0.25).map_err(|_| EmptySeries)?;
    let uq = quantile(&mut xs, 0.75).map_err(|_| EmptySeries)?;
    let iqr = uq - lq;
    Ok((lq - 1.5 * iqr, uq + 1.5 * iqr))
}

fn want_int(row: &Value, name: &str) -> Result<i64, String> {
    match row.field(name) {
        Some(Value::Int(i)) => Ok(*i),
        other => Err(format!("field `{name}` should be an integer, got {other:?}")),
    }
}

fn want_field(row: &Value, name: &str) -> Result<Value, String> {
    row.field(name)
        .cloned()
        .ok_or_else(|| format!("missing field `{name}`"))
}

fn want_boxes(row: &Value) -> Result<Vec<BBox>, String> {
    let list = row
        .field("boxes")
        .and_then(Value::as_list)
        .ok_or("field `boxes` should be a list")?;
    list.iter()
        .map(|b| {
            let b = b.as_list().ok_or("each box should be a list")?;
            if b.len() != 4 {
                return Err("each box should have four coordinates".to_string());
            }
            let coord = |i: usize| b[i].as_f64().ok_or("box coordinates should be numbers");
            Ok(BBox::new(coord(0)?, coord(1)?, coord(2)?, coord(3)?))
        })
        .collect()
}

fn want_labels(row: &Value) -> Result<Vec<Value>, String> {
    Ok(row
        .field("labels")
        .and_then(Value::as_list)
        .ok_or("field `labels` should be a list")?
        .to_vec())
}

/// Join key `[seq_id, frame_id + offset]` over a detection record.
fn frame_key(offset: i64) -> Udf {
    Udf::row(move |r| {
        Ok(Value::List(vec![
            want_field(r, "seq_id")?,
            Value::Int(want_int(r, "frame_id")? + offset),
        ]))
    })
}

/// Same key over position `pos` of a join tuple.
fn tuple_frame_key(pos: usize, offset: i64) -> Udf {
    Udf::row(move |row| {
        let parts = row.as_list().ok_or("expected a join tuple")?;
        let r = parts.get(pos).ok_or("join tuple too short")?;
        Ok(Value::List(vec![
            want_field(r, "seq_id")?,
            Value::Int(want_int(r, "frame_id")? + offset),
        ]))
    })
}

/// For each box in the first frame of a `(t, t+1, t+2)` triple, the
/// labels of its greedy matches one and two frames ahead, with
/// `"No Match"` sentinels.
fn match_triple() -> Udf {
    Udf::row(|row| {
        let parts = row.as_list().ok_or("expected a join triple")?;
        let [r0, r1, r2] = parts else {
            return Err("expected exactly three joined records".to_string());
        };
        let (b0, l0) = (want_boxes(r0)?, want_labels(r0)?);
        let (b1, l1) = (want_boxes(r1)?, want_labels(r1)?);
        let (b2, l2) = (want_boxes(r2)?, want_labels(r2)?);
        let m01 = match_boxes_greedy(&b0, &b1, IOU_THRESH);
        let m02 = match_boxes_greedy(&b0, &b2, IOU_THRESH);
        let label_of = |m: &Option<usize>, labels: &[Value]| match m {
            Some(j) => labels[*j].clone(),
            None => Value::text(NO_MATCH),
        };
        let box_of = |m: &Option<usize>, boxes: &[BBox]| match m {
            Some(j) => box_value(&boxes[*j]),
            None => Value::Null,
        };
        let mut out = Vec::with_capacity(b0.len());
        for i in 0..b0.len() {
            out.push(crate::row! {
                seq_id: want_field(r0, "seq_id")?,
                frame_id: want_field(r0, "frame_id")?,
                lb: Value::List(vec![
                    l0[i].clone(),
                    label_of(&m01[i], &l1),
                    label_of(&m02[i], &l2),
                ]),
                bx: Value::List(vec![
                    box_value(&b0[i]),
                    box_of(&m01[i], &b1),
                    box_of(&m02[i], &b2),
                ])
            });
        }
        Ok(Value::List(out))
    })
}

fn want_bbox(v: &Value) -> Result<BBox, String> {
    let b = v.as_list().ok_or("expected a box")?;
    Ok(BBox::new(
        b[0].as_f64().ok_or("bad box")?,
        b[1].as_f64().ok_or("bad box")?,
        b[2].as_f64().ok_or("bad box")?,
        b[3].as_f64().ok_or("bad box")?,
    ))
}

/// Objects detected with the same label in frames t and t+1 that have
/// no match in frame t+2, restricted to centered boxes. One output row
/// per violating object triple: `{seq_id, frame_id, lb, bx}` with
/// `frame_id` the first frame of the triple.
pub fn temporal_consistency_plan() -> QueryPlan {
    QueryPlan::new("preds")
        .join("preds", frame_key(1), frame_key(0))
        .join("preds", tuple_frame_key(0, 2), frame_key(0))
        .project(match_triple())
        .flatten()
        .filter(Udf::row(|r| {
            let lb = r.field("lb").and_then(Value::as_list).ok_or("missing lb")?;
            let bx = r.field("bx").and_then(Value::as_list).ok_or("missing bx")?;
            Ok(Value::Bool(
                lb[0] == lb[1]
                    && lb[2] == Value::text(NO_MATCH)
                    && want_bbox(&bx[0])?.is_center(IMG_W, IMG_H),
            ))
        }))
}

pub fn q_temporal_consistency(db: &Database) -> Result<Table, EngineError> {
    eval_query(db, &temporal_consistency_plan(), false).map(|(t, _)| t)
}

/// Matched objects moving faster than `cutoff` pixels/frame, grouped
/// by `(seq_id, frame_id)` of the arrival frame. Output rows are
/// `[[seq_id, frame_id], group]`.
pub fn high_velocity_plan(cutoff: f64) -> QueryPlan {
    QueryPlan::new("preds")
        .join("preds", frame_key(1), frame_key(0))
        .project(Udf::row(|row| {
            let parts = row.as_list().ok_or("expected a join pair")?;
            let [r0, r1] = parts else {
                return Err("expected exactly two joined records".to_string());
            };
            let b0 = want_boxes(r0)?;
            let b1 = want_boxes(r1)?;
            let m = match_boxes_greedy(&b0, &b1, IOU_THRESH);
            let mut out = Vec::new();
            for (i, m_i) in m.iter().enumerate() {
                let Some(j) = m_i else { continue };
                let (ax, ay) = b0[i].center();
                let (bx, by) = b1[*j].center();
                let v = ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt();
                out.push(crate::row! {
                    seq_id: want_field(r0, "seq_id")?,
                    frame_id: want_field(r1, "frame_id")?,
                    v: v
                });
            }
            Ok(Value::List(out))
        }))
        .flatten()
        .filter(Udf::row(move |r| {
            let v = r
                .field("v")
                .and_then(Value::as_f64)
                .ok_or("missing velocity")?;
            Ok(Value::Bool(v > cutoff))
        }))
        .group_by(Udf::row(|r| {
            Ok(Value::List(vec![
                want_field(r, "seq_id")?,
                want_field(r, "frame_id")?,
            ]))
        }))
}

pub fn q_high_velocity(db: &Database, cutoff: f64) -> Result<Table, EngineError> {
    eval_query(db, &high_velocity_plan(cutoff), false).map(|(t, _)| t)
}

/// Imputed series entries strictly outside the Tukey fences of their
/// own series. With `use_all_values` the fences are computed over all
/// non-null values (imputed included); otherwise over the non-imputed
/// ones only. Output rows: `{sample_id, feature, t, value}`. Series
/// with no basis values are skipped.
pub fn iqr_outliers_plan(use_all_values: bool) -> QueryPlan {
    QueryPlan::new("series")
        .group_by(Udf::row(|r| {
            Ok(Value::List(vec![
                want_field(r, "sample_id")?,
                want_field(r, "feature")?,
            ]))
        }))
        .project(Udf::row(move |group| {
            let parts = group.as_list().ok_or("expected a group row")?;
            let rows = parts[1].as_list().ok_or("expected a group subtable")?;
            let mut basis = Vec::new();
            for r in rows {
                if let Some(Value::Float(x)) = r.field("value") {
                    if use_all_values || r.field("imputed") != Some(&Value::Bool(true)) {
                        basis.push(*x);
                    }
                }
            }
            let Ok((lo, hi)) = iqr_bounds(&basis) else {
                return Ok(Value::List(Vec::new()));
            };
            let mut out = Vec::new();
            for r in rows {
                let Some(Value::Float(x)) = r.field("value") else {
                    continue;
                };
                if r.field("imputed") == Some(&Value::Bool(true)) && (*x < lo || *x > hi) {
                    out.push(crate::row! {
                        sample_id: want_field(r, "sample_id")?,
                        feature: want_field(r, "feature")?,
                        t: want_field(r, "t")?,
                        value: Value::Float(*x)
                    });
                }
            }
            Ok(Value::List(out))
        }))
        .flatten()
}

pub fn q_iqr_outliers(db: &Database, use_all_values: bool) -> Result<Table, EngineError> {
    eval_query(db, &iqr_outliers_plan(use_all_values), false).map(|(t, _)| t)
}

/// Sequences carrying more than one distinct label, most-mixed first.
/// Output rows: `[seq_id, n_unique, unique_labels]`.
pub fn multilabel_plan() -> QueryPlan {
    QueryPlan::new("labels")
        .group_by(Udf::row(|r| want_field(r, "seq_id")))
        .project(Udf::row(|group| {
            let parts = group.as_list().ok_or("expected a group row")?;
            let rows = parts[1].as_list().ok_or("expected a group subtable")?;
            let labels: Vec<Value> = rows
                .iter()
                .map(|r| want_field(r, "label"))
                .collect::<Result<_, _>>()?;
            let uniq = Value::set(labels);
            let n = match &uniq {
                Value::Set(xs) => xs.len() as i64,
                _ => unreachable!(),
            };
            Ok(Value::List(vec![parts[0].clone(), Value::Int(n), uniq]))
        }))
        .filter(Udf::row(|r| {
            let parts = r.as_list().ok_or("expected a projected row")?;
            Ok(Value::Bool(matches!(parts[1], Value::Int(n) if n > 1)))
        }))
        .order_by(
            Udf::row(|r| {
                let parts = r.as_list().ok_or("expected a projected row")?;
                Ok(parts[1].clone())
            }),
            true,
        )
}

pub fn q_multilabel_sequences(db: &Database) -> Result<Table, EngineError> {
    eval_query(db, &multilabel_plan(), false).map(|(t, _)| t)
}

/// Frame-difference records labeled non-empty whose mean difference is
/// in (0, thresh]. Output rows are the violating records.
pub fn empty_frame_plan(thresh: f64) -> QueryPlan {
    QueryPlan::new("frames").filter(Udf::row(move |r| {
        let label = want_field(r, "label")?;
        let mean = r
            .field("mean")
            .and_then(Value::as_f64)
            .ok_or("missing mean")?;
        Ok(Value::Bool(
            label != Value::text("empty") && mean > 0.0 && mean <= thresh,
        ))
    }))
}

pub fn q_empty_frame_mislabels(db: &Database, thresh: f64) -> Result<Table, EngineError> {
    eval_query(db, &empty_frame_plan(thresh), false).map(|(t, _)| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::row;

    fn frame_rec(seq: i64, frame: i64, boxes: &[BBox], labels: &[&str]) -> Value {
        row! {
            seq_id: seq,
            frame_id: frame,
            boxes: Value::List(boxes.iter().map(box_value).collect()),
            labels: Value::List(labels.iter().map(|l| Value::text(*l)).collect())
        }
    }

    fn centered_box(shift: f64) -> BBox {
        BBox::new(460.0 + shift, 460.0, 540.0 + shift, 540.0)
    }

    #[test]
    fn iqr_bounds_examples() {
        assert_eq!(iqr_bounds(&[]), Err(EmptySeries));
        assert_eq!(iqr_bounds(&[7.0, 7.0, 7.0]), Ok((7.0, 7.0)));
        let series: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let (lo, hi) = iqr_bounds(&series).unwrap();
        assert!((lo - -48.5).abs() < 1e-9, "lower {lo}");
        assert!((hi - 149.5).abs() < 1e-9, "upper {hi}");
    }

    #[test]
    fn upper_bound_38_97_micro_check() {
        // quartiles 38.72 / 38.82 put the upper fence at 38.97
        let basis = [38.72, 38.72, 38.82, 38.82];
        let (lo, hi) = iqr_bounds(&basis).unwrap();
        assert!((hi - 38.97).abs() < 1e-9, "upper fence {hi}");
        assert!(38.98 > hi, "38.98 should be flagged");
        assert!(!(38.92 > hi || 38.92 < lo), "38.92 should not be flagged");
    }

    #[test]
    fn vanishing_centered_object_is_reported_once() {
        // object "car" present frames 0..=1 and 3.., missing at 2
        let b = centered_box(0.0);
        let rows = vec![
            frame_rec(0, 0, &[b], &["car"]),
            frame_rec(0, 1, &[b], &["car"]),
            frame_rec(0, 2, &[], &[]),
            frame_rec(0, 3, &[b], &["car"]),
            frame_rec(0, 4, &[b], &["car"]),
        ];
        let db = Database::new()
            .register("preds", Table::new(rows), false)
            .unwrap();
        let out = q_temporal_consistency(&db).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.rows[0].field("frame_id"), Some(&Value::Int(0)));
        let lb = out.rows[0].field("lb").unwrap().as_list().unwrap();
        assert_eq!(lb[2], Value::text(NO_MATCH));
    }

    #[test]
    fn edge_exit_is_not_reported() {
        // same vanishing pattern but near the left frame edge
        let b = BBox::new(20.0, 460.0, 100.0, 540.0);
        let rows = vec![
            frame_rec(0, 0, &[b], &["car"]),
            frame_rec(0, 1, &[b], &["car"]),
            frame_rec(0, 2, &[], &[]),
        ];
        let db = Database::new()
            .register("preds", Table::new(rows), false)
            .unwrap();
        assert!(q_temporal_consistency(&db).unwrap().is_empty());
    }

    #[test]
    fn clean_data_reports_nothing() {
        let b = centered_box(0.0);
        let rows: Vec<Value> = (0..5).map(|f| frame_rec(0, f, &[b], &["car"])).collect();
        let db = Database::new()
            .register("preds", Table::new(rows), false)
            .unwrap();
        assert!(q_temporal_consistency(&db).unwrap().is_empty());
        assert!(q_high_velocity(&db, VELOCITY_CUTOFF).unwrap().is_empty());
    }

    #[test]
    fn teleport_flagged_at_default_cutoff_but_not_at_infinity() {
        // 100px jump of a 300px box between frames 1 and 2
        let big = |x: f64| BBox::new(x, 300.0, x + 300.0, 600.0);
        let rows = vec![
            frame_rec(0, 0, &[big(200.0)], &["car"]),
            frame_rec(0, 1, &[big(200.0)], &["car"]),
            frame_rec(0, 2, &[big(300.0)], &["car"]),
            frame_rec(0, 3, &[big(300.0)], &["car"]),
        ];
        let db = Database::new()
            .register("preds", Table::new(rows), false)
            .unwrap();
        let out = q_high_velocity(&db, VELOCITY_CUTOFF).unwrap();
        assert_eq!(out.len(), 1);
        let key = out.rows[0].as_list().unwrap()[0].clone();
        assert_eq!(key, Value::List(vec![Value::Int(0), Value::Int(2)]));
        assert!(q_high_velocity(&db, f64::INFINITY).unwrap().is_empty());
    }

    #[test]
    fn iqr_query_strictness_and_modes() {
        let mk = |t: i64, value: Value, imputed: bool| {
            row! {sample_id: 1i64, feature: "temp", t: t, value: value, imputed: imputed}
        };
        // basis [38.72, 38.72, 38.82, 38.82] puts the upper fence at
        // 38.97; imputed 38.98 is out, imputed 38.92 is not
        let rows = vec![
            mk(0, Value::Float(38.72), false),
            mk(1, Value::Float(38.72), false),
            mk(2, Value::Float(38.82), false),
            mk(3, Value::Float(38.82), false),
            mk(4, Value::Float(38.98), true),
            mk(5, Value::Float(38.92), true),
            mk(6, Value::Null, false),
        ];
        let db = Database::new()
            .register("series", Table::new(rows), false)
            .unwrap();
        let out = q_iqr_outliers(&db, false).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.rows[0].field("t"), Some(&Value::Int(4)));
        // a value exactly on the bound is not flagged
        let exact = vec![
            mk(0, Value::Float(10.0), false),
            mk(1, Value::Float(10.0), false),
            mk(2, Value::Float(10.0), true),
        ];
        let db = Database::new()
            .register("series", Table::new(exact), false)
            .unwrap();
        assert!(q_iqr_outliers(&db, false).unwrap().is_empty());
        assert!(q_iqr_outliers(&db, true).unwrap().is_empty());
    }

    #[test]
    fn multilabel_ordering_and_thresholds() {
        let mk = |seq: i64, label: &str| row! {seq_id: seq, t: 0i64, label: label};
        let rows = vec![
            mk(0, "car"),
            mk(0, "car"),
            mk(1, "car"),
            mk(1, "dog"),
            mk(2, "car"),
            mk(2, "dog"),
            mk(2, "person"),
            mk(3, "truck"), // single-row sequence
        ];
        let db = Database::new()
            .register("labels", Table::new(rows), false)
            .unwrap();
        let out = q_multilabel_sequences(&db).unwrap();
        assert_eq!(out.len(), 2);
        let first = out.rows[0].as_list().unwrap();
        let second = out.rows[1].as_list().unwrap();
        assert_eq!(first[0], Value::Int(2));
        assert_eq!(first[1], Value::Int(3));
        assert_eq!(second[0], Value::Int(1));
    }

    #[test]
    fn empty_frame_thresholds() {
        let mk = |fid: i64, mean: f64, label: &str| row! {frame_id: fid, mean: mean, label: label};
        let rows = vec![
            mk(0, 0.0, "car"),    // strict lower bound excludes 0
            mk(1, 0.13, "car"),   // inclusive upper bound
            mk(2, 0.131, "car"),
            mk(3, 0.05, "empty"), // labeled empty: fine
            mk(4, 0.5, "car"),
        ];
        let db = Database::new()
            .register("frames", Table::new(rows), false)
            .unwrap();
        let out = q_empty_frame_mislabels(&db, EMPTY_FRAME_THRESH).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out.rows[0].field("frame_id"), Some(&Value::Int(1)));
    }
}
