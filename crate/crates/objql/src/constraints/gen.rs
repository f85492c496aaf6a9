//! Synthetic dataset generators with labeled injected faults.
//!
//! Every generator is deterministic in its seed and returns the dataset
//! table together with a ground-truth table of the injected faults, so
//! a constraint's flagged set can be scored exactly. Ground-truth rows
//! have the shape `{kind, key}`.
//!
//! Detection tables hold one record per frame: `{seq_id, frame_id,
//! boxes, labels}` with `boxes` a list of `[x1, y1, x2, y2]` and
//! `labels` a parallel list of class names. Series tables hold one
//! record per time step: `{sample_id, feature, t, value, imputed}`.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::geometry::BBox;
use super::queries::iqr_bounds;
use crate::row;
use crate::value::{Table, Value};

pub const IMG_W: f64 = 1000.0;
pub const IMG_H: f64 = 1000.0;

pub(crate) fn box_value(b: &BBox) -> Value {
    Value::List(vec![
        Value::Float(b.x1),
        Value::Float(b.y1),
        Value::Float(b.x2),
        Value::Float(b.y2),
    ])
}

fn truth_row(kind: &str, key: Value) -> Value {
    row! {kind: kind, key: key}
}

const LABELS: &[&str] = &["car", "person", "bicycle", "truck", "dog"];

struct Track {
    label: &'static str,
    /// Center position at frame 0 and per-frame linear velocity.
    cx: f64,
    cy: f64,
    vx: f64,
    vy: f64,
    half: f64,
    /// Frames in which the object is absent.
    missing: Vec<i64>,
    /// Present only on frames < until (frame-edge exit tracks).
    until: i64,
}

impl Track {
    fn bbox_at(&self, frame: i64, rng: &mut ChaCha8Rng) -> BBox {
        let jx = rng.gen_range(-1.5..1.5);
        let jy = rng.gen_range(-1.5..1.5);
        let x = self.cx + self.vx * frame as f64 + jx;
        let y = self.cy + self.vy * frame as f64 + jy;
        BBox::new(x - self.half, y - self.half, x + self.half, y + self.half)
    }
}

/// Object-detection sequences where some centered objects, present in
/// frames k and k+1, are deleted from frame k+2 (and return at k+3),
/// mimicking a one-frame detector dropout. Each sequence also carries
/// an object that genuinely leaves through the frame edge, which is
/// not a fault.
///
/// Truth rows: `{kind: "disappearance", key: [seq_id, k + 2, label]}`.
/// Labels are unique per sequence so the key identifies the object.
pub fn gen_detections(
    seed: u64,
    n_seqs: usize,
    frames_per_seq: usize,
    drop_rate: f64,
) -> (Table, Table) {
    assert!(frames_per_seq >= 5, "need at least five frames");
    assert!((0.0..1.0).contains(&drop_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = [
        (320.0, 320.0),
        (320.0, 680.0),
        (680.0, 320.0),
        (680.0, 680.0),
    ];
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    let frames = frames_per_seq as i64;
    for seq in 0..n_seqs as i64 {
        let mut tracks = Vec::new();
        for (i, (cx, cy)) in centers.iter().enumerate() {
            // slow linear drift, bounded so the object stays centered
            let speed = 20.0 / frames as f64;
            let mut track = Track {
                label: LABELS[i],
                cx: *cx,
                cy: *cy,
                vx: rng.gen_range(-speed..speed),
                vy: rng.gen_range(-speed..speed),
                half: 40.0,
                missing: Vec::new(),
                until: frames,
            };
            if rng.gen_bool(drop_rate) {
                // drop frame k+2; keep it away from the sequence ends
                let k = rng.gen_range(0..frames - 4);
                track.missing.push(k + 2);
                truth.push(truth_row(
                    "disappearance",
                    Value::List(vec![
                        Value::Int(seq),
                        Value::Int(k + 2),
                        Value::text(track.label),
                    ]),
                ));
            }
            tracks.push(track);
        }
        // an edge object that exits partway through: a real departure,
        // never ground truth
        tracks.push(Track {
            label: LABELS[4],
            cx: 120.0,
            cy: 500.0,
            vx: -2.0,
            vy: 0.0,
            half: 40.0,
            missing: Vec::new(),
            until: rng.gen_range(3..frames - 1),
        });
        for frame in 0..frames {
            let mut boxes = Vec::new();
            let mut labels = Vec::new();
            for t in &tracks {
                if frame >= t.until || t.missing.contains(&frame) {
                    continue;
                }
                boxes.push(box_value(&t.bbox_at(frame, &mut rng)));
                labels.push(Value::text(t.label));
            }
            rows.push(row! {seq_id: seq, frame_id: frame, boxes: Value::List(boxes), labels: Value::List(labels)});
        }
    }
    (Table::new(rows), Table::new(truth))
}

/// Object-detection sequences where some objects teleport for exactly
/// one frame: a 60px single-axis displacement of a 300px box, so
/// frame-to-frame IoU stays near 2/3 while apparent speed far exceeds
/// the drift of ordinary tracks.
///
/// Truth rows: `{kind: "velocity", key: [seq_id, frame_id]}`, one per
/// frame reached by an implausible move (the displaced frame and the
/// return frame), deduplicated per (seq, frame).
pub fn gen_teleports(
    seed: u64,
    n_seqs: usize,
    frames_per_seq: usize,
    teleport_rate: f64,
) -> (Table, Table) {
    assert!(frames_per_seq >= 4, "need at least four frames");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let origins = [(200.0, 200.0), (200.0, 800.0), (800.0, 200.0), (800.0, 800.0)];
    let frames = frames_per_seq as i64;
    let mut rows = Vec::new();
    let mut truth_keys: Vec<(i64, i64)> = Vec::new();
    for seq in 0..n_seqs as i64 {
        struct TTrack {
            label: &'static str,
            cx: f64,
            cy: f64,
            spike: Option<i64>,
            axis_x: bool,
            dir: f64,
        }
        let tracks: Vec<TTrack> = origins
            .iter()
            .enumerate()
            .map(|(i, (cx, cy))| TTrack {
                label: LABELS[i],
                cx: *cx,
                cy: *cy,
                spike: rng
                    .gen_bool(teleport_rate)
                    .then(|| rng.gen_range(1..frames - 1)),
                axis_x: rng.gen_bool(0.5),
                dir: if rng.gen_bool(0.5) { 1.0 } else { -1.0 },
            })
            .collect();
        for t in &tracks {
            if let Some(m) = t.spike {
                for f in [m, m + 1] {
                    if !truth_keys.contains(&(seq, f)) {
                        truth_keys.push((seq, f));
                    }
                }
            }
        }
        for frame in 0..frames {
            let mut boxes = Vec::new();
            let mut labels = Vec::new();
            for t in &tracks {
                let jx = rng.gen_range(-1.0..1.0);
                let jy = rng.gen_range(-1.0..1.0);
                let (mut x, mut y) = (t.cx + jx, t.cy + jy);
                if t.spike == Some(frame) {
                    if t.axis_x {
                        x += 60.0 * t.dir;
                    } else {
                        y += 60.0 * t.dir;
                    }
                }
                boxes.push(box_value(&BBox::new(x - 150.0, y - 150.0, x + 150.0, y + 150.0)));
                labels.push(Value::text(t.label));
            }
            rows.push(row! {seq_id: seq, frame_id: frame, boxes: Value::List(boxes), labels: Value::List(labels)});
        }
    }
    let truth = truth_keys
        .into_iter()
        .map(|(s, f)| {
            truth_row("velocity", Value::List(vec![Value::Int(s), Value::Int(f)]))
        })
        .collect();
    (Table::new(rows), truth)
}

/// Univariate series per (sample, feature): a mean-reverting walk with
/// some entries masked and re-filled by interpolation (`imputed:
/// true`), a few entries missing outright (`value: null`), and, at
/// `outlier_rate` per series, one imputed entry displaced far beyond
/// the series' Tukey fences.
///
/// Truth rows: `{kind: "outlier", key: [sample_id, feature, t]}`.
/// Each generated series is validated (and regenerated if needed) so
/// that under both fence bases — non-imputed values only, or all
/// values — exactly the displaced entries lie strictly outside.
pub fn gen_timeseries(
    seed: u64,
    n_samples: usize,
    n_features: usize,
    t_len: usize,
    outlier_rate: f64,
) -> (Table, Table) {
    assert!(t_len >= 12, "series too short to impute and fence");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for sample in 0..n_samples as i64 {
        for feat in 0..n_features {
            let feature = format!("f{feat}");
            let want_outlier = rng.gen_bool(outlier_rate);
            let series = gen_one_series(&mut rng, t_len, want_outlier);
            if let Some(t_out) = series.outlier_t {
                truth.push(truth_row(
                    "outlier",
                    Value::List(vec![
                        Value::Int(sample),
                        Value::text(feature.clone()),
                        Value::Int(t_out),
                    ]),
                ));
            }
            for (t, (value, imputed)) in series.entries.into_iter().enumerate() {
                rows.push(row! {
                    sample_id: sample,
                    feature: feature.clone(),
                    t: t as i64,
                    value: value.map_or(Value::Null, Value::Float),
                    imputed: imputed
                });
            }
        }
    }
    (Table::new(rows), Table::new(truth))
}

struct Series {
    entries: Vec<(Option<f64>, bool)>,
    outlier_t: Option<i64>,
}

fn gen_one_series(rng: &mut ChaCha8Rng, t_len: usize, want_outlier: bool) -> Series {
    'attempt: for _ in 0..200 {
        // mean-reverting walk
        let mut walk = Vec::with_capacity(t_len);
        let mut x: f64 = rng.gen_range(45.0..55.0);
        for _ in 0..t_len {
            x += 0.25 * (50.0 - x) + rng.gen_range(-3.0..3.0);
            x = x.clamp(35.0, 65.0);
            walk.push(x);
        }
        // mask interior entries for imputation, and a couple as missing
        let mut kind = vec![0u8; t_len]; // 0 = observed, 1 = imputed, 2 = null
        for k in kind.iter_mut().take(t_len - 1).skip(1) {
            let r: f64 = rng.gen();
            if r < 0.15 {
                *k = 1;
            } else if r < 0.20 {
                *k = 2;
            }
        }
        let observed: Vec<f64> = walk
            .iter()
            .zip(&kind)
            .filter(|&(_, &k)| k == 0)
            .map(|(v, _)| *v)
            .collect();
        let Ok((_, _)) = iqr_bounds(&observed) else {
            continue 'attempt;
        };
        let mut sorted = observed.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let q = |p: f64| -> f64 {
            let h = p * (sorted.len() - 1) as f64;
            let lo = h.floor() as usize;
            let hi = h.ceil() as usize;
            sorted[lo] + (h - h.floor()) * (sorted[hi] - sorted[lo])
        };
        let (lq, uq) = (q(0.25), q(0.75));
        let iqr = uq - lq;

        let mut entries: Vec<(Option<f64>, bool)> = Vec::with_capacity(t_len);
        for t in 0..t_len {
            match kind[t] {
                0 => entries.push((Some(walk[t]), false)),
                2 => entries.push((None, false)),
                _ => {
                    // interpolate between nearest observed neighbors,
                    // clamped into the interquartile band so the filled
                    // value can never trip the fences
                    let prev = (0..t).rev().find(|&i| kind[i] == 0);
                    let next = (t + 1..t_len).find(|&i| kind[i] == 0);
                    let interp = match (prev, next) {
                        (Some(a), Some(b)) => {
                            let w = (t - a) as f64 / (b - a) as f64;
                            walk[a] + w * (walk[b] - walk[a])
                        }
                        (Some(a), None) => walk[a],
                        (None, Some(b)) => walk[b],
                        (None, None) => continue 'attempt,
                    };
                    entries.push((Some(interp.clamp(lq, uq)), true));
                }
            }
        }
        let outlier_t = if want_outlier {
            let imputed_slots: Vec<usize> = (0..t_len).filter(|&t| kind[t] == 1).collect();
            if imputed_slots.is_empty() {
                continue 'attempt;
            }
            let slot = imputed_slots[rng.gen_range(0..imputed_slots.len())];
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let median = q(0.5);
            entries[slot].0 = Some(median + sign * (3.5 * iqr + 6.0));
            Some(slot as i64)
        } else {
            None
        };
        if series_is_exact(&entries, outlier_t) {
            return Series { entries, outlier_t };
        }
    }
    panic!("could not generate a valid series in 200 attempts");
}

/// Under both fence bases, the strictly-outside imputed entries must be
/// exactly the injected outlier.
fn series_is_exact(entries: &[(Option<f64>, bool)], outlier_t: Option<i64>) -> bool {
    let basis_truth: Vec<f64> = entries
        .iter()
        .filter_map(|(v, imp)| if *imp { None } else { *v })
        .collect();
    let basis_all: Vec<f64> = entries.iter().filter_map(|(v, _)| *v).collect();
    for basis in [&basis_truth, &basis_all] {
        let Ok((lo, hi)) = iqr_bounds(basis) else {
            return false;
        };
        for (t, (v, imputed)) in entries.iter().enumerate() {
            let Some(v) = v else { continue };
            let outside = *imputed && (*v < lo || *v > hi);
            if outside != (outlier_t == Some(t as i64)) {
                return false;
            }
        }
    }
    true
}

/// Per-record sequence labels; some sequences have one record flipped
/// to a different label. Truth rows: `{kind: "multilabel", key:
/// seq_id}`.
pub fn gen_multilabel(
    seed: u64,
    n_seqs: usize,
    recs_per_seq: usize,
    flip_rate: f64,
) -> (Table, Table) {
    assert!(recs_per_seq >= 2, "need at least two records per sequence");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for seq in 0..n_seqs as i64 {
        let label_idx = rng.gen_range(0..LABELS.len());
        let flipped = if rng.gen_bool(flip_rate) {
            truth.push(truth_row("multilabel", Value::Int(seq)));
            Some(rng.gen_range(0..recs_per_seq))
        } else {
            None
        };
        for rec in 0..recs_per_seq {
            let label = if Some(rec) == flipped {
                LABELS[(label_idx + 1 + rng.gen_range(0..LABELS.len() - 1)) % LABELS.len()]
            } else {
                LABELS[label_idx]
            };
            rows.push(row! {seq_id: seq, t: rec as i64, label: label});
        }
    }
    (Table::new(rows), Table::new(truth))
}

/// Consecutive-frame difference records `{frame_id, mean, label}`
/// where `mean` stands in for the mean pixel difference. Genuinely
/// static pairs are labeled "empty"; some near-static pairs (mean in
/// (0, 0.13]) carry an object label — those are the faults. Truth
/// rows: `{kind: "empty_frame", key: frame_id}`. Includes boundary
/// rows at exactly 0.13 (a fault), just above it, and exactly 0
/// (excluded by the strict lower bound).
pub fn gen_empty_frames(seed: u64, n_frames: usize, mislabel_rate: f64) -> (Table, Table) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for fid in 0..n_frames as i64 {
        let r: f64 = rng.gen();
        if r < mislabel_rate {
            let mean = rng.gen_range(0.02..0.12);
            rows.push(row! {frame_id: fid, mean: mean, label: LABELS[rng.gen_range(0..LABELS.len())]});
            truth.push(truth_row("empty_frame", Value::Int(fid)));
        } else if r < mislabel_rate + 0.2 {
            rows.push(row! {frame_id: fid, mean: rng.gen_range(0.0..0.01), label: "empty"});
        } else {
            rows.push(row! {frame_id: fid, mean: rng.gen_range(0.2..0.8), label: LABELS[rng.gen_range(0..LABELS.len())]});
        }
    }
    let base = n_frames as i64;
    rows.push(row! {frame_id: base, mean: 0.13, label: "car"});
    truth.push(truth_row("empty_frame", Value::Int(base)));
    rows.push(row! {frame_id: base + 1, mean: 0.131, label: "car"});
    rows.push(row! {frame_id: base + 2, mean: 0.0, label: "car"});
    (Table::new(rows), Table::new(truth))
}
