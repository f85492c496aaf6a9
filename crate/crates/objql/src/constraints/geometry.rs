//! Bounding-box geometry: IoU and greedy bipartite matching.

/// A box with zero or negative area.
#[derive(Debug, thiserror::Error, PartialEq)]
#[error("degenerate box [{x1}, {y1}, {x2}, {y2}]")]
pub struct DegenerateBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

/// Checked IoU: rejects degenerate operands instead of treating them
/// as disjoint.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64, DegenerateBox> {
    for bx in [a, b] {
        if bx.area() <= 0.0 {
            return Err(DegenerateBox {
                x1: bx.x1,
                y1: bx.y1,
                x2: bx.x2,
                y2: bx.y2,
            });
        }
    }
    Ok(a.iou(b))
}

/// Axis-aligned box as `[x1, y1, x2, y2]` with `x1 <= x2`, `y1 <= y2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox { x1, y1, x2, y2 }
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1).max(0.0) * (self.y2 - self.y1).max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// Intersection over union; 0 for disjoint or degenerate boxes.
    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let iy = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    /// Whether the box center falls in the middle 50% of an image on
    /// both axes.
    pub fn is_center(&self, img_w: f64, img_h: f64) -> bool {
        let (cx, cy) = self.center();
        cx >= img_w * 0.25 && cx <= img_w * 0.75 && cy >= img_h * 0.25 && cy <= img_h * 0.75
    }
}

/// Greedy max-IoU matching between two box lists.
///
/// Repeatedly picks the highest-IoU unmatched pair at or above
/// `thresh`; ties break toward the lowest left index, then the lowest
/// right index. Returns, for each left box, the matched right index.
pub fn match_boxes_greedy(left: &[BBox], right: &[BBox], thresh: f64) -> Vec<Option<usize>> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (i, a) in left.iter().enumerate() {
        for (j, b) in right.iter().enumerate() {
            let v = a.iou(b);
            if v >= thresh {
                pairs.push((v, i, j));
            }
        }
    }
    // descending IoU, then ascending indices for deterministic ties
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut out = vec![None; left.len()];
    let mut right_used = vec![false; right.len()];
    for (_, i, j) in pairs {
        if out[i].is_none() && !right_used[j] {
            out[i] = Some(j);
            right_used[j] = true;
        }
    }
    out
}
