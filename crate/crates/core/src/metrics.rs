//! Tracking evaluation against ground truth: Jaccard overlap, box distance,
//! the success rule and per-approach summaries.

use crate::error::{Error, Result};
use crate::voting::{box_distance, BoundingBox};

/// A frame counts as tracked when `J >= SUCCESS_MIN_JACCARD` and `d <= SUCCESS_MAX_DISTANCE`.
pub const SUCCESS_MIN_JACCARD: f64 = 0.5;
pub const SUCCESS_MAX_DISTANCE: f64 = 50.0;

/// Intersection over union of the axis-aligned rectangles. Zero when the
/// union has no area.
pub fn jaccard(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let (al, at, ar, ab) = a.corners();
    let (bl, bt, br, bb) = b.corners();
    let iw = (ar.min(br) - al.max(bl)).max(0.0);
    let ih = (ab.min(bb) - at.max(bt)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union > 0.0 {
        (inter / union).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Euclidean distance over `(u, v, h, w)`, same metric as the voting stage.
pub fn gt_distance(a: &BoundingBox, gt: &BoundingBox) -> f64 {
    box_distance(a, gt)
}

/// Inclusive on both thresholds.
pub fn success(j: f64, d: f64) -> bool {
    j >= SUCCESS_MIN_JACCARD && d <= SUCCESS_MAX_DISTANCE
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameEval {
    pub frame: u64,
    pub jaccard: f64,
    pub dist: f64,
    pub success: bool,
}

impl FrameEval {
    pub fn new(frame: u64, estimate: &BoundingBox, gt: &BoundingBox) -> Self {
        let jaccard = jaccard(estimate, gt);
        let dist = gt_distance(estimate, gt);
        Self {
            frame,
            jaccard,
            dist,
            success: success(jaccard, dist),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApproachSummary {
    pub approach: String,
    pub frames: usize,
    pub mean_jaccard: f64,
    pub mean_dist: f64,
    pub success_rate: f64,
}

/// Averages per approach. An approach with no frames is an error rather than NaN.
pub fn summarize<'a, I>(runs: I) -> Result<Vec<ApproachSummary>>
where
    I: IntoIterator<Item = (&'a str, &'a [FrameEval])>,
{
    let mut out = Vec::new();
    for (approach, evals) in runs {
        if evals.is_empty() {
            return Err(Error::EmptyInput("evaluation run has no frames"));
        }
        let n = evals.len() as f64;
        out.push(ApproachSummary {
            approach: approach.to_string(),
            frames: evals.len(),
            mean_jaccard: evals.iter().map(|e| e.jaccard).sum::<f64>() / n,
            mean_dist: evals.iter().map(|e| e.dist).sum::<f64>() / n,
            success_rate: evals.iter().filter(|e| e.success).count() as f64 / n,
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("no approaches to summarize"));
    }
    Ok(out)
}
