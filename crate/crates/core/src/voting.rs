//! Softened weighted majority voting over detector boxes.
//!
//! Every detector's box is compared against every other; a detector's
//! consensus distance is the distance to its nearest peer, and the tanh
//! penalty `w_d` grows with that distance. A detector that wanders away from
//! the cluster therefore gets the largest `w_d`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Minimum number of detectors for a consensus to exist.
pub const MIN_DETECTORS: usize = 3;

/// Target region: center `(u, v)` and size `(h, w)`, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub u: f64,
    pub v: f64,
    pub h: f64,
    pub w: f64,
}

impl BoundingBox {
    pub fn new(u: f64, v: f64, h: f64, w: f64) -> Result<Self> {
        let b = Self { u, v, h, w };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.u, self.v, self.h, self.w]
            .iter()
            .all(|x| x.is_finite())
        {
            return Err(Error::NonFinite("bounding box"));
        }
        if self.h < 0.0 || self.w < 0.0 {
            return Err(invalid("bounding box", "height and width must be >= 0"));
        }
        Ok(())
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.u, self.v, self.h, self.w]
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.to_array())
    }

    /// Reads `(u, v, h, w)` from the first four entries.
    pub fn from_slice(xs: &[f64]) -> Result<Self> {
        match xs {
            [u, v, h, w, ..] => Ok(Self {
                u: *u,
                v: *v,
                h: *h,
                w: *w,
            }),
            _ => Err(Error::DimensionMismatch {
                context: "bounding box",
                expected: 4,
                found: xs.len(),
            }),
        }
    }

    pub fn translated(&self, du: f64, dv: f64) -> Self {
        Self {
            u: self.u + du,
            v: self.v + dv,
            ..*self
        }
    }

    pub fn area(&self) -> f64 {
        self.h.max(0.0) * self.w.max(0.0)
    }

    /// Corners `(left, top, right, bottom)`; `u` is the column, `v` the row.
    pub fn corners(&self) -> (f64, f64, f64, f64) {
        let (hw, hh) = (self.w.max(0.0) / 2.0, self.h.max(0.0) / 2.0);
        (self.u - hw, self.v - hh, self.u + hw, self.v + hh)
    }
}

/// Parameters of the tanh voting penalty `w_d = omega0 + omega (1 + tanh(min_d - lambda))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VoteConfig {
    /// Base weight, reached when a detector agrees closely with a peer.
    #[serde(default = "default_omega0")]
    pub omega0: f64,
    /// Penalty impact; the weight saturates at `omega0 + 2 omega`.
    #[serde(default = "default_omega")]
    pub omega: f64,
    /// Distance at which the penalty is half engaged.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Optional per-dimension multipliers applied before the distance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_scale: Option<Vec<f64>>,
}

fn default_omega0() -> f64 {
    1.0
}
fn default_omega() -> f64 {
    1.0
}
fn default_lambda() -> f64 {
    50.0
}

impl Default for VoteConfig {
    fn default() -> Self {
        Self {
            omega0: default_omega0(),
            omega: default_omega(),
            lambda: default_lambda(),
            dim_scale: None,
        }
    }
}

impl VoteConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("omega0", self.omega0),
            ("omega", self.omega),
            ("lambda", self.lambda),
        ] {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(invalid(name, format!("must be finite and >= 0, got {x}")));
            }
        }
        if let Some(scale) = &self.dim_scale {
            if scale.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(invalid("dim_scale", "entries must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Largest weight the penalty approaches.
    pub fn max_weight(&self) -> f64 {
        self.omega0 + 2.0 * self.omega
    }

    /// Distance between two measurement vectors under `dim_scale`.
    pub fn distance(&self, p: &[f64], r: &[f64]) -> f64 {
        match &self.dim_scale {
            None => vector_distance(p, r),
            Some(scale) => p
                .iter()
                .zip(r)
                .enumerate()
                .map(|(i, (a, b))| {
                    let s = scale.get(i).copied().unwrap_or(1.0);
                    (s * (a - b)).powi(2)
                })
                .sum::<f64>()
                .sqrt(),
        }
    }
}

/// Euclidean distance over `(u, v, h, w)`.
pub fn box_distance(p: &BoundingBox, r: &BoundingBox) -> f64 {
    vector_distance(&p.to_array(), &r.to_array())
}

pub fn vector_distance(p: &[f64], r: &[f64]) -> f64 {
    p.iter()
        .zip(r)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Distance from detector `i` to its nearest peer. Requires at least three boxes.
pub fn consensus_distance(boxes: &[BoundingBox], i: usize) -> Result<f64> {
    if boxes.len() < MIN_DETECTORS {
        return Err(Error::InsufficientDetectors(boxes.len()));
    }
    if i >= boxes.len() {
        return Err(invalid(
            "detector index",
            format!("{i} out of range for {} boxes", boxes.len()),
        ));
    }
    Ok(boxes
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, b)| box_distance(&boxes[i], b))
        .fold(f64::INFINITY, f64::min))
}

/// Nearest-peer distance for every point, with the voting metric. Needs two
/// or more points; callers enforce the three-detector consensus rule.
pub fn nearest_peer_distances(points: &[&[f64]], config: &VoteConfig) -> Vec<f64> {
    let n = points.len();
    let mut best = vec![f64::INFINITY; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = config.distance(points[i], points[j]);
            best[i] = best[i].min(d);
            best[j] = best[j].min(d);
        }
    }
    best
}

/// `omega0 + omega (1 + tanh(min_d - lambda))`.
///
/// `1 + tanh(x)` is evaluated as `2 / (1 + exp(-2x))`, which avoids the
/// cancellation of the direct form for distances below `lambda`.
pub fn vote_weight(min_d: f64, config: &VoteConfig) -> f64 {
    let x = 2.0 * (min_d - config.lambda);
    let one_plus_tanh = if x >= 0.0 {
        2.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        2.0 * e / (1.0 + e)
    };
    config.omega0 + config.omega * one_plus_tanh
}

/// `w_d` for each of `boxes` (three or more).
pub fn vote_weights(boxes: &[BoundingBox], config: &VoteConfig) -> Result<Vec<f64>> {
    if boxes.len() < MIN_DETECTORS {
        return Err(Error::InsufficientDetectors(boxes.len()));
    }
    let arrays: Vec<[f64; 4]> = boxes.iter().map(BoundingBox::to_array).collect();
    let refs: Vec<&[f64]> = arrays.iter().map(|a| a.as_slice()).collect();
    Ok(nearest_peer_distances(&refs, config)
        .into_iter()
        .map(|d| vote_weight(d, config))
        .collect())
}
