//! First level of the hierarchy: one Kalman filter per detector together with
//! a Mahalanobis outlier score and its sigmoid-softened weight `w_M`.
//!
//! `w_M` is a **penalty**: it grows with the Mahalanobis distance of the
//! measurement from the expert's prediction, and the fusion center adds it to
//! that detector's measurement noise. Higher means less trusted.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{invalid, Error, Result};
use crate::filter::{
    checked_cholesky, kf_predict_free, predict_measurement, update_with, GaussianState, LinearModel,
};

/// Largest `f64` strictly below one.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

/// Measured coordinates of a box, used as the default χ² degrees of freedom.
pub const DEFAULT_DOF: u32 = 4;
pub const DEFAULT_CONFIDENCE: f64 = 0.95;

/// Exact Mahalanobis distance `sqrt((y-mu)^T C^-1 (y-mu))`.
pub fn mahalanobis(y: &DVector<f64>, mu: &DVector<f64>, c: &DMatrix<f64>) -> Result<f64> {
    if y.len() != mu.len() || c.nrows() != y.len() || c.ncols() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "mahalanobis",
            expected: y.len(),
            found: mu.len().max(c.nrows()),
        });
    }
    let q = y - mu;
    let chol = checked_cholesky("mahalanobis covariance", c)?;
    let d2 = q.dot(&chol.solve(&q));
    Ok(d2.max(0.0).sqrt())
}

/// Per-coordinate approximation `sum_i (q_i^2 / C_i)^(1/2)` using only the
/// diagonal of the covariance.
///
/// This is the sum of standardized absolute residuals (an L1 norm), so it is
/// never smaller than the exact distance on a diagonal covariance and equals
/// it when at most one residual component is nonzero.
pub fn mahalanobis_diag(y: &DVector<f64>, mu: &DVector<f64>, c_diag: &DVector<f64>) -> Result<f64> {
    if y.len() != mu.len() || c_diag.len() != y.len() {
        return Err(Error::DimensionMismatch {
            context: "mahalanobis_diag",
            expected: y.len(),
            found: mu.len().max(c_diag.len()),
        });
    }
    if let Some(bad) = c_diag.iter().find(|&&c| !(c > 0.0)) {
        return Err(invalid(
            "covariance diagonal",
            format!("entries must be > 0, got {bad}"),
        ));
    }
    Ok(y.iter()
        .zip(mu.iter())
        .zip(c_diag.iter())
        .map(|((yi, mi), ci)| ((yi - mi).powi(2) / ci).sqrt())
        .sum())
}

/// Sigmoid penalty `1 / (1 + exp(-md + xi))`, clamped to the open unit interval.
pub fn local_weight(md: f64, xi: f64) -> f64 {
    let z = md - xi;
    let w = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    w.clamp(f64::MIN_POSITIVE, ONE_MINUS)
}

/// Sigmoid offset from the χ² distribution: the distance whose square is the
/// `confidence` quantile of χ²(`dof`).
pub fn chi2_xi(dof: u32, confidence: f64) -> Result<f64> {
    if dof == 0 {
        return Err(invalid("dof", "must be at least 1"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(
            "confidence",
            format!("must lie in (0, 1), got {confidence}"),
        ));
    }
    let dist = ChiSquared::new(f64::from(dof)).map_err(|e| invalid("dof", e.to_string()))?;
    Ok(dist.inverse_cdf(confidence).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertConfig {
    /// Sigmoid offset ξ.
    pub xi: f64,
    /// Use the per-coordinate approximation instead of the exact distance.
    pub use_diag_approx: bool,
}

impl ExpertConfig {
    pub fn new(xi: f64, use_diag_approx: bool) -> Result<Self> {
        let config = Self {
            xi,
            use_diag_approx,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn from_chi2(dof: u32, confidence: f64, use_diag_approx: bool) -> Result<Self> {
        Self::new(chi2_xi(dof, confidence)?, use_diag_approx)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(invalid("xi", format!("must be positive, got {}", self.xi)));
        }
        Ok(())
    }

    /// Distance of `y` from the prediction under the configured formula.
    pub fn distance(&self, y: &DVector<f64>, mu: &DVector<f64>, s: &DMatrix<f64>) -> Result<f64> {
        if self.use_diag_approx {
            mahalanobis_diag(y, mu, &s.diagonal())
        } else {
            mahalanobis(y, mu, s)
        }
    }
}

impl Default for ExpertConfig {
    fn default() -> Self {
        Self {
            xi: chi2_xi(DEFAULT_DOF, DEFAULT_CONFIDENCE)
                .expect("default chi2 parameters are valid"),
            use_diag_approx: false,
        }
    }
}

/// One expert's output for a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertReport {
    pub posterior: GaussianState,
    /// Predicted measurement the distance was computed against.
    pub predicted_meas: DVector<f64>,
    pub innovation_cov: DMatrix<f64>,
    pub md: f64,
    pub w_m: f64,
    pub frame: u64,
    /// Whether a measurement was consumed on this frame.
    pub present: bool,
    /// Consecutive frames without a measurement, including this one.
    pub missed: u32,
}

/// A per-detector Kalman filter with outlier scoring.
#[derive(Debug, Clone)]
pub struct Expert {
    model: LinearModel,
    init_cov: DMatrix<f64>,
    meas_to_state: DMatrix<f64>,
    stale_after: u32,
    state: Option<GaussianState>,
    missed: u32,
    last_md: f64,
    last_present_w_m: f64,
}

impl Expert {
    /// `init_cov` is the covariance assigned whenever the filter (re)starts
    /// from a raw measurement; `stale_after` is the number of consecutive
    /// missing frames after which the next measurement reinitializes it.
    pub fn new(model: LinearModel, init_cov: DMatrix<f64>, stale_after: u32) -> Result<Self> {
        model.validate()?;
        let n = model.state_dim();
        if init_cov.nrows() != n || init_cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                context: "initial covariance",
                expected: n,
                found: init_cov.nrows(),
            });
        }
        let meas_to_state = model
            .c
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| invalid("C", e.to_string()))?;
        Ok(Self {
            model,
            init_cov,
            meas_to_state,
            stale_after,
            state: None,
            missed: 0,
            last_md: 0.0,
            last_present_w_m: 0.0,
        })
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    pub fn state(&self) -> Option<&GaussianState> {
        self.state.as_ref()
    }

    pub fn reset(&mut self) {
        self.state = None;
        self.missed = 0;
    }

    fn needs_init(&self) -> bool {
        self.state.is_none() || (self.stale_after > 0 && self.missed >= self.stale_after)
    }

    /// Advance one frame. Returns `None` only while the expert has never seen
    /// a measurement.
    ///
    /// With a measurement: predict, score the measurement against the
    /// predicted measurement and innovation covariance, then update. Without
    /// one: predict only, keep the last distance and let `w_M` relax toward
    /// one as the absence lengthens.
    pub fn step(
        &mut self,
        frame: u64,
        y: Option<&DVector<f64>>,
        config: &ExpertConfig,
    ) -> Result<Option<ExpertReport>> {
        match y {
            Some(y) if self.needs_init() => self.initialize(frame, y, config).map(Some),
            Some(y) => {
                let state = self.state.as_ref().expect("initialized");
                let prior = kf_predict_free(state, &self.model)?;
                let (mu, s) = predict_measurement(&prior, &self.model.c, &self.model.rvv)?;
                let md = config.distance(y, &mu, &s)?;
                let w_m = local_weight(md, config.xi);
                let update = update_with(&prior, &self.model.c, &self.model.rvv, y)?;
                self.state = Some(update.state.clone());
                self.missed = 0;
                self.last_md = md;
                self.last_present_w_m = w_m;
                Ok(Some(ExpertReport {
                    posterior: update.state,
                    predicted_meas: mu,
                    innovation_cov: s,
                    md,
                    w_m,
                    frame,
                    present: true,
                    missed: 0,
                }))
            }
            None => {
                let Some(state) = self.state.as_ref() else {
                    return Ok(None);
                };
                let prior = kf_predict_free(state, &self.model)?;
                let (mu, s) = predict_measurement(&prior, &self.model.c, &self.model.rvv)?;
                self.missed = self.missed.saturating_add(1);
                self.state = Some(prior.clone());
                Ok(Some(ExpertReport {
                    posterior: prior,
                    predicted_meas: mu,
                    innovation_cov: s,
                    md: self.last_md,
                    w_m: stale_weight(self.last_present_w_m, self.missed, self.stale_after),
                    frame,
                    present: false,
                    missed: self.missed,
                }))
            }
        }
    }

    fn initialize(
        &mut self,
        frame: u64,
        y: &DVector<f64>,
        config: &ExpertConfig,
    ) -> Result<ExpertReport> {
        if y.len() != self.model.meas_dim() {
            return Err(Error::DimensionMismatch {
                context: "expert measurement",
                expected: self.model.meas_dim(),
                found: y.len(),
            });
        }
        let state = GaussianState::new(&self.meas_to_state * y, self.init_cov.clone())?;
        let (_, s) = predict_measurement(&state, &self.model.c, &self.model.rvv)?;
        let w_m = local_weight(0.0, config.xi);
        self.state = Some(state.clone());
        self.missed = 0;
        self.last_md = 0.0;
        self.last_present_w_m = w_m;
        Ok(ExpertReport {
            posterior: state,
            predicted_meas: y.clone(),
            innovation_cov: s,
            md: 0.0,
            w_m,
            frame,
            present: true,
            missed: 0,
        })
    }
}

/// `w_M` while a detector is silent: `1 - (1 - w_last) exp(-missed / stale_after)`.
fn stale_weight(last: f64, missed: u32, stale_after: u32) -> f64 {
    let horizon = f64::from(stale_after.max(1));
    (1.0 - (1.0 - last) * (-f64::from(missed) / horizon).exp()).clamp(f64::MIN_POSITIVE, ONE_MINUS)
}
