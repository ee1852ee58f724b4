//! Second level of the hierarchy: a fusion-center Kalman filter over the
//! stacked detector measurements.
//!
//! Each frame the noise block of detector `i` is `(gamma_i w_d + delta_i w_M) I`,
//! floored at `cov_floor`, so detectors that disagree with the majority or
//! with their own expert's prediction are down-weighted smoothly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expert::{Expert, ExpertConfig, ExpertReport};
use crate::filter::{
    initial_covariance, kf_predict_free, random_acceleration_model, update_with, GaussianState,
    LinearModel, ModelParams, TrackState,
};
use crate::voting::{nearest_peer_distances, vote_weight, BoundingBox, VoteConfig, MIN_DETECTORS};

pub const DEFAULT_COV_FLOOR: f64 = 1e-6;
pub const DEFAULT_STALE_AFTER: u32 = 5;

/// What the fusion center stacks for each present detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionInput {
    /// The detector's raw measurement.
    #[default]
    Measurement,
    /// The expert's posterior, projected into measurement space.
    ExpertEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    /// Diagonal of Γ, one entry per detector.
    pub gamma: Vec<f64>,
    /// Diagonal of Δ, one entry per detector.
    pub delta: Vec<f64>,
    pub cov_floor: f64,
    /// Consecutive missing frames after which an expert reinitializes.
    pub stale_after: u32,
    pub input: FusionInput,
    pub vote: VoteConfig,
    pub expert: ExpertConfig,
}

impl FusionConfig {
    /// Γ = Δ = I, the choice when nothing is known about the detectors.
    pub fn uniform(n_detectors: usize) -> Self {
        Self {
            gamma: vec![1.0; n_detectors],
            delta: vec![1.0; n_detectors],
            cov_floor: DEFAULT_COV_FLOOR,
            stale_after: DEFAULT_STALE_AFTER,
            input: FusionInput::default(),
            vote: VoteConfig::default(),
            expert: ExpertConfig::default(),
        }
    }

    pub fn n_detectors(&self) -> usize {
        self.gamma.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.gamma.len() < MIN_DETECTORS {
            return Err(Error::InsufficientDetectors(self.gamma.len()));
        }
        if self.delta.len() != self.gamma.len() {
            return Err(Error::DimensionMismatch {
                context: "delta",
                expected: self.gamma.len(),
                found: self.delta.len(),
            });
        }
        for (name, xs) in [("gamma", &self.gamma), ("delta", &self.delta)] {
            if let Some(bad) = xs.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
                return Err(invalid(
                    name,
                    format!("entries must be positive, got {bad}"),
                ));
            }
        }
        if !(self.cov_floor > 0.0) || !self.cov_floor.is_finite() {
            return Err(invalid(
                "cov_floor",
                format!("must be positive, got {}", self.cov_floor),
            ));
        }
        self.vote.validate()?;
        self.expert.validate()
    }
}

/// Adapted noise scale `max(gamma w_d + delta w_M, cov_floor)`.
pub fn adapt_rvv(w_d: f64, w_m: f64, gamma: f64, delta: f64, cov_floor: f64) -> f64 {
    (gamma * w_d + delta * w_m).max(cov_floor)
}

/// Per-detector diagnostics for one fused frame. Fields that only exist when
/// the detector delivered a measurement are `None` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorDiagnostics {
    pub present: bool,
    pub md: Option<f64>,
    pub w_m: Option<f64>,
    pub w_d: Option<f64>,
    pub rvv_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedEstimate {
    pub state: GaussianState,
    pub per_detector: Vec<DetectorDiagnostics>,
    pub frame: u64,
    /// No detector was present; the state is a pure prediction.
    pub coasting: bool,
}

impl FusedEstimate {
    /// Position part, assuming the 8-state box layout.
    pub fn bbox(&self) -> Result<BoundingBox> {
        Ok(TrackState::from_vector(&self.state.mean)?.bbox())
    }
}

/// `w_d` per detector from the present measurements; `None` for absent ones.
///
/// With a single present detector there is no peer to compare against and it
/// gets the neutral weight `omega0 + omega`.
pub fn present_vote_weights(
    measurements: &[Option<DVector<f64>>],
    config: &VoteConfig,
) -> Vec<Option<f64>> {
    let present: Vec<(usize, &[f64])> = measurements
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.as_ref().map(|m| (i, m.as_slice())))
        .collect();
    let mut out = vec![None; measurements.len()];
    match present.len() {
        0 => {}
        1 => out[present[0].0] = Some(config.omega0 + config.omega),
        _ => {
            let points: Vec<&[f64]> = present.iter().map(|(_, p)| *p).collect();
            for ((i, _), d) in present.iter().zip(nearest_peer_distances(&points, config)) {
                out[*i] = Some(vote_weight(d, config));
            }
        }
    }
    out
}

/// Stacked measurement update: every present detector contributes the rows
/// of `model.c`, with noise block `scales[i] * I`.
pub fn fuse_measurements(
    prior: &GaussianState,
    model: &LinearModel,
    measurements: &[Option<DVector<f64>>],
    scales: &[f64],
) -> Result<GaussianState> {
    if scales.len() != measurements.len() {
        return Err(Error::DimensionMismatch {
            context: "noise scales",
            expected: measurements.len(),
            found: scales.len(),
        });
    }
    let p = model.meas_dim();
    let n = model.state_dim();
    let present: Vec<(usize, &DVector<f64>)> = measurements
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.as_ref().map(|m| (i, m)))
        .collect();
    if present.is_empty() {
        return Ok(prior.clone());
    }
    let rows = p * present.len();
    let mut c = DMatrix::zeros(rows, n);
    let mut rvv = DMatrix::zeros(rows, rows);
    let mut y = DVector::zeros(rows);
    for (k, (i, m)) in present.iter().enumerate() {
        if m.len() != p {
            return Err(Error::DimensionMismatch {
                context: "detector measurement",
                expected: p,
                found: m.len(),
            });
        }
        let r0 = k * p;
        c.view_mut((r0, 0), (p, n)).copy_from(&model.c);
        y.rows_mut(r0, p).copy_from(m);
        for d in 0..p {
            rvv[(r0 + d, r0 + d)] = scales[*i];
        }
    }
    Ok(update_with(prior, &c, &rvv, &y)?.state)
}

fn check_inputs(
    reports: &[Option<ExpertReport>],
    measurements: &[Option<DVector<f64>>],
    vote_points: &[Option<DVector<f64>>],
    config: &FusionConfig,
) -> Result<()> {
    let n = config.n_detectors();
    if n < MIN_DETECTORS {
        return Err(Error::InsufficientDetectors(n));
    }
    for (context, len) in [
        ("delta", config.delta.len()),
        ("expert reports", reports.len()),
        ("measurements", measurements.len()),
        ("vote points", vote_points.len()),
    ] {
        if len != n {
            return Err(Error::DimensionMismatch {
                context,
                expected: n,
                found: len,
            });
        }
    }
    Ok(())
}

/// One fusion-center frame: predict, weigh each present detector and update.
///
/// `measurements[i]` is what detector `i` contributes this frame (raw box or
/// expert estimate), `vote_points[i]` what it is voted on, and `reports[i]`
/// its expert's report.
pub fn fusion_step(
    center: &GaussianState,
    model: &LinearModel,
    reports: &[Option<ExpertReport>],
    measurements: &[Option<DVector<f64>>],
    vote_points: &[Option<DVector<f64>>],
    frame: u64,
    config: &FusionConfig,
) -> Result<FusedEstimate> {
    check_inputs(reports, measurements, vote_points, config)?;
    let n = config.n_detectors();

    let prior = kf_predict_free(center, model)?;
    let w_d = present_vote_weights(vote_points, &config.vote);
    let mut per_detector = Vec::with_capacity(n);
    let mut scales = vec![f64::NAN; n];
    let mut used: Vec<Option<DVector<f64>>> = vec![None; n];
    for i in 0..n {
        let report = reports[i].as_ref();
        let present = measurements[i].is_some();
        let diag = if present {
            let w_m = report.map(|r| r.w_m).ok_or_else(|| {
                invalid(
                    "expert reports",
                    format!("detector {i} has a measurement but no report"),
                )
            })?;
            let w_d = w_d[i].ok_or_else(|| {
                invalid(
                    "vote points",
                    format!("detector {i} is present but was not voted"),
                )
            })?;
            let scale = adapt_rvv(w_d, w_m, config.gamma[i], config.delta[i], config.cov_floor);
            scales[i] = scale;
            used[i] = measurements[i].clone();
            DetectorDiagnostics {
                present,
                md: report.map(|r| r.md),
                w_m: Some(w_m),
                w_d: Some(w_d),
                rvv_scale: Some(scale),
            }
        } else {
            DetectorDiagnostics {
                present,
                md: report.map(|r| r.md),
                w_m: report.map(|r| r.w_m),
                w_d: None,
                rvv_scale: None,
            }
        };
        per_detector.push(diag);
    }

    let coasting = used.iter().all(Option::is_none);
    let state = if coasting {
        prior
    } else {
        fuse_measurements(&prior, model, &used, &scales)?
    };
    Ok(FusedEstimate {
        state,
        per_detector,
        frame,
        coasting,
    })
}

/// The second-level filter with lazy initialization.
#[derive(Debug, Clone)]
pub struct FusionCenter {
    model: LinearModel,
    init_cov: DMatrix<f64>,
    meas_to_state: DMatrix<f64>,
    state: Option<GaussianState>,
}

impl FusionCenter {
    pub fn new(model: LinearModel, init_cov: DMatrix<f64>) -> Result<Self> {
        let meas_to_state = model
            .c
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| invalid("C", e.to_string()))?;
        Ok(Self {
            model,
            init_cov,
            meas_to_state,
            state: None,
        })
    }

    /// Start from a known belief instead of the first measurements.
    pub fn with_state(model: LinearModel, state: GaussianState) -> Result<Self> {
        let mut center = Self::new(model, state.cov.clone())?;
        center.state = Some(state);
        Ok(center)
    }

    pub fn state(&self) -> Option<&GaussianState> {
        self.state.as_ref()
    }

    pub fn model(&self) -> &LinearModel {
        &self.model
    }

    /// Returns `None` until some detector has been seen. The first frame with
    /// measurements initializes at their componentwise median.
    pub fn step(
        &mut self,
        frame: u64,
        reports: &[Option<ExpertReport>],
        measurements: &[Option<DVector<f64>>],
        vote_points: &[Option<DVector<f64>>],
        config: &FusionConfig,
    ) -> Result<Option<FusedEstimate>> {
        let Some(center) = self.state.as_ref() else {
            check_inputs(reports, measurements, vote_points, config)?;
            let present: Vec<&DVector<f64>> = measurements.iter().flatten().collect();
            if present.is_empty() {
                return Ok(None);
            }
            let median = componentwise_median(&present);
            let state = GaussianState::new(&self.meas_to_state * median, self.init_cov.clone())?;
            let w_d = present_vote_weights(vote_points, &config.vote);
            let per_detector = (0..measurements.len())
                .map(|i| {
                    let r = reports.get(i).and_then(Option::as_ref);
                    let present = measurements[i].is_some();
                    let w_m = r.map(|r| r.w_m);
                    let scale = match (present, w_d[i], w_m) {
                        (true, Some(wd), Some(wm)) => Some(adapt_rvv(
                            wd,
                            wm,
                            config.gamma[i],
                            config.delta[i],
                            config.cov_floor,
                        )),
                        _ => None,
                    };
                    DetectorDiagnostics {
                        present,
                        md: r.map(|r| r.md),
                        w_m,
                        w_d: if present { w_d[i] } else { None },
                        rvv_scale: scale,
                    }
                })
                .collect();
            self.state = Some(state.clone());
            return Ok(Some(FusedEstimate {
                state,
                per_detector,
                frame,
                coasting: false,
            }));
        };
        let est = fusion_step(
            center,
            &self.model,
            reports,
            measurements,
            vote_points,
            frame,
            config,
        )?;
        self.state = Some(est.state.clone());
        Ok(Some(est))
    }
}

fn componentwise_median(xs: &[&DVector<f64>]) -> DVector<f64> {
    let p = xs[0].len();
    DVector::from_fn(p, |d, _| {
        let mut col: Vec<f64> = xs.iter().map(|x| x[d]).collect();
        col.sort_by(f64::total_cmp);
        let m = col.len();
        if m % 2 == 1 {
            col[m / 2]
        } else {
            0.5 * (col[m / 2 - 1] + col[m / 2])
        }
    })
}

/// Output of one pipeline tick.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineFrame {
    pub frame: u64,
    pub reports: Vec<Option<ExpertReport>>,
    pub fused: Option<FusedEstimate>,
}

/// `n` experts and one fusion center sharing a frame clock.
#[derive(Debug, Clone)]
pub struct Pipeline {
    experts: Vec<Expert>,
    center: FusionCenter,
    config: FusionConfig,
    frame: u64,
}

impl Pipeline {
    /// All experts and the center share `model`; `init_cov` is used whenever
    /// a filter starts from raw measurements.
    pub fn new(
        n_detectors: usize,
        model: LinearModel,
        init_cov: DMatrix<f64>,
        config: FusionConfig,
    ) -> Result<Self> {
        if n_detectors < MIN_DETECTORS {
            return Err(Error::InsufficientDetectors(n_detectors));
        }
        if config.n_detectors() != n_detectors {
            return Err(Error::DimensionMismatch {
                context: "fusion config detectors",
                expected: n_detectors,
                found: config.n_detectors(),
            });
        }
        config.validate()?;
        let experts = (0..n_detectors)
            .map(|_| Expert::new(model.clone(), init_cov.clone(), config.stale_after))
            .collect::<Result<Vec<_>>>()?;
        let center = FusionCenter::new(model, init_cov)?;
        Ok(Self {
            experts,
            center,
            config,
            frame: 0,
        })
    }

    /// Pipeline over `axes` random-acceleration coordinates.
    pub fn random_acceleration(
        n_detectors: usize,
        axes: usize,
        params: &ModelParams,
        config: FusionConfig,
    ) -> Result<Self> {
        let model = random_acceleration_model(axes, params.dt, params.accel_var, params.meas_var)?;
        let init = initial_covariance(&model, params.init_vel_var);
        Self::new(n_detectors, model, init, config)
    }

    /// Box-tracking pipeline with the 8-state model.
    pub fn for_boxes(
        n_detectors: usize,
        params: &ModelParams,
        config: FusionConfig,
    ) -> Result<Self> {
        Self::random_acceleration(n_detectors, TrackState::AXES, params, config)
    }

    pub fn n_detectors(&self) -> usize {
        self.experts.len()
    }

    pub fn n_experts(&self) -> usize {
        self.experts.len()
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn center(&self) -> &FusionCenter {
        &self.center
    }

    /// Frame index the next `step` will carry.
    pub fn frame(&self) -> u64 {
        self.frame
    }

    /// Advance every expert and the center by one frame. A measurement that
    /// arrives late is simply passed in on the current frame; it is scored
    /// against the current prediction.
    pub fn step(&mut self, measurements: &[Option<DVector<f64>>]) -> Result<PipelineFrame> {
        let n = self.experts.len();
        if measurements.len() != n {
            return Err(Error::DimensionMismatch {
                context: "pipeline measurements",
                expected: n,
                found: measurements.len(),
            });
        }
        let frame = self.frame;
        let reports = self
            .experts
            .iter_mut()
            .zip(measurements)
            .map(|(e, y)| e.step(frame, y.as_ref(), &self.config.expert))
            .collect::<Result<Vec<_>>>()?;

        let stacked: Vec<Option<DVector<f64>>> = match self.config.input {
            FusionInput::Measurement => measurements.to_vec(),
            FusionInput::ExpertEstimate => measurements
                .iter()
                .zip(&reports)
                .map(|(m, r)| match (m, r) {
                    (Some(_), Some(r)) => Some(&self.center.model.c * &r.posterior.mean),
                    _ => None,
                })
                .collect(),
        };
        let fused = self
            .center
            .step(frame, &reports, &stacked, measurements, &self.config)?;
        self.frame += 1;
        Ok(PipelineFrame {
            frame,
            reports,
            fused,
        })
    }

    pub fn step_boxes(&mut self, boxes: &[Option<BoundingBox>]) -> Result<PipelineFrame> {
        let ms: Vec<Option<DVector<f64>>> = boxes
            .iter()
            .map(|b| b.as_ref().map(BoundingBox::to_vector))
            .collect();
        self.step(&ms)
    }
}

/// `n` experts plus one center for box tracking (`n >= 3`).
pub fn make_pipeline(
    n_detectors: usize,
    params: &ModelParams,
    config: FusionConfig,
) -> Result<Pipeline> {
    Pipeline::for_boxes(n_detectors, params, config)
}
