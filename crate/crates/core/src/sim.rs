//! Simulation: a second-order plant observed by several faulty sensors and
//! fused by the two-level pipeline, plus a PID loop on an integrator plant
//! for closed-loop pan/tilt style demos.
//!
//! Every sensor draws from its own seeded ChaCha stream, so a run is a pure
//! function of its scenario and seed.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::expert::ExpertConfig;
use crate::filter::ModelParams;
use crate::fusion::{FusionConfig, FusionInput, Pipeline};
use crate::voting::VoteConfig;

/// `y'' + 2 zeta wn y' + wn^2 y = gain wn^2 u`, sampled every `dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SecondOrderPlant {
    pub natural_freq: f64,
    pub damping: f64,
    pub gain: f64,
    pub dt: f64,
}

impl SecondOrderPlant {
    pub fn validate(&self) -> Result<()> {
        if !(self.natural_freq > 0.0) || !self.natural_freq.is_finite() {
            return Err(invalid("natural_freq", "must be positive"));
        }
        if !(self.damping >= 0.0) || !self.damping.is_finite() {
            return Err(invalid("damping", "must be >= 0"));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(invalid("dt", "must be positive"));
        }
        if !self.gain.is_finite() {
            return Err(Error::NonFinite("plant gain"));
        }
        Ok(())
    }

    /// Continuous companion form `(A, B)` over the state `[y, y']`.
    pub fn continuous(&self) -> (Matrix2<f64>, Vector2<f64>) {
        let wn = self.natural_freq;
        let a = Matrix2::new(0.0, 1.0, -wn * wn, -2.0 * self.damping * wn);
        let b = Vector2::new(0.0, self.gain * wn * wn);
        (a, b)
    }

    /// Zero-order-hold discretization through the exponential of the
    /// augmented matrix `[[A, B], [0, 0]] dt`.
    pub fn discretize(&self) -> Result<DiscretePlant> {
        self.validate()?;
        let (a, b) = self.continuous();
        let mut aug = DMatrix::zeros(3, 3);
        for i in 0..2 {
            for j in 0..2 {
                aug[(i, j)] = a[(i, j)] * self.dt;
            }
            aug[(i, 2)] = b[i] * self.dt;
        }
        let e = aug.exp();
        Ok(DiscretePlant {
            ad: Matrix2::new(e[(0, 0)], e[(0, 1)], e[(1, 0)], e[(1, 1)]),
            bd: Vector2::new(e[(0, 2)], e[(1, 2)]),
        })
    }
}

/// Exact discrete-time form of a [`SecondOrderPlant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscretePlant {
    pub ad: Matrix2<f64>,
    pub bd: Vector2<f64>,
}

/// Plant state `[y, y']`.
pub type PlantState = Vector2<f64>;

impl DiscretePlant {
    /// One sample with the input held constant; returns the new state and its output.
    pub fn step(&self, state: &PlantState, input: f64) -> (PlantState, f64) {
        let next = self.ad * state + self.bd * input;
        (next, next[0])
    }
}

/// One sample of `plant` from `state`.
pub fn plant_step(
    plant: &SecondOrderPlant,
    state: &PlantState,
    input: f64,
) -> Result<(PlantState, f64)> {
    Ok(plant.discretize()?.step(state, input))
}

/// Faults applied to a clean signal:
/// `y[t] = clean[t] + N(0, sigma) + spike_mag * Bernoulli(spike_prob)
///         + drift_rate * t + shock_offset * [start <= t < end]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultProfile {
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub spike_prob: f64,
    #[serde(default)]
    pub spike_mag: f64,
    #[serde(default)]
    pub drift_rate: f64,
    #[serde(default)]
    pub shock_offset: f64,
    /// Half-open sample window `[start, end)` of the shock.
    #[serde(default)]
    pub shock_window: Option<(u64, u64)>,
    #[serde(default)]
    pub seed: u64,
}

impl FaultProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return Err(invalid("noise_sigma", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.spike_prob) {
            return Err(invalid(
                "spike_prob",
                format!("must lie in [0, 1], got {}", self.spike_prob),
            ));
        }
        if let Some((start, end)) = self.shock_window {
            if start > end {
                return Err(invalid(
                    "shock_window",
                    format!("start {start} after end {end}"),
                ));
            }
        }
        for (name, x) in [
            ("spike_mag", self.spike_mag),
            ("drift_rate", self.drift_rate),
            ("shock_offset", self.shock_offset),
        ] {
            if !x.is_finite() {
                return Err(invalid(name, "must be finite"));
            }
        }
        Ok(())
    }

    pub fn in_shock(&self, t: u64) -> bool {
        matches!(self.shock_window, Some((s, e)) if t >= s && t < e)
    }
}

/// Streaming fault generator; `inject_faults` is the batch form.
#[derive(Debug, Clone)]
pub struct FaultInjector {
    profile: FaultProfile,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    spike: Bernoulli,
    t: u64,
}

impl FaultInjector {
    pub fn new(profile: FaultProfile) -> Result<Self> {
        profile.validate()?;
        Ok(Self {
            noise: Normal::new(0.0, profile.noise_sigma)
                .map_err(|e| invalid("noise_sigma", e.to_string()))?,
            spike: Bernoulli::new(profile.spike_prob)
                .map_err(|e| invalid("spike_prob", e.to_string()))?,
            rng: ChaCha8Rng::seed_from_u64(profile.seed),
            profile,
            t: 0,
        })
    }

    /// Corrupt the next clean sample. Noise and spike are always drawn, in
    /// that order, so the stream does not depend on the profile values.
    pub fn apply(&mut self, clean: f64) -> f64 {
        let t = self.t;
        self.t += 1;
        let noise = self.noise.sample(&mut self.rng);
        let spike = self.spike.sample(&mut self.rng);
        let p = &self.profile;
        let mut y = clean + noise + p.drift_rate * t as f64;
        if spike {
            y += p.spike_mag;
        }
        if p.in_shock(t) {
            y += p.shock_offset;
        }
        y
    }
}

pub fn inject_faults(clean: &[f64], profile: &FaultProfile) -> Result<Vec<f64>> {
    let mut inj = FaultInjector::new(*profile)?;
    Ok(clean.iter().map(|&c| inj.apply(c)).collect())
}

/// Positional PID gains. `output_limit`, when set, clamps the command and
/// freezes the integrator while clamped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub dt: f64,
    #[serde(default)]
    pub output_limit: Option<f64>,
}

impl PidGains {
    /// Pan/tilt gains Kp = 35, Ki = 3.4, Kd = 8.
    pub fn pan_tilt(dt: f64) -> Self {
        Self {
            kp: 35.0,
            ki: 3.4,
            kd: 8.0,
            dt,
            output_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PidState {
    pub integral: f64,
    pub prev_error: f64,
}

/// Trapezoidal integral, backward-difference derivative.
pub fn pid_step(error: f64, state: &PidState, gains: &PidGains) -> (f64, PidState) {
    let integral = state.integral + 0.5 * gains.dt * (error + state.prev_error);
    let derivative = (error - state.prev_error) / gains.dt;
    let raw = gains.kp * error + gains.ki * integral + gains.kd * derivative;
    match gains.output_limit {
        Some(limit) if raw.abs() > limit => {
            let held = gains.kp * error + gains.ki * state.integral + gains.kd * derivative;
            (
                held.clamp(-limit, limit),
                PidState {
                    integral: state.integral,
                    prev_error: error,
                },
            )
        }
        _ => (
            raw,
            PidState {
                integral,
                prev_error: error,
            },
        ),
    }
}

/// Pan-axis model: the image offset integrates the command, `x' = gain u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorPlant {
    pub gain: f64,
}

/// Closed PID loop on an integrator plant: the target jumps by `step` at
/// t = 0 and the controller recenters it. Returns the error at every sample.
pub fn pan_step_response(
    gains: &PidGains,
    plant: IntegratorPlant,
    step: f64,
    samples: usize,
) -> Vec<f64> {
    let mut x = 0.0;
    let mut pid = PidState::default();
    let mut errors = Vec::with_capacity(samples);
    for _ in 0..samples {
        let e = step - x;
        errors.push(e);
        let (u, next) = pid_step(e, &pid, gains);
        pid = next;
        x += gains.dt * plant.gain * u;
    }
    errors
}

/// First time after which `|errors| <= tol * |step|` holds for good.
pub fn settling_time(errors: &[f64], dt: f64, step: f64, tol: f64) -> Option<f64> {
    let band = tol * step.abs();
    let last_out = errors.iter().rposition(|e| e.abs() > band);
    match last_out {
        None => Some(0.0),
        Some(i) if i + 1 < errors.len() => Some((i + 1) as f64 * dt),
        Some(_) => None,
    }
}

/// One piece of the set-point sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Segment {
    /// Jump to `level` and hold for `frames`.
    Step { level: f64, frames: u64 },
    /// Move linearly from the current level to `to` over `frames`.
    Ramp { to: f64, frames: u64 },
}

impl Segment {
    pub fn frames(&self) -> u64 {
        match self {
            Segment::Step { frames, .. } | Segment::Ramp { frames, .. } => *frames,
        }
    }
}

/// Repeating set-point sequence driving the plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointProfile {
    #[serde(default)]
    pub initial: f64,
    pub segments: Vec<Segment>,
}

impl SetpointProfile {
    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() || self.segments.iter().all(|s| s.frames() == 0) {
            return Err(invalid(
                "segments",
                "need at least one segment with frames > 0",
            ));
        }
        Ok(())
    }

    /// Length of one pass through the segments.
    pub fn period(&self) -> usize {
        self.segments.iter().map(|s| s.frames() as usize).sum()
    }

    /// Set-point samples `0..len`.
    pub fn sample(&self, len: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(len);
        let mut level = self.initial;
        'outer: loop {
            for seg in &self.segments {
                match *seg {
                    Segment::Step { level: l, frames } => {
                        level = l;
                        for _ in 0..frames {
                            if out.len() == len {
                                break 'outer;
                            }
                            out.push(level);
                        }
                    }
                    Segment::Ramp { to, frames } => {
                        let from = level;
                        for k in 1..=frames {
                            if out.len() == len {
                                break 'outer;
                            }
                            out.push(from + (to - from) * k as f64 / frames as f64);
                        }
                        level = to;
                    }
                }
            }
            if out.len() == len {
                break;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorSpec {
    pub name: String,
    pub faults: FaultProfile,
}

/// Everything needed for one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub frames: usize,
    pub seed: u64,
    pub plant: SecondOrderPlant,
    pub setpoint: SetpointProfile,
    pub sensors: Vec<SensorSpec>,
    pub model: ModelParams,
    pub fusion: FusionConfig,
}

impl Scenario {
    /// Three sensors in distinct fault regimes: one noisy, one drifting and
    /// one with spikes plus a shock over frames 100..180.
    pub fn fig3() -> Self {
        let sensors = vec![
            SensorSpec {
                name: "noisy".into(),
                faults: FaultProfile {
                    noise_sigma: 5.0,
                    ..FaultProfile::default()
                },
            },
            SensorSpec {
                name: "drift".into(),
                faults: FaultProfile {
                    noise_sigma: 1.5,
                    drift_rate: 0.03,
                    ..FaultProfile::default()
                },
            },
            SensorSpec {
                name: "spike_shock".into(),
                faults: FaultProfile {
                    noise_sigma: 1.5,
                    spike_prob: 0.05,
                    spike_mag: 40.0,
                    shock_offset: 40.0,
                    shock_window: Some((100, 180)),
                    ..FaultProfile::default()
                },
            },
        ];
        let n = sensors.len();
        Self {
            frames: 400,
            seed: 7,
            plant: SecondOrderPlant {
                natural_freq: 0.15,
                damping: 0.5,
                gain: 1.0,
                dt: 1.0,
            },
            setpoint: SetpointProfile {
                initial: 0.0,
                segments: vec![
                    Segment::Step {
                        level: 50.0,
                        frames: 100,
                    },
                    Segment::Ramp {
                        to: -30.0,
                        frames: 100,
                    },
                    Segment::Step {
                        level: 0.0,
                        frames: 100,
                    },
                    Segment::Ramp {
                        to: 60.0,
                        frames: 100,
                    },
                ],
            },
            sensors,
            model: ModelParams {
                dt: 1.0,
                accel_var: 1.0,
                meas_var: 4.0,
                init_vel_var: 10.0,
            },
            fusion: FusionConfig {
                gamma: vec![1.0; n],
                delta: vec![2.0; n],
                cov_floor: crate::fusion::DEFAULT_COV_FLOOR,
                stale_after: crate::fusion::DEFAULT_STALE_AFTER,
                input: FusionInput::Measurement,
                vote: VoteConfig {
                    omega0: 0.5,
                    omega: 10.0,
                    lambda: 15.0,
                    dim_scale: None,
                },
                expert: ExpertConfig::from_chi2(1, 0.95, false).expect("valid chi2 parameters"),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sensors.len() < crate::voting::MIN_DETECTORS {
            return Err(Error::InsufficientDetectors(self.sensors.len()));
        }
        if self.frames == 0 {
            return Err(invalid("frames", "must be positive"));
        }
        self.plant.validate()?;
        self.setpoint.validate()?;
        for s in &self.sensors {
            s.faults.validate()?;
        }
        if self.fusion.n_detectors() != self.sensors.len() {
            return Err(Error::DimensionMismatch {
                context: "gamma/delta per sensor",
                expected: self.sensors.len(),
                found: self.fusion.n_detectors(),
            });
        }
        self.fusion.validate()
    }
}

/// Independent seed for sensor `index` derived from the run seed (SplitMix64).
pub fn sensor_seed(run_seed: u64, index: usize) -> u64 {
    let mut z = run_seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything recorded for one simulated frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: u64,
    pub truth: f64,
    pub sensors: Vec<f64>,
    pub experts: Vec<f64>,
    pub w_m: Vec<f64>,
    pub w_d: Vec<f64>,
    pub rvv: Vec<f64>,
    pub fused: f64,
    pub fused_var: f64,
}

/// Error statistics of one signal against truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproachStats {
    pub approach: String,
    pub rmse: f64,
    pub mae: f64,
    pub max_abs_err: f64,
    /// Mean weights for detector rows and the fused row; `None` for experts.
    pub mean_w_m: Option<f64>,
    pub mean_w_d: Option<f64>,
    pub mean_rvv: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub sensor_names: Vec<String>,
    pub records: Vec<FrameRecord>,
}

impl SimRun {
    pub fn rmse_fused(&self) -> f64 {
        rmse(self.records.iter().map(|r| r.fused - r.truth))
    }

    pub fn rmse_sensor(&self, i: usize) -> f64 {
        rmse(self.records.iter().map(|r| r.sensors[i] - r.truth))
    }

    pub fn rmse_expert(&self, i: usize) -> f64 {
        rmse(self.records.iter().map(|r| r.experts[i] - r.truth))
    }

    /// Mean adapted noise scale of sensor `i` over frames `[start, end)`.
    pub fn mean_rvv(&self, i: usize, start: u64, end: u64) -> f64 {
        mean(
            self.records
                .iter()
                .filter(|r| r.frame >= start && r.frame < end)
                .map(|r| r.rvv[i]),
        )
    }

    /// Rows: `sensor_<name>` per sensor, `expert_<name>` per expert, `fused`.
    pub fn summary(&self) -> Vec<ApproachStats> {
        let n = self.sensor_names.len();
        let stats = |approach: String, errs: Vec<f64>| {
            let abs = errs.iter().map(|e| e.abs());
            ApproachStats {
                approach,
                rmse: rmse(errs.iter().copied()),
                mae: mean(abs.clone()),
                max_abs_err: abs.fold(0.0, f64::max),
                mean_w_m: None,
                mean_w_d: None,
                mean_rvv: None,
            }
        };
        let mut out = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            let mut s = stats(
                format!("sensor_{}", self.sensor_names[i]),
                self.records
                    .iter()
                    .map(|r| r.sensors[i] - r.truth)
                    .collect(),
            );
            s.mean_w_m = Some(mean(self.records.iter().map(|r| r.w_m[i])));
            s.mean_w_d = Some(mean(self.records.iter().map(|r| r.w_d[i])));
            s.mean_rvv = Some(mean(self.records.iter().map(|r| r.rvv[i])));
            out.push(s);
        }
        for i in 0..n {
            out.push(stats(
                format!("expert_{}", self.sensor_names[i]),
                self.records
                    .iter()
                    .map(|r| r.experts[i] - r.truth)
                    .collect(),
            ));
        }
        let mut fused = stats(
            "fused".into(),
            self.records.iter().map(|r| r.fused - r.truth).collect(),
        );
        fused.mean_w_m = Some(mean(
            self.records.iter().flat_map(|r| r.w_m.iter().copied()),
        ));
        fused.mean_w_d = Some(mean(
            self.records.iter().flat_map(|r| r.w_d.iter().copied()),
        ));
        fused.mean_rvv = Some(mean(
            self.records.iter().flat_map(|r| r.rvv.iter().copied()),
        ));
        out.push(fused);
        out
    }
}

fn rmse(errs: impl Iterator<Item = f64>) -> f64 {
    mean(errs.map(|e| e * e)).sqrt()
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Run the plant, corrupt each sensor, and feed the two-level pipeline.
pub fn run_sim_experiment(scenario: &Scenario) -> Result<SimRun> {
    scenario.validate()?;
    let n = scenario.sensors.len();
    let plant = scenario.plant.discretize()?;
    let setpoint = scenario.setpoint.sample(scenario.frames);
    let mut injectors = scenario
        .sensors
        .iter()
        .enumerate()
        .map(|(i, s)| {
            FaultInjector::new(FaultProfile {
                seed: sensor_seed(scenario.seed, i),
                ..s.faults
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut pipeline =
        Pipeline::random_acceleration(n, 1, &scenario.model, scenario.fusion.clone())?;

    let mut x = PlantState::zeros();
    let mut records = Vec::with_capacity(scenario.frames);
    for &u in &setpoint {
        let truth = x[0];
        let readings: Vec<f64> = injectors.iter_mut().map(|inj| inj.apply(truth)).collect();
        let ms: Vec<Option<DVector<f64>>> = readings
            .iter()
            .map(|&y| Some(DVector::from_element(1, y)))
            .collect();
        let out = pipeline.step(&ms)?;
        let fused = out.fused.ok_or(Error::EmptyInput(
            "fused estimate on a fully observed frame",
        ))?;
        let experts = out
            .reports
            .iter()
            .map(|r| r.as_ref().map_or(f64::NAN, |r| r.posterior.mean[0]))
            .collect();
        let pick = |f: fn(&crate::fusion::DetectorDiagnostics) -> Option<f64>| -> Vec<f64> {
            fused
                .per_detector
                .iter()
                .map(|d| f(d).unwrap_or(f64::NAN))
                .collect()
        };
        records.push(FrameRecord {
            frame: out.frame,
            truth,
            sensors: readings,
            experts,
            w_m: pick(|d| d.w_m),
            w_d: pick(|d| d.w_d),
            rvv: pick(|d| d.rvv_scale),
            fused: fused.state.mean[0],
            fused_var: fused.state.cov[(0, 0)],
        });
        x = plant.step(&x, u).0;
    }
    Ok(SimRun {
        sensor_names: scenario.sensors.iter().map(|s| s.name.clone()).collect(),
        records,
    })
}

/// Seeded standard-normal stream, shared by tests and examples that need
/// reproducible nominal data.
pub fn normal_stream(seed: u64) -> impl Iterator<Item = f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::iter::repeat_with(move || rng.sample(rand_distr::StandardNormal))
}
