//! Run configuration in TOML.
//!
//! ```toml
//! seed = 7
//! frames = 400
//!
//! [model]
//! dt = 1.0
//! accel_var = 1.0
//! meas_var = 4.0
//!
//! [expert]
//! dof = 4            # or `xi = 3.08`
//! confidence = 0.95
//!
//! [vote]
//! omega0 = 1.0
//! omega = 1.0
//! lambda = 50.0
//!
//! [fusion]
//! gamma = 1.0        # scalar broadcast to every detector, or a list
//! delta = [1.0, 1.0, 2.0]
//!
//! [plant]            # simulation only
//! natural_freq = 0.15
//! damping = 0.5
//! gain = 1.0
//! dt = 1.0
//!
//! [signal]
//! initial = 0.0
//! [[signal.segments]]
//! kind = "step"
//! level = 50.0
//! frames = 100
//!
//! [[sensor]]
//! name = "noisy"
//! noise_sigma = 5.0
//! ```
//!
//! Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use habdf_core::expert::{chi2_xi, DEFAULT_CONFIDENCE, DEFAULT_DOF};
use habdf_core::fusion::{DEFAULT_COV_FLOOR, DEFAULT_STALE_AFTER};
use habdf_core::sim::{FaultProfile, SensorSpec, SetpointProfile};
use habdf_core::{
    ExpertConfig, FusionConfig, FusionInput, ModelParams, Scenario, SecondOrderPlant, VoteConfig,
};
use serde::Deserialize;

use crate::error::{CliError, Result};

pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub frames: Option<usize>,
    /// Output directory used when `--out` is not given.
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub model: ModelParams,
    #[serde(default)]
    pub expert: ExpertSection,
    #[serde(default)]
    pub vote: VoteConfig,
    #[serde(default)]
    pub fusion: FusionSection,
    pub plant: Option<SecondOrderPlant>,
    pub signal: Option<SetpointProfile>,
    #[serde(default, rename = "sensor")]
    pub sensors: Vec<SensorSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertSection {
    /// Sigmoid offset; mutually exclusive with `dof`/`confidence`.
    pub xi: Option<f64>,
    pub dof: Option<u32>,
    pub confidence: Option<f64>,
    #[serde(default)]
    pub diag_approx: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum PerDetector {
    Scalar(f64),
    List(Vec<f64>),
}

impl PerDetector {
    fn expand(&self, name: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
        match self {
            PerDetector::Scalar(x) => Ok(vec![*x; n]),
            PerDetector::List(xs) if xs.len() == n => Ok(xs.clone()),
            PerDetector::List(xs) => Err(format!(
                "fusion.{name} lists {} values for {n} detectors",
                xs.len()
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    #[serde(default = "unit")]
    pub gamma: PerDetector,
    #[serde(default = "unit")]
    pub delta: PerDetector,
    #[serde(default = "default_cov_floor")]
    pub cov_floor: f64,
    #[serde(default = "default_stale_after")]
    pub stale_after: u32,
    #[serde(default)]
    pub input: FusionInput,
}

fn unit() -> PerDetector {
    PerDetector::Scalar(1.0)
}
fn default_cov_floor() -> f64 {
    DEFAULT_COV_FLOOR
}
fn default_stale_after() -> u32 {
    DEFAULT_STALE_AFTER
}

impl Default for FusionSection {
    fn default() -> Self {
        Self {
            gamma: unit(),
            delta: unit(),
            cov_floor: DEFAULT_COV_FLOOR,
            stale_after: DEFAULT_STALE_AFTER,
            input: FusionInput::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSection {
    pub name: String,
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
    /// `[start, end)` in frames.
    pub shock_window: Option<(u64, u64)>,
}

/// Reads a config file, naming the path in every error.
pub fn load_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.parse::<toml::Table>()
        .map_err(|e| CliError::config(path, e.to_string()))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    /// `origin` is only used in diagnostics.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::config(origin, e.to_string()))
    }

    pub fn from_table(table: toml::Table, origin: &Path) -> Result<Self> {
        RunConfig::deserialize(table).map_err(|e| CliError::config(origin, e.to_string()))
    }

    pub fn expert_config(&self, origin: &Path) -> Result<ExpertConfig> {
        let e = &self.expert;
        let xi = match (e.xi, e.dof, e.confidence) {
            (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                return Err(CliError::config(
                    origin,
                    "expert: give either `xi` or `dof`/`confidence`, not both",
                ))
            }
            (Some(xi), None, None) => xi,
            (None, dof, conf) => chi2_xi(
                dof.unwrap_or(DEFAULT_DOF),
                conf.unwrap_or(DEFAULT_CONFIDENCE),
            )
            .map_err(|err| CliError::config(origin, format!("expert: {err}")))?,
        };
        ExpertConfig::new(xi, e.diag_approx)
            .map_err(|err| CliError::config(origin, format!("expert: {err}")))
    }

    /// Fusion parameters for `n` detectors.
    pub fn fusion_config(&self, n: usize, origin: &Path) -> Result<FusionConfig> {
        let f = &self.fusion;
        let gamma = f
            .gamma
            .expand("gamma", n)
            .map_err(|m| CliError::config(origin, m))?;
        let delta = f
            .delta
            .expand("delta", n)
            .map_err(|m| CliError::config(origin, m))?;
        let config = FusionConfig {
            gamma,
            delta,
            cov_floor: f.cov_floor,
            stale_after: f.stale_after,
            input: f.input,
            vote: self.vote.clone(),
            expert: self.expert_config(origin)?,
        };
        if n >= habdf_core::voting::MIN_DETECTORS {
            config
                .validate()
                .map_err(|err| CliError::config(origin, err.to_string()))?;
        }
        Ok(config)
    }

    pub fn seed(&self, override_seed: Option<u64>) -> u64 {
        override_seed.or(self.seed).unwrap_or(DEFAULT_SEED)
    }

    /// Simulation scenario; needs `[plant]`, `[signal]` and three or more `[[sensor]]`.
    pub fn scenario(&self, override_seed: Option<u64>, origin: &Path) -> Result<Scenario> {
        let missing =
            |what: &str| CliError::config(origin, format!("simulation needs a [{what}] section"));
        let plant = self.plant.ok_or_else(|| missing("plant"))?;
        let setpoint = self.signal.clone().ok_or_else(|| missing("signal"))?;
        if self.sensors.len() < habdf_core::voting::MIN_DETECTORS {
            return Err(CliError::config(
                origin,
                format!(
                    "simulation needs at least 3 [[sensor]] entries for consensus, got {}",
                    self.sensors.len()
                ),
            ));
        }
        let sensors = self
            .sensors
            .iter()
            .map(|s| SensorSpec {
                name: s.name.clone(),
                faults: FaultProfile {
                    noise_sigma: s.noise_sigma,
                    spike_prob: s.spike_prob,
                    spike_mag: s.spike_mag,
                    drift_rate: s.drift_rate,
                    shock_offset: s.shock_offset,
                    shock_window: s.shock_window,
                    seed: 0,
                },
            })
            .collect::<Vec<_>>();
        let scenario = Scenario {
            frames: self.frames.unwrap_or(setpoint.period()),
            seed: self.seed(override_seed),
            plant,
            setpoint,
            model: self.model,
            fusion: self.fusion_config(sensors.len(), origin)?,
            sensors,
        };
        scenario
            .validate()
            .map_err(|err| CliError::config(origin, err.to_string()))?;
        Ok(scenario)
    }
}
