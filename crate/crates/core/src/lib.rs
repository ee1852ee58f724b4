//! Hierarchical adaptive Bayesian fusion of redundant detectors.
//!
//! A bank of Kalman-filter *experts*, one per detector, scores each
//! measurement with a Mahalanobis distance and turns it into a sigmoid
//! penalty `w_M`. A softened majority vote over the detectors' boxes yields a
//! second penalty `w_d`. A fusion-center Kalman filter stacks all present
//! measurements and sets each detector's noise block to
//! `gamma_i w_d + delta_i w_M`, so faulty detectors fade out smoothly.
//!
//! Modules:
//! - [`filter`]: linear Kalman filter and the random-acceleration track model
//! - [`expert`]: Mahalanobis scoring and the local penalty
//! - [`voting`]: nearest-peer consensus and the tanh penalty
//! - [`fusion`]: adaptive fusion center and the full pipeline
//! - [`sim`]: second-order plant, fault injection, PID loop, experiments
//! - [`metrics`]: Jaccard, distance and success rate against ground truth

// `!(x > 0.0)` is used on purpose throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod expert;
pub mod filter;
pub mod fusion;
pub mod metrics;
pub mod sim;
pub mod voting;

pub use error::{Error, Result};
pub use expert::{
    chi2_xi, local_weight, mahalanobis, mahalanobis_diag, Expert, ExpertConfig, ExpertReport,
};
pub use filter::{
    build_track_model, kf_predict, kf_update, GaussianState, LinearModel, ModelParams, TrackState,
};
pub use fusion::{
    adapt_rvv, fusion_step, make_pipeline, DetectorDiagnostics, FusedEstimate, FusionCenter,
    FusionConfig, FusionInput, Pipeline, PipelineFrame,
};
pub use metrics::{gt_distance, jaccard, success, summarize, ApproachSummary, FrameEval};
pub use sim::{
    inject_faults, pid_step, run_sim_experiment, FaultProfile, PidGains, Scenario,
    SecondOrderPlant, SimRun,
};
pub use voting::{box_distance, consensus_distance, vote_weight, BoundingBox, VoteConfig};

pub use nalgebra::{DMatrix, DVector};
