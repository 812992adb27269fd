//! Deterministic kinematic simulator.
//!
//! A scripted policy answers observation windows at the policy rate, the
//! bridge schedules and streams its chunks, and the IK runs at the control
//! rate on a purely kinematic robot. Everything runs in virtual time, so a
//! scenario and seed fully determine the trajectory log.

mod episode;
mod metrics;
mod policy;
mod scenario;

use std::path::Path;

use thiserror::Error;

pub use episode::{
    default_look_at, desired_com_offset, run_episode, BridgeAudit, EpisodeResult, LogRow, TrajectoryLog, CAMERA_STREAM,
    PROPRIO_STREAM,
};
pub use metrics::{
    compare_runs, Check, CompareReport, ConstraintChecker, EpisodeMetrics, MetricDelta, MetricsReport, TickRecord,
    Violation, COLLISION_TOL, COM_TOL, POSITION_TOL, UPRIGHT_TOL, VELOCITY_TOL,
};
pub use policy::ScriptedPolicy;
pub use scenario::{
    GazeMode, PolicySpec, Scenario, BLOCKED_TARGET_JSON, BOX_CARRY_JSON, FIGURE_EIGHT_JSON, SEARCH_THEN_APPROACH_JSON,
    STATIC_TARGET_JSON,
};

use crate::bridge::BridgeError;
use crate::gaze::GazeError;
use crate::ik::IkError;
use crate::model::ModelError;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("scenario error: {0}")]
    Scenario(String),
    #[error("reports belong to different scenarios: `{0}` vs `{1}`")]
    ScenarioMismatch(String, String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ik(#[from] IkError),
    #[error(transparent)]
    Bridge(#[from] BridgeError),
    #[error(transparent)]
    Gaze(#[from] GazeError),
}

/// Loads the scenario's model and profile, runs it and builds the report.
/// `profile` overrides the scenario's profile reference.
pub fn run_scenario(
    scenario: &Scenario,
    base: Option<&Path>,
    profile: Option<crate::ik::IkProfile>,
) -> Result<(EpisodeResult, MetricsReport), SimError> {
    let model = scenario.load_model(base)?;
    let profile = match profile {
        Some(p) => p,
        None => scenario.load_profile(base)?,
    };
    let result = run_episode(scenario, &model, &profile)?;
    let report = MetricsReport {
        scenario: scenario.name.clone(),
        profile: profile.name.clone(),
        seed: scenario.seed,
        duration: scenario.duration,
        metrics: result.metrics.clone(),
        final_second: EpisodeMetrics::window(&result.records, scenario.duration - 1.0),
        bridge: result.audit.clone(),
    };
    Ok((result, report))
}
