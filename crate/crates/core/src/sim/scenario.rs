use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::bridge::InferenceAccounting;
use crate::ik::IkProfile;
use crate::model::RobotModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PolicySpec {
    /// Both grippers held at a rigid displacement of their nominal poses.
    StaticTarget {
        #[serde(default)]
        shift: [f64; 3],
        #[serde(default)]
        yaw: f64,
        /// Absolute world positions overriding the shifted ones.
        #[serde(default)]
        left_position: Option<[f64; 3]>,
        #[serde(default)]
        right_position: Option<[f64; 3]>,
        #[serde(default)]
        look_at: Option<[f64; 3]>,
    },
    /// Mirrored figure-eight traced by both grippers in the lateral plane.
    FigureEightBimanual {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_period")]
        period: f64,
    },
    /// Grippers at a fixed offset in a box frame that is carried around.
    BoxCarry {
        #[serde(default = "default_carry_distance")]
        distance: f64,
        #[serde(default = "default_carry_yaw")]
        yaw_amplitude: f64,
        #[serde(default = "default_lift")]
        lift: f64,
        #[serde(default = "default_period")]
        period: f64,
    },
    /// Look-at sweeps across the scene, then the base carries the grippers
    /// toward the object.
    SearchThenApproach {
        #[serde(default = "default_sweep")]
        sweep_duration: f64,
        #[serde(default = "default_sweep_width")]
        sweep_width: f64,
        #[serde(default = "default_approach")]
        approach_distance: f64,
        #[serde(default = "default_approach_time")]
        approach_duration: f64,
        #[serde(default = "default_object")]
        object: [f64; 3],
    },
}

fn default_amplitude() -> f64 {
    0.1
}
fn default_period() -> f64 {
    5.0
}
fn default_carry_distance() -> f64 {
    0.4
}
fn default_carry_yaw() -> f64 {
    0.3
}
fn default_lift() -> f64 {
    0.1
}
fn default_sweep() -> f64 {
    4.0
}
fn default_sweep_width() -> f64 {
    1.2
}
fn default_approach() -> f64 {
    0.5
}
fn default_approach_time() -> f64 {
    3.0
}
fn default_object() -> [f64; 3] {
    [1.5, 0.0, 0.8]
}

/// How the look-at point reaches the neck.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GazeMode {
    /// Direct pan/tilt servo outside the QP.
    #[default]
    Servo,
    /// Head orientation cost inside the QP.
    Qp,
    /// Neck left alone.
    Off,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// `reference` or a path to a model document.
    #[serde(default = "default_model")]
    pub model: String,
    /// A bundled profile name or a path to a profile document.
    #[serde(default = "default_profile")]
    pub profile: String,
    pub policy: PolicySpec,
    /// Injected per-stream latency in seconds (`head` camera, `proprio`).
    #[serde(default)]
    pub latencies: BTreeMap<String, f64>,
    /// Whether the bridge corrects stamps by the injected latencies.
    #[serde(default = "default_true")]
    pub compensate_latency: bool,
    #[serde(default = "default_inference")]
    pub inference_time: f64,
    #[serde(default = "default_exec_latency")]
    pub execution_latency: f64,
    #[serde(default)]
    pub accounting: InferenceAccounting,
    /// Episode length in seconds.
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    /// Uniform receive-time jitter on camera frames, seconds; drawn from `seed`.
    #[serde(default)]
    pub timing_jitter: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_policy_rate")]
    pub policy_rate: f64,
    #[serde(default = "default_camera_rate")]
    pub camera_rate: f64,
    #[serde(default = "default_chunk_steps")]
    pub chunk_steps: usize,
    #[serde(default = "default_step_period")]
    pub step_period: f64,
    #[serde(default)]
    pub gaze: GazeMode,
}

fn default_true() -> bool {
    true
}
fn default_model() -> String {
    "reference".into()
}
fn default_profile() -> String {
    "laundry".into()
}
fn default_inference() -> f64 {
    0.15
}
fn default_exec_latency() -> f64 {
    0.05
}
fn default_dt() -> f64 {
    0.01
}
fn default_policy_rate() -> f64 {
    10.0
}
fn default_camera_rate() -> f64 {
    30.0
}
fn default_chunk_steps() -> usize {
    16
}
fn default_step_period() -> f64 {
    0.1
}

pub const STATIC_TARGET_JSON: &str = include_str!("../../data/scenarios/static_target.json");
pub const FIGURE_EIGHT_JSON: &str = include_str!("../../data/scenarios/figure_eight.json");
pub const BOX_CARRY_JSON: &str = include_str!("../../data/scenarios/box_carry.json");
pub const SEARCH_THEN_APPROACH_JSON: &str = include_str!("../../data/scenarios/search_then_approach.json");
pub const BLOCKED_TARGET_JSON: &str = include_str!("../../data/scenarios/blocked_target.json");

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("scenario serializes");
        s.push('\n');
        s
    }

    /// Bundled scenarios by name.
    pub fn bundled(name: &str) -> Option<Self> {
        let text = match name {
            "static-target" => STATIC_TARGET_JSON,
            "figure-eight" => FIGURE_EIGHT_JSON,
            "box-carry" => BOX_CARRY_JSON,
            "search-then-approach" => SEARCH_THEN_APPROACH_JSON,
            "blocked-target" => BLOCKED_TARGET_JSON,
            _ => return None,
        };
        Some(Self::from_json(text).expect("bundled scenario"))
    }

    pub fn bundled_names() -> [&'static str; 5] {
        ["static-target", "figure-eight", "box-carry", "search-then-approach", "blocked-target"]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::Scenario(m.to_string()));
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return bad("duration must be >= 0");
        }
        if !(self.dt > 0.0) {
            return bad("dt must be > 0");
        }
        if !(self.policy_rate > 0.0 && self.camera_rate > 0.0 && self.step_period > 0.0) {
            return bad("rates and step period must be > 0");
        }
        if self.chunk_steps == 0 || self.chunk_steps > crate::bridge::MAX_CHUNK_STEPS {
            return bad("chunk_steps must lie in 1..=32");
        }
        if self.latencies.values().any(|l| !(*l >= 0.0)) {
            return bad("latencies must be >= 0");
        }
        if !(self.inference_time >= 0.0 && self.execution_latency >= 0.0 && self.timing_jitter >= 0.0) {
            return bad("timing parameters must be >= 0");
        }
        Ok(())
    }

    pub fn latency(&self, stream: &str) -> f64 {
        self.latencies.get(stream).copied().unwrap_or(0.0)
    }

    /// Resolves the model reference; relative paths are taken from `base`.
    pub fn load_model(&self, base: Option<&Path>) -> Result<RobotModel, SimError> {
        if self.model == "reference" {
            return Ok(RobotModel::reference());
        }
        let text = std::fs::read_to_string(resolve(base, &self.model))?;
        Ok(crate::model::load_model(&text)?)
    }

    pub fn load_profile(&self, base: Option<&Path>) -> Result<IkProfile, SimError> {
        if let Some(p) = IkProfile::bundled(&self.profile) {
            return Ok(p);
        }
        let text = std::fs::read_to_string(resolve(base, &self.profile))?;
        Ok(IkProfile::from_json(&text)?)
    }
}

fn resolve(base: Option<&Path>, path: &str) -> PathBuf {
    match base {
        Some(b) if Path::new(path).is_relative() => b.join(path),
        _ => PathBuf::from(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_load() {
        for name in Scenario::bundled_names() {
            let s = Scenario::bundled(name).unwrap();
            s.load_model(None).unwrap();
            s.load_profile(None).unwrap();
        }
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(Scenario::from_json(r#"{"name":"x","policy":{"type":"static-target"},"duration":-1}"#).is_err());
        assert!(Scenario::from_json(r#"{"name":"x","policy":{"type":"static-target"},"duration":1,"bogus":1}"#).is_err());
        assert!(Scenario::from_json(r#"{"name":"x","policy":{"type":"juggle"},"duration":1}"#).is_err());
        let s = Scenario::from_json(r#"{"name":"x","policy":{"type":"static-target"},"duration":1}"#).unwrap();
        assert_eq!((s.dt, s.chunk_steps, s.gaze), (0.01, 16, GazeMode::Servo));
    }
}
