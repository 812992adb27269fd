use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::ik::{com_offset_and_jacobian, IkProfile, UprightMode};
use crate::model::{GeneralizedState, Kinematics, RobotModel};

/// Slack below which a post-step constraint counts as violated.
pub const POSITION_TOL: f64 = 1e-9;
pub const VELOCITY_TOL: f64 = 1e-10;
pub const UPRIGHT_TOL: f64 = 1e-9;
pub const COM_TOL: f64 = 1e-6;
pub const COLLISION_TOL: f64 = 1e-6;

/// What happened on one IK tick, measured after integration.
#[derive(Clone, Debug, PartialEq)]
pub struct TickRecord {
    pub time: f64,
    pub pos_err: [f64; 2],
    pub rot_err: [f64; 2],
    pub gaze_err: f64,
    /// Torso-over-base offset minus its desired value.
    pub com_err: Vector2<f64>,
    pub dq: DVector<f64>,
    pub base_xy: [f64; 2],
    pub violations: Vec<Violation>,
    pub margin_min: f64,
    pub min_collision_distance: f64,
    pub gripper_distance: f64,
    pub infeasible: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub family: &'static str,
    pub index: usize,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub violations: Vec<Violation>,
    pub margin_min: f64,
    pub com_error: Vector2<f64>,
    pub min_collision_distance: f64,
}

/// Re-checks every controller constraint on the integrated state, independently
/// of the QP rows.
pub struct ConstraintChecker {
    position: Vec<Option<[f64; 2]>>,
    velocity: Vec<Option<f64>>,
    base: Option<[usize; 3]>,
    base_bound: [f64; 2],
    upright: Vec<usize>,
    upright_mode: UprightMode,
    r_star: Vector2<f64>,
    b: [f64; 2],
    d_safe: f64,
}

impl ConstraintChecker {
    pub fn new(model: &RobotModel, profile: &IkProfile, r_star: Vector2<f64>, dt: f64) -> Result<Self, SimError> {
        let s = profile.velocity_safety * dt;
        let upright = profile.upright_joints.iter().map(|j| model.coordinate(j)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            position: model.position_limits(),
            velocity: model.velocity_limits().into_iter().map(|v| v.map(|v| v * s)).collect(),
            base: model.base_joint().map(|b| {
                let i = model.q_index(b);
                [i, i + 1, i + 2]
            }),
            base_bound: [profile.base_vel_limits[0] * s, profile.base_vel_limits[1] * s],
            upright,
            upright_mode: profile.upright_mode,
            r_star,
            b: [profile.b_x, profile.b_y],
            d_safe: profile.d_safe,
        })
    }

    /// `kin` must be evaluated at `q_next`; `dq` is the applied displacement.
    pub fn check(&self, kin: &Kinematics<'_>, q_next: &GeneralizedState, dq: &DVector<f64>) -> Result<Check, SimError> {
        let mut violations = Vec::new();
        let mut margin_min = f64::INFINITY;
        let mut note = |family: &'static str, index: usize, slack: f64, tol: f64| {
            margin_min = margin_min.min(slack);
            if slack < -tol {
                violations.push(Violation { family, index, slack });
            }
        };
        for (i, lim) in self.position.iter().enumerate() {
            if let Some([lo, hi]) = lim {
                note("position", i, (hi - q_next[i]).min(q_next[i] - lo), POSITION_TOL);
            }
        }
        for (i, lim) in self.velocity.iter().enumerate() {
            if let Some(v) = lim {
                note("velocity", i, v - dq[i].abs(), VELOCITY_TOL);
            }
        }
        if let Some(base) = self.base {
            for (k, &i) in base.iter().enumerate() {
                let bound = if k < 2 { self.base_bound[0] } else { self.base_bound[1] };
                note("base_velocity", i, bound - dq[i].abs(), VELOCITY_TOL);
            }
        }
        let com_error = com_offset_and_jacobian(kin)?.0 - self.r_star;
        for axis in 0..2 {
            note("com", axis, self.b[axis] - com_error[axis].abs(), COM_TOL);
        }
        let mut min_collision_distance = f64::INFINITY;
        for (k, d) in kin.all_collision_distances().iter().enumerate() {
            min_collision_distance = min_collision_distance.min(d.distance);
            note("collision", k, d.distance - self.d_safe, COLLISION_TOL);
        }
        let upright_residual = match self.upright_mode {
            UprightMode::SumZero => self.upright.iter().map(|&i| dq[i]).sum::<f64>().abs(),
            UprightMode::IndividuallyFixed => self.upright.iter().map(|&i| dq[i].abs()).fold(0.0, f64::max),
        };
        if upright_residual > UPRIGHT_TOL {
            violations.push(Violation { family: "upright", index: 0, slack: -upright_residual });
        }
        Ok(Check { violations, margin_min, com_error, min_collision_distance })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub ticks: usize,
    pub ee_pos_rmse: f64,
    pub ee_rot_rmse: f64,
    pub gaze_error: f64,
    pub max_com_offset: f64,
    pub constraint_violations: usize,
    pub jerk_proxy: f64,
    pub base_path_length: f64,
    pub infeasible_ticks: usize,
    pub min_margin: f64,
    pub min_collision_distance: f64,
    /// Largest change of the inter-gripper distance from its first value.
    pub gripper_distance_deviation: f64,
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

impl EpisodeMetrics {
    /// `start_xy` is the base position before the first tick.
    pub fn from_records(records: &[TickRecord], start_xy: [f64; 2]) -> Self {
        if records.is_empty() {
            return Self::default();
        }
        let jerk = rms(records.windows(3).map(|w| (&w[2].dq - 2.0 * &w[1].dq + &w[0].dq).norm()));
        let mut path = 0.0;
        let mut prev = start_xy;
        for r in records {
            path += (r.base_xy[0] - prev[0]).hypot(r.base_xy[1] - prev[1]);
            prev = r.base_xy;
        }
        let d0 = records[0].gripper_distance;
        Self {
            ticks: records.len(),
            ee_pos_rmse: rms(records.iter().flat_map(|r| r.pos_err)),
            ee_rot_rmse: rms(records.iter().flat_map(|r| r.rot_err)),
            gaze_error: rms(records.iter().map(|r| r.gaze_err)),
            max_com_offset: records.iter().map(|r| r.com_err.amax()).fold(0.0, f64::max),
            constraint_violations: records.iter().map(|r| r.violations.len()).sum(),
            jerk_proxy: jerk,
            base_path_length: path,
            infeasible_ticks: records.iter().filter(|r| r.infeasible).count(),
            min_margin: records.iter().map(|r| r.margin_min).fold(f64::INFINITY, f64::min),
            min_collision_distance: records.iter().map(|r| r.min_collision_distance).fold(f64::INFINITY, f64::min),
            gripper_distance_deviation: records.iter().map(|r| (r.gripper_distance - d0).abs()).fold(0.0, f64::max),
        }
    }

    /// Metrics over ticks with `time >= from`.
    pub fn window(records: &[TickRecord], from: f64) -> Self {
        let start = records.partition_point(|r| r.time < from - 1e-9);
        let start_xy = if start == 0 { records.first().map_or([0.0; 2], |r| r.base_xy) } else { records[start - 1].base_xy };
        Self::from_records(&records[start..], start_xy)
    }

    /// Named scalar fields in a fixed order.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("ee_pos_rmse", self.ee_pos_rmse),
            ("ee_rot_rmse", self.ee_rot_rmse),
            ("gaze_error", self.gaze_error),
            ("max_com_offset", self.max_com_offset),
            ("constraint_violations", self.constraint_violations as f64),
            ("jerk_proxy", self.jerk_proxy),
            ("base_path_length", self.base_path_length),
            ("infeasible_ticks", self.infeasible_ticks as f64),
        ]
    }
}

/// The JSON written next to a trajectory log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub profile: String,
    pub seed: u64,
    pub duration: f64,
    pub metrics: EpisodeMetrics,
    /// Metrics over the last second of the episode.
    pub final_second: EpisodeMetrics,
    pub bridge: super::BridgeAudit,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Scenario(format!("bad metrics report: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    pub delta: f64,
    pub exceeded: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub tolerance: f64,
    pub deltas: Vec<MetricDelta>,
}

impl CompareReport {
    pub fn exceeded(&self) -> bool {
        self.deltas.iter().any(|d| d.exceeded)
    }
}

/// Per-metric `b − a`. Reports from different scenarios are not comparable.
pub fn compare_runs(a: &MetricsReport, b: &MetricsReport, tolerance: f64) -> Result<CompareReport, SimError> {
    if a.scenario != b.scenario {
        return Err(SimError::ScenarioMismatch(a.scenario.clone(), b.scenario.clone()));
    }
    let deltas = a
        .metrics
        .fields()
        .into_iter()
        .zip(b.metrics.fields())
        .map(|((name, va), (_, vb))| {
            let delta = vb - va;
            MetricDelta { metric: name.to_string(), a: va, b: vb, delta, exceeded: delta.abs() > tolerance }
        })
        .collect();
    Ok(CompareReport { scenario: a.scenario.clone(), tolerance, deltas })
}
