use std::collections::VecDeque;
use std::io::Write;

use nalgebra::{DVector, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::metrics::{EpisodeMetrics, TickRecord};
use super::policy::ScriptedPolicy;
use super::scenario::{GazeMode, Scenario};
use super::SimError;
use crate::bridge::{
    schedule_actions, ActionChunk, AlignConfig, Aligner, Emission, Payload, SampleStream, SchedulePolicy, ScheduledBuffer,
    StreamKind, Target, TargetStreamer, TimestampedSample, COMMAND_DURATION, TIME_EPS,
};
use crate::gaze::{gaze_error, look_at_rotation, NeckServo, WORLD_UP};
use crate::ik::{com_offset_and_jacobian, IkProfile, QpStatus, TrackingTargets, WholeBodyIk, LEFT_EE, RIGHT_EE};
use crate::model::{GeneralizedState, GeneralizedVelocity, RobotModel};
use crate::se3::Pose;

pub const CAMERA_STREAM: &str = "head";
pub const PROPRIO_STREAM: &str = "proprio";

/// One CSV row.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRow {
    pub tick: usize,
    pub time: f64,
    pub q: Vec<f64>,
    pub ee_l: [f64; 7],
    pub ee_r: [f64; 7],
    pub lookat: [f64; 3],
    pub margin_min: f64,
    pub com: [f64; 2],
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrajectoryLog {
    pub n_v: usize,
    pub rows: Vec<LogRow>,
}

impl TrajectoryLog {
    pub fn header(n_v: usize) -> String {
        let mut cols: Vec<String> = vec!["tick".into(), "time".into()];
        cols.extend((0..n_v).map(|i| format!("q_{i}")));
        for side in ["ee_l", "ee_r"] {
            cols.extend(["x", "y", "z", "qw", "qx", "qy", "qz"].iter().map(|c| format!("{side}_{c}")));
        }
        cols.extend(["lookat_x", "lookat_y", "lookat_z", "margin_min", "com_dx", "com_dy"].map(String::from));
        cols.join(",")
    }

    /// Floats use the shortest representation that round-trips.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", Self::header(self.n_v))?;
        for r in &self.rows {
            let mut line = format!("{},{}", r.tick, r.time);
            for v in r.q.iter().chain(&r.ee_l).chain(&r.ee_r).chain(&r.lookat).chain([&r.margin_min]).chain(&r.com) {
                line.push(',');
                line.push_str(&v.to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Discard-rule audit over an episode.
#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BridgeAudit {
    pub chunks: usize,
    pub discarded_steps: usize,
    pub superseded_steps: usize,
    /// Emissions sourced from a step earlier than its earliest feasible time.
    pub infeasible_sources: usize,
    pub stale_warnings: usize,
}

#[derive(Clone, Debug)]
pub struct EpisodeResult {
    pub metrics: EpisodeMetrics,
    pub log: TrajectoryLog,
    pub records: Vec<TickRecord>,
    pub emissions: Vec<Emission>,
    pub audit: BridgeAudit,
    pub infeasible_ticks: usize,
    pub profile: IkProfile,
}

struct InFlight {
    due: f64,
    sent: f64,
    chunk: ActionChunk,
}

/// Torso-over-base offset the controller aims for.
pub fn desired_com_offset(model: &RobotModel, profile: &IkProfile) -> Result<Vector2<f64>, SimError> {
    Ok(match profile.com_offset {
        Some(r) => Vector2::new(r[0], r[1]),
        None => com_offset_and_jacobian(&model.kinematics(model.nominal_posture())?)?.0,
    })
}

/// Runs a scenario in virtual time starting from the nominal posture.
pub fn run_episode(scenario: &Scenario, model: &RobotModel, profile: &IkProfile) -> Result<EpisodeResult, SimError> {
    scenario.validate()?;
    profile.validate()?;
    let dt = scenario.dt;
    let n_ticks = (scenario.duration / dt).round() as usize;
    let mut q = model.nominal_posture().clone();

    let servo = match scenario.gaze {
        GazeMode::Qp => None,
        _ => NeckServo::reference(model).ok(),
    };
    let mut ik_profile = profile.clone();
    if scenario.gaze != GazeMode::Qp {
        // The neck is driven outside the QP (or not at all).
        for j in ["head_0", "head_1"] {
            if model.joint_index(j).is_some() && !ik_profile.frozen_joints.iter().any(|f| f == j) {
                ik_profile.frozen_joints.push(j.to_string());
            }
        }
    }
    let mut ik = WholeBodyIk::new(ik_profile.clone());

    let kin0 = model.kinematics(&q)?;
    let policy = ScriptedPolicy::new(scenario.policy.clone(), kin0.pose(LEFT_EE), kin0.pose(RIGHT_EE));
    let first = policy.action_at(0.0);
    let mut streamer = TargetStreamer::new(Target {
        left: kin0.pose(LEFT_EE),
        right: kin0.pose(RIGHT_EE),
        look_at: first.look_at,
        widths: first.widths,
    });
    drop(kin0);

    let latencies = [CAMERA_STREAM, PROPRIO_STREAM]
        .into_iter()
        .map(|s| (s.to_string(), if scenario.compensate_latency { scenario.latency(s) } else { 0.0 }))
        .collect();
    let mut aligner = Aligner::new(AlignConfig { rate: scenario.policy_rate, depth: 2, latencies });
    let mut camera = SampleStream::new(CAMERA_STREAM, StreamKind::Camera, 64);
    let mut proprio = SampleStream::new(PROPRIO_STREAM, StreamKind::Proprio, 64);
    let schedule = SchedulePolicy {
        execution_latency: scenario.execution_latency,
        command_duration: COMMAND_DURATION,
        accounting: scenario.accounting,
    };
    let mut buffer = ScheduledBuffer::new();
    let mut in_flight: VecDeque<InFlight> = VecDeque::new();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut next_frame = 0usize;
    let mut last_receive = f64::NEG_INFINITY;
    let mut pending_receive: Option<f64> = None;
    let mut next_request = 0usize;

    let r_star = desired_com_offset(model, profile)?;
    let checker = super::metrics::ConstraintChecker::new(model, &ik_profile, r_star, dt)?;
    let mut log = TrajectoryLog { n_v: model.n_v(), rows: Vec::with_capacity(n_ticks) };
    let mut records = Vec::with_capacity(n_ticks);
    let mut emissions = Vec::with_capacity(n_ticks);
    let mut audit = BridgeAudit::default();
    let mut infeasible_ticks = 0;

    for tick in 0..n_ticks {
        let now = tick as f64 * dt;

        // Sensor ingestion.
        loop {
            let receive = *pending_receive.get_or_insert_with(|| {
                let capture = next_frame as f64 / scenario.camera_rate;
                let jitter = if scenario.timing_jitter > 0.0 { rng.gen_range(0.0..scenario.timing_jitter) } else { 0.0 };
                capture + scenario.latency(CAMERA_STREAM) + jitter
            });
            if receive > now + TIME_EPS {
                break;
            }
            pending_receive = None;
            if receive > last_receive {
                camera.push(TimestampedSample {
                    stream_id: CAMERA_STREAM.into(),
                    capture_time: receive,
                    payload: Payload::FrameRef(format!("{CAMERA_STREAM}/{next_frame}")),
                })?;
                last_receive = receive;
            }
            next_frame += 1;
        }
        proprio.push(TimestampedSample {
            stream_id: PROPRIO_STREAM.into(),
            capture_time: now + scenario.latency(PROPRIO_STREAM),
            payload: Payload::Proprio(q.as_slice().to_vec()),
        })?;

        // Responses that have arrived.
        while in_flight.front().is_some_and(|f| f.due <= now + TIME_EPS) {
            let f = in_flight.pop_front().expect("checked");
            let r = schedule_actions(&mut buffer, &f.chunk, &Pose::identity(), now, now - f.sent, &schedule)?;
            audit.chunks += 1;
            audit.discarded_steps += r.discarded;
            audit.superseded_steps += r.superseded;
        }

        // Policy requests at the policy rate; round trips overlap freely.
        if now + TIME_EPS >= next_request as f64 / scenario.policy_rate && !camera.samples().is_empty() {
            next_request += 1;
            if let Some(window) = aligner.next_window(&[camera.clone(), proprio.clone()])? {
                audit.stale_warnings += window.warnings.len();
                let chunk = policy.chunk(window.final_anchor(), scenario.chunk_steps, scenario.step_period);
                in_flight.push_back(InFlight { due: now + scenario.inference_time, sent: now, chunk });
            }
        }

        // Stream, solve, integrate.
        let emission = streamer.emit(&mut buffer, now);
        if let Some(src) = emission.source {
            if src.t < src.earliest_feasible - TIME_EPS {
                audit.infeasible_sources += 1;
            }
        }
        let head_rotation = if scenario.gaze == GazeMode::Qp {
            let head = model.kinematics(&q)?.pose("head");
            look_at_rotation(&head.translation, &head.rotation, &emission.target.look_at, &WORLD_UP).ok()
        } else {
            None
        };
        let targets = TrackingTargets { left_ee: emission.target.left, right_ee: emission.target.right, head_rotation };
        let step = ik.step(model, &q, &targets, dt)?;
        if step.diagnostics.status == QpStatus::Infeasible {
            infeasible_ticks += 1;
        }
        let mut q_next = step.q_next;
        if let (GazeMode::Servo, Some(servo)) = (scenario.gaze, &servo) {
            servo.step(model, &mut q_next, &emission.target.look_at, dt * ik_profile.velocity_safety)?;
        }
        let dq = actual_dq(model, &q, &q_next, &step.dq);

        let kin = model.kinematics(&q_next)?;
        let ee_l = kin.pose(LEFT_EE);
        let ee_r = kin.pose(RIGHT_EE);
        let check = checker.check(&kin, &q_next, &dq)?;
        let head = kin.pose("head");
        let record = TickRecord {
            time: now,
            pos_err: [
                (ee_l.translation - emission.target.left.translation).norm(),
                (ee_r.translation - emission.target.right.translation).norm(),
            ],
            rot_err: [
                ee_l.rotation.angle_to(&emission.target.left.rotation),
                ee_r.rotation.angle_to(&emission.target.right.rotation),
            ],
            gaze_err: gaze_error(&head, &emission.target.look_at),
            com_err: check.com_error,
            dq: dq.clone(),
            base_xy: base_xy(model, &q_next),
            violations: check.violations,
            margin_min: check.margin_min,
            min_collision_distance: check.min_collision_distance,
            gripper_distance: (ee_l.translation - ee_r.translation).norm(),
            infeasible: step.diagnostics.status == QpStatus::Infeasible,
        };
        log.rows.push(LogRow {
            tick,
            time: now,
            q: q_next.as_slice().to_vec(),
            ee_l: ee_l.to_array(),
            ee_r: ee_r.to_array(),
            lookat: [emission.target.look_at.x, emission.target.look_at.y, emission.target.look_at.z],
            margin_min: check.margin_min,
            com: [check.com_error.x, check.com_error.y],
        });
        drop(kin);
        records.push(record);
        emissions.push(emission);
        q = q_next;
    }

    let start_xy = base_xy(model, model.nominal_posture());
    let metrics = EpisodeMetrics::from_records(&records, start_xy);
    Ok(EpisodeResult { metrics, log, records, emissions, audit, infeasible_ticks, profile: profile.clone() })
}

fn base_xy(model: &RobotModel, q: &GeneralizedState) -> [f64; 2] {
    match model.base_joint() {
        Some(b) => {
            let s = model.q_index(b);
            [q[s], q[s + 1]]
        }
        None => [0.0, 0.0],
    }
}

/// Per-tick displacement actually applied, including the neck servo. The
/// base yaw uses the solver's value so wrapping does not show up as motion.
fn actual_dq(model: &RobotModel, q: &GeneralizedState, q_next: &GeneralizedState, solved: &GeneralizedVelocity) -> DVector<f64> {
    let mut dq = &q_next.0 - &q.0;
    if let Some(b) = model.base_joint() {
        let yaw = model.q_index(b) + 2;
        dq[yaw] = solved[yaw];
    }
    dq
}

/// Look-at point straight ahead of the head at the nominal posture.
pub fn default_look_at(model: &RobotModel) -> Result<Vector3<f64>, SimError> {
    let head = model.kinematics(model.nominal_posture())?.pose("head");
    Ok(head.transform_point(&Vector3::new(0.0, 0.0, 1.0)))
}
