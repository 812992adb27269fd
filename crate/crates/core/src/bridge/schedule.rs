use std::collections::VecDeque;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::action::ActionChunk;
use super::BridgeError;
use crate::se3::Pose;

/// Interpolation window of each streamed command.
pub const COMMAND_DURATION: f64 = 0.1;
/// Slack for comparing timestamps built by different float sums.
pub const TIME_EPS: f64 = 1e-9;

/// One scheduled command: reach these targets at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedPoseCommand {
    pub t: f64,
    pub duration: f64,
    pub left: Pose,
    pub right: Pose,
    pub look_at: Vector3<f64>,
    pub widths: [f64; 2],
    /// Earliest feasible execution time of the chunk this came from.
    pub earliest_feasible: f64,
    pub chunk_anchor: f64,
}

impl TimedPoseCommand {
    /// Start of the interpolation segment that ends at `t`.
    pub fn start(&self) -> f64 {
        self.t - self.duration
    }
}

/// How inference time enters the earliest feasible execution time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceAccounting {
    /// `now` is taken when the chunk is received, so inference has already
    /// elapsed.
    #[default]
    ElapsedByReceipt,
    /// `now` is the request time and the inference time is an estimate added
    /// on top.
    Estimated,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchedulePolicy {
    pub execution_latency: f64,
    pub command_duration: f64,
    pub accounting: InferenceAccounting,
}

impl Default for SchedulePolicy {
    fn default() -> Self {
        Self { execution_latency: 0.0, command_duration: COMMAND_DURATION, accounting: InferenceAccounting::default() }
    }
}

impl SchedulePolicy {
    pub fn earliest_feasible(&self, now: f64, inference_time: f64) -> f64 {
        match self.accounting {
            InferenceAccounting::ElapsedByReceipt => now + self.execution_latency,
            InferenceAccounting::Estimated => now + inference_time + self.execution_latency,
        }
    }
}

/// Time-ordered pending commands.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScheduledBuffer {
    pending: VecDeque<TimedPoseCommand>,
}

impl ScheduledBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TimedPoseCommand> {
        self.pending.iter()
    }

    pub fn times(&self) -> Vec<f64> {
        self.pending.iter().map(|c| c.t).collect()
    }

    /// Inserts a single command, keeping time order.
    pub fn push(&mut self, cmd: TimedPoseCommand) {
        let at = self.pending.partition_point(|c| c.t <= cmd.t);
        self.pending.insert(at, cmd);
    }

    pub(crate) fn front(&self) -> Option<&TimedPoseCommand> {
        self.pending.front()
    }

    pub(crate) fn pop_front(&mut self) -> Option<TimedPoseCommand> {
        self.pending.pop_front()
    }

    pub fn clear(&mut self) {
        self.pending.clear();
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub earliest_feasible: f64,
    pub kept: usize,
    pub discarded: usize,
    /// Previously buffered commands replaced by this chunk.
    pub superseded: usize,
}

/// Drops chunk steps that can no longer be executed on time and merges the
/// rest into `buffer`, replacing any buffered overlap.
///
/// When nothing survives the filter the buffer is left untouched and a
/// warning is logged.
pub fn schedule_actions(
    buffer: &mut ScheduledBuffer,
    chunk: &ActionChunk,
    frame_in_world: &Pose,
    now: f64,
    inference_time: f64,
    policy: &SchedulePolicy,
) -> Result<ScheduleReport, BridgeError> {
    let steps = chunk.decode_steps(frame_in_world)?;
    let earliest = policy.earliest_feasible(now, inference_time);
    let kept: Vec<TimedPoseCommand> = steps
        .into_iter()
        .filter(|(t, _)| *t >= earliest - TIME_EPS)
        .map(|(t, a)| TimedPoseCommand {
            t,
            duration: policy.command_duration,
            left: a.left,
            right: a.right,
            look_at: a.look_at,
            widths: a.widths,
            earliest_feasible: earliest,
            chunk_anchor: chunk.anchor_time,
        })
        .collect();
    let discarded = chunk.steps.len() - kept.len();
    let Some(first) = kept.first().map(|c| c.t) else {
        log::warn!("chunk anchored at {} fully discarded (earliest feasible {earliest})", chunk.anchor_time);
        return Ok(ScheduleReport { earliest_feasible: earliest, kept: 0, discarded, superseded: 0 });
    };
    let before = buffer.pending.len();
    buffer.pending.retain(|c| c.t < first - TIME_EPS);
    let superseded = before - buffer.pending.len();
    let n = kept.len();
    buffer.pending.extend(kept);
    Ok(ScheduleReport { earliest_feasible: earliest, kept: n, discarded, superseded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::action::{Action, ActionStep};
    use crate::geometry::FrameTag;

    fn chunk(anchor: f64, times: &[f64]) -> ActionChunk {
        let a = Action { left: Pose::identity(), right: Pose::identity(), look_at: Vector3::x(), widths: [0.0, 0.0] };
        ActionChunk {
            anchor_time: anchor,
            steps: times.iter().map(|&t| ActionStep { t, action: a.encode().to_vec() }).collect(),
            frame: FrameTag::World,
        }
    }

    #[test]
    fn worked_discard_example() {
        let times: Vec<f64> = (1..=8).map(|k| 10.0 + 0.05 * k as f64).collect();
        let mut buf = ScheduledBuffer::new();
        let policy = SchedulePolicy { execution_latency: 0.05, ..SchedulePolicy::default() };
        let r = schedule_actions(&mut buf, &chunk(10.0, &times), &Pose::identity(), 10.15, 0.15, &policy).unwrap();
        assert_eq!(r.discarded, 3);
        assert_eq!(buf.times(), times[3..].to_vec());
        assert_eq!(buf.times()[0], 10.2);
    }

    #[test]
    fn estimated_accounting_adds_inference_time() {
        let policy = SchedulePolicy { execution_latency: 0.05, accounting: InferenceAccounting::Estimated, ..Default::default() };
        assert!((policy.earliest_feasible(10.0, 0.15) - 10.2).abs() < 1e-12);
    }

    #[test]
    fn zero_latency_keeps_future_steps() {
        let mut buf = ScheduledBuffer::new();
        let r = schedule_actions(&mut buf, &chunk(1.0, &[1.1, 1.2, 1.3]), &Pose::identity(), 1.0, 0.0, &SchedulePolicy::default())
            .unwrap();
        assert_eq!((r.kept, r.discarded), (3, 0));
    }

    #[test]
    fn newer_chunk_supersedes_overlap() {
        let mut buf = ScheduledBuffer::new();
        let p = SchedulePolicy::default();
        schedule_actions(&mut buf, &chunk(1.0, &[1.1, 1.2, 1.3, 1.4]), &Pose::identity(), 1.0, 0.0, &p).unwrap();
        let old: Vec<f64> = buf.times();
        let r = schedule_actions(&mut buf, &chunk(1.1, &[1.25, 1.35, 1.45]), &Pose::identity(), 1.1, 0.0, &p).unwrap();
        assert_eq!(r.superseded, 2);
        let now = buf.times();
        let gone: Vec<f64> = old.iter().copied().filter(|t| !now.contains(t)).collect();
        assert_eq!(gone, vec![1.3, 1.4]);
        assert_eq!(now, vec![1.1, 1.2, 1.25, 1.35, 1.45]);
    }

    #[test]
    fn fully_stale_chunk_leaves_buffer() {
        let mut buf = ScheduledBuffer::new();
        let p = SchedulePolicy::default();
        schedule_actions(&mut buf, &chunk(1.0, &[1.1, 1.2]), &Pose::identity(), 1.0, 0.0, &p).unwrap();
        let r = schedule_actions(&mut buf, &chunk(0.5, &[0.6, 0.7]), &Pose::identity(), 1.0, 0.0, &p).unwrap();
        assert_eq!(r.kept, 0);
        assert_eq!(buf.times(), vec![1.1, 1.2]);
    }
}
