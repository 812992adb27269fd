//! Latency-matched execution bridge between a policy and the IK loop.
//!
//! Observations are aligned to anchor timestamps, returned action chunks
//! are filtered against the earliest feasible execution time and buffered,
//! and the buffer is streamed as interpolated per-tick targets.

pub mod action;
pub mod align;
pub mod clock;
pub mod live;
pub mod protocol;
pub mod schedule;
pub mod stream;

use thiserror::Error;

pub use action::{Action, ActionChunk, ActionStep, ACTION_DIM, MAX_CHUNK_STEPS};
pub use align::{align_observations, AlignConfig, Aligner, ObservationWindow, Payload, SampleStream, StreamKind, TimestampedSample};
pub use clock::{Clock, VirtualClock, WallClock};
pub use schedule::{schedule_actions, InferenceAccounting, SchedulePolicy, ScheduledBuffer, TimedPoseCommand, COMMAND_DURATION, TIME_EPS};
pub use stream::{Emission, Source, Target, TargetStreamer};

#[derive(Debug, Error)]
pub enum BridgeError {
    #[error("stream `{0}` has no samples")]
    EmptyStream(String),
    #[error("bad sample: {0}")]
    BadSample(String),
    #[error("bad action: {0}")]
    BadAction(String),
    #[error("bad configuration: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
