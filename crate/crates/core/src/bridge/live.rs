//! Wall-clock execution: observation ingestion, policy round trips and
//! target streaming run as separate loops joined by two single-producer,
//! single-consumer queues.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{sync_channel, Receiver, RecvTimeoutError, TryRecvError};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use super::action::ActionChunk;
use super::align::{AlignConfig, Aligner, Payload, SampleStream, StreamKind, TimestampedSample};
use super::protocol::{PolicyRequest, PolicyResponse};
use super::schedule::{schedule_actions, ScheduleReport, SchedulePolicy, ScheduledBuffer};
use super::stream::{Emission, Target, TargetStreamer};
use super::clock::Clock;
use super::BridgeError;
use crate::geometry::FrameTag;
use crate::se3::Pose;

#[derive(Clone, Debug)]
pub struct LiveConfig {
    pub tick_rate: f64,
    pub policy_rate: f64,
    pub align: AlignConfig,
    pub schedule: SchedulePolicy,
    /// Streams the policy loop keeps history for.
    pub streams: Vec<(String, StreamKind)>,
    pub history: usize,
}

impl Default for LiveConfig {
    fn default() -> Self {
        Self {
            tick_rate: 100.0,
            policy_rate: 10.0,
            align: AlignConfig::default(),
            schedule: SchedulePolicy::default(),
            streams: vec![("head".into(), StreamKind::Camera), ("proprio".into(), StreamKind::Proprio)],
            history: 64,
        }
    }
}

/// A chunk as it leaves the policy loop.
#[derive(Clone, Debug)]
struct ChunkMsg {
    chunk: ActionChunk,
    inference_time: f64,
}

#[derive(Clone, Debug, Default)]
pub struct LiveReport {
    pub ticks: usize,
    pub chunks: usize,
    pub schedule: Vec<ScheduleReport>,
    pub policy_errors: Vec<String>,
}

/// Runs the three loops until `duration` seconds of `clock` have elapsed.
///
/// `samples` is the ingestion queue; its producer is the caller's
/// observation source. `policy` performs one blocking round trip. Each
/// streamed target is handed to `sink` on the calling thread.
pub fn run_live<P>(
    cfg: &LiveConfig,
    clock: Arc<dyn Clock>,
    samples: Receiver<TimestampedSample>,
    mut policy: P,
    initial: Target,
    duration: f64,
    mut sink: impl FnMut(&Emission),
) -> Result<LiveReport, BridgeError>
where
    P: FnMut(&PolicyRequest) -> Result<PolicyResponse, BridgeError> + Send + 'static,
{
    if !(cfg.tick_rate > 0.0 && cfg.policy_rate > 0.0) {
        return Err(BridgeError::Config("rates must be > 0".into()));
    }
    let stop = Arc::new(AtomicBool::new(false));
    let (chunk_tx, chunk_rx) = sync_channel::<Result<ChunkMsg, String>>(8);

    let policy_loop = {
        let stop = stop.clone();
        let clock = clock.clone();
        let mut streams: Vec<SampleStream> =
            cfg.streams.iter().map(|(id, kind)| SampleStream::new(id.clone(), *kind, cfg.history)).collect();
        let mut aligner = Aligner::new(cfg.align.clone());
        let period = 1.0 / cfg.policy_rate;
        thread::spawn(move || {
            let mut next = clock.now();
            while !stop.load(Ordering::Acquire) {
                match samples.recv_timeout(Duration::from_millis(1)) {
                    Ok(s) => {
                        if let Some(stream) = streams.iter_mut().find(|x| x.id() == s.stream_id) {
                            if let Err(e) = stream.push(s) {
                                log::warn!("dropping sample: {e}");
                            }
                        }
                        continue;
                    }
                    Err(RecvTimeoutError::Disconnected) => thread::sleep(Duration::from_millis(1)),
                    Err(RecvTimeoutError::Timeout) => {}
                }
                if clock.now() < next || streams.iter().any(|s| s.samples().is_empty()) {
                    continue;
                }
                next += period;
                let window = match aligner.next_window(&streams) {
                    Ok(Some(w)) => w,
                    Ok(None) => continue,
                    Err(e) => {
                        let _ = chunk_tx.try_send(Err(e.to_string()));
                        continue;
                    }
                };
                let req = PolicyRequest {
                    anchor_times: window.anchor_times.clone(),
                    proprio: window.proprio.values().next().cloned().unwrap_or_default(),
                    frame_refs: window
                        .cameras
                        .values()
                        .flatten()
                        .flatten()
                        .filter_map(|p| match &p.payload {
                            Payload::FrameRef(r) | Payload::PointmapRef(r) => Some(r.clone()),
                            Payload::Proprio(_) => None,
                        })
                        .collect(),
                };
                let sent = clock.now();
                let msg = policy(&req).map(|resp| ChunkMsg {
                    chunk: ActionChunk { anchor_time: resp.anchor_time, steps: resp.steps, frame: FrameTag::World },
                    inference_time: clock.now() - sent,
                });
                if chunk_tx.send(msg.map_err(|e| e.to_string())).is_err() {
                    break;
                }
            }
        })
    };

    let mut buffer = ScheduledBuffer::new();
    let mut streamer = TargetStreamer::new(initial);
    let mut report = LiveReport::default();
    let start = clock.now();
    let dt = 1.0 / cfg.tick_rate;
    let mut tick = 0usize;
    loop {
        let tick_time = start + tick as f64 * dt;
        if tick_time - start > duration {
            break;
        }
        while clock.now() < tick_time {
            thread::sleep(Duration::from_micros(200));
        }
        loop {
            match chunk_rx.try_recv() {
                Ok(Ok(msg)) => {
                    let r = schedule_actions(
                        &mut buffer,
                        &msg.chunk,
                        &Pose::identity(),
                        clock.now(),
                        msg.inference_time,
                        &cfg.schedule,
                    );
                    match r {
                        Ok(r) => report.schedule.push(r),
                        Err(e) => report.policy_errors.push(e.to_string()),
                    }
                    report.chunks += 1;
                }
                Ok(Err(e)) => report.policy_errors.push(e),
                Err(TryRecvError::Empty) | Err(TryRecvError::Disconnected) => break,
            }
        }
        sink(&streamer.emit(&mut buffer, tick_time));
        tick += 1;
    }
    report.ticks = tick;
    stop.store(true, Ordering::Release);
    drop(chunk_rx);
    policy_loop.join().map_err(|_| BridgeError::Config("policy loop panicked".into()))?;
    Ok(report)
}
