use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BridgeError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Camera,
    Proprio,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    FrameRef(String),
    PointmapRef(String),
    Proprio(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimestampedSample {
    pub stream_id: String,
    /// Receive stamp on the monotonic clock, before latency correction.
    pub capture_time: f64,
    pub payload: Payload,
}

/// Recent samples of one stream, strictly increasing in time.
#[derive(Clone, Debug)]
pub struct SampleStream {
    id: String,
    kind: StreamKind,
    capacity: usize,
    samples: Vec<TimestampedSample>,
}

impl SampleStream {
    pub fn new(id: impl Into<String>, kind: StreamKind, capacity: usize) -> Self {
        Self { id: id.into(), kind, capacity: capacity.max(2), samples: Vec::new() }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> StreamKind {
        self.kind
    }

    pub fn samples(&self) -> &[TimestampedSample] {
        &self.samples
    }

    pub fn push(&mut self, sample: TimestampedSample) -> Result<(), BridgeError> {
        if !sample.capture_time.is_finite() {
            return Err(BridgeError::BadSample(format!("{}: non-finite time", self.id)));
        }
        if let Some(last) = self.samples.last() {
            if sample.capture_time <= last.capture_time {
                return Err(BridgeError::BadSample(format!(
                    "{}: time {} not after {}",
                    self.id, sample.capture_time, last.capture_time
                )));
            }
        }
        if self.kind == StreamKind::Proprio && !matches!(sample.payload, Payload::Proprio(_)) {
            return Err(BridgeError::BadSample(format!("{}: proprio stream needs a vector payload", self.id)));
        }
        self.samples.push(sample);
        if self.samples.len() > self.capacity {
            let excess = self.samples.len() - self.capacity;
            self.samples.drain(..excess);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Observation rate in Hz; anchors are `1 / rate` apart.
    pub rate: f64,
    /// Number of anchors, oldest first.
    pub depth: usize,
    /// Per-stream latency subtracted from receive stamps; missing means 0.
    pub latencies: BTreeMap<String, f64>,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self { rate: 10.0, depth: 2, latencies: BTreeMap::new() }
    }
}

impl AlignConfig {
    fn latency(&self, id: &str) -> f64 {
        self.latencies.get(id).copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CameraPick {
    pub corrected_time: f64,
    pub payload: Payload,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlignWarning {
    /// Nearest sample at or before the anchor is older than three periods, or missing.
    Stale { stream: String, anchor: f64, age: Option<f64> },
    /// Proprioception did not bracket the anchor and was held at the nearest sample.
    Extrapolated { stream: String, anchor: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservationWindow {
    pub anchor_times: Vec<f64>,
    /// Per camera stream, the pick for each anchor.
    pub cameras: BTreeMap<String, Vec<Option<CameraPick>>>,
    /// Per proprio stream, the interpolated vector at each anchor.
    pub proprio: BTreeMap<String, Vec<Vec<f64>>>,
    pub warnings: Vec<AlignWarning>,
}

impl ObservationWindow {
    pub fn final_anchor(&self) -> f64 {
        *self.anchor_times.last().expect("window has anchors")
    }

    pub fn extrapolated(&self) -> bool {
        self.warnings.iter().any(|w| matches!(w, AlignWarning::Extrapolated { .. }))
    }
}

/// Builds a synchronized observation window.
///
/// The final anchor is the latest latency-corrected camera time; earlier
/// anchors are spaced `1 / rate` before it. Cameras contribute the sample
/// nearest at or before each anchor, proprioception is linearly
/// interpolated.
pub fn align_observations(streams: &[SampleStream], cfg: &AlignConfig) -> Result<ObservationWindow, BridgeError> {
    if !(cfg.rate > 0.0) || cfg.depth == 0 {
        return Err(BridgeError::Config("align rate must be > 0 and depth >= 1".into()));
    }
    let mut final_anchor = f64::NEG_INFINITY;
    let mut any_camera = false;
    for s in streams {
        let last = s.samples.last().ok_or_else(|| BridgeError::EmptyStream(s.id.clone()))?;
        if s.kind == StreamKind::Camera {
            any_camera = true;
            final_anchor = final_anchor.max(last.capture_time - cfg.latency(&s.id));
        }
    }
    if !any_camera {
        return Err(BridgeError::EmptyStream("camera".into()));
    }
    let period = 1.0 / cfg.rate;
    let anchor_times: Vec<f64> =
        (0..cfg.depth).map(|k| final_anchor - (cfg.depth - 1 - k) as f64 * period).collect();

    let mut window =
        ObservationWindow { anchor_times, cameras: BTreeMap::new(), proprio: BTreeMap::new(), warnings: Vec::new() };
    for s in streams {
        let lat = cfg.latency(&s.id);
        match s.kind {
            StreamKind::Camera => {
                let picks = window
                    .anchor_times
                    .iter()
                    .map(|&a| {
                        let pick = s
                            .samples
                            .iter()
                            .rev()
                            .find(|x| x.capture_time - lat <= a)
                            .map(|x| CameraPick { corrected_time: x.capture_time - lat, payload: x.payload.clone() });
                        let age = pick.as_ref().map(|p| a - p.corrected_time);
                        if age.is_none_or(|age| age > 3.0 * period) {
                            log::warn!("stream {} stale at anchor {a}: age {age:?}", s.id);
                            window.warnings.push(AlignWarning::Stale { stream: s.id.clone(), anchor: a, age });
                        }
                        pick
                    })
                    .collect();
                window.cameras.insert(s.id.clone(), picks);
            }
            StreamKind::Proprio => {
                let mut values = Vec::with_capacity(window.anchor_times.len());
                for &a in &window.anchor_times {
                    let (v, extrapolated) = interpolate_proprio(&s.samples, lat, a)?;
                    if extrapolated {
                        window.warnings.push(AlignWarning::Extrapolated { stream: s.id.clone(), anchor: a });
                    }
                    values.push(v);
                }
                window.proprio.insert(s.id.clone(), values);
            }
        }
    }
    Ok(window)
}

fn proprio_vec(s: &TimestampedSample) -> Result<&[f64], BridgeError> {
    match &s.payload {
        Payload::Proprio(v) => Ok(v),
        _ => Err(BridgeError::BadSample(format!("{}: expected proprio payload", s.stream_id))),
    }
}

/// Linear interpolation at `t`; outside the sampled span the nearest
/// sample is held and the result flagged.
fn interpolate_proprio(samples: &[TimestampedSample], latency: f64, t: f64) -> Result<(Vec<f64>, bool), BridgeError> {
    let time = |s: &TimestampedSample| s.capture_time - latency;
    let first = &samples[0];
    let last = &samples[samples.len() - 1];
    if t <= time(first) {
        return Ok((proprio_vec(first)?.to_vec(), t < time(first)));
    }
    if t >= time(last) {
        return Ok((proprio_vec(last)?.to_vec(), t > time(last)));
    }
    let hi = samples.partition_point(|s| time(s) <= t);
    let (a, b) = (&samples[hi - 1], &samples[hi]);
    let (va, vb) = (proprio_vec(a)?, proprio_vec(b)?);
    if va.len() != vb.len() {
        return Err(BridgeError::BadSample("proprio vectors change length".into()));
    }
    let u = (t - time(a)) / (time(b) - time(a));
    Ok((va.iter().zip(vb).map(|(x, y)| x + (y - x) * u).collect(), false))
}

/// Enforces strictly increasing final anchors across successive windows.
#[derive(Clone, Debug, Default)]
pub struct Aligner {
    pub config: AlignConfig,
    last_anchor: Option<f64>,
}

impl Aligner {
    pub fn new(config: AlignConfig) -> Self {
        Self { config, last_anchor: None }
    }

    /// Returns `None` when no camera has produced anything newer than the
    /// previous window.
    pub fn next_window(&mut self, streams: &[SampleStream]) -> Result<Option<ObservationWindow>, BridgeError> {
        let w = align_observations(streams, &self.config)?;
        if self.last_anchor.is_some_and(|prev| w.final_anchor() <= prev) {
            return Ok(None);
        }
        self.last_anchor = Some(w.final_anchor());
        Ok(Some(w))
    }
}
