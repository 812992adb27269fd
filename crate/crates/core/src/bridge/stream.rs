use nalgebra::Vector3;

use super::schedule::{ScheduledBuffer, TimedPoseCommand, TIME_EPS};
use crate::se3::{interpolate_pose, Pose};

/// Everything streamed to the controller on one tick.
#[derive(Clone, Debug, PartialEq)]
pub struct Target {
    pub left: Pose,
    pub right: Pose,
    pub look_at: Vector3<f64>,
    pub widths: [f64; 2],
}

impl Target {
    fn from_command(c: &TimedPoseCommand) -> Self {
        Self { left: c.left, right: c.right, look_at: c.look_at, widths: c.widths }
    }

    /// Pose slerp/lerp for the grippers, linear blend for the rest.
    pub fn interpolate(prev: &Target, cmd: &Target, alpha: f64) -> Target {
        let a = alpha.clamp(0.0, 1.0);
        let lerp = |x: f64, y: f64| if a == 1.0 { y } else { x + (y - x) * a };
        Target {
            left: interpolate_pose(&prev.left, &cmd.left, a),
            right: interpolate_pose(&prev.right, &cmd.right, a),
            look_at: if a == 1.0 { cmd.look_at } else { prev.look_at + (cmd.look_at - prev.look_at) * a },
            widths: [lerp(prev.widths[0], cmd.widths[0]), lerp(prev.widths[1], cmd.widths[1])],
        }
    }
}

/// Provenance of an emission, for auditing the discard rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Source {
    pub t: f64,
    pub earliest_feasible: f64,
    pub chunk_anchor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Emission {
    pub time: f64,
    pub target: Target,
    pub alpha: f64,
    pub source: Option<Source>,
    /// A new command became active on this tick.
    pub activated: bool,
    /// Segment start and start target of the active command.
    pub segment: Option<(f64, Target)>,
    /// No command is in progress; the last target is held.
    pub held: bool,
}

#[derive(Clone, Debug)]
struct Active {
    cmd: TimedPoseCommand,
    target: Target,
    t0: f64,
    prev: Target,
}

/// Turns the scheduled buffer into per-tick interpolated targets.
///
/// A command becomes active on the first tick whose predecessor tick lies
/// at or after the command's segment start. It then blends from the last
/// emitted target, starting at that predecessor tick, so the target curve
/// is continuous at every switch. On underrun the last target is held.
#[derive(Clone, Debug)]
pub struct TargetStreamer {
    active: Option<Active>,
    last: Target,
    last_tick: Option<f64>,
}

impl TargetStreamer {
    pub fn new(initial: Target) -> Self {
        Self { active: None, last: initial, last_tick: None }
    }

    pub fn last_target(&self) -> &Target {
        &self.last
    }

    pub fn emit(&mut self, buffer: &mut ScheduledBuffer, tick: f64) -> Emission {
        let reference = self.last_tick.unwrap_or(tick);
        let mut newest = None;
        while buffer.front().is_some_and(|c| c.start() <= reference + TIME_EPS) {
            newest = buffer.pop_front();
        }
        let activated = newest.is_some();
        if let Some(cmd) = newest {
            let target = Target::from_command(&cmd);
            self.active = Some(Active { cmd, target, t0: reference, prev: self.last.clone() });
        }
        let (target, alpha, source, segment, held) = match &self.active {
            Some(a) => {
                let elapsed = tick - a.t0;
                let alpha = if elapsed >= a.cmd.duration - TIME_EPS { 1.0 } else { (elapsed / a.cmd.duration).clamp(0.0, 1.0) };
                let target = Target::interpolate(&a.prev, &a.target, alpha);
                let src = Source { t: a.cmd.t, earliest_feasible: a.cmd.earliest_feasible, chunk_anchor: a.cmd.chunk_anchor };
                (target, alpha, Some(src), Some((a.t0, a.prev.clone())), alpha >= 1.0)
            }
            None => (self.last.clone(), 1.0, None, None, true),
        };
        self.last = target.clone();
        self.last_tick = Some(tick);
        Emission { time: tick, target, alpha, source, activated, segment, held }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target_at(x: f64) -> Target {
        Target { left: Pose::from_translation(x, 0.0, 0.0), right: Pose::from_translation(x, -0.4, 0.0), look_at: Vector3::new(x, 0.0, 1.0), widths: [x, x] }
    }

    fn command(t: f64, x: f64) -> TimedPoseCommand {
        let tg = target_at(x);
        TimedPoseCommand { t, duration: 0.1, left: tg.left, right: tg.right, look_at: tg.look_at, widths: tg.widths, earliest_feasible: 0.0, chunk_anchor: 0.0 }
    }

    #[test]
    fn interpolation_examples() {
        let prev = target_at(0.0);
        let cmd = target_at(0.2);
        assert_eq!(Target::interpolate(&prev, &cmd, 0.0), prev);
        assert_eq!(Target::interpolate(&prev, &cmd, 1.0), cmd);
        let mid = Target::interpolate(&prev, &cmd, 0.5);
        assert!((mid.left.translation - Vector3::new(0.1, 0.0, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn streams_commands_and_holds_on_underrun() {
        let mut buf = ScheduledBuffer::new();
        let mut s = TargetStreamer::new(target_at(0.0));
        for (t, x) in [(0.1, 0.1), (0.2, 0.3)] {
            buf.push(command(t, x));
        }
        let mut out = Vec::new();
        for k in 0..=40 {
            out.push(s.emit(&mut buf, k as f64 * 0.01));
        }
        // First command: segment [0, 0.1], reached exactly at 0.1.
        assert_eq!(out[10].target, target_at(0.1));
        assert!((out[5].target.left.translation.x - 0.05).abs() < 1e-12);
        // Second command starts blending from the first at tick 0.10.
        assert!(out[11].activated);
        assert_eq!(out[20].target, target_at(0.3));
        // Underrun: held.
        assert!(out[40].held);
        assert_eq!(out[40].target, target_at(0.3));
        for w in out.windows(2) {
            let step = (w[1].target.left.translation - w[0].target.left.translation).norm();
            assert!(step <= 0.02 + 1e-12);
        }
    }

    #[test]
    fn switch_is_continuous() {
        let mut buf = ScheduledBuffer::new();
        let mut s = TargetStreamer::new(target_at(0.0));
        buf.push(command(0.1, 1.0));
        let mut last = None;
        for k in 0..=5 {
            last = Some(s.emit(&mut buf, k as f64 * 0.01));
        }
        let before = last.unwrap().target;
        // A replacement arrives mid-segment.
        buf.push(command(0.15, -1.0));
        let e = s.emit(&mut buf, 0.06);
        assert!(e.activated);
        let (t0, start) = e.segment.clone().unwrap();
        assert_eq!(t0, 0.05);
        assert_eq!(start, before);
    }
}
