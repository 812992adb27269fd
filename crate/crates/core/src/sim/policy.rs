//! Time-parameterized scripted policies standing in for a learned one.

use std::f64::consts::PI;

use nalgebra::Vector3;

use super::scenario::PolicySpec;
use crate::bridge::{Action, ActionChunk, ActionStep};
use crate::geometry::FrameTag;
use crate::se3::{Pose, Rotation};

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// A reference trajectory sampled at absolute times, so delayed
/// observations never shift what is commanded at a given instant.
#[derive(Clone, Debug)]
pub struct ScriptedPolicy {
    spec: PolicySpec,
    left0: Pose,
    right0: Pose,
    widths: [f64; 2],
}

impl ScriptedPolicy {
    /// `left0` and `right0` are the gripper poses at the start of the episode.
    pub fn new(spec: PolicySpec, left0: Pose, right0: Pose) -> Self {
        Self { spec, left0, right0, widths: [0.05, 0.05] }
    }

    fn midpoint(&self) -> Vector3<f64> {
        (self.left0.translation + self.right0.translation) * 0.5
    }

    pub fn action_at(&self, t: f64) -> Action {
        let forward = Vector3::new(0.3, 0.0, 0.0);
        match &self.spec {
            PolicySpec::StaticTarget { shift, yaw, left_position, right_position, look_at } => {
                let s = Pose::new(Rotation::rot_z(*yaw), Vector3::from(*shift));
                let mut left = s * self.left0;
                let mut right = s * self.right0;
                if let Some(p) = left_position {
                    left.translation = Vector3::from(*p);
                }
                if let Some(p) = right_position {
                    right.translation = Vector3::from(*p);
                }
                let look = match look_at {
                    Some(p) => Vector3::from(*p),
                    None => (left.translation + right.translation) * 0.5 + s.rotation.transform_vector(&forward),
                };
                Action { left, right, look_at: look, widths: self.widths }
            }
            PolicySpec::FigureEightBimanual { amplitude, period } => {
                let w = 2.0 * PI / period;
                let a = amplitude * smoothstep(t / 1.0);
                let lateral = a * (w * t).sin();
                let vertical = 0.5 * a * (2.0 * w * t).sin();
                let left = Pose::from_translation(0.0, lateral, vertical) * self.left0;
                let right = Pose::from_translation(0.0, -lateral, vertical) * self.right0;
                let look = (left.translation + right.translation) * 0.5 + forward;
                Action { left, right, look_at: look, widths: self.widths }
            }
            PolicySpec::BoxCarry { distance, yaw_amplitude, lift, period } => {
                let u = (t / period).clamp(0.0, 1.0);
                let c0 = self.midpoint();
                let psi = yaw_amplitude * smoothstep(t) * (2.0 * PI * t / period).sin();
                let centre = c0 + Vector3::new(distance * smoothstep(u), 0.0, lift * (PI * u).sin());
                let carry = Pose::new(Rotation::rot_z(psi), centre) * Pose::new(Rotation::identity(), -c0);
                let look = centre + Rotation::rot_z(psi).transform_vector(&forward);
                Action { left: carry * self.left0, right: carry * self.right0, look_at: look, widths: self.widths }
            }
            PolicySpec::SearchThenApproach { sweep_duration, sweep_width, approach_distance, approach_duration, object } => {
                let object = Vector3::from(*object);
                if t < *sweep_duration {
                    let lateral = 0.5 * sweep_width * (2.0 * PI * t / sweep_duration).sin();
                    Action {
                        left: self.left0,
                        right: self.right0,
                        look_at: object + Vector3::new(0.0, lateral, 0.0),
                        widths: self.widths,
                    }
                } else {
                    let u = smoothstep((t - sweep_duration) / approach_duration);
                    let shift = Pose::from_translation(approach_distance * u, 0.0, 0.0);
                    Action { left: shift * self.left0, right: shift * self.right0, look_at: object, widths: self.widths }
                }
            }
        }
    }

    /// Chunk of `steps` actions at `anchor + k·period`, `k = 1..=steps`.
    pub fn chunk(&self, anchor: f64, steps: usize, period: f64) -> ActionChunk {
        let steps = (1..=steps)
            .map(|k| {
                let t = anchor + k as f64 * period;
                ActionStep { t, action: self.action_at(t).encode().to_vec() }
            })
            .collect();
        ActionChunk { anchor_time: anchor, steps, frame: FrameTag::World }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poses() -> (Pose, Pose) {
        (Pose::from_translation(0.4, 0.3, 0.9), Pose::from_translation(0.4, -0.3, 0.9))
    }

    #[test]
    fn box_carry_keeps_gripper_distance() {
        let (l, r) = poses();
        let spec = PolicySpec::BoxCarry { distance: 0.4, yaw_amplitude: 0.3, lift: 0.1, period: 5.0 };
        let p = ScriptedPolicy::new(spec, l, r);
        for k in 0..100 {
            let a = p.action_at(k as f64 * 0.1);
            assert!(((a.left.translation - a.right.translation).norm() - 0.6).abs() < 1e-12);
        }
    }

    #[test]
    fn figure_eight_starts_at_rest_pose() {
        let (l, r) = poses();
        let p = ScriptedPolicy::new(PolicySpec::FigureEightBimanual { amplitude: 0.1, period: 4.0 }, l, r);
        assert_eq!(p.action_at(0.0).left, l);
        let a = p.action_at(1.0);
        assert!((a.left.translation.y - 0.3 - 0.1).abs() < 1e-12);
        assert!((a.right.translation.y + 0.3 + 0.1).abs() < 1e-12);
    }

    #[test]
    fn chunk_times_follow_anchor() {
        let (l, r) = poses();
        let p = ScriptedPolicy::new(PolicySpec::FigureEightBimanual { amplitude: 0.1, period: 4.0 }, l, r);
        let c = p.chunk(2.0, 4, 0.1);
        assert_eq!(c.steps.len(), 4);
        assert_eq!(c.steps[0].t, 2.1);
        c.validate().unwrap();
    }
}
