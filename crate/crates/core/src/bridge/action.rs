use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::BridgeError;
use crate::geometry::FrameTag;
use crate::se3::{rot_to_6d, sixd_to_rot, Pose, Rot6D};

pub const ACTION_DIM: usize = 23;
/// Longest accepted chunk.
pub const MAX_CHUNK_STEPS: usize = 32;

/// One decoded policy action.
#[derive(Clone, Debug, PartialEq)]
pub struct Action {
    pub left: Pose,
    pub right: Pose,
    pub look_at: Vector3<f64>,
    pub widths: [f64; 2],
}

impl Action {
    /// Layout: left position, left 6D rotation, right position, right 6D
    /// rotation, look-at point, gripper widths.
    pub fn encode(&self) -> [f64; ACTION_DIM] {
        let mut v = [0.0; ACTION_DIM];
        for (off, pose) in [(0, &self.left), (9, &self.right)] {
            v[off..off + 3].copy_from_slice(pose.translation.as_slice());
            v[off + 3..off + 9].copy_from_slice(&rot_to_6d(&pose.rotation).0);
        }
        v[18..21].copy_from_slice(self.look_at.as_slice());
        v[21..23].copy_from_slice(&self.widths);
        v
    }

    pub fn decode(v: &[f64]) -> Result<Self, BridgeError> {
        if v.len() != ACTION_DIM {
            return Err(BridgeError::BadAction(format!("expected {ACTION_DIM} numbers, got {}", v.len())));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(BridgeError::BadAction("non-finite entry".into()));
        }
        let pose = |off: usize| -> Result<Pose, BridgeError> {
            let mut r = [0.0; 6];
            r.copy_from_slice(&v[off + 3..off + 9]);
            let rot = sixd_to_rot(&Rot6D(r)).map_err(|e| BridgeError::BadAction(e.to_string()))?;
            Ok(Pose::new(rot, Vector3::new(v[off], v[off + 1], v[off + 2])))
        };
        Ok(Self {
            left: pose(0)?,
            right: pose(9)?,
            look_at: Vector3::new(v[18], v[19], v[20]),
            widths: [v[21], v[22]],
        })
    }

    /// Moves poses and the look-at point by `t`.
    pub fn transformed(&self, t: &Pose) -> Self {
        Self {
            left: *t * self.left,
            right: *t * self.right,
            look_at: t.transform_point(&self.look_at),
            widths: self.widths,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionStep {
    pub t: f64,
    pub action: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionChunk {
    pub anchor_time: f64,
    pub steps: Vec<ActionStep>,
    pub frame: FrameTag,
}

impl ActionChunk {
    pub fn validate(&self) -> Result<(), BridgeError> {
        if self.steps.len() > MAX_CHUNK_STEPS {
            return Err(BridgeError::BadAction(format!("chunk has {} steps, max {MAX_CHUNK_STEPS}", self.steps.len())));
        }
        for w in self.steps.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(BridgeError::BadAction(format!("step times not increasing at {}", w[1].t)));
            }
        }
        for s in &self.steps {
            if !s.t.is_finite() {
                return Err(BridgeError::BadAction("non-finite step time".into()));
            }
            Action::decode(&s.action)?;
        }
        Ok(())
    }

    /// Decoded steps in the world frame. `frame_in_world` is the pose of the
    /// chunk's frame (identity for world-frame chunks).
    pub fn decode_steps(&self, frame_in_world: &Pose) -> Result<Vec<(f64, Action)>, BridgeError> {
        self.validate()?;
        self.steps.iter().map(|s| Ok((s.t, Action::decode(&s.action)?.transformed(frame_in_world)))).collect()
    }
}
