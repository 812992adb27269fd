//! Look-at point to head orientation and neck pan/tilt.

use nalgebra::Vector3;
use thiserror::Error;

use crate::model::{GeneralizedState, ModelError, RobotModel};
use crate::se3::{Pose, Rotation};

pub const WORLD_UP: Vector3<f64> = Vector3::new(0.0, 0.0, 1.0);

/// Below this norm a direction is treated as zero.
const DEGENERATE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GazeError {
    #[error("look-at target coincides with the head position")]
    DegenerateTarget,
    #[error("world-up vector is parallel to the viewing direction")]
    DegenerateUp,
    #[error("non-finite look-at input")]
    NonFinite,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Head orientation whose forward (third) column points from `head` to
/// `target`, keeping the current x axis as closely as possible.
///
/// When the current x axis is (nearly) parallel to the viewing direction it
/// is replaced by `world_up`.
pub fn look_at_rotation(
    head: &Vector3<f64>,
    current: &Rotation,
    target: &Vector3<f64>,
    world_up: &Vector3<f64>,
) -> Result<Rotation, GazeError> {
    if !(head.iter().chain(target.iter()).chain(world_up.iter()).all(|v| v.is_finite())) {
        return Err(GazeError::NonFinite);
    }
    let delta = target - head;
    let dist = delta.norm();
    if dist <= DEGENERATE {
        return Err(GazeError::DegenerateTarget);
    }
    let d = delta / dist;
    let project = |x: Vector3<f64>| x - d * x.dot(&d);
    let mut x = project(current.x_axis());
    if x.norm() <= DEGENERATE {
        x = project(*world_up);
        if x.norm() <= DEGENERATE {
            return Err(GazeError::DegenerateUp);
        }
    }
    let x = x.normalize();
    let y = d.cross(&x);
    Ok(Rotation::from_matrix_unchecked(nalgebra::Matrix3::from_columns(&[x, y, d])))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeckLimits {
    pub pan: [f64; 2],
    pub tilt: [f64; 2],
}

impl Default for NeckLimits {
    fn default() -> Self {
        Self { pan: [-2.0, 2.0], tilt: [-1.2, 0.5] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PanTilt {
    pub pan: f64,
    pub tilt: f64,
    pub clamped: bool,
}

/// Reads pan/tilt off the forward (z) axis of `r`, expressed in the neck
/// mount frame (x forward, z up), and clamps them to `limits`.
pub fn pan_tilt_from_rotation(r: &Rotation, neck_mount: &Pose, limits: &NeckLimits) -> PanTilt {
    let f = neck_mount.rotation.inverse().transform_vector(&r.z_axis());
    pan_tilt_from_direction(&f, limits)
}

pub fn pan_tilt_from_direction(f: &Vector3<f64>, limits: &NeckLimits) -> PanTilt {
    let f = f.normalize();
    let pan = f.y.atan2(f.x);
    let tilt = f.z.clamp(-1.0, 1.0).asin();
    let pan_c = pan.clamp(limits.pan[0], limits.pan[1]);
    let tilt_c = tilt.clamp(limits.tilt[0], limits.tilt[1]);
    PanTilt { pan: pan_c, tilt: tilt_c, clamped: pan_c != pan || tilt_c != tilt }
}

/// Forward direction in the mount frame for the given angles.
pub fn direction_from_pan_tilt(pan: f64, tilt: f64) -> Vector3<f64> {
    let (sp, cp) = pan.sin_cos();
    let (st, ct) = tilt.sin_cos();
    Vector3::new(ct * cp, ct * sp, st)
}

/// Direct neck servo: points the head at a world look-at point by driving
/// the pan and tilt joints, rate-limited by the joints' velocity limits.
#[derive(Clone, Debug)]
pub struct NeckServo {
    pan_coord: usize,
    tilt_coord: usize,
    limits: NeckLimits,
    max_rate: [f64; 2],
    head_frame: String,
    mount_frame: String,
}

impl NeckServo {
    pub fn new(model: &RobotModel, pan_joint: &str, tilt_joint: &str) -> Result<Self, GazeError> {
        let pan_coord = model.coordinate(pan_joint)?;
        let tilt_coord = model.coordinate(tilt_joint)?;
        let pl = model.position_limits();
        let vl = model.velocity_limits();
        let defaults = NeckLimits::default();
        let limits = NeckLimits { pan: pl[pan_coord].unwrap_or(defaults.pan), tilt: pl[tilt_coord].unwrap_or(defaults.tilt) };
        let max_rate = [vl[pan_coord].unwrap_or(f64::INFINITY), vl[tilt_coord].unwrap_or(f64::INFINITY)];
        model.frame("head")?;
        model.frame("neck_mount")?;
        Ok(Self { pan_coord, tilt_coord, limits, max_rate, head_frame: "head".into(), mount_frame: "neck_mount".into() })
    }

    /// Servo for the reference morphology (`head_0` pan, `head_1` tilt).
    pub fn reference(model: &RobotModel) -> Result<Self, GazeError> {
        Self::new(model, "head_0", "head_1")
    }

    pub fn limits(&self) -> &NeckLimits {
        &self.limits
    }

    pub fn coordinates(&self) -> [usize; 2] {
        [self.pan_coord, self.tilt_coord]
    }

    /// Pan/tilt that point the head at `target` from configuration `q`.
    pub fn target(&self, model: &RobotModel, q: &GeneralizedState, target: &Vector3<f64>) -> Result<PanTilt, GazeError> {
        let kin = model.kinematics(q)?;
        let head = kin.pose(&self.head_frame);
        let mount = kin.pose(&self.mount_frame);
        let r = look_at_rotation(&head.translation, &head.rotation, target, &WORLD_UP)?;
        Ok(pan_tilt_from_rotation(&r, &mount, &self.limits))
    }

    /// Moves the neck coordinates of `q` toward the target by at most one
    /// tick of joint velocity. Returns the commanded pan/tilt.
    pub fn step(
        &self,
        model: &RobotModel,
        q: &mut GeneralizedState,
        target: &Vector3<f64>,
        dt: f64,
    ) -> Result<PanTilt, GazeError> {
        let pt = self.target(model, q, target)?;
        for (k, (coord, goal)) in [(self.pan_coord, pt.pan), (self.tilt_coord, pt.tilt)].into_iter().enumerate() {
            let max = self.max_rate[k] * dt;
            q[coord] += (goal - q[coord]).clamp(-max, max);
        }
        Ok(pt)
    }
}

/// Angle between the head's forward axis and the direction to `target`.
pub fn gaze_error(head: &Pose, target: &Vector3<f64>) -> f64 {
    let d = target - head.translation;
    if d.norm() <= DEGENERATE {
        return 0.0;
    }
    let c = head.rotation.z_axis().dot(&d.normalize()).clamp(-1.0, 1.0);
    // acos loses precision near 1; use the cross product instead.
    let s = head.rotation.z_axis().cross(&d.normalize()).norm();
    s.atan2(c)
}
