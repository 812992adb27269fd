//! Weight and constraint parameters for one task.

use serde::{Deserialize, Serialize};

use super::IkError;

pub const LAUNDRY_JSON: &str = include_str!("../../data/profiles/laundry.json");
pub const DELIVERY_JSON: &str = include_str!("../../data/profiles/delivery.json");
pub const TABLESCAPE_JSON: &str = include_str!("../../data/profiles/tablescape.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UprightMode {
    /// The upright joints' velocities sum to zero.
    SumZero,
    /// Each upright joint is held at zero velocity.
    IndividuallyFixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IkProfile {
    pub name: String,
    pub w_p: f64,
    pub w_o: f64,
    pub w_nom_torso: f64,
    pub w_nom_arm: f64,
    pub w_curr: f64,
    pub w_base_pos: f64,
    pub w_base_ori: f64,
    pub w_com: f64,
    pub b_x: f64,
    pub b_y: f64,
    /// Damping added to the Hessian diagonal.
    pub lambda: f64,
    /// Fraction of the model velocity limits the solver may use.
    pub velocity_safety: f64,
    /// Base limits: translation m/s, rotation rad/s.
    pub base_vel_limits: [f64; 2],
    pub d_safe: f64,
    pub d_inf: f64,
    /// Velocity-damper gain per tick.
    pub collision_gain: f64,
    pub upright_mode: UprightMode,
    pub upright_joints: Vec<String>,
    pub frozen_joints: Vec<String>,
    /// Desired torso-over-base XY offset in the base frame. When absent the
    /// offset at the nominal posture is used.
    pub com_offset: Option<[f64; 2]>,
    /// Weight of the optional head-orientation cost.
    pub w_head: f64,
}

impl IkProfile {
    pub fn from_json(text: &str) -> Result<Self, IkError> {
        let p: IkProfile = serde_json::from_str(text).map_err(|e| IkError::Profile(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profile serializes");
        s.push('\n');
        s
    }

    pub fn laundry() -> Self {
        Self::from_json(LAUNDRY_JSON).expect("bundled profile")
    }

    pub fn delivery() -> Self {
        Self::from_json(DELIVERY_JSON).expect("bundled profile")
    }

    pub fn tablescape() -> Self {
        Self::from_json(TABLESCAPE_JSON).expect("bundled profile")
    }

    /// Looks up a bundled profile by name.
    pub fn bundled(name: &str) -> Option<Self> {
        match name {
            "laundry" => Some(Self::laundry()),
            "delivery" => Some(Self::delivery()),
            "tablescape" => Some(Self::tablescape()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), IkError> {
        let weights = [
            ("w_p", self.w_p),
            ("w_o", self.w_o),
            ("w_nom_torso", self.w_nom_torso),
            ("w_nom_arm", self.w_nom_arm),
            ("w_curr", self.w_curr),
            ("w_base_pos", self.w_base_pos),
            ("w_base_ori", self.w_base_ori),
            ("w_com", self.w_com),
            ("w_head", self.w_head),
        ];
        for (name, w) in weights {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(IkError::Profile(format!("{name} must be a finite weight >= 0")));
            }
        }
        if !(self.lambda > 0.0) {
            return Err(IkError::Profile("lambda must be > 0".into()));
        }
        if !(self.velocity_safety > 0.0 && self.velocity_safety <= 1.0) {
            return Err(IkError::Profile("velocity_safety must lie in (0, 1]".into()));
        }
        if !(0.0 < self.d_safe && self.d_safe < self.d_inf) {
            return Err(IkError::Profile("need 0 < d_safe < d_inf".into()));
        }
        if !(self.b_x > 0.0 && self.b_y > 0.0) {
            return Err(IkError::Profile("CoM bounds must be > 0".into()));
        }
        if !(self.base_vel_limits.iter().all(|v| *v > 0.0)) {
            return Err(IkError::Profile("base velocity limits must be > 0".into()));
        }
        if !(self.collision_gain > 0.0 && self.collision_gain <= 1.0) {
            return Err(IkError::Profile("collision_gain must lie in (0, 1]".into()));
        }
        Ok(())
    }
}
