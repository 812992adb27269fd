use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::se3::Pose;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sphere,
    Capsule,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionBodySpec {
    pub link: String,
    pub shape: Shape,
    pub radius: f64,
    pub endpoints: Vec<Vector3<f64>>,
    pub group: String,
}

/// Sphere or capsule rigidly attached to a link.
///
/// Both shapes are stored as a core segment (degenerate for spheres)
/// inflated by `radius`.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionPrimitive {
    pub link: String,
    pub(crate) link_index: usize,
    pub shape: Shape,
    pub radius: f64,
    pub a: Vector3<f64>,
    pub b: Vector3<f64>,
    pub group: String,
}

impl CollisionPrimitive {
    pub(crate) fn from_spec(spec: &CollisionBodySpec, link_index: usize) -> Result<Self, ModelError> {
        if !(spec.radius > 0.0) || !spec.radius.is_finite() {
            return Err(ModelError::Validation(format!("collision body on `{}` needs radius > 0", spec.link)));
        }
        let (a, b) = match (spec.shape, spec.endpoints.as_slice()) {
            (Shape::Sphere, [c]) => (*c, *c),
            (Shape::Capsule, [a, b]) => (*a, *b),
            _ => {
                return Err(ModelError::Validation(format!(
                    "collision body on `{}`: sphere takes 1 endpoint, capsule takes 2",
                    spec.link
                )))
            }
        };
        Ok(Self { link: spec.link.clone(), link_index, shape: spec.shape, radius: spec.radius, a, b, group: spec.group.clone() })
    }

    pub fn link_index(&self) -> usize {
        self.link_index
    }

    pub(crate) fn world_segment(&self, link_pose: &Pose) -> (Vector3<f64>, Vector3<f64>) {
        (link_pose.transform_point(&self.a), link_pose.transform_point(&self.b))
    }
}

/// Result of a primitive-pair distance query.
#[derive(Clone, Debug, PartialEq)]
pub struct CollisionDistance {
    pub pair: (usize, usize),
    /// Surface-to-surface distance; negative when penetrating.
    pub distance: f64,
    /// Closest points on the two core segments.
    pub core_a: Vector3<f64>,
    pub core_b: Vector3<f64>,
    /// Surface witness points.
    pub witness_a: Vector3<f64>,
    pub witness_b: Vector3<f64>,
    /// Unit vector from the second body toward the first.
    pub normal: Vector3<f64>,
}

impl CollisionDistance {
    pub fn between(
        pair: (usize, usize),
        seg_a: (Vector3<f64>, Vector3<f64>),
        radius_a: f64,
        seg_b: (Vector3<f64>, Vector3<f64>),
        radius_b: f64,
    ) -> Self {
        let (core_a, core_b) = segment_closest_points(seg_a, seg_b);
        let delta = core_a - core_b;
        let centre_dist = delta.norm();
        // Coincident cores leave the direction undefined; fall back to +z.
        let normal = if centre_dist > 1e-12 { delta / centre_dist } else { Vector3::z() };
        Self {
            pair,
            distance: centre_dist - radius_a - radius_b,
            core_a,
            core_b,
            witness_a: core_a - normal * radius_a,
            witness_b: core_b + normal * radius_b,
            normal,
        }
    }
}

/// Closest points between segments `p` and `q`.
///
/// Follows the clamped-parameter scheme from Ericson, *Real-Time Collision
/// Detection*, §5.1.9.
pub fn segment_closest_points(
    p: (Vector3<f64>, Vector3<f64>),
    q: (Vector3<f64>, Vector3<f64>),
) -> (Vector3<f64>, Vector3<f64>) {
    const EPS: f64 = 1e-14;
    let d1 = p.1 - p.0;
    let d2 = q.1 - q.0;
    let r = p.0 - q.0;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);

    let (s, t) = if a <= EPS && e <= EPS {
        (0.0, 0.0)
    } else if a <= EPS {
        (0.0, (f / e).clamp(0.0, 1.0))
    } else {
        let c = d1.dot(&r);
        if e <= EPS {
            ((-c / a).clamp(0.0, 1.0), 0.0)
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s = if denom > EPS * a * e { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
            let mut t = (b * s + f) / e;
            if t < 0.0 {
                t = 0.0;
                s = (-c / a).clamp(0.0, 1.0);
            } else if t > 1.0 {
                t = 1.0;
                s = ((b - c) / a).clamp(0.0, 1.0);
            }
            (s, t)
        }
    };
    (p.0 + d1 * s, q.0 + d2 * t)
}
