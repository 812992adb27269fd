//! Rigid-body math: rotations, poses, interpolation and the 6D rotation encoding.
//!
//! Rotations are stored as 3x3 matrices whose columns are the frame axes
//! expressed in the parent frame. Quaternions only appear transiently
//! (slerp, serialization).

use std::fmt;
use std::ops::Mul;

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance used when validating orthonormality and unit determinant.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Se3Error {
    #[error("6D rotation is degenerate: {0}")]
    DegenerateRot6D(&'static str),
    #[error("matrix is not a rotation (orthonormality error {ortho:.3e}, det {det})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("quaternion has zero norm")]
    ZeroQuaternion,
    #[error("non-finite value in pose")]
    NonFinite,
}

/// An element of SO(3), stored as a direction-cosine matrix.
#[derive(Clone, Copy, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps a matrix, checking `RᵀR = I` and `det R = +1`.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, Se3Error> {
        let ortho = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !m.iter().all(|v| v.is_finite())
            || ortho > ROTATION_TOLERANCE
            || (det - 1.0).abs() > ROTATION_TOLERANCE
        {
            return Err(Se3Error::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Wraps a matrix the caller already knows to be orthonormal.
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn from_columns(x: Vector3<f64>, y: Vector3<f64>, z: Vector3<f64>) -> Result<Self, Se3Error> {
        Self::from_matrix(Matrix3::from_columns(&[x, y, z]))
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let axis = Unit::new_normalize(*axis);
        Self(*Rotation3::from_axis_angle(&axis, angle).matrix())
    }

    /// Rotation from a scaled-axis (rotation vector).
    pub fn from_scaled_axis(v: &Vector3<f64>) -> Self {
        Self(*Rotation3::from_scaled_axis(*v).matrix())
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::x(), angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::y(), angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle(&Vector3::z(), angle)
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>) -> Self {
        Self(*q.to_rotation_matrix().matrix())
    }

    pub fn to_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.0))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vector3<f64> {
        self.0.column(i).into_owned()
    }

    pub fn x_axis(&self) -> Vector3<f64> {
        self.column(0)
    }

    pub fn y_axis(&self) -> Vector3<f64> {
        self.column(1)
    }

    pub fn z_axis(&self) -> Vector3<f64> {
        self.column(2)
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Rotation vector `ω` with `exp([ω]×) = self`.
    pub fn log(&self) -> Vector3<f64> {
        let q = self.to_quaternion();
        let (w, v) = if q.w < 0.0 { (-q.w, -q.imag()) } else { (q.w, q.imag()) };
        let s = v.norm();
        if s < 1e-12 {
            return v * (2.0 / w);
        }
        v * (2.0 * s.atan2(w) / s)
    }

    /// Geodesic angle in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let q = self.to_quaternion();
        2.0 * q.imag().norm().atan2(q.w.abs())
    }

    /// Geodesic distance to `other`.
    pub fn angle_to(&self, other: &Rotation) -> f64 {
        (self.inverse() * *other).angle()
    }

    /// Largest entry of `|RᵀR − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Matrix3::identity()).abs().max()
    }

    /// Re-orthonormalizes via a quaternion roundtrip.
    pub fn renormalized(&self) -> Self {
        Self::from_quaternion(&self.to_quaternion())
    }
}

impl Default for Rotation {
    fn default() -> Self {
        Self::identity()
    }
}

impl Mul for Rotation {
    type Output = Rotation;

    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl fmt::Debug for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let m = &self.0;
        write!(
            f,
            "Rotation[[{}, {}, {}], [{}, {}, {}], [{}, {}, {}]]",
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)]
        )
    }
}

/// A rigid transform: `p_parent = rotation * p_child + translation`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Pose {
    pub rotation: Rotation,
    pub translation: Vector3<f64>,
}

impl Pose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(rotation: Rotation, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Rotation::identity(), Vector3::new(x, y, z))
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Self::new(rotation, Vector3::zeros())
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        Self::new(r, -(r.transform_vector(&self.translation)))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transform_vector(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transform_vector(v)
    }

    /// Serialized form: translation (x, y, z) then unit quaternion (w, x, y, z).
    pub fn to_array(&self) -> [f64; 7] {
        let q = self.rotation.to_quaternion();
        let t = &self.translation;
        [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
    }

    /// Inverse of [`Pose::to_array`]; the quaternion is normalized on read.
    pub fn from_array(v: [f64; 7]) -> Result<Self, Se3Error> {
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Se3Error::NonFinite);
        }
        let q = Quaternion::new(v[3], v[4], v[5], v[6]);
        if q.norm() < 1e-12 {
            return Err(Se3Error::ZeroQuaternion);
        }
        let uq = UnitQuaternion::from_quaternion(q);
        Ok(Self::new(Rotation::from_quaternion(&uq), Vector3::new(v[0], v[1], v[2])))
    }
}

impl Mul for Pose {
    type Output = Pose;

    fn mul(self, rhs: Pose) -> Pose {
        compose(&self, &rhs)
    }
}

/// Serialized as three rows of three numbers.
impl Serialize for Rotation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let m = &self.0;
        let rows: [[f64; 3]; 3] = std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)]));
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Rotation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 3]; 3]>::deserialize(d)?;
        Rotation::from_matrix(Matrix3::from_fn(|r, c| rows[r][c])).map_err(serde::de::Error::custom)
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = <[f64; 7]>::deserialize(d)?;
        Pose::from_array(v).map_err(serde::de::Error::custom)
    }
}

/// `a ∘ b`: the pose of frame `b` (given relative to `a`) in `a`'s parent.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::new(a.rotation * b.rotation, a.transform_point(&b.translation))
}

/// The first two columns of a rotation matrix, concatenated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.0)
    }
}

pub fn rot_to_6d(r: &Rotation) -> Rot6D {
    let m = r.matrix();
    Rot6D([m[(0, 0)], m[(1, 0)], m[(2, 0)], m[(0, 1)], m[(1, 1)], m[(2, 1)]])
}

/// Gram–Schmidt decode of a 6D rotation.
pub fn sixd_to_rot(v: &Rot6D) -> Result<Rotation, Se3Error> {
    let a = Vector3::new(v.0[0], v.0[1], v.0[2]);
    let b = Vector3::new(v.0[3], v.0[4], v.0[5]);
    if !a.iter().chain(b.iter()).all(|x| x.is_finite()) {
        return Err(Se3Error::DegenerateRot6D("non-finite component"));
    }
    let na = a.norm();
    if na < 1e-12 {
        return Err(Se3Error::DegenerateRot6D("first column is zero"));
    }
    let c1 = a / na;
    let b_perp = b - c1 * c1.dot(&b);
    let nb = b_perp.norm();
    if nb < 1e-12 * b.norm().max(1.0) {
        return Err(Se3Error::DegenerateRot6D("columns are parallel"));
    }
    let c2 = b_perp / nb;
    let c3 = c1.cross(&c2);
    Ok(Rotation::from_matrix_unchecked(Matrix3::from_columns(&[c1, c2, c3])))
}

/// Shortest-arc spherical interpolation between two rotations.
pub fn slerp(a: &Rotation, b: &Rotation, alpha: f64) -> Rotation {
    let qa = a.to_quaternion();
    let mut qb = b.to_quaternion();
    if qa.coords.dot(&qb.coords) < 0.0 {
        qb = UnitQuaternion::new_unchecked(-qb.into_inner());
    }
    // try_slerp fails only when the quaternions are (anti)parallel, i.e. the
    // rotations coincide after the sign flip above.
    let q = qa.try_slerp(&qb, alpha, 1e-12).unwrap_or(qa);
    Rotation::from_quaternion(&q)
}

/// Blends translation linearly and rotation by shortest-arc slerp.
///
/// `alpha` is clamped to `[0, 1]`; the endpoints return `prev` and `cmd`
/// exactly.
pub fn interpolate_pose(prev: &Pose, cmd: &Pose, alpha: f64) -> Pose {
    let alpha = alpha.clamp(0.0, 1.0);
    if alpha == 0.0 {
        return *prev;
    }
    if alpha == 1.0 {
        return *cmd;
    }
    let translation = prev.translation * (1.0 - alpha) + cmd.translation * alpha;
    Pose::new(slerp(&prev.rotation, &cmd.rotation, alpha), translation)
}

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn pose_close(a: &Pose, b: &Pose, tol: f64) -> bool {
        (a.translation - b.translation).amax() <= tol
            && (a.rotation.matrix() - b.rotation.matrix()).amax() <= tol
    }

    fn arb_rotation() -> impl Strategy<Value = Rotation> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("nonzero quaternion", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| {
                Rotation::from_quaternion(&UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)))
            })
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (arb_rotation(), -5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64)
            .prop_map(|(r, x, y, z)| Pose::new(r, Vector3::new(x, y, z)))
    }

    #[test]
    fn compose_identity_and_inverse() {
        let p = Pose::new(Rotation::from_axis_angle(&Vector3::new(1.0, 2.0, 3.0), 0.7), Vector3::new(0.3, -1.0, 2.0));
        assert_eq!(compose(&Pose::identity(), &p), p);
        assert!(pose_close(&compose(&p, &p.inverse()), &Pose::identity(), 1e-12));
    }

    #[test]
    fn compose_pure_translations() {
        let c = compose(&Pose::from_translation(1.0, 0.0, 0.0), &Pose::from_translation(0.0, 2.0, 0.0));
        assert_eq!(c.translation, Vector3::new(1.0, 2.0, 0.0));
        assert_eq!(c.rotation, Rotation::identity());
    }

    #[test]
    fn rot6d_examples() {
        assert_eq!(rot_to_6d(&Rotation::identity()).0, [1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let yaw = rot_to_6d(&Rotation::rot_z(FRAC_PI_2));
        let expected = [0.0, 1.0, 0.0, -1.0, 0.0, 0.0];
        for (a, b) in yaw.0.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn sixd_decode_examples() {
        let id = sixd_to_rot(&Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])).unwrap();
        assert_eq!(id, Rotation::identity());
        let scaled = sixd_to_rot(&Rot6D([2.0, 0.0, 0.0, 0.0, 3.0, 0.0])).unwrap();
        assert_eq!(scaled, Rotation::identity());
        let skew = sixd_to_rot(&Rot6D([1.0, 0.0, 0.0, 1.0, 1.0, 0.0])).unwrap();
        assert_eq!(skew, Rotation::identity());
    }

    #[test]
    fn sixd_decode_degenerate() {
        assert!(sixd_to_rot(&Rot6D([0.0, 0.0, 0.0, 0.0, 1.0, 0.0])).is_err());
        assert!(sixd_to_rot(&Rot6D([1.0, 0.0, 0.0, -2.0, 0.0, 0.0])).is_err());
        assert!(sixd_to_rot(&Rot6D([1.0, f64::NAN, 0.0, 0.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn interpolate_endpoints_and_midpoint() {
        let prev = Pose::identity();
        let cmd = Pose::new(Rotation::rot_z(FRAC_PI_2), Vector3::new(0.2, 0.0, 0.0));
        assert_eq!(interpolate_pose(&prev, &cmd, 0.0), prev);
        assert_eq!(interpolate_pose(&prev, &cmd, 1.0), cmd);
        let mid = interpolate_pose(&prev, &cmd, 0.5);
        assert_relative_eq!(mid.translation, Vector3::new(0.1, 0.0, 0.0), epsilon = 1e-15);
        // Quaternion slerp oracle: half the angle about the same axis.
        let expected = Rotation::rot_z(FRAC_PI_4);
        assert!((mid.rotation.matrix() - expected.matrix()).amax() < 1e-12);
    }

    #[test]
    fn slerp_takes_shortest_arc() {
        let a = Rotation::rot_z(170f64.to_radians());
        let b = Rotation::rot_z(-170f64.to_radians());
        let mid = slerp(&a, &b, 0.5);
        assert_relative_eq!(mid.angle_to(&Rotation::rot_z(PI)), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn pose_array_roundtrip() {
        let p = Pose::new(Rotation::rot_x(0.4) * Rotation::rot_z(-1.1), Vector3::new(1.0, -2.0, 0.5));
        let back = Pose::from_array(p.to_array()).unwrap();
        assert!(pose_close(&p, &back, 1e-12));
        assert!(Pose::from_array([0.0; 7]).is_err());
        let json = serde_json::to_string(&p).unwrap();
        let parsed: Pose = serde_json::from_str(&json).unwrap();
        assert!(pose_close(&p, &parsed, 1e-12));
    }

    #[test]
    fn from_matrix_rejects_reflections() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Rotation::from_matrix(m).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.2), 3.2 - 2.0 * PI, epsilon = 1e-15);
        assert_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI, epsilon = 1e-15);
        assert_eq!(wrap_angle(0.5), 0.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn composition_stays_orthonormal(a in arb_pose(), b in arb_pose()) {
            let c = compose(&a, &b);
            prop_assert!(c.rotation.orthonormality_error() <= 1e-9);
            prop_assert!((c.rotation.matrix().determinant() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn sixd_roundtrip(r in arb_rotation()) {
            let back = sixd_to_rot(&rot_to_6d(&r)).unwrap();
            prop_assert!((back.matrix() - r.matrix()).amax() <= 1e-9);
        }

        #[test]
        fn slerp_is_geodesic(a in arb_rotation(), b in arb_rotation(), k in 0usize..=10) {
            let alpha = k as f64 / 10.0;
            let prev = Pose::from_rotation(a);
            let cmd = Pose::from_rotation(b);
            let total = a.angle_to(&b);
            let interp = interpolate_pose(&prev, &cmd, alpha);
            prop_assert!((interp.rotation.angle_to(&a) - alpha * total).abs() <= 1e-7);
        }
    }
}
