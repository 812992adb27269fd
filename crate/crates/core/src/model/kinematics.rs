use nalgebra::{Matrix3xX, Matrix6xX, Vector3};

use super::{CollisionDistance, FrameId, GeneralizedState, JointType, RobotModel};
use crate::se3::{compose, Pose, Rotation};

/// Link poses evaluated at one configuration.
///
/// Building this once per tick lets every Jacobian and distance query
/// share the same forward pass.
pub struct Kinematics<'m> {
    model: &'m RobotModel,
    link_poses: Vec<Pose>,
    /// World pose of each joint frame (parent link ∘ origin), before motion.
    joint_frames: Vec<Pose>,
    q: GeneralizedState,
}

fn joint_motion(kind: JointType, axis: &Vector3<f64>, q: &[f64]) -> Pose {
    match kind {
        JointType::Revolute => Pose::from_rotation(Rotation::from_axis_angle(axis, q[0])),
        JointType::Prismatic => Pose::new(Rotation::identity(), axis * q[0]),
        JointType::PlanarBase => Pose::new(Rotation::rot_z(q[2]), Vector3::new(q[0], q[1], 0.0)),
    }
}

impl<'m> Kinematics<'m> {
    pub(crate) fn new(model: &'m RobotModel, q: &GeneralizedState) -> Self {
        let mut link_poses = vec![Pose::identity(); model.links.len()];
        let mut joint_frames = vec![Pose::identity(); model.joints.len()];
        for &ji in &model.topo_order {
            let j = &model.joints[ji];
            let frame = compose(&link_poses[j.parent], &j.spec.origin);
            let qs = &q.as_slice()[j.q_index..j.q_index + j.dof()];
            link_poses[j.child] = compose(&frame, &joint_motion(j.spec.joint_type, &j.spec.axis, qs));
            joint_frames[ji] = frame;
        }
        Self { model, link_poses, joint_frames, q: q.clone() }
    }

    pub fn model(&self) -> &RobotModel {
        self.model
    }

    pub fn state(&self) -> &GeneralizedState {
        &self.q
    }

    pub fn link_pose(&self, link: usize) -> &Pose {
        &self.link_poses[link]
    }

    pub fn frame_pose(&self, frame: FrameId) -> Pose {
        let link = self.link_poses[frame.link];
        match frame.named {
            Some(i) => compose(&link, &self.model.named[i].1.offset),
            None => link,
        }
    }

    /// Convenience lookup by name; panics on unknown frames.
    pub fn pose(&self, name: &str) -> Pose {
        self.frame_pose(self.model.frame(name).expect("known frame"))
    }

    /// Linear-velocity Jacobian of a world point rigidly attached to `link`.
    pub fn point_jacobian(&self, link: usize, point: &Vector3<f64>) -> Matrix3xX<f64> {
        let mut jac = Matrix3xX::zeros(self.model.n_v());
        self.fill_columns(link, point, |col, lin, _| jac.set_column(col, &lin));
        jac
    }

    /// Geometric Jacobian of a frame origin: linear rows 0..3, angular rows 3..6,
    /// both in the world frame.
    pub fn frame_jacobian(&self, frame: FrameId) -> Matrix6xX<f64> {
        let p = self.frame_pose(frame).translation;
        let mut jac = Matrix6xX::zeros(self.model.n_v());
        self.fill_columns(frame.link, &p, |col, lin, ang| {
            jac.fixed_view_mut::<3, 1>(0, col).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, col).copy_from(&ang);
        });
        jac
    }

    fn fill_columns(
        &self,
        link: usize,
        point: &Vector3<f64>,
        mut set: impl FnMut(usize, Vector3<f64>, Vector3<f64>),
    ) {
        for &ji in &self.model.link_paths[link] {
            let j = &self.model.joints[ji];
            let frame = &self.joint_frames[ji];
            match j.spec.joint_type {
                JointType::Revolute => {
                    let axis = frame.rotation.transform_vector(&j.spec.axis);
                    set(j.q_index, axis.cross(&(point - frame.translation)), axis);
                }
                JointType::Prismatic => {
                    let axis = frame.rotation.transform_vector(&j.spec.axis);
                    set(j.q_index, axis, Vector3::zeros());
                }
                JointType::PlanarBase => {
                    let q = &self.q.as_slice()[j.q_index..j.q_index + 3];
                    set(j.q_index, frame.rotation.x_axis(), Vector3::zeros());
                    set(j.q_index + 1, frame.rotation.y_axis(), Vector3::zeros());
                    let z = frame.rotation.z_axis();
                    let pivot = frame.transform_point(&Vector3::new(q[0], q[1], 0.0));
                    set(j.q_index + 2, z.cross(&(point - pivot)), z);
                }
            }
        }
    }

    /// Signed distance between two collision primitives.
    pub fn collision_distance(&self, a: usize, b: usize) -> CollisionDistance {
        let bodies = &self.model.collision_bodies;
        let (pa, pb) = (&bodies[a], &bodies[b]);
        let seg_a = pa.world_segment(&self.link_poses[pa.link_index]);
        let seg_b = pb.world_segment(&self.link_poses[pb.link_index]);
        CollisionDistance::between((a, b), seg_a, pa.radius, seg_b, pb.radius)
    }

    /// Distances for every configured collision pair.
    pub fn all_collision_distances(&self) -> Vec<CollisionDistance> {
        self.model.collision_pairs().iter().map(|&(a, b)| self.collision_distance(a, b)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::se3::{compose, Rotation};
    use nalgebra::{Matrix6xX, Vector3};
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    const TWO_LINK: &str = r#"{
        "joints": [
            {"name": "shoulder", "parent_link": "root", "child_link": "upper", "type": "revolute",
             "axis": [0,0,1], "velocity_limit": 1.0},
            {"name": "elbow", "parent_link": "upper", "child_link": "lower", "type": "revolute",
             "axis": [0,0,1], "origin": [0.3,0,0, 1,0,0,0], "velocity_limit": 1.0}
        ],
        "named_frames": {"tip": {"link": "lower", "offset": [0.2,0,0, 1,0,0,0]}}
    }"#;

    fn fd_jacobian(model: &RobotModel, q: &GeneralizedState, frame: &str, h: f64) -> Matrix6xX<f64> {
        let n = model.n_v();
        let mut jac = Matrix6xX::zeros(n);
        for i in 0..n {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            let pp = forward_kinematics(model, &qp, frame).unwrap();
            let pm = forward_kinematics(model, &qm, frame).unwrap();
            let lin = (pp.translation - pm.translation) / (2.0 * h);
            let ang = (pp.rotation * pm.rotation.inverse()).log() / (2.0 * h);
            jac.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
            jac.fixed_view_mut::<3, 1>(3, i).copy_from(&ang);
        }
        jac
    }

    #[test]
    fn root_frame_is_identity_at_zero() {
        let m = RobotModel::reference();
        let q = GeneralizedState::zeros(m.n_v());
        assert_eq!(forward_kinematics(&m, &q, m.root_link()).unwrap(), Pose::identity());
    }

    #[test]
    fn two_link_fk() {
        let m = load_model(TWO_LINK).unwrap();
        let p = forward_kinematics(&m, &GeneralizedState::from_slice(&[0.0, 0.0]), "tip").unwrap();
        assert!((p.translation - Vector3::new(0.5, 0.0, 0.0)).amax() < 1e-15);
        let p = forward_kinematics(&m, &GeneralizedState::from_slice(&[FRAC_PI_2, 0.0]), "tip").unwrap();
        assert!((p.translation - Vector3::new(0.0, 0.5, 0.0)).amax() < 1e-15);
    }

    #[test]
    fn unknown_frame_errors() {
        let m = load_model(TWO_LINK).unwrap();
        let q = GeneralizedState::zeros(2);
        assert!(matches!(forward_kinematics(&m, &q, "nope"), Err(ModelError::UnknownFrame(_))));
        assert!(matches!(frame_jacobian(&m, &q, "nope"), Err(ModelError::UnknownFrame(_))));
    }

    #[test]
    fn revolute_column_is_omega_cross_r() {
        let doc = r#"{"joints": [{"name": "j", "parent_link": "root", "child_link": "l",
            "type": "revolute", "axis": [0,0,1], "velocity_limit": 1.0}],
            "named_frames": {"p": {"link": "l", "offset": [0.3,0,0, 1,0,0,0]}}}"#;
        let m = load_model(doc).unwrap();
        let j = frame_jacobian(&m, &GeneralizedState::zeros(1), "p").unwrap();
        let col: Vec<f64> = j.column(0).iter().copied().collect();
        let expected = [0.0, 0.3, 0.0, 0.0, 0.0, 1.0];
        for (a, b) in col.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn prismatic_column() {
        let doc = r#"{"joints": [{"name": "j", "parent_link": "root", "type": "prismatic",
            "axis": [1,0,0], "velocity_limit": 1.0}]}"#;
        let m = load_model(doc).unwrap();
        let j = frame_jacobian(&m, &GeneralizedState::from_slice(&[0.4]), "j").unwrap();
        let col: Vec<f64> = j.column(0).iter().copied().collect();
        assert_eq!(col, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn fk_chains_through_joint_transforms() {
        let m = RobotModel::reference();
        let mut q = m.nominal_posture().clone();
        q[0] = 0.3;
        q[2] = 0.7;
        let kin = m.kinematics(&q).unwrap();
        for &ji in &m.topo_order {
            let j = &m.joints[ji];
            let qs = &q.as_slice()[j.q_index..j.q_index + j.dof()];
            let local = compose(&j.spec.origin, &super::joint_motion(j.spec.joint_type, &j.spec.axis, qs));
            let chained = compose(kin.link_pose(j.parent), &local);
            let direct = kin.link_pose(j.child);
            assert!((chained.translation - direct.translation).amax() <= 1e-12);
            assert!((chained.rotation.matrix() - direct.rotation.matrix()).amax() <= 1e-12);
        }
    }

    #[test]
    fn nominal_posture_geometry_is_sane() {
        let m = RobotModel::reference();
        let kin = m.kinematics(m.nominal_posture()).unwrap();
        let l = kin.pose("left_gripper");
        let r = kin.pose("right_gripper");
        // Hands in front of the robot, mirrored about the sagittal plane.
        assert!(l.translation.x > 0.25 && r.translation.x > 0.25);
        assert!((l.translation.y + r.translation.y).abs() < 1e-12);
        assert!(l.translation.y > 0.1);
        // Gripper approach axis points forward.
        assert!(l.rotation.z_axis().x > 0.8);
        // Head optical frame looks forward with x to the right.
        let head = kin.pose("head");
        assert!((head.rotation.z_axis() - Vector3::x()).amax() < 1e-12);
        assert!((head.rotation.x_axis() + Vector3::y()).amax() < 1e-12);
        // Every configured pair starts outside the influence band.
        for d in kin.all_collision_distances() {
            assert!(d.distance > 0.02, "pair {:?} at {}", d.pair, d.distance);
        }
        let _ = Rotation::identity();
    }

    fn random_state(model: &RobotModel, seed: &[f64]) -> GeneralizedState {
        let limits = model.position_limits();
        let mut q = GeneralizedState::zeros(model.n_v());
        for i in 0..model.n_v() {
            let u = seed[i % seed.len()] * (1.0 + i as f64 * 0.37) % 1.0;
            q[i] = match limits[i] {
                Some([lo, hi]) => lo + (hi - lo) * u,
                None => 4.0 * u - 2.0,
            };
        }
        q
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn jacobian_matches_finite_differences(seed in proptest::collection::vec(0.0..1.0f64, 7)) {
            let m = RobotModel::reference();
            let q = random_state(&m, &seed);
            for frame in ["left_gripper", "right_gripper", "head", "torso_ref", "base_ref"] {
                let analytic = frame_jacobian(&m, &q, frame).unwrap();
                let numeric = fd_jacobian(&m, &q, frame, 1e-6);
                let err = (analytic - numeric).amax();
                prop_assert!(err <= 1e-5, "{frame}: {err}");
            }
        }

        #[test]
        fn two_link_jacobian_matches_fd(a in -3.0..3.0f64, b in -3.0..3.0f64) {
            let m = load_model(TWO_LINK).unwrap();
            let q = GeneralizedState::from_slice(&[a, b]);
            let an = frame_jacobian(&m, &q, "tip").unwrap();
            let fd = fd_jacobian(&m, &q, "tip", 1e-6);
            let err = (&an - &fd).amax();
            prop_assert!(err <= 1e-5, "{an}{fd}");
        }
    }
}
