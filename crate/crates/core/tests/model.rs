mod common;

use nalgebra::Vector3;
use rand::Rng;
use wbc_core::model::{
    forward_kinematics, frame_jacobian, load_model, GeneralizedState, ModelError, RobotModel, REFERENCE_MODEL_JSON,
};

fn random_state(model: &RobotModel, r: &mut impl Rng) -> GeneralizedState {
    let mut q = model.nominal_posture().clone();
    for (i, lim) in model.position_limits().iter().enumerate() {
        let v = q[i] + r.gen_range(-0.4..0.4);
        q[i] = lim.map_or(v, |[lo, hi]| v.clamp(lo, hi));
    }
    q
}

#[test]
fn reference_model_shape() {
    let m = RobotModel::reference();
    assert_eq!(m.n_v(), 25);
    for frame in ["left_gripper", "right_gripper", "head", "neck_mount", "torso_ref", "base_ref"] {
        assert!(m.has_frame(frame), "missing {frame}");
    }
    for j in ["torso_0", "torso_5", "head_0", "head_1"] {
        m.coordinate(j).unwrap();
    }
    assert!(!m.collision_pairs().is_empty());
}

#[test]
fn document_round_trip() {
    let m = RobotModel::reference();
    let again = load_model(&m.to_json()).unwrap();
    assert_eq!(again.to_json(), m.to_json());
    assert_eq!(load_model(REFERENCE_MODEL_JSON).unwrap().n_v(), 25);
}

#[test]
fn invalid_documents_are_rejected() {
    assert!(load_model("{").is_err());
    let mut doc: serde_json::Value = serde_json::from_str(REFERENCE_MODEL_JSON).unwrap();
    doc["joints"][3]["velocity_limit"] = serde_json::json!(-1.0);
    assert!(matches!(load_model(&doc.to_string()), Err(ModelError::Validation(_))));
}

#[test]
fn jacobian_matches_finite_differences() {
    let m = RobotModel::reference();
    let mut r = common::rng(11);
    let h = 1e-6;
    for _ in 0..5 {
        let q = random_state(&m, &mut r);
        for frame in ["left_gripper", "right_gripper", "head"] {
            let j = frame_jacobian(&m, &q, frame).unwrap();
            let p0 = forward_kinematics(&m, &q, frame).unwrap();
            for i in 0..m.n_v() {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                let (a, b) = (forward_kinematics(&m, &qp, frame).unwrap(), forward_kinematics(&m, &qm, frame).unwrap());
                let lin = (a.translation - b.translation) / (2.0 * h);
                // World-frame angular velocity from R(q+h) R(q-h)^T.
                let rel = a.rotation.matrix() * b.rotation.matrix().transpose();
                let w = Vector3::new(rel[(2, 1)] - rel[(1, 2)], rel[(0, 2)] - rel[(2, 0)], rel[(1, 0)] - rel[(0, 1)]) / (4.0 * h);
                let col = j.column(i);
                for k in 0..3 {
                    assert!((col[k] - lin[k]).abs() < 1e-6, "{frame} q_{i} lin {k}: {} vs {}", col[k], lin[k]);
                    assert!((col[3 + k] - w[k]).abs() < 1e-6, "{frame} q_{i} ang {k}: {} vs {}", col[3 + k], w[k]);
                }
            }
            assert!(p0.rotation.orthonormality_error() < 1e-12);
        }
    }
}

fn segment_distance(p: (Vector3<f64>, Vector3<f64>), q: (Vector3<f64>, Vector3<f64>)) -> f64 {
    // For fixed s the best t is a clamped projection; the outer function is
    // convex in s, so ternary search finds the minimum.
    let at = |s: f64| {
        let x = p.0 + (p.1 - p.0) * s;
        let d = q.1 - q.0;
        let len2 = d.norm_squared();
        let t = if len2 < 1e-18 { 0.0 } else { ((x - q.0).dot(&d) / len2).clamp(0.0, 1.0) };
        (x - (q.0 + d * t)).norm()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let (a, b) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if at(a) < at(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    at(0.5 * (lo + hi)).min(at(0.0)).min(at(1.0))
}

#[test]
fn collision_distances_match_ternary_search() {
    let m = RobotModel::reference();
    let mut r = common::rng(12);
    for _ in 0..10 {
        let q = random_state(&m, &mut r);
        let kin = m.kinematics(&q).unwrap();
        for &(a, b) in m.collision_pairs() {
            let (pa, pb) = (&m.collision_bodies()[a], &m.collision_bodies()[b]);
            let (ta, tb) = (kin.link_pose(pa.link_index()), kin.link_pose(pb.link_index()));
            let sa = (ta.transform_point(&pa.a), ta.transform_point(&pa.b));
            let sb = (tb.transform_point(&pb.a), tb.transform_point(&pb.b));
            let expect = segment_distance(sa, sb) - pa.radius - pb.radius;
            let got = kin.collision_distance(a, b).distance;
            assert!((got - expect).abs() < 1e-9, "pair ({a}, {b}): {got} vs {expect}");
        }
    }
}

#[test]
fn wrong_state_length_is_an_error() {
    let m = RobotModel::reference();
    assert!(forward_kinematics(&m, &GeneralizedState::zeros(3), "head").is_err());
    assert!(forward_kinematics(&m, m.nominal_posture(), "nope").is_err());
}
