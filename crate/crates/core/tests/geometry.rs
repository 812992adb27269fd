mod common;

use nalgebra::Vector3;
use rand::Rng;
use wbc_core::geometry::{
    center_pixel, downsample_pointmap, nearest_valid_to_center, to_gripper_frame, FrameTag, Pointmap,
};
use wbc_core::se3::{Pose, Rotation};

fn brute_nearest(pm: &Pointmap) -> Option<(usize, usize)> {
    let (cr, cc) = center_pixel(pm);
    let mut best: Option<(i64, usize, usize)> = None;
    for r in 0..pm.height() {
        for c in 0..pm.width() {
            if !pm.is_valid(r, c) {
                continue;
            }
            let d2 = (r as i64 - cr as i64).pow(2) + (c as i64 - cc as i64).pow(2);
            if best.is_none_or(|b| (d2, r, c) < b) {
                best = Some((d2, r, c));
            }
        }
    }
    best.map(|(_, r, c)| (r, c))
}

#[test]
fn nearest_valid_matches_brute_force() {
    let mut rng = common::rng(31);
    for case in 0..200 {
        let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
        let mut pm = Pointmap::from_fn(w, h, |r, c| Vector3::new(c as f64, r as f64, 1.0));
        let keep = rng.gen_range(0.0..0.3);
        for r in 0..h {
            for c in 0..w {
                pm.set_valid(r, c, rng.gen_bool(keep));
            }
        }
        assert_eq!(nearest_valid_to_center(&pm), brute_nearest(&pm), "case {case} ({w}x{h})");
    }
}

#[test]
fn downsample_takes_block_centres() {
    let pm = Pointmap::from_fn(64, 32, |r, c| Vector3::new(c as f64, r as f64, 0.0));
    let small = downsample_pointmap(&pm, 8).unwrap();
    assert_eq!((small.width(), small.height()), (8, 4));
    assert_eq!(*small.point(1, 2), Vector3::new(20.0, 12.0, 0.0));
    assert!(downsample_pointmap(&pm, 7).is_err());
    assert!(downsample_pointmap(&pm, 0).is_err());
}

#[test]
fn binary_round_trip() {
    let mut pm = Pointmap::from_fn(5, 3, |r, c| Vector3::new(c as f64 * 0.1, r as f64 - 0.5, 1.0 / 3.0));
    pm.set_valid(1, 2, false);
    let mut buf = Vec::new();
    pm.write_to(&mut buf).unwrap();
    let back = Pointmap::read_from(buf.as_slice()).unwrap();
    // Points are stored as f32.
    for (a, b) in back.points().iter().zip(pm.points()) {
        assert_eq!(*a, b.map(|v| v as f32 as f64));
    }
    assert_eq!(back.validity(), pm.validity());
    assert!(Pointmap::read_from(&buf[..buf.len() - 1]).is_err());
}

#[test]
fn gripper_frame_transform_matches_matrix_oracle() {
    let gripper = Pose::new(Rotation::rot_y(0.4), Vector3::new(0.5, 0.1, 0.9));
    let camera = Pose::new(Rotation::rot_z(-0.7), Vector3::new(0.0, 0.0, 1.5));
    let pm = Pointmap::from_fn(4, 4, |r, c| Vector3::new(c as f64, r as f64, 2.0));
    let tagged = to_gripper_frame(&pm, &camera, &gripper, FrameTag::LeftGripper);
    assert_eq!(tagged.frame, FrameTag::LeftGripper);
    for (got, p) in tagged.value.points().iter().zip(pm.points()) {
        let world = camera.rotation.matrix() * p + camera.translation;
        let expect = gripper.rotation.matrix().transpose() * (world - gripper.translation);
        assert!((got - expect).amax() < 1e-12);
    }
}
