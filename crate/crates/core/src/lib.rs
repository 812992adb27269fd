//! Whole-body mobile manipulation control.
//!
//! Timestamped end-effector pose and look-at commands are turned into
//! coordinated base, torso, arm and neck motion by a constrained
//! differential-IK quadratic program. The crate also contains the
//! latency-matching execution bridge that feeds the controller and a
//! deterministic kinematic simulator used for verification.

pub mod se3;
pub mod model;
pub mod ik;
pub mod gaze;
pub mod geometry;
pub mod bridge;
pub mod sim;
