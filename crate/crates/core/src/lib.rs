//! Indirect object-to-robot pose estimation.
//!
//! An external camera observes both an object and the robot. Keypoint
//! detections of each are turned into camera-frame poses with PnP, and the
//! object pose in the robot base frame follows from
//! `robot_T_object = (cam_T_robot)^-1 * cam_T_object`. The crate also ships
//! a synthetic perception simulator standing in for the keypoint networks and
//! the experiment harness built on it.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod belief;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod harness;
mod lm;
pub mod pnp;
pub mod refine;
pub mod sim;

pub use error::{Error, Result};
pub use filter::{step_response_frames, FilterState};
pub use geometry::{
    compose, geodesic_angle, invert, object_in_robot_frame, project, slerp, CameraIntrinsics, Pixel2, Point3,
    RigidTransform, UnitQuaternion, Vec3,
};
pub use pnp::{solve_pnp, Correspondence, PnPProblem, PnPSolution, RefineConfig};
pub use refine::{refine_pose, sample_model_surface, DenseModelSample, RobustLossConfig};
pub use sim::{NoiseConfig, ObjectModel, RobotKeypointModel, SceneConfig};
