//! Synthetic perception: ground-truth scenes, robot and object keypoint
//! models, and noisy detections standing in for the keypoint networks.

mod object;
mod observe;
mod render;
mod robot;
mod scene;
mod trajectory;

pub use object::{catalog, catalog_object, ObjectModel, ShapeKind, CENTROID_INDEX, OBJECT_KEYPOINTS};
pub use observe::{observe_dense, observe_keypoints};
pub use render::{render_belief_stacks, MapGeometry, RenderedStacks};
pub use robot::{
    forward_kinematics, Joint, KinematicChain, NamedPoint, RobotKeypointModel, ARM_COUNT, JOINTS_PER_ARM,
    JOINT_KEYPOINTS, ROBOT_KEYPOINTS, TORSO_KEYPOINTS,
};
pub use scene::{
    look_target, workspace_center, CameraEnvelope, NoiseConfig, ObjectPlacement, SceneConfig, LOOK_TARGET,
    WORKSPACE_CENTER, WORKSPACE_SIZE,
};
pub use trajectory::{camera_trajectory, TrajectoryKind, MAX_STEP_M, MAX_STEP_RAD, TRAJECTORY_MAX, TRAJECTORY_MIN};

/// Resolves an object given either a catalog name or an inline JSON model.
pub fn resolve_object(spec: &str) -> crate::Result<ObjectModel> {
    if spec.trim_start().starts_with('{') {
        ObjectModel::from_json(spec)
    } else {
        catalog_object(spec).ok_or_else(|| crate::Error::config(format!("unknown object '{spec}'")))
    }
}
