use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, RigidTransform, UnitQuaternion, Vec3};

pub const JOINTS_PER_ARM: usize = 7;
pub const ARM_COUNT: usize = 2;
pub const TORSO_KEYPOINTS: usize = 10;
pub const JOINT_KEYPOINTS: usize = JOINTS_PER_ARM * ARM_COUNT;
pub const ROBOT_KEYPOINTS: usize = JOINT_KEYPOINTS + TORSO_KEYPOINTS;

const DEFAULT_ROBOT_JSON: &str = include_str!("../../data/robot_baxter_like.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPoint {
    pub name: String,
    pub position: Point3,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Joint {
    pub name: String,
    /// Fixed translation from the previous joint frame.
    pub offset: Vec3,
    pub axis: Vec3,
    /// `[lower, upper]`, radians.
    pub limits: [f64; 2],
}

/// Serial chain of revolute joints; each joint frame is the previous frame
/// translated by the joint's offset, then rotated about its axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicChain {
    pub name: String,
    /// Chain root in the robot base frame.
    pub base: RigidTransform,
    pub joints: Vec<Joint>,
}

impl KinematicChain {
    pub fn validate(&self) -> Result<()> {
        for (i, j) in self.joints.iter().enumerate() {
            let [lo, hi] = j.limits;
            if !(lo <= hi) || !(j.axis.norm() > 1e-9) || !j.offset.iter().all(|v| v.is_finite()) {
                return Err(Error::config(format!(
                    "chain '{}' joint {i} ('{}') is malformed",
                    self.name, j.name
                )));
            }
        }
        Ok(())
    }

    /// Joint frames, in order, for the given angles.
    pub fn joint_frames(&self, angles: &[f64]) -> Result<Vec<RigidTransform>> {
        if angles.len() != self.joints.len() {
            return Err(Error::config(format!(
                "chain '{}' has {} joints, got {} angles",
                self.name,
                self.joints.len(),
                angles.len()
            )));
        }
        let mut frame = self.base;
        let mut out = Vec::with_capacity(self.joints.len());
        for (i, (joint, &angle)) in self.joints.iter().zip(angles).enumerate() {
            let [lower, upper] = joint.limits;
            if !(angle >= lower && angle <= upper) {
                return Err(Error::JointLimitViolation {
                    joint: i,
                    angle,
                    lower,
                    upper,
                });
            }
            frame =
                frame
                    .compose(&RigidTransform::from_translation(joint.offset))
                    .compose(&RigidTransform::from_rotation(UnitQuaternion::from_axis_angle(
                        &joint.axis,
                        angle,
                    )));
            out.push(frame);
        }
        Ok(out)
    }
}

/// Position of every joint of `chain` in the robot frame.
pub fn forward_kinematics(chain: &KinematicChain, joint_angles: &[f64]) -> Result<Vec<Point3>> {
    Ok(chain
        .joint_frames(joint_angles)?
        .into_iter()
        .map(|f| f.translation)
        .collect())
}

/// Robot described by joint keypoints on two arms plus fixed torso points.
///
/// Keypoint order is every joint of arm 0, every joint of arm 1, then the
/// torso points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotKeypointModel {
    pub name: String,
    pub torso: Vec<NamedPoint>,
    pub arms: Vec<KinematicChain>,
    /// Joint angles used when a scene does not specify any.
    pub ready_pose: Vec<f64>,
}

impl Default for RobotKeypointModel {
    fn default() -> Self {
        Self::from_json(DEFAULT_ROBOT_JSON).expect("bundled robot model is valid")
    }
}

impl RobotKeypointModel {
    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.torso.len() != TORSO_KEYPOINTS {
            return Err(Error::config(format!(
                "robot needs {TORSO_KEYPOINTS} torso keypoints, got {}",
                self.torso.len()
            )));
        }
        if self.arms.len() != ARM_COUNT {
            return Err(Error::config(format!(
                "robot needs {ARM_COUNT} arms, got {}",
                self.arms.len()
            )));
        }
        for arm in &self.arms {
            if arm.joints.len() != JOINTS_PER_ARM {
                return Err(Error::config(format!(
                    "arm '{}' needs {JOINTS_PER_ARM} joints, got {}",
                    arm.name,
                    arm.joints.len()
                )));
            }
            arm.validate()?;
        }
        if self.ready_pose.len() != JOINT_KEYPOINTS {
            return Err(Error::config("ready_pose must list 14 joint angles"));
        }
        self.keypoints(&self.ready_pose)?;
        Ok(())
    }

    /// All 24 keypoints in the robot base frame.
    pub fn keypoints(&self, joint_angles: &[f64]) -> Result<Vec<Point3>> {
        if joint_angles.len() != JOINT_KEYPOINTS {
            return Err(Error::config(format!(
                "expected {JOINT_KEYPOINTS} joint angles, got {}",
                joint_angles.len()
            )));
        }
        let mut out = Vec::with_capacity(ROBOT_KEYPOINTS);
        for (arm, angles) in self.arms.iter().zip(joint_angles.chunks(JOINTS_PER_ARM)) {
            out.extend(forward_kinematics(arm, angles)?);
        }
        out.extend(self.torso.iter().map(|p| p.position));
        Ok(out)
    }

    pub fn joint_limits(&self) -> Vec<[f64; 2]> {
        self.arms
            .iter()
            .flat_map(|a| a.joints.iter().map(|j| j.limits))
            .collect()
    }
}
