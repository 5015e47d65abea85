use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, RigidTransform, Vec3};

/// Center of the graspable workspace in the robot frame, on the table plane.
pub const WORKSPACE_CENTER: [f64; 3] = [0.50, -0.10, 0.0];
/// Workspace extents (x, y, z), meters.
pub const WORKSPACE_SIZE: [f64; 3] = [0.20, 0.20, 0.15];
/// Point cameras aim at: between the workspace and the torso so that both
/// stay in view.
pub const LOOK_TARGET: [f64; 3] = [0.30, -0.08, 0.12];

pub fn workspace_center() -> Vec3 {
    Vec3::from(WORKSPACE_CENTER)
}

pub fn look_target() -> Vec3 {
    Vec3::from(LOOK_TARGET)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectPlacement {
    /// Catalog name of the object model.
    pub model: String,
    /// `robot_T_object`.
    pub pose: RigidTransform,
}

/// Ground-truth state of one simulated frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub intrinsics: CameraIntrinsics,
    /// `robot_T_camera`.
    pub camera_in_robot: RigidTransform,
    #[serde(default)]
    pub objects: Vec<ObjectPlacement>,
    /// 14 arm joint angles; empty means the robot model's ready pose.
    #[serde(default)]
    pub joint_angles: Vec<f64>,
    #[serde(default)]
    pub check_envelope: bool,
}

impl SceneConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(s)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if !self.joint_angles.is_empty() && self.joint_angles.len() != 14 {
            return Err(Error::config(format!(
                "scene lists {} joint angles, expected 14",
                self.joint_angles.len()
            )));
        }
        if self.check_envelope {
            CameraEnvelope::default().check(&self.camera_in_robot)?;
        }
        Ok(())
    }

    /// `cam_T_robot`.
    pub fn cam_robot(&self) -> RigidTransform {
        self.camera_in_robot.inverse()
    }

    /// `cam_T_object` for placement `i`.
    pub fn cam_object(&self, i: usize) -> RigidTransform {
        self.cam_robot().compose(&self.objects[i].pose)
    }
}

/// Allowed camera placements: in front of the robot, within a horizontal
/// distance band, an azimuth cone and a height band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraEnvelope {
    pub min_distance: f64,
    pub max_distance: f64,
    /// Half-angle from the robot's forward axis, radians.
    pub max_azimuth: f64,
    pub min_height: f64,
    pub max_height: f64,
}

impl Default for CameraEnvelope {
    fn default() -> Self {
        Self {
            min_distance: 1.0,
            max_distance: 2.0,
            max_azimuth: 45f64.to_radians(),
            min_height: 0.25,
            max_height: 0.55,
        }
    }
}

impl CameraEnvelope {
    pub fn check(&self, camera_in_robot: &RigidTransform) -> Result<()> {
        let p = camera_in_robot.translation;
        let d = p.x.hypot(p.y);
        let az = p.y.atan2(p.x);
        let eps = 1e-9;
        if d < self.min_distance - eps
            || d > self.max_distance + eps
            || az.abs() > self.max_azimuth + eps
            || p.z < self.min_height - eps
            || p.z > self.max_height + eps
        {
            return Err(Error::config(format!(
                "camera at ({:.3}, {:.3}, {:.3}) is outside the placement envelope",
                p.x, p.y, p.z
            )));
        }
        Ok(())
    }

    /// Camera at horizontal distance `distance`, azimuth `azimuth` and
    /// height `height`, aimed at `target` (`robot_T_camera`).
    pub fn place(distance: f64, azimuth: f64, height: f64, target: &Vec3) -> RigidTransform {
        let eye = Vec3::new(distance * azimuth.cos(), distance * azimuth.sin(), height);
        RigidTransform::look_at(&eye, target, &Vec3::z())
    }
}

fn default_blob_sigma() -> f64 {
    2.0
}

fn default_outlier_px() -> f64 {
    50.0
}

/// Perception error model. The named presets are simulator settings, not
/// measurements of any real detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Isotropic keypoint noise, image pixels.
    #[serde(default)]
    pub pixel_sigma: f64,
    /// Probability that a keypoint goes undetected.
    #[serde(default)]
    pub dropout_prob: f64,
    /// Expected spurious peaks per rendered belief map.
    #[serde(default)]
    pub false_positive_rate: f64,
    /// Rendered blob width, belief-map pixels.
    #[serde(default = "default_blob_sigma")]
    pub blob_sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// Probability that a dense refinement observation is a gross outlier.
    #[serde(default)]
    pub dense_outlier_prob: f64,
    /// Displacement of dense outliers, image pixels.
    #[serde(default = "default_outlier_px")]
    pub dense_outlier_px: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self::clean()
    }
}

impl NoiseConfig {
    pub fn clean() -> Self {
        Self {
            pixel_sigma: 0.0,
            dropout_prob: 0.0,
            false_positive_rate: 0.0,
            blob_sigma: default_blob_sigma(),
            seed: 0,
            dense_outlier_prob: 0.0,
            dense_outlier_px: default_outlier_px(),
        }
    }

    pub fn nominal() -> Self {
        Self {
            pixel_sigma: 2.0,
            dropout_prob: 0.05,
            false_positive_rate: 0.1,
            dense_outlier_prob: 0.05,
            ..Self::clean()
        }
    }

    pub fn harsh() -> Self {
        Self {
            pixel_sigma: 4.0,
            dropout_prob: 0.2,
            false_positive_rate: 0.5,
            dense_outlier_prob: 0.2,
            ..Self::clean()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "clean" => Some(Self::clean()),
            "nominal" => Some(Self::nominal()),
            "harsh" => Some(Self::harsh()),
            _ => None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let n: Self = serde_json::from_str(s)?;
        n.validate()?;
        Ok(n)
    }

    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            self.pixel_sigma,
            self.dropout_prob,
            self.false_positive_rate,
            self.blob_sigma,
            self.dense_outlier_prob,
            self.dense_outlier_px,
        ]
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0);
        if !non_negative || self.dropout_prob > 1.0 || self.dense_outlier_prob > 1.0 {
            return Err(Error::config(format!("invalid noise configuration {self:?}")));
        }
        if !(self.blob_sigma > 0.0) {
            return Err(Error::config("blob_sigma must be positive"));
        }
        Ok(())
    }
}
