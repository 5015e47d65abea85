//! Rigid-body transforms, unit quaternions and the pinhole camera.
//!
//! Frames follow the `a_T_b` convention: a transform named `cam_object`
//! maps points expressed in the object frame into the camera frame. Cameras
//! look down +z with +x right and +y down in the image.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
/// A 3D point in meters.
pub type Point3 = Vector3<f64>;

/// Points closer to the image plane than this are rejected by projection.
pub const MIN_DEPTH: f64 = 1e-6;

/// Sub-pixel image location.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Pixel2 {
    pub u: f64,
    pub v: f64,
}

impl Pixel2 {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }

    pub fn distance(&self, other: &Pixel2) -> f64 {
        (self.u - other.u).hypot(self.v - other.v)
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self::new(self.u * s, self.v * s)
    }
}

impl From<[f64; 2]> for Pixel2 {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl From<Pixel2> for [f64; 2] {
    fn from(p: Pixel2) -> Self {
        [p.u, p.v]
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
struct RawQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

/// Unit quaternion with the double cover resolved to `w >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawQuaternion")]
pub struct UnitQuaternion {
    w: f64,
    x: f64,
    y: f64,
    z: f64,
}

impl TryFrom<RawQuaternion> for UnitQuaternion {
    type Error = Error;

    fn try_from(q: RawQuaternion) -> Result<Self> {
        UnitQuaternion::try_new(q.w, q.x, q.y, q.z)
    }
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub const fn identity() -> Self {
        Self {
            w: 1.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }

    /// Normalizes `(w, x, y, z)`. Fails on zero or non-finite input.
    pub fn try_new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(Error::parse("quaternion must be finite and non-zero"));
        }
        Ok(Self::from_normalized(w / n, x / n, y / n, z / n))
    }

    /// Panicking variant of [`UnitQuaternion::try_new`] for literals.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self::try_new(w, x, y, z).expect("quaternion must be finite and non-zero")
    }

    fn from_normalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        if w < 0.0 {
            Self {
                w: -w,
                x: -x,
                y: -y,
                z: -z,
            }
        } else {
            Self { w, x, y, z }
        }
    }

    fn renormalized(w: f64, x: f64, y: f64, z: f64) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self::from_normalized(w / n, x / n, y / n, z / n)
    }

    pub fn w(&self) -> f64 {
        self.w
    }
    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n < 1e-300 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        let a = axis / n;
        Self::renormalized(c, a.x * s, a.y * s, a.z * s)
    }

    /// Exponential map from a rotation vector (axis times angle).
    pub fn from_rotation_vector(v: &Vec3) -> Self {
        let theta = v.norm();
        let half = 0.5 * theta;
        // sin(h)/theta with a series fallback near zero
        let k = if theta < 1e-8 {
            0.5 - theta * theta / 48.0
        } else {
            half.sin() / theta
        };
        Self::renormalized(half.cos(), v.x * k, v.y * k, v.z * k)
    }

    /// Logarithm map; the returned rotation vector has norm in `[0, pi]`.
    pub fn to_rotation_vector(&self) -> Vec3 {
        let v = Vec3::new(self.x, self.y, self.z);
        let s = v.norm();
        if s < 1e-300 {
            return Vec3::zeros();
        }
        // w >= 0 by construction so the angle is already the short one
        let theta = 2.0 * s.atan2(self.w);
        v * (theta / s)
    }

    pub fn conjugate(&self) -> Self {
        Self::from_normalized(self.w, -self.x, -self.y, -self.z)
    }

    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    /// Hamilton product `self * other`.
    pub fn mul(&self, o: &Self) -> Self {
        let (a, b) = (self, o);
        Self::renormalized(
            a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        )
    }

    pub fn dot(&self, o: &Self) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn rotate(&self, p: &Vec3) -> Vec3 {
        let u = Vec3::new(self.x, self.y, self.z);
        let t = 2.0 * u.cross(p);
        p + self.w * t + u.cross(&t)
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Converts a proper rotation matrix (Shepperd's method).
    pub fn from_rotation_matrix(m: &Matrix3<f64>) -> Self {
        let tr = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Self::renormalized(
                0.25 * s,
                (m[(2, 1)] - m[(1, 2)]) / s,
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(1, 0)] - m[(0, 1)]) / s,
            )
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            Self::renormalized(
                (m[(2, 1)] - m[(1, 2)]) / s,
                0.25 * s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
            )
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            Self::renormalized(
                (m[(0, 2)] - m[(2, 0)]) / s,
                (m[(0, 1)] + m[(1, 0)]) / s,
                0.25 * s,
                (m[(1, 2)] + m[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            Self::renormalized(
                (m[(1, 0)] - m[(0, 1)]) / s,
                (m[(0, 2)] + m[(2, 0)]) / s,
                (m[(1, 2)] + m[(2, 1)]) / s,
                0.25 * s,
            )
        }
    }
}

/// Angle of the relative rotation between `a` and `b`, in `[0, pi]`.
///
/// Equal to `2 acos(|a . b|)`; evaluated through `atan2` on the relative
/// quaternion so that small angles keep full precision.
pub fn geodesic_angle(a: &UnitQuaternion, b: &UnitQuaternion) -> f64 {
    let r = a.conjugate().mul(b);
    let s = (r.x * r.x + r.y * r.y + r.z * r.z).sqrt();
    2.0 * s.atan2(r.w.abs())
}

/// Shortest-arc spherical interpolation, `t` in `[0, 1]`.
pub fn slerp(a: &UnitQuaternion, b: &UnitQuaternion, t: f64) -> UnitQuaternion {
    // a and -b are the same rotation; relative quaternion is canonicalized
    // to w >= 0, which already selects the shorter arc.
    let rel = a.conjugate().mul(b);
    let step = UnitQuaternion::from_rotation_vector(&(rel.to_rotation_vector() * t));
    a.mul(&step)
}

/// SE(3) element: `p' = R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: UnitQuaternion,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn new(rotation: UnitQuaternion, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    /// Parses `{"rotation": {"w","x","y","z"}, "translation": [x, y, z]}`.
    pub fn from_json(s: &str) -> Result<Self> {
        let t: Self = serde_json::from_str(s)?;
        if !t.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::config("pose translation must be finite"));
        }
        Ok(t)
    }

    pub fn identity() -> Self {
        Self::new(UnitQuaternion::identity(), Vec3::zeros())
    }

    pub fn from_translation(t: Vec3) -> Self {
        Self::new(UnitQuaternion::identity(), t)
    }

    pub fn from_rotation(r: UnitQuaternion) -> Self {
        Self::new(r, Vec3::zeros())
    }

    /// Pose of a camera at `eye` looking at `target`, expressed in the world
    /// frame (`world_T_camera`). Image "up" is aligned with `up` as closely
    /// as possible.
    pub fn look_at(eye: &Vec3, target: &Vec3, up: &Vec3) -> Self {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(up);
        if right.norm() < 1e-9 {
            // looking straight along `up`: pick any perpendicular
            right = forward.cross(&Vec3::x());
            if right.norm() < 1e-9 {
                right = forward.cross(&Vec3::y());
            }
        }
        let right = right.normalize();
        let down = forward.cross(&right);
        let m = Matrix3::from_columns(&[right, down, forward]);
        Self::new(UnitQuaternion::from_rotation_matrix(&m), *eye)
    }

    pub fn transform_point(&self, p: &Point3) -> Point3 {
        self.rotation.rotate(p) + self.translation
    }

    pub fn transform_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation.rotate(v)
    }

    pub fn inverse(&self) -> Self {
        invert(self)
    }

    /// `self * other`
    pub fn compose(&self, other: &Self) -> Self {
        compose(self, other)
    }

    pub fn translation_error(&self, other: &Self) -> f64 {
        (self.translation - other.translation).norm()
    }

    pub fn rotation_error(&self, other: &Self) -> f64 {
        geodesic_angle(&self.rotation, &other.rotation)
    }
}

/// Matrix product `a * b` of two rigid transforms.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform {
        rotation: a.rotation.mul(&b.rotation),
        translation: a.rotation.rotate(&b.translation) + a.translation,
    }
}

pub fn invert(t: &RigidTransform) -> RigidTransform {
    let r = t.rotation.inverse();
    RigidTransform {
        rotation: r,
        translation: -r.rotate(&t.translation),
    }
}

/// Pose of the object in the robot base frame from the two camera-frame
/// estimates: `robot_T_object = (cam_T_robot)^-1 * cam_T_object`.
pub fn object_in_robot_frame(cam_robot: &RigidTransform, cam_object: &RigidTransform) -> RigidTransform {
    compose(&invert(cam_robot), cam_object)
}

/// Ideal pinhole intrinsics.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraIntrinsics {
    /// Roughly a 640x480 consumer webcam.
    fn default() -> Self {
        Self {
            fx: 600.0,
            fy: 600.0,
            cx: 320.0,
            cy: 240.0,
            width: 640,
            height: 480,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid camera intrinsics {self:?}")))
        }
    }

    /// Projects a point already expressed in the camera frame.
    pub fn project_camera_point(&self, p: &Point3) -> Result<Pixel2> {
        if p.z <= MIN_DEPTH {
            return Err(Error::BehindCamera { z: p.z });
        }
        Ok(Pixel2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Camera-frame point at `depth` along the ray through `px`.
    pub fn back_project(&self, px: &Pixel2, depth: f64) -> Point3 {
        Point3::new(
            (px.u - self.cx) / self.fx * depth,
            (px.v - self.cy) / self.fy * depth,
            depth,
        )
    }

    pub fn contains(&self, px: &Pixel2) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < self.width as f64 && px.v < self.height as f64
    }

    /// Intrinsics of the sub-image starting at `(left, top)` with the given size.
    pub fn cropped(&self, left: f64, top: f64, width: u32, height: u32) -> Self {
        Self {
            cx: self.cx - left,
            cy: self.cy - top,
            width,
            height,
            ..*self
        }
    }
}

/// Projects model point `p` through `cam_model` (model frame to camera).
pub fn project(k: &CameraIntrinsics, cam_model: &RigidTransform, p: &Point3) -> Result<Pixel2> {
    k.project_camera_point(&cam_model.transform_point(p))
}
