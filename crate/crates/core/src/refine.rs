//! Dense robust pose refinement.
//!
//! Points sampled over the model's bounding cuboid are projected with the
//! current pose and pulled toward their observed image locations under a
//! Huber loss, so a minority of grossly wrong observations cannot drag the
//! estimate the way they would under plain least squares.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pixel2, Point3, RigidTransform};
use crate::lm::{self, Loss, Problem};
use crate::pnp::{PnPSolution, RefineConfig, MIN_DLT_POINTS};
use crate::sim::ObjectModel;

pub const MIN_SURFACE_SAMPLES: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseModelSample {
    pub points: Vec<Point3>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobustLossConfig {
    /// Residual norm (px) beyond which the loss grows linearly.
    pub huber_delta: f64,
    pub max_iterations: usize,
}

impl Default for RobustLossConfig {
    fn default() -> Self {
        Self {
            huber_delta: 5.0,
            max_iterations: 100,
        }
    }
}

impl RobustLossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.huber_delta > 0.0 {
            Ok(())
        } else {
            Err(Error::config("huber_delta must be positive"))
        }
    }
}

/// Seeded area-uniform sample of the six faces of the model's cuboid.
///
/// Zero-extent axes are allowed; faces with zero area never receive points.
pub fn sample_model_surface(model: &ObjectModel, count: usize, seed: u64) -> Result<DenseModelSample> {
    if count < MIN_SURFACE_SAMPLES {
        return Err(Error::config(format!(
            "surface sample count must be at least {MIN_SURFACE_SAMPLES}, got {count}"
        )));
    }
    let half = model.half_extents();
    let [hx, hy, hz] = [half.x, half.y, half.z];
    // faces: -x, +x, -y, +y, -z, +z
    let areas = [hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy];
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::config("model surface has zero area"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick = rng.random::<f64>() * total;
        let mut face = 5;
        for (i, a) in areas.iter().enumerate() {
            if *a > 0.0 && pick < *a {
                face = i;
                break;
            }
            pick -= a;
        }
        // guard the rounding tail landing on a zero-area face
        while areas[face] == 0.0 {
            face -= 1;
        }
        let a: f64 = rng.random_range(-1.0..=1.0);
        let b: f64 = rng.random_range(-1.0..=1.0);
        let sign = if face % 2 == 0 { -1.0 } else { 1.0 };
        let p = match face / 2 {
            0 => Point3::new(sign * hx, a * hy, b * hz),
            1 => Point3::new(a * hx, sign * hy, b * hz),
            _ => Point3::new(a * hx, b * hy, sign * hz),
        };
        points.push(p);
    }
    Ok(DenseModelSample { points })
}

/// Refines `initial` (`cam_T_model`) by robust LM over the dense sample.
///
/// `observed[i]` is the measured image location of `sample.points[i]`, or
/// `None` where the point was not observed.
pub fn refine_pose(
    initial: &RigidTransform,
    sample: &DenseModelSample,
    observed: &[Option<Pixel2>],
    k: &CameraIntrinsics,
    cfg: &RobustLossConfig,
) -> Result<PnPSolution> {
    cfg.validate()?;
    if observed.len() != sample.points.len() {
        return Err(Error::config(format!(
            "{} observations for {} sample points",
            observed.len(),
            sample.points.len()
        )));
    }
    let mut points = Vec::with_capacity(observed.len());
    let mut obs = Vec::with_capacity(observed.len());
    for (p, o) in sample.points.iter().zip(observed) {
        if let Some(o) = o {
            points.push(*p);
            obs.push(*o);
        }
    }
    if points.len() < MIN_DLT_POINTS {
        return Err(Error::NotEnoughPoints {
            got: points.len(),
            need: MIN_DLT_POINTS,
        });
    }
    let weights = vec![1.0; points.len()];
    let problem = Problem {
        points: &points,
        observed: &obs,
        weights: &weights,
        k,
    };
    let lm_cfg = RefineConfig {
        max_iterations: cfg.max_iterations,
        ..RefineConfig::default()
    };
    lm::minimize(initial, &problem, Loss { delta: cfg.huber_delta }, &lm_cfg)
}

/// Mean Huber loss of `pose` over the valid observations.
pub fn robust_objective(
    pose: &RigidTransform,
    sample: &DenseModelSample,
    observed: &[Option<Pixel2>],
    k: &CameraIntrinsics,
    huber_delta: f64,
) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for (p, o) in sample.points.iter().zip(observed) {
        let Some(o) = o else { continue };
        let Some(r) = lm::residual(k, pose, p, o) else {
            return f64::INFINITY;
        };
        let s = r.norm();
        acc += if s <= huber_delta {
            s * s
        } else {
            2.0 * huber_delta * s - huber_delta * huber_delta
        };
        n += 1;
    }
    acc / n as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, UnitQuaternion, Vec3};

    fn unit_cube() -> ObjectModel {
        ObjectModel::new("cube", [1.0, 1.0, 1.0])
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_model_surface(&unit_cube(), 200, 7).unwrap();
        let b = sample_model_surface(&unit_cube(), 200, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_model_surface(&unit_cube(), 200, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_rejects_small_counts() {
        assert!(sample_model_surface(&unit_cube(), 49, 0).is_err());
    }

    #[test]
    fn flat_model_samples_two_faces() {
        let flat = ObjectModel::new("card", [0.1, 0.06, 0.0]);
        let s = sample_model_surface(&flat, 300, 3).unwrap();
        assert!(s.points.iter().all(|p| p.z == 0.0));
        assert!(s.points.iter().all(|p| p.x.abs() <= 0.05 && p.y.abs() <= 0.03));
    }

    #[test]
    fn points_stay_on_cuboid() {
        let m = ObjectModel::new("box", [0.09, 0.04, 0.18]);
        let h = m.half_extents();
        let s = sample_model_surface(&m, 500, 11).unwrap();
        for p in &s.points {
            assert!(p.x.abs() <= h.x && p.y.abs() <= h.y && p.z.abs() <= h.z);
            let on_face =
                (p.x.abs() - h.x).abs() < 1e-15 || (p.y.abs() - h.y).abs() < 1e-15 || (p.z.abs() - h.z).abs() < 1e-15;
            assert!(on_face);
        }
    }

    fn scene() -> (RigidTransform, DenseModelSample, Vec<Option<Pixel2>>) {
        let k = CameraIntrinsics::default();
        let gt = RigidTransform::new(
            UnitQuaternion::from_rotation_vector(&Vec3::new(0.2, 0.7, -0.1)),
            Vec3::new(0.02, 0.05, 0.9),
        );
        let m = ObjectModel::new("box", [0.09, 0.04, 0.18]);
        let s = sample_model_surface(&m, 200, 5).unwrap();
        let obs = s.points.iter().map(|p| project(&k, &gt, p).ok()).collect();
        (gt, s, obs)
    }

    #[test]
    fn recovers_truth_from_offset() {
        let (gt, s, obs) = scene();
        let init = RigidTransform::new(gt.rotation, gt.translation + Vec3::new(0.03, 0.0, 0.0));
        let sol = refine_pose(
            &init,
            &s,
            &obs,
            &CameraIntrinsics::default(),
            &RobustLossConfig::default(),
        )
        .unwrap();
        assert!(sol.pose.translation_error(&gt) < 1e-6);
        assert!(sol.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn all_invalid_is_not_enough() {
        let (gt, s, _) = scene();
        let none = vec![None; s.points.len()];
        let r = refine_pose(
            &gt,
            &s,
            &none,
            &CameraIntrinsics::default(),
            &RobustLossConfig::default(),
        );
        assert!(matches!(r, Err(Error::NotEnoughPoints { got: 0, .. })));
    }

    #[test]
    fn rejects_bad_config_and_length() {
        let (gt, s, obs) = scene();
        let k = CameraIntrinsics::default();
        let bad = RobustLossConfig {
            huber_delta: 0.0,
            ..Default::default()
        };
        assert!(matches!(refine_pose(&gt, &s, &obs, &k, &bad), Err(Error::Config(_))));
        assert!(matches!(
            refine_pose(&gt, &s, &obs[1..], &k, &RobustLossConfig::default()),
            Err(Error::Config(_))
        ));
    }
}
