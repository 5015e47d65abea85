use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{project, CameraIntrinsics, Pixel2, Point3, RigidTransform};
use crate::refine::DenseModelSample;

use super::NoiseConfig;

/// Noisy projection of one point before visibility is decided.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct RawObservation {
    /// `None` when the point is behind the camera.
    pub pixel: Option<Pixel2>,
    pub dropped: bool,
}

/// Draws exactly three variates per point whatever the outcome, so that
/// paired runs stay in lock-step.
pub(crate) fn raw_observations<R: Rng + ?Sized>(
    k: &CameraIntrinsics,
    cam_model: &RigidTransform,
    points: &[Point3],
    noise: &NoiseConfig,
    rng: &mut R,
) -> Vec<RawObservation> {
    points
        .iter()
        .map(|p| {
            let nu: f64 = rng.sample(StandardNormal);
            let nv: f64 = rng.sample(StandardNormal);
            let drop: f64 = rng.random();
            let pixel = project(k, cam_model, p)
                .ok()
                .map(|px| Pixel2::new(px.u + noise.pixel_sigma * nu, px.v + noise.pixel_sigma * nv));
            RawObservation {
                pixel,
                dropped: drop < noise.dropout_prob,
            }
        })
        .collect()
}

/// Simulated keypoint detections, indexed like `points`.
///
/// Each point is projected through `cam_model`, perturbed by isotropic
/// Gaussian noise, dropped with probability `dropout_prob`, and discarded if
/// it falls outside the image.
pub fn observe_keypoints<R: Rng + ?Sized>(
    k: &CameraIntrinsics,
    cam_model: &RigidTransform,
    points: &[Point3],
    noise: &NoiseConfig,
    rng: &mut R,
) -> Vec<Option<Pixel2>> {
    raw_observations(k, cam_model, points, noise, rng)
        .into_iter()
        .map(|o| match o.pixel {
            Some(px) if !o.dropped && k.contains(&px) => Some(px),
            _ => None,
        })
        .collect()
}

/// Dense observations for the robust refiner: every sample point projected
/// with `pixel_sigma` noise, a `dense_outlier_prob` fraction displaced by
/// `dense_outlier_px` in a random direction, out-of-image points removed.
pub fn observe_dense<R: Rng + ?Sized>(
    k: &CameraIntrinsics,
    cam_model: &RigidTransform,
    sample: &DenseModelSample,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Vec<Option<Pixel2>> {
    sample
        .points
        .iter()
        .map(|p| {
            let nu: f64 = rng.sample(StandardNormal);
            let nv: f64 = rng.sample(StandardNormal);
            let outlier = rng.random::<f64>() < noise.dense_outlier_prob;
            let dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let px = project(k, cam_model, p).ok()?;
            let mut obs = Pixel2::new(px.u + noise.pixel_sigma * nu, px.v + noise.pixel_sigma * nv);
            if outlier {
                obs.u += noise.dense_outlier_px * dir.cos();
                obs.v += noise.dense_outlier_px * dir.sin();
            }
            k.contains(&obs).then_some(obs)
        })
        .collect()
}
