//! Perspective-n-point: linear DLT initialization followed by
//! Levenberg-Marquardt refinement of the reprojection error.
//!
//! Poses are `cam_T_model`: they map model-frame points into the camera.

use nalgebra::{DMatrix, Matrix3, Vector6, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pixel2, Point3, RigidTransform};
use crate::lm::{self, Loss, Problem};

/// Fewest correspondences accepted by the linear initializer.
pub const MIN_DLT_POINTS: usize = 6;
/// Fewest correspondences accepted by nonlinear refinement.
pub const MIN_REFINE_POINTS: usize = 4;

const DEGENERACY_RATIO: f64 = 1e-8;

fn default_weight() -> f64 {
    1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub object_point: Point3,
    pub image_point: Pixel2,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

impl Correspondence {
    pub fn new(object_point: Point3, image_point: Pixel2) -> Self {
        Self {
            object_point,
            image_point,
            weight: 1.0,
        }
    }

    pub fn weighted(object_point: Point3, image_point: Pixel2, weight: f64) -> Self {
        Self {
            object_point,
            image_point,
            weight,
        }
    }
}

/// A correspondence file: camera intrinsics plus the 2D-3D pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PnPProblem {
    #[serde(default)]
    pub intrinsics: CameraIntrinsics,
    pub correspondences: Vec<Correspondence>,
}

impl PnPProblem {
    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.intrinsics.validate()?;
        for c in &p.correspondences {
            let finite = c.object_point.iter().all(|v| v.is_finite())
                && c.image_point.u.is_finite()
                && c.image_point.v.is_finite();
            if !finite || !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::config(format!("invalid correspondence {c:?}")));
            }
        }
        Ok(p)
    }

    pub fn solve(&self, cfg: &RefineConfig) -> Result<PnPSolution> {
        solve_pnp(&self.correspondences, &self.intrinsics, cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PnPSolution {
    pub pose: RigidTransform,
    /// Weighted RMS reprojection error at `pose`, pixels.
    pub reprojection_rmse: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted step, starting with the initial pose.
    /// Mean squared error for plain refinement, mean Huber loss for the
    /// robust refiner.
    #[serde(default)]
    pub objective_history: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub max_iterations: usize,
    /// Stop when the parameter step norm drops below this.
    pub step_tolerance: f64,
    /// Stop when an accepted step lowers the mean objective by less than
    /// this (px^2).
    pub cost_tolerance: f64,
    pub initial_damping: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            step_tolerance: 1e-10,
            cost_tolerance: 1e-12,
            initial_damping: 1e-3,
        }
    }
}

fn check_weights(corrs: &[Correspondence]) -> Result<usize> {
    let mut active = 0;
    for c in corrs {
        if !(c.weight.is_finite() && c.weight >= 0.0) {
            return Err(Error::config(format!(
                "correspondence weight must be finite and non-negative, got {}",
                c.weight
            )));
        }
        if c.weight > 0.0 {
            active += 1;
        }
    }
    Ok(active)
}

/// Linear pose estimate from at least six correspondences.
///
/// Solves for the 3x4 projection in normalized image coordinates, then
/// projects its left block onto SO(3). Model points are centered and scaled
/// beforehand for conditioning.
pub fn solve_dlt(corrs: &[Correspondence], k: &CameraIntrinsics) -> Result<RigidTransform> {
    let active = check_weights(corrs)?;
    if active < MIN_DLT_POINTS {
        return Err(Error::NotEnoughPoints {
            got: active,
            need: MIN_DLT_POINTS,
        });
    }
    let used: Vec<&Correspondence> = corrs.iter().filter(|c| c.weight > 0.0).collect();
    let n = used.len() as f64;
    let center = used.iter().fold(Point3::zeros(), |a, c| a + c.object_point) / n;
    let spread = (used
        .iter()
        .map(|c| (c.object_point - center).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    if spread < 1e-12 {
        return Err(Error::DegenerateConfiguration { ratio: 0.0 });
    }

    let mut a = DMatrix::<f64>::zeros(2 * used.len(), 12);
    for (i, c) in used.iter().enumerate() {
        let p = (c.object_point - center) / spread;
        let x = (c.image_point.u - k.cx) / k.fx;
        let y = (c.image_point.v - k.cy) / k.fy;
        let s = c.weight.sqrt();
        let h = [p.x, p.y, p.z, 1.0];
        for j in 0..4 {
            a[(2 * i, j)] = s * h[j];
            a[(2 * i, 8 + j)] = -s * x * h[j];
            a[(2 * i + 1, 4 + j)] = s * h[j];
            a[(2 * i + 1, 8 + j)] = -s * y * h[j];
        }
    }

    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t.as_ref().expect("V requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let smax = svd.singular_values[order[order.len() - 1]];
    let second = svd.singular_values[order[1]];
    let ratio = if smax > 0.0 { second / smax } else { 0.0 };
    if ratio < DEGENERACY_RATIO {
        return Err(Error::DegenerateConfiguration { ratio });
    }
    let null = v_t.row(order[0]);

    let mut m = Matrix3::zeros();
    let mut b = Point3::zeros();
    for r in 0..3 {
        for c in 0..3 {
            m[(r, c)] = null[4 * r + c];
        }
        b[r] = null[4 * r + 3];
    }
    // centroid must land in front of the camera
    if b.z < 0.0 {
        m = -m;
        b = -b;
    }

    let msvd = m.svd(true, true);
    let (u, v_t3) = (msvd.u.expect("U requested"), msvd.v_t.expect("V requested"));
    let mut fix = Matrix3::identity();
    fix[(2, 2)] = (u * v_t3).determinant().signum();
    let rot = u * fix * v_t3;
    let scale = msvd.singular_values.mean();
    if scale <= 0.0 {
        return Err(Error::DegenerateConfiguration { ratio: 0.0 });
    }
    let centroid_cam = b * (spread / scale);
    let rotation = crate::geometry::UnitQuaternion::from_rotation_matrix(&rot);
    let translation = centroid_cam - rotation.rotate(&center);
    Ok(RigidTransform::new(rotation, translation))
}

fn split(corrs: &[Correspondence]) -> (Vec<Point3>, Vec<Pixel2>, Vec<f64>) {
    let mut pts = Vec::with_capacity(corrs.len());
    let mut obs = Vec::with_capacity(corrs.len());
    let mut w = Vec::with_capacity(corrs.len());
    for c in corrs {
        pts.push(c.object_point);
        obs.push(c.image_point);
        w.push(c.weight);
    }
    (pts, obs, w)
}

/// Damped Gauss-Newton minimization of weighted squared reprojection error.
pub fn refine_lm(
    initial: &RigidTransform,
    corrs: &[Correspondence],
    k: &CameraIntrinsics,
    cfg: &RefineConfig,
) -> Result<PnPSolution> {
    let active = check_weights(corrs)?;
    if active < MIN_REFINE_POINTS {
        return Err(Error::NotEnoughPoints {
            got: active,
            need: MIN_REFINE_POINTS,
        });
    }
    let (points, observed, weights) = split(corrs);
    let problem = Problem {
        points: &points,
        observed: &observed,
        weights: &weights,
        k,
    };
    lm::minimize(initial, &problem, Loss::SQUARED, cfg)
}

/// DLT initialization followed by LM refinement.
pub fn solve_pnp(corrs: &[Correspondence], k: &CameraIntrinsics, cfg: &RefineConfig) -> Result<PnPSolution> {
    let init = solve_dlt(corrs, k)?;
    refine_lm(&init, corrs, k, cfg)
}

/// Weighted RMS reprojection error of `pose` over `corrs`, pixels.
pub fn reprojection_rmse(pose: &RigidTransform, corrs: &[Correspondence], k: &CameraIntrinsics) -> f64 {
    let (points, observed, weights) = split(corrs);
    Problem {
        points: &points,
        observed: &observed,
        weights: &weights,
        k,
    }
    .rmse(pose)
}

/// Unweighted residuals `projection - observation`, stacked `[du0, dv0, du1, ...]`.
/// Points on the image plane yield NaN.
pub fn reprojection_residuals(pose: &RigidTransform, corrs: &[Correspondence], k: &CameraIntrinsics) -> Vec<f64> {
    corrs
        .iter()
        .flat_map(|c| {
            let r = lm::residual(k, pose, &c.object_point, &c.image_point)
                .unwrap_or_else(|| nalgebra::Vector2::repeat(f64::NAN));
            [r.x, r.y]
        })
        .collect()
}

/// Analytic `2n x 6` Jacobian of [`reprojection_residuals`] with respect to
/// the perturbation applied by [`retract`].
pub fn reprojection_jacobian(pose: &RigidTransform, corrs: &[Correspondence], k: &CameraIntrinsics) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * corrs.len(), 6);
    for (i, c) in corrs.iter().enumerate() {
        let block = lm::point_jacobian(k, pose, &c.object_point);
        j.view_mut((2 * i, 0), (2, 6)).copy_from(&block);
    }
    j
}

/// Applies a tangent-space update `[rotation vector; translation]`:
/// the rotation is pre-multiplied by `exp(w)` and `v` added to the
/// translation.
pub fn retract(pose: &RigidTransform, delta: &[f64; 6]) -> RigidTransform {
    lm::retract(pose, &Vector6::from_column_slice(delta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, UnitQuaternion, Vec3};

    fn cuboid_points() -> Vec<Point3> {
        let mut pts = vec![];
        for &x in &[-0.045, 0.045] {
            for &y in &[-0.02, 0.02] {
                for &z in &[-0.088, 0.088] {
                    pts.push(Point3::new(x, y, z));
                }
            }
        }
        pts.push(Point3::zeros());
        pts
    }

    fn pose() -> RigidTransform {
        RigidTransform::new(
            UnitQuaternion::from_rotation_vector(&Vec3::new(0.4, -0.9, 0.3)),
            Vec3::new(0.05, -0.03, 1.1),
        )
    }

    fn corrs_for(pose: &RigidTransform, pts: &[Point3]) -> Vec<Correspondence> {
        let k = CameraIntrinsics::default();
        pts.iter()
            .map(|p| Correspondence::new(*p, project(&k, pose, p).unwrap()))
            .collect()
    }

    #[test]
    fn dlt_noiseless_is_exact() {
        let gt = pose();
        let corrs = corrs_for(&gt, &cuboid_points());
        let est = solve_dlt(&corrs, &CameraIntrinsics::default()).unwrap();
        assert!(est.translation_error(&gt) < 1e-9);
        assert!(est.rotation_error(&gt) < 1e-9);
    }

    #[test]
    fn too_few_points() {
        let gt = pose();
        let corrs = corrs_for(&gt, &cuboid_points()[..5]);
        let k = CameraIntrinsics::default();
        assert!(matches!(
            solve_dlt(&corrs, &k),
            Err(Error::NotEnoughPoints { got: 5, need: 6 })
        ));
        assert!(matches!(
            solve_pnp(&corrs[..4], &k, &RefineConfig::default()),
            Err(Error::NotEnoughPoints { got: 4, .. })
        ));
    }

    #[test]
    fn zero_weight_points_do_not_count() {
        let gt = pose();
        let mut corrs = corrs_for(&gt, &cuboid_points());
        for c in corrs.iter_mut().take(4) {
            c.weight = 0.0;
        }
        let k = CameraIntrinsics::default();
        assert!(matches!(
            solve_dlt(&corrs, &k),
            Err(Error::NotEnoughPoints { got: 5, .. })
        ));
        corrs[0].weight = -1.0;
        assert!(matches!(solve_dlt(&corrs, &k), Err(Error::Config(_))));
    }

    #[test]
    fn collinear_is_degenerate() {
        let gt = pose();
        let pts: Vec<Point3> = (0..8).map(|i| Point3::new(0.02 * i as f64, 0.0, 0.0)).collect();
        let corrs = corrs_for(&gt, &pts);
        assert!(matches!(
            solve_dlt(&corrs, &CameraIntrinsics::default()),
            Err(Error::DegenerateConfiguration { .. })
        ));
    }

    #[test]
    fn refine_from_truth_converges_immediately() {
        let gt = pose();
        let corrs = corrs_for(&gt, &cuboid_points());
        let sol = refine_lm(&gt, &corrs, &CameraIntrinsics::default(), &RefineConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.iterations <= 2);
        assert!(sol.reprojection_rmse < 1e-9);
    }

    #[test]
    fn refine_recovers_from_perturbation() {
        let gt = pose();
        let corrs = corrs_for(&gt, &cuboid_points());
        let axis = Vec3::new(0.3, 1.0, -0.2).normalize();
        let init = RigidTransform::new(
            UnitQuaternion::from_axis_angle(&axis, 10f64.to_radians()).mul(&gt.rotation),
            gt.translation + Vec3::new(0.03, -0.03, 0.0287),
        );
        let sol = refine_lm(&init, &corrs, &CameraIntrinsics::default(), &RefineConfig::default()).unwrap();
        assert!(sol.converged);
        assert!(sol.pose.translation_error(&gt) < 1e-6);
        assert!(sol.pose.rotation_error(&gt) < 1e-6);
        assert!(sol.objective_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn initial_behind_camera_is_rejected() {
        let gt = pose();
        let corrs = corrs_for(&gt, &cuboid_points());
        let behind = RigidTransform::from_translation(Vec3::new(0.0, 0.0, -1.0));
        assert!(matches!(
            refine_lm(&behind, &corrs, &CameraIntrinsics::default(), &RefineConfig::default()),
            Err(Error::DivergedBehindCamera)
        ));
    }

    #[test]
    fn residuals_zero_at_truth() {
        let gt = pose();
        let corrs = corrs_for(&gt, &cuboid_points());
        let k = CameraIntrinsics::default();
        assert!(reprojection_residuals(&gt, &corrs, &k).iter().all(|r| r.abs() < 1e-9));
        assert_eq!(reprojection_jacobian(&gt, &corrs, &k).shape(), (18, 6));
    }
}
