//! Levenberg-Marquardt over a single rigid pose with per-point reprojection
//! residuals. Shared by keypoint PnP refinement and dense robust refinement.

use nalgebra::{Matrix2x3, Matrix3, Matrix6, Vector2, Vector6};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pixel2, Point3, RigidTransform, UnitQuaternion, Vec3, MIN_DEPTH};
use crate::pnp::{PnPSolution, RefineConfig};

/// Huber threshold on the per-point residual norm; `f64::INFINITY` gives
/// plain least squares.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Loss {
    pub delta: f64,
}

impl Loss {
    pub const SQUARED: Loss = Loss { delta: f64::INFINITY };

    /// (rho(s), psi) where rho is the loss on residual norm `s` and psi the
    /// IRLS weight.
    #[inline]
    fn eval(&self, s: f64) -> (f64, f64) {
        if s <= self.delta {
            (s * s, 1.0)
        } else {
            (2.0 * self.delta * s - self.delta * self.delta, self.delta / s)
        }
    }
}

pub(crate) struct Problem<'a> {
    pub points: &'a [Point3],
    pub observed: &'a [Pixel2],
    pub weights: &'a [f64],
    pub k: &'a CameraIntrinsics,
}

pub(crate) fn skew(v: &Vec3) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Left perturbation: rotation `exp(w) R`, translation `t + v`.
pub(crate) fn retract(pose: &RigidTransform, delta: &Vector6<f64>) -> RigidTransform {
    let w = Vec3::new(delta[0], delta[1], delta[2]);
    let v = Vec3::new(delta[3], delta[4], delta[5]);
    RigidTransform::new(
        UnitQuaternion::from_rotation_vector(&w).mul(&pose.rotation),
        pose.translation + v,
    )
}

#[inline]
pub(crate) fn residual(k: &CameraIntrinsics, pose: &RigidTransform, p: &Point3, obs: &Pixel2) -> Option<Vector2<f64>> {
    let c = pose.transform_point(p);
    if c.z.abs() < MIN_DEPTH {
        return None;
    }
    Some(Vector2::new(
        k.fx * c.x / c.z + k.cx - obs.u,
        k.fy * c.y / c.z + k.cy - obs.v,
    ))
}

/// 2x6 Jacobian of the residual with respect to the left perturbation.
#[inline]
pub(crate) fn point_jacobian(k: &CameraIntrinsics, pose: &RigidTransform, p: &Point3) -> nalgebra::Matrix2x6<f64> {
    let rp = pose.rotation.rotate(p);
    let c = rp + pose.translation;
    let iz = 1.0 / c.z;
    let dproj = Matrix2x3::new(
        k.fx * iz,
        0.0,
        -k.fx * c.x * iz * iz,
        0.0,
        k.fy * iz,
        -k.fy * c.y * iz * iz,
    );
    let drot = dproj * (-skew(&rp));
    let mut j = nalgebra::Matrix2x6::zeros();
    j.fixed_view_mut::<2, 3>(0, 0).copy_from(&drot);
    j.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
    j
}

impl Problem<'_> {
    fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weighted mean loss; infinite if any weighted point sits on the image plane.
    fn objective(&self, pose: &RigidTransform, loss: Loss) -> f64 {
        let mut acc = 0.0;
        for ((p, o), &w) in self.points.iter().zip(self.observed).zip(self.weights) {
            if w == 0.0 {
                continue;
            }
            match residual(self.k, pose, p, o) {
                Some(r) => acc += w * loss.eval(r.norm()).0,
                None => return f64::INFINITY,
            }
        }
        acc / self.weight_sum()
    }

    pub fn rmse(&self, pose: &RigidTransform) -> f64 {
        self.objective(pose, Loss::SQUARED).sqrt()
    }

    fn normal_equations(&self, pose: &RigidTransform, loss: Loss) -> (Matrix6<f64>, Vector6<f64>) {
        let mut h = Matrix6::zeros();
        let mut g = Vector6::zeros();
        for ((p, o), &w) in self.points.iter().zip(self.observed).zip(self.weights) {
            if w == 0.0 {
                continue;
            }
            let Some(r) = residual(self.k, pose, p, o) else {
                continue;
            };
            let psi = loss.eval(r.norm()).1;
            let j = point_jacobian(self.k, pose, p);
            let jt = j.transpose();
            h += (w * psi) * (jt * j);
            g += (w * psi) * (jt * r);
        }
        (h, g)
    }

    fn centroid(&self) -> Point3 {
        let n = self.points.len().max(1) as f64;
        self.points.iter().fold(Point3::zeros(), |a, p| a + p) / n
    }
}

pub(crate) fn minimize(
    initial: &RigidTransform,
    problem: &Problem<'_>,
    loss: Loss,
    cfg: &RefineConfig,
) -> Result<PnPSolution> {
    let centroid = problem.centroid();
    if initial.transform_point(&centroid).z <= 0.0 {
        return Err(Error::DivergedBehindCamera);
    }

    let mut pose = *initial;
    let mut cost = problem.objective(&pose, loss);
    if !cost.is_finite() {
        return Err(Error::DivergedBehindCamera);
    }
    let mut history = vec![cost];
    let mut lambda = cfg.initial_damping;
    let mut converged = false;
    let mut iterations = 0;
    let (mut h, mut g) = problem.normal_equations(&pose, loss);

    while iterations < cfg.max_iterations {
        iterations += 1;

        let mut damped = h;
        for i in 0..6 {
            damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&(-g))) else {
            lambda *= 10.0;
            continue;
        };
        if step.norm() < cfg.step_tolerance {
            converged = true;
            break;
        }

        let candidate = retract(&pose, &step);
        let candidate_cost = problem.objective(&candidate, loss);
        if candidate_cost < cost {
            if candidate.transform_point(&centroid).z <= 0.0 {
                return Err(Error::DivergedBehindCamera);
            }
            let improvement = cost - candidate_cost;
            pose = candidate;
            cost = candidate_cost;
            history.push(cost);
            lambda = (lambda / 10.0).max(1e-12);
            if improvement < cfg.cost_tolerance {
                converged = true;
                break;
            }
            (h, g) = problem.normal_equations(&pose, loss);
        } else {
            lambda *= 10.0;
            if lambda > 1e16 {
                // no descent direction left at working precision
                converged = true;
                break;
            }
        }
    }

    Ok(PnPSolution {
        pose,
        reprojection_rmse: problem.rmse(&pose),
        iterations,
        converged,
        objective_history: history,
    })
}
