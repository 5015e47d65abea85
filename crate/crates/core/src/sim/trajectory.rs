use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Vec3};

use super::scene::look_target;

/// Region the moving camera stays inside, robot frame: depth 1.3 to 2.0 m,
/// lateral -0.3 to 0.3 m, height 0.3 to 0.5 m.
pub const TRAJECTORY_MIN: [f64; 3] = [1.3, -0.3, 0.3];
pub const TRAJECTORY_MAX: [f64; 3] = [2.0, 0.3, 0.5];
pub const MAX_STEP_M: f64 = 0.02;
pub const MAX_STEP_RAD: f64 = 2.0 * std::f64::consts::PI / 180.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    /// Slow hand-held sweep: smoothed random walk.
    #[default]
    Handheld,
    /// Camera fixed at a random position.
    Static,
}

fn clamp_to_box(p: Vec3) -> Vec3 {
    Vec3::new(
        p.x.clamp(TRAJECTORY_MIN[0], TRAJECTORY_MAX[0]),
        p.y.clamp(TRAJECTORY_MIN[1], TRAJECTORY_MAX[1]),
        p.z.clamp(TRAJECTORY_MIN[2], TRAJECTORY_MAX[2]),
    )
}

fn aimed(eye: &Vec3) -> RigidTransform {
    RigidTransform::look_at(eye, &look_target(), &Vec3::z())
}

/// Seeded camera path (`robot_T_camera` per frame) confined to the
/// trajectory box, always aimed at the workspace.
///
/// Consecutive poses differ by at most [`MAX_STEP_M`] in position and
/// [`MAX_STEP_RAD`] in orientation.
pub fn camera_trajectory(kind: TrajectoryKind, frames: usize, seed: u64) -> Result<Vec<RigidTransform>> {
    if frames == 0 {
        return Err(Error::config("trajectory needs at least one frame"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = Vec3::from_fn(|i, _| rng.random_range(TRAJECTORY_MIN[i]..=TRAJECTORY_MAX[i]));
    let mut out = Vec::with_capacity(frames);
    out.push(aimed(&pos));
    if kind == TrajectoryKind::Static {
        out.resize(frames, out[0]);
        return Ok(out);
    }

    let max_speed = 0.6 * MAX_STEP_M;
    let mut vel = Vec3::zeros();
    for _ in 1..frames {
        let kick = Vec3::from_fn(|_, _| rng.sample::<f64, _>(StandardNormal)) * 0.002;
        vel = vel * 0.92 + kick;
        if vel.norm() > max_speed {
            vel *= max_speed / vel.norm();
        }
        let prev = *out.last().expect("non-empty");
        let mut step = vel;
        let mut next = clamp_to_box(pos + step);
        let mut pose = aimed(&next);
        while (next - pos).norm() > MAX_STEP_M || pose.rotation_error(&prev) > MAX_STEP_RAD {
            step *= 0.5;
            next = clamp_to_box(pos + step);
            pose = aimed(&next);
        }
        // bounce off the walls instead of sticking to them
        for i in 0..3 {
            if next[i] <= TRAJECTORY_MIN[i] || next[i] >= TRAJECTORY_MAX[i] {
                vel[i] = -vel[i];
            }
        }
        pos = next;
        out.push(pose);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inside(p: &RigidTransform) -> bool {
        (0..3).all(|i| (TRAJECTORY_MIN[i]..=TRAJECTORY_MAX[i]).contains(&p.translation[i]))
    }

    #[test]
    fn single_frame() {
        let t = camera_trajectory(TrajectoryKind::Handheld, 1, 4).unwrap();
        assert_eq!(t.len(), 1);
        assert!(inside(&t[0]));
        assert!(camera_trajectory(TrajectoryKind::Handheld, 0, 4).is_err());
    }

    #[test]
    fn bounded_smooth_and_deterministic() {
        let a = camera_trajectory(TrajectoryKind::Handheld, 2000, 11).unwrap();
        assert_eq!(a, camera_trajectory(TrajectoryKind::Handheld, 2000, 11).unwrap());
        assert!(a.iter().all(inside));
        for w in a.windows(2) {
            assert!(w[0].translation_error(&w[1]) <= MAX_STEP_M + 1e-12);
            assert!(w[0].rotation_error(&w[1]) <= MAX_STEP_RAD + 1e-12);
        }
        let travelled: f64 = a.windows(2).map(|w| w[0].translation_error(&w[1])).sum();
        assert!(travelled > 1.0, "camera barely moved: {travelled}");
    }

    #[test]
    fn camera_faces_target() {
        for p in camera_trajectory(TrajectoryKind::Handheld, 300, 2).unwrap() {
            let in_cam = p.inverse().transform_point(&look_target());
            assert!(in_cam.x.abs() < 1e-9 && in_cam.y.abs() < 1e-9 && in_cam.z > 0.0);
        }
    }

    #[test]
    fn static_never_moves() {
        let t = camera_trajectory(TrajectoryKind::Static, 50, 1).unwrap();
        assert!(t.iter().all(|p| *p == t[0]));
    }
}
