use indirect_pose::pnp::{
    refine_lm, reprojection_jacobian, reprojection_residuals, reprojection_rmse, retract, solve_dlt,
};
use indirect_pose::sim::{catalog_object, look_target, CameraEnvelope, RobotKeypointModel};
use indirect_pose::{
    project, solve_pnp, CameraIntrinsics, Correspondence, Error, Pixel2, PnPProblem, RefineConfig, RigidTransform,
    UnitQuaternion, Vec3,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_pose(rng: &mut impl Rng, depth: f64) -> RigidTransform {
    let rv = Vec3::new(
        rng.random_range(-1.5..1.5),
        rng.random_range(-1.5..1.5),
        rng.random_range(-1.5..1.5),
    );
    RigidTransform::new(
        UnitQuaternion::from_rotation_vector(&rv),
        Vec3::new(rng.random_range(-0.15..0.15), rng.random_range(-0.1..0.1), depth),
    )
}

fn model_points() -> Vec<Vec3> {
    catalog_object("sugar_box").unwrap().keypoints().to_vec()
}

fn correspondences(pose: &RigidTransform, k: &CameraIntrinsics, sigma: f64, rng: &mut impl Rng) -> Vec<Correspondence> {
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).unwrap();
    model_points()
        .into_iter()
        .map(|p| {
            let px = project(k, pose, &p).unwrap();
            let (du, dv) = if sigma > 0.0 {
                (noise.sample(rng), noise.sample(rng))
            } else {
                (0.0, 0.0)
            };
            Correspondence::new(p, Pixel2::new(px.u + du, px.v + dv))
        })
        .collect()
}

/// Central differences of the residual vector along each tangent direction.
fn numeric_jacobian(pose: &RigidTransform, corrs: &[Correspondence], k: &CameraIntrinsics) -> DMatrix<f64> {
    let h = 1e-6;
    let n = 2 * corrs.len();
    let mut j = DMatrix::zeros(n, 6);
    for c in 0..6 {
        let mut d = [0.0; 6];
        d[c] = h;
        let plus = reprojection_residuals(&retract(pose, &d), corrs, k);
        d[c] = -h;
        let minus = reprojection_residuals(&retract(pose, &d), corrs, k);
        for r in 0..n {
            j[(r, c)] = (plus[r] - minus[r]) / (2.0 * h);
        }
    }
    j
}

#[test]
fn jacobian_matches_central_differences() {
    let k = CameraIntrinsics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let depth = rng.random_range(0.6..2.5);
        let pose = random_pose(&mut rng, depth);
        let corrs = correspondences(&pose, &k, 3.0, &mut rng);
        let analytic = reprojection_jacobian(&pose, &corrs, &k);
        let numeric = numeric_jacobian(&pose, &corrs, &k);
        worst = worst.max((&analytic - &numeric).norm() / numeric.norm());
    }
    assert!(worst < 1e-4, "max relative error {worst:e}");
}

#[test]
fn noiseless_dlt_recovers_random_poses() {
    let k = CameraIntrinsics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let depth = rng.random_range(0.7..2.0);
        let truth = random_pose(&mut rng, depth);
        let est = solve_dlt(&correspondences(&truth, &k, 0.0, &mut rng), &k).unwrap();
        assert!(est.translation_error(&truth) < 1e-6);
        assert!(est.rotation_error(&truth) < 1e-6);
    }
}

#[test]
fn lm_does_not_worsen_dlt_under_noise() {
    let k = CameraIntrinsics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let truth = random_pose(&mut rng, 1.1);
        let corrs = correspondences(&truth, &k, 2.0, &mut rng);
        let init = solve_dlt(&corrs, &k).unwrap();
        let sol = refine_lm(&init, &corrs, &k, &RefineConfig::default()).unwrap();
        assert!(sol.reprojection_rmse <= reprojection_rmse(&init, &corrs, &k) + 1e-12);
        for w in sol.objective_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }
}

#[test]
fn point_count_preconditions() {
    let k = CameraIntrinsics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let truth = random_pose(&mut rng, 1.0);
    let corrs = correspondences(&truth, &k, 0.0, &mut rng);
    assert!(matches!(solve_dlt(&corrs[..5], &k), Err(Error::NotEnoughPoints { .. })));
    assert!(matches!(
        solve_pnp(&corrs[..4], &k, &RefineConfig::default()),
        Err(Error::NotEnoughPoints { .. })
    ));
    // four points are enough to refine from a nearby start
    let start = retract(&truth, &[0.01, -0.01, 0.0, 0.005, 0.0, -0.01]);
    let sol = refine_lm(&start, &corrs[..4], &k, &RefineConfig::default()).unwrap();
    assert!(sol.reprojection_rmse < 1e-6);
}

#[test]
fn correspondence_file_solves() {
    let k = CameraIntrinsics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let truth = random_pose(&mut rng, 1.2);
    let problem = PnPProblem {
        intrinsics: k,
        correspondences: correspondences(&truth, &k, 0.0, &mut rng),
    };
    let parsed = PnPProblem::from_json(&serde_json::to_string(&problem).unwrap()).unwrap();
    assert_eq!(parsed, problem);
    let sol = parsed.solve(&RefineConfig::default()).unwrap();
    assert!(sol.pose.translation_error(&truth) < 1e-6);

    let bad = r#"{"correspondences":[{"object_point":[0,0,0],"image_point":[1,2],"weight":-1}]}"#;
    assert!(matches!(PnPProblem::from_json(bad), Err(Error::Config(_))));
}

#[test]
fn robot_keypoints_recover_camera_pose() {
    let k = CameraIntrinsics::default();
    let robot = RobotKeypointModel::default();
    let points = robot.keypoints(&robot.ready_pose).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..50 {
        let cam = CameraEnvelope::place(
            rng.random_range(1.0..2.0),
            rng.random_range(-0.7..0.7),
            rng.random_range(0.25..0.55),
            &look_target(),
        );
        let truth = cam.inverse();
        let corrs: Vec<Correspondence> = points
            .iter()
            .map(|p| Correspondence::new(*p, project(&k, &truth, p).unwrap()))
            .collect();
        assert_eq!(corrs.len(), 24);
        let sol = solve_pnp(&corrs, &k, &RefineConfig::default()).unwrap();
        assert!(sol.pose.translation_error(&truth) < 1e-6);
        assert!(sol.pose.rotation_error(&truth) < 1e-6);
    }
}

#[test]
fn lm_recovers_from_perturbed_start() {
    let k = CameraIntrinsics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let truth = random_pose(&mut rng, 1.1);
        let corrs = correspondences(&truth, &k, 0.0, &mut rng);
        let dir = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let axis = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let start = RigidTransform::new(
            UnitQuaternion::from_axis_angle(&axis, 10f64.to_radians()).mul(&truth.rotation),
            truth.translation + dir * 0.05,
        );
        let sol = refine_lm(&start, &corrs, &k, &RefineConfig::default()).unwrap();
        assert!(sol.pose.translation_error(&truth) < 1e-6);
        assert!(sol.pose.rotation_error(&truth) < 1e-6);
    }
}

/// Moving the model by G and the solution by G^-1 describes the same
/// camera, so the reprojection error must not change.
#[test]
fn gauge_transform_preserves_rmse() {
    let k = CameraIntrinsics::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let truth = random_pose(&mut rng, 1.2);
        let corrs = correspondences(&truth, &k, 2.0, &mut rng);
        let sol = solve_pnp(&corrs, &k, &RefineConfig::default()).unwrap();
        let g = random_pose(&mut rng, 0.3);
        let moved: Vec<Correspondence> = corrs
            .iter()
            .map(|c| Correspondence {
                object_point: g.transform_point(&c.object_point),
                ..*c
            })
            .collect();
        let pose = sol.pose.compose(&g.inverse());
        let d = reprojection_rmse(&pose, &moved, &k) - sol.reprojection_rmse;
        assert!(d.abs() < 1e-9, "rmse changed by {d:e}");
    }
}
