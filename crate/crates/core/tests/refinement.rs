use indirect_pose::pnp::{refine_lm, solve_pnp};
use indirect_pose::refine::robust_objective;
use indirect_pose::sim::catalog_object;
use indirect_pose::{
    project, refine_pose, sample_model_surface, CameraIntrinsics, Correspondence, ObjectModel, Pixel2, RefineConfig,
    RigidTransform, RobustLossConfig, UnitQuaternion, Vec3,
};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn random_pose(rng: &mut impl Rng) -> RigidTransform {
    RigidTransform::new(
        UnitQuaternion::from_rotation_vector(&Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-3.0..3.0),
        )),
        Vec3::new(rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1), 1.1),
    )
}

fn noisy(px: Pixel2, noise: &Normal<f64>, rng: &mut impl Rng) -> Pixel2 {
    Pixel2::new(px.u + noise.sample(rng), px.v + noise.sample(rng))
}

/// Paired trials: 9-point PnP versus dense refinement started from it, where
/// a fifth of the dense observations are 50 px outliers.
#[test]
fn refinement_beats_keypoint_pnp_under_outliers() {
    let k = CameraIntrinsics::default();
    let model = catalog_object("sugar_box").unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut wins = 0;
    let trials = 200;
    for t in 0..trials {
        let truth = random_pose(&mut rng);
        let corrs: Vec<Correspondence> = model
            .keypoints()
            .iter()
            .map(|p| Correspondence::new(*p, noisy(project(&k, &truth, p).unwrap(), &noise, &mut rng)))
            .collect();
        let pnp = solve_pnp(&corrs, &k, &RefineConfig::default()).unwrap().pose;

        let dense = sample_model_surface(&model, 2000, t).unwrap();
        let mut observed: Vec<Option<Pixel2>> = dense
            .points
            .iter()
            .map(|p| Some(noisy(project(&k, &truth, p).unwrap(), &noise, &mut rng)))
            .collect();
        for i in sample(&mut rng, observed.len(), observed.len() / 5) {
            let dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let o = observed[i].unwrap();
            observed[i] = Some(Pixel2::new(o.u + 50.0 * dir.cos(), o.v + 50.0 * dir.sin()));
        }
        let refined = refine_pose(&pnp, &dense, &observed, &k, &RobustLossConfig::default()).unwrap();
        if refined.pose.translation_error(&truth) < pnp.translation_error(&truth) {
            wins += 1;
        }
    }
    assert!(wins * 10 >= trials * 8, "refinement won {wins}/{trials}");
}

#[test]
fn huge_delta_degenerates_to_least_squares() {
    let k = CameraIntrinsics::default();
    let model = catalog_object("cookies").unwrap();
    let noise = Normal::new(0.0, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for t in 0..20 {
        let truth = random_pose(&mut rng);
        let dense = sample_model_surface(&model, 100, t).unwrap();
        let observed: Vec<Option<Pixel2>> = dense
            .points
            .iter()
            .map(|p| Some(noisy(project(&k, &truth, p).unwrap(), &noise, &mut rng)))
            .collect();
        let start = RigidTransform::new(truth.rotation, truth.translation + Vec3::new(0.01, -0.02, 0.03));
        let cfg = RobustLossConfig {
            huber_delta: 1e12,
            ..Default::default()
        };
        let robust = refine_pose(&start, &dense, &observed, &k, &cfg).unwrap();
        let corrs: Vec<Correspondence> = dense
            .points
            .iter()
            .zip(&observed)
            .map(|(p, o)| Correspondence::new(*p, o.unwrap()))
            .collect();
        let plain = refine_lm(&start, &corrs, &k, &RefineConfig::default()).unwrap();
        assert!(robust.pose.translation_error(&plain.pose) < 1e-9);
        assert!(robust.pose.rotation_error(&plain.pose) < 1e-9);
        assert_eq!(robust.iterations, plain.iterations);

        // robust objective never ends above where it started
        let before = robust_objective(&start, &dense, &observed, &k, 5.0);
        let after = refine_pose(&start, &dense, &observed, &k, &RobustLossConfig::default()).unwrap();
        assert!(robust_objective(&after.pose, &dense, &observed, &k, 5.0) <= before);
    }
}

#[test]
fn face_counts_follow_area() {
    // unit cube: six equal faces, expected 100 points each out of 600
    let cube = ObjectModel::new("cube", [1.0, 1.0, 1.0]);
    for seed in 0..20 {
        let s = sample_model_surface(&cube, 600, seed).unwrap();
        let mut counts = [0usize; 6];
        for p in &s.points {
            let face = if (p.x.abs() - 0.5).abs() < 1e-12 {
                usize::from(p.x > 0.0)
            } else if (p.y.abs() - 0.5).abs() < 1e-12 {
                2 + usize::from(p.y > 0.0)
            } else {
                4 + usize::from(p.z > 0.0)
            };
            counts[face] += 1;
        }
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - 100.0).powi(2) / 100.0).sum();
        // 0.999 quantile of chi-square with 5 degrees of freedom
        assert!(chi2 < 20.52, "seed {seed}: counts {counts:?}, chi2 {chi2}");
    }
}
