use indirect_pose::belief::{
    associate_vertices, extract_peaks, read_affinity_stack, read_belief_stack, write_affinity_stack,
    write_belief_stack, AffinityFieldStack, BeliefMapStack, DEFAULT_MAX_ANGLE, DEFAULT_THRESHOLD,
};
use indirect_pose::sim::{catalog_object, render_belief_stacks, MapGeometry, CENTROID_INDEX};
use indirect_pose::{CameraIntrinsics, NoiseConfig, RigidTransform, UnitQuaternion, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gaussian_blob(w: usize, h: usize, cx: f64, cy: f64, sigma: f64) -> BeliefMapStack {
    let mut s = BeliefMapStack::zeros(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let d2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            s.set(0, x, y, (-d2 / (2.0 * sigma * sigma)).exp() as f32);
        }
    }
    s
}

#[test]
fn sub_pixel_centers_within_quarter_pixel() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (cx, cy) = (rng.random_range(5.0..45.0), rng.random_range(5.0..45.0));
        let sigma = rng.random_range(1.0..3.0);
        let peaks = extract_peaks(&gaussian_blob(50, 50, cx, cy, sigma), DEFAULT_THRESHOLD);
        assert_eq!(peaks.len(), 1);
        worst = worst.max(((peaks[0].position.u - cx).powi(2) + (peaks[0].position.v - cy).powi(2)).sqrt());
    }
    assert!(worst < 0.25, "worst error {worst}");
}

fn camera_pose(x: f64, y: f64, depth: f64, rv: Vec3) -> RigidTransform {
    RigidTransform::new(UnitQuaternion::from_rotation_vector(&rv), Vec3::new(x, y, depth))
}

/// Two rendered instances at least 10 map cells apart; every assigned
/// vertex must be the peak of its own instance.
#[test]
fn two_instances_associate_correctly() {
    let k = CameraIntrinsics::default();
    let geom = MapGeometry::default();
    let model = catalog_object("sugar_box").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut assigned = 0;
    for trial in 0..200 {
        let depth = rng.random_range(0.9..1.4);
        let sep_cells: f64 = rng.random_range(10.0..25.0);
        let sep_m = sep_cells * geom.scale * depth / k.fx;
        let angle: f64 = rng.random_range(0.0..std::f64::consts::PI);
        let (dx, dy) = (0.5 * sep_m * angle.cos(), 0.5 * sep_m * angle.sin());
        let mut rv = || {
            Vec3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(-3.0..3.0),
            )
        };
        let poses = [
            camera_pose(-dx, -dy + 0.05, depth, rv()),
            camera_pose(dx, dy + 0.05, depth, rv()),
        ];
        let r = render_belief_stacks(
            &k,
            &poses,
            &model,
            &geom,
            &NoiseConfig::clean(),
            &mut ChaCha8Rng::seed_from_u64(trial),
        )
        .unwrap();
        let centroids: Vec<_> = r.truth.iter().map(|t| t[CENTROID_INDEX].unwrap()).collect();
        assert!(centroids[0].distance(&centroids[1]) >= 9.0);

        let peaks = extract_peaks(&r.beliefs, DEFAULT_THRESHOLD);
        let instances = associate_vertices(&peaks, &r.affinities, DEFAULT_MAX_ANGLE);
        assert_eq!(instances.len(), 2, "trial {trial}");
        for inst in &instances {
            let label =
                if inst.centroid.position.distance(&centroids[0]) < inst.centroid.position.distance(&centroids[1]) {
                    0
                } else {
                    1
                };
            assert!(inst.centroid.position.distance(&centroids[label]) < 0.5);
            for (i, v) in inst.vertices.iter().enumerate() {
                let Some(v) = v else { continue };
                let own = r.truth[label][i].unwrap();
                let other = r.truth[1 - label][i].unwrap();
                assert!(
                    v.position.distance(&own) < v.position.distance(&other) && v.position.distance(&own) < 0.5,
                    "trial {trial}: vertex {i} went to the wrong instance: {:?} own {own:?} other {other:?} label {label}", v.position
                );
                assigned += 1;
            }
        }
    }
    // merged blobs may hide a vertex, but most must be found
    assert!(assigned > 200 * 16 * 9 / 10, "only {assigned} vertices assigned");
}

#[test]
fn association_is_deterministic() {
    let k = CameraIntrinsics::default();
    let model = catalog_object("cookies").unwrap();
    let noise = NoiseConfig {
        false_positive_rate: 1.0,
        ..NoiseConfig::nominal()
    };
    let poses = [
        camera_pose(-0.08, 0.0, 1.1, Vec3::new(0.2, 0.1, 0.5)),
        camera_pose(0.1, 0.05, 1.2, Vec3::new(-0.1, 0.3, -1.0)),
    ];
    let r = render_belief_stacks(
        &k,
        &poses,
        &model,
        &MapGeometry::default(),
        &noise,
        &mut ChaCha8Rng::seed_from_u64(4),
    )
    .unwrap();
    let run = || {
        associate_vertices(
            &extract_peaks(&r.beliefs, DEFAULT_THRESHOLD),
            &r.affinities,
            DEFAULT_MAX_ANGLE,
        )
    };
    assert_eq!(run(), run());
}

fn strict_maxima(s: &BeliefMapStack, threshold: f64) -> Vec<(usize, usize, usize)> {
    let mut out = vec![];
    for m in 0..s.len() {
        for y in 0..s.height() {
            for x in 0..s.width() {
                let v = s.get(m, x, y);
                if (v as f64) < threshold || v <= 0.0 {
                    continue;
                }
                let mut max = true;
                for ny in y.saturating_sub(1)..=(y + 1).min(s.height() - 1) {
                    for nx in x.saturating_sub(1)..=(x + 1).min(s.width() - 1) {
                        if (nx, ny) != (x, y) && s.get(m, nx, ny) >= v {
                            max = false;
                        }
                    }
                }
                if max {
                    out.push((m, x, y));
                }
            }
        }
    }
    out
}

prop_compose! {
    fn small_stack()(w in 1usize..8, h in 1usize..8, n in 1usize..3)
        (values in prop::collection::vec(0.0f32..=1.0, w * h * n), w in Just(w), h in Just(h), n in Just(n)) -> BeliefMapStack {
        BeliefMapStack::from_values(w, h, n, values).unwrap()
    }
}

proptest! {
    #[test]
    fn peaks_are_refined_strict_maxima(s in small_stack(), threshold in 0.05f64..0.9) {
        let peaks = extract_peaks(&s, threshold);
        let maxima = strict_maxima(&s, threshold);
        prop_assert!(peaks.len() <= maxima.len());
        for p in &peaks {
            prop_assert!(p.confidence >= threshold);
            let cell = maxima.iter().find(|&&(m, x, y)| {
                m == p.map_index && (p.position.u - x as f64).abs() <= 0.5 && (p.position.v - y as f64).abs() <= 0.5
            });
            prop_assert!(cell.is_some(), "peak {:?} not near a strict maximum", p);
        }
        for w in peaks.windows(2) {
            prop_assert!(w[0].confidence >= w[1].confidence);
        }
    }

    #[test]
    fn belief_files_round_trip(s in small_stack()) {
        let mut buf = Vec::new();
        write_belief_stack(&s, &mut buf).unwrap();
        prop_assert_eq!(read_belief_stack(&buf).unwrap(), s);
    }

    #[test]
    fn affinity_files_round_trip(w in 1usize..6, h in 1usize..6, m in 1usize..3, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = AffinityFieldStack::zeros(w, h, m);
        for f in 0..m {
            for y in 0..h {
                for x in 0..w {
                    let t: f32 = rng.random_range(0.0..std::f32::consts::TAU);
                    a.set(f, x, y, (0.7 * t.cos(), 0.7 * t.sin()));
                }
            }
        }
        let mut buf = Vec::new();
        write_affinity_stack(&a, &mut buf).unwrap();
        prop_assert_eq!(read_affinity_stack(&buf).unwrap(), a);
    }
}
