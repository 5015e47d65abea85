use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::FilterState;
use crate::geometry::{CameraIntrinsics, RigidTransform, UnitQuaternion, Vec3};
use crate::sim::{
    catalog_object, look_target, workspace_center, CameraEnvelope, NoiseConfig, ObjectModel, ObjectPlacement,
    RobotKeypointModel, SceneConfig, WORKSPACE_SIZE,
};

use super::pipeline::{is_frame_drop, run_pipeline, trial_seed, PipelineConfig};
use super::records::ErrorRecord;
use super::stats::mean_std;

/// Everything an experiment needs besides its own geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSetup {
    pub intrinsics: CameraIntrinsics,
    pub robot: RobotKeypointModel,
    pub object: ObjectModel,
    pub noise: NoiseConfig,
    pub pipeline: PipelineConfig,
    /// Robot arm configuration; empty means the robot's ready pose.
    pub joint_angles: Vec<f64>,
    /// Base seed; see [`trial_seed`].
    pub seed: u64,
}

impl Default for ExperimentSetup {
    fn default() -> Self {
        Self {
            intrinsics: CameraIntrinsics::default(),
            robot: RobotKeypointModel::default(),
            object: catalog_object("sugar_box").expect("catalog has the sugar box"),
            noise: NoiseConfig::nominal(),
            pipeline: PipelineConfig::default(),
            joint_angles: Vec::new(),
            seed: 0,
        }
    }
}

impl ExperimentSetup {
    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        self.robot.validate()?;
        self.object.validate()?;
        self.noise.validate()?;
        if !self.joint_angles.is_empty() {
            self.robot.keypoints(&self.joint_angles)?;
        }
        self.pipeline.robust.validate()
    }

    pub fn scene(&self, camera_in_robot: RigidTransform, object_pose: RigidTransform) -> SceneConfig {
        SceneConfig {
            intrinsics: self.intrinsics,
            camera_in_robot,
            objects: vec![ObjectPlacement {
                model: self.object.name.clone(),
                pose: object_pose,
            }],
            joint_angles: self.joint_angles.clone(),
            check_envelope: false,
        }
    }

    /// Estimated `robot_T_object` for one trial, `None` if the frame could
    /// not be solved.
    pub fn estimate(&self, trial: u64, scene: &SceneConfig) -> Result<Option<RigidTransform>> {
        let seed = trial_seed(self.seed, trial);
        match run_pipeline(scene, 0, &self.robot, &self.object, &self.noise, &self.pipeline, seed) {
            Ok(out) => Ok(Some(out.robot_object)),
            Err(e) if is_frame_drop(&e) => Ok(None),
            Err(e) => Err(e),
        }
    }

    /// Runs one trial and scores it; frame drops become dropped records,
    /// anything else is an error.
    pub fn score(
        &self,
        experiment: &str,
        trial: u64,
        distance_m: f64,
        yaw_rad: f64,
        scene: &SceneConfig,
    ) -> Result<ErrorRecord> {
        let est = self.estimate(trial, scene)?;
        Ok(ErrorRecord::new(
            experiment,
            trial,
            distance_m,
            yaw_rad,
            &scene.objects[0].pose,
            est.as_ref(),
        )
        .refined(self.pipeline.refine))
    }
}

/// `robot_T_object` for an upright object resting on the table at `(x, y)`
/// rotated by `yaw` about the vertical.
pub fn object_on_table(model: &ObjectModel, x: f64, y: f64, yaw: f64) -> RigidTransform {
    RigidTransform::new(
        UnitQuaternion::from_axis_angle(&Vec3::z(), yaw),
        Vec3::new(x, y, 0.5 * model.dimensions[2]),
    )
}

/// `d_i = 0.92 + 0.10 i` for `i = 1..=7`.
pub fn default_distances() -> Vec<f64> {
    (1..=7).map(|i| 0.92 + 0.10 * i as f64).collect()
}

/// Corners of the workspace square.
pub fn default_positions() -> Vec<[f64; 2]> {
    let c = workspace_center();
    let (hx, hy) = (0.5 * WORKSPACE_SIZE[0], 0.5 * WORKSPACE_SIZE[1]);
    vec![
        [c.x - hx, c.y - hy],
        [c.x - hx, c.y + hy],
        [c.x + hx, c.y - hy],
        [c.x + hx, c.y + hy],
    ]
}

pub const DEFAULT_CAMERA_HEIGHT: f64 = 0.40;

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceSweepConfig {
    pub setup: ExperimentSetup,
    pub distances: Vec<f64>,
    pub positions: Vec<[f64; 2]>,
    pub yaw: f64,
    /// Trials per (distance, position) cell.
    pub trials: usize,
    pub camera_height: f64,
    pub camera_azimuth: f64,
    /// Also filter each cell's trials as a frame sequence.
    pub filter_alpha: Option<f64>,
}

impl Default for DistanceSweepConfig {
    fn default() -> Self {
        Self {
            setup: ExperimentSetup::default(),
            distances: default_distances(),
            positions: default_positions(),
            yaw: 45f64.to_radians(),
            trials: 200,
            camera_height: DEFAULT_CAMERA_HEIGHT,
            camera_azimuth: 0.0,
            filter_alpha: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Distance for distance sweeps, yaw (radians) for orientation sweeps.
    pub key: f64,
    pub mean_lateral_m: f64,
    pub std_lateral_m: f64,
    pub solved: usize,
    pub dropped: usize,
    /// Same statistics for the filtered stream, when filtering is on.
    pub filtered_mean_lateral_m: Option<f64>,
    pub filtered_std_lateral_m: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Raw records, each followed by its filtered counterpart if any.
    pub records: Vec<ErrorRecord>,
}

impl SweepReport {
    /// Mean and standard deviation of the raw lateral error over every
    /// solved trial.
    pub fn overall(&self) -> (f64, f64) {
        let errs: Vec<f64> = self
            .records
            .iter()
            .filter(|r| !r.filtered)
            .filter_map(|r| r.lateral_err_m)
            .collect();
        mean_std(&errs)
    }
}

fn check_envelope(distance: f64, azimuth: f64, height: f64) -> Result<()> {
    CameraEnvelope::default()
        .check(&CameraEnvelope::place(distance, azimuth, height, &look_target()))
        .map_err(|_| {
            Error::config(format!(
                "camera at distance {distance} m, azimuth {azimuth} rad, height {height} m is outside the envelope"
            ))
        })
}

fn lateral(records: &[ErrorRecord]) -> Vec<f64> {
    records.iter().filter_map(|r| r.lateral_err_m).collect()
}

/// A static camera/object arrangement observed `trials` times.
struct Cell {
    distance: f64,
    yaw: f64,
    camera: RigidTransform,
    object: RigidTransform,
}

/// Runs every trial of every cell; trial index is `cell * trials + t`.
/// With `filter_alpha`, each cell's trials are also fed in order through a
/// pose filter, as if they were consecutive frames of a static scene.
fn run_cells(
    setup: &ExperimentSetup,
    experiment: &str,
    cells: &[Cell],
    trials: usize,
    filter_alpha: Option<f64>,
) -> Result<(Vec<ErrorRecord>, Option<Vec<ErrorRecord>>)> {
    let filter = filter_alpha.map(FilterState::new).transpose()?;
    let estimates: Vec<Option<RigidTransform>> = (0..cells.len() * trials)
        .into_par_iter()
        .map(|i| {
            let c = &cells[i / trials];
            setup.estimate(i as u64, &setup.scene(c.camera, c.object))
        })
        .collect::<Result<_>>()?;
    let record = |i: usize, est: Option<&RigidTransform>| {
        let c = &cells[i / trials];
        ErrorRecord::new(experiment, i as u64, c.distance, c.yaw, &c.object, est).refined(setup.pipeline.refine)
    };
    let raw: Vec<ErrorRecord> = estimates
        .iter()
        .enumerate()
        .map(|(i, e)| record(i, e.as_ref()))
        .collect();
    let filtered = filter.map(|initial| {
        let mut out = Vec::with_capacity(raw.len());
        for (ci, chunk) in estimates.chunks(trials).enumerate() {
            let mut state = initial;
            let mut last = None;
            for (t, est) in chunk.iter().enumerate() {
                if let Some(m) = est {
                    let (next, pose) = state.update(m);
                    state = next;
                    last = Some(pose);
                }
                out.push(
                    record(ci * trials + t, last.as_ref())
                        .filtered(true)
                        .dropped(est.is_none()),
                );
            }
        }
        out
    });
    Ok((raw, filtered))
}

/// One row per `per_row` consecutive records.
fn summarize(keys: &[f64], per_row: usize, raw: Vec<ErrorRecord>, filtered: Option<Vec<ErrorRecord>>) -> SweepReport {
    let rows = keys
        .iter()
        .enumerate()
        .map(|(k, key)| {
            let span = k * per_row..(k + 1) * per_row;
            let errs = lateral(&raw[span.clone()]);
            let (mean, std) = mean_std(&errs);
            let f = filtered.as_ref().map(|f| mean_std(&lateral(&f[span])));
            SweepRow {
                key: *key,
                mean_lateral_m: mean,
                std_lateral_m: std,
                solved: errs.len(),
                dropped: per_row - errs.len(),
                filtered_mean_lateral_m: f.map(|x| x.0),
                filtered_std_lateral_m: f.map(|x| x.1),
            }
        })
        .collect();
    let records = match filtered {
        None => raw,
        Some(f) => raw.into_iter().zip(f).flat_map(|(a, b)| [a, b]).collect(),
    };
    SweepReport { rows, records }
}

/// Lateral error versus camera distance. Trial index runs over distance,
/// then position, then repetition.
pub fn run_distance_sweep(cfg: &DistanceSweepConfig) -> Result<SweepReport> {
    cfg.setup.validate()?;
    if cfg.trials == 0 || cfg.positions.is_empty() || cfg.distances.is_empty() {
        return Err(Error::config("distance sweep needs distances, positions and trials"));
    }
    let mut cells = Vec::with_capacity(cfg.distances.len() * cfg.positions.len());
    for &distance in &cfg.distances {
        check_envelope(distance, cfg.camera_azimuth, cfg.camera_height)?;
        let camera = CameraEnvelope::place(distance, cfg.camera_azimuth, cfg.camera_height, &look_target());
        for &[x, y] in &cfg.positions {
            cells.push(Cell {
                distance,
                yaw: cfg.yaw,
                camera,
                object: object_on_table(&cfg.setup.object, x, y, cfg.yaw),
            });
        }
    }
    let (raw, filtered) = run_cells(&cfg.setup, "distance_sweep", &cells, cfg.trials, cfg.filter_alpha)?;
    Ok(summarize(
        &cfg.distances,
        cfg.positions.len() * cfg.trials,
        raw,
        filtered,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrientationSweepConfig {
    pub setup: ExperimentSetup,
    pub distance: f64,
    pub yaws: Vec<f64>,
    pub position: [f64; 2],
    /// Trials per yaw.
    pub trials: usize,
    pub camera_height: f64,
    pub camera_azimuth: f64,
    pub filter_alpha: Option<f64>,
}

/// 0 to 350 degrees in 10 degree steps.
pub fn default_yaws() -> Vec<f64> {
    (0..36).map(|i| (10.0 * i as f64).to_radians()).collect()
}

impl Default for OrientationSweepConfig {
    fn default() -> Self {
        let c = workspace_center();
        Self {
            setup: ExperimentSetup::default(),
            distance: 1.12,
            yaws: default_yaws(),
            position: [c.x, c.y],
            trials: 20,
            camera_height: DEFAULT_CAMERA_HEIGHT,
            camera_azimuth: 0.0,
            filter_alpha: None,
        }
    }
}

/// Lateral error versus object yaw at a fixed camera distance.
pub fn run_orientation_sweep(cfg: &OrientationSweepConfig) -> Result<SweepReport> {
    cfg.setup.validate()?;
    if cfg.trials == 0 || cfg.yaws.is_empty() {
        return Err(Error::config("orientation sweep needs yaws and trials"));
    }
    check_envelope(cfg.distance, cfg.camera_azimuth, cfg.camera_height)?;
    let camera = CameraEnvelope::place(cfg.distance, cfg.camera_azimuth, cfg.camera_height, &look_target());
    let [x, y] = cfg.position;
    let cells: Vec<Cell> = cfg
        .yaws
        .iter()
        .map(|&yaw| Cell {
            distance: cfg.distance,
            yaw,
            camera,
            object: object_on_table(&cfg.setup.object, x, y, yaw),
        })
        .collect();
    let (raw, filtered) = run_cells(&cfg.setup, "orientation_sweep", &cells, cfg.trials, cfg.filter_alpha)?;
    Ok(summarize(&cfg.yaws, cfg.trials, raw, filtered))
}

/// `"1.23 ± 0.45"`: mean and standard deviation in centimeters.
pub fn format_mean_std_cm(mean_m: f64, std_m: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean_m, 100.0 * std_m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_distances_match_formula() {
        let d = default_distances();
        assert_eq!(d.len(), 7);
        assert!((d[0] - 1.02).abs() < 1e-12 && (d[6] - 1.62).abs() < 1e-12);
    }

    #[test]
    fn positions_span_the_square() {
        let p = default_positions();
        let xs: Vec<f64> = p.iter().map(|q| q[0]).collect();
        let ys: Vec<f64> = p.iter().map(|q| q[1]).collect();
        let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        assert!((span(&xs) - 0.2).abs() < 1e-12 && (span(&ys) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn clean_sweep_is_exact() {
        let cfg = DistanceSweepConfig {
            setup: ExperimentSetup {
                noise: NoiseConfig::clean(),
                ..ExperimentSetup::default()
            },
            trials: 1,
            ..DistanceSweepConfig::default()
        };
        let rep = run_distance_sweep(&cfg).unwrap();
        assert_eq!(rep.records.len(), 28);
        for r in &rep.rows {
            assert_eq!(r.dropped, 0);
            assert!(r.mean_lateral_m < 1e-6, "{r:?}");
        }
    }

    #[test]
    fn rejects_distance_outside_envelope() {
        let cfg = DistanceSweepConfig {
            distances: vec![3.0],
            trials: 1,
            ..DistanceSweepConfig::default()
        };
        assert!(matches!(run_distance_sweep(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn filtered_records_interleave() {
        let cfg = OrientationSweepConfig {
            yaws: vec![0.0, 1.0],
            trials: 30,
            filter_alpha: Some(0.3),
            ..OrientationSweepConfig::default()
        };
        let rep = run_orientation_sweep(&cfg).unwrap();
        assert_eq!(rep.records.len(), 120);
        for pair in rep.records.chunks(2) {
            assert_eq!(pair[0].trial, pair[1].trial);
            assert!(!pair[0].filtered && pair[1].filtered);
        }
        for row in &rep.rows {
            assert!(row.filtered_mean_lateral_m.unwrap() < row.mean_lateral_m);
        }
    }

    #[test]
    fn table_format() {
        assert_eq!(format_mean_std_cm(0.0123, 0.0045), "1.23 ± 0.45");
    }
}
