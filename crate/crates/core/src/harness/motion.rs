use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{FilterState, DEFAULT_ALPHA};
use crate::geometry::RigidTransform;
use crate::sim::{camera_trajectory, workspace_center, TrajectoryKind};

use super::records::ErrorRecord;
use super::stats::{empirical_cdf, fraction_within};
use super::sweep::{object_on_table, ExperimentSetup};

/// Minimum trajectory length for a meaningful CDF.
pub const MIN_MOTION_FRAMES: usize = 100;

#[derive(Clone, Debug, PartialEq)]
pub struct CameraMotionConfig {
    pub setup: ExperimentSetup,
    pub frames: usize,
    pub trajectory: TrajectoryKind,
    pub alpha: f64,
    pub gate_distance: Option<f64>,
    /// Stationary object, `robot_T_object`.
    pub object_pose: RigidTransform,
    pub threshold_m: f64,
}

impl Default for CameraMotionConfig {
    fn default() -> Self {
        let setup = ExperimentSetup::default();
        let c = workspace_center();
        let object_pose = object_on_table(&setup.object, c.x, c.y, 45f64.to_radians());
        Self {
            setup,
            frames: 500,
            trajectory: TrajectoryKind::Handheld,
            alpha: DEFAULT_ALPHA,
            gate_distance: None,
            object_pose,
            threshold_m: 0.02,
        }
    }
}

/// Fraction of frames whose absolute error on each robot axis is within
/// the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisFractions {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisCdfs {
    pub x: Vec<(f64, f64)>,
    pub y: Vec<(f64, f64)>,
    pub z: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraMotionReport {
    /// Per frame, a raw record followed by a filtered one.
    pub records: Vec<ErrorRecord>,
    pub raw: AxisFractions,
    pub filtered: AxisFractions,
    pub raw_cdf: AxisCdfs,
    pub filtered_cdf: AxisCdfs,
    pub solved: usize,
    pub dropped: usize,
}

fn abs_errors(records: &[&ErrorRecord]) -> [Vec<f64>; 3] {
    let pick = |f: fn(&ErrorRecord) -> Option<f64>| -> Vec<f64> {
        records.iter().filter_map(|r| f(r)).map(f64::abs).collect()
    };
    [pick(|r| r.err_x_m), pick(|r| r.err_y_m), pick(|r| r.err_z_m)]
}

fn summarize(records: &[&ErrorRecord], t: f64) -> (AxisFractions, AxisCdfs) {
    let [x, y, z] = abs_errors(records);
    (
        AxisFractions {
            x: fraction_within(&x, t),
            y: fraction_within(&y, t),
            z: fraction_within(&z, t),
        },
        AxisCdfs {
            x: empirical_cdf(&x),
            y: empirical_cdf(&y),
            z: empirical_cdf(&z),
        },
    )
}

/// Stationary object, moving camera: raw per-frame estimates and their
/// exponentially filtered counterpart, scored against the truth.
///
/// Frames that cannot be solved are flagged dropped; the filtered stream
/// carries its last pose forward through them.
pub fn run_camera_motion(cfg: &CameraMotionConfig) -> Result<CameraMotionReport> {
    cfg.setup.validate()?;
    if cfg.frames < MIN_MOTION_FRAMES {
        return Err(Error::config(format!(
            "camera motion needs at least {MIN_MOTION_FRAMES} frames, got {}",
            cfg.frames
        )));
    }
    let mut filter = FilterState::new(cfg.alpha)?;
    if let Some(g) = cfg.gate_distance {
        filter = filter.with_gate(g)?;
    }
    let cameras = camera_trajectory(cfg.trajectory, cfg.frames, cfg.setup.seed)?;
    let truth = cfg.object_pose;

    // per-frame solves are independent; filtering is sequential
    let estimates: Vec<Option<RigidTransform>> = cameras
        .par_iter()
        .enumerate()
        .map(|(i, cam)| cfg.setup.estimate(i as u64, &cfg.setup.scene(*cam, truth)))
        .collect::<Result<_>>()?;

    let yaw = {
        let fwd = truth.rotation.rotate(&crate::geometry::Vec3::x());
        fwd.y.atan2(fwd.x)
    };
    let refined = cfg.setup.pipeline.refine;
    let mut records = Vec::with_capacity(2 * cfg.frames);
    let mut last: Option<RigidTransform> = None;
    for (i, (cam, est)) in cameras.iter().zip(&estimates).enumerate() {
        let distance = cam.translation.x.hypot(cam.translation.y);
        let trial = i as u64;
        records.push(ErrorRecord::new("camera_motion", trial, distance, yaw, &truth, est.as_ref()).refined(refined));
        if let Some(m) = est {
            let (next, out) = filter.update(m);
            filter = next;
            last = Some(out);
        }
        records.push(
            ErrorRecord::new("camera_motion", trial, distance, yaw, &truth, last.as_ref())
                .refined(refined)
                .filtered(true)
                .dropped(est.is_none()),
        );
    }

    let raw: Vec<&ErrorRecord> = records.iter().filter(|r| !r.filtered).collect();
    let filt: Vec<&ErrorRecord> = records.iter().filter(|r| r.filtered).collect();
    let (raw_frac, raw_cdf) = summarize(&raw, cfg.threshold_m);
    let (filt_frac, filt_cdf) = summarize(&filt, cfg.threshold_m);
    let dropped = estimates.iter().filter(|e| e.is_none()).count();
    Ok(CameraMotionReport {
        records,
        raw: raw_frac,
        filtered: filt_frac,
        raw_cdf,
        filtered_cdf: filt_cdf,
        solved: cfg.frames - dropped,
        dropped,
    })
}
