//! Desk-scale experiments run against the simulator: distance and
//! orientation sweeps, a moving-camera run with filtering, and grasp trials.
//!
//! Trials are independent and run in parallel; trial `i` draws all of its
//! randomness from [`trial_seed`]`(seed, i)`, so results do not depend on
//! scheduling.

mod grasp;
mod motion;
mod pipeline;
mod records;
pub mod stats;
mod sweep;

pub use grasp::{
    default_grasp_objects, grasp_errors, grasp_yaw, run_grasp_trials, CameraSpot, GraspErrors, GraspReport,
    GraspToleranceConfig, GraspTrialsConfig, ObjectGraspRate,
};
pub use motion::{
    run_camera_motion, AxisCdfs, AxisFractions, CameraMotionConfig, CameraMotionReport, MIN_MOTION_FRAMES,
};
pub use pipeline::{is_frame_drop, run_pipeline, trial_seed, PipelineConfig, PipelineOutput, DEFAULT_MAX_RMSE};
pub use records::{
    read_records, sort_records, write_records, write_results, ErrorRecord, OutputFormat, CSV_COLUMNS, RESULTS_SCHEMA,
};
pub use sweep::{
    default_distances, default_positions, default_yaws, format_mean_std_cm, object_on_table, run_distance_sweep,
    run_orientation_sweep, DistanceSweepConfig, ExperimentSetup, OrientationSweepConfig, SweepReport, SweepRow,
    DEFAULT_CAMERA_HEIGHT,
};
