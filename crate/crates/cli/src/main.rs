use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use indirect_pose::harness::stats::{spearman, spearman_p_greater};
use indirect_pose::harness::{
    format_mean_std_cm, run_camera_motion, run_distance_sweep, run_grasp_trials, run_orientation_sweep, sort_records,
    write_records, CameraMotionConfig, DistanceSweepConfig, ErrorRecord, ExperimentSetup, GraspTrialsConfig,
    OrientationSweepConfig, OutputFormat, SweepReport,
};
use indirect_pose::sim::resolve_object;
use indirect_pose::{
    object_in_robot_frame, Error, NoiseConfig, PnPProblem, RefineConfig, Result, RigidTransform, RobotKeypointModel,
    SceneConfig,
};

#[derive(Parser)]
#[command(
    name = "indirect-pose",
    version,
    about = "Object-to-robot pose estimation through an external camera"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Object pose in the robot frame from camera-frame robot and object poses.
    Compose {
        /// `cam_T_robot` pose JSON.
        cam_robot: PathBuf,
        /// `cam_T_object` pose JSON.
        cam_object: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PnP from a correspondence file.
    Solve {
        correspondences: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Lateral error versus camera distance.
    DistanceSweep {
        #[command(flatten)]
        common: Common,
    },
    /// Lateral error versus object yaw.
    OrientationSweep {
        #[command(flatten)]
        common: Common,
        /// Camera distance, meters.
        #[arg(long, default_value_t = 1.12)]
        distance: f64,
    },
    /// Moving camera, static object, raw and filtered estimates.
    CameraMotion {
        #[command(flatten)]
        common: Common,
        /// Trajectory length; at least 100.
        #[arg(long, default_value_t = 500)]
        frames: usize,
    },
    /// Simulated top-down grasps on random object placements.
    GraspTrials {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Scene JSON; its intrinsics and joint angles are used.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Catalog name, inline JSON, or a JSON file.
    #[arg(long)]
    object: Option<String>,
    /// Robot keypoint model JSON file.
    #[arg(long)]
    robot: Option<PathBuf>,
    /// clean, nominal, harsh, inline JSON, or a JSON file.
    #[arg(long, default_value = "nominal")]
    noise: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trials per cell (grasps per camera spot for grasp trials).
    #[arg(long)]
    trials: Option<usize>,
    /// Dense robust refinement of the object pose.
    #[arg(long)]
    refine: bool,
    /// Pose filter blend factor; camera-motion defaults to 0.095, sweeps
    /// only filter when this is given.
    #[arg(long)]
    filter_alpha: Option<f64>,
    /// Records file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

fn read(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}

/// Inline JSON, an existing file, or `None` for anything else.
fn json_arg(arg: &str) -> Result<Option<String>> {
    if arg.trim_start().starts_with('{') {
        return Ok(Some(arg.to_owned()));
    }
    let path = Path::new(arg);
    if path.extension().is_some_and(|e| e == "json") {
        return read(path).map(Some);
    }
    Ok(None)
}

impl Common {
    fn setup(&self) -> Result<(ExperimentSetup, Option<SceneConfig>)> {
        let mut setup = ExperimentSetup {
            seed: self.seed,
            ..ExperimentSetup::default()
        };
        let scene = match &self.scene {
            Some(p) => Some(SceneConfig::from_json(&read(p)?)?),
            None => None,
        };
        if let Some(s) = &scene {
            setup.intrinsics = s.intrinsics;
            setup.joint_angles = s.joint_angles.clone();
        }
        if let Some(o) = &self.object {
            setup.object = match json_arg(o)? {
                Some(json) => resolve_object(&json)?,
                None => resolve_object(o)?,
            };
        }
        if let Some(p) = &self.robot {
            setup.robot = RobotKeypointModel::from_json(&read(p)?)?;
        }
        setup.noise = match json_arg(&self.noise)? {
            Some(json) => NoiseConfig::from_json(&json)?,
            None => NoiseConfig::preset(&self.noise)
                .ok_or_else(|| Error::Config(format!("unknown noise preset '{}'", self.noise)))?,
        };
        setup.pipeline.refine = self.refine;
        setup.validate()?;
        Ok((setup, scene))
    }

    fn trials(&self, default: usize) -> usize {
        self.trials.unwrap_or(default)
    }

    fn emit(&self, mut records: Vec<ErrorRecord>) -> Result<()> {
        let format: OutputFormat = self.format.parse()?;
        sort_records(&mut records);
        match &self.out {
            Some(p) => indirect_pose::harness::write_results(&records, p, format),
            None => {
                let stdout = io::stdout();
                let mut w = io::BufWriter::new(stdout.lock());
                write_records(&records, &mut w, format)?;
                w.flush()?;
                Ok(())
            }
        }
    }
}

fn write_json<T: serde::Serialize>(value: &T, out: &Option<PathBuf>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => fs::write(p, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn print_sweep(label: &str, report: &SweepReport, key_scale: f64) {
    eprintln!("{label:>10}  lateral error (cm)  solved  dropped");
    for row in &report.rows {
        let mut line = format!(
            "{:>10.2}  {:>18}  {:>6}  {:>7}",
            row.key * key_scale,
            format_mean_std_cm(row.mean_lateral_m, row.std_lateral_m),
            row.solved,
            row.dropped
        );
        if let (Some(m), Some(s)) = (row.filtered_mean_lateral_m, row.filtered_std_lateral_m) {
            line += &format!("  filtered {}", format_mean_std_cm(m, s));
        }
        eprintln!("{line}");
    }
    let (m, s) = report.overall();
    eprintln!("{:>10}  {:>18}", "overall", format_mean_std_cm(m, s));
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Compose {
            cam_robot,
            cam_object,
            out,
        } => {
            let cr = RigidTransform::from_json(&read(&cam_robot)?)?;
            let co = RigidTransform::from_json(&read(&cam_object)?)?;
            write_json(&object_in_robot_frame(&cr, &co), &out)
        }
        Command::Solve { correspondences, out } => {
            let problem = PnPProblem::from_json(&read(&correspondences)?)?;
            write_json(&problem.solve(&RefineConfig::default())?, &out)
        }
        Command::DistanceSweep { common } => {
            let (setup, _) = common.setup()?;
            let cfg = DistanceSweepConfig {
                setup,
                trials: common.trials(200),
                filter_alpha: common.filter_alpha,
                ..DistanceSweepConfig::default()
            };
            let report = run_distance_sweep(&cfg)?;
            print_sweep("distance m", &report, 1.0);
            let keys: Vec<f64> = report.rows.iter().map(|r| r.key).collect();
            let means: Vec<f64> = report.rows.iter().map(|r| r.mean_lateral_m).collect();
            eprintln!(
                "spearman rho {:.3}, one-sided p {:.4}",
                spearman(&keys, &means),
                spearman_p_greater(&keys, &means)
            );
            common.emit(report.records)
        }
        Command::OrientationSweep { common, distance } => {
            let (setup, _) = common.setup()?;
            let cfg = OrientationSweepConfig {
                setup,
                distance,
                trials: common.trials(20),
                filter_alpha: common.filter_alpha,
                ..OrientationSweepConfig::default()
            };
            let report = run_orientation_sweep(&cfg)?;
            print_sweep("yaw deg", &report, 180.0 / std::f64::consts::PI);
            common.emit(report.records)
        }
        Command::CameraMotion { common, frames } => {
            let (setup, scene) = common.setup()?;
            let mut cfg = CameraMotionConfig {
                setup,
                frames,
                ..CameraMotionConfig::default()
            };
            if let Some(a) = common.filter_alpha {
                cfg.alpha = a;
            }
            if let Some(p) = scene.as_ref().and_then(|s| s.objects.first()) {
                cfg.object_pose = p.pose;
            }
            let report = run_camera_motion(&cfg)?;
            eprintln!("frames {frames}, solved {}, dropped {}", report.solved, report.dropped);
            eprintln!("within {:.0} cm      x      y      z", 100.0 * cfg.threshold_m);
            for (name, f) in [("raw", report.raw), ("filtered", report.filtered)] {
                eprintln!("{name:>12}  {:.3}  {:.3}  {:.3}", f.x, f.y, f.z);
            }
            common.emit(report.records)
        }
        Command::GraspTrials { common } => {
            let (setup, _) = common.setup()?;
            let mut cfg = GraspTrialsConfig {
                setup,
                ..GraspTrialsConfig::default()
            };
            cfg.grasps_per_camera = common.trials(cfg.grasps_per_camera);
            if common.object.is_some() {
                cfg.objects = vec![cfg.setup.object.clone()];
            }
            let report = run_grasp_trials(&cfg)?;
            for r in &report.per_object {
                eprintln!("{:>14}  {}/{}", r.object, r.successes, r.trials);
            }
            eprintln!(
                "{:>14}  {}/{} ({:.0}%)",
                "total",
                report.successes,
                report.trials,
                100.0 * report.success_rate()
            );
            common.emit(report.records)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
