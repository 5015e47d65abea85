use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RigidTransform;

/// JSON Schema for the JSON results file.
pub const RESULTS_SCHEMA: &str = include_str!("../../data/results.schema.json");

/// Column order of the CSV results file.
pub const CSV_COLUMNS: [&str; 12] = [
    "experiment",
    "trial",
    "distance_m",
    "yaw_rad",
    "err_x_m",
    "err_y_m",
    "err_z_m",
    "lateral_err_m",
    "rot_err_rad",
    "refined",
    "filtered",
    "dropped",
];

/// One scored frame. Errors are estimate minus truth in the robot frame,
/// absent when the frame was dropped and no estimate exists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorRecord {
    pub experiment: String,
    pub trial: u64,
    /// Horizontal camera-to-robot distance.
    pub distance_m: f64,
    /// Object yaw about the robot z axis.
    pub yaw_rad: f64,
    pub err_x_m: Option<f64>,
    pub err_y_m: Option<f64>,
    pub err_z_m: Option<f64>,
    pub lateral_err_m: Option<f64>,
    pub rot_err_rad: Option<f64>,
    pub refined: bool,
    pub filtered: bool,
    pub dropped: bool,
}

impl ErrorRecord {
    /// Record comparing `estimate` against `truth` (both `robot_T_object`).
    /// A dropped frame may still carry an estimate, e.g. one carried forward.
    pub fn new(
        experiment: &str,
        trial: u64,
        distance_m: f64,
        yaw_rad: f64,
        truth: &RigidTransform,
        estimate: Option<&RigidTransform>,
    ) -> Self {
        let mut r = Self {
            experiment: experiment.to_owned(),
            trial,
            distance_m,
            yaw_rad,
            err_x_m: None,
            err_y_m: None,
            err_z_m: None,
            lateral_err_m: None,
            rot_err_rad: None,
            refined: false,
            filtered: false,
            dropped: estimate.is_none(),
        };
        if let Some(est) = estimate {
            let e = est.translation - truth.translation;
            r.err_x_m = Some(e.x);
            r.err_y_m = Some(e.y);
            r.err_z_m = Some(e.z);
            r.lateral_err_m = Some(e.x.hypot(e.y));
            r.rot_err_rad = Some(est.rotation_error(truth));
        }
        r
    }

    pub fn refined(mut self, on: bool) -> Self {
        self.refined = on;
        self
    }

    pub fn filtered(mut self, on: bool) -> Self {
        self.filtered = on;
        self
    }

    pub fn dropped(mut self, on: bool) -> Self {
        self.dropped = on;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::config(format!("unknown output format '{other}'"))),
        }
    }
}

/// Output order: by experiment, then trial, raw before filtered.
pub fn sort_records(records: &mut [ErrorRecord]) {
    records.sort_by(|a, b| {
        a.experiment
            .cmp(&b.experiment)
            .then(a.trial.cmp(&b.trial))
            .then(a.filtered.cmp(&b.filtered))
            .then(a.refined.cmp(&b.refined))
    });
}

/// Writes records as CSV (header always present) or as a JSON array.
/// Floats use the shortest representation that parses back to the same
/// value.
pub fn write_records(records: &[ErrorRecord], w: impl Write, format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => {
            let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
            out.write_record(CSV_COLUMNS)?;
            for r in records {
                out.serialize(r)?;
            }
            out.flush()?;
        }
        OutputFormat::Json => {
            let mut w = w;
            serde_json::to_writer_pretty(&mut w, records)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_results(records: &[ErrorRecord], path: &Path, format: OutputFormat) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_records(records, &mut w, format)?;
    w.flush()?;
    Ok(())
}

pub fn read_records(r: impl Read, format: OutputFormat) -> Result<Vec<ErrorRecord>> {
    match format {
        OutputFormat::Csv => {
            let mut rdr = csv::Reader::from_reader(r);
            let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
            if header != CSV_COLUMNS {
                return Err(Error::parse(format!("unexpected CSV header {header:?}")));
            }
            rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
        }
        OutputFormat::Json => Ok(serde_json::from_reader(r)?),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{UnitQuaternion, Vec3};

    fn sample() -> ErrorRecord {
        let truth = RigidTransform::from_translation(Vec3::new(0.5, -0.1, 0.05));
        let est = RigidTransform::new(
            UnitQuaternion::from_rotation_vector(&Vec3::new(0.0, 0.0, 0.01)),
            Vec3::new(0.5 + 1.0 / 3.0 * 1e-2, -0.1 - 0.1234567890123e-3, 0.05),
        );
        ErrorRecord::new(
            "distance_sweep",
            7,
            1.02,
            std::f64::consts::FRAC_PI_4,
            &truth,
            Some(&est),
        )
        .refined(true)
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        write_records(&[], &mut buf, OutputFormat::Csv).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), CSV_COLUMNS.join(",") + "\n");
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dropped = ErrorRecord::new("x", 1, 1.0, 0.0, &RigidTransform::identity(), None);
        let recs = vec![sample(), dropped];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf, OutputFormat::Csv).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text
            .lines()
            .nth(2)
            .unwrap()
            .starts_with("x,1,1.0,0.0,,,,,,false,false,true"));
        assert_eq!(read_records(buf.as_slice(), OutputFormat::Csv).unwrap(), recs);
    }

    #[test]
    fn json_round_trip() {
        let recs = vec![sample()];
        let mut buf = Vec::new();
        write_records(&recs, &mut buf, OutputFormat::Json).unwrap();
        assert_eq!(read_records(buf.as_slice(), OutputFormat::Json).unwrap(), recs);
    }

    #[test]
    fn lateral_is_hypot() {
        let r = sample();
        let (x, y) = (r.err_x_m.unwrap(), r.err_y_m.unwrap());
        assert!((r.lateral_err_m.unwrap().powi(2) - (x * x + y * y)).abs() < 1e-15);
    }

    #[test]
    fn sorting() {
        let mut recs = vec![
            sample().filtered(true),
            ErrorRecord { trial: 2, ..sample() },
            sample(),
            ErrorRecord {
                experiment: "a".into(),
                ..sample()
            },
        ];
        sort_records(&mut recs);
        assert_eq!(recs[0].experiment, "a");
        assert_eq!((recs[1].trial, recs[1].filtered), (2, false));
        assert_eq!((recs[2].trial, recs[2].filtered), (7, false));
        assert!(recs[3].filtered);
    }
}
