//! Exponentially weighted pose smoothing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{slerp, RigidTransform};

pub const DEFAULT_ALPHA: f64 = 0.095;
pub const DEFAULT_FRAME_RATE: f64 = 15.0;
pub const DEFAULT_GATE_DISTANCE: f64 = 0.30;

/// Filter for one pose stream. Streams are independent; keep one state per
/// stream and feed measurements in order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    pub alpha: f64,
    pub current: Option<RigidTransform>,
    /// Measurements whose translation jumps farther than this from the
    /// filtered pose are ignored.
    pub gate_distance: Option<f64>,
}

impl Default for FilterState {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            current: None,
            gate_distance: None,
        }
    }
}

impl FilterState {
    pub fn new(alpha: f64) -> Result<Self> {
        let s = Self {
            alpha,
            ..Self::default()
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_gate(mut self, gate_distance: f64) -> Result<Self> {
        self.gate_distance = Some(gate_distance);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config(format!(
                "filter alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if let Some(g) = self.gate_distance {
            if !(g > 0.0) {
                return Err(Error::config(format!("gate distance must be positive, got {g}")));
            }
        }
        Ok(())
    }

    /// Blends `measurement` into the state and returns the new state with
    /// the filtered pose.
    pub fn update(self, measurement: &RigidTransform) -> (Self, RigidTransform) {
        let Some(prev) = self.current else {
            let next = Self {
                current: Some(*measurement),
                ..self
            };
            return (next, *measurement);
        };
        if let Some(gate) = self.gate_distance {
            if prev.translation_error(measurement) > gate {
                return (self, prev);
            }
        }
        let a = self.alpha;
        let filtered = RigidTransform::new(
            slerp(&prev.rotation, &measurement.rotation, a),
            prev.translation * (1.0 - a) + measurement.translation * a,
        );
        (
            Self {
                current: Some(filtered),
                ..self
            },
            filtered,
        )
    }

    pub fn reset(&mut self) {
        self.current = None;
    }
}

/// Frames until a step input is tracked to within `fraction` of its size:
/// the smallest `n` with `1 - (1 - alpha)^n >= fraction`.
pub fn step_response_frames(alpha: f64, fraction: f64) -> u32 {
    if alpha >= 1.0 || fraction <= 0.0 {
        return 1;
    }
    let decay = 1.0 - alpha;
    let reached = |n: u32| 1.0 - decay.powi(n as i32) >= fraction;
    let guess = ((1.0 - fraction).ln() / decay.ln()).ceil().max(1.0) as u32;
    // correct the closed form for rounding at the boundary
    let mut n = guess.saturating_sub(1).max(1);
    while !reached(n) {
        n += 1;
    }
    n
}
