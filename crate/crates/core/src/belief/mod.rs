//! Belief-map keypoint decoding and multi-instance association.
//!
//! A belief stack holds one confidence grid per keypoint; the last grid is
//! the object centroid. Each non-centroid keypoint also has an affinity
//! field of unit vectors that point from the keypoint toward the centroid of
//! the instance it belongs to, which is what lets several instances of one
//! object be separated.

mod io;

pub use io::{
    read_affinity_stack, read_belief_stack, write_affinity_stack, write_belief_stack, StackHeader, StackKind,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pixel2;
use crate::pnp::Correspondence;
use crate::sim::ObjectModel;

pub const DEFAULT_THRESHOLD: f64 = 0.1;
pub const DEFAULT_MAX_ANGLE: f64 = 0.5;

/// Stack of `n` belief grids, row-major, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BeliefMapStack {
    width: usize,
    height: usize,
    n: usize,
    values: Vec<f32>,
}

impl BeliefMapStack {
    pub fn zeros(width: usize, height: usize, n: usize) -> Self {
        Self {
            width,
            height,
            n,
            values: vec![0.0; width * height * n],
        }
    }

    pub fn from_values(width: usize, height: usize, n: usize, values: Vec<f32>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(n))
            .ok_or_else(|| Error::parse("belief stack dimensions overflow"))?;
        if values.len() != expected {
            return Err(Error::parse(format!(
                "belief stack expects {expected} values, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::parse(format!("belief value {bad} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            n,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn len(&self) -> usize {
        self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, map: usize, x: usize, y: usize) -> f32 {
        self.values[(map * self.height + y) * self.width + x]
    }

    /// Sets a cell, clamping to `[0, 1]`.
    #[inline]
    pub fn set(&mut self, map: usize, x: usize, y: usize, value: f32) {
        self.values[(map * self.height + y) * self.width + x] = value.clamp(0.0, 1.0);
    }

    pub fn map(&self, map: usize) -> &[f32] {
        let len = self.width * self.height;
        &self.values[map * len..(map + 1) * len]
    }
}

/// `m` fields of 2-vectors. Each field is stored as its x grid followed by
/// its y grid.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityFieldStack {
    width: usize,
    height: usize,
    m: usize,
    values: Vec<f32>,
}

impl AffinityFieldStack {
    pub fn zeros(width: usize, height: usize, m: usize) -> Self {
        Self {
            width,
            height,
            m,
            values: vec![0.0; width * height * m * 2],
        }
    }

    pub fn from_values(width: usize, height: usize, m: usize, values: Vec<f32>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .and_then(|v| v.checked_mul(m))
            .and_then(|v| v.checked_mul(2))
            .ok_or_else(|| Error::parse("affinity stack dimensions overflow"))?;
        if values.len() != expected {
            return Err(Error::parse(format!(
                "affinity stack expects {expected} values, got {}",
                values.len()
            )));
        }
        let s = Self {
            width,
            height,
            m,
            values,
        };
        for f in 0..m {
            for y in 0..height {
                for x in 0..width {
                    let (ax, ay) = s.get(f, x, y);
                    let mag = (ax as f64).hypot(ay as f64);
                    if !(mag <= 1.0 + 1e-6) {
                        return Err(Error::parse(format!(
                            "affinity magnitude {mag} exceeds 1 at field {f} ({x}, {y})"
                        )));
                    }
                }
            }
        }
        Ok(s)
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn len(&self) -> usize {
        self.m
    }
    pub fn is_empty(&self) -> bool {
        self.m == 0
    }
    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    fn index(&self, field: usize, component: usize, x: usize, y: usize) -> usize {
        ((field * 2 + component) * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, field: usize, x: usize, y: usize) -> (f32, f32) {
        (
            self.values[self.index(field, 0, x, y)],
            self.values[self.index(field, 1, x, y)],
        )
    }

    #[inline]
    pub fn set(&mut self, field: usize, x: usize, y: usize, v: (f32, f32)) {
        let i = self.index(field, 0, x, y);
        self.values[i] = v.0;
        let j = self.index(field, 1, x, y);
        self.values[j] = v.1;
    }

    /// Grid cells and weights of a bilinear lookup at `at`, clamped to the grid.
    fn corners(&self, at: &Pixel2) -> [(usize, usize, f64); 4] {
        let x = at.u.clamp(0.0, (self.width - 1) as f64);
        let y = at.v.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (x1, y1) = ((x0 + 1).min(self.width - 1), (y0 + 1).min(self.height - 1));
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x1, y0, fx * (1.0 - fy)),
            (x0, y1, (1.0 - fx) * fy),
            (x1, y1, fx * fy),
        ]
    }

    /// Bilinear interpolation at a sub-pixel grid location, clamped to the grid.
    pub fn sample(&self, field: usize, at: &Pixel2) -> (f64, f64) {
        if self.width == 0 || self.height == 0 {
            return (0.0, 0.0);
        }
        let mut out = (0.0, 0.0);
        for (xi, yi, w) in self.corners(at) {
            let (ax, ay) = self.get(field, xi, yi);
            out.0 += w * ax as f64;
            out.1 += w * ay as f64;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakDetection {
    pub map_index: usize,
    /// Sub-pixel location in map-grid coordinates.
    pub position: Pixel2,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectInstanceDetection {
    pub centroid: PeakDetection,
    /// Slot `i` holds the detection of cuboid vertex `i`, if one was assigned.
    pub vertices: Vec<Option<PeakDetection>>,
}

impl ObjectInstanceDetection {
    pub fn assigned(&self) -> usize {
        self.vertices.iter().filter(|v| v.is_some()).count()
    }
}

/// Offset of the maximum of the parabola through `(−1, l)`, `(0, c)`, `(1, r)`
/// taken on log-confidence; exact for Gaussian blobs.
fn log_parabola_offset(l: f32, c: f32, r: f32) -> f64 {
    let floor = f64::MIN_POSITIVE;
    let (l, c, r) = (
        (l as f64).max(floor).ln(),
        (c as f64).max(floor).ln(),
        (r as f64).max(floor).ln(),
    );
    let denom = l - 2.0 * c + r;
    if denom >= 0.0 {
        return 0.0;
    }
    (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
}

/// Strict 8-neighborhood local maxima at or above `threshold`, refined to
/// sub-pixel precision and sorted by descending confidence.
///
/// Refinement fits a parabola to the log-confidence of the peak cell and its
/// two neighbors along each axis of the 3x3 neighborhood; cells on the grid
/// border keep their integer coordinate along the clipped axis.
pub fn extract_peaks(stack: &BeliefMapStack, threshold: f64) -> Vec<PeakDetection> {
    let (w, h) = (stack.width, stack.height);
    let mut peaks = Vec::new();
    for map in 0..stack.n {
        let grid = stack.map(map);
        let at = |x: usize, y: usize| grid[y * w + x];
        for y in 0..h {
            for x in 0..w {
                let v = at(x, y);
                if (v as f64) < threshold || v <= 0.0 {
                    continue;
                }
                let mut is_max = true;
                'nb: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        if at(nx as usize, ny as usize) >= v {
                            is_max = false;
                            break 'nb;
                        }
                    }
                }
                if !is_max {
                    continue;
                }
                let ox = if x > 0 && x + 1 < w {
                    log_parabola_offset(at(x - 1, y), v, at(x + 1, y))
                } else {
                    0.0
                };
                let oy = if y > 0 && y + 1 < h {
                    log_parabola_offset(at(x, y - 1), v, at(x, y + 1))
                } else {
                    0.0
                };
                peaks.push(PeakDetection {
                    map_index: map,
                    position: Pixel2::new(x as f64 + ox, y as f64 + oy),
                    confidence: v as f64,
                });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.map_index.cmp(&b.map_index))
            .then(a.position.v.total_cmp(&b.position.v))
            .then(a.position.u.total_cmp(&b.position.u))
    });
    peaks
}

fn angle_between(a: (f64, f64), b: (f64, f64)) -> f64 {
    let cross = a.0 * b.1 - a.1 * b.0;
    let dot = a.0 * b.0 + a.1 * b.1;
    cross.abs().atan2(dot)
}

/// Angle between the field sampled at `at` and the direction to `centroid`
/// interpolated with the same weights, each corner cell contributing its own
/// direction. Close to a centroid the field turns quickly from cell to
/// cell, and comparing the sample against the direction from `at` alone
/// would then favor a more distant centroid lying almost on the same line.
fn affinity_disagreement(affinity: &AffinityFieldStack, field: usize, at: &Pixel2, centroid: &Pixel2) -> Option<f64> {
    let mut sampled = (0.0, 0.0);
    let mut expected = (0.0, 0.0);
    for (x, y, w) in affinity.corners(at) {
        let (ax, ay) = affinity.get(field, x, y);
        let d = (centroid.u - x as f64, centroid.v - y as f64);
        let n = d.0.hypot(d.1);
        if (ax == 0.0 && ay == 0.0) || n < 1e-9 {
            continue;
        }
        sampled.0 += w * ax as f64;
        sampled.1 += w * ay as f64;
        expected.0 += w * d.0 / n;
        expected.1 += w * d.1 / n;
    }
    if sampled.0.hypot(sampled.1) < 1e-6 || expected.0.hypot(expected.1) < 1e-9 {
        return None;
    }
    Some(angle_between(sampled, expected))
}

/// Groups vertex peaks into object instances, one per centroid peak.
///
/// The centroid map is the last map (index `affinity.len()`). A vertex peak
/// joins the centroid whose direction best agrees with the affinity field
/// around the peak, if the disagreement is at most `max_angle`. Vertices are placed greedily by descending confidence, each
/// instance holding at most one peak per vertex map.
pub fn associate_vertices(
    peaks: &[PeakDetection],
    affinity: &AffinityFieldStack,
    max_angle: f64,
) -> Vec<ObjectInstanceDetection> {
    let centroid_map = affinity.m;
    let mut centroids: Vec<PeakDetection> = peaks.iter().filter(|p| p.map_index == centroid_map).copied().collect();
    centroids.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.position.v.total_cmp(&b.position.v))
            .then(a.position.u.total_cmp(&b.position.u))
    });
    let mut instances: Vec<ObjectInstanceDetection> = centroids
        .iter()
        .map(|c| ObjectInstanceDetection {
            centroid: *c,
            vertices: vec![None; centroid_map],
        })
        .collect();
    if instances.is_empty() {
        return instances;
    }

    // (vertex, candidate centroids sorted by angle)
    let mut candidates: Vec<(PeakDetection, Vec<(f64, usize)>)> = peaks
        .iter()
        .filter(|p| p.map_index < centroid_map)
        .map(|v| {
            let mut options: Vec<(f64, usize)> = centroids
                .iter()
                .enumerate()
                .filter_map(|(ci, c)| {
                    let ang = affinity_disagreement(affinity, v.map_index, &v.position, &c.position)?;
                    (ang <= max_angle).then_some((ang, ci))
                })
                .collect();
            options.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            (*v, options)
        })
        .collect();

    candidates.sort_by(|(a, ao), (b, bo)| {
        let best = |o: &Vec<(f64, usize)>| o.first().map_or(f64::INFINITY, |x| x.0);
        b.confidence
            .total_cmp(&a.confidence)
            .then(best(ao).total_cmp(&best(bo)))
            .then(a.map_index.cmp(&b.map_index))
            .then(a.position.v.total_cmp(&b.position.v))
            .then(a.position.u.total_cmp(&b.position.u))
    });

    for (vertex, options) in candidates {
        for (_, ci) in options {
            let slot = &mut instances[ci].vertices[vertex.map_index];
            if slot.is_none() {
                *slot = Some(vertex);
                break;
            }
        }
    }
    instances
}

/// 2D-3D pairs for PnP from one decoded instance, vertices first and the
/// centroid last. Map coordinates are multiplied by `map_to_image_scale`;
/// the detection confidence becomes the correspondence weight.
pub fn instance_correspondences(
    instance: &ObjectInstanceDetection,
    model: &ObjectModel,
    map_to_image_scale: f64,
) -> Vec<Correspondence> {
    instance_correspondences_with(instance, model, map_to_image_scale, true)
}

pub fn instance_correspondences_with(
    instance: &ObjectInstanceDetection,
    model: &ObjectModel,
    map_to_image_scale: f64,
    include_centroid: bool,
) -> Vec<Correspondence> {
    let keypoints = model.keypoints();
    let mut out: Vec<Correspondence> = instance
        .vertices
        .iter()
        .enumerate()
        .filter_map(|(i, v)| {
            let v = v.as_ref()?;
            let p = keypoints.get(i)?;
            Some(Correspondence::weighted(
                *p,
                v.position.scaled(map_to_image_scale),
                v.confidence,
            ))
        })
        .collect();
    if include_centroid {
        out.push(Correspondence::weighted(
            keypoints[crate::sim::CENTROID_INDEX],
            instance.centroid.position.scaled(map_to_image_scale),
            instance.centroid.confidence,
        ));
    }
    out
}
