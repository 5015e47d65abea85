use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::belief::{AffinityFieldStack, BeliefMapStack};
use crate::error::{Error, Result};
use crate::geometry::{project, CameraIntrinsics, Pixel2, RigidTransform};

use super::observe::raw_observations;
use super::{NoiseConfig, ObjectModel, CENTROID_INDEX, OBJECT_KEYPOINTS};

/// Placement of a belief-map grid over the camera image:
/// `image = offset + scale * map`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapGeometry {
    pub width: usize,
    pub height: usize,
    /// Image pixels per map cell.
    pub scale: f64,
    /// Image location of map cell (0, 0).
    pub offset: [f64; 2],
}

impl Default for MapGeometry {
    /// 50x50 object maps over the central 400x400 region of a 640x480 image.
    fn default() -> Self {
        Self {
            width: 50,
            height: 50,
            scale: 8.0,
            offset: [120.0, 40.0],
        }
    }
}

impl MapGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || !(self.scale > 0.0) {
            return Err(Error::config("map geometry needs a non-empty grid and positive scale"));
        }
        if !self.offset.iter().all(|v| v.is_finite()) {
            return Err(Error::config("map offset must be finite"));
        }
        Ok(())
    }

    pub fn image_to_map(&self, px: &Pixel2) -> Pixel2 {
        Pixel2::new(
            (px.u - self.offset[0]) / self.scale,
            (px.v - self.offset[1]) / self.scale,
        )
    }

    pub fn map_to_image(&self, p: &Pixel2) -> Pixel2 {
        Pixel2::new(self.offset[0] + self.scale * p.u, self.offset[1] + self.scale * p.v)
    }

    /// Intrinsics of the image region covered by the grid, in which a map
    /// location maps to `scale * map`. Use with correspondences built from
    /// decoded peaks.
    pub fn crop_intrinsics(&self, k: &CameraIntrinsics) -> CameraIntrinsics {
        k.cropped(
            self.offset[0],
            self.offset[1],
            (self.width as f64 * self.scale).ceil() as u32,
            (self.height as f64 * self.scale).ceil() as u32,
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedStacks {
    /// Nine maps: eight vertices, then the centroid.
    pub beliefs: BeliefMapStack,
    /// Eight vertex-to-centroid fields.
    pub affinities: AffinityFieldStack,
    /// Noise-free keypoint locations in map coordinates, per instance.
    pub truth: Vec<Vec<Option<Pixel2>>>,
}

struct Canvas {
    beliefs: BeliefMapStack,
    affinities: AffinityFieldStack,
    /// Squared distance from each affinity cell to the vertex that set it.
    owner: Vec<f64>,
    sigma: f64,
}

impl Canvas {
    fn window(&self, c: &Pixel2, radius: f64) -> Option<(usize, usize, usize, usize)> {
        let (w, h) = (self.beliefs.width() as f64, self.beliefs.height() as f64);
        let x0 = (c.u - radius).floor().max(0.0);
        let y0 = (c.v - radius).floor().max(0.0);
        let x1 = (c.u + radius).ceil().min(w - 1.0);
        let y1 = (c.v + radius).ceil().min(h - 1.0);
        (x0 <= x1 && y0 <= y1).then_some((x0 as usize, y0 as usize, x1 as usize, y1 as usize))
    }

    fn blob(&mut self, map: usize, c: &Pixel2, amplitude: f64) {
        let s2 = 2.0 * self.sigma * self.sigma;
        let Some((x0, y0, x1, y1)) = self.window(c, 6.0 * self.sigma) else {
            return;
        };
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - c.u).powi(2) + (y as f64 - c.v).powi(2);
                let v = (amplitude * (-d2 / s2).exp()) as f32;
                if v > self.beliefs.get(map, x, y) {
                    self.beliefs.set(map, x, y, v);
                }
            }
        }
    }

    /// Within 3 sigma of `vertex`, point every cell at `target` unless a
    /// nearer vertex already claimed it.
    fn affinity(&mut self, field: usize, vertex: &Pixel2, target: &Pixel2) {
        let r = 3.0 * self.sigma;
        let Some((x0, y0, x1, y1)) = self.window(vertex, r) else {
            return;
        };
        let w = self.affinities.width();
        let plane = w * self.affinities.height();
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d2 = (x as f64 - vertex.u).powi(2) + (y as f64 - vertex.v).powi(2);
                let slot = field * plane + y * w + x;
                if d2 > r * r || d2 >= self.owner[slot] {
                    continue;
                }
                let (dx, dy) = (target.u - x as f64, target.v - y as f64);
                let n = dx.hypot(dy);
                if n < 1e-9 {
                    continue;
                }
                self.owner[slot] = d2;
                self.affinities.set(field, x, y, ((dx / n) as f32, (dy / n) as f32));
            }
        }
    }
}

/// Renders belief and affinity maps for every instance of `model` seen at the
/// given `cam_T_object` poses.
///
/// Keypoints are perturbed and dropped exactly as in
/// [`observe_keypoints`](super::observe_keypoints) (noise is applied in image
/// pixels, then mapped onto the grid). Each surviving keypoint becomes a
/// Gaussian blob of `blob_sigma` grid cells, instances combined by per-cell
/// maximum. Vertex affinity cells point toward the instance's noise-free
/// centroid. Each map then receives a Poisson(`false_positive_rate`) number
/// of spurious blobs at uniform locations with random affinity.
pub fn render_belief_stacks<R: Rng + ?Sized>(
    k: &CameraIntrinsics,
    cam_objects: &[RigidTransform],
    model: &ObjectModel,
    geometry: &MapGeometry,
    noise: &NoiseConfig,
    rng: &mut R,
) -> Result<RenderedStacks> {
    geometry.validate()?;
    noise.validate()?;
    let vertices = OBJECT_KEYPOINTS - 1;
    let (w, h) = (geometry.width, geometry.height);
    let mut canvas = Canvas {
        beliefs: BeliefMapStack::zeros(w, h, OBJECT_KEYPOINTS),
        affinities: AffinityFieldStack::zeros(w, h, vertices),
        owner: vec![f64::INFINITY; w * h * vertices],
        sigma: noise.blob_sigma,
    };
    let keypoints = model.keypoints();
    let mut truth = Vec::with_capacity(cam_objects.len());

    for pose in cam_objects {
        let exact: Vec<Option<Pixel2>> = keypoints
            .iter()
            .map(|p| project(k, pose, p).ok().map(|px| geometry.image_to_map(&px)))
            .collect();
        let noisy = raw_observations(k, pose, &keypoints, noise, rng);
        for (i, obs) in noisy.iter().enumerate() {
            if obs.dropped {
                continue;
            }
            let Some(px) = obs.pixel else { continue };
            let at = geometry.image_to_map(&px);
            canvas.blob(i, &at, 1.0);
            if i != CENTROID_INDEX {
                if let Some(c) = exact[CENTROID_INDEX] {
                    canvas.affinity(i, &at, &c);
                }
            }
        }
        truth.push(exact);
    }

    if noise.false_positive_rate > 0.0 {
        let poisson =
            Poisson::new(noise.false_positive_rate).map_err(|e| Error::config(format!("false_positive_rate: {e}")))?;
        for map in 0..OBJECT_KEYPOINTS {
            let count = poisson.sample(rng) as usize;
            for _ in 0..count {
                let at = Pixel2::new(rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
                let amplitude = rng.random_range(0.2..1.0);
                canvas.blob(map, &at, amplitude);
                let dir: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                if map != CENTROID_INDEX {
                    let target = Pixel2::new(at.u + dir.cos(), at.v + dir.sin());
                    canvas.affinity(map, &at, &target);
                }
            }
        }
    }

    Ok(RenderedStacks {
        beliefs: canvas.beliefs,
        affinities: canvas.affinities,
        truth,
    })
}
