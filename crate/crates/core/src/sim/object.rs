use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};

/// Index of the centroid among an object's keypoints.
pub const CENTROID_INDEX: usize = 8;
pub const OBJECT_KEYPOINTS: usize = 9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    #[default]
    Cuboid,
    Cylinder,
}

/// Known object described by its bounding cuboid.
///
/// `dimensions` are the full extents along the object's x, y and z axes in
/// meters; z is up when the object stands upright.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectModel {
    pub name: String,
    pub dimensions: [f64; 3],
    #[serde(default)]
    pub shape: ShapeKind,
}

impl ObjectModel {
    pub fn new(name: impl Into<String>, dimensions: [f64; 3]) -> Self {
        Self {
            name: name.into(),
            dimensions,
            shape: ShapeKind::Cuboid,
        }
    }

    pub fn with_shape(mut self, shape: ShapeKind) -> Self {
        self.shape = shape;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimensions.iter().all(|d| d.is_finite() && *d > 0.0) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "object '{}' needs positive dimensions, got {:?}",
                self.name, self.dimensions
            )))
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }

    pub fn half_extents(&self) -> Vec3 {
        Vec3::new(
            0.5 * self.dimensions[0],
            0.5 * self.dimensions[1],
            0.5 * self.dimensions[2],
        )
    }

    pub fn largest_dimension(&self) -> f64 {
        self.dimensions.iter().cloned().fold(0.0, f64::max)
    }

    /// Cuboid corners followed by the centroid. Corner `i` takes the
    /// positive half-extent on x when bit 2 of `i` is set, on y for bit 1
    /// and on z for bit 0.
    pub fn keypoints(&self) -> [Point3; OBJECT_KEYPOINTS] {
        let h = self.half_extents();
        let mut out = [Point3::zeros(); OBJECT_KEYPOINTS];
        for (i, p) in out.iter_mut().enumerate().take(8) {
            let s = |bit: usize| if i & (1 << bit) != 0 { 1.0 } else { -1.0 };
            *p = Point3::new(s(2) * h.x, s(1) * h.y, s(0) * h.z);
        }
        out
    }
}

/// Built-in objects. The YCB entries use their published bounding boxes;
/// the toy grocery entries keep the published largest dimension, with the
/// other two extents approximated.
pub fn catalog() -> Vec<ObjectModel> {
    use ShapeKind::*;
    let entries: [(&str, [f64; 3], ShapeKind); 12] = [
        ("sugar_box", [0.089, 0.038, 0.175], Cuboid),
        ("cracker_box", [0.158, 0.060, 0.210], Cuboid),
        ("soup_can", [0.066, 0.066, 0.101], Cylinder),
        ("meat_can", [0.097, 0.050, 0.082], Cuboid),
        ("mustard", [0.095, 0.058, 0.190], Cuboid),
        ("butter", [0.053, 0.035, 0.103], Cuboid),
        ("popcorn", [0.085, 0.035, 0.126], Cuboid),
        ("cookies", [0.110, 0.045, 0.167], Cuboid),
        ("spaghetti", [0.060, 0.025, 0.250], Cuboid),
        ("tomato_sauce", [0.052, 0.052, 0.070], Cylinder),
        ("parmesan", [0.050, 0.050, 0.103], Cylinder),
        ("milk", [0.060, 0.060, 0.190], Cylinder),
    ];
    entries
        .iter()
        .map(|(n, d, s)| ObjectModel::new(*n, *d).with_shape(*s))
        .collect()
}

pub fn catalog_object(name: &str) -> Option<ObjectModel> {
    catalog().into_iter().find(|m| m.name == name)
}
