//! Point clouds with per-point unit normals, and the ASCII cloud format.
//!
//! One record per line, `x y z nx ny nz`, single-space separated, `#` starts
//! a comment line. Numbers are written with Rust's shortest round-trip float
//! formatting so save/load is lossless.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Allowed deviation of a normal's length from 1.
pub const NORMAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    normals: Vec<Vector3<f64>>,
}

impl PointCloud {
    /// Builds a cloud, checking lengths and that every normal is unit length.
    pub fn new(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::Validation(format!(
                "{} points but {} normals",
                points.len(),
                normals.len()
            )));
        }
        if let Some((i, n)) = normals
            .iter()
            .enumerate()
            .find(|(_, n)| (n.norm() - 1.0).abs() > NORMAL_TOL)
        {
            return Err(Error::Validation(format!(
                "normal {i} has length {}",
                n.norm()
            )));
        }
        Ok(Self { points, normals })
    }

    /// Builds a cloud, rescaling every normal to unit length.
    pub fn new_renormalized(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        let mut fixed = Vec::with_capacity(normals.len());
        for (i, n) in normals.into_iter().enumerate() {
            let len = n.norm();
            if len == 0.0 || !len.is_finite() {
                return Err(Error::Validation(format!("normal {i} cannot be normalized")));
            }
            fixed.push(n / len);
        }
        Self::new(points, fixed)
    }

    pub(crate) fn from_parts_unchecked(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Self {
        debug_assert_eq!(points.len(), normals.len());
        Self { points, normals }
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> &[Vector3<f64>] {
        &self.normals
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vector3<f64>, &Vector3<f64>)> {
        self.points.iter().zip(self.normals.iter())
    }

    /// Errors on an empty cloud; estimation operations need at least one point.
    pub fn ensure_nonempty(&self, what: &str) -> Result<()> {
        if self.is_empty() {
            Err(Error::Empty(format!("{what} cloud has no points")))
        } else {
            Ok(())
        }
    }

    pub fn centroid(&self) -> Vector3<f64> {
        if self.points.is_empty() {
            return Vector3::zeros();
        }
        self.points.iter().sum::<Vector3<f64>>() / self.points.len() as f64
    }

    /// Axis-aligned bounds `(min, max)`, or `None` when empty.
    pub fn bounds(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = self.points.first()?;
        Some(self.points.iter().fold((*first, *first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }

    /// Concatenation of two clouds.
    pub fn merged(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        let mut normals = self.normals.clone();
        points.extend_from_slice(&other.points);
        normals.extend_from_slice(&other.normals);
        PointCloud { points, normals }
    }

    /// Keeps the records for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&Vector3<f64>, &Vector3<f64>) -> bool) -> PointCloud {
        let (points, normals) = self
            .iter()
            .filter(|(p, n)| keep(p, n))
            .map(|(p, n)| (*p, *n))
            .unzip();
        PointCloud { points, normals }
    }

    /// `p -> R (p - center) + center + T`, `n -> R n`.
    pub fn transformed(&self, h: &RigidTransform, center: &Vector3<f64>) -> PointCloud {
        let points = self.points.iter().map(|p| h.apply_point(p, center)).collect();
        let normals = if h.rotation == Matrix3::identity() {
            self.normals.clone()
        } else {
            self.normals.iter().map(|n| (h.rotation * n).normalize()).collect()
        };
        PointCloud { points, normals }
    }

    /// Inverse of [`PointCloud::transformed`] for the same `h` and center.
    pub fn inverse_transformed(&self, h: &RigidTransform, center: &Vector3<f64>) -> PointCloud {
        let rt = h.rotation.transpose();
        let points = self
            .points
            .iter()
            .map(|p| h.apply_inverse_point(p, center))
            .collect();
        let normals = self.normals.iter().map(|n| (rt * n).normalize()).collect();
        PointCloud { points, normals }
    }
}

/// Applies `h` about `center`. The identity leaves the cloud bit-for-bit unchanged.
pub fn apply_transform(cloud: &PointCloud, h: &RigidTransform, center: &Vector3<f64>) -> PointCloud {
    if *h == RigidTransform::identity() {
        return cloud.clone();
    }
    cloud.transformed(h, center)
}

pub fn parse_cloud(text: &str, origin: &Path, renormalize: bool) -> Result<PointCloud> {
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                message: format!("expected 6 fields, found {}", fields.len()),
            });
        }
        let mut v = [0.0f64; 6];
        for (slot, field) in v.iter_mut().zip(&fields) {
            *slot = field.parse::<f64>().map_err(|e| Error::Parse {
                path: origin.to_path_buf(),
                line: line_no,
                message: format!("bad number {field:?}: {e}"),
            })?;
            if !slot.is_finite() {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line: line_no,
                    message: format!("non-finite value {field:?}"),
                });
            }
        }
        let n = Vector3::new(v[3], v[4], v[5]);
        if !renormalize && (n.norm() - 1.0).abs() > NORMAL_TOL {
            return Err(Error::Validation(format!(
                "{}:{line_no}: normal has length {} (use renormalize to accept)",
                origin.display(),
                n.norm()
            )));
        }
        points.push(Vector3::new(v[0], v[1], v[2]));
        normals.push(n);
    }
    if renormalize {
        PointCloud::new_renormalized(points, normals)
    } else {
        PointCloud::new(points, normals)
    }
}

pub fn load_cloud(path: impl AsRef<Path>, renormalize: bool) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cloud(&text, path, renormalize)
}

pub fn format_cloud(cloud: &PointCloud) -> String {
    let mut out = String::with_capacity(cloud.len() * 64);
    for (p, n) in cloud.iter() {
        let _ = writeln!(out, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z);
    }
    out
}

pub fn save_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_cloud(cloud)).map_err(|e| Error::io(path, e))
}
