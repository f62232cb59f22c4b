//! Occupancy grids on a lattice shared by the clouds being compared.

use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Default voxel edge length, 8 mm.
pub const DEFAULT_RESOLUTION: f64 = 0.008;
/// Default lattice size per axis.
pub const DEFAULT_DIM: usize = 64;

/// Lattice geometry: cell `(i, j, k)` covers `origin + r * [i, i+1) x ...`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    resolution: f64,
    origin: Vector3<f64>,
    dims: [usize; 3],
}

impl GridSpec {
    pub fn new(resolution: f64, origin: Vector3<f64>, dims: [usize; 3]) -> Result<Self> {
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Validation(format!("grid resolution must be > 0, got {resolution}")));
        }
        if let Some(d) = dims.iter().find(|d| !d.is_power_of_two()) {
            return Err(Error::Validation(format!("grid dimension {d} is not a power of two")));
        }
        Ok(Self {
            resolution,
            origin,
            dims,
        })
    }

    /// Grid whose box is centered on `center`.
    pub fn centered(center: &Vector3<f64>, resolution: f64, dims: [usize; 3]) -> Result<Self> {
        let half = Vector3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) * (resolution / 2.0);
        Self::new(resolution, center - half, dims)
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> Vector3<f64> {
        self.origin
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Upper corner of the box (exclusive).
    pub fn upper(&self) -> Vector3<f64> {
        self.origin
            + Vector3::new(self.dims[0] as f64, self.dims[1] as f64, self.dims[2] as f64) * self.resolution
    }

    #[inline]
    pub fn linear(&self, idx: [usize; 3]) -> usize {
        (idx[0] * self.dims[1] + idx[1]) * self.dims[2] + idx[2]
    }

    pub fn contains_cloud(&self, cloud: &PointCloud) -> bool {
        cloud.points().iter().all(|p| voxel_index(p, self).is_ok())
    }
}

/// `floor((p - origin) / r)` per axis.
pub fn voxel_index(p: &Vector3<f64>, spec: &GridSpec) -> Result<[usize; 3]> {
    let mut idx = [0usize; 3];
    for axis in 0..3 {
        let rel = (p[axis] - spec.origin[axis]) / spec.resolution;
        let cell = rel.floor();
        if !(cell >= 0.0 && cell < spec.dims[axis] as f64) {
            return Err(Error::OutOfGrid {
                axis: ['x', 'y', 'z'][axis],
                value: p[axis],
                lower: spec.origin[axis],
                upper: spec.origin[axis] + spec.dims[axis] as f64 * spec.resolution,
            });
        }
        idx[axis] = cell as usize;
    }
    Ok(idx)
}

/// How points are accumulated into a cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Occupancy {
    /// 1 if any point falls in the cell, else 0.
    #[default]
    Binary,
    /// Number of points in the cell.
    Count,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    spec: GridSpec,
    values: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(spec: GridSpec) -> Self {
        Self {
            spec,
            values: vec![0.0; spec.cell_count()],
        }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.cell_count() {
            return Err(Error::Validation(format!(
                "expected {} grid values, got {}",
                spec.cell_count(),
                values.len()
            )));
        }
        Ok(Self { spec, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, idx: [usize; 3]) -> f64 {
        self.values[self.spec.linear(idx)]
    }

    pub fn set(&mut self, idx: [usize; 3], v: f64) {
        let i = self.spec.linear(idx);
        self.values[i] = v;
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn nonzero_count(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    /// `out[x] = self[x - shift]`, cells shifted in from outside are zero.
    pub fn shifted(&self, shift: [i64; 3]) -> VoxelGrid {
        let [m, n, l] = self.spec.dims;
        let mut out = VoxelGrid::zeros(self.spec);
        for i in 0..m {
            let si = i as i64 - shift[0];
            if si < 0 || si >= m as i64 {
                continue;
            }
            for j in 0..n {
                let sj = j as i64 - shift[1];
                if sj < 0 || sj >= n as i64 {
                    continue;
                }
                for k in 0..l {
                    let sk = k as i64 - shift[2];
                    if sk < 0 || sk >= l as i64 {
                        continue;
                    }
                    out.values[self.spec.linear([i, j, k])] =
                        self.values[self.spec.linear([si as usize, sj as usize, sk as usize])];
                }
            }
        }
        out
    }

    /// `out[x] = self[(x - shift) mod dims]`.
    pub fn circular_shifted(&self, shift: [i64; 3]) -> VoxelGrid {
        let dims = self.spec.dims;
        let mut out = VoxelGrid::zeros(self.spec);
        for i in 0..dims[0] {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    let src = [
                        (i as i64 - shift[0]).rem_euclid(dims[0] as i64) as usize,
                        (j as i64 - shift[1]).rem_euclid(dims[1] as i64) as usize,
                        (k as i64 - shift[2]).rem_euclid(dims[2] as i64) as usize,
                    ];
                    out.values[self.spec.linear([i, j, k])] = self.values[self.spec.linear(src)];
                }
            }
        }
        out
    }

    /// Text dump: `M N L r ox oy oz`, then `i j k value` per nonzero cell.
    pub fn dump(&self) -> String {
        let s = &self.spec;
        let mut out = format!(
            "{} {} {} {} {} {} {}\n",
            s.dims[0], s.dims[1], s.dims[2], s.resolution, s.origin.x, s.origin.y, s.origin.z
        );
        for i in 0..s.dims[0] {
            for j in 0..s.dims[1] {
                for k in 0..s.dims[2] {
                    let v = self.get([i, j, k]);
                    if v != 0.0 {
                        let _ = writeln!(out, "{i} {j} {k} {v}");
                    }
                }
            }
        }
        out
    }
}

pub fn voxelize(cloud: &PointCloud, spec: &GridSpec) -> Result<VoxelGrid> {
    voxelize_with(cloud, spec, Occupancy::Binary)
}

pub fn voxelize_with(cloud: &PointCloud, spec: &GridSpec, mode: Occupancy) -> Result<VoxelGrid> {
    let mut grid = VoxelGrid::zeros(*spec);
    for p in cloud.points() {
        let i = spec.linear(voxel_index(p, spec)?);
        match mode {
            Occupancy::Binary => grid.values[i] = 1.0,
            Occupancy::Count => grid.values[i] += 1.0,
        }
    }
    Ok(grid)
}
