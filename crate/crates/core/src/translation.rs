//! Translation estimation by 3D phase correlation of voxel grids.
//!
//! Sign convention: for a reference grid `f` and a target grid `g`, the
//! returned `grad_t` is the translation that moves the target onto the
//! reference. If `g(x) = f(x - s)` then `grad_t = -s * r`.

use std::sync::Arc;

use nalgebra::Vector3;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::voxel::{GridSpec, VoxelGrid};

/// Entries of `|F conj(G)|` below this are treated as empty frequencies.
pub const SPECTRUM_GUARD: f64 = 1e-12;

/// Fourier coefficients of a voxel grid, laid out like the grid itself.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVolume {
    spec: GridSpec,
    data: Vec<Complex64>,
}

impl SpectralVolume {
    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn get(&self, idx: [usize; 3]) -> Complex64 {
        self.data[self.spec.linear(idx)]
    }

    /// DC coefficient.
    pub fn dc(&self) -> Complex64 {
        self.data[0]
    }
}

/// Reusable 3D transform plans for one set of dimensions. Immutable after
/// creation, so it can be shared across threads.
#[derive(Clone)]
pub struct Fft3 {
    dims: [usize; 3],
    forward: [Arc<dyn Fft<f64>>; 3],
    inverse: [Arc<dyn Fft<f64>>; 3],
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("dims", &self.dims).finish()
    }
}

impl Fft3 {
    pub fn new(dims: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = dims.map(|d| planner.plan_fft_forward(d));
        let inverse = dims.map(|d| planner.plan_fft_inverse(d));
        Self {
            dims,
            forward,
            inverse,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Unnormalized forward transform, `sum f(x) exp(-i 2 pi u.x / dims)`.
    pub fn forward(&self, grid: &VoxelGrid) -> SpectralVolume {
        assert_eq!(grid.spec().dims(), self.dims, "plan built for other dimensions");
        let mut data: Vec<Complex64> = grid.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        SpectralVolume {
            spec: *grid.spec(),
            data,
        }
    }

    /// Inverse transform including the `1 / (M N L)` factor.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [m, n, l] = self.dims;
        // axis 2 is contiguous
        plans[2].process(data);
        // axis 1: per slab, gather columns
        let mut line = vec![Complex64::default(); n.max(m)];
        let mut scratch = vec![Complex64::default(); plans[0].get_inplace_scratch_len().max(plans[1].get_inplace_scratch_len())];
        for i in 0..m {
            for k in 0..l {
                for j in 0..n {
                    line[j] = data[(i * n + j) * l + k];
                }
                plans[1].process_with_scratch(&mut line[..n], &mut scratch);
                for j in 0..n {
                    data[(i * n + j) * l + k] = line[j];
                }
            }
        }
        // axis 0
        for j in 0..n {
            for k in 0..l {
                for i in 0..m {
                    line[i] = data[(i * n + j) * l + k];
                }
                plans[0].process_with_scratch(&mut line[..m], &mut scratch);
                for i in 0..m {
                    data[(i * n + j) * l + k] = line[i];
                }
            }
        }
    }
}

/// Forward 3D DFT of a grid.
pub fn dft3(grid: &VoxelGrid) -> SpectralVolume {
    Fft3::new(grid.spec().dims()).forward(grid)
}

/// Result of one phase correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationEstimate {
    /// Translation in meters that moves the target onto the reference.
    pub grad_t: Vector3<f64>,
    /// Height of the correlation peak (1 for an exact cyclic shift).
    pub peak_value: f64,
    pub peak_index: [usize; 3],
}

/// Options for [`phase_correlate_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PeakOptions {
    /// 3-point parabolic refinement around the integer peak.
    pub subvoxel: bool,
}

pub fn phase_correlate(reference: &SpectralVolume, target: &SpectralVolume) -> Result<TranslationEstimate> {
    let fft = Fft3::new(reference.spec.dims());
    phase_correlate_with(&fft, reference, target, PeakOptions::default())
}

pub fn phase_correlate_with(
    fft: &Fft3,
    reference: &SpectralVolume,
    target: &SpectralVolume,
    options: PeakOptions,
) -> Result<TranslationEstimate> {
    if reference.spec != target.spec {
        return Err(Error::Validation("phase correlation needs identical grid specs".into()));
    }
    let mut any = false;
    let mut cross: Vec<Complex64> = reference
        .data
        .iter()
        .zip(&target.data)
        .map(|(f, g)| {
            let c = f * g.conj();
            let mag = c.norm();
            if mag < SPECTRUM_GUARD {
                Complex64::default()
            } else {
                any = true;
                c / mag
            }
        })
        .collect();
    if !any {
        return Err(Error::Empty("phase correlation of empty grids".into()));
    }
    fft.inverse_in_place(&mut cross);

    let (best, peak_value) = cross
        .iter()
        .enumerate()
        .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, c)| {
            if c.re > bv {
                (i, c.re)
            } else {
                (bi, bv)
            }
        });
    let dims = reference.spec.dims();
    let peak_index = [
        best / (dims[1] * dims[2]),
        (best / dims[2]) % dims[1],
        best % dims[2],
    ];
    let r = reference.spec.resolution();
    let mut grad_t = Vector3::zeros();
    for axis in 0..3 {
        let mut cells = decode_wrapped(peak_index[axis], dims[axis]) as f64;
        if options.subvoxel {
            cells += parabolic_offset(&cross, reference.spec(), peak_index, axis);
        }
        grad_t[axis] = cells * r;
    }
    Ok(TranslationEstimate {
        grad_t,
        peak_value,
        peak_index,
    })
}

/// Circular index to signed shift: indices above `dim / 2` are negative.
pub fn decode_wrapped(index: usize, dim: usize) -> i64 {
    if index > dim / 2 {
        index as i64 - dim as i64
    } else {
        index as i64
    }
}

fn parabolic_offset(values: &[Complex64], spec: &GridSpec, peak: [usize; 3], axis: usize) -> f64 {
    let dim = spec.dims()[axis];
    if dim < 3 {
        return 0.0;
    }
    let at = |offset: i64| {
        let mut idx = peak;
        idx[axis] = (peak[axis] as i64 + offset).rem_euclid(dim as i64) as usize;
        values[spec.linear(idx)].re
    };
    let (ym, y0, yp) = (at(-1), at(0), at(1));
    let denom = ym - 2.0 * y0 + yp;
    if denom.abs() < 1e-15 {
        return 0.0;
    }
    (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
}

/// `1/2 sum_x (g(x) - f(x + T))^2`, with `f` shifted by the nearest whole
/// number of cells and zero outside the box.
pub fn translation_cost(f: &VoxelGrid, g: &VoxelGrid, t: &Vector3<f64>) -> Result<f64> {
    if f.spec() != g.spec() {
        return Err(Error::Validation("translation cost needs identical grid specs".into()));
    }
    let r = f.spec().resolution();
    let shift = [
        -(t.x / r).round() as i64,
        -(t.y / r).round() as i64,
        -(t.z / r).round() as i64,
    ];
    let moved = if shift == [0, 0, 0] {
        f.clone()
    } else {
        f.shifted(shift)
    };
    Ok(0.5
        * moved
            .values()
            .iter()
            .zip(g.values())
            .map(|(a, b)| (b - a) * (b - a))
            .sum::<f64>())
}
