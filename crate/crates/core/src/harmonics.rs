//! Real spherical harmonics on the equiangular sphere grid.
//!
//! Complex harmonics `Y_l^m` carry the Condon-Shortley phase and are
//! orthonormal on the sphere. The real basis is `S^l = T^l Y^l` with the
//! unitary change of basis
//!
//! ```text
//! m < 0:  S_lm = i/sqrt2 (Y_l^m - (-1)^m Y_l^-m)   = sqrt2 (-1)^m Im Y_l^|m|
//! m = 0:  S_l0 = Y_l^0
//! m > 0:  S_lm = 1/sqrt2 (Y_l^-m + (-1)^m Y_l^m)   = sqrt2 (-1)^m Re Y_l^m
//! ```
//!
//! Within a degree, entry `m` lives at index `m + l`.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::egi::{Egi, SphereGrid};
use crate::error::{Error, Result};

/// Largest degree supported by the Wigner recursion.
pub const MAX_DEGREE: usize = 31;

/// Offset of degree `l` in a flattened `(l, m)` coefficient array.
#[inline]
pub fn degree_offset(l: usize) -> usize {
    l * l
}

/// Number of coefficients for degrees `0..=l_max`.
#[inline]
pub fn coefficient_count(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

/// Real SH coefficients `F^l in R^(2l+1)` for `l = 0..=l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoefficients {
    l_max: usize,
    data: Vec<f64>,
}

impl ShCoefficients {
    pub fn zeros(l_max: usize) -> Self {
        Self {
            l_max,
            data: vec![0.0; coefficient_count(l_max)],
        }
    }

    pub fn from_vec(l_max: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != coefficient_count(l_max) {
            return Err(Error::Validation(format!(
                "expected {} coefficients for l_max {l_max}, got {}",
                coefficient_count(l_max),
                data.len()
            )));
        }
        Ok(Self { l_max, data })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn degree(&self, l: usize) -> &[f64] {
        &self.data[degree_offset(l)..degree_offset(l + 1)]
    }

    pub fn degree_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.data[degree_offset(l)..degree_offset(l + 1)]
    }

    /// Coefficient of `S_lm`.
    pub fn get(&self, l: usize, m: i64) -> f64 {
        self.data[degree_offset(l) + (m + l as i64) as usize]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            l_max: self.l_max,
            data: self.data.iter().map(|v| v * factor).collect(),
        }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// One `l m value` line per coefficient.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for l in 0..=self.l_max {
            for (i, v) in self.degree(l).iter().enumerate() {
                let _ = writeln!(out, "{l} {} {v}", i as i64 - l as i64);
            }
        }
        out
    }
}

/// Orthonormal associated Legendre values `N_lm P_l^m(cos theta)` without the
/// Condon-Shortley phase, for `0 <= m <= l <= l_max`, at index `l(l+1)/2 + m`.
pub fn normalized_legendre(l_max: usize, theta: f64) -> Vec<f64> {
    let (s, x) = theta.sin_cos();
    let idx = |l: usize, m: usize| l * (l + 1) / 2 + m;
    let mut out = vec![0.0; (l_max + 1) * (l_max + 2) / 2];
    out[0] = 0.5 / PI.sqrt();
    for m in 1..=l_max {
        out[idx(m, m)] = ((2 * m + 1) as f64 / (2 * m) as f64).sqrt() * s * out[idx(m - 1, m - 1)];
    }
    for m in 0..l_max {
        out[idx(m + 1, m)] = ((2 * m + 3) as f64).sqrt() * x * out[idx(m, m)];
    }
    for m in 0..=l_max {
        for l in (m + 2)..=l_max {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            out[idx(l, m)] = a * (x * out[idx(l - 1, m)] - b * out[idx(l - 2, m)]);
        }
    }
    out
}

/// Real harmonics `S_lm(theta, phi)` for all `l <= l_max`, flattened.
pub fn real_sh(l_max: usize, theta: f64, phi: f64) -> Vec<f64> {
    let leg = normalized_legendre(l_max, theta);
    let mut out = vec![0.0; coefficient_count(l_max)];
    let sqrt2 = 2f64.sqrt();
    for l in 0..=l_max {
        let base = degree_offset(l) + l;
        let lrow = l * (l + 1) / 2;
        out[base] = leg[lrow];
        for m in 1..=l {
            let (sm, cm) = (m as f64 * phi).sin_cos();
            let p = leg[lrow + m] * sqrt2;
            out[base + m] = p * cm;
            out[base - m] = p * sm;
        }
    }
    out
}

/// Complex harmonics `Y_l^m(theta, phi)` (Condon-Shortley) for one degree,
/// index `m + l`.
pub fn complex_sh_degree(l: usize, theta: f64, phi: f64) -> Vec<Complex64> {
    let leg = normalized_legendre(l, theta);
    let lrow = l * (l + 1) / 2;
    let mut out = vec![Complex64::default(); 2 * l + 1];
    for m in 0..=l {
        let v = leg[lrow + m];
        let e = Complex64::from_polar(1.0, m as f64 * phi);
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        out[l + m] = e * (v * sign);
        // Y_l^-m = (-1)^m conj(Y_l^m)
        out[l - m] = e.conj() * v;
    }
    out
}

/// The unitary `T^l` with `S^l = T^l Y^l`.
pub fn real_basis_change(l: usize) -> DMatrix<Complex64> {
    let n = 2 * l + 1;
    let mut t = DMatrix::from_element(n, n, Complex64::default());
    let inv = 1.0 / 2f64.sqrt();
    t[(l, l)] = Complex64::new(1.0, 0.0);
    for m in 1..=l {
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        // row +m
        t[(l + m, l - m)] = Complex64::new(inv, 0.0);
        t[(l + m, l + m)] = Complex64::new(sign * inv, 0.0);
        // row -m, with (-1)^(-m) = (-1)^m
        t[(l - m, l - m)] = Complex64::new(0.0, inv);
        t[(l - m, l + m)] = Complex64::new(0.0, -sign * inv);
    }
    t
}

/// Driscoll-Healy latitude weights for `theta_j = pi (2j+1) / 4B`; together
/// with the uniform longitude step they integrate band-limited products
/// exactly.
pub fn quadrature_weights(bandwidth: usize) -> Vec<f64> {
    let b = bandwidth as f64;
    (0..2 * bandwidth)
        .map(|j| {
            let theta = PI * (2 * j + 1) as f64 / (4.0 * b);
            let series: f64 = (0..bandwidth)
                .map(|k| {
                    let odd = (2 * k + 1) as f64;
                    (odd * theta).sin() / odd
                })
                .sum();
            2.0 / b * theta.sin() * series
        })
        .collect()
}

/// Basis evaluations and quadrature for one sphere grid and degree cap.
#[derive(Debug, Clone)]
pub struct RealShBasis {
    grid: SphereGrid,
    l_max: usize,
    /// `(pi / B) w_j`: area element of each node in row `j`.
    node_weights: Vec<f64>,
    /// `values[node * count + (l, m)]`.
    values: Vec<f64>,
    change: Vec<DMatrix<Complex64>>,
}

impl RealShBasis {
    /// Basis with `l_max = B - 1`, the largest degree integrated exactly.
    pub fn new(bandwidth: usize) -> Result<Self> {
        Self::with_l_max(bandwidth, bandwidth.saturating_sub(1))
    }

    pub fn with_l_max(bandwidth: usize, l_max: usize) -> Result<Self> {
        let grid = SphereGrid::new(bandwidth)?;
        if l_max > MAX_DEGREE {
            return Err(Error::Validation(format!(
                "l_max {l_max} exceeds the supported maximum {MAX_DEGREE}"
            )));
        }
        let count = coefficient_count(l_max);
        let side = grid.side();
        let mut values = Vec::with_capacity(grid.node_count() * count);
        for j in 0..side {
            for k in 0..side {
                values.extend(real_sh(l_max, grid.theta(j), grid.phi(k)));
            }
        }
        let step = PI / bandwidth as f64;
        let node_weights = quadrature_weights(bandwidth).into_iter().map(|w| w * step).collect();
        let change = (0..=l_max).map(real_basis_change).collect();
        Ok(Self {
            grid,
            l_max,
            node_weights,
            values,
            change,
        })
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn bandwidth(&self) -> usize {
        self.grid.bandwidth()
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn basis_change(&self, l: usize) -> &DMatrix<Complex64> {
        &self.change[l]
    }

    /// All basis values at node `(j, k)`.
    pub fn node_values(&self, j: usize, k: usize) -> &[f64] {
        let count = coefficient_count(self.l_max);
        let node = self.grid.linear(j, k);
        &self.values[node * count..(node + 1) * count]
    }

    /// Quadrature weight (area element) of a node in row `j`.
    pub fn node_weight(&self, j: usize) -> f64 {
        self.node_weights[j]
    }

    /// Projection of grid samples (row-major, `2B x 2B`) onto the basis.
    pub fn analyze(&self, samples: &[f64]) -> Result<ShCoefficients> {
        if samples.len() != self.grid.node_count() {
            return Err(Error::Validation(format!(
                "expected {} sphere samples, got {}",
                self.grid.node_count(),
                samples.len()
            )));
        }
        let count = coefficient_count(self.l_max);
        let side = self.grid.side();
        let mut acc = vec![0.0; count];
        for j in 0..side {
            let w = self.node_weights[j];
            for k in 0..side {
                let f = samples[self.grid.linear(j, k)];
                if f == 0.0 {
                    continue;
                }
                let scale = w * f;
                for (a, s) in acc.iter_mut().zip(self.node_values(j, k)) {
                    *a += scale * s;
                }
            }
        }
        ShCoefficients::from_vec(self.l_max, acc)
    }

    /// Evaluates `sum_l (F^l)^T S^l` at every grid node.
    pub fn synthesize(&self, coeffs: &ShCoefficients) -> Result<Vec<f64>> {
        if coeffs.l_max() != self.l_max {
            return Err(Error::DegreeMismatch(coeffs.l_max(), self.l_max));
        }
        let side = self.grid.side();
        let mut out = Vec::with_capacity(self.grid.node_count());
        for j in 0..side {
            for k in 0..side {
                out.push(
                    self.node_values(j, k)
                        .iter()
                        .zip(coeffs.as_slice())
                        .map(|(s, c)| s * c)
                        .sum(),
                );
            }
        }
        Ok(out)
    }
}

/// Forward transform of an EGI's counts.
pub fn sh_forward(egi: &Egi, basis: &RealShBasis) -> Result<ShCoefficients> {
    if egi.grid().bandwidth() != basis.bandwidth() {
        return Err(Error::BandwidthMismatch {
            expected: basis.bandwidth(),
            found: egi.grid().bandwidth(),
        });
    }
    basis.analyze(&egi.values())
}
