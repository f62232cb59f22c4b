//! Rotation correlation of two spherical functions from their real SH
//! coefficients, its analytic gradient, and the sampled rotation cost.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::egi::{cartesian_to_spherical, Egi, SphereGrid};
use crate::error::{Error, Result};
use crate::harmonics::{RealShBasis, ShCoefficients};
use crate::wigner::{wigner_u, wigner_u_derivative, WignerBlocks};

fn check_degrees(f: &ShCoefficients, g: &ShCoefficients, basis: &RealShBasis) -> Result<()> {
    if f.l_max() != g.l_max() {
        return Err(Error::DegreeMismatch(f.l_max(), g.l_max()));
    }
    if f.l_max() > basis.l_max() {
        return Err(Error::DegreeMismatch(f.l_max(), basis.l_max()));
    }
    Ok(())
}

fn degree_vector(c: &ShCoefficients, l: usize) -> DVector<f64> {
    DVector::from_column_slice(c.degree(l))
}

fn correlate_blocks(f: &ShCoefficients, g: &ShCoefficients, u: &WignerBlocks) -> f64 {
    (0..=f.l_max())
        .map(|l| degree_vector(g, l).dot(&(u.block(l) * degree_vector(f, l))))
        .sum::<f64>()
        / (4.0 * PI)
}

/// `C(R) = 1/(4 pi) sum_l (G^l)^T U^l(R) F^l`.
pub fn so3_correlation(f: &ShCoefficients, g: &ShCoefficients, r: &Matrix3<f64>, basis: &RealShBasis) -> Result<f64> {
    check_degrees(f, g, basis)?;
    let u = wigner_u(r, f.l_max(), basis)?;
    Ok(correlate_blocks(f, g, &u))
}

/// Gradient of `C` along `R exp(e hat(e_k))`, `k = x, y, z`.
pub fn so3_correlation_gradient(
    f: &ShCoefficients,
    g: &ShCoefficients,
    r: &Matrix3<f64>,
    basis: &RealShBasis,
) -> Result<Vector3<f64>> {
    check_degrees(f, g, basis)?;
    let derivative = [0, 1, 2].map(|axis| wigner_u_derivative(axis, f.l_max()));
    let u = wigner_u(r, f.l_max(), basis)?;
    Ok(gradient_blocks(f, g, &u, &derivative))
}

fn gradient_blocks(
    f: &ShCoefficients,
    g: &ShCoefficients,
    u: &WignerBlocks,
    derivative: &[Vec<DMatrix<f64>>; 3],
) -> Vector3<f64> {
    let mut grad = Vector3::zeros();
    for l in 0..=f.l_max() {
        let fl = degree_vector(f, l);
        // G^T U is shared by the three components
        let gu = u.block(l).transpose() * degree_vector(g, l);
        for (k, blocks) in derivative.iter().enumerate() {
            grad[k] += gu.dot(&(&blocks[l] * &fl));
        }
    }
    grad / (4.0 * PI)
}

/// Owns the SH basis and the derivative blocks for repeated evaluations.
#[derive(Debug, Clone)]
pub struct Correlator {
    basis: RealShBasis,
    derivative: [Vec<DMatrix<f64>>; 3],
}

impl Correlator {
    pub fn new(basis: RealShBasis) -> Self {
        let l_max = basis.l_max();
        Self {
            basis,
            derivative: [0, 1, 2].map(|axis| wigner_u_derivative(axis, l_max)),
        }
    }

    pub fn basis(&self) -> &RealShBasis {
        &self.basis
    }

    pub fn l_max(&self) -> usize {
        self.basis.l_max()
    }

    fn check(&self, f: &ShCoefficients, g: &ShCoefficients) -> Result<()> {
        check_degrees(f, g, &self.basis)?;
        if f.l_max() != self.l_max() {
            return Err(Error::DegreeMismatch(f.l_max(), self.l_max()));
        }
        Ok(())
    }

    pub fn correlation(&self, f: &ShCoefficients, g: &ShCoefficients, r: &Matrix3<f64>) -> Result<f64> {
        so3_correlation(f, g, r, &self.basis)
    }

    pub fn gradient(&self, f: &ShCoefficients, g: &ShCoefficients, r: &Matrix3<f64>) -> Result<Vector3<f64>> {
        self.check(f, g)?;
        let u = wigner_u(r, self.l_max(), &self.basis)?;
        Ok(gradient_blocks(f, g, &u, &self.derivative))
    }

    /// Correlation and gradient from one set of Wigner blocks.
    pub fn evaluate(&self, f: &ShCoefficients, g: &ShCoefficients, r: &Matrix3<f64>) -> Result<(f64, Vector3<f64>)> {
        self.check(f, g)?;
        let u = wigner_u(r, self.l_max(), &self.basis)?;
        Ok((correlate_blocks(f, g, &u), gradient_blocks(f, g, &u, &self.derivative)))
    }

    /// Symmetric 3x3 curvature `M_jk = 1/(4 pi) sum_l (u_j F)^T (u_k F)`.
    /// For `G = U(exp(hat(w))) F` and small `w`, the gradient at the identity
    /// is approximately `M w`.
    pub fn curvature(&self, f: &ShCoefficients) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for l in 0..=self.l_max().min(f.l_max()) {
            let fl = degree_vector(f, l);
            let cols: Vec<DVector<f64>> = self.derivative.iter().map(|b| &b[l] * &fl).collect();
            for j in 0..3 {
                for k in 0..3 {
                    m[(j, k)] += cols[j].dot(&cols[k]);
                }
            }
        }
        m / (4.0 * PI)
    }
}

/// Samples of `f(R^T x)` at the grid nodes, nearest-node lookup.
pub fn resample_rotated(values: &[f64], grid: &SphereGrid, r: &Matrix3<f64>) -> Vec<f64> {
    let side = grid.side();
    let rt = r.transpose();
    let mut out = Vec::with_capacity(grid.node_count());
    for j in 0..side {
        for k in 0..side {
            let x = rt * grid.direction(j, k);
            let (theta, phi) = cartesian_to_spherical(&x).expect("unit direction");
            let (sj, sk) = grid.nearest_node(theta, phi);
            out.push(values[grid.linear(sj, sk)]);
        }
    }
    out
}

/// `1/2 sum_nodes (g(x) - f(R^T x))^2` on sphere samples.
pub fn rotation_cost_values(f: &[f64], g: &[f64], grid: &SphereGrid, r: &Matrix3<f64>) -> Result<f64> {
    if f.len() != grid.node_count() || g.len() != grid.node_count() {
        return Err(Error::Validation("sample count does not match the sphere grid".into()));
    }
    let moved = resample_rotated(f, grid, r);
    Ok(0.5 * moved.iter().zip(g).map(|(a, b)| (b - a) * (b - a)).sum::<f64>())
}

/// Rotation cost on raw EGI counts.
pub fn rotation_cost(f: &Egi, g: &Egi, r: &Matrix3<f64>) -> Result<f64> {
    if f.grid() != g.grid() {
        return Err(Error::BandwidthMismatch {
            expected: f.grid().bandwidth(),
            found: g.grid().bandwidth(),
        });
    }
    rotation_cost_values(&f.values(), &g.values(), f.grid(), r)
}
