//! Extended Gaussian Image: a histogram of normal directions on the
//! equiangular `2B x 2B` sphere grid.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub const DEFAULT_BANDWIDTH: usize = 16;

/// Nodes `theta_j = pi (2j + 1) / 4B`, `phi_k = pi k / B`, `0 <= j, k < 2B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphereGrid {
    bandwidth: usize,
}

impl SphereGrid {
    pub fn new(bandwidth: usize) -> Result<Self> {
        if bandwidth == 0 || !bandwidth.is_power_of_two() {
            return Err(Error::Validation(format!(
                "bandwidth must be a positive power of two, got {bandwidth}"
            )));
        }
        Ok(Self { bandwidth })
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    /// Nodes per axis, `2B`.
    pub fn side(&self) -> usize {
        2 * self.bandwidth
    }

    pub fn node_count(&self) -> usize {
        self.side() * self.side()
    }

    pub fn theta(&self, j: usize) -> f64 {
        PI * (2 * j + 1) as f64 / (4 * self.bandwidth) as f64
    }

    pub fn phi(&self, k: usize) -> f64 {
        PI * k as f64 / self.bandwidth as f64
    }

    /// Unit vector of node `(j, k)`.
    pub fn direction(&self, j: usize, k: usize) -> Vector3<f64> {
        spherical_to_cartesian(self.theta(j), self.phi(k))
    }

    /// Nearest node in `(theta, phi)`, `phi` taken modulo `2 pi`; exact ties
    /// go to the lower index.
    pub fn nearest_node(&self, theta: f64, phi: f64) -> (usize, usize) {
        let side = self.side();
        let b = self.bandwidth as f64;
        let tj = (theta * 4.0 * b / PI - 1.0) / 2.0;
        let j = round_half_down(tj).clamp(0.0, (side - 1) as f64) as usize;
        let tk = phi.rem_euclid(2.0 * PI) * b / PI;
        let k = (round_half_down(tk) as i64).rem_euclid(side as i64) as usize;
        (j, k)
    }

    #[inline]
    pub fn linear(&self, j: usize, k: usize) -> usize {
        j * self.side() + k
    }
}

fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil()
}

pub fn spherical_to_cartesian(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st * cp, st * sp, ct)
}

/// `(theta, phi)` with `theta` in `[0, pi]` and `phi` in `[0, 2 pi)`.
pub fn cartesian_to_spherical(n: &Vector3<f64>) -> Result<(f64, f64)> {
    let norm = n.norm();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Validation("cannot take the direction of a zero vector".into()));
    }
    let theta = n.xy().norm().atan2(n.z);
    let mut phi = n.y.atan2(n.x);
    if phi < 0.0 {
        phi += 2.0 * PI;
    }
    if phi >= 2.0 * PI {
        phi = 0.0;
    }
    Ok((theta, phi))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Egi {
    grid: SphereGrid,
    counts: Vec<u64>,
}

impl Egi {
    pub fn zeros(grid: SphereGrid) -> Self {
        Self {
            grid,
            counts: vec![0; grid.node_count()],
        }
    }

    pub fn from_counts(grid: SphereGrid, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != grid.node_count() {
            return Err(Error::Validation(format!(
                "expected {} EGI bins, got {}",
                grid.node_count(),
                counts.len()
            )));
        }
        Ok(Self { grid, counts })
    }

    pub fn grid(&self) -> &SphereGrid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, j: usize, k: usize) -> u64 {
        self.counts[self.grid.linear(j, k)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin counts as reals.
    pub fn values(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64).collect()
    }

    /// Bin counts divided by the total (all zero for an empty histogram).
    pub fn normalized_values(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        let t = total as f64;
        self.counts.iter().map(|&c| c as f64 / t).collect()
    }

    pub fn add(&self, other: &Egi) -> Result<Egi> {
        if self.grid != other.grid {
            return Err(Error::BandwidthMismatch {
                expected: self.grid.bandwidth,
                found: other.grid.bandwidth,
            });
        }
        Ok(Egi {
            grid: self.grid,
            counts: self.counts.iter().zip(&other.counts).map(|(a, b)| a + b).collect(),
        })
    }

    /// `B`, then one line of `2B` counts per theta row.
    pub fn dump(&self) -> String {
        let side = self.grid.side();
        let mut out = format!("{}\n", self.grid.bandwidth);
        for j in 0..side {
            let row: Vec<String> = (0..side).map(|k| self.count(j, k).to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Histogram of the cloud's normals.
pub fn build_egi(cloud: &PointCloud, bandwidth: usize) -> Result<Egi> {
    let grid = SphereGrid::new(bandwidth)?;
    let mut egi = Egi::zeros(grid);
    for n in cloud.normals() {
        let (theta, phi) = cartesian_to_spherical(n)?;
        let (j, k) = grid.nearest_node(theta, phi);
        egi.counts[grid.linear(j, k)] += 1;
    }
    Ok(egi)
}

/// Normal histogram with bilinear splatting in `(theta, phi)` index space:
/// each normal spreads unit weight over its four surrounding nodes. Rows
/// clamp at the poles, columns wrap.
pub fn build_egi_linear(cloud: &PointCloud, bandwidth: usize) -> Result<Vec<f64>> {
    let grid = SphereGrid::new(bandwidth)?;
    let side = grid.side();
    let b = bandwidth as f64;
    let mut out = vec![0.0; grid.node_count()];
    for n in cloud.normals() {
        let (theta, phi) = cartesian_to_spherical(n)?;
        let tj = ((theta * 4.0 * b / PI - 1.0) / 2.0).clamp(0.0, (side - 1) as f64);
        let j0 = (tj.floor() as usize).min(side - 2);
        let fj = tj - j0 as f64;
        let tk = phi * b / PI;
        let k0f = tk.floor();
        let fk = tk - k0f;
        let k0 = (k0f as i64).rem_euclid(side as i64) as usize;
        let k1 = (k0 + 1) % side;
        for (j, wj) in [(j0, 1.0 - fj), (j0 + 1, fj)] {
            out[grid.linear(j, k0)] += wj * (1.0 - fk);
            out[grid.linear(j, k1)] += wj * fk;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::{generate_shape, ShapeKind};
    use crate::transform::{exp_so3, RigidTransform};
    use approx::assert_abs_diff_eq;

    #[test]
    fn spherical_examples() {
        let (t, p) = cartesian_to_spherical(&Vector3::z()).unwrap();
        assert_eq!((t, p), (0.0, 0.0));
        let (t, p) = cartesian_to_spherical(&Vector3::x()).unwrap();
        assert_abs_diff_eq!(t, PI / 2.0);
        assert_eq!(p, 0.0);
        let (t, p) = cartesian_to_spherical(&-Vector3::y()).unwrap();
        assert_abs_diff_eq!(t, PI / 2.0);
        assert_abs_diff_eq!(p, 3.0 * PI / 2.0, epsilon = 1e-15);
        assert!(cartesian_to_spherical(&Vector3::zeros()).is_err());
    }

    #[test]
    fn spherical_round_trip() {
        let c = generate_shape(ShapeKind::Sphere { radius: 1.0 }, 500, 8).unwrap();
        for n in c.normals() {
            let (t, p) = cartesian_to_spherical(n).unwrap();
            assert!((0.0..=PI).contains(&t) && (0.0..2.0 * PI).contains(&p));
            assert_abs_diff_eq!(spherical_to_cartesian(t, p), *n, epsilon = 1e-9);
        }
    }

    #[test]
    fn grid_nodes_are_increasing() {
        let g = SphereGrid::new(16).unwrap();
        for j in 1..g.side() {
            assert!(g.theta(j) > g.theta(j - 1));
            assert!(g.phi(j) > g.phi(j - 1));
        }
        assert!(g.theta(0) > 0.0 && g.theta(g.side() - 1) < PI);
        assert!(g.phi(g.side() - 1) < 2.0 * PI);
        assert!(SphereGrid::new(12).is_err());
    }

    #[test]
    fn nearest_node_ties_and_wrap() {
        let g = SphereGrid::new(4).unwrap();
        // exactly between theta_0 and theta_1
        let mid = (g.theta(0) + g.theta(1)) / 2.0;
        assert_eq!(g.nearest_node(mid, 0.0).0, 0);
        // just below 2 pi wraps to column 0
        assert_eq!(g.nearest_node(PI / 2.0, 2.0 * PI - 1e-6).1, 0);
        assert_eq!(g.nearest_node(0.0, 0.0), (0, 0));
        assert_eq!(g.nearest_node(PI, 0.0).0, 7);
    }

    #[test]
    fn single_direction_histogram() {
        let pts = vec![Vector3::zeros(); 25];
        let c = PointCloud::new(pts, vec![Vector3::z(); 25]).unwrap();
        let egi = build_egi(&c, 16).unwrap();
        assert_eq!(egi.total(), 25);
        assert_eq!(egi.counts().iter().filter(|c| **c > 0).count(), 1);
        assert_eq!(egi.count(0, 0), 25);
    }

    #[test]
    fn uniform_sphere_fills_every_row() {
        let c = generate_shape(ShapeKind::Sphere { radius: 0.05 }, 10_000, 21).unwrap();
        let egi = build_egi(&c, 16).unwrap();
        // oracle: bin each normal's latitude directly
        let mut rows = vec![0u64; 32];
        for n in c.normals() {
            let theta = n.xy().norm().atan2(n.z);
            let j = ((theta * 64.0 / PI - 1.0) / 2.0 - 0.5).ceil().clamp(0.0, 31.0) as usize;
            rows[j] += 1;
        }
        for (j, expected) in rows.iter().enumerate() {
            let got: u64 = (0..32).map(|k| egi.count(j, k)).sum();
            assert_eq!(got, *expected);
            assert!(got > 0, "row {j} empty");
        }
        assert_eq!(egi.total(), 10_000);
    }

    #[test]
    fn additivity() {
        let a = generate_shape(ShapeKind::Box { size: [0.1, 0.05, 0.02] }, 700, 1).unwrap();
        let b = generate_shape(ShapeKind::Cone { radius: 0.03, height: 0.05 }, 500, 2).unwrap();
        let sum = build_egi(&a, 8).unwrap().add(&build_egi(&b, 8).unwrap()).unwrap();
        assert_eq!(build_egi(&a.merged(&b), 8).unwrap(), sum);
        let doubled = build_egi(&a.merged(&a), 8).unwrap();
        let single = build_egi(&a, 8).unwrap();
        assert!(doubled.counts().iter().zip(single.counts()).all(|(d, s)| *d == 2 * s));
    }

    #[test]
    fn z_rotation_by_one_step_permutes_columns() {
        let bw = 8;
        let c = generate_shape(ShapeKind::Sphere { radius: 1.0 }, 3000, 5).unwrap();
        let rot = RigidTransform::from_rotation(exp_so3(&Vector3::new(0.0, 0.0, PI / bw as f64)));
        let turned = c.transformed(&rot, &Vector3::zeros());
        let a = build_egi(&c, bw).unwrap();
        let b = build_egi(&turned, bw).unwrap();
        let side = 2 * bw;
        let mismatches = (0..side)
            .flat_map(|j| (0..side).map(move |k| (j, k)))
            .filter(|&(j, k)| b.count(j, (k + 1) % side) != a.count(j, k))
            .count();
        assert_eq!(mismatches, 0);
    }

    #[test]
    fn linear_splat_conserves_mass_and_hits_nodes() {
        let c = generate_shape(ShapeKind::Box { size: [0.1, 0.05, 0.02] }, 900, 4).unwrap();
        let soft = build_egi_linear(&c, 8).unwrap();
        assert_abs_diff_eq!(soft.iter().sum::<f64>(), 900.0, epsilon = 1e-9);
        assert!(soft.iter().all(|v| *v >= 0.0));

        // a normal exactly on a node puts all weight there
        let g = SphereGrid::new(8).unwrap();
        let n = g.direction(5, 3);
        let one = PointCloud::new(vec![Vector3::zeros()], vec![n]).unwrap();
        let soft = build_egi_linear(&one, 8).unwrap();
        assert_abs_diff_eq!(soft[g.linear(5, 3)], 1.0, epsilon = 1e-9);

        // halfway between two columns splits evenly
        let n = spherical_to_cartesian(g.theta(2), (g.phi(6) + g.phi(7)) / 2.0);
        let one = PointCloud::new(vec![Vector3::zeros()], vec![n]).unwrap();
        let soft = build_egi_linear(&one, 8).unwrap();
        assert_abs_diff_eq!(soft[g.linear(2, 6)], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(soft[g.linear(2, 7)], 0.5, epsilon = 1e-9);
    }

    #[test]
    fn dump_shape() {
        let c = PointCloud::new(vec![Vector3::zeros()], vec![Vector3::z()]).unwrap();
        let text = build_egi(&c, 2).unwrap().dump();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "2");
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[1], "1 0 0 0");
    }
}
