//! Rigid-transform algebra: the `so(3)` hat map, the exponential map, ZYZ
//! Euler angles and the `(R, T)` pair driven by the controller.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};

use crate::error::{Error, Result};

/// Tolerance used when validating that a matrix is a rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Skew-symmetric matrix `S` with `S * v = eta x v`.
pub fn hat(eta: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -eta.z, eta.y, //
        eta.z, 0.0, -eta.x, //
        -eta.y, eta.x, 0.0,
    )
}

/// Inverse of [`hat`] for a skew-symmetric argument.
pub fn vee(s: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
}

/// Matrix exponential of `hat(eta)` (Rodrigues formula).
pub fn exp_so3(eta: &Vector3<f64>) -> Matrix3<f64> {
    let theta2 = eta.norm_squared();
    let k = hat(eta);
    let (a, b) = if theta2 < 1e-16 {
        // second-order Taylor terms of sin(t)/t and (1 - cos t)/t^2
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Matrix3::identity() + k * a + k * k * b
}

/// Rotation vector (axis times angle) of a rotation matrix.
pub fn log_so3(r: &Matrix3<f64>) -> Vector3<f64> {
    let v = vee(&((r - r.transpose()) * 0.5));
    let s = v.norm();
    let theta = s.atan2((r.trace() - 1.0) / 2.0);
    if theta < 1e-8 {
        v
    } else if theta < PI - 1e-3 {
        v * (theta / s)
    } else {
        let axis = Rotation3::from_matrix_unchecked(*r)
            .axis()
            .map(|a| a.into_inner())
            .unwrap_or_else(Vector3::x);
        axis * theta
    }
}

/// Angle of the relative rotation `a^T b`, in radians.
pub fn geodesic_angle(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let rel = a.transpose() * b;
    let c = ((rel.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos()
}

/// Whether `r` is orthogonal with determinant +1 to within `tol`.
pub fn is_rotation(r: &Matrix3<f64>, tol: f64) -> bool {
    let err = (r.transpose() * r - Matrix3::identity()).abs().max();
    err <= tol && (r.determinant() - 1.0).abs() <= tol.max(1e-12) * 10.0
}

/// Closest rotation matrix in the Frobenius sense.
pub fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    u * d * v_t
}

/// ZYZ Euler angles, `R = Rz(alpha) Ry(beta) Rz(gamma)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerZyz {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn wrap_two_pi(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI {
        0.0
    } else {
        w
    }
}

impl EulerZyz {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        zyz_to_matrix(self)
    }
}

pub fn zyz_to_matrix(e: &EulerZyz) -> Matrix3<f64> {
    let (sa, ca) = e.alpha.sin_cos();
    let (sb, cb) = e.beta.sin_cos();
    let (sg, cg) = e.gamma.sin_cos();
    let rz_a = Matrix3::new(ca, -sa, 0.0, sa, ca, 0.0, 0.0, 0.0, 1.0);
    let ry_b = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    let rz_g = Matrix3::new(cg, -sg, 0.0, sg, cg, 0.0, 0.0, 0.0, 1.0);
    rz_a * ry_b * rz_g
}

/// ZYZ angles of a rotation. At the poles (`beta` in {0, pi}) the split of
/// the z-rotation between `alpha` and `gamma` is fixed by `gamma = 0`.
pub fn matrix_to_zyz(r: &Matrix3<f64>) -> EulerZyz {
    let sb = (r[(0, 2)] * r[(0, 2)] + r[(1, 2)] * r[(1, 2)]).sqrt();
    let beta = sb.atan2(r[(2, 2)]);
    if sb < 1e-14 {
        if r[(2, 2)] > 0.0 {
            // R = Rz(alpha)
            let alpha = r[(1, 0)].atan2(r[(0, 0)]);
            EulerZyz::new(wrap_two_pi(alpha), 0.0, 0.0)
        } else {
            // R = Rz(alpha) Ry(pi)
            let alpha = (-r[(0, 1)]).atan2(r[(1, 1)]);
            EulerZyz::new(wrap_two_pi(alpha), PI, 0.0)
        }
    } else {
        let alpha = r[(1, 2)].atan2(r[(0, 2)]);
        let gamma = r[(2, 1)].atan2(-r[(2, 0)]);
        EulerZyz::new(wrap_two_pi(alpha), beta, wrap_two_pi(gamma))
    }
}

/// A rigid transform `H = (R, T)`. Applied about a rotation center `c`:
/// `p -> R (p - c) + c + T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validating constructor.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !is_rotation(&rotation, ROTATION_TOL) {
            return Err(Error::Validation("rotation is not in SO(3)".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn from_rotation(r: Matrix3<f64>) -> Self {
        Self {
            rotation: r,
            translation: Vector3::zeros(),
        }
    }

    /// Rotation vector and translation.
    pub fn from_rotation_vector(rotvec: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: exp_so3(&rotvec),
            translation,
        }
    }

    pub fn apply_point(&self, p: &Vector3<f64>, center: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * (p - center) + center + self.translation
    }

    pub fn apply_inverse_point(&self, p: &Vector3<f64>, center: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - center - self.translation) + center
    }

    /// `self` applied after `first`, both about the same center.
    pub fn compose(&self, first: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    /// Inverse about the same center.
    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Re-express a transform about `center` as a transform about the origin.
    pub fn about_origin(&self, center: &Vector3<f64>) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation,
            translation: center - self.rotation * center + self.translation,
        }
    }

    /// Re-express a transform about the origin as one about `center`.
    pub fn about_center(&self, center: &Vector3<f64>) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation,
            translation: self.translation - center + self.rotation * center,
        }
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    /// `[w, x, y, z]` with `w >= 0`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.quaternion();
        let mut out = [q.w, q.i, q.j, q.k];
        if out[0] < 0.0 {
            out.iter_mut().for_each(|v| *v = -*v);
        }
        out
    }

    pub fn rotation_row_major(&self) -> [f64; 9] {
        let r = &self.rotation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
        ]
    }
}
