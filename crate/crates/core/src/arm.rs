//! Serial revolute arm with a camera on the flange, and the truncated-SVD
//! pseudo-inverse used to map camera twists to joint rates.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::transform::{exp_so3, log_so3, RigidTransform};

/// Relative cutoff below which singular values are dropped.
pub const PINV_CUTOFF: f64 = 1e-8;

/// Moore-Penrose pseudo-inverse by SVD; singular values under
/// `1e-8 * sigma_max` count as zero.
pub fn jacobian_pinv(j: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = j.shape();
    if rows == 0 || cols == 0 {
        return DMatrix::zeros(cols, rows);
    }
    let svd = j.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    if sigma_max == 0.0 {
        return DMatrix::zeros(cols, rows);
    }
    svd.pseudo_inverse(PINV_CUTOFF * sigma_max)
        .expect("both singular vector sets were computed")
}

/// Largest joint change per inverse-kinematics iteration, radians.
pub const IK_MAX_STEP: f64 = 0.2;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(2.0 * std::f64::consts::PI);
    if w > std::f64::consts::PI {
        w - 2.0 * std::f64::consts::PI
    } else {
        w
    }
}

/// Standard Denavit-Hartenberg link: `Rz(theta + q) Tz(d) Tx(a) Rx(alpha)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DhLink {
    pub d: f64,
    pub a: f64,
    pub alpha: f64,
    pub theta_offset: f64,
    /// Symmetric joint limit in radians.
    pub limit: f64,
}

impl DhLink {
    fn transform(&self, q: f64) -> RigidTransform {
        let rz = exp_so3(&Vector3::new(0.0, 0.0, self.theta_offset + q));
        let rx = exp_so3(&Vector3::new(self.alpha, 0.0, 0.0));
        RigidTransform {
            rotation: rz * rx,
            translation: rz * Vector3::new(self.a, 0.0, self.d),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedArm {
    pub links: Vec<DhLink>,
    pub q: Vec<f64>,
    pub base: RigidTransform,
    /// Camera pose in the flange frame.
    pub mount: RigidTransform,
}

impl SimulatedArm {
    /// 7 revolute joints with the link lengths of a common collaborative
    /// arm (0.36 / 0.42 / 0.40 / 0.126 m), camera 5 cm past the flange.
    pub fn seven_dof() -> Self {
        use std::f64::consts::FRAC_PI_2 as H;
        let deg = |d: f64| d.to_radians();
        let link = |d, alpha, limit| DhLink {
            d,
            a: 0.0,
            alpha,
            theta_offset: 0.0,
            limit,
        };
        Self {
            links: vec![
                link(0.36, -H, deg(170.0)),
                link(0.0, H, deg(120.0)),
                link(0.42, H, deg(170.0)),
                link(0.0, -H, deg(120.0)),
                link(0.40, -H, deg(170.0)),
                link(0.0, H, deg(120.0)),
                link(0.126, 0.0, deg(175.0)),
            ],
            q: vec![0.0; 7],
            base: RigidTransform::identity(),
            mount: RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.05)),
        }
    }

    pub fn joint_count(&self) -> usize {
        self.links.len()
    }

    pub fn with_joints(mut self, q: &[f64]) -> Result<Self> {
        self.set_joints(q)?;
        Ok(self)
    }

    pub fn set_joints(&mut self, q: &[f64]) -> Result<()> {
        if q.len() != self.links.len() {
            return Err(Error::Validation(format!(
                "expected {} joint values, got {}",
                self.links.len(),
                q.len()
            )));
        }
        self.check_limits(q)?;
        self.q = q.to_vec();
        Ok(())
    }

    pub fn check_limits(&self, q: &[f64]) -> Result<()> {
        for (i, (v, l)) in q.iter().zip(&self.links).enumerate() {
            if !v.is_finite() || v.abs() > l.limit {
                return Err(Error::JointLimit {
                    joint: i,
                    value: *v,
                    limit: l.limit,
                });
            }
        }
        Ok(())
    }

    /// World poses of the frames before each joint, then the flange.
    fn frames(&self, q: &[f64]) -> Vec<RigidTransform> {
        let mut out = Vec::with_capacity(q.len() + 1);
        let mut t = self.base;
        out.push(t);
        for (link, qi) in self.links.iter().zip(q) {
            t = t.compose(&link.transform(*qi));
            out.push(t);
        }
        out
    }

    /// Camera pose (camera to world) at joint values `q`.
    pub fn camera_pose_at(&self, q: &[f64]) -> RigidTransform {
        self.frames(q).last().expect("base frame").compose(&self.mount)
    }

    pub fn camera_pose(&self) -> RigidTransform {
        self.camera_pose_at(&self.q)
    }

    /// 6 x n Jacobian mapping joint rates to the camera twist `(v, w)`
    /// expressed in the camera frame.
    pub fn camera_jacobian_at(&self, q: &[f64]) -> DMatrix<f64> {
        let frames = self.frames(q);
        let camera = frames.last().expect("base frame").compose(&self.mount);
        let rt: Matrix3<f64> = camera.rotation.transpose();
        let n = q.len();
        let mut j = DMatrix::zeros(6, n);
        for i in 0..n {
            let axis = frames[i].rotation * Vector3::z();
            let origin = frames[i].translation;
            let v = rt * axis.cross(&(camera.translation - origin));
            let w = rt * axis;
            for r in 0..3 {
                j[(r, i)] = v[r];
                j[(r + 3, i)] = w[r];
            }
        }
        j
    }

    pub fn camera_jacobian(&self) -> DMatrix<f64> {
        self.camera_jacobian_at(&self.q)
    }

    /// Applies `q_dot = J^+ twist` for one unit time step.
    pub fn apply_twist(&mut self, twist: &[f64; 6]) -> Result<()> {
        let jp = jacobian_pinv(&self.camera_jacobian());
        let qdot = jp * DVector::from_column_slice(twist);
        let next: Vec<f64> = self.q.iter().zip(qdot.iter()).map(|(a, b)| a + b).collect();
        self.set_joints(&next)
    }

    /// Iterative inverse kinematics from the current joints toward a
    /// camera pose. Redundant motion is spent pulling the joints back
    /// toward their starting values. Returns the joint vector; `self` is
    /// left unchanged.
    pub fn solve_ik(&self, goal: &RigidTransform, iterations: usize, tol: f64) -> Result<Vec<f64>> {
        let n = self.q.len();
        let home = DVector::from_column_slice(&self.q);
        let mut q = home.clone();
        for _ in 0..iterations {
            let current = self.camera_pose_at(q.as_slice());
            let err = body_error(&current, goal);
            if err.iter().map(|v| v * v).sum::<f64>().sqrt() < tol {
                self.check_limits(q.as_slice())?;
                return Ok(q.as_slice().to_vec());
            }
            let j = self.camera_jacobian_at(q.as_slice());
            let jp = jacobian_pinv(&j);
            let null = DMatrix::identity(n, n) - &jp * &j;
            let mut dq = &jp * DVector::from_column_slice(&err) + null * (&home - &q) * 0.5;
            let size = dq.amax();
            if size > IK_MAX_STEP {
                dq *= IK_MAX_STEP / size;
            }
            q += dq;
            q.apply(|v| *v = wrap_angle(*v));
        }
        Err(Error::Validation("inverse kinematics did not converge".into()))
    }
}

/// Body-frame twist `(v, w)` taking `from` to `to` in one unit step.
pub fn body_error(from: &RigidTransform, to: &RigidTransform) -> [f64; 6] {
    let rel = from.inverse().compose(to);
    let w = log_so3(&rel.rotation);
    let v = rel.translation;
    [v.x, v.y, v.z, w.x, w.y, w.z]
}
