//! Synthetic surfaces with analytic normals, composite objects, multi-object
//! scenes and back-face-culled partial views.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::transform::RigidTransform;

/// Primitive surface, centered at the origin. Cylinders and cones have their
/// axis along z; the cone's base sits at `z = -height/2`, apex at `+height/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ShapeKind {
    Sphere { radius: f64 },
    Box { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
    Cone { radius: f64, height: f64 },
}

impl ShapeKind {
    fn validate(&self) -> Result<()> {
        let dims: Vec<f64> = match *self {
            ShapeKind::Sphere { radius } => vec![radius],
            ShapeKind::Box { size } => size.to_vec(),
            ShapeKind::Cylinder { radius, height } | ShapeKind::Cone { radius, height } => {
                vec![radius, height]
            }
        };
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Validation(format!("nonpositive dimension in {self:?}")));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        match *self {
            ShapeKind::Sphere { radius } => 4.0 * PI * radius * radius,
            ShapeKind::Box { size: [a, b, c] } => 2.0 * (a * b + b * c + a * c),
            ShapeKind::Cylinder { radius, height } => 2.0 * PI * radius * (radius + height),
            ShapeKind::Cone { radius, height } => {
                PI * radius * (radius + (radius * radius + height * height).sqrt())
            }
        }
    }

    /// Strict interior test in the shape's own frame.
    pub fn contains(&self, p: &Vector3<f64>, margin: f64) -> bool {
        match *self {
            ShapeKind::Sphere { radius } => p.norm() < radius - margin,
            ShapeKind::Box { size } => (0..3).all(|i| p[i].abs() < size[i] / 2.0 - margin),
            ShapeKind::Cylinder { radius, height } => {
                p.xy().norm() < radius - margin && p.z.abs() < height / 2.0 - margin
            }
            ShapeKind::Cone { radius, height } => {
                let h = p.z + height / 2.0;
                if h <= margin || h >= height - margin {
                    return false;
                }
                let r_at = radius * (1.0 - h / height);
                p.xy().norm() < r_at - margin
            }
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> (Vector3<f64>, Vector3<f64>) {
        match *self {
            ShapeKind::Sphere { radius } => {
                let n = loop {
                    let v = Vector3::new(
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                        StandardNormal.sample(rng),
                    );
                    let len: f64 = v.norm();
                    if len > 1e-9 {
                        break v / len;
                    }
                };
                (n * radius, n)
            }
            ShapeKind::Box { size: [a, b, c] } => {
                let faces = [b * c, b * c, a * c, a * c, a * b, a * b];
                let face = pick_weighted(&faces, rng);
                let axis = face / 2;
                let sign = if face.is_multiple_of(2) { 1.0 } else { -1.0 };
                let half = [a / 2.0, b / 2.0, c / 2.0];
                let mut p = Vector3::zeros();
                for i in 0..3 {
                    p[i] = if i == axis {
                        sign * half[i]
                    } else {
                        rng.gen_range(-half[i]..half[i])
                    };
                }
                let mut n = Vector3::zeros();
                n[axis] = sign;
                (p, n)
            }
            ShapeKind::Cylinder { radius, height } => {
                let side = 2.0 * PI * radius * height;
                let cap = PI * radius * radius;
                match pick_weighted(&[side, cap, cap], rng) {
                    0 => {
                        let phi = rng.gen_range(0.0..2.0 * PI);
                        let z = rng.gen_range(-height / 2.0..height / 2.0);
                        let n = Vector3::new(phi.cos(), phi.sin(), 0.0);
                        (Vector3::new(radius * n.x, radius * n.y, z), n)
                    }
                    k => {
                        let sign = if k == 1 { 1.0 } else { -1.0 };
                        let d = sample_disk(radius, rng);
                        (Vector3::new(d.0, d.1, sign * height / 2.0), Vector3::z() * sign)
                    }
                }
            }
            ShapeKind::Cone { radius, height } => {
                let slant = (radius * radius + height * height).sqrt();
                let lateral = PI * radius * slant;
                let base = PI * radius * radius;
                if pick_weighted(&[lateral, base], rng) == 0 {
                    // area density on the lateral surface grows linearly toward the base
                    let s: f64 = rng.gen::<f64>().sqrt();
                    let phi = rng.gen_range(0.0..2.0 * PI);
                    let r = radius * s;
                    let z = height / 2.0 - height * s;
                    let n = Vector3::new(height * phi.cos(), height * phi.sin(), radius) / slant;
                    (Vector3::new(r * phi.cos(), r * phi.sin(), z), n)
                } else {
                    let d = sample_disk(radius, rng);
                    (Vector3::new(d.0, d.1, -height / 2.0), -Vector3::z())
                }
            }
        }
    }
}

fn pick_weighted(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn sample_disk(radius: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let r = radius * rng.gen::<f64>().sqrt();
    let phi = rng.gen_range(0.0..2.0 * PI);
    (r * phi.cos(), r * phi.sin())
}

/// Samples `sample_count` surface points of a primitive centered at the origin.
pub fn generate_shape(kind: ShapeKind, sample_count: usize, seed: u64) -> Result<PointCloud> {
    kind.validate()?;
    if sample_count == 0 {
        return Err(Error::Validation("sample_count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (points, normals) = (0..sample_count).map(|_| kind.sample(&mut rng)).unzip();
    Ok(PointCloud::from_parts_unchecked(points, normals))
}

/// A primitive placed by a transform about the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Part {
    pub shape: ShapeKind,
    pub pose: RigidTransform,
}

impl Part {
    pub fn new(shape: ShapeKind, pose: RigidTransform) -> Self {
        Self { shape, pose }
    }

    fn contains(&self, p: &Vector3<f64>, margin: f64) -> bool {
        let local = self.pose.apply_inverse_point(p, &Vector3::zeros());
        self.shape.contains(&local, margin)
    }
}

/// Samples the outer surface of a union of primitives. Samples are spread
/// over parts in proportion to area, and samples buried inside another part
/// are dropped, so the result may hold fewer than `sample_count` points.
pub fn sample_union(parts: &[Part], sample_count: usize, seed: u64) -> Result<PointCloud> {
    if parts.is_empty() {
        return Err(Error::Validation("union needs at least one part".into()));
    }
    if sample_count == 0 {
        return Err(Error::Validation("sample_count must be at least 1".into()));
    }
    for part in parts {
        part.shape.validate()?;
    }
    let areas: Vec<f64> = parts.iter().map(|p| p.shape.area()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(sample_count);
    let mut normals = Vec::with_capacity(sample_count);
    let origin = Vector3::zeros();
    for _ in 0..sample_count {
        let idx = pick_weighted(&areas, &mut rng);
        let part = &parts[idx];
        let (lp, ln) = part.shape.sample(&mut rng);
        let p = part.pose.apply_point(&lp, &origin);
        let n = part.pose.rotation * ln;
        let buried = parts
            .iter()
            .enumerate()
            .any(|(j, other)| j != idx && other.contains(&p, 1e-9));
        if !buried {
            points.push(p);
            normals.push(n);
        }
    }
    Ok(PointCloud::from_parts_unchecked(points, normals))
}

/// Asymmetric test object (a box with a tilted cone and a slanted peg),
/// about 15 cm across. Its normal histogram has no rotational symmetry, so
/// its orientation is recoverable from normals alone.
pub fn asymmetric_object(sample_count: usize, seed: u64) -> Result<PointCloud> {
    let parts = [
        Part::new(
            ShapeKind::Box {
                size: [0.10, 0.07, 0.045],
            },
            RigidTransform::identity(),
        ),
        Part::new(
            ShapeKind::Cone {
                radius: 0.028,
                height: 0.06,
            },
            RigidTransform::from_rotation_vector(
                Vector3::new(0.0, 0.9, 0.35),
                Vector3::new(0.045, 0.01, 0.03),
            ),
        ),
        Part::new(
            ShapeKind::Cylinder {
                radius: 0.012,
                height: 0.07,
            },
            RigidTransform::from_rotation_vector(
                Vector3::new(1.1, 0.4, 0.0),
                Vector3::new(-0.035, -0.03, 0.02),
            ),
        ),
    ];
    sample_union(&parts, sample_count, seed)
}

/// Three objects spread over roughly 24 cm: the asymmetric object, a
/// cylinder and a sphere, each sampled independently.
pub fn clutter_scene(samples_per_object: usize, seed: u64) -> Result<PointCloud> {
    let object = asymmetric_object(samples_per_object, seed)?;
    let can = generate_shape(
        ShapeKind::Cylinder {
            radius: 0.03,
            height: 0.09,
        },
        samples_per_object,
        seed.wrapping_add(1),
    )?;
    let ball = generate_shape(ShapeKind::Sphere { radius: 0.035 }, samples_per_object, seed.wrapping_add(2))?;
    let origin = Vector3::zeros();
    let object = object.transformed(
        &RigidTransform::from_rotation_vector(Vector3::new(0.0, 0.0, 0.4), Vector3::new(-0.06, 0.03, 0.0)),
        &origin,
    );
    let can = can.transformed(
        &RigidTransform::from_rotation_vector(Vector3::new(0.5, 0.2, 0.0), Vector3::new(0.07, 0.05, 0.01)),
        &origin,
    );
    let ball = ball.transformed(&RigidTransform::from_translation(Vector3::new(0.02, -0.07, -0.01)), &origin);
    Ok(object.merged(&can).merged(&ball))
}

/// Three objects on a 30 x 30 cm plate whose top face lies at
/// `z = -0.045`: the asymmetric object and two boxes, each at a distinct yaw.
pub fn tabletop_scene(samples_per_object: usize, seed: u64) -> Result<PointCloud> {
    let origin = Vector3::zeros();
    let place = |cloud: PointCloud, yaw: f64, at: Vector3<f64>| {
        cloud.transformed(&RigidTransform::from_rotation_vector(Vector3::new(0.0, 0.0, yaw), at), &origin)
    };
    let object = place(asymmetric_object(samples_per_object, seed)?, 0.9, Vector3::new(-0.06, 0.03, 0.0));
    let wide = generate_shape(
        ShapeKind::Box {
            size: [0.08, 0.05, 0.06],
        },
        samples_per_object,
        seed.wrapping_add(1),
    )?;
    let wide = place(wide, 0.8, Vector3::new(0.07, 0.06, -0.015));
    let tall = generate_shape(
        ShapeKind::Box {
            size: [0.05, 0.04, 0.10],
        },
        samples_per_object,
        seed.wrapping_add(2),
    )?;
    let tall = place(tall, -1.0, Vector3::new(0.03, -0.08, 0.005));
    let plate = generate_shape(
        ShapeKind::Box {
            size: [0.30, 0.30, 0.001],
        },
        2 * samples_per_object,
        seed.wrapping_add(3),
    )?;
    let plate = place(plate, 0.0, Vector3::new(0.0, 0.0, -0.0455));
    Ok(object.merged(&wide).merged(&tall).merged(&plate))
}

/// Points whose normal faces `viewpoint`: `n . (viewpoint - p) > 0`.
pub fn partial_view(cloud: &PointCloud, viewpoint: &Vector3<f64>) -> PointCloud {
    cloud.filtered(|p, n| n.dot(&(viewpoint - p)) > 0.0)
}

/// Adds isotropic Gaussian noise of standard deviation `sigma` to positions.
pub fn add_position_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> PointCloud {
    if sigma <= 0.0 {
        return cloud.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = cloud
        .points()
        .iter()
        .map(|p| {
            let e = Vector3::<f64>::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            );
            p + e * sigma
        })
        .collect();
    PointCloud::from_parts_unchecked(points, cloud.normals().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_on_surface() {
        let c = generate_shape(ShapeKind::Sphere { radius: 0.05 }, 1000, 1).unwrap();
        assert_eq!(c.len(), 1000);
        for (p, n) in c.iter() {
            assert!((p.norm() - 0.05).abs() < 1e-9);
            assert!((n - p / p.norm()).norm() < 1e-12);
        }
    }

    #[test]
    fn box_normals_axis_aligned() {
        let c = generate_shape(ShapeKind::Box { size: [0.1, 0.1, 0.1] }, 600, 2).unwrap();
        for n in c.normals() {
            let nonzero = n.iter().filter(|v| **v != 0.0).count();
            assert_eq!(nonzero, 1);
            assert!(n.iter().any(|v| v.abs() == 1.0));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let kind = ShapeKind::Cylinder { radius: 0.02, height: 0.05 };
        assert_eq!(generate_shape(kind, 300, 9).unwrap(), generate_shape(kind, 300, 9).unwrap());
        assert_ne!(generate_shape(kind, 300, 9).unwrap(), generate_shape(kind, 300, 10).unwrap());
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(generate_shape(ShapeKind::Sphere { radius: 0.0 }, 10, 0).is_err());
        assert!(generate_shape(ShapeKind::Box { size: [0.1, -0.1, 0.1] }, 10, 0).is_err());
        assert!(generate_shape(ShapeKind::Sphere { radius: 0.1 }, 0, 0).is_err());
    }

    #[test]
    fn cone_normals_are_unit_and_outward() {
        let c = generate_shape(ShapeKind::Cone { radius: 0.03, height: 0.06 }, 500, 4).unwrap();
        for (p, n) in c.iter() {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            // convex: outward normals face away from the volume centroid
            let inner = Vector3::new(0.0, 0.0, -0.015);
            assert!(n.dot(&(p - inner)) > 0.0);
        }
    }

    #[test]
    fn partial_view_matches_direct_predicate() {
        let c = generate_shape(ShapeKind::Sphere { radius: 0.05 }, 4000, 3).unwrap();
        let eye = Vector3::new(0.0, 0.0, 100.0);
        let view = partial_view(&c, &eye);
        let expected = c.iter().filter(|(p, n)| n.dot(&(eye - *p)) > 0.0).count();
        assert_eq!(view.len(), expected);
        assert!(view.len() > 1800 && view.len() < 2200);
        assert!(view.normals().iter().all(|n| n.z > -1e-3));
        for p in view.points() {
            assert!(c.points().contains(p));
        }
    }

    #[test]
    fn view_from_center_is_empty() {
        let c = generate_shape(ShapeKind::Sphere { radius: 0.05 }, 500, 3).unwrap();
        assert!(partial_view(&c, &Vector3::zeros()).is_empty());
    }

    #[test]
    fn box_from_axis_shows_few_faces() {
        let c = generate_shape(ShapeKind::Box { size: [0.1, 0.1, 0.1] }, 2000, 5).unwrap();
        let view = partial_view(&c, &Vector3::new(1.0, 0.0, 0.0));
        let mut faces: Vec<[i8; 3]> = view
            .normals()
            .iter()
            .map(|n| [n.x as i8, n.y as i8, n.z as i8])
            .collect();
        faces.sort();
        faces.dedup();
        assert!(faces.len() <= 3);
        assert!(faces.contains(&[1, 0, 0]));
    }

    #[test]
    fn union_drops_buried_samples() {
        let parts = [
            Part::new(ShapeKind::Box { size: [0.1, 0.1, 0.1] }, RigidTransform::identity()),
            Part::new(ShapeKind::Sphere { radius: 0.03 }, RigidTransform::from_translation(Vector3::new(0.05, 0.0, 0.0))),
        ];
        let c = sample_union(&parts, 3000, 1).unwrap();
        assert!(c.len() < 3000);
        for p in c.points() {
            let inside_box = p.iter().all(|v| v.abs() < 0.05 - 1e-6);
            assert!(!inside_box);
        }
    }

    #[test]
    fn asymmetric_object_is_deterministic() {
        let a = asymmetric_object(2000, 7).unwrap();
        assert_eq!(a, asymmetric_object(2000, 7).unwrap());
        assert!(a.len() > 1500);
    }
}
