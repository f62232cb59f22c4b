use std::f64::consts::PI;
use std::sync::OnceLock;

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use proptest::prelude::*;

use spectral_servo::arm::jacobian_pinv;
use spectral_servo::cloud::PointCloud;
use spectral_servo::correlation::{so3_correlation, so3_correlation_gradient};
use spectral_servo::egi::build_egi;
use spectral_servo::harmonics::{coefficient_count, RealShBasis, ShCoefficients};
use spectral_servo::shapes::{generate_shape, partial_view, ShapeKind};
use spectral_servo::transform::{exp_so3, hat, matrix_to_zyz, zyz_to_matrix, RigidTransform};
use spectral_servo::translation::{dft3, phase_correlate};
use spectral_servo::voxel::{voxelize, GridSpec, VoxelGrid};
use spectral_servo::wigner::{wigner_u, wigner_u_derivative};

const R: f64 = 0.008;

fn basis16() -> &'static RealShBasis {
    static B: OnceLock<RealShBasis> = OnceLock::new();
    B.get_or_init(|| RealShBasis::new(16).unwrap())
}

fn basis8() -> &'static RealShBasis {
    static B: OnceLock<RealShBasis> = OnceLock::new();
    B.get_or_init(|| RealShBasis::new(8).unwrap())
}

fn vec3(bound: f64) -> impl Strategy<Value = Vector3<f64>> {
    (-bound..bound, -bound..bound, -bound..bound).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn rotation() -> impl Strategy<Value = Matrix3<f64>> {
    (vec3(1.0), 0.0..PI).prop_filter_map("degenerate axis", |(axis, angle)| {
        (axis.norm() > 1e-3).then(|| exp_so3(&(axis.normalize() * angle)))
    })
}

fn coefficients(l_max: usize) -> impl Strategy<Value = ShCoefficients> {
    prop::collection::vec(-1.0..1.0f64, coefficient_count(l_max))
        .prop_map(move |v| ShCoefficients::from_vec(l_max, v).unwrap())
}

fn cube_spec(n: usize) -> GridSpec {
    GridSpec::new(R, Vector3::zeros(), [n; 3]).unwrap()
}

fn grid(n: usize) -> impl Strategy<Value = VoxelGrid> {
    prop::collection::vec(prop_oneof![3 => Just(0.0), 1 => Just(1.0), 1 => 0.0..2.0f64], n * n * n)
        .prop_filter("empty grid", |v| v.iter().any(|x| *x != 0.0))
        .prop_map(move |v| VoxelGrid::from_values(cube_spec(n), v).unwrap())
}

fn naive_dft(g: &VoxelGrid) -> Vec<Complex64> {
    let [m, n, l] = g.spec().dims();
    let mut out = vec![Complex64::default(); m * n * l];
    for u in 0..m {
        for v in 0..n {
            for w in 0..l {
                let mut acc = Complex64::default();
                for i in 0..m {
                    for j in 0..n {
                        for k in 0..l {
                            let x = g.get([i, j, k]);
                            if x != 0.0 {
                                let phase = -2.0 * PI * ((u * i) as f64 / m as f64 + (v * j) as f64 / n as f64 + (w * k) as f64 / l as f64);
                                acc += Complex64::from_polar(x, phase);
                            }
                        }
                    }
                }
                out[(u * n + v) * l + w] = acc;
            }
        }
    }
    out
}

fn rel_close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * scale.max(1e-300)
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, x| a.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hat_is_skew_and_crosses(eta in vec3(5.0), v in vec3(5.0)) {
        let s = hat(&eta);
        prop_assert_eq!(s + s.transpose(), Matrix3::zeros());
        prop_assert!((s * v - eta.cross(&v)).norm() < 1e-12);
    }

    #[test]
    fn zyz_round_trip(r in rotation()) {
        let back = zyz_to_matrix(&matrix_to_zyz(&r));
        prop_assert!((back - r).amax() < 1e-9);
    }

    #[test]
    fn composition_matches_sequential_application(
        r1 in rotation(), t1 in vec3(0.1), r2 in rotation(), t2 in vec3(0.1), seed in 0u64..1000,
    ) {
        let cloud = generate_shape(ShapeKind::Box { size: [0.1, 0.05, 0.03] }, 200, seed).unwrap();
        let c = cloud.centroid();
        let h1 = RigidTransform { rotation: r1, translation: t1 };
        let h2 = RigidTransform { rotation: r2, translation: t2 };
        let a = cloud.transformed(&h1, &c).transformed(&h2, &c);
        let b = cloud.transformed(&h2.compose(&h1), &c);
        for (p, q) in a.points().iter().zip(b.points()) {
            prop_assert!((p - q).amax() < 1e-9);
        }
    }

    #[test]
    fn partial_view_is_a_subset(eye in vec3(1.0), seed in 0u64..1000) {
        let cloud = generate_shape(ShapeKind::Cylinder { radius: 0.04, height: 0.1 }, 300, seed).unwrap();
        let view = partial_view(&cloud, &eye);
        for p in view.points() {
            prop_assert!(cloud.points().contains(p));
        }
    }

    #[test]
    fn voxelization_ignores_point_order(seed in 0u64..1000, rotate in 0usize..300) {
        let cloud = generate_shape(ShapeKind::Sphere { radius: 0.05 }, 300, seed).unwrap();
        let mut points = cloud.points().to_vec();
        let mut normals = cloud.normals().to_vec();
        points.rotate_left(rotate);
        normals.rotate_left(rotate);
        points.reverse();
        normals.reverse();
        let permuted = PointCloud::new(points, normals).unwrap();
        let spec = GridSpec::centered(&Vector3::zeros(), R, [32; 3]).unwrap();
        prop_assert_eq!(voxelize(&cloud, &spec).unwrap(), voxelize(&permuted, &spec).unwrap());
    }

    #[test]
    fn voxelization_is_shift_equivariant(seed in 0u64..1000, m in -5i64..=5) {
        let cloud = generate_shape(ShapeKind::Box { size: [0.06, 0.05, 0.04] }, 400, seed).unwrap();
        let spec = GridSpec::new(R, Vector3::new(-0.128, -0.128, -0.128), [32; 3]).unwrap();
        let moved = cloud.transformed(&RigidTransform::from_translation(Vector3::new(m as f64 * R, 0.0, 0.0)), &Vector3::zeros());
        let expected = voxelize(&cloud, &spec).unwrap().shifted([m, 0, 0]);
        prop_assert_eq!(voxelize(&moved, &spec).unwrap(), expected);
    }

    #[test]
    fn egi_is_additive(a in 0u64..1000, b in 0u64..1000) {
        let c1 = generate_shape(ShapeKind::Cone { radius: 0.04, height: 0.08 }, 300, a).unwrap();
        let c2 = generate_shape(ShapeKind::Sphere { radius: 0.05 }, 200, b).unwrap();
        let sum = build_egi(&c1, 8).unwrap().add(&build_egi(&c2, 8).unwrap()).unwrap();
        prop_assert_eq!(build_egi(&c1.merged(&c2), 8).unwrap(), sum);
    }

    #[test]
    fn fft_matches_brute_force_dft(g in grid(8)) {
        let fast = dft3(&g);
        let slow = naive_dft(&g);
        let scale = g.values().iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        for (a, b) in fast.data().iter().zip(&slow) {
            prop_assert!((a - b).norm() <= 1e-9 * scale);
        }
    }

    #[test]
    fn shift_theorem(g in grid(8), s in (0i64..8, 0i64..8, 0i64..8)) {
        let shift = [s.0, s.1, s.2];
        let f = dft3(&g);
        let shifted = dft3(&g.circular_shifted(shift));
        let n = 8;
        let scale = f.data().iter().map(|c| c.norm()).fold(0.0, f64::max);
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    let phase = -2.0 * PI * ((u as i64 * shift[0] + v as i64 * shift[1] + w as i64 * shift[2]) as f64) / n as f64;
                    let expected = f.get([u, v, w]) * Complex64::from_polar(1.0, phase);
                    prop_assert!((shifted.get([u, v, w]) - expected).norm() <= 1e-6 * scale);
                }
            }
        }
    }

    #[test]
    fn parseval(g in grid(8)) {
        let spatial: f64 = g.values().iter().map(|v| v * v).sum();
        let spectral: f64 = dft3(&g).data().iter().map(|c| c.norm_sqr()).sum::<f64>() / 512.0;
        prop_assert!(rel_close(spatial, spectral, spatial, 1e-6));
    }

    #[test]
    fn sh_round_trip(c in coefficients(7)) {
        let basis = basis8();
        let back = basis.analyze(&basis.synthesize(&c).unwrap()).unwrap();
        for (a, b) in back.as_slice().iter().zip(c.as_slice()) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn wigner_blocks_identity_orthogonality_homomorphism(r1 in rotation(), r2 in rotation()) {
        let basis = basis16();
        let id = wigner_u(&Matrix3::identity(), 15, basis).unwrap();
        let u1 = wigner_u(&r1, 15, basis).unwrap();
        let u2 = wigner_u(&r2, 15, basis).unwrap();
        let u12 = wigner_u(&(r1 * r2), 15, basis).unwrap();
        for l in 0..=15 {
            let eye = DMatrix::<f64>::identity(2 * l + 1, 2 * l + 1);
            prop_assert!(max_abs(&(id.block(l) - &eye)) < 1e-8);
            prop_assert!(max_abs(&(u1.block(l).transpose() * u1.block(l) - &eye)) < 1e-8);
            prop_assert!(max_abs(&(u1.block(l) * u2.block(l) - u12.block(l))) < 1e-8);
        }
    }

    #[test]
    fn self_correlation_is_maximal_at_identity(f in coefficients(7), r in rotation()) {
        let basis = basis8();
        let at_identity = so3_correlation(&f, &f, &Matrix3::identity(), basis).unwrap();
        let rotated = so3_correlation(&f, &f, &r, basis).unwrap();
        prop_assert!(at_identity >= rotated - 1e-12);
    }

    #[test]
    fn penrose_conditions(v in prop::collection::vec(-1.0..1.0f64, 42)) {
        let j = DMatrix::from_vec(6, 7, v);
        let p = jacobian_pinv(&j);
        prop_assert!(max_abs(&(&j * &p * &j - &j)) < 1e-8);
        prop_assert!(max_abs(&(&p * &j * &p - &p)) < 1e-8);
        let jp = &j * &p;
        let pj = &p * &j;
        prop_assert!(max_abs(&(&jp - jp.transpose())) < 1e-8);
        prop_assert!(max_abs(&(&pj - pj.transpose())) < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn self_correlation_maximal_over_many_rotations(r in rotation()) {
        static F: OnceLock<ShCoefficients> = OnceLock::new();
        let f = F.get_or_init(|| {
            let cloud = generate_shape(ShapeKind::Box { size: [0.1, 0.06, 0.03] }, 2000, 5).unwrap();
            spectral_servo::harmonics::sh_forward(&build_egi(&cloud, 8).unwrap(), basis8()).unwrap()
        });
        let basis = basis8();
        let at_identity = so3_correlation(f, f, &Matrix3::identity(), basis).unwrap();
        prop_assert!(at_identity >= so3_correlation(f, f, &r, basis).unwrap() - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn correlation_gradient_matches_central_differences(f in coefficients(7), g in coefficients(7), r in rotation()) {
        let basis = basis8();
        let grad = so3_correlation_gradient(&f, &g, &r, basis).unwrap();
        let h = 1e-5;
        for k in 0..3 {
            let e = Vector3::ith(k, h);
            let plus = so3_correlation(&f, &g, &(r * exp_so3(&e)), basis).unwrap();
            let minus = so3_correlation(&f, &g, &(r * exp_so3(&-e)), basis).unwrap();
            let fd = (plus - minus) / (2.0 * h);
            prop_assert!(rel_close(grad[k], fd, grad.norm(), 1e-5), "axis {}: {} vs {}", k, grad[k], fd);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn phase_correlation_recovers_integer_shifts(
        g in grid(16),
        s in (-3i64..=3, -3i64..=3, -3i64..=3),
    ) {
        let shift = [s.0, s.1, s.2];
        let est = phase_correlate(&dft3(&g), &dft3(&g.circular_shifted(shift))).unwrap();
        let expected = -R * Vector3::new(s.0 as f64, s.1 as f64, s.2 as f64);
        prop_assert!((est.grad_t - expected).amax() < 1e-12);
    }
}

#[test]
fn basis_orthonormal_under_quadrature() {
    let basis = basis16();
    let grid = basis.grid();
    let count = coefficient_count(basis.l_max());
    let mut gram = DMatrix::<f64>::zeros(count, count);
    for j in 0..grid.side() {
        let w = basis.node_weight(j);
        for k in 0..grid.side() {
            let y = nalgebra::DVector::from_column_slice(basis.node_values(j, k));
            gram += w * &y * y.transpose();
        }
    }
    assert!(max_abs(&(gram - DMatrix::identity(count, count))) < 1e-8);
}

#[test]
fn phase_correlation_all_shifts_below_quarter_dim() {
    let n = 16;
    let values: Vec<f64> = (0..n * n * n).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
    let g = VoxelGrid::from_values(cube_spec(n), values).unwrap();
    let f = dft3(&g);
    let q = (n / 4) as i64;
    for a in -q + 1..q {
        for b in -q + 1..q {
            for c in -q + 1..q {
                let est = phase_correlate(&f, &dft3(&g.circular_shifted([a, b, c]))).unwrap();
                let expected = -R * Vector3::new(a as f64, b as f64, c as f64);
                assert!((est.grad_t - expected).amax() < 1e-12, "shift {a},{b},{c}");
            }
        }
    }
}

#[test]
fn wigner_derivative_matches_central_differences() {
    let basis = basis16();
    let h = 1e-5;
    for axis in 0..3 {
        let e = Vector3::ith(axis, h);
        let plus = wigner_u(&exp_so3(&e), 15, basis).unwrap();
        let minus = wigner_u(&exp_so3(&-e), 15, basis).unwrap();
        let analytic = wigner_u_derivative(axis, 15);
        for l in 1..=15 {
            let fd = (plus.block(l) - minus.block(l)) / (2.0 * h);
            let scale = max_abs(&analytic[l]);
            assert!(max_abs(&(fd - &analytic[l])) <= 1e-4 * scale, "axis {axis}, l = {l}");
        }
    }
}
