//! Wigner matrices and their real-basis conjugates `U^l(R)`.
//!
//! `d^l_{m'm}(beta) = <l m'| exp(-i beta J_y) |l m>` and
//! `D^l_{m'm}(alpha, beta, gamma) = exp(-i m' alpha) d^l_{m'm}(beta) exp(-i m gamma)`
//! for `R = Rz(alpha) Ry(beta) Rz(gamma)`. With Condon-Shortley harmonics,
//! `Y_l^m(R^T x) = sum_m' Y_l^m'(x) D^l_{m'm}(R)`, so coefficients transform
//! as `G = D F`, and in the real basis `G^l = U^l(R) F^l` with
//! `U^l = conj(T^l) D^l (T^l)^T`.
//!
//! Small-d matrices come from the three-term recurrence in `l` for each
//! `(m', m)` pair, seeded at `l = max(|m'|, |m|)` where the closed-form sum
//! has a single term.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harmonics::{real_basis_change, RealShBasis, MAX_DEGREE};
use crate::transform::{is_rotation, matrix_to_zyz};

fn ln_factorial(n: i64) -> f64 {
    debug_assert!(n >= 0);
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Closed-form (factorial sum) `d^l_{m'm}(beta)`. Exact in principle but
/// loses accuracy to cancellation for large `l`; the recursion only uses it
/// where the sum has one term.
pub fn wigner_d_direct(l: i64, mp: i64, m: i64, beta: f64) -> f64 {
    let (s, c) = (beta / 2.0).sin_cos();
    let k_lo = 0.max(m - mp);
    let k_hi = (l + m).min(l - mp);
    let half = 0.5 * (ln_factorial(l + m) + ln_factorial(l - m) + ln_factorial(l + mp) + ln_factorial(l - mp));
    let mut sum = 0.0;
    for k in k_lo..=k_hi {
        let denom = ln_factorial(l + m - k) + ln_factorial(k) + ln_factorial(l - k - mp) + ln_factorial(k - m + mp);
        let sign = if (k - m + mp).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let cp = (2 * l - 2 * k + m - mp) as i32;
        let sp = (2 * k - m + mp) as i32;
        sum += sign * (half - denom).exp() * c.powi(cp) * s.powi(sp);
    }
    sum
}

/// `d^l(beta)` for `l = 0..=l_max`; entry `(m' + l, m + l)`.
pub fn wigner_small_d(l_max: usize, beta: f64) -> Vec<DMatrix<f64>> {
    let lm = l_max as i64;
    let mut out: Vec<DMatrix<f64>> = (0..=l_max).map(|l| DMatrix::zeros(2 * l + 1, 2 * l + 1)).collect();
    let x = beta.cos();
    for mp in -lm..=lm {
        for m in -lm..=lm {
            let l0 = mp.abs().max(m.abs());
            let mut prev = 0.0;
            let mut cur = wigner_d_direct(l0, mp, m, beta);
            out[l0 as usize][((mp + l0) as usize, (m + l0) as usize)] = cur;
            let mm = (m * mp) as f64;
            let m2 = (m * m) as f64;
            let mp2 = (mp * mp) as f64;
            for l in l0..lm {
                let lf = l as f64;
                let next_l = lf + 1.0;
                let up = ((next_l * next_l - m2) * (next_l * next_l - mp2)).sqrt() / (next_l * (2.0 * lf + 1.0));
                let down = if l == l0 {
                    0.0
                } else {
                    ((lf * lf - m2) * (lf * lf - mp2)).sqrt() / (lf * (2.0 * lf + 1.0))
                };
                let middle = if l == 0 { 0.0 } else { mm / (lf * (lf + 1.0)) };
                let next = ((x - middle) * cur - down * prev) / up;
                prev = cur;
                cur = next;
                let lu = (l + 1) as usize;
                out[lu][((mp + l + 1) as usize, (m + l + 1) as usize)] = cur;
            }
        }
    }
    out
}

/// Complex Wigner `D^l(R)` for `l = 0..=l_max`.
pub fn wigner_big_d(r: &Matrix3<f64>, l_max: usize) -> Vec<DMatrix<Complex64>> {
    let e = matrix_to_zyz(r);
    let small = wigner_small_d(l_max, e.beta);
    small
        .into_iter()
        .enumerate()
        .map(|(l, d)| {
            let n = 2 * l + 1;
            DMatrix::from_fn(n, n, |i, j| {
                let mp = i as f64 - l as f64;
                let m = j as f64 - l as f64;
                Complex64::from_polar(d[(i, j)], -(mp * e.alpha + m * e.gamma))
            })
        })
        .collect()
}

/// Real rotation blocks `U^l(R)`, `l = 0..=l_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerBlocks {
    blocks: Vec<DMatrix<f64>>,
}

impl WignerBlocks {
    pub fn l_max(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn block(&self, l: usize) -> &DMatrix<f64> {
        &self.blocks[l]
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }
}

/// Largest imaginary part left after the real-basis conjugation.
pub fn real_conjugation_residue(r: &Matrix3<f64>, l_max: usize) -> f64 {
    wigner_big_d(r, l_max)
        .iter()
        .enumerate()
        .map(|(l, d)| {
            let t = real_basis_change(l);
            let u = t.map(|c| c.conj()) * d * t.transpose();
            u.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn check_rotation(r: &Matrix3<f64>) -> Result<()> {
    if is_rotation(r, 1e-6) {
        Ok(())
    } else {
        Err(Error::Validation("wigner_u needs a rotation matrix".into()))
    }
}

/// `U^l(R) = conj(T^l) D^l(R) (T^l)^T` for `l = 0..=l_max`.
pub fn wigner_u(r: &Matrix3<f64>, l_max: usize, basis: &RealShBasis) -> Result<WignerBlocks> {
    check_rotation(r)?;
    if l_max > basis.l_max() {
        return Err(Error::DegreeMismatch(l_max, basis.l_max()));
    }
    let blocks = wigner_big_d(r, l_max)
        .iter()
        .enumerate()
        .map(|(l, d)| {
            let t = basis.basis_change(l);
            (t.map(|c| c.conj()) * d * t.transpose()).map(|c| c.re)
        })
        .collect();
    Ok(WignerBlocks { blocks })
}

/// Angular momentum matrix `J_k` (`k` = 0, 1, 2 for x, y, z) in the `|l m>` basis.
pub fn angular_momentum(l: usize, axis: usize) -> DMatrix<Complex64> {
    let n = 2 * l + 1;
    let lf = l as f64;
    let mut plus = DMatrix::from_element(n, n, Complex64::default());
    for col in 0..n - 1 {
        let m = col as f64 - lf;
        plus[(col + 1, col)] = Complex64::new((lf * (lf + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
    }
    let minus = plus.adjoint();
    match axis {
        0 => (&plus + &minus) * Complex64::new(0.5, 0.0),
        1 => (&plus - &minus) * Complex64::new(0.0, -0.5),
        2 => DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(i as f64 - lf, 0.0)
            } else {
                Complex64::default()
            }
        }),
        _ => panic!("axis must be 0, 1 or 2"),
    }
}

/// Derivative blocks `u^l(e_k) = d/de U^l(exp(e hat(e_k)))` at `e = 0`,
/// `l = 0..=l_max`. In the complex basis this is `-i J_k`.
pub fn wigner_u_derivative(axis: usize, l_max: usize) -> Vec<DMatrix<f64>> {
    assert!(axis < 3, "axis must be 0, 1 or 2");
    assert!(l_max <= MAX_DEGREE);
    (0..=l_max)
        .map(|l| {
            let t = real_basis_change(l);
            let gen = angular_momentum(l, axis) * Complex64::new(0.0, -1.0);
            (t.map(|c| c.conj()) * gen * t.transpose()).map(|c| c.re)
        })
        .collect()
}
