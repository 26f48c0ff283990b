//! Small dense linear-algebra helpers shared by the path, index and
//! splitting modules. Matrices here are at most 8×8.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SilError};

/// The standard structure `J = (0 −I; I 0)` on `R^{2n}`.
pub fn standard_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for k in 0..n {
        j[(k, n + k)] = -1.0;
        j[(n + k, k)] = 1.0;
    }
    j
}

/// Apply `J` to a vector without forming the matrix: `J(p, q) = (−q, p)`.
pub fn apply_j(v: &[f64], out: &mut [f64]) {
    let n = v.len() / 2;
    for k in 0..n {
        out[k] = -v[n + k];
        out[n + k] = v[k];
    }
}

pub fn half_dimension(m: &DMatrix<f64>) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(SilError::Dimension(format!("matrix is {}×{}, expected square", m.nrows(), m.ncols())));
    }
    if m.nrows() == 0 || m.nrows() % 2 != 0 {
        return Err(SilError::Dimension(format!("matrix dimension {} is not a positive even number", m.nrows())));
    }
    Ok(m.nrows() / 2)
}

/// `‖MᵀJM − J‖_∞` (largest entry in absolute value).
pub fn symplectic_defect(m: &DMatrix<f64>) -> Result<f64> {
    let n = half_dimension(m)?;
    let j = standard_j(n);
    let d = m.transpose() * &j * m - &j;
    Ok(d.amax())
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Singular values of `M − ωI`, ascending.
pub fn shifted_singular_values(m: &DMatrix<f64>, omega: Complex64) -> Vec<f64> {
    let mut c = to_complex(m);
    for i in 0..c.nrows() {
        c[(i, i)] -= omega;
    }
    let mut s: Vec<f64> = c.singular_values().iter().copied().collect();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    m.complex_eigenvalues().iter().copied().collect()
}

pub fn matrix_power(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let mut acc = DMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        acc = &acc * m;
    }
    acc
}

/// Map an angle into `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Shortest angular distance between two angles.
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

/// A point `e^{iθ}` of the unit circle, stored by its angle in `[0, 2π)`.
///
/// Keeping the angle (rather than the complex value) makes `ω = 1` and
/// `ω = −1` exact, which matters for the base term of the index and for
/// roots of unity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitPoint {
    theta: f64,
}

impl UnitPoint {
    pub const ONE: UnitPoint = UnitPoint { theta: 0.0 };
    pub const MINUS_ONE: UnitPoint = UnitPoint { theta: PI };

    pub fn from_angle(theta: f64) -> Self {
        Self { theta: wrap_angle(theta) }
    }

    /// Build from a complex number, rejecting points off the circle.
    pub fn from_complex(z: Complex64) -> Result<Self> {
        if ((z.norm()) - 1.0).abs() > 1e-12 {
            return Err(SilError::Domain(format!("{z} is not on the unit circle (|z| = {})", z.norm())));
        }
        if z == Complex64::new(1.0, 0.0) {
            return Ok(Self::ONE);
        }
        if z == Complex64::new(-1.0, 0.0) {
            return Ok(Self::MINUS_ONE);
        }
        Ok(Self::from_angle(z.arg()))
    }

    /// The `k`-th of the `m` points `ω` with `ω^m = z`.
    pub fn root(z: UnitPoint, m: usize, k: usize) -> Self {
        if m == 1 {
            return z;
        }
        if z.theta == 0.0 && 2 * k == m {
            return Self::MINUS_ONE;
        }
        Self::from_angle((z.theta + TAU * k as f64) / m as f64)
    }

    pub fn angle(&self) -> f64 {
        self.theta
    }

    pub fn value(&self) -> Complex64 {
        if self.is_one() {
            Complex64::new(1.0, 0.0)
        } else if self.is_minus_one() {
            Complex64::new(-1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, self.theta)
        }
    }

    pub fn is_one(&self) -> bool {
        self.theta == 0.0
    }

    pub fn is_minus_one(&self) -> bool {
        self.theta == PI
    }

    pub fn rotated(&self, delta: f64) -> Self {
        Self::from_angle(self.theta + delta)
    }

    pub fn conj(&self) -> Self {
        Self::from_angle(-self.theta)
    }
}

/// Distinct angles of the unit-circle spectrum of `m`, sorted in `[0, 2π)`.
///
/// Eigenvalues within `unit_tol` of the circle count; so do eigenvalues
/// within `snap_tol` of ±1, since defective eigenvalues at ±1 split off
/// the circle by roughly the square root of the rounding error. Angles
/// within `snap_tol` of 0 or π are snapped exactly.
pub fn unit_circle_angles(m: &DMatrix<f64>, unit_tol: f64, snap_tol: f64) -> Vec<f64> {
    let one = Complex64::new(1.0, 0.0);
    let mut angles: Vec<f64> = eigenvalues(m)
        .into_iter()
        .filter(|l| (l.norm() - 1.0).abs() <= unit_tol || (l - one).norm() <= snap_tol || (l + one).norm() <= snap_tol)
        .map(|l| {
            let near_one = (l - one).norm() <= snap_tol;
            let near_minus_one = (l + one).norm() <= snap_tol;
            if near_one {
                0.0
            } else if near_minus_one {
                PI
            } else {
                wrap_angle(l.arg())
            }
        })
        .collect();
    angles.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<f64> = Vec::new();
    for a in angles {
        match out.last() {
            Some(&last) if (a - last).abs() <= 1e-6 => {}
            _ => out.push(a),
        }
    }
    if out.len() > 1 && TAU - out[out.len() - 1] <= 1e-6 && out[0] == 0.0 {
        out.pop();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j_squares_to_minus_identity() {
        let j = standard_j(3);
        let jj = &j * &j;
        assert!((jj + DMatrix::<f64>::identity(6, 6)).amax() < 1e-15);
    }

    #[test]
    fn apply_j_matches_matrix() {
        let v = [1.0, 2.0, 3.0, 4.0];
        let mut out = [0.0; 4];
        apply_j(&v, &mut out);
        let m = standard_j(2) * nalgebra::DVector::from_column_slice(&v);
        for i in 0..4 {
            assert_eq!(out[i], m[i]);
        }
    }

    #[test]
    fn odd_dimension_rejected() {
        assert!(matches!(symplectic_defect(&DMatrix::identity(3, 3)), Err(SilError::Dimension(_))));
    }

    #[test]
    fn roots_of_unity_are_exact_at_plus_minus_one() {
        assert!(UnitPoint::root(UnitPoint::ONE, 4, 2).is_minus_one());
        assert!(UnitPoint::root(UnitPoint::ONE, 4, 0).is_one());
        let r = UnitPoint::root(UnitPoint::MINUS_ONE, 2, 0);
        assert!((r.angle() - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn rotation_spectrum_angles() {
        let t: f64 = 1.0;
        let m = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let a = unit_circle_angles(&m, 1e-7, 1e-4);
        assert_eq!(a.len(), 2);
        assert!((a[0] - 1.0).abs() < 1e-12);
        assert!((a[1] - (TAU - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn jordan_block_at_one_snaps() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 3.0, 1.0]);
        assert_eq!(unit_circle_angles(&m, 1e-7, 1e-4), vec![0.0]);
    }
}
