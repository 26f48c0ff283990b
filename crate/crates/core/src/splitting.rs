//! Splitting numbers `S±_M(ω)` as one-sided jumps of the ω-index, the root
//! sum identity for iterates, and the bounds used in the proof of the
//! multiplicity count.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Result, SilError};
use crate::index::{maslov_index, nullity, omega_index, require_convex, IndexPair};
use crate::linalg::{angular_distance, unit_circle_angles, UnitPoint};
use crate::symplectic::{iterate_path, SymplecticPath};

/// `(S⁺, S⁻)` at a unit-circle point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplittingPair {
    pub s_plus: i64,
    pub s_minus: i64,
    pub omega: UnitPoint,
    /// Nullity of `γ(τ) − ωI`.
    pub nullity: usize,
    /// One-sided offset actually used; 0 when ω is off the spectrum.
    pub epsilon: f64,
}

impl SplittingPair {
    /// `0 ≤ S± ≤ ν`, and `S⁺ = S⁻` at `±1`.
    pub fn within_bounds(&self) -> bool {
        let nu = self.nullity as i64;
        let basic = (0..=nu).contains(&self.s_plus) && (0..=nu).contains(&self.s_minus);
        let real = !(self.omega.is_one() || self.omega.is_minus_one()) || self.s_plus == self.s_minus;
        basic && real
    }

    /// `S⁻_{+}(ω) = ν − S⁻(ω)`.
    pub fn s_minus_plus(&self) -> i64 {
        self.nullity as i64 - self.s_minus
    }
}

/// Offset for the one-sided limits at `ω`: below a fraction of the gaps
/// between eigenvalue angles of `γ(τ)` and of the distance from `ω` to
/// every other eigenvalue angle.
pub fn auto_epsilon(path: &SymplecticPath, omega: UnitPoint, tol: &Tolerances) -> f64 {
    let angles = unit_circle_angles(path.end(), tol.unit_circle_tol, tol.snap_tol);
    let mut eps: f64 = 1e-3;
    for (i, &a) in angles.iter().enumerate() {
        for &b in &angles[i + 1..] {
            eps = eps.min(angular_distance(a, b) / 8.0);
        }
        let d = angular_distance(a, omega.angle());
        if d > 1e-6 {
            eps = eps.min(d / 4.0);
        }
    }
    eps
}

fn side(omega: UnitPoint, delta: f64) -> UnitPoint {
    let r = omega.rotated(delta);
    if r.angle() == 0.0 || r.angle() == PI {
        // never land exactly on ±1 from a one-sided offset
        omega.rotated(delta * (1.0 + 1e-9))
    } else {
        r
    }
}

fn one_sided(path: &SymplecticPath, omega: UnitPoint, base: i64, eps: f64, tol: &Tolerances) -> Result<(i64, i64)> {
    let plus = omega_index(path, side(omega, eps), tol)?;
    let minus = omega_index(path, side(omega, -eps), tol)?;
    Ok((plus.index - base, minus.index - base))
}

/// `S±_M(ω)` for `M = γ(τ)`. `epsilon = None` picks the offset
/// automatically; the result is confirmed once with half the offset.
pub fn splitting_numbers(
    path: &SymplecticPath,
    omega: UnitPoint,
    epsilon: Option<f64>,
    tol: &Tolerances,
) -> Result<SplittingPair> {
    require_convex(path)?;
    let nu = nullity(path, omega, tol);
    if nu == 0 {
        return Ok(SplittingPair { s_plus: 0, s_minus: 0, omega, nullity: 0, epsilon: 0.0 });
    }
    let eps = match epsilon {
        Some(e) if e > 0.0 && e < PI => e,
        Some(e) => return Err(SilError::Domain(format!("splitting offset must lie in (0, π), got {e}"))),
        None => auto_epsilon(path, omega, tol),
    };
    let base = omega_index(path, omega, tol)?.index;
    let first = one_sided(path, omega, base, eps, tol)?;
    let second = one_sided(path, omega, base, eps / 2.0, tol)?;
    if first != second {
        return Err(SilError::Resolution(format!(
            "splitting numbers at θ = {:.9} change under offset halving: {first:?} at ε = {eps:.3e}, {second:?} at ε/2",
            omega.angle()
        )));
    }
    Ok(SplittingPair { s_plus: first.0, s_minus: first.1, omega, nullity: nu, epsilon: eps })
}

/// As [`splitting_numbers`] for a complex `ω`, which must lie on the circle.
pub fn splitting_numbers_at(
    path: &SymplecticPath,
    omega: Complex64,
    epsilon: Option<f64>,
    tol: &Tolerances,
) -> Result<SplittingPair> {
    splitting_numbers(path, UnitPoint::from_complex(omega)?, epsilon, tol)
}

/// Splitting numbers at every unit-circle eigenvalue angle of `γ(τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplittingProfile {
    pub entries: Vec<SplittingPair>,
}

impl SplittingProfile {
    pub fn get(&self, theta: f64) -> Option<&SplittingPair> {
        self.entries.iter().find(|e| angular_distance(e.omega.angle(), theta) <= 1e-9)
    }
}

fn eigen_points(path: &SymplecticPath, tol: &Tolerances) -> Vec<UnitPoint> {
    unit_circle_angles(path.end(), tol.unit_circle_tol, tol.snap_tol)
        .into_iter()
        .map(|a| if a == PI { UnitPoint::MINUS_ONE } else { UnitPoint::from_angle(a) })
        .collect()
}

pub fn splitting_profile(path: &SymplecticPath, tol: &Tolerances) -> Result<SplittingProfile> {
    let entries: Result<Vec<SplittingPair>> =
        eigen_points(path, tol).into_par_iter().map(|w| splitting_numbers(path, w, None, tol)).collect();
    Ok(SplittingProfile { entries: entries? })
}

/// Both sides of `S±_{M^m}(z) = Σ_{ω^m = z} S±_M(ω)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BottEvidence {
    pub m: usize,
    pub z: UnitPoint,
    pub lhs: (i64, i64),
    pub rhs: (i64, i64),
    pub equal: bool,
}

pub fn bott_splitting_check(path: &SymplecticPath, m: usize, z: UnitPoint, tol: &Tolerances) -> Result<BottEvidence> {
    if m == 0 {
        return Err(SilError::Domain("iteration count must be positive".into()));
    }
    let iterate = iterate_path(path, m)?;
    let left = splitting_numbers(&iterate, z, None, tol)?;
    let parts: Result<Vec<SplittingPair>> = (0..m)
        .into_par_iter()
        .map(|k| splitting_numbers(path, UnitPoint::root(z, m, k), None, tol))
        .collect();
    let rhs = parts?.iter().fold((0, 0), |acc, p| (acc.0 + p.s_plus, acc.1 + p.s_minus));
    let lhs = (left.s_plus, left.s_minus);
    Ok(BottEvidence { m, z, lhs, rhs, equal: lhs == rhs })
}

/// The points `z` at which the root sum identity is informative: every
/// unit-circle eigenvalue angle of `γ(τ)^m`, together with `±1`.
pub fn bott_test_points(path: &SymplecticPath, m: usize, tol: &Tolerances) -> Result<Vec<UnitPoint>> {
    let iterate = iterate_path(path, m)?;
    let mut pts = eigen_points(&iterate, tol);
    for w in [UnitPoint::ONE, UnitPoint::MINUS_ONE] {
        if !pts.contains(&w) {
            pts.push(w);
        }
    }
    pts.sort_by(|a, b| a.angle().total_cmp(&b.angle()));
    Ok(pts)
}

/// `Σ_{θ∈(0,π)} S⁻_M(e^{iθ}) + S⁻_{+,M}(1) + S⁻_{+,M}(−1)` and whether it is `≤ n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KreinBound {
    pub sum: i64,
    pub n: usize,
    pub holds: bool,
    pub terms: Vec<(f64, i64)>,
}

pub fn krein_sum_bound(path: &SymplecticPath, tol: &Tolerances) -> Result<KreinBound> {
    let profile = splitting_profile(path, tol)?;
    let mut terms = Vec::new();
    for e in &profile.entries {
        let a = e.omega.angle();
        if e.omega.is_one() || e.omega.is_minus_one() {
            terms.push((a, e.s_minus_plus()));
        } else if a > 0.0 && a < PI {
            terms.push((a, e.s_minus));
        }
    }
    let sum = terms.iter().map(|t| t.1).sum();
    Ok(KreinBound { sum, n: path.n(), holds: sum <= path.n() as i64, terms })
}

/// Terms of `i_{2τ}(γ̃) + 2S⁺_{M²}(1) − ν_{2τ}(γ̃) ≥ n`, checked when `i_τ(γ) ≥ n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma41Evidence {
    pub applicable: bool,
    pub base: IndexPair,
    pub double: IndexPair,
    pub s_plus_double_at_one: i64,
    pub lhs: i64,
    pub n: usize,
    pub holds: bool,
}

pub fn lemma41_check(path: &SymplecticPath, tol: &Tolerances) -> Result<Lemma41Evidence> {
    let base = maslov_index(path, tol)?;
    let n = path.n();
    let doubled = iterate_path(path, 2)?;
    let double = maslov_index(&doubled, tol)?;
    let s = splitting_numbers(&doubled, UnitPoint::ONE, None, tol)?.s_plus;
    let lhs = double.index + 2 * s - double.nullity as i64;
    let applicable = base.index >= n as i64;
    Ok(Lemma41Evidence {
        applicable,
        base,
        double,
        s_plus_double_at_one: s,
        lhs,
        n,
        holds: !applicable || lhs >= n as i64,
    })
}

/// Mirror relation `S±(ω̄) = S∓(ω)`.
pub fn conjugation_mirror_holds(path: &SymplecticPath, omega: UnitPoint, tol: &Tolerances) -> Result<bool> {
    let a = splitting_numbers(path, omega, None, tol)?;
    let b = splitting_numbers(path, omega.conj(), None, tol)?;
    Ok(a.s_plus == b.s_minus && a.s_minus == b.s_plus)
}
