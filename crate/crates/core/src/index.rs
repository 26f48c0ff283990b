//! ω-indices, nullities, iterated indices and mean indices of symplectic
//! paths generated by positive definite periodic systems.
//!
//! For a positive definite generator every crossing form is positive, so
//! `i_{τ,ω}(γ) = n·[ω = 1] + Σ_{0<t<τ} dim_C ker(γ(t) − ωI)`. Crossings
//! are located from the cached grid spectra and refined by golden-section
//! minimisation of the smallest singular value of `γ(t) − ωI`.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Result, SilError};
use crate::linalg::{angular_distance, shifted_singular_values, spectral_norm, unit_circle_angles, UnitPoint};
use crate::symplectic::{iterate_path, LinearSystem, SymplecticPath};

/// `(i, ν)` of a path at a unit-circle point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndexPair {
    pub index: i64,
    pub nullity: usize,
}

impl IndexPair {
    pub fn new(index: i64, nullity: usize) -> Self {
        Self { index, nullity }
    }
}

impl std::ops::Add for IndexPair {
    type Output = IndexPair;
    fn add(self, rhs: IndexPair) -> IndexPair {
        IndexPair { index: self.index + rhs.index, nullity: self.nullity + rhs.nullity }
    }
}

impl std::iter::Sum for IndexPair {
    fn sum<I: Iterator<Item = IndexPair>>(iter: I) -> IndexPair {
        iter.fold(IndexPair::new(0, 0), |a, b| a + b)
    }
}

/// An interior time at which `γ(t*)` has `ω` as an eigenvalue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingRecord {
    pub time: f64,
    pub omega: UnitPoint,
    pub multiplicity: usize,
    /// Whether golden-section refinement ran to the requested window.
    pub refined: bool,
    /// Some singular value sat within a factor 10 of the rank threshold.
    pub low_confidence: bool,
    pub smallest_singular_value: f64,
}

/// Sorted unit-circle sample points containing `1` and `−1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaGrid {
    points: Vec<UnitPoint>,
}

impl OmegaGrid {
    /// `resolution` equally spaced points (rounded up to an even count).
    pub fn uniform(resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(SilError::Domain("an ω grid needs at least two points".into()));
        }
        let res = resolution + resolution % 2;
        let points = (0..res)
            .map(|k| if 2 * k == res { UnitPoint::MINUS_ONE } else { UnitPoint::from_angle(TAU * k as f64 / res as f64) })
            .collect();
        Ok(Self { points })
    }

    /// Arbitrary angles; 0 and π are added when missing.
    pub fn from_angles(angles: &[f64]) -> Self {
        let mut pts: Vec<UnitPoint> = angles.iter().map(|&a| UnitPoint::from_angle(a)).collect();
        pts.push(UnitPoint::ONE);
        pts.push(UnitPoint::MINUS_ONE);
        pts.sort_by(|a, b| a.angle().total_cmp(&b.angle()));
        pts.dedup_by(|a, b| a.angle() == b.angle());
        Self { points: pts }
    }

    pub fn points(&self) -> &[UnitPoint] {
        &self.points
    }

    pub fn resolution(&self) -> usize {
        self.points.len()
    }
}

pub(crate) fn require_convex(path: &SymplecticPath) -> Result<&LinearSystem> {
    let sys = path
        .generator()
        .ok_or_else(|| SilError::Unsupported("index computation needs the generating system of the path".into()))?;
    if !sys.is_positive_definite() {
        return Err(SilError::Unsupported(
            "the generator is not positive definite; only convex systems are supported".into(),
        ));
    }
    let motion = path.step() * sys.sup_norm();
    if motion > PI / 8.0 {
        return Err(SilError::Resolution(format!(
            "grid step times sup‖B‖ is {motion:.3}, above π/8; integrate with at least {} steps per period",
            sys.recommended_steps(16)
        )));
    }
    Ok(sys)
}

fn rank_threshold(m: &DMatrix<f64>, tol: &Tolerances) -> f64 {
    tol.rank_tol * spectral_norm(m).max(1.0)
}

/// `dim_C ker(γ(τ) − ωI)` by singular-value thresholding.
pub fn nullity(path: &SymplecticPath, omega: UnitPoint, tol: &Tolerances) -> usize {
    matrix_nullity(path.end(), omega, tol)
}

pub fn matrix_nullity(m: &DMatrix<f64>, omega: UnitPoint, tol: &Tolerances) -> usize {
    let thr = rank_threshold(m, tol);
    shifted_singular_values(m, omega.value()).iter().filter(|&&s| s <= thr).count()
}

/// Minimise a function on `[a, b]` by golden-section search; the endpoints
/// are compared at the end so one-sided minima are found too.
fn golden_min(f: &dyn Fn(f64) -> f64, a: f64, b: f64, window: f64) -> (f64, f64, bool) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    let mut iters = 0;
    while hi - lo > window && iters < 200 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
        iters += 1;
    }
    let converged = hi - lo <= window;
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    for t in [a, b] {
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    (best.0, best.1, converged)
}

const ENDPOINT_PROBES: usize = 8;

/// All interior crossings of `ω` along the path, with multiplicity.
///
/// `σ(t) = σ_min(γ(t) − ωI)` is Lipschitz with constant at most
/// `sup‖B‖·sup‖γ‖`, so an interval `[a, b]` with `σ(a) + σ(b) > L(b − a)`
/// cannot contain a zero. Bisection with this test isolates every zero
/// (also pairs of nearby ones) into short clusters, each of which is then
/// refined by golden-section search.
pub fn find_crossings(path: &SymplecticPath, omega: UnitPoint, tol: &Tolerances) -> Result<Vec<CrossingRecord>> {
    let sys = require_convex(path)?;
    let w = omega.value();
    let steps = path.steps();
    let length = path.length();
    let sigma = |t: f64| shifted_singular_values(&path.at(t), w)[0];
    let grid_sigma: Vec<f64> = path.matrices().iter().map(|g| shifted_singular_values(g, w)[0]).collect();
    let growth = (path.step() * sys.sup_norm()).exp();
    let leaf = 1e-7 * length;

    let mut leaves: Vec<(f64, f64)> = Vec::new();
    for i in 0..steps {
        let norm = path.matrix(i).norm().max(path.matrix(i + 1).norm());
        let lip = 2.0 * sys.sup_norm() * norm * growth;
        let mut stack = vec![(path.time(i), path.time(i + 1), grid_sigma[i], grid_sigma[i + 1])];
        while let Some((a, b, sa, sb)) = stack.pop() {
            if sa + sb > lip * (b - a) {
                continue;
            }
            if b - a <= leaf {
                leaves.push((a, b));
                continue;
            }
            let mid = 0.5 * (a + b);
            let sm = sigma(mid);
            stack.push((mid, b, sm, sb));
            stack.push((a, mid, sa, sm));
        }
    }
    leaves.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut clusters: Vec<(f64, f64)> = Vec::new();
    for (a, b) in leaves {
        match clusters.last_mut() {
            Some(last) if a <= last.1 + 1e-12 * length => last.1 = last.1.max(b),
            _ => clusters.push((a, b)),
        }
    }

    let window = tol.crossing_window * length;
    let end_nullity = nullity(path, omega, tol);
    let mut found: Vec<CrossingRecord> = Vec::new();
    for (lo, hi) in clusters {
        if omega.is_one() && lo <= 0.0 {
            continue;
        }
        let (t, _, refined) = golden_min(&sigma, (lo - leaf).max(0.0), (hi + leaf).min(length), window);
        let g = path.at(t);
        let thr = rank_threshold(&g, tol);
        let sv = shifted_singular_values(&g, w);
        if sv[0] > thr {
            continue;
        }
        if omega.is_one() {
            let hugs_start =
                t <= 1e-9 * length || (1..=ENDPOINT_PROBES).all(|k| sigma(t * k as f64 / ENDPOINT_PROBES as f64) <= thr);
            if hugs_start {
                continue;
            }
        }
        if end_nullity > 0 {
            let hugs_end = length - t <= 1e-9 * length
                || (0..ENDPOINT_PROBES).all(|k| sigma(t + (length - t) * k as f64 / ENDPOINT_PROBES as f64) <= thr);
            if hugs_end {
                continue;
            }
        }
        if t >= length {
            continue;
        }
        found.push(CrossingRecord {
            time: t,
            omega,
            multiplicity: sv.iter().filter(|&&x| x <= thr).count(),
            refined,
            low_confidence: sv.iter().any(|&x| x > thr / 10.0 && x <= 10.0 * thr),
            smallest_singular_value: sv[0],
        });
    }

    let merge = 1e-6 * length;
    let mut merged: Vec<CrossingRecord> = Vec::new();
    for c in found {
        match merged.last_mut() {
            Some(last) if c.time - last.time <= merge => {
                if c.multiplicity > last.multiplicity
                    || (c.multiplicity == last.multiplicity && c.smallest_singular_value < last.smallest_singular_value)
                {
                    *last = c;
                }
            }
            _ => merged.push(c),
        }
    }
    Ok(merged)
}

/// `(i_{τ,ω}, ν_{τ,ω})` together with the crossing records behind it.
pub fn omega_index_with_crossings(
    path: &SymplecticPath,
    omega: UnitPoint,
    tol: &Tolerances,
) -> Result<(IndexPair, Vec<CrossingRecord>)> {
    let crossings = find_crossings(path, omega, tol)?;
    let base = if omega.is_one() { path.n() as i64 } else { 0 };
    let index = base + crossings.iter().map(|c| c.multiplicity as i64).sum::<i64>();
    Ok((IndexPair::new(index, nullity(path, omega, tol)), crossings))
}

pub fn omega_index(path: &SymplecticPath, omega: UnitPoint, tol: &Tolerances) -> Result<IndexPair> {
    omega_index_with_crossings(path, omega, tol).map(|(p, _)| p)
}

/// Maslov-type index `(i_τ, ν_τ)`: the ω-index at `ω = 1`.
pub fn maslov_index(path: &SymplecticPath, tol: &Tolerances) -> Result<IndexPair> {
    omega_index(path, UnitPoint::ONE, tol)
}

/// Ekeland index `(i_τ − n, ν_τ)`.
pub fn ekeland_index(path: &SymplecticPath, tol: &Tolerances) -> Result<IndexPair> {
    let p = maslov_index(path, tol)?;
    Ok(IndexPair::new(p.index - path.n() as i64, p.nullity))
}

/// `Σ_{ω^m = 1} (i_{τ,ω}, ν_{τ,ω})` evaluated root by root.
pub fn iterated_index_bott(path: &SymplecticPath, m: usize, tol: &Tolerances) -> Result<IndexPair> {
    if m == 0 {
        return Err(SilError::Domain("iteration count must be positive".into()));
    }
    let parts: Result<Vec<IndexPair>> =
        (0..m).into_par_iter().map(|k| omega_index(path, UnitPoint::root(UnitPoint::ONE, m, k), tol)).collect();
    Ok(parts?.into_iter().sum())
}

/// Maslov index of the `m`-fold iteration path.
pub fn iterated_index_direct(path: &SymplecticPath, m: usize, tol: &Tolerances) -> Result<IndexPair> {
    maslov_index(&iterate_path(path, m)?, tol)
}

/// `(i_{mτ}, ν_{mτ})` of the iterate, computed both ways; the two must agree.
pub fn iterated_index(path: &SymplecticPath, m: usize, tol: &Tolerances) -> Result<IndexPair> {
    let bott = iterated_index_bott(path, m, tol)?;
    let direct = iterated_index_direct(path, m, tol)?;
    if bott != direct {
        return Err(SilError::Consistency(format!(
            "iterate m = {m}: root sum gives {bott:?}, iteration path gives {direct:?}"
        )));
    }
    Ok(bott)
}

/// The full ω ↦ `(i_{τ,ω}, ν_{τ,ω})` function of one path.
///
/// The index is constant on the open arcs between unit-circle eigenvalue
/// angles of `γ(τ)`, so it is determined by its values at those angles and
/// one value per arc. This gives iterated indices, splitting numbers and the
/// mean index for any `m` without further path work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexProfile {
    n: usize,
    /// Sorted angles in `[0, 2π)`; the first is 0.
    breakpoints: Vec<f64>,
    at_break: Vec<IndexPair>,
    /// Index on the open arc from `breakpoints[j]` to the next breakpoint.
    on_arc: Vec<i64>,
}

/// Angle tolerance for a root of unity to count as sitting on a breakpoint.
const COINCIDENCE: f64 = 1e-9;

impl IndexProfile {
    pub fn build(path: &SymplecticPath, tol: &Tolerances) -> Result<Self> {
        require_convex(path)?;
        let mut breakpoints = unit_circle_angles(path.end(), tol.unit_circle_tol, tol.snap_tol);
        if breakpoints.first() != Some(&0.0) {
            breakpoints.insert(0, 0.0);
        }
        let r = breakpoints.len();
        let at_points: Vec<UnitPoint> = breakpoints
            .iter()
            .map(|&a| if a == PI { UnitPoint::MINUS_ONE } else { UnitPoint::from_angle(a) })
            .collect();
        let mid_points: Vec<UnitPoint> = (0..r)
            .map(|j| {
                let next = if j + 1 < r { breakpoints[j + 1] } else { TAU };
                UnitPoint::from_angle(0.5 * (breakpoints[j] + next))
            })
            .collect();
        let at_break: Result<Vec<IndexPair>> = at_points.par_iter().map(|&w| omega_index(path, w, tol)).collect();
        let on_arc: Result<Vec<IndexPair>> = mid_points.par_iter().map(|&w| omega_index(path, w, tol)).collect();
        let on_arc = on_arc?;
        if let Some(p) = on_arc.iter().find(|p| p.nullity != 0) {
            return Err(SilError::Resolution(format!(
                "arc sample has nullity {}; the eigenvalue angles of γ(τ) are not fully resolved",
                p.nullity
            )));
        }
        Ok(Self { n: path.n(), breakpoints, at_break: at_break?, on_arc: on_arc.into_iter().map(|p| p.index).collect() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    fn locate(&self, theta: f64) -> std::result::Result<usize, usize> {
        let theta = crate::linalg::wrap_angle(theta);
        for (j, &b) in self.breakpoints.iter().enumerate() {
            if angular_distance(theta, b) <= COINCIDENCE {
                return Ok(j);
            }
        }
        let j = self.breakpoints.iter().rposition(|&b| b < theta).unwrap_or(0);
        Err(j)
    }

    /// `(i_{τ,ω}, ν_{τ,ω})` at `ω = e^{iθ}`.
    pub fn at(&self, theta: f64) -> IndexPair {
        match self.locate(theta) {
            Ok(j) => self.at_break[j],
            Err(j) => IndexPair::new(self.on_arc[j], 0),
        }
    }

    /// `(S⁺, S⁻)` at `e^{iθ}`; `(0, 0)` away from the spectrum.
    pub fn splitting(&self, theta: f64) -> (i64, i64) {
        match self.locate(theta) {
            Ok(j) => {
                let here = self.at_break[j].index;
                let prev = if j == 0 { self.on_arc.len() - 1 } else { j - 1 };
                (self.on_arc[j] - here, self.on_arc[prev] - here)
            }
            Err(_) => (0, 0),
        }
    }

    /// Bott sum `Σ_{ω^m=1} (i_{τ,ω}, ν_{τ,ω})`, counting the roots of unity
    /// on each breakpoint and arc instead of visiting them one by one.
    pub fn iterate(&self, m: usize) -> IndexPair {
        assert!(m > 0, "iteration count must be positive");
        let mf = m as f64;
        let r = self.breakpoints.len();
        let scaled: Vec<f64> = self.breakpoints.iter().map(|&b| b * mf / TAU).collect();
        let eps = mf * COINCIDENCE / TAU;
        let hit: Vec<Option<i64>> = scaled
            .iter()
            .map(|&x| {
                let k = x.round();
                ((x - k).abs() <= eps).then_some(k as i64)
            })
            .collect();
        let mut total = IndexPair::new(0, 0);
        for j in 0..r {
            if hit[j].is_some() {
                total = total + self.at_break[j];
            }
            let start = match hit[j] {
                Some(k) => k + 1,
                None => scaled[j].ceil() as i64,
            };
            let end = if j + 1 < r {
                match hit[j + 1] {
                    Some(k) => k - 1,
                    None => scaled[j + 1].floor() as i64,
                }
            } else {
                m as i64 - 1
            };
            let count = (end - start + 1).max(0);
            total.index += count * self.on_arc[j];
        }
        total
    }

    /// Splitting numbers of `M^m` at `z = e^{iφ}` by the root sum.
    pub fn iterate_splitting(&self, m: usize, phi: f64) -> (i64, i64) {
        let z = UnitPoint::from_angle(phi);
        (0..m).map(|k| self.splitting(UnitPoint::root(z, m, k).angle())).fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
    }

    /// Exact circle average of the piecewise-constant ω-index.
    pub fn mean(&self) -> f64 {
        let r = self.breakpoints.len();
        (0..r)
            .map(|j| {
                let next = if j + 1 < r { self.breakpoints[j + 1] } else { TAU };
                self.on_arc[j] as f64 * (next - self.breakpoints[j])
            })
            .sum::<f64>()
            / TAU
    }
}

/// Outcome of the two mean-index estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanIndexReport {
    /// Midpoint quadrature of `(1/2π)∫ i_{τ,ω} dω` on the supplied grid.
    pub quadrature: f64,
    /// Exact arc-length average of the profile.
    pub exact: f64,
    /// `i_{kτ}/k` for `k = 1..=limit`.
    pub sequence: Vec<f64>,
    pub limit: usize,
    pub limit_estimate: f64,
    pub agree: bool,
}

/// Largest `k` the default limit estimate will use.
pub const MAX_MEAN_LIMIT: usize = 100_000;

/// Default `k` for the limit estimate: `|i_{kτ}/k − î| ≤ n/k`, so the
/// tolerance is guaranteed once `k ≥ n/mean_tol`, up to [`MAX_MEAN_LIMIT`].
pub fn default_mean_limit(n: usize, tol: &Tolerances) -> usize {
    let wanted = (n as f64 / tol.mean_tol).ceil();
    if wanted >= MAX_MEAN_LIMIT as f64 {
        MAX_MEAN_LIMIT
    } else {
        200usize.max(wanted as usize)
    }
}

/// Mean index by quadrature over `grid` and by the limit of `i_{kτ}/k`.
pub fn mean_index(path: &SymplecticPath, grid: &OmegaGrid, tol: &Tolerances) -> Result<MeanIndexReport> {
    let profile = IndexProfile::build(path, tol)?;
    mean_index_from_profile(&profile, grid, default_mean_limit(path.n(), tol), tol)
}

pub fn mean_index_from_profile(
    profile: &IndexProfile,
    grid: &OmegaGrid,
    limit: usize,
    tol: &Tolerances,
) -> Result<MeanIndexReport> {
    if limit == 0 {
        return Err(SilError::Domain("limit must be positive".into()));
    }
    let pts = grid.points();
    let mut quadrature = 0.0;
    for (j, p) in pts.iter().enumerate() {
        let a = p.angle();
        let b = if j + 1 < pts.len() { pts[j + 1].angle() } else { TAU + pts[0].angle() };
        quadrature += profile.at(0.5 * (a + b)).index as f64 * (b - a);
    }
    quadrature /= TAU;
    let sequence: Vec<f64> = (1..=limit).map(|k| profile.iterate(k).index as f64 / k as f64).collect();
    let limit_estimate = *sequence.last().expect("limit ≥ 1");
    let agree = (quadrature - limit_estimate).abs() <= tol.mean_tol;
    let report = MeanIndexReport { quadrature, exact: profile.mean(), sequence, limit, limit_estimate, agree };
    if !agree {
        return Err(SilError::Resolution(format!(
            "mean index estimates disagree: quadrature {quadrature:.6}, i_kτ/k at k = {limit} gives {limit_estimate:.6}; refine the ω grid or raise the limit"
        )));
    }
    Ok(report)
}

/// `i_τ(γ) ≥ n`, which holds for every positive definite generator.
pub fn check_positive_lower_bound(path: &SymplecticPath, tol: &Tolerances) -> Result<bool> {
    Ok(maslov_index(path, tol)?.index >= path.n() as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::integrate_fundamental;
    use nalgebra::DVector;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn mean_limit_is_capped() {
        assert_eq!(default_mean_limit(3, &tol()), 300);
        assert_eq!(default_mean_limit(1, &tol()), 200);
        assert_eq!(default_mean_limit(2, &Tolerances { mean_tol: 1e-12, ..tol() }), MAX_MEAN_LIMIT);
    }

    fn rotor(n: usize, tau: f64) -> SymplecticPath {
        let sys = LinearSystem::constant(DMatrix::identity(2 * n, 2 * n), tau, 1e-9).unwrap();
        let steps = sys.recommended_steps(256);
        integrate_fundamental(&sys, steps, &tol()).unwrap()
    }

    /// Crossing-count oracle for decoupled constant systems `B = diag(a, a)`
    /// per plane: plane `k` rotates at rate `a_k`, so `e^{iθ}` is hit at the
    /// times `t = (θ + 2πj)/a_k` and `e^{−iθ}` symmetrically.
    fn decoupled_oracle(rates: &[f64], tau: f64, theta: f64) -> (i64, usize) {
        let real = theta == 0.0 || theta == PI;
        let targets: Vec<(f64, usize)> = if real { vec![(theta, 2)] } else { vec![(theta, 1), (TAU - theta, 1)] };
        let mut index = if theta == 0.0 { rates.len() as i64 } else { 0 };
        let mut nullity = 0;
        for &a in rates {
            for &(target, mult) in &targets {
                for j in 0.. {
                    let t = (target + TAU * j as f64) / a;
                    if t > tau + 1e-9 {
                        break;
                    }
                    if t <= 1e-9 {
                        continue;
                    }
                    if (t - tau).abs() <= 1e-9 {
                        nullity += mult;
                    } else {
                        index += mult as i64;
                    }
                }
            }
        }
        (index, nullity)
    }

    #[test]
    fn rotor_indices_at_plus_and_minus_one() {
        let p = rotor(1, TAU);
        assert_eq!(omega_index(&p, UnitPoint::ONE, &tol()).unwrap(), IndexPair::new(1, 2));
        assert_eq!(omega_index(&p, UnitPoint::MINUS_ONE, &tol()).unwrap(), IndexPair::new(2, 0));
        let half = rotor(1, PI);
        assert_eq!(maslov_index(&half, &tol()).unwrap(), IndexPair::new(1, 0));
        let three = rotor(1, 3.0 * PI);
        assert_eq!(maslov_index(&three, &tol()).unwrap(), IndexPair::new(3, 0));
        assert_eq!(maslov_index(&rotor(2, TAU), &tol()).unwrap(), IndexPair::new(2, 4));
    }

    #[test]
    fn ekeland_shift() {
        assert_eq!(ekeland_index(&rotor(1, TAU), &tol()).unwrap(), IndexPair::new(0, 2));
        assert_eq!(ekeland_index(&rotor(1, 3.0 * PI), &tol()).unwrap(), IndexPair::new(2, 0));
        assert_eq!(ekeland_index(&rotor(1, 1.0), &tol()).unwrap().index, 0);
    }

    #[test]
    fn nullity_examples() {
        assert_eq!(nullity(&rotor(1, TAU), UnitPoint::ONE, &tol()), 2);
        assert_eq!(nullity(&rotor(1, PI), UnitPoint::ONE, &tol()), 0);
        assert_eq!(nullity(&rotor(1, PI), UnitPoint::MINUS_ONE, &tol()), 2);
    }

    #[test]
    fn iterated_rotor() {
        let p = rotor(1, TAU);
        assert_eq!(iterated_index(&p, 1, &tol()).unwrap(), maslov_index(&p, &tol()).unwrap());
        assert_eq!(iterated_index(&p, 2, &tol()).unwrap(), IndexPair::new(3, 2));
        assert_eq!(iterated_index(&p, 3, &tol()).unwrap(), IndexPair::new(5, 2));
    }

    #[test]
    fn decoupled_planes_match_oracle() {
        let rates = [1.0, 2f64.sqrt()];
        let tau = 7.3;
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![rates[0], rates[1], rates[0], rates[1]]));
        let sys = LinearSystem::constant(b, tau, 1e-9).unwrap();
        let p = integrate_fundamental(&sys, sys.recommended_steps(512), &tol()).unwrap();
        for theta in [0.0, 0.4, 1.3, PI, 4.0, 5.9] {
            let w = if theta == PI { UnitPoint::MINUS_ONE } else { UnitPoint::from_angle(theta) };
            let got = omega_index(&p, w, &tol()).unwrap();
            let (i, nu) = decoupled_oracle(&rates, tau, theta);
            assert_eq!((got.index, got.nullity), (i, nu), "θ = {theta}");
        }
    }

    #[test]
    fn profile_agrees_with_literal_evaluation() {
        let rates = [1.0, 3f64.sqrt()];
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![rates[0], rates[1], rates[0], rates[1]]));
        let sys = LinearSystem::constant(b, 5.0, 1e-9).unwrap();
        let p = integrate_fundamental(&sys, sys.recommended_steps(512), &tol()).unwrap();
        let prof = IndexProfile::build(&p, &tol()).unwrap();
        for theta in [0.0, 0.2, 1.0, 2.5, PI, 3.7, 6.0] {
            let w = if theta == PI { UnitPoint::MINUS_ONE } else { UnitPoint::from_angle(theta) };
            assert_eq!(prof.at(theta), omega_index(&p, w, &tol()).unwrap());
        }
        for m in 1..=5 {
            assert_eq!(prof.iterate(m), iterated_index(&p, m, &tol()).unwrap(), "m = {m}");
        }
    }

    #[test]
    fn rotor_mean_index() {
        let grid = OmegaGrid::uniform(1024).unwrap();
        let r = mean_index(&rotor(1, TAU), &grid, &tol()).unwrap();
        assert!((r.quadrature - 2.0).abs() <= 1e-2);
        assert!((r.exact - 2.0).abs() <= 1e-12);
        let r2 = mean_index(&rotor(2, TAU), &grid, &tol()).unwrap();
        assert!((r2.quadrature - 4.0).abs() <= 1e-2);
    }

    #[test]
    fn lower_bound_examples() {
        assert!(check_positive_lower_bound(&rotor(1, PI), &tol()).unwrap());
        assert!(check_positive_lower_bound(&rotor(1, 0.01), &tol()).unwrap());
    }

    #[test]
    fn non_convex_generator_rejected() {
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let sys = LinearSystem::constant(b, 1.0, 1e-9).unwrap();
        let p = integrate_fundamental(&sys, 64, &tol()).unwrap();
        assert!(matches!(maslov_index(&p, &tol()), Err(SilError::Unsupported(_))));
    }

    #[test]
    fn coarse_grid_is_a_resolution_error() {
        let sys = LinearSystem::constant(DMatrix::identity(2, 2) * 3.0, 10.0, 1e-9).unwrap();
        let p = integrate_fundamental(&sys, 200, &tol());
        if let Ok(p) = p {
            assert!(matches!(maslov_index(&p, &tol()), Err(SilError::Resolution(_))));
        }
    }

    #[test]
    fn grid_contains_plus_minus_one() {
        let g = OmegaGrid::uniform(7).unwrap();
        assert_eq!(g.resolution(), 8);
        assert!(g.points()[0].is_one());
        assert!(g.points()[4].is_minus_one());
    }
}
