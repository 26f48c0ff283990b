//! Closed characteristics: periodic solutions of `ẋ = J∇H_α(x)` on the
//! level `H_α = 1`, stored as trigonometric polynomials.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::body::{hamiltonian_gradient, hamiltonian_hessian, resonant_pairs, ConvexBody};
use crate::config::Tolerances;
use crate::error::{Result, SilError};
use crate::linalg::apply_j;
use crate::symplectic::LinearSystem;

/// A closed curve of period 1: `c(s) = Σ_j cos_j cos(2πjs) + sin_j sin(2πjs)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierCurve {
    dim: usize,
    cos: Vec<Vec<f64>>,
    sin: Vec<Vec<f64>>,
}

impl FourierCurve {
    /// Coefficients for `j = 0..=K`; `sin[0]` is ignored.
    pub fn new(cos: Vec<Vec<f64>>, sin: Vec<Vec<f64>>) -> Result<Self> {
        if cos.is_empty() || cos.len() != sin.len() {
            return Err(SilError::Dimension("cosine and sine coefficient lists differ in length".into()));
        }
        let dim = cos[0].len();
        if cos.iter().chain(sin.iter()).any(|c| c.len() != dim) {
            return Err(SilError::Dimension("coefficient vectors differ in length".into()));
        }
        let mut sin = sin;
        sin[0] = vec![0.0; dim];
        Ok(Self { dim, cos, sin })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest mode `K`.
    pub fn modes(&self) -> usize {
        self.cos.len() - 1
    }

    pub fn cos_coeff(&self, j: usize) -> &[f64] {
        &self.cos[j]
    }

    pub fn sin_coeff(&self, j: usize) -> &[f64] {
        &self.sin[j]
    }

    pub fn eval(&self, s: f64) -> DVector<f64> {
        let mut out = DVector::from_column_slice(&self.cos[0]);
        for j in 1..self.cos.len() {
            let (sn, cs) = (TAU * j as f64 * s).sin_cos();
            for c in 0..self.dim {
                out[c] += self.cos[j][c] * cs + self.sin[j][c] * sn;
            }
        }
        out
    }

    /// `dc/ds`.
    pub fn deriv(&self, s: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for j in 1..self.cos.len() {
            let w = TAU * j as f64;
            let (sn, cs) = (w * s).sin_cos();
            for c in 0..self.dim {
                out[c] += w * (self.sin[j][c] * cs - self.cos[j][c] * sn);
            }
        }
        out
    }

    /// `c(· + ds)`.
    pub fn shifted(&self, ds: f64) -> Self {
        let mut out = self.clone();
        for j in 1..self.cos.len() {
            let (sn, cs) = (TAU * j as f64 * ds).sin_cos();
            for c in 0..self.dim {
                let (a, b) = (self.cos[j][c], self.sin[j][c]);
                out.cos[j][c] = a * cs + b * sn;
                out.sin[j][c] = b * cs - a * sn;
            }
        }
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        let f = |v: &Vec<Vec<f64>>| v.iter().map(|c| c.iter().map(|x| x * k).collect()).collect();
        Self { dim: self.dim, cos: f(&self.cos), sin: f(&self.sin) }
    }

    /// `s ↦ c(m s)`: the same curve traversed `m` times.
    pub fn repeated(&self, m: usize) -> Self {
        let k = self.modes() * m;
        let mut cos = vec![vec![0.0; self.dim]; k + 1];
        let mut sin = vec![vec![0.0; self.dim]; k + 1];
        for j in 0..=self.modes() {
            cos[j * m] = self.cos[j].clone();
            sin[j * m] = self.sin[j].clone();
        }
        Self { dim: self.dim, cos, sin }
    }

    /// `Σ_c (cos_j[c]² + sin_j[c]²)`.
    pub fn mode_energy(&self, j: usize) -> f64 {
        self.cos[j].iter().chain(self.sin[j].iter()).map(|x| x * x).sum()
    }

    /// `count` equally spaced samples on `[0, 1)`.
    pub fn sample(&self, count: usize) -> Vec<DVector<f64>> {
        (0..count).map(|i| self.eval(i as f64 / count as f64)).collect()
    }

    /// Least-squares trigonometric fit of `K` modes to `samples` (uniform
    /// on `[0, 1)`, more than `2K` of them).
    pub fn from_samples(samples: &[DVector<f64>], k: usize) -> Result<Self> {
        let q = samples.len();
        if q <= 2 * k {
            return Err(SilError::Domain(format!("{q} samples cannot determine {k} modes")));
        }
        let dim = samples[0].len();
        let mut cos = vec![vec![0.0; dim]; k + 1];
        let mut sin = vec![vec![0.0; dim]; k + 1];
        for (i, x) in samples.iter().enumerate() {
            let s = i as f64 / q as f64;
            for j in 0..=k {
                let (sn, cs) = (TAU * j as f64 * s).sin_cos();
                let w = if j == 0 { 1.0 } else { 2.0 };
                for c in 0..dim {
                    cos[j][c] += w * x[c] * cs / q as f64;
                    sin[j][c] += w * x[c] * sn / q as f64;
                }
            }
        }
        Self::new(cos, sin)
    }
}

/// Whether `O(x) = O(−x)` (with `x(t + τ/2) = −x(t)`) or the two orbits
/// are disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SymmetryClass {
    Symmetric,
    Asymmetric,
}

/// Evidence that `τ` is the minimal period: for each divisor `d ≥ 2` the
/// closure defect `max_t |x(t + τ/d) − x(t)|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimalPeriod {
    pub minimal: bool,
    pub defects: Vec<(usize, f64)>,
}

/// A closed characteristic in the `H_α` parametrisation: `ẋ = J∇H_α(x)`,
/// `H_α(x(t)) = 1`, period `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedCharacteristic {
    pub tau: f64,
    pub alpha: f64,
    /// `x(t) = curve(t/τ)`.
    pub curve: FourierCurve,
    pub action: f64,
    pub minimal_period: MinimalPeriod,
    pub symmetry: Option<SymmetryClass>,
    /// Period of the same orbit parametrised by `ẋ = J N_Σ(x)`.
    pub surface_period: f64,
}

const CHECK_SAMPLES: usize = 512;

impl ClosedCharacteristic {
    /// Validate a candidate against the body and record its derived data.
    pub fn new(body: &ConvexBody, alpha: f64, tau: f64, curve: FourierCurve, tol: &Tolerances) -> Result<Self> {
        if curve.dim() != body.dim() {
            return Err(SilError::Dimension("curve and body dimensions differ".into()));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(SilError::Domain(format!("period must be positive, got {tau}")));
        }
        let mut x = Self {
            tau,
            alpha,
            curve,
            action: 0.0,
            minimal_period: MinimalPeriod { minimal: true, defects: Vec::new() },
            symmetry: None,
            surface_period: 0.0,
        };
        let surf = x.surface_error(body);
        if surf > tol.surface_tol {
            return Err(SilError::NotASolution(format!("curve leaves Σ: max |j(x) − 1| = {surf:.3e}")));
        }
        let res = x.residual(body);
        if res > tol.orbit_tol {
            return Err(SilError::NotASolution(format!("residual of ẋ = J N(x) is {res:.3e}")));
        }
        x.action = action(&x);
        if !(x.action > 0.0) {
            return Err(SilError::NotASolution(format!("action {} is not positive", x.action)));
        }
        x.minimal_period = minimal_period_evidence(&x, tol);
        x.surface_period = x.compute_surface_period(body);
        Ok(x)
    }

    pub fn n(&self) -> usize {
        self.curve.dim() / 2
    }

    pub fn x(&self, t: f64) -> DVector<f64> {
        self.curve.eval(t / self.tau)
    }

    pub fn xdot(&self, t: f64) -> DVector<f64> {
        self.curve.deriv(t / self.tau) / self.tau
    }

    /// `count + 1` samples on `[0, τ]`, first and last equal.
    pub fn samples(&self, count: usize) -> Vec<DVector<f64>> {
        let mut s = self.curve.sample(count);
        s.push(s[0].clone());
        s
    }

    /// `max_i |j_C(x(t_i)) − 1|`.
    pub fn surface_error(&self, body: &ConvexBody) -> f64 {
        self.curve.sample(CHECK_SAMPLES).iter().map(|x| (body.gauge(x) - 1.0).abs()).fold(0.0, f64::max)
    }

    /// `max_i |ẋ/(α j^{α−1}|∇j|) − J∇j/|∇j||`: the equation `ẋ = J N_Σ(x)`
    /// after the time change between the two parametrisations.
    pub fn residual(&self, body: &ConvexBody) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..CHECK_SAMPLES {
            let t = self.tau * i as f64 / CHECK_SAMPLES as f64;
            let x = self.x(t);
            let Ok(g) = body.gauge_grad(&x) else { return f64::INFINITY };
            let j = body.gauge(&x);
            let gn = g.norm();
            let mut jn = vec![0.0; g.len()];
            apply_j(g.as_slice(), &mut jn);
            let speed = self.alpha * j.powf(self.alpha - 1.0) * gn;
            let v = self.xdot(t) / speed;
            let r = (v - DVector::from_vec(jn) / gn).norm();
            worst = worst.max(r);
        }
        worst
    }

    fn compute_surface_period(&self, body: &ConvexBody) -> f64 {
        let q = CHECK_SAMPLES;
        (0..q)
            .map(|i| {
                let x = self.x(self.tau * i as f64 / q as f64);
                let g = body.gauge_grad(&x).map(|g| g.norm()).unwrap_or(0.0);
                self.alpha * body.gauge(&x).powf(self.alpha - 1.0) * g
            })
            .sum::<f64>()
            * self.tau
            / q as f64
    }

    /// `(τ, −x)`.
    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.curve = self.curve.scaled(-1.0);
        out
    }

    /// Shift the time origin by `s` (in units of time).
    pub fn time_shifted(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.curve = self.curve.shifted(s / self.tau);
        out
    }

    /// Largest `|x(t)|`, a scale for distances between orbits.
    pub fn radius(&self) -> f64 {
        self.curve.sample(256).iter().map(|x| x.norm()).fold(0.0, f64::max)
    }
}

/// `A(τ, x) = ½∫₀^τ (−Jẋ, x) dt`, by the trapezoid rule (exact for the
/// trigonometric polynomial once the grid exceeds twice the mode count).
pub fn action(x: &ClosedCharacteristic) -> f64 {
    let q = 8 * (x.curve.modes() + 1).max(16);
    let mut total = 0.0;
    let mut jv = vec![0.0; x.curve.dim()];
    for i in 0..q {
        let s = i as f64 / q as f64;
        let d = x.curve.deriv(s);
        apply_j(d.as_slice(), &mut jv);
        let p = x.curve.eval(s);
        total -= jv.iter().zip(p.iter()).map(|(a, b)| a * b).sum::<f64>();
    }
    0.5 * total / q as f64
}

fn minimal_period_evidence(x: &ClosedCharacteristic, tol: &Tolerances) -> MinimalPeriod {
    let scale = x.radius().max(1e-300);
    let samples = 128;
    let mut defects = Vec::new();
    let mut minimal = true;
    for d in 2..=8 {
        let defect = (0..samples)
            .map(|i| {
                let s = i as f64 / samples as f64;
                (x.curve.eval(s + 1.0 / d as f64) - x.curve.eval(s)).norm()
            })
            .fold(0.0, f64::max);
        if defect <= tol.orbit_tol * scale {
            minimal = false;
        }
        defects.push((d, defect));
    }
    MinimalPeriod { minimal, defects }
}

/// The `n` planar circles of `E_n(r)`, with any resonant pairs of radii.
#[derive(Debug, Clone)]
pub struct EllipsoidOrbits {
    pub orbits: Vec<ClosedCharacteristic>,
    pub warnings: Vec<String>,
}

/// Closed characteristics of `E_n(r) = {Σ|x_k|²/(2r_k²) = 1}`: in plane
/// `k` the circle of radius `√2 r_k` turning at angular speed `α/(2r_k²)`,
/// so `τ_k = 4π r_k²/α`.
pub fn ellipsoid_characteristics(radii: &[f64], alpha: f64, tol: &Tolerances) -> Result<EllipsoidOrbits> {
    crate::body::check_alpha(alpha)?;
    let body = ConvexBody::ellipsoid(radii)?;
    let n = radii.len();
    let mut orbits = Vec::with_capacity(n);
    for (k, &r) in radii.iter().enumerate() {
        let big_r = 2f64.sqrt() * r;
        let mut cos = vec![vec![0.0; 2 * n]; 2];
        let mut sin = vec![vec![0.0; 2 * n]; 2];
        cos[1][k] = big_r;
        sin[1][k + n] = big_r;
        let curve = FourierCurve::new(cos, sin)?;
        let tau = 4.0 * PI * r * r / alpha;
        let mut x = ClosedCharacteristic::new(&body, alpha, tau, curve, tol)?;
        x.symmetry = Some(SymmetryClass::Symmetric);
        orbits.push(x);
    }
    let warnings = resonant_pairs(radii)
        .into_iter()
        .map(|(j, k, p, q)| {
            format!("resonant ellipsoid: r_{}²/r_{}² = {p}/{q}; closed characteristics form continua, only the planar ones are reported", k + 1, j + 1)
        })
        .collect();
    Ok(EllipsoidOrbits { orbits, warnings })
}

/// `sup_t |x(t) − y(t + s)|` minimised over shifts `s`, on a grid of `shifts`
/// shifts refined by golden section. Both curves must share the period.
pub fn shift_distance(x: &FourierCurve, y: &FourierCurve, shifts: usize) -> (f64, f64) {
    let samples = 128;
    let xs = x.sample(samples);
    let dist = |s: f64| -> f64 {
        xs.iter()
            .enumerate()
            .map(|(i, p)| (p - y.eval(i as f64 / samples as f64 + s)).norm())
            .fold(0.0, f64::max)
    };
    let mut best = (0.0, f64::INFINITY);
    for i in 0..shifts {
        let s = i as f64 / shifts as f64;
        let d = dist(s);
        if d < best.1 {
            best = (s, d);
        }
    }
    let h = 1.0 / shifts as f64;
    let (mut lo, mut hi) = (best.0 - h, best.0 + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if dist(a) <= dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let s = 0.5 * (lo + hi);
    let d = dist(s);
    if d < best.1 {
        (s.rem_euclid(1.0), d)
    } else {
        best
    }
}

/// Normalised L² distance `‖x − y(·+s)‖/‖x‖` minimised over a shift grid
/// with golden-section refinement.
pub fn l2_shift_distance(x: &FourierCurve, y: &FourierCurve, shifts: usize) -> f64 {
    let samples = 128;
    let xs = x.sample(samples);
    let norm = (xs.iter().map(|p| p.norm_squared()).sum::<f64>() / samples as f64).sqrt().max(1e-300);
    let dist = |s: f64| -> f64 {
        let sq: f64 = xs
            .iter()
            .enumerate()
            .map(|(i, p)| (p - y.eval(i as f64 / samples as f64 + s)).norm_squared())
            .sum();
        (sq / samples as f64).sqrt() / norm
    };
    let mut best = (0.0, f64::INFINITY);
    for i in 0..shifts {
        let s = i as f64 / shifts as f64;
        let d = dist(s);
        if d < best.1 {
            best = (s, d);
        }
    }
    let h = 1.0 / shifts as f64;
    let (mut lo, mut hi) = (best.0 - h, best.0 + h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let a = hi - g * (hi - lo);
        let b = lo + g * (hi - lo);
        if dist(a) <= dist(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    best.1.min(dist(0.5 * (lo + hi)))
}

/// Whether two characteristics trace the same geometric orbit (same period,
/// same curve up to a time shift, and up to sign when `allow_flip`).
pub fn same_orbit(x: &ClosedCharacteristic, y: &ClosedCharacteristic, allow_flip: bool, threshold: f64) -> bool {
    if (x.tau - y.tau).abs() > 1e-6 * x.tau.max(y.tau) {
        return false;
    }
    if l2_shift_distance(&x.curve, &y.curve, 256) <= threshold {
        return true;
    }
    allow_flip && l2_shift_distance(&x.curve, &y.curve.scaled(-1.0), 256) <= threshold
}

/// The two distances behind [`classify_symmetry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryDistances {
    /// `sup_t |x(t + τ/2) + x(t)|`.
    pub half_period: f64,
    /// `min_s sup_t |x(t) + x(t + s)|`.
    pub best_shift: f64,
}

pub fn symmetry_distances(x: &ClosedCharacteristic) -> SymmetryDistances {
    let neg = x.curve.scaled(-1.0);
    let samples = 256;
    let half_period = (0..samples)
        .map(|i| {
            let s = i as f64 / samples as f64;
            (x.curve.eval(s + 0.5) + x.curve.eval(s)).norm()
        })
        .fold(0.0, f64::max);
    let (_, best_shift) = shift_distance(&x.curve, &neg, 256);
    SymmetryDistances { half_period, best_shift: best_shift.min(half_period) }
}

/// Symmetric iff `x(t + τ/2) = −x(t)` within `sym_orbit_tol`; asymmetric iff
/// `−x` is farther than that from every time shift of `x`.
pub fn classify_symmetry(body: &ConvexBody, x: &ClosedCharacteristic, tol: &Tolerances) -> Result<SymmetryClass> {
    if !body.is_symmetric() {
        return Err(SilError::Domain("symmetry classes are defined for centrally symmetric bodies".into()));
    }
    let d = symmetry_distances(x);
    if d.half_period <= tol.sym_orbit_tol {
        Ok(SymmetryClass::Symmetric)
    } else if d.best_shift > tol.sym_orbit_tol {
        Ok(SymmetryClass::Asymmetric)
    } else {
        Err(SilError::Tolerance(format!(
            "orbit symmetry is ambiguous: half-period distance {:.3e}, best-shift distance {:.3e}",
            d.half_period, d.best_shift
        )))
    }
}

/// The linearised flow along `x`: `B(t) = ∇²H_α(x(t))`, period `τ`.
pub fn linearize_orbit(body: &ConvexBody, orbit: &ClosedCharacteristic, alpha: f64, tol: &Tolerances) -> Result<LinearSystem> {
    crate::body::check_alpha(alpha)?;
    let surf = orbit.surface_error(body);
    if surf > tol.surface_tol {
        return Err(SilError::Domain(format!("orbit is not on Σ (max |j − 1| = {surf:.3e})")));
    }
    let min_radius = orbit.curve.sample(CHECK_SAMPLES).iter().map(|x| x.norm()).fold(f64::INFINITY, f64::min);
    if min_radius < 1e-8 {
        return Err(SilError::Singularity(format!("orbit passes within {min_radius:.3e} of the origin")));
    }
    let body = Arc::new(body.clone());
    let curve = Arc::new(orbit.curve.clone());
    let tau = orbit.tau;
    let dim = body.dim();
    let generator = move |t: f64| -> DMatrix<f64> {
        let x = curve.eval(t / tau);
        match hamiltonian_hessian(&body, alpha, &x) {
            Ok(h) => (&h + h.transpose()) * 0.5,
            Err(_) => DMatrix::from_element(dim, dim, f64::NAN),
        }
    };
    LinearSystem::new(dim / 2, tau, generator, tol.sym_tol)
}

/// Residual of `ẋ = J∇H_α(x)` along the orbit, in the `H_α` time.
pub fn hamiltonian_residual(body: &ConvexBody, x: &ClosedCharacteristic) -> f64 {
    let mut worst: f64 = 0.0;
    let mut jg = vec![0.0; body.dim()];
    for i in 0..CHECK_SAMPLES {
        let t = x.tau * i as f64 / CHECK_SAMPLES as f64;
        let g = hamiltonian_gradient(body, x.alpha, &x.x(t));
        apply_j(g.as_slice(), &mut jg);
        worst = worst.max((x.xdot(t) - DVector::from_column_slice(&jg)).norm());
    }
    worst
}
