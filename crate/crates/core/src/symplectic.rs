//! Symplectic matrices, periodic linear Hamiltonian systems `ẋ = JB(t)x`
//! and sampled symplectic paths starting at the identity.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::config::Tolerances;
use crate::error::{Result, SilError};
use crate::linalg::{eigenvalues, half_dimension, matrix_power, symplectic_defect};

/// A validated element of `Sp(2n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMatrix {
    m: DMatrix<f64>,
}

impl SymplecticMatrix {
    pub fn new(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let defect = symplectic_defect(&m)?;
        if defect > tol {
            return Err(SilError::NotSymplectic { defect, tol });
        }
        if m.determinant() <= 0.0 {
            return Err(SilError::NotSymplectic { defect: f64::INFINITY, tol });
        }
        Ok(Self { m })
    }

    pub fn n(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.m
    }
}

/// `true` iff `‖MᵀJM − J‖_∞ ≤ tol`.
pub fn validate_symplectic(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    Ok(symplectic_defect(m)? <= tol)
}

/// Left-multiply by `J` without forming it.
pub(crate) fn j_mul(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() / 2;
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for c in 0..m.ncols() {
        for k in 0..n {
            out[(k, c)] = -m[(n + k, c)];
            out[(n + k, c)] = m[(k, c)];
        }
    }
    out
}

pub type Generator = Arc<dyn Fn(f64) -> DMatrix<f64> + Send + Sync>;

/// A `τ`-periodic linear Hamiltonian system `ẋ = JB(t)x` with symmetric `B`.
#[derive(Clone)]
pub struct LinearSystem {
    n: usize,
    period: f64,
    generator: Generator,
    margin: Option<f64>,
    sup_norm: f64,
}

impl fmt::Debug for LinearSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearSystem")
            .field("n", &self.n)
            .field("period", &self.period)
            .field("margin", &self.margin)
            .field("sup_norm", &self.sup_norm)
            .finish()
    }
}

const SYSTEM_SAMPLES: usize = 256;

impl LinearSystem {
    /// Wrap a generator, checking symmetry and measuring the
    /// positive-definiteness margin on a sample of times.
    pub fn new<F>(n: usize, period: f64, generator: F, sym_tol: f64) -> Result<Self>
    where
        F: Fn(f64) -> DMatrix<f64> + Send + Sync + 'static,
    {
        Self::from_arc(n, period, Arc::new(generator), sym_tol)
    }

    pub fn from_arc(n: usize, period: f64, generator: Generator, sym_tol: f64) -> Result<Self> {
        if n == 0 {
            return Err(SilError::Dimension("n must be positive".into()));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(SilError::Domain(format!("period must be positive, got {period}")));
        }
        let mut min_eig = f64::INFINITY;
        let mut sup_norm: f64 = 0.0;
        for i in 0..SYSTEM_SAMPLES {
            let t = period * i as f64 / SYSTEM_SAMPLES as f64;
            let b = generator(t);
            if b.nrows() != 2 * n || b.ncols() != 2 * n {
                return Err(SilError::Dimension(format!(
                    "generator returned a {}×{} matrix, expected {}×{}",
                    b.nrows(),
                    b.ncols(),
                    2 * n,
                    2 * n
                )));
            }
            let asym = (&b - b.transpose()).amax();
            if asym > sym_tol * b.amax().max(1.0) {
                return Err(SilError::Input(format!("B({t:.6}) is not symmetric (defect {asym:.3e})")));
            }
            let sym = (&b + b.transpose()) * 0.5;
            let eig = sym.symmetric_eigenvalues();
            min_eig = min_eig.min(eig.min());
            sup_norm = sup_norm.max(eig.amax());
        }
        let margin = (min_eig > 0.0).then_some(min_eig);
        Ok(Self { n, period, generator, margin, sup_norm })
    }

    /// The autonomous system with constant generator `b`.
    pub fn constant(b: DMatrix<f64>, period: f64, sym_tol: f64) -> Result<Self> {
        let n = half_dimension(&b)?;
        Self::new(n, period, move |_| b.clone(), sym_tol)
    }

    /// Replace the measured margin by one certified analytically.
    pub fn with_certified_margin(mut self, margin: f64) -> Self {
        self.margin = (margin > 0.0).then_some(margin);
        self
    }

    /// Same generator, different period (the generator must be periodic with it).
    pub fn with_period(&self, period: f64) -> Result<Self> {
        if !(period.is_finite() && period > 0.0) {
            return Err(SilError::Domain(format!("period must be positive, got {period}")));
        }
        Ok(Self { period, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        (self.generator)(t.rem_euclid(self.period))
    }

    pub fn is_positive_definite(&self) -> bool {
        self.margin.is_some()
    }

    pub fn margin(&self) -> Option<f64> {
        self.margin
    }

    /// Largest eigenvalue magnitude of `B` seen on the sample grid.
    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    /// The generator handle, for building derived systems.
    pub fn generator(&self) -> Generator {
        self.generator.clone()
    }

    /// Step count keeping the per-step rotation `h·sup‖B‖` below `π/8`
    /// and never below `min_steps`.
    pub fn recommended_steps(&self, min_steps: usize) -> usize {
        let needed = (self.period * self.sup_norm * 1.05 / (std::f64::consts::PI / 8.0)).ceil() as usize;
        min_steps.max(needed).max(16)
    }

    fn rhs(&self, t: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
        j_mul(&(self.eval(t) * y))
    }

    /// One classical Runge–Kutta step of `Ẏ = JB(t)Y`.
    pub(crate) fn rk4_step(&self, t: f64, h: f64, y: &DMatrix<f64>) -> DMatrix<f64> {
        let k1 = self.rhs(t, y);
        let k2 = self.rhs(t + 0.5 * h, &(y + &k1 * (0.5 * h)));
        let k3 = self.rhs(t + 0.5 * h, &(y + &k2 * (0.5 * h)));
        let k4 = self.rhs(t + h, &(y + &k3 * h));
        y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
    }
}

/// How a path is evaluated between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Interpolation {
    /// Re-integrate the generator from the nearest grid point.
    GeneratorFlow,
    /// Entrywise linear interpolation (paths without a generator).
    Linear,
}

/// A symplectic path `γ: [0, T] → Sp(2n)` with `γ(0) = I`, sampled on a
/// uniform grid.
#[derive(Clone)]
pub struct SymplecticPath {
    n: usize,
    length: f64,
    mats: Vec<DMatrix<f64>>,
    generator: Option<LinearSystem>,
    rule: Interpolation,
    spectra: Arc<OnceLock<Vec<Vec<Complex64>>>>,
}

impl fmt::Debug for SymplecticPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymplecticPath")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("steps", &self.steps())
            .field("rule", &self.rule)
            .finish()
    }
}

/// Drift of `Γ` from `Sp(2n)`, scaled by `max(1, |Γ|²)`.
fn relative_drift(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1.0);
    symplectic_defect(m).unwrap_or(f64::INFINITY) / (scale * scale)
}

impl SymplecticPath {
    /// Build from raw grid matrices (uniform grid on `[0, length]`).
    pub fn from_matrices(length: f64, mats: Vec<DMatrix<f64>>, generator: Option<LinearSystem>, tol: &Tolerances) -> Result<Self> {
        if mats.len() < 2 {
            return Err(SilError::Domain("a path needs at least two grid matrices".into()));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SilError::Domain(format!("path length must be positive, got {length}")));
        }
        let n = half_dimension(&mats[0])?;
        if mats[0] != DMatrix::identity(2 * n, 2 * n) {
            return Err(SilError::Domain("a symplectic path must start at the identity".into()));
        }
        let h = length / (mats.len() - 1) as f64;
        for (i, m) in mats.iter().enumerate() {
            if m.nrows() != 2 * n || m.ncols() != 2 * n {
                return Err(SilError::Dimension("grid matrices differ in size".into()));
            }
            let drift = relative_drift(m);
            if drift > tol.path_tol {
                return Err(SilError::IntegrationAccuracy { drift, tol: tol.path_tol, time: i as f64 * h });
            }
        }
        let rule = if generator.is_some() { Interpolation::GeneratorFlow } else { Interpolation::Linear };
        Ok(Self { n, length, mats, generator, rule, spectra: Arc::new(OnceLock::new()) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Total length `T` of the parameter interval.
    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn steps(&self) -> usize {
        self.mats.len() - 1
    }

    pub fn step(&self) -> f64 {
        self.length / self.steps() as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps() {
            self.length
        } else {
            i as f64 * self.step()
        }
    }

    pub fn matrices(&self) -> &[DMatrix<f64>] {
        &self.mats
    }

    pub fn matrix(&self, i: usize) -> &DMatrix<f64> {
        &self.mats[i]
    }

    pub fn end(&self) -> &DMatrix<f64> {
        self.mats.last().expect("non-empty path")
    }

    pub fn generator(&self) -> Option<&LinearSystem> {
        self.generator.as_ref()
    }

    pub fn interpolation(&self) -> Interpolation {
        self.rule
    }

    /// Largest relative symplectic drift over the grid.
    pub fn max_drift(&self) -> f64 {
        self.mats.iter().map(relative_drift).fold(0.0, f64::max)
    }

    /// `γ(t)` for any `t ∈ [0, T]`.
    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let t = t.clamp(0.0, self.length);
        let h = self.step();
        let i = ((t / h).floor() as usize).min(self.steps() - 1);
        let t0 = self.time(i);
        let dt = t - t0;
        if dt <= 0.0 {
            return self.mats[i].clone();
        }
        if t >= self.length {
            return self.end().clone();
        }
        match (&self.generator, self.rule) {
            (Some(sys), Interpolation::GeneratorFlow) => {
                let sub = 2;
                let hs = dt / sub as f64;
                let mut y = self.mats[i].clone();
                for s in 0..sub {
                    y = sys.rk4_step(t0 + s as f64 * hs, hs, &y);
                }
                y
            }
            _ => {
                let w = dt / h;
                &self.mats[i] * (1.0 - w) + &self.mats[i + 1] * w
            }
        }
    }

    /// Eigenvalues of every grid matrix, computed once.
    pub fn spectra(&self) -> &[Vec<Complex64>] {
        self.spectra.get_or_init(|| self.mats.iter().map(eigenvalues).collect())
    }
}

/// Fundamental solution `γ_B` of `ẋ = JB(t)x` on `[0, τ]` by classical RK4
/// with `steps` uniform steps. No projection onto `Sp(2n)`: drift beyond
/// `path_tol` is an error.
pub fn integrate_fundamental(sys: &LinearSystem, steps: usize, tol: &Tolerances) -> Result<SymplecticPath> {
    if steps < 16 {
        return Err(SilError::Domain(format!("at least 16 steps required, got {steps}")));
    }
    let dim = 2 * sys.n();
    let h = sys.period() / steps as f64;
    let mut mats = Vec::with_capacity(steps + 1);
    let mut y = DMatrix::identity(dim, dim);
    mats.push(y.clone());
    for i in 0..steps {
        y = sys.rk4_step(i as f64 * h, h, &y);
        let drift = relative_drift(&y);
        if !(drift <= tol.path_tol) {
            return Err(SilError::IntegrationAccuracy { drift, tol: tol.path_tol, time: (i + 1) as f64 * h });
        }
        mats.push(y.clone());
    }
    SymplecticPath::from_matrices(sys.period(), mats, Some(sys.clone()), tol)
}

/// The iteration path `γ̃(jτ + s) = γ(s)·γ(τ)^j` on `[0, mτ]`, built on the
/// shifted grid without re-integration.
pub fn iterate_path(path: &SymplecticPath, m: usize) -> Result<SymplecticPath> {
    if m == 0 {
        return Err(SilError::Domain("iteration count must be positive".into()));
    }
    if m == 1 {
        return Ok(path.clone());
    }
    let end = path.end().clone();
    let mut mats = Vec::with_capacity(m * path.steps() + 1);
    let mut power = DMatrix::identity(end.nrows(), end.ncols());
    for j in 0..m {
        let start = if j == 0 { 0 } else { 1 };
        for g in &path.mats[start..] {
            mats.push(g * &power);
        }
        power = &power * &end;
    }
    let mut out = SymplecticPath {
        n: path.n,
        length: path.length * m as f64,
        mats,
        generator: path.generator.clone(),
        rule: path.rule,
        spectra: Arc::new(OnceLock::new()),
    };
    // the last grid matrix is γ(τ)^m by construction; store the direct power
    // so that the end matrix carries no extra rounding from the final product
    let last = out.mats.len() - 1;
    out.mats[last] = matrix_power(&end, m);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn validate_examples() {
        assert!(validate_symplectic(&DMatrix::identity(4, 4), 1e-9).unwrap());
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5]));
        assert!(validate_symplectic(&d, 1e-9).unwrap());
        let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0]));
        assert!(!validate_symplectic(&d2, 1e-9).unwrap());
        assert!(validate_symplectic(&DMatrix::identity(3, 3), 1e-9).is_err());
    }

    #[test]
    fn symplectic_matrix_rejects_bad_input() {
        let d2 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 2.0]));
        assert!(SymplecticMatrix::new(d2, 1e-9).is_err());
        assert_eq!(SymplecticMatrix::new(DMatrix::identity(6, 6), 1e-9).unwrap().n(), 3);
    }

    #[test]
    fn rotor_full_turn_and_half_turn() {
        let sys = LinearSystem::constant(DMatrix::identity(2, 2), 2.0 * PI, 1e-9).unwrap();
        let p = integrate_fundamental(&sys, 4096, &tol()).unwrap();
        assert!((p.end() - DMatrix::<f64>::identity(2, 2)).amax() <= 1e-6);
        let half = LinearSystem::constant(DMatrix::identity(2, 2), PI, 1e-9).unwrap();
        let p = integrate_fundamental(&half, 4096, &tol()).unwrap();
        assert!((p.end() + DMatrix::<f64>::identity(2, 2)).amax() <= 1e-9);
    }

    #[test]
    fn too_few_steps_rejected() {
        let sys = LinearSystem::constant(DMatrix::identity(2, 2), 1.0, 1e-9).unwrap();
        assert!(matches!(integrate_fundamental(&sys, 8, &tol()), Err(SilError::Domain(_))));
    }

    #[test]
    fn drift_beyond_tolerance_is_an_error() {
        let sys = LinearSystem::constant(DMatrix::identity(2, 2) * 40.0, 10.0, 1e-9).unwrap();
        let err = integrate_fundamental(&sys, 16, &tol()).unwrap_err();
        assert!(matches!(err, SilError::IntegrationAccuracy { .. }));
    }

    #[test]
    fn integration_is_deterministic() {
        let sys = LinearSystem::new(1, 1.0, |t| DMatrix::from_row_slice(2, 2, &[2.0 + t.sin(), 0.3, 0.3, 1.0]), 1e-9).unwrap();
        let a = integrate_fundamental(&sys, 128, &tol()).unwrap();
        let b = integrate_fundamental(&sys, 128, &tol()).unwrap();
        assert_eq!(a.end(), b.end());
    }

    #[test]
    fn iterate_once_is_identity_and_zero_is_error() {
        let sys = LinearSystem::constant(DMatrix::identity(2, 2), PI, 1e-9).unwrap();
        let p = integrate_fundamental(&sys, 256, &tol()).unwrap();
        let q = iterate_path(&p, 1).unwrap();
        assert_eq!(q.matrices(), p.matrices());
        assert!(matches!(iterate_path(&p, 0), Err(SilError::Domain(_))));
        let q2 = iterate_path(&p, 2).unwrap();
        assert!((q2.end() - p.end() * p.end()).amax() < 1e-12);
        assert!((q2.end() - DMatrix::<f64>::identity(2, 2)).amax() < 1e-8);
        assert_eq!(q2.steps(), 512);
    }

    #[test]
    fn evaluation_between_grid_points_follows_the_flow() {
        let sys = LinearSystem::constant(DMatrix::identity(2, 2), 2.0 * PI, 1e-9).unwrap();
        let p = integrate_fundamental(&sys, 256, &tol()).unwrap();
        let t: f64 = 1.2345;
        let g = p.at(t);
        let exact = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        assert!((g - exact).amax() < 1e-7);
    }
}
