//! The dual action functional on mean-zero loops and the search for its
//! critical points.
//!
//! A loop is stored by real Fourier coefficients: row `2(j−1)` of the
//! coefficient matrix is `a_j`, row `2j−1` is `b_j`, and
//! `u(t) = Σ_{j=1}^{K} a_j cos(2πjt) + b_j sin(2πjt)`.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{check_alpha, fenchel_hessian, fenchel_value_gradient, hamiltonian, hamiltonian_gradient, ConvexBody};
use crate::config::Tolerances;
use crate::error::{Result, SilError};
use crate::linalg::{apply_j, standard_j};
use crate::orbit::{same_orbit, ClosedCharacteristic, FourierCurve};

/// A mean-zero loop `u: [0,1] → R^{2n}` with `K` Fourier modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualLoop {
    alpha: f64,
    coeffs: DMatrix<f64>,
}

impl DualLoop {
    pub fn new(alpha: f64, coeffs: DMatrix<f64>) -> Result<Self> {
        check_alpha(alpha)?;
        if coeffs.nrows() == 0 || coeffs.nrows() % 2 != 0 || coeffs.ncols() % 2 != 0 || coeffs.ncols() == 0 {
            return Err(SilError::Dimension(format!(
                "coefficient matrix must be 2K × 2n, got {} × {}",
                coeffs.nrows(),
                coeffs.ncols()
            )));
        }
        Ok(Self { alpha, coeffs })
    }

    pub fn zeros(alpha: f64, modes: usize, dim: usize) -> Result<Self> {
        Self::new(alpha, DMatrix::zeros(2 * modes, dim))
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn modes(&self) -> usize {
        self.coeffs.nrows() / 2
    }

    pub fn dim(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    /// `a_j` for `1 ≤ j ≤ K`.
    pub fn cos_coeff(&self, j: usize) -> DVector<f64> {
        self.coeffs.row(2 * (j - 1)).transpose()
    }

    /// `b_j` for `1 ≤ j ≤ K`.
    pub fn sin_coeff(&self, j: usize) -> DVector<f64> {
        self.coeffs.row(2 * j - 1).transpose()
    }

    pub fn eval(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for j in 1..=self.modes() {
            let (s, c) = (TAU * j as f64 * t).sin_cos();
            out += self.cos_coeff(j) * c + self.sin_coeff(j) * s;
        }
        out
    }

    /// `Πu(t)`: the mean-zero primitive.
    pub fn primitive(&self, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for j in 1..=self.modes() {
            let w = TAU * j as f64;
            let (s, c) = (w * t).sin_cos();
            out += (self.cos_coeff(j) * s - self.sin_coeff(j) * c) / w;
        }
        out
    }

    /// Truncate or zero-pad to `modes` modes.
    pub fn resized(&self, modes: usize) -> Self {
        let mut c = DMatrix::zeros(2 * modes, self.dim());
        let rows = (2 * modes).min(self.coeffs.nrows());
        c.rows_mut(0, rows).copy_from(&self.coeffs.rows(0, rows));
        Self { alpha: self.alpha, coeffs: c }
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// Energy in modes above `j`, relative to the total.
    pub fn tail_fraction(&self, j: usize) -> f64 {
        let total = self.coeffs.norm_squared();
        if total == 0.0 || j >= self.modes() {
            return 0.0;
        }
        self.coeffs.rows(2 * j, self.coeffs.nrows() - 2 * j).norm_squared() / total
    }

    fn with_coeffs(&self, coeffs: DMatrix<f64>) -> Self {
        Self { alpha: self.alpha, coeffs }
    }
}

/// Quadrature grid and trigonometric table for a fixed `(K, Q)`.
struct Grid {
    modes: usize,
    points: usize,
    /// `Q × 2K`: `Φ[q, 2(j−1)] = cos(2πj t_q)`, `Φ[q, 2j−1] = sin(2πj t_q)`.
    phi: DMatrix<f64>,
}

impl Grid {
    fn new(modes: usize, points: usize) -> Self {
        let phi = DMatrix::from_fn(points, 2 * modes, |q, r| {
            let j = (r / 2 + 1) as f64;
            let x = TAU * j * q as f64 / points as f64;
            if r % 2 == 0 {
                x.cos()
            } else {
                x.sin()
            }
        });
        Self { modes, points, phi }
    }
}

fn default_points(modes: usize) -> usize {
    (8 * modes).max(64)
}

/// `f_α` together with its derivatives on a fixed truncation.
pub struct DualFunctional<'a> {
    body: &'a ConvexBody,
    alpha: f64,
    grid: Grid,
    j: DMatrix<f64>,
}

impl<'a> DualFunctional<'a> {
    /// Quadrature on `max(8K, 64)` points.
    pub fn new(body: &'a ConvexBody, alpha: f64, modes: usize) -> Result<Self> {
        Self::with_points(body, alpha, modes, default_points(modes))
    }

    pub fn with_points(body: &'a ConvexBody, alpha: f64, modes: usize, points: usize) -> Result<Self> {
        check_alpha(alpha)?;
        if modes == 0 {
            return Err(SilError::Domain("a dual loop needs at least one mode".into()));
        }
        if points < 8 * modes {
            return Err(SilError::Domain(format!("{points} quadrature points cannot resolve {modes} modes")));
        }
        Ok(Self { body, alpha, grid: Grid::new(modes, points), j: standard_j(body.n()) })
    }

    pub fn modes(&self) -> usize {
        self.grid.modes
    }

    fn check(&self, u: &DualLoop) -> Result<()> {
        if u.modes() != self.grid.modes || u.dim() != self.body.dim() {
            return Err(SilError::Dimension(format!(
                "loop has {} modes in R^{}, functional expects {} modes in R^{}",
                u.modes(),
                u.dim(),
                self.grid.modes,
                self.body.dim()
            )));
        }
        if u.alpha != self.alpha {
            return Err(SilError::Domain("loop and functional use different α".into()));
        }
        Ok(())
    }

    /// `½∫(Ju, Πu) = ½ Σ_j (J b_j, a_j)/(2πj)`, exact.
    fn quadratic(&self, c: &DMatrix<f64>) -> f64 {
        let mut total = 0.0;
        let mut jb = vec![0.0; c.ncols()];
        for j in 1..=self.grid.modes {
            let a = c.row(2 * (j - 1));
            let b: Vec<f64> = c.row(2 * j - 1).iter().copied().collect();
            apply_j(&b, &mut jb);
            total += a.iter().zip(&jb).map(|(x, y)| x * y).sum::<f64>() / (TAU * j as f64);
        }
        0.5 * total
    }

    fn quadratic_gradient(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(c.nrows(), c.ncols());
        let d = c.ncols();
        let mut buf = vec![0.0; d];
        for j in 1..=self.grid.modes {
            let w = 2.0 * TAU * j as f64;
            let a: Vec<f64> = c.row(2 * (j - 1)).iter().copied().collect();
            let b: Vec<f64> = c.row(2 * j - 1).iter().copied().collect();
            apply_j(&b, &mut buf);
            for k in 0..d {
                g[(2 * (j - 1), k)] = buf[k] / w;
            }
            apply_j(&a, &mut buf);
            for k in 0..d {
                g[(2 * j - 1, k)] = -buf[k] / w;
            }
        }
        g
    }

    /// Values of `−Ju` at the quadrature points, one per row.
    fn dual_points(&self, c: &DMatrix<f64>) -> DMatrix<f64> {
        let u = &self.grid.phi * c;
        -(u * self.j.transpose())
    }

    pub fn value(&self, u: &DualLoop) -> Result<f64> {
        self.check(u)?;
        let y = self.dual_points(&u.coeffs);
        let mut total = 0.0;
        for q in 0..self.grid.points {
            let yq = y.row(q).transpose();
            total += fenchel_value_gradient(self.body, self.alpha, &yq)?.0;
        }
        Ok(self.quadratic(&u.coeffs) + total / self.grid.points as f64)
    }

    /// `(f, ∇f)` with `∇f` in the coefficient layout of [`DualLoop`].
    pub fn value_gradient(&self, u: &DualLoop) -> Result<(f64, DMatrix<f64>)> {
        self.check(u)?;
        let (f, g) = self.value_gradient_raw(&u.coeffs)?;
        Ok((f, g))
    }

    fn value_gradient_raw(&self, c: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
        let y = self.dual_points(c);
        let qn = self.grid.points;
        let mut total = 0.0;
        let mut w = DMatrix::zeros(qn, c.ncols());
        for q in 0..qn {
            let yq = y.row(q).transpose();
            let (v, g) = fenchel_value_gradient(self.body, self.alpha, &yq)?;
            total += v;
            w.set_row(q, &g.transpose());
        }
        // d/dC of H*(−JΦC): Φᵀ (∇H* rows) Jᵀ... with −J transposed = J
        let grad = self.grid.phi.transpose() * (w * &self.j) / qn as f64 * -1.0;
        Ok((self.quadratic(c) + total / qn as f64, grad + self.quadratic_gradient(c)))
    }

    /// Hessian in the flattened layout `index = row · 2n + column`.
    pub fn hessian(&self, u: &DualLoop) -> Result<DMatrix<f64>> {
        self.check(u)?;
        self.hessian_raw(&u.coeffs)
    }

    fn hessian_raw(&self, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = c.ncols();
        let k = self.grid.modes;
        let qn = self.grid.points;
        let y = self.dual_points(c);
        // G_q = Jᵀ ∇²H*(y_q) J, then its cosine/sine moments up to 2K
        let mut cm = vec![DMatrix::<f64>::zeros(d, d); 2 * k + 1];
        let mut sm = vec![DMatrix::<f64>::zeros(d, d); 2 * k + 1];
        for q in 0..qn {
            let yq = y.row(q).transpose();
            let h = fenchel_hessian(self.body, self.alpha, &yq)?;
            let g = self.j.transpose() * h * &self.j;
            let t = q as f64 / qn as f64;
            for m in 0..=2 * k {
                let (s, co) = (TAU * m as f64 * t).sin_cos();
                cm[m] += &g * co;
                sm[m] += &g * s;
            }
        }
        for m in 0..=2 * k {
            cm[m] /= qn as f64;
            sm[m] /= qn as f64;
        }
        let signed_sin = |m: i64| -> DMatrix<f64> {
            if m >= 0 {
                sm[m as usize].clone()
            } else {
                -&sm[(-m) as usize]
            }
        };
        let dim = 2 * k * d;
        let mut hess = DMatrix::zeros(dim, dim);
        for j in 1..=k {
            for l in 1..=k {
                let diff = (j as i64 - l as i64).unsigned_abs() as usize;
                let sum = j + l;
                let cc = (&cm[diff] + &cm[sum]) * 0.5;
                let ss = (&cm[diff] - &cm[sum]) * 0.5;
                // cos(jt) sin(lt) = ½[sin((j+l)t) − sin((j−l)t)]
                let cs = (&sm[sum] - signed_sin(j as i64 - l as i64)) * 0.5;
                let sc = (&sm[sum] - signed_sin(l as i64 - j as i64)) * 0.5;
                let (ra, rb) = (2 * (j - 1) * d, (2 * j - 1) * d);
                let (ca, cb) = (2 * (l - 1) * d, (2 * l - 1) * d);
                hess.view_mut((ra, ca), (d, d)).copy_from(&cc);
                hess.view_mut((rb, cb), (d, d)).copy_from(&ss);
                hess.view_mut((ra, cb), (d, d)).copy_from(&cs);
                hess.view_mut((rb, ca), (d, d)).copy_from(&sc);
            }
        }
        for j in 1..=k {
            let w = 2.0 * TAU * j as f64;
            let (ra, rb) = (2 * (j - 1) * d, (2 * j - 1) * d);
            let mut ab = hess.view_mut((ra, rb), (d, d));
            ab += &self.j / w;
            let mut ba = hess.view_mut((rb, ra), (d, d));
            ba += self.j.transpose() / w;
        }
        Ok(hess)
    }
}

/// `f_α(u)` on `max(8K, 64)` points, checked against the doubled grid.
pub fn dual_action(body: &ConvexBody, alpha: f64, u: &DualLoop) -> Result<f64> {
    let modes = u.modes();
    let q = default_points(modes);
    let coarse = DualFunctional::with_points(body, alpha, modes, q)?.value(u)?;
    let fine = DualFunctional::with_points(body, alpha, modes, 2 * q)?.value(u)?;
    if (coarse - fine).abs() > 1e-8 * coarse.abs().max(1.0) {
        return Err(SilError::Resolution(format!(
            "dual action changes from {coarse:.12e} to {fine:.12e} when the quadrature grid doubles"
        )));
    }
    Ok(fine)
}

/// Coefficient-norm of `∇f_α(u)`.
pub fn dual_gradient_norm(body: &ConvexBody, alpha: f64, u: &DualLoop) -> Result<f64> {
    let f = DualFunctional::new(body, alpha, u.modes())?;
    Ok(f.value_gradient(u)?.1.norm())
}

/// The loop generated by a closed characteristic traversed `m` times:
/// `u(t) = (mτ)^{(1−α)/(2−α)} ẋ(mτt)`, with `K = m·K_x` modes unless
/// `modes` is given.
pub fn characteristic_to_u(x: &ClosedCharacteristic, m: usize, alpha: f64, modes: Option<usize>) -> Result<DualLoop> {
    check_alpha(alpha)?;
    if m == 0 {
        return Err(SilError::Domain("iteration count must be positive".into()));
    }
    let kx = x.curve.modes();
    let k = modes.unwrap_or(m * kx).max(1);
    let dim = x.curve.dim();
    let scale = (m as f64 * x.tau).powf((1.0 - alpha) / (2.0 - alpha)) / x.tau;
    let mut c = DMatrix::zeros(2 * k, dim);
    for j in 1..=kx {
        let mode = j * m;
        if mode > k {
            break;
        }
        let w = TAU * j as f64;
        let (cj, sj) = (x.curve.cos_coeff(j), x.curve.sin_coeff(j));
        for col in 0..dim {
            c[(2 * (mode - 1), col)] = scale * w * sj[col];
            c[(2 * mode - 1, col)] = -scale * w * cj[col];
        }
    }
    DualLoop::new(alpha, c)
}

/// A characteristic recovered from a loop, with the multiplicity `m` of
/// the loop over its minimal period and the energy `h = H(z_u)`.
#[derive(Debug, Clone)]
pub struct Recovered {
    pub characteristic: ClosedCharacteristic,
    pub m: usize,
    pub energy: f64,
    pub xi: DVector<f64>,
}

/// Invert [`characteristic_to_u`]: `z = Πu + ξ` with `ξ` the mean of
/// `∇H*(−Ju)`, `h = H(z)`, `x(t) = h^{−1/α} z(t/(mτ))` and
/// `τ = h^{(α−2)/α}/m`.
pub fn u_to_characteristic(body: &ConvexBody, alpha: f64, u: &DualLoop, tol: &Tolerances) -> Result<Recovered> {
    check_alpha(alpha)?;
    if u.dim() != body.dim() {
        return Err(SilError::Dimension("loop and body dimensions differ".into()));
    }
    let k = u.modes();
    let dim = u.dim();
    let unorm = u.norm();
    if unorm == 0.0 {
        return Err(SilError::NotASolution("the zero loop carries no characteristic".into()));
    }
    let qn = default_points(k).max(256);
    let grid = Grid::new(k, qn);
    let jm = standard_j(body.n());
    let uq = &grid.phi * &u.coeffs;
    let yq = -(&uq * jm.transpose());
    let mut xi = DVector::zeros(dim);
    for q in 0..qn {
        xi += fenchel_value_gradient(body, alpha, &yq.row(q).transpose())?.1;
    }
    xi /= qn as f64;

    // z = Πu + ξ as a curve on [0, 1)
    let mut cos = vec![vec![0.0; dim]; k + 1];
    let mut sin = vec![vec![0.0; dim]; k + 1];
    cos[0] = xi.iter().copied().collect();
    for j in 1..=k {
        let w = TAU * j as f64;
        let (a, b) = (u.cos_coeff(j), u.sin_coeff(j));
        for c in 0..dim {
            cos[j][c] = -b[c] / w;
            sin[j][c] = a[c] / w;
        }
    }
    let z = FourierCurve::new(cos, sin)?;

    // residual of ż = J∇H(z), relative to the size of u
    let mut worst: f64 = 0.0;
    let mut umax: f64 = 0.0;
    let mut energy = 0.0;
    let mut jg = vec![0.0; dim];
    for q in 0..qn {
        let t = q as f64 / qn as f64;
        let zq = z.eval(t);
        let g = hamiltonian_gradient(body, alpha, &zq);
        apply_j(g.as_slice(), &mut jg);
        let uqv = uq.row(q).transpose();
        worst = worst.max((uqv.clone() - DVector::from_column_slice(&jg)).norm());
        umax = umax.max(uqv.norm());
        energy += hamiltonian(body, alpha, &zq);
    }
    energy /= qn as f64;
    let rel = worst / umax.max(1e-300);
    if rel > tol.orbit_tol {
        return Err(SilError::NotASolution(format!("z_u violates ż = J∇H(z) by {rel:.3e} (relative)")));
    }
    if !(energy > 0.0) {
        return Err(SilError::NotASolution("z_u has zero energy".into()));
    }

    let m = detect_multiplicity(&z, tol)?;
    let tau = energy.powf((alpha - 2.0) / alpha) / m as f64;
    let scale = energy.powf(-1.0 / alpha);
    let km = k / m;
    let mut xc = vec![vec![0.0; dim]; km + 1];
    let mut xs = vec![vec![0.0; dim]; km + 1];
    for j in 0..=km {
        xc[j] = z.cos_coeff(j * m).iter().map(|v| v * scale).collect();
        xs[j] = z.sin_coeff(j * m).iter().map(|v| v * scale).collect();
    }
    let curve = FourierCurve::new(xc, xs)?;
    let characteristic = ClosedCharacteristic::new(body, alpha, tau, curve, tol)?;
    Ok(Recovered { characteristic, m, energy, xi })
}

/// Largest `m` such that the modes of `z` not divisible by `m` carry a
/// negligible share of the energy, confirmed by `z(t + 1/m) ≈ z(t)`.
fn detect_multiplicity(z: &FourierCurve, tol: &Tolerances) -> Result<usize> {
    let k = z.modes();
    let energies: Vec<f64> = (0..=k).map(|j| if j == 0 { 0.0 } else { z.mode_energy(j) }).collect();
    let total: f64 = energies.iter().sum();
    if total == 0.0 {
        return Err(SilError::NotASolution("z_u is constant".into()));
    }
    let scale = z.sample(64).iter().map(|p| p.norm()).fold(0.0, f64::max);
    for m in (1..=k).rev() {
        let stray: f64 = (1..=k).filter(|j| j % m != 0).map(|j| energies[j]).sum();
        if stray > 1e-16 * total {
            continue;
        }
        let closure = (0..128)
            .map(|i| {
                let t = i as f64 / 128.0;
                (z.eval(t + 1.0 / m as f64) - z.eval(t)).norm()
            })
            .fold(0.0, f64::max);
        if closure <= tol.orbit_tol * scale {
            return Ok(m);
        }
    }
    Ok(1)
}

/// How a seed was produced; analytic seeds skip first-order descent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeedKind {
    Random,
    Analytic,
}

#[derive(Debug, Clone)]
pub struct Seed {
    pub kind: SeedKind,
    pub loop_: DualLoop,
}

/// Optimiser settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinderConfig {
    /// Final mode cutoff `K`.
    pub modes: usize,
    /// Cutoff for descent and the first polish.
    pub coarse_modes: usize,
    pub max_descent_iters: usize,
    pub max_newton_iters: usize,
}

impl Default for FinderConfig {
    fn default() -> Self {
        Self { modes: 64, coarse_modes: 8, max_descent_iters: 4000, max_newton_iters: 40 }
    }
}

/// A loop with `‖∇f_α‖ ≤ grad_tol` and the characteristic it carries.
#[derive(Debug, Clone)]
pub struct CriticalLoop {
    pub u: DualLoop,
    pub value: f64,
    pub grad_norm: f64,
    pub seed: usize,
    pub recovered: Recovered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct FinderOutcome {
    /// Distinct loops, sorted by critical value.
    pub loops: Vec<CriticalLoop>,
    pub failures: Vec<SeedFailure>,
    /// Seeds that converged before deduplication.
    pub converged: usize,
}

const DEDUP_THRESHOLD: f64 = 1e-4;

/// Minimise from random seeds, polish every seed by Newton's method on the
/// truncated space, then deduplicate geometrically.
pub fn find_critical_points(
    body: &ConvexBody,
    alpha: f64,
    seeds: &[Seed],
    config: &FinderConfig,
    tol: &Tolerances,
) -> Result<FinderOutcome> {
    check_alpha(alpha)?;
    if config.modes == 0 || config.coarse_modes == 0 {
        return Err(SilError::Domain("mode cutoffs must be positive".into()));
    }
    let coarse_k = config.coarse_modes.min(config.modes);
    let coarse = DualFunctional::new(body, alpha, coarse_k)?;

    let stage1: Vec<std::result::Result<DualLoop, SeedFailure>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| {
            let fail = |reason: String| SeedFailure { seed: i, reason };
            if seed.loop_.dim() != body.dim() {
                return Err(fail("seed dimension does not match the body".into()));
            }
            let mut c = seed.loop_.resized(coarse_k).coeffs.clone();
            if seed.kind == SeedKind::Random {
                c = descend(&coarse, c, config.max_descent_iters, 1e-7).map_err(|e| fail(e.to_string()))?;
            }
            let coarse_tol = if coarse_k == config.modes { tol.grad_tol } else { tol.grad_tol * 10.0 };
            let (c, g) = newton(&coarse, c, config.max_newton_iters, coarse_tol).map_err(|e| fail(e.to_string()))?;
            if g > coarse_tol.max(1e-7) {
                return Err(fail(format!("no convergence at {coarse_k} modes: gradient {g:.3e}")));
            }
            if c.norm() < 1e-8 {
                return Err(fail("converged to the trivial loop".into()));
            }
            Ok(seed.loop_.with_coeffs(c).resized(coarse_k))
        })
        .collect();

    let mut failures = Vec::new();
    let mut coarse_loops = Vec::new();
    for (i, r) in stage1.into_iter().enumerate() {
        match r {
            Ok(u) => coarse_loops.push((i, u)),
            Err(f) => failures.push(f),
        }
    }

    // cheap dedup before the expensive polish
    let mut reps: Vec<(usize, DualLoop, ClosedCharacteristic)> = Vec::new();
    let mut converged = 0;
    for (i, u) in coarse_loops {
        let rec = match u_to_characteristic(body, alpha, &u, &loose(tol)) {
            Ok(r) => r,
            Err(e) => {
                failures.push(SeedFailure { seed: i, reason: e.to_string() });
                continue;
            }
        };
        converged += 1;
        if !reps.iter().any(|(_, _, x)| same_orbit(x, &rec.characteristic, body.is_symmetric(), DEDUP_THRESHOLD)) {
            reps.push((i, u, rec.characteristic));
        }
    }

    let full = DualFunctional::new(body, alpha, config.modes)?;
    let polished: Vec<std::result::Result<CriticalLoop, SeedFailure>> = reps
        .into_par_iter()
        .map(|(i, u, _)| {
            let fail = |reason: String| SeedFailure { seed: i, reason };
            let c = u.resized(config.modes).coeffs.clone();
            let (c, g) = newton(&full, c, config.max_newton_iters, tol.grad_tol).map_err(|e| fail(e.to_string()))?;
            if g > tol.grad_tol {
                return Err(fail(format!("polish stalled at gradient {g:.3e}")));
            }
            let u = u.with_coeffs(c);
            let value = full.value(&u).map_err(|e| fail(e.to_string()))?;
            let recovered = u_to_characteristic(body, alpha, &u, tol).map_err(|e| fail(e.to_string()))?;
            Ok(CriticalLoop { u, value, grad_norm: g, seed: i, recovered })
        })
        .collect();

    let mut loops: Vec<CriticalLoop> = Vec::new();
    for r in polished {
        match r {
            Ok(l) => {
                let dup = loops.iter().position(|o| {
                    same_orbit(&o.recovered.characteristic, &l.recovered.characteristic, body.is_symmetric(), DEDUP_THRESHOLD)
                });
                match dup {
                    Some(p) if loops[p].recovered.m > l.recovered.m => loops[p] = l,
                    Some(_) => {}
                    None => loops.push(l),
                }
            }
            Err(f) => failures.push(f),
        }
    }
    loops.sort_by(|a, b| a.value.total_cmp(&b.value));
    failures.sort_by_key(|f| f.seed);
    Ok(FinderOutcome { loops, failures, converged })
}

fn loose(tol: &Tolerances) -> Tolerances {
    Tolerances { surface_tol: 1e-4, orbit_tol: 1e-3, ..*tol }
}

/// Barzilai–Borwein gradient descent with Armijo backtracking.
fn descend(f: &DualFunctional, mut c: DMatrix<f64>, max_iters: usize, gtol: f64) -> Result<DMatrix<f64>> {
    let (mut fv, mut g) = f.value_gradient_raw(&c)?;
    let mut step = 1.0;
    for _ in 0..max_iters {
        let gn = g.norm();
        if gn <= gtol {
            break;
        }
        let mut t = step;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &c - &g * t;
            if let Ok((ft, gt)) = f.value_gradient_raw(&trial) {
                if ft <= fv - 1e-4 * t * gn * gn {
                    let s = &trial - &c;
                    let y = &gt - &g;
                    let sy = s.dot(&y);
                    step = if sy > 0.0 { (s.norm_squared() / sy).clamp(1e-8, 1e8) } else { t * 2.0 };
                    c = trial;
                    fv = ft;
                    g = gt;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok(c)
}

/// Newton's method with an eigenvalue pseudo-inverse (the time-shift
/// direction is always a kernel direction) and backtracking on `‖∇f‖`.
fn newton(f: &DualFunctional, mut c: DMatrix<f64>, max_iters: usize, gtol: f64) -> Result<(DMatrix<f64>, f64)> {
    let (rows, cols) = c.shape();
    let mut g = f.value_gradient_raw(&c)?.1;
    let mut gn = g.norm();
    for _ in 0..max_iters {
        if gn <= gtol {
            break;
        }
        let h = f.hessian_raw(&c)?;
        let eig = h.symmetric_eigen();
        let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        let gv = DVector::from_iterator(rows * cols, (0..rows).flat_map(|r| (0..cols).map(move |k| (r, k))).map(|(r, k)| g[(r, k)]));
        let mut step = DVector::zeros(rows * cols);
        for (i, &l) in eig.eigenvalues.iter().enumerate() {
            if l.abs() > 1e-10 * lmax {
                let v = eig.eigenvectors.column(i);
                step -= v * (v.dot(&gv) / l);
            }
        }
        let step = DMatrix::from_row_slice(rows, cols, step.as_slice());
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial = &c + &step * t;
            if let Ok((_, gt)) = f.value_gradient_raw(&trial) {
                let n = gt.norm();
                if n < gn {
                    c = trial;
                    g = gt;
                    gn = n;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok((c, gn))
}

/// One analytic seed per coordinate plane: the planar circles of the
/// ellipsoid with the body's radii.
pub fn planar_seeds(body: &ConvexBody, alpha: f64, modes: usize, tol: &Tolerances) -> Result<Vec<Seed>> {
    let e = crate::orbit::ellipsoid_characteristics(body.radii(), alpha, tol)?;
    e.orbits
        .iter()
        .map(|x| Ok(Seed { kind: SeedKind::Analytic, loop_: characteristic_to_u(x, 1, alpha, Some(modes))? }))
        .collect()
}

/// `count` random low-mode loops scaled like the smallest planar loop;
/// seed `i` depends only on `(rng_seed, i)`.
pub fn random_seeds(body: &ConvexBody, alpha: f64, count: usize, rng_seed: u64, modes: usize, tol: &Tolerances) -> Result<Vec<Seed>> {
    let planar = planar_seeds(body, alpha, modes, tol)?;
    let scale = planar.iter().map(|s| s.loop_.norm()).fold(f64::INFINITY, f64::min);
    let dim = body.dim();
    let active = modes.min(3);
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut c = DMatrix::zeros(2 * modes, dim);
            for r in 0..2 * active {
                let damp = 1.0 / (r / 2 + 1) as f64;
                for k in 0..dim {
                    c[(r, k)] = rng.random_range(-1.0..1.0) * damp;
                }
            }
            let factor = rng.random_range(0.5..1.5);
            let norm = c.norm().max(1e-300);
            c *= scale * factor / norm;
            Ok(Seed { kind: SeedKind::Random, loop_: DualLoop::new(alpha, c)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::body::{BodySpec, PerturbationTerm};
    use crate::orbit::{ellipsoid_characteristics, l2_shift_distance};
    use std::f64::consts::PI;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn circle_loop(r: f64, m: usize) -> (ConvexBody, ClosedCharacteristic, DualLoop) {
        let body = ConvexBody::ellipsoid(&[r]).unwrap();
        let x = ellipsoid_characteristics(&[r], 1.5, &tol()).unwrap().orbits.remove(0);
        let u = characteristic_to_u(&x, m, 1.5, Some(4 * m)).unwrap();
        (body, x, u)
    }

    fn symmetric_perturbed() -> ConvexBody {
        let terms = vec![
            PerturbationTerm { coefficient: 1.0, exponents: vec![2, 0, 0, 2] },
            PerturbationTerm { coefficient: -0.5, exponents: vec![0, 4, 0, 0] },
        ];
        ConvexBody::new(BodySpec::perturbed(&[1.0, 2f64.powf(0.25)], 0.02, terms)).unwrap()
    }

    #[test]
    fn zero_loop_has_zero_action() {
        let body = ConvexBody::ellipsoid(&[1.0, 1.5]).unwrap();
        let u = DualLoop::zeros(1.5, 4, 4).unwrap();
        assert_eq!(dual_action(&body, 1.5, &u).unwrap(), 0.0);
    }

    #[test]
    fn circle_loop_is_critical_with_closed_form_value() {
        for m in [1, 2, 3] {
            let (body, x, u) = circle_loop(1.0, m);
            let g = dual_gradient_norm(&body, 1.5, &u).unwrap();
            assert!(g <= 1e-8, "m={m} gradient {g}");
            let f = dual_action(&body, 1.5, &u).unwrap();
            let a = 1.5;
            let expected = -(1.0 - a / 2.0) * (2.0 * m as f64 * x.action / a).powf(-a / (2.0 - a));
            assert!((f - expected).abs() <= 1e-6 * expected.abs(), "m={m}: {f} vs {expected}");
        }
    }

    #[test]
    fn critical_values_decrease_with_iteration() {
        let vals: Vec<f64> = (1..=4)
            .map(|m| {
                let (body, _, u) = circle_loop(1.0, m);
                dual_action(&body, 1.5, &u).unwrap()
            })
            .collect();
        // f grows toward 0 as mA grows
        assert!(vals.windows(2).all(|w| w[0] < w[1]));
        assert!(vals.iter().all(|v| *v < 0.0));
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let body = symmetric_perturbed();
        let f = DualFunctional::new(&body, 1.5, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-0.1..0.1));
        let u = DualLoop::new(1.5, c.clone()).unwrap();
        let (_, g) = f.value_gradient(&u).unwrap();
        let h = f.hessian(&u).unwrap();
        let eps = 1e-6;
        for r in 0..4 {
            for k in 0..4 {
                let mut cp = c.clone();
                let mut cm = c.clone();
                cp[(r, k)] += eps;
                cm[(r, k)] -= eps;
                let (fp, gp) = f.value_gradient_raw(&cp).unwrap();
                let (fm, gm) = f.value_gradient_raw(&cm).unwrap();
                assert!(((fp - fm) / (2.0 * eps) - g[(r, k)]).abs() <= 1e-7);
                let col = (&gp - &gm) / (2.0 * eps);
                for r2 in 0..4 {
                    for k2 in 0..4 {
                        let hv = h[(r2 * 4 + k2, r * 4 + k)];
                        assert!((col[(r2, k2)] - hv).abs() <= 1e-6, "{} vs {}", col[(r2, k2)], hv);
                    }
                }
            }
        }
    }

    #[test]
    fn round_trip_recovers_orbit_and_multiplicity() {
        for m in [1, 2] {
            let (body, x, u) = circle_loop(1.3, m);
            let rec = u_to_characteristic(&body, 1.5, &u, &tol()).unwrap();
            assert_eq!(rec.m, m);
            assert!((rec.characteristic.tau - x.tau).abs() <= 1e-8);
            assert!((rec.characteristic.tau - 4.0 * PI * 1.69 / 1.5).abs() <= 1e-8);
            let d = l2_shift_distance(&x.curve, &rec.characteristic.curve.clone(), 256);
            assert!(d <= 1e-8, "distance {d}");
        }
    }

    #[test]
    fn ellipsoid_seed_is_a_fixed_point() {
        let body = ConvexBody::ellipsoid(&[1.0, 2f64.powf(0.25)]).unwrap();
        let seeds = planar_seeds(&body, 1.5, 8, &tol()).unwrap();
        let cfg = FinderConfig { modes: 8, ..Default::default() };
        let out = find_critical_points(&body, 1.5, &seeds, &cfg, &tol()).unwrap();
        assert_eq!(out.loops.len(), 2);
        for l in &out.loops {
            let s = &seeds[l.seed].loop_;
            assert!((&l.u.coeffs - &s.coeffs).norm() <= 1e-8);
        }
    }

    #[test]
    fn random_seeds_find_known_orbits() {
        let radii = [1.0, 2f64.powf(0.25)];
        let body = ConvexBody::ellipsoid(&radii).unwrap();
        let known = ellipsoid_characteristics(&radii, 1.5, &tol()).unwrap().orbits;
        let seeds = random_seeds(&body, 1.5, 6, 11, 8, &tol()).unwrap();
        let cfg = FinderConfig { modes: 16, ..Default::default() };
        let out = find_critical_points(&body, 1.5, &seeds, &cfg, &tol()).unwrap();
        assert!(!out.loops.is_empty());
        for l in &out.loops {
            let x = &l.recovered.characteristic;
            assert!(known.iter().any(|k| same_orbit(k, x, true, 1e-4)), "unknown orbit τ = {}", x.tau);
        }
    }

    #[test]
    fn perturbed_body_orbits_satisfy_the_equation() {
        let body = symmetric_perturbed();
        let seeds = planar_seeds(&body, 1.5, 8, &tol()).unwrap();
        let cfg = FinderConfig { modes: 24, ..Default::default() };
        let out = find_critical_points(&body, 1.5, &seeds, &cfg, &tol()).unwrap();
        assert_eq!(out.loops.len(), 2, "failures: {:?}", out.failures);
        for l in &out.loops {
            let x = &l.recovered.characteristic;
            assert!(x.residual(&body) <= 1e-6);
            assert!(x.surface_error(&body) <= 1e-8);
            assert!(l.value < 0.0);
            // (τ, −x) solves the same equation
            assert!(x.negated().residual(&body) <= 1e-6);
        }
    }
}
