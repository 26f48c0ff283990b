//! Convex bodies through their gauge functions, the homogeneous
//! Hamiltonians `H = j^α` and their Fenchel conjugates.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SilError};

/// One term `c · x^k / |x|^{|k|}` of a perturbation; degree-0 homogeneous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTerm {
    pub coefficient: f64,
    /// Exponent of each coordinate `(p_1..p_n, q_1..q_n)`.
    pub exponents: Vec<u32>,
}

impl PerturbationTerm {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub epsilon: f64,
    pub terms: Vec<PerturbationTerm>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BodyKind {
    Ellipsoid,
    Perturbed,
}

/// The on-disk description of a body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    pub n: usize,
    pub kind: BodyKind,
    pub radii: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

impl BodySpec {
    pub fn ellipsoid(radii: &[f64]) -> Self {
        Self { n: radii.len(), kind: BodyKind::Ellipsoid, radii: radii.to_vec(), perturbation: None, alpha: None }
    }

    pub fn perturbed(radii: &[f64], epsilon: f64, terms: Vec<PerturbationTerm>) -> Self {
        Self {
            n: radii.len(),
            kind: BodyKind::Perturbed,
            radii: radii.to_vec(),
            perturbation: Some(Perturbation { epsilon, terms }),
            alpha: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SilError::Input(format!("body spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("body spec serialises")
    }
}

/// Default `α` of the Hamiltonian `H = j^α`.
pub const DEFAULT_ALPHA: f64 = 1.5;

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 1.0 && alpha < 2.0 {
        Ok(())
    } else {
        Err(SilError::Domain(format!("α must lie in (1, 2), got {alpha}")))
    }
}

/// A compact convex body containing the origin, given by its gauge `j_C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexBody {
    spec: BodySpec,
    /// Diagonal of the ellipsoid quadratic form; `j_E(x)² = Σ a_i x_i²`.
    a: Vec<f64>,
}

struct Derivs {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

const CONVEXITY_SAMPLES: usize = 2000;

impl ConvexBody {
    pub fn new(spec: BodySpec) -> Result<Self> {
        let n = spec.n;
        if n == 0 {
            return Err(SilError::Input("n must be positive".into()));
        }
        if spec.radii.len() != n {
            return Err(SilError::Input(format!("radii: expected {n} entries, got {}", spec.radii.len())));
        }
        if let Some(&r) = spec.radii.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
            return Err(SilError::Input(format!("radii: every radius must be positive, got {r}")));
        }
        if let Some(alpha) = spec.alpha {
            check_alpha(alpha).map_err(|e| SilError::Input(format!("alpha: {e}")))?;
        }
        match (spec.kind, &spec.perturbation) {
            (BodyKind::Perturbed, None) => {
                return Err(SilError::Input("perturbation: required for kind \"perturbed\"".into()))
            }
            (BodyKind::Ellipsoid, Some(_)) => {
                return Err(SilError::Input("perturbation: not allowed for kind \"ellipsoid\"".into()))
            }
            (_, Some(p)) => {
                if !p.epsilon.is_finite() {
                    return Err(SilError::Input("perturbation.epsilon: must be finite".into()));
                }
                for t in &p.terms {
                    if t.exponents.len() != 2 * n {
                        return Err(SilError::Input(format!(
                            "perturbation.terms.exponents: expected {} entries, got {}",
                            2 * n,
                            t.exponents.len()
                        )));
                    }
                    if !t.coefficient.is_finite() {
                        return Err(SilError::Input("perturbation.terms.coefficient: must be finite".into()));
                    }
                }
            }
            _ => {}
        }
        let mut a = vec![0.0; 2 * n];
        for (k, r) in spec.radii.iter().enumerate() {
            a[k] = 1.0 / (2.0 * r * r);
            a[k + n] = a[k];
        }
        let body = Self { spec, a };
        if body.spec.kind == BodyKind::Perturbed {
            body.check_convexity(CONVEXITY_SAMPLES)?;
        }
        Ok(body)
    }

    pub fn ellipsoid(radii: &[f64]) -> Result<Self> {
        Self::new(BodySpec::ellipsoid(radii))
    }

    pub fn spec(&self) -> &BodySpec {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn dim(&self) -> usize {
        2 * self.spec.n
    }

    pub fn kind(&self) -> BodyKind {
        self.spec.kind
    }

    pub fn radii(&self) -> &[f64] {
        &self.spec.radii
    }

    pub fn alpha(&self) -> f64 {
        self.spec.alpha.unwrap_or(DEFAULT_ALPHA)
    }

    /// `j_C(−x) = j_C(x)`: every perturbation term has even degree.
    pub fn is_symmetric(&self) -> bool {
        match &self.spec.perturbation {
            None => true,
            Some(p) => p.epsilon == 0.0 || p.terms.iter().all(|t| t.degree() % 2 == 0),
        }
    }

    fn check_dim(&self, x: &DVector<f64>) {
        assert_eq!(x.len(), self.dim(), "point has wrong dimension");
    }

    fn ellipsoid_derivs(&self, x: &DVector<f64>) -> Derivs {
        let ax = DVector::from_iterator(x.len(), x.iter().zip(&self.a).map(|(xi, ai)| xi * ai));
        let value = x.dot(&ax).sqrt();
        let grad = &ax / value;
        let mut hess = DMatrix::from_diagonal(&DVector::from_column_slice(&self.a)) / value;
        hess -= (&ax * ax.transpose()) / (value * value * value);
        Derivs { value, grad, hess }
    }

    /// `p(x) = Σ c·x^k/|x|^{|k|}` with gradient and Hessian.
    fn perturbation_derivs(&self, x: &DVector<f64>, p: &Perturbation) -> Derivs {
        let d = x.len();
        let r2 = x.norm_squared();
        let mut value = 0.0;
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for t in &p.terms {
            let deg = t.degree() as i32;
            let (q, gq, hq) = monomial(x, &t.exponents);
            let s = r2.powf(-deg as f64 / 2.0);
            let gs = x * (-(deg as f64) * s / r2);
            let mut hs = DMatrix::identity(d, d) * (-(deg as f64) * s / r2);
            hs += (x * x.transpose()) * ((deg * (deg + 2)) as f64 * s / (r2 * r2));
            value += t.coefficient * q * s;
            grad += (&gq * s + &gs * q) * t.coefficient;
            hess += (&hq * s + &gq * gs.transpose() + &gs * gq.transpose() + hs * q) * t.coefficient;
        }
        Derivs { value, grad, hess }
    }

    fn derivs(&self, x: &DVector<f64>) -> Derivs {
        let e = self.ellipsoid_derivs(x);
        match &self.spec.perturbation {
            None => e,
            Some(p) => {
                let pd = self.perturbation_derivs(x, p);
                let factor = 1.0 + p.epsilon * pd.value;
                let gp = &pd.grad * p.epsilon;
                let value = e.value * factor;
                let grad = &e.grad * factor + &gp * e.value;
                let hess = &e.hess * factor + &e.grad * gp.transpose() + &gp * e.grad.transpose() + &pd.hess * (p.epsilon * e.value);
                Derivs { value, grad, hess }
            }
        }
    }

    /// The gauge `j_C(x)`, 1-homogeneous; `j_C(0) = 0`.
    pub fn gauge(&self, x: &DVector<f64>) -> f64 {
        self.check_dim(x);
        if x.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let e = {
            let ax: f64 = x.iter().zip(&self.a).map(|(xi, ai)| ai * xi * xi).sum();
            ax.sqrt()
        };
        match &self.spec.perturbation {
            None => e,
            Some(p) => {
                let r2 = x.norm_squared();
                let mut val = 0.0;
                for t in &p.terms {
                    let q: f64 = x.iter().zip(&t.exponents).map(|(xi, &k)| xi.powi(k as i32)).product();
                    val += t.coefficient * q * r2.powf(-(t.degree() as f64) / 2.0);
                }
                e * (1.0 + p.epsilon * val)
            }
        }
    }

    pub fn gauge_grad(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x);
        self.nonzero(x)?;
        Ok(self.derivs(x).grad)
    }

    pub fn gauge_hess(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_dim(x);
        self.nonzero(x)?;
        Ok(self.derivs(x).hess)
    }

    fn nonzero(&self, x: &DVector<f64>) -> Result<()> {
        if x.norm() <= 1e-300 {
            Err(SilError::Singularity("the gauge is not differentiable at the origin".into()))
        } else {
            Ok(())
        }
    }

    /// Point `x` with `j_C(x) ∇j_C(x) = y`; then `j_C(x) = j_{C°}(y)`.
    fn polar_solve(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let mut x = DVector::from_iterator(y.len(), y.iter().zip(&self.a).map(|(yi, ai)| yi / ai));
        if self.spec.perturbation.is_none() {
            return Ok(x);
        }
        let scale = y.norm();
        for _ in 0..100 {
            let d = self.derivs(&x);
            let f = &d.grad * d.value - y;
            let fnorm = f.norm();
            if fnorm <= 1e-14 * scale {
                return Ok(x);
            }
            let jac = &d.grad * d.grad.transpose() + &d.hess * d.value;
            let step = jac
                .lu()
                .solve(&f)
                .ok_or_else(|| SilError::Unsupported("polar gauge: singular Newton system".into()))?;
            let mut lambda = 1.0;
            loop {
                let trial = &x - &step * lambda;
                let dt = self.derivs(&trial);
                if (&dt.grad * dt.value - y).norm() < fnorm || lambda < 1e-8 {
                    x = trial;
                    break;
                }
                lambda *= 0.5;
            }
        }
        let d = self.derivs(&x);
        if (&d.grad * d.value - y).norm() <= 1e-10 * scale {
            Ok(x)
        } else {
            Err(SilError::Unsupported("polar gauge: support point iteration did not converge".into()))
        }
    }

    /// Polar gauge `j_{C°}(y) = max_{j_C(x) ≤ 1} ⟨x, y⟩`.
    pub fn polar_gauge(&self, y: &DVector<f64>) -> Result<f64> {
        self.check_dim(y);
        if y.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }
        if self.spec.perturbation.is_none() {
            return Ok(y.iter().zip(&self.a).map(|(yi, ai)| yi * yi / ai).sum::<f64>().sqrt());
        }
        Ok(self.gauge(&self.polar_solve(y)?))
    }

    /// The point of `∂C` where `⟨·, y⟩` is maximal, with the polar gauge.
    pub fn support_point(&self, y: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
        self.check_dim(y);
        self.nonzero(y)?;
        let x = self.polar_solve(y)?;
        let jp = self.gauge(&x);
        Ok((x / jp, jp))
    }

    /// Smallest eigenvalue of `∇²(½j²)` over sampled unit directions; an
    /// input error if it is not positive.
    pub fn check_convexity(&self, samples: usize) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let d = self.dim();
        let mut worst = f64::INFINITY;
        for _ in 0..samples {
            let x = DVector::from_iterator(d, (0..d).map(|_| rng.random_range(-1.0..1.0)));
            if x.norm() < 1e-3 {
                continue;
            }
            let x = x.normalize();
            let dv = self.derivs(&x);
            if !(dv.value > 0.0) {
                return Err(SilError::Input("perturbation: the gauge is not positive".into()));
            }
            let h = &dv.grad * dv.grad.transpose() + &dv.hess * dv.value;
            let m = h.symmetric_eigenvalues().min();
            worst = worst.min(m);
        }
        if worst <= 0.0 {
            return Err(SilError::Input(format!(
                "perturbation: the body is not strictly convex (Hessian eigenvalue {worst:.3e})"
            )));
        }
        Ok(worst)
    }
}

/// `x^k` with gradient and Hessian.
fn monomial(x: &DVector<f64>, k: &[u32]) -> (f64, DVector<f64>, DMatrix<f64>) {
    let d = x.len();
    let pow = |i: usize, e: i64| -> f64 {
        if e < 0 {
            0.0
        } else {
            x[i].powi(e as i32)
        }
    };
    let value: f64 = (0..d).map(|i| pow(i, k[i] as i64)).product();
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        if k[i] == 0 {
            continue;
        }
        let others: f64 = (0..d).filter(|&l| l != i).map(|l| pow(l, k[l] as i64)).product();
        grad[i] = k[i] as f64 * pow(i, k[i] as i64 - 1) * others;
        if k[i] >= 2 {
            hess[(i, i)] = (k[i] * (k[i] - 1)) as f64 * pow(i, k[i] as i64 - 2) * others;
        }
        for l in 0..d {
            if l == i || k[l] == 0 {
                continue;
            }
            let rest: f64 = (0..d).filter(|&s| s != i && s != l).map(|s| pow(s, k[s] as i64)).product();
            hess[(i, l)] =
                (k[i] * k[l]) as f64 * pow(i, k[i] as i64 - 1) * pow(l, k[l] as i64 - 1) * rest;
        }
    }
    (value, grad, hess)
}

/// `H_α(x) = j_C(x)^α`.
pub fn hamiltonian(body: &ConvexBody, alpha: f64, x: &DVector<f64>) -> f64 {
    body.gauge(x).powf(alpha)
}

/// `∇H = α j^{α−1} ∇j`; zero at the origin.
pub fn hamiltonian_gradient(body: &ConvexBody, alpha: f64, x: &DVector<f64>) -> DVector<f64> {
    if x.iter().all(|&v| v == 0.0) {
        return DVector::zeros(x.len());
    }
    let d = body.derivs(x);
    d.grad * (alpha * d.value.powf(alpha - 1.0))
}

/// `∇²H = α j^{α−1} ∇²j + α(α−1) j^{α−2} ∇j∇jᵀ`.
pub fn hamiltonian_hessian(body: &ConvexBody, alpha: f64, x: &DVector<f64>) -> Result<DMatrix<f64>> {
    body.check_dim(x);
    if x.norm() <= 1e-12 {
        return Err(SilError::Singularity(format!("Hessian of H requested at |x| = {:.3e}", x.norm())));
    }
    let d = body.derivs(x);
    let j = d.value;
    Ok(&d.hess * (alpha * j.powf(alpha - 1.0)) + (&d.grad * d.grad.transpose()) * (alpha * (alpha - 1.0) * j.powf(alpha - 2.0)))
}

/// Conjugate exponent `β = α/(α − 1)`.
pub fn conjugate_exponent(alpha: f64) -> f64 {
    alpha / (alpha - 1.0)
}

/// `H*(y) = sup_x {⟨x, y⟩ − H(x)} = (α−1) α^{−β} j_{C°}(y)^β`.
pub fn fenchel_conjugate(body: &ConvexBody, alpha: f64, y: &DVector<f64>) -> Result<f64> {
    check_alpha(alpha)?;
    let jp = body.polar_gauge(y)?;
    let beta = conjugate_exponent(alpha);
    Ok((alpha - 1.0) * alpha.powf(-beta) * jp.powf(beta))
}

/// `∇H*(y)`, the maximiser in the supremum: `(j°/α)^{1/(α−1)}` times the
/// support point of `y`.
pub fn fenchel_gradient(body: &ConvexBody, alpha: f64, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.iter().all(|&v| v == 0.0) {
        return Ok(DVector::zeros(y.len()));
    }
    let (e, jp) = body.support_point(y)?;
    Ok(e * (jp / alpha).powf(1.0 / (alpha - 1.0)))
}

/// Value and gradient of `H*` in one support-point solve.
pub fn fenchel_value_gradient(body: &ConvexBody, alpha: f64, y: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    if y.iter().all(|&v| v == 0.0) {
        return Ok((0.0, DVector::zeros(y.len())));
    }
    let (e, jp) = body.support_point(y)?;
    let beta = conjugate_exponent(alpha);
    let value = (alpha - 1.0) * alpha.powf(-beta) * jp.powf(beta);
    Ok((value, e * (jp / alpha).powf(1.0 / (alpha - 1.0))))
}

/// `∇²H*(y) = [∇²H(∇H*(y))]⁻¹`; zero at the origin.
pub fn fenchel_hessian(body: &ConvexBody, alpha: f64, y: &DVector<f64>) -> Result<DMatrix<f64>> {
    let d = y.len();
    if y.norm() <= 1e-14 {
        return Ok(DMatrix::zeros(d, d));
    }
    let x = fenchel_gradient(body, alpha, y)?;
    let h = hamiltonian_hessian(body, alpha, &x)?;
    h.try_inverse().ok_or_else(|| SilError::Singularity("Hessian of H is singular".into()))
}

/// Coordinate pairs `(j, k)` with `r_j²/r_k² = p/q` for some `q ≤ 50`.
pub fn resonant_pairs(radii: &[f64]) -> Vec<(usize, usize, u64, u64)> {
    let mut out = Vec::new();
    for j in 0..radii.len() {
        for k in j + 1..radii.len() {
            let ratio = (radii[k] * radii[k]) / (radii[j] * radii[j]);
            for q in 1..=50u64 {
                let p = (ratio * q as f64).round();
                if p >= 1.0 && (ratio - p / q as f64).abs() <= 1e-9 * ratio {
                    out.push((j, k, p as u64, q));
                    break;
                }
            }
        }
    }
    out
}
