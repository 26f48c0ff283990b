//! Reproducible random families of positive definite periodic systems.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::Result;
use crate::symplectic::{integrate_fundamental, LinearSystem, SymplecticPath};

/// Parameters of one random system `B(t) = B₀ + Σ_j C_j cos(2πjt/τ) + D_j sin(2πjt/τ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub id: usize,
    pub n: usize,
    pub period: f64,
    pub seed: u64,
    pub base: DMatrix<f64>,
    pub cos_terms: Vec<DMatrix<f64>>,
    pub sin_terms: Vec<DMatrix<f64>>,
    /// `λ_min(B₀) − Σ(‖C_j‖₂ + ‖D_j‖₂)`, a lower bound for `λ_min(B(t))`.
    pub certified_margin: f64,
}

fn random_symmetric(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&a + a.transpose()) * (0.5 * scale)
}

fn spectral(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigenvalues().amax()
}

impl SuiteCase {
    /// Draw one case; everything depends only on `seed`.
    pub fn random(id: usize, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 2 * n;
        let period = rng.random_range(0.5..4.0);
        let harmonics = 2;
        let mut cos_terms = Vec::with_capacity(harmonics);
        let mut sin_terms = Vec::with_capacity(harmonics);
        let mut wobble = 0.0;
        for _ in 0..harmonics {
            let (sc, ss) = (rng.random_range(0.0..0.4), rng.random_range(0.0..0.4));
            let c = random_symmetric(&mut rng, d, sc);
            let s = random_symmetric(&mut rng, d, ss);
            wobble += spectral(&c) + spectral(&s);
            cos_terms.push(c);
            sin_terms.push(s);
        }
        let floor = rng.random_range(0.05..0.6);
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let spread = rng.random_range(0.3..2.5);
        let mut base = (&a * a.transpose()) * (spread / d as f64);
        for i in 0..d {
            base[(i, i)] += floor + wobble;
        }
        let lmin = base.clone().symmetric_eigenvalues().min();
        Self { id, n, period, seed, base, cos_terms, sin_terms, certified_margin: lmin - wobble }
    }

    pub fn system(&self, tol: &Tolerances) -> Result<LinearSystem> {
        let (b0, c, s, tau) = (self.base.clone(), self.cos_terms.clone(), self.sin_terms.clone(), self.period);
        let sys = LinearSystem::new(
            self.n,
            self.period,
            move |t| {
                let mut b = b0.clone();
                for (j, (cj, sj)) in c.iter().zip(&s).enumerate() {
                    let (sn, cs) = (TAU * (j + 1) as f64 * t / tau).sin_cos();
                    b += cj * cs + sj * sn;
                }
                b
            },
            tol.sym_tol,
        )?;
        Ok(sys.with_certified_margin(self.certified_margin))
    }

    /// Fundamental solution over one period on at least `min_steps` steps.
    pub fn path(&self, min_steps: usize, tol: &Tolerances) -> Result<SymplecticPath> {
        let sys = self.system(tol)?;
        let steps = sys.recommended_steps(min_steps);
        integrate_fundamental(&sys, steps, tol)
    }
}

/// `count` cases cycling through the dimensions in `dims`.
pub fn convex_suite(count: usize, dims: &[usize], seed: u64) -> Vec<SuiteCase> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let case_seed: u64 = master.random();
            SuiteCase::random(i, dims[i % dims.len()], case_seed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_are_certified() {
        for case in convex_suite(30, &[1, 2, 3], 5) {
            assert!(case.certified_margin > 0.0);
            assert!((0.5..4.0).contains(&case.period));
            let sys = case.system(&Tolerances::default()).unwrap();
            assert_eq!(sys.margin(), Some(case.certified_margin));
            for i in 0..50 {
                let b = sys.eval(case.period * i as f64 / 50.0);
                assert!(b.symmetric_eigenvalues().min() >= case.certified_margin - 1e-12);
            }
        }
    }

    #[test]
    fn suite_is_reproducible() {
        assert_eq!(convex_suite(4, &[1, 2], 9), convex_suite(4, &[1, 2], 9));
        assert_ne!(convex_suite(4, &[1, 2], 9), convex_suite(4, &[1, 2], 10));
    }
}
