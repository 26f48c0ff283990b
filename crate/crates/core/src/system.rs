//! On-disk description of a linear Hamiltonian system whose fundamental
//! solution is to be indexed.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::body::{BodySpec, ConvexBody, DEFAULT_ALPHA};
use crate::config::Tolerances;
use crate::error::{Result, SilError};
use crate::orbit::ellipsoid_characteristics;
use crate::symplectic::{integrate_fundamental, LinearSystem, SymplecticPath};
use crate::verifier::{orbit_path, search_orbits, VerifierConfig};

/// Either a constant matrix `B` over one period, or the linearised flow
/// along a closed characteristic of a body.
///
/// ```json
/// {"kind": "constant", "n": 1, "period": 6.283185307179586, "b": [[1, 0], [0, 1]]}
/// {"kind": "orbit", "body": {"n": 2, "kind": "ellipsoid", "radii": [1, 1.2]}, "orbit": 1}
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SystemSpec {
    Constant {
        n: usize,
        period: f64,
        /// Rows of the `2n × 2n` matrix.
        b: Vec<Vec<f64>>,
    },
    Orbit {
        body: BodySpec,
        /// Position in the list of orbits ordered by action.
        #[serde(default)]
        orbit: usize,
    },
}

impl SystemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SilError::Input(format!("system spec: {e}")))
    }

    pub fn n(&self) -> usize {
        match self {
            SystemSpec::Constant { n, .. } => *n,
            SystemSpec::Orbit { body, .. } => body.n,
        }
    }

    /// Fundamental solution on at least `min_steps` steps. Orbits of
    /// perturbed bodies are located with the default orbit search.
    pub fn path(&self, min_steps: usize, tol: &Tolerances) -> Result<SymplecticPath> {
        match self {
            SystemSpec::Constant { n, period, b } => {
                if *n == 0 {
                    return Err(SilError::Input("n must be positive".into()));
                }
                if !(period.is_finite() && *period > 0.0) {
                    return Err(SilError::Input(format!("period must be positive, got {period}")));
                }
                let d = 2 * n;
                if b.len() != d || b.iter().any(|row| row.len() != d) {
                    return Err(SilError::Input(format!("b: expected a {d} × {d} matrix")));
                }
                let m = DMatrix::from_fn(d, d, |i, j| b[i][j]);
                let sys = LinearSystem::constant(m, *period, tol.sym_tol)?;
                integrate_fundamental(&sys, sys.recommended_steps(min_steps), tol)
            }
            SystemSpec::Orbit { body, orbit } => {
                let alpha = body.alpha.unwrap_or(DEFAULT_ALPHA);
                let convex = ConvexBody::new(body.clone())?;
                let mut orbits = match body.kind {
                    crate::body::BodyKind::Ellipsoid => ellipsoid_characteristics(&body.radii, alpha, tol)?.orbits,
                    crate::body::BodyKind::Perturbed => search_orbits(&convex, alpha, &VerifierConfig::default(), tol)?.orbits,
                };
                orbits.sort_by(|a, b| a.action.total_cmp(&b.action));
                let x = orbits.get(*orbit).ok_or_else(|| {
                    SilError::Input(format!("orbit: index {orbit} out of range, the body has {} orbits", orbits.len()))
                })?;
                orbit_path(&convex, alpha, x, min_steps, tol)
            }
        }
    }
}
