use serde::{Deserialize, Serialize};

use crate::error::{Result, SilError};

/// Every numerical threshold used by the library, in one place.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Bound on `‖MᵀJM − J‖_∞` for a single matrix.
    pub sym_tol: f64,
    /// Bound on the symplectic drift of a stored path, relative to `‖Γ‖²`.
    pub path_tol: f64,
    /// Singular values below `rank_tol · ‖γ(t)‖` count as kernel directions.
    pub rank_tol: f64,
    /// Agreement required between the two mean-index estimates.
    pub mean_tol: f64,
    /// Relative window used when refining crossing times.
    pub crossing_window: f64,
    /// Modulus window for counting eigenvalues as lying on the unit circle.
    pub unit_circle_tol: f64,
    /// Angles this close to 0 or π are snapped onto ±1.
    pub snap_tol: f64,
    /// `|j_C(x) − 1|` bound for points of a closed characteristic.
    pub surface_tol: f64,
    /// Residual bound for `ẋ = J N_Σ(x)` after the time change.
    pub orbit_tol: f64,
    /// Gradient norm at which a dual loop counts as critical.
    pub grad_tol: f64,
    /// Threshold separating symmetric from asymmetric orbits.
    pub sym_orbit_tol: f64,
    /// Modulus window in the ellipticity test of jump certificates.
    pub elliptic_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            sym_tol: 1e-9,
            path_tol: 1e-7,
            rank_tol: 1e-7,
            mean_tol: 1e-2,
            crossing_window: 1e-13,
            unit_circle_tol: 1e-7,
            snap_tol: 1e-4,
            surface_tol: 1e-8,
            orbit_tol: 1e-6,
            grad_tol: 1e-9,
            sym_orbit_tol: 1e-6,
            elliptic_tol: 1e-6,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("sym_tol", self.sym_tol),
            ("path_tol", self.path_tol),
            ("rank_tol", self.rank_tol),
            ("mean_tol", self.mean_tol),
            ("crossing_window", self.crossing_window),
            ("unit_circle_tol", self.unit_circle_tol),
            ("snap_tol", self.snap_tol),
            ("surface_tol", self.surface_tol),
            ("orbit_tol", self.orbit_tol),
            ("grad_tol", self.grad_tol),
            ("sym_orbit_tol", self.sym_orbit_tol),
            ("elliptic_tol", self.elliptic_tol),
        ];
        for (name, v) in all {
            if !(v.is_finite() && v > 0.0) {
                return Err(SilError::Input(format!("tolerance {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}
