//! Index theory and closed characteristics on convex hypersurfaces.
//!
//! The crate computes Maslov-type ω-indices, splitting numbers and mean
//! indices of symplectic paths, finds closed characteristics of convex
//! hypersurfaces in `R^{2n}` through the dual action functional, and checks
//! the index-theoretic statements behind the lower bound on their number
//! instance by instance.

pub mod body;
pub mod config;
pub mod dual;
pub mod error;
pub mod index;
pub mod linalg;
pub mod orbit;
pub mod splitting;
pub mod suite;
pub mod symplectic;
pub mod system;
pub mod verifier;

pub use body::{BodyKind, BodySpec, ConvexBody, Perturbation, PerturbationTerm, DEFAULT_ALPHA};
pub use config::Tolerances;
pub use dual::{characteristic_to_u, dual_action, find_critical_points, u_to_characteristic, DualLoop, FinderConfig};
pub use error::{Result, SilError};
pub use index::{
    check_positive_lower_bound, ekeland_index, iterated_index, maslov_index, mean_index, nullity, omega_index,
    CrossingRecord, IndexPair, IndexProfile, MeanIndexReport, OmegaGrid,
};
pub use linalg::UnitPoint;
pub use orbit::{action, classify_symmetry, ellipsoid_characteristics, linearize_orbit, ClosedCharacteristic, SymmetryClass};
pub use splitting::{
    bott_splitting_check, krein_sum_bound, lemma41_check, splitting_numbers, SplittingPair, SplittingProfile,
};
pub use symplectic::{integrate_fundamental, iterate_path, validate_symplectic, LinearSystem, SymplecticMatrix, SymplecticPath};
pub use system::SystemSpec;
pub use verifier::{
    count_theorem_check, covering_injection_check, index_intervals, index_jump_search, search_orbits, symmetric_halfpath_check,
    CountReport, IndexInterval, JumpCertificate, OrbitFamily, OrbitSearch, Verdict, VerifierConfig,
};
