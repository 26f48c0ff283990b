//! Fixtures shared by the benchmarks.

use sil_core::orbit::ellipsoid_characteristics;
use sil_core::suite::SuiteCase;
use sil_core::{ClosedCharacteristic, ConvexBody, SymplecticPath, Tolerances};

pub const ALPHA: f64 = 1.5;

pub fn e2_radii() -> Vec<f64> {
    vec![1.0, 2f64.powf(0.25)]
}

/// Fundamental solution of a fixed random positive definite system.
pub fn random_path(n: usize, steps: usize) -> SymplecticPath {
    SuiteCase::random(0, n, 0x5eed + n as u64).path(steps, &Tolerances::default()).expect("suite path")
}

pub fn e2_orbits() -> (ConvexBody, Vec<ClosedCharacteristic>) {
    let radii = e2_radii();
    let body = ConvexBody::ellipsoid(&radii).expect("ellipsoid");
    let orbits = ellipsoid_characteristics(&radii, ALPHA, &Tolerances::default()).expect("planar orbits").orbits;
    (body, orbits)
}
