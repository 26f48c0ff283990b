use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use sil_bench::{e2_orbits, ALPHA};
use sil_core::dual::{characteristic_to_u, DualFunctional};
use sil_core::verifier::{index_jump_search, OrbitFamily};
use sil_core::Tolerances;

fn dual_functional(c: &mut Criterion) {
    let (body, orbits) = e2_orbits();
    let mut group = c.benchmark_group("dual_gradient");
    for modes in [8, 32, 64] {
        let f = DualFunctional::new(&body, ALPHA, modes).unwrap();
        let u = characteristic_to_u(&orbits[0], 1, ALPHA, Some(modes)).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(modes), &u, |b, u| b.iter(|| f.value_gradient(u).unwrap()));
    }
    group.finish();
}

fn jump_search(c: &mut Criterion) {
    let tol = Tolerances::default();
    let (body, orbits) = e2_orbits();
    let family = OrbitFamily::build(&body, ALPHA, &orbits, 1024, &tol).unwrap();
    let entries = family.entries();
    c.bench_function("index_jump_search/e2/1000", |b| {
        b.iter(|| index_jump_search(&entries, 2, 1000, family.q1, family.q2, &tol).unwrap())
    });
    c.bench_function("orbit_index_data/e2", |b| b.iter(|| OrbitFamily::build(&body, ALPHA, &orbits, 1024, &tol).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = dual_functional, jump_search
}
criterion_main!(benches);
