//! Acceptance run: every criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use sil_core::body::{BodySpec, ConvexBody, PerturbationTerm};
use sil_core::dual::characteristic_to_u;
use sil_core::index::{iterated_index_bott, iterated_index_direct, OmegaGrid};
use sil_core::orbit::{ellipsoid_characteristics, symmetry_distances};
use sil_core::splitting::{bott_test_points, krein_sum_bound, lemma41_check, splitting_profile};
use sil_core::suite::{convex_suite, SuiteCase};
use sil_core::symplectic::SymplecticPath;
use sil_core::verifier::{
    count_theorem_check, covering_injection_check, evaluate_certificate, index_jump_search, intervals_from_data, search_orbits,
    JumpEntry, OrbitIndexData, OrbitSearch, Verdict, VerifierConfig,
};
use sil_core::{
    bott_splitting_check, check_positive_lower_bound, dual_action, mean_index, ClosedCharacteristic, IndexProfile, Tolerances, UnitPoint,
};

const ALPHA: f64 = 1.5;

type Check = Result<(bool, String), String>;

fn e2_radii() -> Vec<f64> {
    vec![1.0, 2f64.powf(0.25)]
}

fn e3_radii() -> Vec<f64> {
    vec![1.0, 2f64.powf(0.25), 3f64.powf(1.0 / 3.0)]
}

fn perturbed_e2() -> ConvexBody {
    let terms = vec![
        PerturbationTerm { coefficient: 1.0, exponents: vec![2, 0, 0, 2] },
        PerturbationTerm { coefficient: -0.5, exponents: vec![0, 4, 0, 0] },
        PerturbationTerm { coefficient: 0.3, exponents: vec![1, 1, 1, 1] },
    ];
    ConvexBody::new(BodySpec::perturbed(&e2_radii(), 0.02, terms)).expect("perturbed body")
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

struct Suite {
    cases: Vec<SuiteCase>,
    paths: Vec<SymplecticPath>,
}

fn build_suite(count: usize, dims: &[usize], seed: u64, tol: &Tolerances) -> Result<Suite, String> {
    let cases = convex_suite(count, dims, seed);
    let paths = cases.par_iter().map(|c| c.path(256, tol)).collect::<Result<Vec<_>, _>>().map_err(e)?;
    Ok(Suite { cases, paths })
}

fn criterion_1(suite: &Suite, tol: &Tolerances) -> Check {
    let results: Vec<Result<(usize, Vec<String>), String>> = suite
        .paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut checks = 0;
            let mut bad = Vec::new();
            for m in 1..=6 {
                for z in bott_test_points(p, m, tol).map_err(e)? {
                    let ev = bott_splitting_check(p, m, z, tol).map_err(e)?;
                    checks += 1;
                    if !ev.equal {
                        bad.push(format!("case {i} m={m} θ={:.6}: {:?} vs {:?}", z.angle(), ev.lhs, ev.rhs));
                    }
                }
            }
            Ok((checks, bad))
        })
        .collect();
    let mut checks = 0;
    let mut bad = Vec::new();
    for r in results {
        let (c, b) = r?;
        checks += c;
        bad.extend(b);
    }
    let dims: Vec<usize> = suite.cases.iter().map(|c| c.n).collect();
    let detail = format!(
        "{} paths (Sp(2): {}, Sp(4): {}), m ≤ 6, {checks} identities checked, {} mismatches {}",
        suite.paths.len(),
        dims.iter().filter(|&&n| n == 1).count(),
        dims.iter().filter(|&&n| n == 2).count(),
        bad.len(),
        bad.first().cloned().unwrap_or_default()
    );
    Ok((bad.is_empty() && suite.paths.len() >= 50, detail))
}

fn criterion_2(suite: &Suite, tol: &Tolerances) -> Check {
    let bad: Vec<String> = suite
        .paths
        .par_iter()
        .enumerate()
        .map(|(i, p)| -> Result<Vec<String>, String> {
            let mut bad = Vec::new();
            for m in 1..=6 {
                for w in [UnitPoint::ONE, UnitPoint::MINUS_ONE] {
                    let (b, d) = if w.is_one() {
                        (iterated_index_bott(p, m, tol).map_err(e)?, iterated_index_direct(p, m, tol).map_err(e)?)
                    } else {
                        let profile = IndexProfile::build(p, tol).map_err(e)?;
                        let bott: sil_core::IndexPair = (0..m)
                            .map(|k| profile.at(UnitPoint::root(w, m, k).angle()))
                            .sum();
                        let it = sil_core::iterate_path(p, m).map_err(e)?;
                        (bott, sil_core::omega_index(&it, w, tol).map_err(e)?)
                    };
                    if b != d {
                        bad.push(format!("case {i} m={m} ω={:.3}: {b:?} vs {d:?}", w.angle()));
                    }
                }
            }
            Ok(bad)
        })
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok((bad.is_empty(), format!("{} paths, m ≤ 6, ω = ±1, {} disagreements {}", suite.paths.len(), bad.len(), bad.first().cloned().unwrap_or_default())))
}

fn criterion_3(suite: &Suite, tol: &Tolerances) -> Check {
    let res: Vec<bool> = suite.paths.par_iter().map(|p| check_positive_lower_bound(p, tol).map_err(e)).collect::<Result<_, _>>()?;
    let fails = res.iter().filter(|b| !**b).count();
    let mut per_n = [0usize; 3];
    for c in &suite.cases {
        per_n[c.n - 1] += 1;
    }
    Ok((fails == 0 && res.len() >= 200, format!("{} systems (n=1: {}, n=2: {}, n=3: {}), {fails} with i_τ < n", res.len(), per_n[0], per_n[1], per_n[2])))
}

fn criterion_4(suite: &Suite, tol: &Tolerances) -> Check {
    let rows: Vec<(usize, usize, usize)> = suite
        .paths
        .par_iter()
        .map(|p| -> Result<(usize, usize, usize), String> {
            let prof = splitting_profile(p, tol).map_err(e)?;
            let neg = prof.entries.iter().filter(|s| s.s_plus < 0 || s.s_minus < 0).count();
            let krein = krein_sum_bound(p, tol).map_err(e)?;
            Ok((prof.entries.len(), neg, usize::from(!krein.holds)))
        })
        .collect::<Result<_, _>>()?;
    let points: usize = rows.iter().map(|r| r.0).sum();
    let neg: usize = rows.iter().map(|r| r.1).sum();
    let krein: usize = rows.iter().map(|r| r.2).sum();
    Ok((neg == 0 && krein == 0, format!("{} paths, {points} eigenvalue points: {neg} negative splitting numbers, {krein} sum-bound violations", rows.len())))
}

fn criterion_5(suite: &Suite, tol: &Tolerances) -> Check {
    let ev: Vec<_> = suite.paths.par_iter().map(|p| lemma41_check(p, tol).map_err(e)).collect::<Result<_, _>>()?;
    let applicable = ev.iter().filter(|x| x.applicable).count();
    let fails = ev.iter().filter(|x| !x.holds).count();
    Ok((fails == 0, format!("{applicable} applicable paths of {}, {fails} violations", ev.len())))
}

fn criterion_6(suite: &Suite, ellipsoid_orbits: &[(Vec<f64>, Vec<ClosedCharacteristic>)], tol: &Tolerances) -> Check {
    let grid = OmegaGrid::uniform(4096).map_err(e)?;
    let k = 200usize;
    // report both estimates; the comparison is made here at k = 200
    let lenient = Tolerances { mean_tol: f64::INFINITY, ..*tol };
    let rows: Vec<(usize, f64, f64, f64)> = suite
        .paths
        .par_iter()
        .zip(&suite.cases)
        .map(|(p, c)| -> Result<(usize, f64, f64, f64), String> {
            let profile = IndexProfile::build(p, tol).map_err(e)?;
            let quad = sil_core::index::mean_index_from_profile(&profile, &grid, k, &lenient).map_err(e)?;
            let limit = profile.iterate(k).index as f64 / k as f64;
            // far iterate, to tell quadrature error from the O(n/k) lag of the limit
            let far = profile.iterate(100 * k).index as f64 / (100 * k) as f64;
            Ok((c.n, quad.quadrature, limit, far))
        })
        .collect::<Result<_, _>>()?;
    let worst = rows.iter().map(|r| (r.1 - r.2).abs()).fold(0.0, f64::max);
    let fails: Vec<&(usize, f64, f64, f64)> = rows.iter().filter(|r| (r.1 - r.2).abs() > 1e-2).collect();
    // the library report, which also checks the exact circle average
    let report_ok = suite.paths.iter().take(10).all(|p| mean_index(p, &grid, tol).map(|r| r.agree).unwrap_or(false));

    let mut lowest = f64::INFINITY;
    let mut orbit_count = 0;
    for (radii, orbits) in ellipsoid_orbits {
        let body = ConvexBody::ellipsoid(radii).map_err(e)?;
        for x in orbits {
            let d = OrbitIndexData::build(&body, ALPHA, x, 4096, tol).map_err(e)?;
            lowest = lowest.min(d.mean);
            orbit_count += 1;
        }
    }
    let per_n: Vec<String> = [1, 2, 3]
        .iter()
        .map(|&n| {
            let w = rows.iter().filter(|r| r.0 == n).map(|r| (r.1 - r.2).abs()).fold(0.0, f64::max);
            format!("n={n}: {w:.4}")
        })
        .collect();
    let far_gap = fails.iter().map(|r| (r.1 - r.3).abs()).fold(0.0, f64::max);
    let pass = fails.is_empty() && report_ok && lowest >= 2.0 - 1e-9;
    Ok((
        pass,
        format!(
            "{} paths: max |quadrature − i_200/200| = {worst:.4} [{}] ({} above 1e-2{}; on those |quadrature − i_20000/20000| ≤ {far_gap:.1e}); {orbit_count} ellipsoid orbits, min î = {lowest:.6}",
            rows.len(),
            per_n.join(", "),
            fails.len(),
            fails.first().map(|f| format!(", first at n = {}", f.0)).unwrap_or_default()
        ),
    ))
}

fn criterion_7(found: &[(String, Vec<f64>, OrbitSearch)], tol: &Tolerances) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, radii, search) in found {
        let body = ConvexBody::ellipsoid(radii).map_err(e)?;
        let n = radii.len();
        let worst_res = search.orbits.iter().map(|x| x.residual(&body)).fold(0.0, f64::max);
        let worst_half = search.orbits.iter().map(|x| symmetry_distances(x).half_period).fold(0.0, f64::max);
        let ok = search.orbits.len() == n && worst_res <= 1e-6 && worst_half <= 1e-8;
        let _ = tol;
        pass &= ok;
        parts.push(format!(
            "{name}: {} orbits from {} seeds ({} converged), max residual {worst_res:.1e}, max half-period defect {worst_half:.1e}",
            search.orbits.len(),
            search.seeds,
            search.converged
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn criterion_8(found: &[(String, Vec<f64>, OrbitSearch)], perturbed: &OrbitSearch) -> Check {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    let mut bodies: Vec<(ConvexBody, &OrbitSearch)> = Vec::new();
    for (_, radii, s) in found {
        bodies.push((ConvexBody::ellipsoid(radii).map_err(e)?, s));
    }
    bodies.push((perturbed_e2(), perturbed));
    for (body, s) in &bodies {
        for x in &s.orbits {
            for m in 1..=3 {
                let u = characteristic_to_u(x, m, ALPHA, None).map_err(e)?;
                let f = dual_action(body, ALPHA, &u).map_err(e)?;
                let expected = -(1.0 - ALPHA / 2.0) * (2.0 * m as f64 * x.action / ALPHA).powf(-ALPHA / (2.0 - ALPHA));
                worst = worst.max((f - expected).abs() / expected.abs());
                count += 1;
            }
        }
    }
    Ok((count > 0 && worst <= 1e-6, format!("{count} (orbit, m) pairs, max relative error {worst:.2e}")))
}

struct IndexedBody {
    name: String,
    n: usize,
    data: Vec<Arc<OrbitIndexData>>,
}

fn criterion_9(bodies: &[IndexedBody]) -> Check {
    let mut total = 0;
    let mut errors = Vec::new();
    for b in bodies {
        for (k, d) in b.data.iter().enumerate() {
            match intervals_from_data(k, d, b.n, 20) {
                Ok(iv) => total += iv.len(),
                Err(err) => errors.push(format!("{} orbit {k}: {err}", b.name)),
            }
        }
    }
    Ok((errors.is_empty(), format!("{total} intervals over {} bodies, {} violations {}", bodies.len(), errors.len(), errors.join("; "))))
}

fn criterion_10(bodies: &[IndexedBody]) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for b in bodies {
        let fams: Vec<_> =
            b.data.iter().enumerate().map(|(k, d)| intervals_from_data(k, d, b.n, 21)).collect::<Result<_, _>>().map_err(e)?;
        let full = covering_injection_check(&fams, b.n, 20);
        let mut controls = 0;
        for drop in 0..fams.len() {
            let partial: Vec<_> = fams.iter().enumerate().filter(|(k, _)| *k != drop).map(|(_, f)| f.clone()).collect();
            if !covering_injection_check(&partial, b.n, 20).verdict {
                controls += 1;
            }
        }
        let ok = full.verdict && full.uncovered.is_empty() && controls == fams.len();
        pass &= ok;
        parts.push(format!("{}: matching {}, {controls}/{} removals break coverage", b.name, if full.verdict { "found" } else { "missing" }, fams.len()));
    }
    Ok((pass, parts.join("; ")))
}

fn criterion_11(e2: &IndexedBody, e2_orbits: &[ClosedCharacteristic], tol: &Tolerances) -> Check {
    let entries: Vec<JumpEntry> = e2.data.iter().enumerate().map(|(k, d)| JumpEntry { orbit: k, power: 1, data: d.clone() }).collect();
    let certs = index_jump_search(&entries, 2, 10_000, entries.len(), 0, tol).map_err(e)?;
    let valid = certs.iter().filter(|c| c.valid()).count();
    // recompute from freshly integrated paths
    let body = ConvexBody::ellipsoid(&e2_radii()).map_err(e)?;
    let fresh: Vec<JumpEntry> = e2_orbits
        .iter()
        .enumerate()
        .map(|(k, x)| OrbitIndexData::build(&body, ALPHA, x, 4096, tol).map(|d| JumpEntry { orbit: k, power: 1, data: Arc::new(d) }))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let idempotent = certs.iter().all(|c| &evaluate_certificate(&fresh, c.big_n, &c.m, 2, fresh.len(), 0, tol) == c);
    let first: Vec<usize> = certs.iter().take(5).map(|c| c.big_n).collect();
    Ok((
        valid >= 3 && valid == certs.len() && idempotent,
        format!("{} certificates with N ≤ 10⁴ (first N: {first:?}), {valid} valid, recomputation {}", certs.len(), if idempotent { "identical" } else { "differs" }),
    ))
}

fn criterion_12(cases: &[(String, ConvexBody, Vec<ClosedCharacteristic>)], cfg: &VerifierConfig, tol: &Tolerances) -> Check {
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, body, orbits) in cases {
        let rep = count_theorem_check(body, ALPHA, orbits, cfg, tol).map_err(e)?;
        let ok = rep.verdict == Verdict::Pass && rep.total >= rep.n;
        pass &= ok;
        parts.push(format!(
            "{name}: q₁={} q₂={} total={} ≥ n={} verdict {:?}{}",
            rep.q1,
            rep.q2,
            rep.total,
            rep.n,
            rep.verdict,
            rep.certificate.as_ref().map(|c| format!(" (N={})", c.big_n)).unwrap_or_default()
        ));
        if !ok {
            parts.push(format!("diagnostics: {:?}", rep.diagnostics));
        }
    }
    Ok((pass, parts.join("; ")))
}

fn report(id: usize, name: &str, start: Instant, budget: Option<f64>, outcome: Check, failures: &mut usize) {
    let secs = start.elapsed().as_secs_f64();
    let (mut pass, detail) = match outcome {
        Ok(x) => x,
        Err(msg) => (false, format!("error: {msg}")),
    };
    let mut timing = format!("{secs:.1} s");
    if let Some(b) = budget {
        if secs > b {
            pass = false;
            timing.push_str(&format!(", over the {b:.0} s budget"));
        }
    }
    if !pass {
        *failures += 1;
    }
    println!("criterion {id:>2} [{}] {name}: {detail} ({timing})", if pass { "PASS" } else { "FAIL" });
}

fn main() {
    let tol = Tolerances::default();
    let mut failures = 0;
    let t_all = Instant::now();

    let small = build_suite(60, &[1, 2], 20_241, &tol);
    let large = build_suite(210, &[1, 2, 3], 31_337, &tol);

    let t = Instant::now();
    let c = small.as_ref().map_err(Clone::clone).and_then(|s| criterion_1(s, &tol));
    report(1, "root-sum identity for splitting numbers", t, Some(120.0), c, &mut failures);

    let t = Instant::now();
    let c = small.as_ref().map_err(Clone::clone).and_then(|s| criterion_2(s, &tol));
    report(2, "iterated index, root sum vs literal iterate", t, Some(120.0), c, &mut failures);

    let t = Instant::now();
    let c = large.as_ref().map_err(Clone::clone).and_then(|s| criterion_3(s, &tol));
    report(3, "positive paths have i_τ ≥ n", t, None, c, &mut failures);

    let t = Instant::now();
    let c = large.as_ref().map_err(Clone::clone).and_then(|s| criterion_4(s, &tol));
    report(4, "splitting numbers nonnegative, Krein sum ≤ n", t, None, c, &mut failures);

    let t = Instant::now();
    let c = large.as_ref().map_err(Clone::clone).and_then(|s| criterion_5(s, &tol));
    report(5, "i_2τ + 2S⁺_{M²}(1) − ν_2τ ≥ n when i_τ ≥ n", t, None, c, &mut failures);

    let t = Instant::now();
    let analytic: Vec<(Vec<f64>, Vec<ClosedCharacteristic>)> = [vec![1.0], e2_radii(), e3_radii()]
        .into_iter()
        .map(|r| {
            let o = ellipsoid_characteristics(&r, ALPHA, &tol).expect("ellipsoid orbits").orbits;
            (r, o)
        })
        .collect();
    let c = large.as_ref().map_err(Clone::clone).and_then(|s| criterion_6(s, &analytic, &tol));
    report(6, "mean index: quadrature vs i_200/200, î ≥ 2 on ellipsoids", t, None, c, &mut failures);

    let cfg = VerifierConfig::default();
    let t = Instant::now();
    let found: Result<Vec<(String, Vec<f64>, OrbitSearch)>, String> = [("E_2", e2_radii()), ("E_3", e3_radii())]
        .into_iter()
        .map(|(name, r)| {
            let body = ConvexBody::ellipsoid(&r).map_err(e)?;
            let s = search_orbits(&body, ALPHA, &cfg, &tol).map_err(e)?;
            Ok((name.to_string(), r, s))
        })
        .collect();
    let c = found.as_ref().map_err(Clone::clone).and_then(|f| criterion_7(f, &tol));
    report(7, "weakly non-resonant ellipsoids have exactly n orbits", t, Some(600.0), c, &mut failures);

    let t_pert = Instant::now();
    let pert_body = perturbed_e2();
    let perturbed = search_orbits(&pert_body, ALPHA, &cfg, &tol).map_err(e);
    let pert_secs = t_pert.elapsed().as_secs_f64();

    let t = Instant::now();
    let c = match (&found, &perturbed) {
        (Ok(f), Ok(p)) => criterion_8(f, p),
        (Err(x), _) | (_, Err(x)) => Err(x.clone()),
    };
    report(8, "critical values of iterated loops", t, None, c, &mut failures);

    let t = Instant::now();
    let indexed: Result<Vec<IndexedBody>, String> = found.as_ref().map_err(Clone::clone).and_then(|f| {
        f.iter()
            .map(|(name, r, s)| {
                let body = ConvexBody::ellipsoid(r).map_err(e)?;
                let data = s
                    .orbits
                    .par_iter()
                    .map(|x| OrbitIndexData::build(&body, ALPHA, x, cfg.path_steps, &tol).map(Arc::new))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(e)?;
                Ok(IndexedBody { name: name.clone(), n: r.len(), data })
            })
            .collect()
    });
    let c = indexed.as_ref().map_err(Clone::clone).and_then(|b| criterion_9(b));
    report(9, "index gaps ≥ 2 and disjoint intervals, m ≤ 20", t, None, c, &mut failures);

    let t = Instant::now();
    let c = indexed.as_ref().map_err(Clone::clone).and_then(|b| criterion_10(b));
    report(10, "covering of 2k − 2 + n with distinct representatives", t, None, c, &mut failures);

    let t = Instant::now();
    let c = match (&indexed, &found) {
        (Ok(b), Ok(f)) => criterion_11(&b[0], &f[0].2.orbits, &tol),
        (Err(x), _) | (_, Err(x)) => Err(x.clone()),
    };
    report(11, "common index jump certificates on E_2", t, Some(300.0), c, &mut failures);

    let t = Instant::now();
    let c = match (&found, &perturbed) {
        (Ok(f), Ok(p)) => {
            let mut cases: Vec<(String, ConvexBody, Vec<ClosedCharacteristic>)> = f
                .iter()
                .map(|(name, r, s)| (name.clone(), ConvexBody::ellipsoid(r).expect("ellipsoid"), s.orbits.clone()))
                .collect();
            cases.push(("perturbed E_2 (ε = 0.02)".into(), pert_body.clone(), p.orbits.clone()));
            criterion_12(&cases, &cfg, &tol)
        }
        (Err(x), _) | (_, Err(x)) => Err(x.clone()),
    };
    // the orbit searches feeding this verdict count toward its budget
    let budget = 900.0 - pert_secs;
    report(12, "count verdict total ≥ n", t, Some(budget), c, &mut failures);

    println!("acceptance: {} of 12 criteria passed in {:.1} s", 12 - failures, t_all.elapsed().as_secs_f64());
    if failures > 0 {
        std::process::exit(1);
    }
}
