//! Instance-level checks of the index-theoretic argument behind the lower
//! bound `#closed characteristics ≥ n` for symmetric convex hypersurfaces:
//! index intervals of iterates, covering by `2k − 2 + n`, common index jump
//! certificates and the final injection table.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::body::{resonant_pairs, BodyKind, ConvexBody};
use crate::config::Tolerances;
use crate::dual::{find_critical_points, planar_seeds, random_seeds, FinderConfig};
use crate::error::{Result, SilError};
use crate::index::{iterated_index, maslov_index, IndexPair, IndexProfile};
use crate::linalg::{eigenvalues, matrix_power};
use crate::orbit::{classify_symmetry, linearize_orbit, ClosedCharacteristic, SymmetryClass};
use crate::symplectic::{integrate_fundamental, SymplecticPath};

/// Settings of the verification pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    /// Minimum integration steps per orbit period.
    pub path_steps: usize,
    pub m_max: usize,
    pub k_max: usize,
    pub n_max: usize,
    pub seeds: usize,
    pub rng_seed: u64,
    pub finder: FinderConfig,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self { path_steps: 4096, m_max: 20, k_max: 20, n_max: 10_000, seeds: 200, rng_seed: 0, finder: FinderConfig::default() }
    }
}

/// Index data of one closed characteristic: the ω-index profile of its
/// linearised flow over one period.
#[derive(Debug, Clone)]
pub struct OrbitIndexData {
    pub tau: f64,
    pub profile: IndexProfile,
    pub end: DMatrix<f64>,
    pub mean: f64,
}

impl OrbitIndexData {
    pub fn build(body: &ConvexBody, alpha: f64, orbit: &ClosedCharacteristic, steps: usize, tol: &Tolerances) -> Result<Self> {
        let path = orbit_path(body, alpha, orbit, steps, tol)?;
        let profile = IndexProfile::build(&path, tol)?;
        let mean = profile.mean();
        Ok(Self { tau: orbit.tau, profile, end: path.end().clone(), mean })
    }

    /// `(i_{mτ}(x^m), ν_{mτ}(x^m))`.
    pub fn pair(&self, m: usize) -> IndexPair {
        self.profile.iterate(m)
    }
}

/// Fundamental solution of the linearised flow along `orbit`.
pub fn orbit_path(body: &ConvexBody, alpha: f64, orbit: &ClosedCharacteristic, steps: usize, tol: &Tolerances) -> Result<SymplecticPath> {
    let sys = linearize_orbit(body, orbit, alpha, tol)?;
    let steps = sys.recommended_steps(steps);
    integrate_fundamental(&sys, steps + steps % 2, tol)
}

/// `[i_{mτ}(x^m), i_{mτ}(x^m) + ν_{mτ}(x^m)]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexInterval {
    pub orbit: usize,
    pub m: usize,
    pub lo: i64,
    pub hi: i64,
}

impl IndexInterval {
    pub fn nullity(&self) -> i64 {
        self.hi - self.lo
    }

    /// `lo ≤ v ≤ hi − 1`.
    pub fn covers(&self, v: i64) -> bool {
        self.lo <= v && v < self.hi
    }
}

/// Intervals for `m = 1..=m_max`, asserting the gap, disjointness, width
/// and mean-index bounds that hold for every closed characteristic of a
/// convex hypersurface.
pub fn intervals_from_data(orbit: usize, data: &OrbitIndexData, n: usize, m_max: usize) -> Result<Vec<IndexInterval>> {
    if m_max == 0 {
        return Err(SilError::Domain("m_max must be at least 1".into()));
    }
    let out: Vec<IndexInterval> = (1..=m_max)
        .map(|m| {
            let p = data.pair(m);
            IndexInterval { orbit, m, lo: p.index, hi: p.index + p.nullity as i64 }
        })
        .collect();
    for iv in &out {
        if iv.hi > iv.lo + 2 * n as i64 {
            return Err(SilError::Consistency(format!("orbit {orbit}, m = {}: nullity {} exceeds 2n", iv.m, iv.nullity())));
        }
    }
    if out[0].lo < n as i64 {
        return Err(SilError::Consistency(format!("orbit {orbit}: i_τ = {} is below n = {n}", out[0].lo)));
    }
    for w in out.windows(2) {
        if w[1].lo - w[0].lo < 2 {
            return Err(SilError::Consistency(format!(
                "orbit {orbit}: index gap {} between m = {} and m = {} is below 2",
                w[1].lo - w[0].lo,
                w[0].m,
                w[1].m
            )));
        }
        if w[1].lo <= w[0].hi - 1 {
            return Err(SilError::Consistency(format!("orbit {orbit}: intervals of m = {} and m = {} overlap", w[0].m, w[1].m)));
        }
    }
    if data.mean < 2.0 - 1e-9 {
        return Err(SilError::Consistency(format!("orbit {orbit}: mean index {} is below 2", data.mean)));
    }
    Ok(out)
}

pub fn index_intervals(
    body: &ConvexBody,
    alpha: f64,
    orbit: &ClosedCharacteristic,
    m_max: usize,
    steps: usize,
    tol: &Tolerances,
) -> Result<Vec<IndexInterval>> {
    let data = OrbitIndexData::build(body, alpha, orbit, steps, tol)?;
    intervals_from_data(0, &data, body.n(), m_max)
}

/// Maximum bipartite matching by augmenting paths. `adj[l]` lists the
/// right vertices of left vertex `l`; returns the partner of each left vertex.
pub fn max_matching(adj: &[Vec<usize>], right: usize) -> Vec<Option<usize>> {
    fn augment(l: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &r in &adj[l] {
            if seen[r] {
                continue;
            }
            seen[r] = true;
            if owner[r].is_none() || augment(owner[r].unwrap(), adj, seen, owner) {
                owner[r] = Some(l);
                return true;
            }
        }
        false
    }
    let mut owner: Vec<Option<usize>> = vec![None; right];
    for l in 0..adj.len() {
        let mut seen = vec![false; right];
        augment(l, adj, &mut seen, &mut owner);
    }
    let mut partner = vec![None; adj.len()];
    for (r, o) in owner.iter().enumerate() {
        if let Some(l) = o {
            partner[*l] = Some(r);
        }
    }
    partner
}

/// One target value `2k − 2 + n` and the `(orbit, m)` whose interval covers it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverRow {
    pub k: usize,
    pub target: i64,
    pub candidates: Vec<(usize, usize)>,
    pub assigned: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub n: usize,
    pub k_max: usize,
    pub rows: Vec<CoverRow>,
    pub uncovered: Vec<usize>,
    /// A system of distinct representatives exists.
    pub injective: bool,
    pub verdict: bool,
    pub warnings: Vec<String>,
}

/// For `k = 1..=k_max`, which iterates have `2k − 2 + n` in their interval,
/// and whether distinct iterates can be chosen for distinct `k`.
pub fn covering_injection_check(families: &[Vec<IndexInterval>], n: usize, k_max: usize) -> CoveringReport {
    let all: Vec<IndexInterval> = families.iter().flatten().copied().collect();
    let mut rows: Vec<CoverRow> = (1..=k_max)
        .map(|k| {
            let target = 2 * k as i64 - 2 + n as i64;
            let candidates = all.iter().filter(|iv| iv.covers(target)).map(|iv| (iv.orbit, iv.m)).collect();
            CoverRow { k, target, candidates, assigned: None }
        })
        .collect();
    let uncovered: Vec<usize> = rows.iter().filter(|r| r.candidates.is_empty()).map(|r| r.k).collect();
    let keys: Vec<(usize, usize)> = all.iter().map(|iv| (iv.orbit, iv.m)).collect();
    let adj: Vec<Vec<usize>> =
        rows.iter().map(|r| r.candidates.iter().map(|c| keys.iter().position(|k| k == c).unwrap()).collect()).collect();
    let partner = max_matching(&adj, keys.len());
    for (row, p) in rows.iter_mut().zip(&partner) {
        row.assigned = p.map(|r| keys[r]);
    }
    let injective = partner.iter().all(Option::is_some);
    let mut warnings = Vec::new();
    if !uncovered.is_empty() {
        warnings.push(format!("values 2k − 2 + n for k in {uncovered:?} are not covered; the orbit set is probably incomplete"));
    }
    CoveringReport { n, k_max, rows, uncovered, injective, verdict: injective, warnings }
}

/// One path entering the common index jump search: the linearised flow of
/// an orbit, iterated `power` times.
#[derive(Debug, Clone)]
pub struct JumpEntry {
    pub orbit: usize,
    pub power: usize,
    pub data: Arc<OrbitIndexData>,
}

impl JumpEntry {
    /// `(i_k^m, ν_k^m)` of the entry's path.
    pub fn pair(&self, m: usize) -> IndexPair {
        self.data.pair(self.power * m)
    }

    /// `S⁺_{M_k}(1)`.
    pub fn s_plus_one(&self) -> i64 {
        self.data.profile.iterate_splitting(self.power, 0.0).0
    }

    pub fn mean(&self) -> f64 {
        self.power as f64 * self.data.mean
    }

    /// Largest distance of a Floquet multiplier of `M_k` from the unit
    /// circle, ignoring the square-root splitting of defective eigenvalues
    /// at `±1` within `snap_tol`.
    pub fn modulus_deviation(&self, tol: &Tolerances) -> f64 {
        let m = matrix_power(&self.data.end, self.power);
        let one = Complex64::new(1.0, 0.0);
        eigenvalues(&m)
            .into_iter()
            .filter(|l| (l - one).norm() > tol.snap_tol && (l + one).norm() > tol.snap_tol)
            .map(|l| (l.norm() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// The six jump conditions for one entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct JumpConditions {
    /// `ν^{2m−1} = ν^1`.
    pub nullity_before: bool,
    /// `ν^{2m+1} = ν^1`.
    pub nullity_after: bool,
    /// `i^{2m−1} + ν^{2m−1} = 2N − (i^1 + 2S⁺(1) − ν^1)`.
    pub jump_before: bool,
    /// `i^{2m+1} = 2N + i^1`.
    pub jump_after: bool,
    /// `i^{2m} ≥ 2N − n`.
    pub lower: bool,
    /// `i^{2m} + ν^{2m} ≤ 2N + n`.
    pub upper: bool,
}

impl JumpConditions {
    pub fn all(&self) -> bool {
        self.nullity_before && self.nullity_after && self.jump_before && self.jump_after && self.lower && self.upper
    }
}

/// An equality case of the two inequalities, where `M_k` must be elliptic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticNote {
    pub entry: usize,
    pub inequality: String,
    pub modulus_deviation: f64,
    pub elliptic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpCertificate {
    #[serde(rename = "N")]
    pub big_n: usize,
    pub m: Vec<usize>,
    pub conditions: Vec<JumpConditions>,
    pub elliptic_notes: Vec<EllipticNote>,
    /// `m_k = 2m_{k+q₂}` for the asymmetric entries; `None` when there are none.
    pub doubling: Option<bool>,
}

impl JumpCertificate {
    pub fn valid(&self) -> bool {
        self.conditions.iter().all(JumpConditions::all)
            && self.elliptic_notes.iter().all(|e| e.elliptic)
            && self.doubling != Some(false)
    }
}

fn conditions(e: &JumpEntry, big_n: usize, m: usize, n: usize) -> JumpConditions {
    let two_n = 2 * big_n as i64;
    let n = n as i64;
    let p1 = e.pair(1);
    let nu1 = p1.nullity as i64;
    let before = e.pair(2 * m - 1);
    let mid = e.pair(2 * m);
    let after = e.pair(2 * m + 1);
    JumpConditions {
        nullity_before: before.nullity == p1.nullity,
        nullity_after: after.nullity == p1.nullity,
        jump_before: before.index + before.nullity as i64 == two_n - (p1.index + 2 * e.s_plus_one() - nu1),
        jump_after: after.index == two_n + p1.index,
        lower: mid.index >= two_n - n,
        upper: mid.index + mid.nullity as i64 <= two_n + n,
    }
}

/// Re-evaluate every condition of a candidate `(N, m₁..m_q)` from the
/// entries. `q1`/`q2` give the layout: symmetric orbits, asymmetric orbits,
/// then the asymmetric orbits doubled.
pub fn evaluate_certificate(entries: &[JumpEntry], big_n: usize, m: &[usize], n: usize, q1: usize, q2: usize, tol: &Tolerances) -> JumpCertificate {
    let conds: Vec<JumpConditions> = entries.iter().zip(m).map(|(e, &mk)| conditions(e, big_n, mk, n)).collect();
    let two_n = 2 * big_n as i64;
    let mut notes = Vec::new();
    for (k, (e, &mk)) in entries.iter().zip(m).enumerate() {
        let mid = e.pair(2 * mk);
        let eq_lower = mid.index == two_n - n as i64;
        let eq_upper = mid.index + mid.nullity as i64 == two_n + n as i64;
        for (hit, name) in [(eq_lower, "lower"), (eq_upper, "upper")] {
            if hit {
                let dev = e.modulus_deviation(tol);
                notes.push(EllipticNote { entry: k, inequality: name.into(), modulus_deviation: dev, elliptic: dev <= tol.elliptic_tol });
            }
        }
    }
    let doubling = (q2 > 0 && entries.len() == q1 + 2 * q2).then(|| (q1..q1 + q2).all(|k| m[k] == 2 * m[k + q2]));
    JumpCertificate { big_n, m: m.to_vec(), conditions: conds, elliptic_notes: notes, doubling }
}

/// All certificates with `N ≤ n_max`. For each `N` the candidates for `m_k`
/// are `round(N/î_k) ± 2`.
pub fn index_jump_search(entries: &[JumpEntry], n: usize, n_max: usize, q1: usize, q2: usize, tol: &Tolerances) -> Result<Vec<JumpCertificate>> {
    if let Some(e) = entries.iter().find(|e| !(e.mean() > 0.0)) {
        return Err(SilError::Domain(format!("entry for orbit {} has mean index {} ≤ 0", e.orbit, e.mean())));
    }
    let mut found: Vec<JumpCertificate> = (1..=n_max)
        .into_par_iter()
        .filter_map(|big_n| {
            let mut ms = Vec::with_capacity(entries.len());
            for e in entries {
                let centre = (big_n as f64 / e.mean()).round() as i64;
                let hit = (centre - 2..=centre + 2)
                    .filter(|&m| m >= 1)
                    .map(|m| m as usize)
                    .find(|&m| conditions(e, big_n, m, n).all())?;
                ms.push(hit);
            }
            Some(evaluate_certificate(entries, big_n, &ms, n, q1, q2, tol))
        })
        .collect();
    found.sort_by_key(|c| c.big_n);
    Ok(found)
}

/// Evidence for `γ(t + τ/2) = γ(t)γ(τ/2)` on a symmetric orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfPathEvidence {
    pub applicable: bool,
    pub max_defect: f64,
    pub full: Option<IndexPair>,
    pub half_iterated: Option<IndexPair>,
    pub holds: bool,
}

/// Check the half-period factorisation of the linearised flow and that the
/// index of the full path is the second iterate of the half path.
pub fn symmetric_halfpath_check(
    body: &ConvexBody,
    alpha: f64,
    orbit: &ClosedCharacteristic,
    steps: usize,
    tol: &Tolerances,
) -> Result<HalfPathEvidence> {
    let skip = HalfPathEvidence { applicable: false, max_defect: 0.0, full: None, half_iterated: None, holds: true };
    if !body.is_symmetric() {
        return Ok(skip);
    }
    if classify_symmetry(body, orbit, tol)? != SymmetryClass::Symmetric {
        return Ok(skip);
    }
    let sys = linearize_orbit(body, orbit, alpha, tol)?;
    let steps = sys.recommended_steps(steps);
    let steps = steps + steps % 2;
    let full = integrate_fundamental(&sys, steps, tol)?;
    let half_sys = sys.with_period(orbit.tau / 2.0)?;
    let half = integrate_fundamental(&half_sys, steps / 2, tol)?;
    let mid = full.matrix(steps / 2).clone();
    let mut defect: f64 = 0.0;
    for i in 0..=steps / 2 {
        let lhs = full.matrix(i + steps / 2);
        let rhs = full.matrix(i) * &mid;
        defect = defect.max((lhs - &rhs).amax() / lhs.amax().max(1.0));
    }
    if defect > 1e-6 {
        return Err(SilError::Consistency(format!("half-period factorisation fails by {defect:.3e} on a symmetric orbit")));
    }
    let full_pair = maslov_index(&full, tol)?;
    let half_pair = iterated_index(&half, 2, tol)?;
    Ok(HalfPathEvidence {
        applicable: true,
        max_defect: defect,
        full: Some(full_pair),
        half_iterated: Some(half_pair),
        holds: full_pair == half_pair,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Inconclusive,
}

/// Per-orbit part of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSummary {
    pub id: usize,
    pub tau: f64,
    pub action: f64,
    pub symmetry: SymmetryClass,
    pub mean_index: f64,
    pub s_plus_one: i64,
    pub intervals: Vec<IndexInterval>,
    pub half_path: Option<HalfPathEvidence>,
}

/// `s ↦ (k(s), m(s))` with `2N − 2s + n` in the interval of `x_{k(s)}^{m(s)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionRow {
    pub s: usize,
    pub target: i64,
    pub orbit: Option<usize>,
    pub m: Option<usize>,
    /// `m(s) = 2m_k` for symmetric classes, `m(s) ∈ {2m_k − 1, 2m_k}` otherwise.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub n: usize,
    pub q1: usize,
    pub q2: usize,
    pub total: usize,
    pub verdict: Verdict,
    pub orbits: Vec<OrbitSummary>,
    pub certificate: Option<JumpCertificate>,
    pub certificates_found: usize,
    /// Certificates examined, in increasing `N`, up to the chosen one.
    pub certificates_tried: usize,
    pub injection: Vec<InjectionRow>,
    pub covering: CoveringReport,
    pub diagnostics: Vec<String>,
}

/// Orbits ordered symmetric first, with their index data.
#[derive(Debug, Clone)]
pub struct OrbitFamily {
    pub orbits: Vec<ClosedCharacteristic>,
    pub q1: usize,
    pub q2: usize,
    pub data: Vec<Arc<OrbitIndexData>>,
}

impl OrbitFamily {
    pub fn build(body: &ConvexBody, alpha: f64, orbits: &[ClosedCharacteristic], steps: usize, tol: &Tolerances) -> Result<Self> {
        let classes: Vec<SymmetryClass> = orbits.iter().map(|x| classify_symmetry(body, x, tol)).collect::<Result<_>>()?;
        let mut order: Vec<usize> = (0..orbits.len()).collect();
        order.sort_by_key(|&i| (classes[i] == SymmetryClass::Asymmetric, i));
        let sorted: Vec<ClosedCharacteristic> = order.iter().map(|&i| orbits[i].clone()).collect();
        let q1 = classes.iter().filter(|c| **c == SymmetryClass::Symmetric).count();
        let data = sorted
            .par_iter()
            .map(|x| OrbitIndexData::build(body, alpha, x, steps, tol).map(Arc::new))
            .collect::<Result<_>>()?;
        Ok(Self { q1, q2: orbits.len() - q1, orbits: sorted, data })
    }

    /// `(τ₁,x₁), …, (τ_q, x_q)` followed by the doubled asymmetric orbits.
    pub fn entries(&self) -> Vec<JumpEntry> {
        let (q1, q2) = (self.q1, self.q2);
        let mut entries: Vec<JumpEntry> = (0..q1 + q2).map(|k| JumpEntry { orbit: k, power: 1, data: self.data[k].clone() }).collect();
        entries.extend((q1..q1 + q2).map(|k| JumpEntry { orbit: k, power: 2, data: self.data[k].clone() }));
        entries
    }
}

/// Assemble the count argument for a symmetric body from a set of
/// geometrically distinct orbits (one representative per `±` pair).
pub fn count_theorem_check(
    body: &ConvexBody,
    alpha: f64,
    orbits: &[ClosedCharacteristic],
    cfg: &VerifierConfig,
    tol: &Tolerances,
) -> Result<CountReport> {
    if !body.is_symmetric() {
        return Err(SilError::Domain("the count argument needs a centrally symmetric body".into()));
    }
    let n = body.n();
    let mut diagnostics = Vec::new();

    let family = OrbitFamily::build(body, alpha, orbits, cfg.path_steps, tol)?;
    let (q1, q2) = (family.q1, family.q2);
    let total = q1 + 2 * q2;
    let sorted = &family.orbits;
    let data = &family.data;

    let mut summaries = Vec::with_capacity(sorted.len());
    let mut families = Vec::with_capacity(sorted.len());
    for (k, (x, d)) in sorted.iter().zip(data).enumerate() {
        let m_needed = cfg.m_max.max(cfg.k_max + 1);
        let intervals = intervals_from_data(k, d, n, m_needed)?;
        let symmetry = if k < q1 { SymmetryClass::Symmetric } else { SymmetryClass::Asymmetric };
        let half_path = match symmetry {
            SymmetryClass::Symmetric => {
                let ev = symmetric_halfpath_check(body, alpha, x, cfg.path_steps, tol)?;
                if !ev.holds {
                    diagnostics.push(format!("orbit {k}: full-path index differs from the doubled half path"));
                }
                Some(ev)
            }
            SymmetryClass::Asymmetric => {
                let neg = OrbitIndexData::build(body, alpha, &x.negated(), cfg.path_steps, tol)?;
                for m in 1..=4 {
                    if neg.pair(m) != d.pair(m) {
                        return Err(SilError::Consistency(format!("orbit {k}: x^{m} and (−x)^{m} have different indices")));
                    }
                }
                None
            }
        };
        families.push(intervals.clone());
        summaries.push(OrbitSummary {
            id: k,
            tau: x.tau,
            action: x.action,
            symmetry,
            mean_index: d.mean,
            s_plus_one: d.profile.splitting(0.0).0,
            intervals: intervals.into_iter().take(cfg.m_max).collect(),
            half_path,
        });
    }
    let covering = covering_injection_check(&families, n, cfg.k_max);
    diagnostics.extend(covering.warnings.iter().cloned());

    let entries = family.entries();
    let certs = if entries.is_empty() { Vec::new() } else { index_jump_search(&entries, n, cfg.n_max, q1, q2, tol)? };
    // the smallest certificate whose injection table can be completed
    let mut certificate = None;
    let mut injection = Vec::new();
    let mut complete = false;
    let mut tried = 0;
    let mut skipped = Vec::new();
    for c in &certs {
        tried += 1;
        if !c.valid() {
            skipped.push(format!("N = {}: ellipticity or doubling check fails", c.big_n));
            continue;
        }
        let (rows, problems) = injection_table(data, q1, q2, n, c);
        if problems.is_empty() {
            certificate = Some(c.clone());
            injection = rows;
            complete = true;
            break;
        }
        skipped.push(format!("N = {}: {}", c.big_n, problems.join(", ")));
        if certificate.is_none() {
            injection = rows;
        }
    }
    if certs.is_empty() {
        diagnostics.push(format!("no common index jump certificate with N ≤ {}", cfg.n_max));
    } else if !complete {
        diagnostics.push(format!("none of the {} certificates gives a complete injection table", certs.len()));
    }
    if !skipped.is_empty() {
        let shown: Vec<&String> = skipped.iter().take(5).collect();
        diagnostics.push(format!("{} certificate(s) rejected, first: {shown:?}", skipped.len()));
    }
    let verdict = if complete && total >= n { Verdict::Pass } else { Verdict::Inconclusive };
    if total < n {
        diagnostics.push(format!("only {total} orbits found for n = {n}; the finder probably missed some"));
    }
    Ok(CountReport {
        n,
        q1,
        q2,
        total,
        verdict,
        orbits: summaries,
        certificate,
        certificates_found: certs.len(),
        certificates_tried: tried,
        injection,
        covering,
        diagnostics,
    })
}

/// Rows `s = 1..=n` for the targets `2N − 2s + n` of a certificate, and
/// the reasons the table is incomplete or inconsistent (empty when usable).
fn injection_table(data: &[Arc<OrbitIndexData>], q1: usize, q2: usize, n: usize, c: &JumpCertificate) -> (Vec<InjectionRow>, Vec<String>) {
    let big_n = c.big_n as i64;
    let targets: Vec<i64> = (1..=n).map(|s| 2 * big_n - 2 * s as i64 + n as i64).collect();
    let mut keys: Vec<(usize, usize)> = Vec::new();
    let mut adj = Vec::with_capacity(n);
    for &t in &targets {
        let mut row = Vec::new();
        for (k, d) in data.iter().enumerate().take(q1 + q2) {
            let centre = (t as f64 / d.mean).round() as i64;
            for m in (centre - 3).max(1)..=centre + 3 {
                let p = d.pair(m as usize);
                if p.index <= t && t < p.index + p.nullity as i64 {
                    let key = (k, m as usize);
                    let idx = keys.iter().position(|x| *x == key).unwrap_or_else(|| {
                        keys.push(key);
                        keys.len() - 1
                    });
                    row.push(idx);
                }
            }
        }
        adj.push(row);
    }
    let partner = max_matching(&adj, keys.len());
    let mut rows = Vec::with_capacity(n);
    for (s, (&t, p)) in targets.iter().zip(&partner).enumerate() {
        let (orbit, m) = match p {
            Some(r) => (Some(keys[*r].0), Some(keys[*r].1)),
            None => (None, None),
        };
        let consistent = match (orbit, m) {
            (Some(k), Some(m)) if k < q1 => m == 2 * c.m[k],
            (Some(k), Some(m)) => m == 2 * c.m[k] || m + 1 == 2 * c.m[k],
            _ => false,
        };
        rows.push(InjectionRow { s: s + 1, target: t, orbit, m, consistent });
    }
    let mut problems = Vec::new();
    let uncovered: Vec<i64> = rows.iter().filter(|r| r.orbit.is_none()).map(|r| r.target).collect();
    if !uncovered.is_empty() {
        problems.push(format!("targets {uncovered:?} not covered"));
    }
    if rows.iter().any(|r| r.orbit.is_some() && !r.consistent) {
        problems.push("an assigned iterate does not match the certificate".into());
    }
    for k in 0..q1 + q2 {
        let uses = rows.iter().filter(|r| r.orbit == Some(k)).count();
        let cap = if k < q1 { 1 } else { 2 };
        if uses > cap {
            problems.push(format!("orbit {k} used {uses} times"));
        }
    }
    (rows, problems)
}

/// Orbits found for a body by the seed sweep, with finder diagnostics.
#[derive(Debug, Clone)]
pub struct OrbitSearch {
    pub orbits: Vec<ClosedCharacteristic>,
    pub critical_values: Vec<f64>,
    pub seeds: usize,
    pub converged: usize,
    pub failures: usize,
    pub warnings: Vec<String>,
}

/// Run the finder from `cfg.seeds` random seeds plus one planar seed per
/// coordinate plane.
pub fn search_orbits(body: &ConvexBody, alpha: f64, cfg: &VerifierConfig, tol: &Tolerances) -> Result<OrbitSearch> {
    let coarse = cfg.finder.coarse_modes.min(cfg.finder.modes);
    let mut seeds = planar_seeds(body, alpha, coarse, tol)?;
    seeds.extend(random_seeds(body, alpha, cfg.seeds, cfg.rng_seed, coarse, tol)?);
    let out = find_critical_points(body, alpha, &seeds, &cfg.finder, tol)?;
    let mut orbits = Vec::with_capacity(out.loops.len());
    let mut values = Vec::with_capacity(out.loops.len());
    for l in &out.loops {
        let mut x = l.recovered.characteristic.clone();
        if body.is_symmetric() {
            x.symmetry = Some(classify_symmetry(body, &x, tol)?);
        }
        orbits.push(x);
        values.push(l.value);
    }
    let warnings = match body.kind() {
        BodyKind::Ellipsoid => resonant_pairs(body.radii())
            .into_iter()
            .map(|(j, k, p, q)| format!("resonant ellipsoid: r_{}²/r_{}² = {p}/{q}; orbits come in continua and only representatives are found", k + 1, j + 1))
            .collect(),
        BodyKind::Perturbed => Vec::new(),
    };
    Ok(OrbitSearch {
        orbits,
        critical_values: values,
        seeds: seeds.len(),
        converged: out.converged,
        failures: out.failures.len(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::ellipsoid_characteristics;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    /// Index of the `m`-th iterate of the planar orbit in plane `k` of an
    /// ellipsoid: `2m + 2Σ_{j≠k} ⌊m r_k²/r_j²⌋ + n − 2` for non-resonant radii.
    fn beatty(radii: &[f64], k: usize, m: usize) -> i64 {
        let n = radii.len() as i64;
        let rk = radii[k] * radii[k];
        let s: i64 = radii
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, r)| (m as f64 * rk / (r * r)).floor() as i64)
            .sum();
        2 * m as i64 + 2 * s + n - 2
    }

    fn ellipsoid_data(radii: &[f64]) -> (ConvexBody, Vec<ClosedCharacteristic>, Vec<Arc<OrbitIndexData>>) {
        let body = ConvexBody::ellipsoid(radii).unwrap();
        let orbits = ellipsoid_characteristics(radii, 1.5, &tol()).unwrap().orbits;
        let data = orbits.iter().map(|x| Arc::new(OrbitIndexData::build(&body, 1.5, x, 2048, &tol()).unwrap())).collect();
        (body, orbits, data)
    }

    #[test]
    fn circle_intervals_follow_the_odd_numbers() {
        let (_, _, data) = ellipsoid_data(&[1.0]);
        let iv = intervals_from_data(0, &data[0], 1, 6).unwrap();
        for (m, i) in iv.iter().enumerate() {
            assert_eq!((i.lo, i.hi), (2 * m as i64 + 1, 2 * m as i64 + 2));
        }
        assert!((data[0].mean - 2.0).abs() < 1e-9);
    }

    #[test]
    fn ellipsoid_indices_match_beatty_formula() {
        let radii = [1.0, 2f64.powf(0.25)];
        let (_, _, data) = ellipsoid_data(&radii);
        for k in 0..2 {
            for m in 1..=12 {
                let p = data[k].pair(m);
                assert_eq!(p.index, beatty(&radii, k, m), "orbit {k}, m = {m}");
                assert_eq!(p.nullity, 1);
            }
        }
    }

    #[test]
    fn covering_and_negative_control() {
        let radii = [1.0, 2f64.powf(0.25)];
        let (_, _, data) = ellipsoid_data(&radii);
        let fams: Vec<Vec<IndexInterval>> = data.iter().enumerate().map(|(k, d)| intervals_from_data(k, d, 2, 21).unwrap()).collect();
        let rep = covering_injection_check(&fams, 2, 20);
        assert!(rep.verdict && rep.uncovered.is_empty());
        for drop in 0..2 {
            let partial = vec![fams[1 - drop].clone()];
            let rep = covering_injection_check(&partial, 2, 20);
            assert!(!rep.verdict && !rep.uncovered.is_empty());
        }
    }

    #[test]
    fn matching_finds_distinct_representatives() {
        let adj = vec![vec![0, 1], vec![0], vec![1, 2]];
        let p = max_matching(&adj, 3);
        assert_eq!(p, vec![Some(1), Some(0), Some(2)]);
        let p = max_matching(&[vec![0], vec![0]], 1);
        assert_eq!(p.iter().filter(|x| x.is_some()).count(), 1);
    }

    #[test]
    fn circle_certificates_at_even_n() {
        let (_, _, data) = ellipsoid_data(&[1.0]);
        let entries = vec![JumpEntry { orbit: 0, power: 1, data: data[0].clone() }];
        let certs = index_jump_search(&entries, 1, 100, 1, 0, &tol()).unwrap();
        assert!(certs.len() >= 3);
        for c in &certs {
            assert!(c.valid(), "{c:?}");
            assert_eq!(c.big_n % 2, 0);
            let again = evaluate_certificate(&entries, c.big_n, &c.m, 1, 1, 0, &tol());
            assert_eq!(&again, c);
        }
    }

    #[test]
    fn half_path_identity_on_planar_circles() {
        let (body, orbits, _) = ellipsoid_data(&[1.0, 1.3]);
        for x in &orbits {
            let ev = symmetric_halfpath_check(&body, 1.5, x, 2048, &tol()).unwrap();
            assert!(ev.applicable && ev.holds, "{ev:?}");
            assert!(ev.max_defect <= 1e-8);
        }
    }

    #[test]
    fn count_on_weakly_non_resonant_pair() {
        let radii = [1.0, 2f64.powf(0.25)];
        let (body, orbits, _) = ellipsoid_data(&radii);
        let cfg = VerifierConfig { path_steps: 2048, n_max: 2000, ..Default::default() };
        let rep = count_theorem_check(&body, 1.5, &orbits, &cfg, &tol()).unwrap();
        assert_eq!((rep.q1, rep.q2, rep.total), (2, 0, 2));
        assert_eq!(rep.verdict, Verdict::Pass, "{:?}", rep.diagnostics);
        assert!(rep.injection.iter().all(|r| r.consistent));
    }

    #[test]
    fn missing_orbit_is_inconclusive() {
        let radii = [1.0, 2f64.powf(0.25)];
        let (body, orbits, _) = ellipsoid_data(&radii);
        let cfg = VerifierConfig { path_steps: 2048, n_max: 500, ..Default::default() };
        let rep = count_theorem_check(&body, 1.5, &orbits[..1], &cfg, &tol()).unwrap();
        assert_eq!(rep.verdict, Verdict::Inconclusive);
        assert!(!rep.diagnostics.is_empty());
    }
}
