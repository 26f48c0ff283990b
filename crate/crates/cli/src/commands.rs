use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;
use sil_core::index::{default_mean_limit, iterated_index_bott, iterated_index_direct, mean_index_from_profile, omega_index_with_crossings};
use sil_core::linalg::UnitPoint;
use sil_core::splitting::{bott_test_points, splitting_profile};
use sil_core::suite::convex_suite;
use sil_core::{
    bott_splitting_check, count_theorem_check, index_jump_search, krein_sum_bound, search_orbits, splitting_numbers, BodySpec,
    ClosedCharacteristic, ConvexBody, CountReport, CrossingRecord, IndexProfile, JumpCertificate, OmegaGrid, OrbitFamily,
    OrbitSearch, SplittingPair, SymmetryClass, SystemSpec, Verdict, DEFAULT_ALPHA,
};

use crate::config::RunConfig;
use crate::report::{Meta, Output};
use crate::InputError;

/// How a finished run maps to an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    /// A numerical check failed.
    Failed,
    Inconclusive,
}

pub type Run = (Output, Status);

fn read_json(path: &Path) -> Result<(String, Value)> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let value = serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    Ok((text, value))
}

fn load_system(path: &Path) -> Result<(SystemSpec, Value)> {
    let (text, value) = read_json(path)?;
    let spec = SystemSpec::from_json(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    Ok((spec, value))
}

fn load_body(path: &Path, cfg: &RunConfig) -> Result<(ConvexBody, f64, Value)> {
    let (text, value) = read_json(path)?;
    let spec = BodySpec::from_json(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    let alpha = cfg.alpha.or(spec.alpha).unwrap_or(DEFAULT_ALPHA);
    sil_core::body::check_alpha(alpha)?;
    Ok((ConvexBody::new(spec)?, alpha, value))
}

fn parse_omega(omega: Option<&str>, theta: Option<f64>) -> Result<UnitPoint> {
    match (omega, theta) {
        (_, Some(t)) => Ok(UnitPoint::from_angle(t)),
        (None | Some("1"), None) => Ok(UnitPoint::ONE),
        (Some("-1"), None) => Ok(UnitPoint::MINUS_ONE),
        (Some(other), None) => Err(InputError(format!("--omega takes 1 or -1 (use --theta for other points), got {other:?}")).into()),
    }
}

#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// System file: a constant matrix or an orbit of a body.
    #[arg(long)]
    pub system: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct IndexArgs {
    #[command(flatten)]
    pub input: SystemArgs,
    /// `1` or `-1`.
    #[arg(long, allow_hyphen_values = true, conflicts_with = "theta")]
    pub omega: Option<String>,
    /// Angle of `ω = e^{iθ}` in radians.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    /// Also report the mean index.
    #[arg(long)]
    pub mean: bool,
}

#[derive(Serialize)]
struct IndexOut {
    i: i64,
    nu: usize,
    theta: f64,
    crossings: Vec<CrossingRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean: Option<f64>,
}

pub fn index(args: &IndexArgs, cfg: &RunConfig) -> Result<Run> {
    let (spec, input) = load_system(&args.input.system)?;
    let omega = parse_omega(args.omega.as_deref(), args.theta)?;
    let tol = &cfg.tolerances;
    let path = spec.path(cfg.steps, tol)?;
    let (pair, crossings) = omega_index_with_crossings(&path, omega, tol)?;
    let mean = if args.mean {
        let profile = IndexProfile::build(&path, tol)?;
        let grid = OmegaGrid::uniform(cfg.grid)?;
        Some(mean_index_from_profile(&profile, &grid, default_mean_limit(path.n(), tol), tol)?.exact)
    } else {
        None
    };
    let out = IndexOut { i: pair.index, nu: pair.nullity, theta: omega.angle(), crossings, mean };
    Ok((Output::new(Meta::new("index", cfg, &input), out)?, Status::Pass))
}

#[derive(Debug, Clone, Args)]
pub struct SplittingArgs {
    #[command(flatten)]
    pub input: SystemArgs,
    /// Single point `ω = e^{iθ}`; without it every eigenvalue point is reported.
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
}

#[derive(Serialize)]
struct SplittingOut {
    entries: Vec<SplittingPair>,
    #[serde(skip_serializing_if = "Option::is_none")]
    krein_sum: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    krein_bound_holds: Option<bool>,
}

pub fn splitting(args: &SplittingArgs, cfg: &RunConfig) -> Result<Run> {
    let (spec, input) = load_system(&args.input.system)?;
    let tol = &cfg.tolerances;
    let path = spec.path(cfg.steps, tol)?;
    let out = match args.theta {
        Some(t) => SplittingOut {
            entries: vec![splitting_numbers(&path, UnitPoint::from_angle(t), None, tol)?],
            krein_sum: None,
            krein_bound_holds: None,
        },
        None => {
            let krein = krein_sum_bound(&path, tol)?;
            SplittingOut { entries: splitting_profile(&path, tol)?.entries, krein_sum: Some(krein.sum), krein_bound_holds: Some(krein.holds) }
        }
    };
    let ok = out.entries.iter().all(SplittingPair::within_bounds) && out.krein_bound_holds != Some(false);
    let status = if ok { Status::Pass } else { Status::Failed };
    Ok((Output::new(Meta::new("splitting", cfg, &input), out)?, status))
}

pub fn mean_index(args: &SystemArgs, cfg: &RunConfig) -> Result<Run> {
    let (spec, input) = load_system(&args.system)?;
    let tol = &cfg.tolerances;
    let path = spec.path(cfg.steps, tol)?;
    let profile = IndexProfile::build(&path, tol)?;
    let grid = OmegaGrid::uniform(cfg.grid)?;
    let report = mean_index_from_profile(&profile, &grid, default_mean_limit(path.n(), tol), tol)?;
    Ok((Output::new(Meta::new("mean-index", cfg, &input), report)?, Status::Pass))
}

#[derive(Debug, Clone, Args)]
pub struct BottArgs {
    /// Number of random paths, alternating between Sp(2) and Sp(4).
    #[arg(long, default_value_t = 50)]
    pub cases: usize,
    /// Largest iterate.
    #[arg(long = "m", default_value_t = 6)]
    pub m: usize,
}

#[derive(Debug, Serialize)]
struct BottRow {
    case: usize,
    n: usize,
    m: usize,
    theta: f64,
    lhs: (i64, i64),
    rhs: (i64, i64),
    equal: bool,
}

#[derive(Debug, Serialize)]
struct IterateRow {
    case: usize,
    m: usize,
    root_sum: (i64, usize),
    iterate: (i64, usize),
    equal: bool,
}

#[derive(Serialize)]
struct BottOut {
    cases: usize,
    m_max: usize,
    pass: bool,
    identities: usize,
    mismatches: usize,
    rows: Vec<BottRow>,
    iterates: Vec<IterateRow>,
}

pub fn bott_check(args: &BottArgs, cfg: &RunConfig) -> Result<Run> {
    if args.cases == 0 || args.m == 0 {
        return Err(InputError("--cases and --m must be positive".into()).into());
    }
    let tol = &cfg.tolerances;
    let suite = convex_suite(args.cases, &[1, 2], cfg.rng_seed);
    let per_case: Vec<(Vec<BottRow>, Vec<IterateRow>)> = suite
        .par_iter()
        .map(|case| -> Result<_> {
            let path = case.path(cfg.steps, tol)?;
            let mut rows = Vec::new();
            let mut iterates = Vec::new();
            for m in 1..=args.m {
                for z in bott_test_points(&path, m, tol)? {
                    let ev = bott_splitting_check(&path, m, z, tol)?;
                    rows.push(BottRow { case: case.id, n: case.n, m, theta: z.angle(), lhs: ev.lhs, rhs: ev.rhs, equal: ev.equal });
                }
                let a = iterated_index_bott(&path, m, tol)?;
                let b = iterated_index_direct(&path, m, tol)?;
                iterates.push(IterateRow { case: case.id, m, root_sum: (a.index, a.nullity), iterate: (b.index, b.nullity), equal: a == b });
            }
            Ok((rows, iterates))
        })
        .collect::<Result<_>>()?;
    let (rows, iterates): (Vec<_>, Vec<_>) = per_case.into_iter().unzip();
    let rows: Vec<BottRow> = rows.into_iter().flatten().collect();
    let iterates: Vec<IterateRow> = iterates.into_iter().flatten().collect();
    let mismatches = rows.iter().filter(|r| !r.equal).count() + iterates.iter().filter(|r| !r.equal).count();
    let mut csv = String::from("case,n,m,theta,lhs_plus,lhs_minus,rhs_plus,rhs_minus,equal\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{:.12},{},{},{},{},{}", r.case, r.n, r.m, r.theta, r.lhs.0, r.lhs.1, r.rhs.0, r.rhs.1, r.equal);
    }
    let out = BottOut {
        cases: args.cases,
        m_max: args.m,
        pass: mismatches == 0,
        identities: rows.len() + iterates.len(),
        mismatches,
        rows,
        iterates,
    };
    let status = if out.pass { Status::Pass } else { Status::Failed };
    let input = serde_json::json!({ "cases": args.cases, "m": args.m });
    Ok((Output::new(Meta::new("bott-check", cfg, &input), out)?.with_extra("bott.csv", csv), status))
}

#[derive(Debug, Clone, Args)]
pub struct BodyArgs {
    /// Body file.
    #[arg(long)]
    pub body: PathBuf,
}

#[derive(Serialize)]
struct FoundOrbit {
    id: usize,
    tau: f64,
    action: f64,
    critical_value: f64,
    symmetry: Option<SymmetryClass>,
    minimal: bool,
    residual: f64,
    surface_error: f64,
    characteristic: ClosedCharacteristic,
}

#[derive(Serialize)]
struct SearchOut {
    alpha: f64,
    seeds: usize,
    converged: usize,
    failures: usize,
    warnings: Vec<String>,
    orbits: Vec<FoundOrbit>,
}

fn search_summary(body: &ConvexBody, alpha: f64, search: &OrbitSearch) -> SearchOut {
    let orbits = search
        .orbits
        .iter()
        .zip(&search.critical_values)
        .enumerate()
        .map(|(id, (x, &value))| FoundOrbit {
            id,
            tau: x.tau,
            action: x.action,
            critical_value: value,
            symmetry: x.symmetry,
            minimal: x.minimal_period.minimal,
            residual: x.residual(body),
            surface_error: x.surface_error(body),
            characteristic: x.clone(),
        })
        .collect();
    SearchOut {
        alpha,
        seeds: search.seeds,
        converged: search.converged,
        failures: search.failures,
        warnings: search.warnings.clone(),
        orbits,
    }
}

pub fn find_orbits(args: &BodyArgs, cfg: &RunConfig) -> Result<Run> {
    let (body, alpha, input) = load_body(&args.body, cfg)?;
    let search = search_orbits(&body, alpha, &cfg.verifier(), &cfg.tolerances)?;
    let out = search_summary(&body, alpha, &search);
    let status = if out.orbits.is_empty() { Status::Inconclusive } else { Status::Pass };
    Ok((Output::new(Meta::new("find-orbits", cfg, &input), out)?, status))
}

#[derive(Serialize)]
struct VerifyOut {
    verdict: bool,
    total: usize,
    warnings: Vec<String>,
    seeds: usize,
    converged: usize,
    report: CountReport,
}

pub fn verify(args: &BodyArgs, cfg: &RunConfig) -> Result<Run> {
    let (body, alpha, input) = load_body(&args.body, cfg)?;
    let vcfg = cfg.verifier();
    let search = search_orbits(&body, alpha, &vcfg, &cfg.tolerances)?;
    let report = count_theorem_check(&body, alpha, &search.orbits, &vcfg, &cfg.tolerances)?;
    let (intervals, iterates, targets) = verify_tables(&report);
    let out = VerifyOut {
        verdict: report.verdict == Verdict::Pass,
        total: report.total,
        warnings: search.warnings.clone(),
        seeds: search.seeds,
        converged: search.converged,
        report,
    };
    let status = if out.verdict { Status::Pass } else { Status::Inconclusive };
    let output = Output::new(Meta::new("verify", cfg, &input), out)?
        .with_extra("intervals.csv", intervals)
        .with_extra("index_vs_iterate.txt", iterates)
        .with_extra("intervals_vs_targets.txt", targets);
    Ok((output, status))
}

/// The interval table as CSV and two plot-data files with whitespace-separated columns.
fn verify_tables(report: &CountReport) -> (String, String, String) {
    let mut csv = String::from("orbit,symmetry,m,lo,hi,mean_index\n");
    let mut iterates = String::from("# m  i_m  i_m+nu_m  (one block per orbit)\n");
    for o in &report.orbits {
        let sym = match o.symmetry {
            SymmetryClass::Symmetric => "symmetric",
            SymmetryClass::Asymmetric => "asymmetric",
        };
        let _ = writeln!(iterates, "# orbit {} tau {:.12}", o.id, o.tau);
        for iv in &o.intervals {
            let _ = writeln!(csv, "{},{sym},{},{},{},{:.12}", o.id, iv.m, iv.lo, iv.hi, o.mean_index);
            let _ = writeln!(iterates, "{} {} {}", iv.m, iv.lo, iv.hi);
        }
        iterates.push_str("\n\n");
    }
    let mut targets = format!("# k  2k-2+n  orbit  m  (n = {}; orbit and m are -1 when uncovered)\n", report.n);
    for row in &report.covering.rows {
        let (k, m) = row.assigned.map(|(k, m)| (k as i64, m as i64)).unwrap_or((-1, -1));
        let _ = writeln!(targets, "{} {} {k} {m}", row.k, row.target);
    }
    (csv, iterates, targets)
}

#[derive(Debug, Clone, Args)]
pub struct JumpArgs {
    #[command(flatten)]
    pub input: BodyArgs,
    /// Certificates to list in the report; 0 lists all.
    #[arg(long, default_value_t = 50)]
    pub limit: usize,
}

#[derive(Serialize)]
struct EntryOut {
    orbit: usize,
    power: usize,
    mean_index: f64,
}

#[derive(Serialize)]
struct JumpOut {
    n_max: usize,
    q1: usize,
    q2: usize,
    entries: Vec<EntryOut>,
    found: usize,
    valid: usize,
    first_n: Vec<usize>,
    certificates: Vec<JumpCertificate>,
}

pub fn jump_search(args: &JumpArgs, cfg: &RunConfig) -> Result<Run> {
    let (body, alpha, input) = load_body(&args.input.body, cfg)?;
    let vcfg = cfg.verifier();
    let tol = &cfg.tolerances;
    let search = search_orbits(&body, alpha, &vcfg, tol)?;
    let family = OrbitFamily::build(&body, alpha, &search.orbits, vcfg.path_steps, tol)?;
    let entries = family.entries();
    let certs = if entries.is_empty() { Vec::new() } else { index_jump_search(&entries, body.n(), vcfg.n_max, family.q1, family.q2, tol)? };
    let valid = certs.iter().filter(|c| c.valid()).count();
    let shown = if args.limit == 0 { certs.len() } else { args.limit.min(certs.len()) };
    let out = JumpOut {
        n_max: vcfg.n_max,
        q1: family.q1,
        q2: family.q2,
        entries: entries.iter().map(|e| EntryOut { orbit: e.orbit, power: e.power, mean_index: e.mean() }).collect(),
        found: certs.len(),
        valid,
        first_n: certs.iter().take(10).map(|c| c.big_n).collect(),
        certificates: certs.into_iter().take(shown).collect(),
    };
    let status = if out.valid > 0 { Status::Pass } else { Status::Inconclusive };
    Ok((Output::new(Meta::new("jump-search", cfg, &input), out)?, status))
}
