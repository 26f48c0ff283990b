//! Run configuration: defaults, then an optional JSON file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use sil_core::{FinderConfig, Tolerances, VerifierConfig};

use crate::InputError;

/// Every knob of a run. The output directory is not part of it, so moving
/// a run elsewhere does not change its hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Overrides the `alpha` of the body file when set.
    pub alpha: Option<f64>,
    /// Fourier modes `K` of the dual loops.
    pub modes: usize,
    /// Minimum integration steps per period.
    pub steps: usize,
    pub m_max: usize,
    pub k_max: usize,
    pub n_max: usize,
    pub seeds: usize,
    pub rng_seed: u64,
    /// Points of the ω grid for mean-index quadrature.
    pub grid: usize,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        let v = VerifierConfig::default();
        Self {
            alpha: None,
            modes: v.finder.modes,
            steps: v.path_steps,
            m_max: v.m_max,
            k_max: v.k_max,
            n_max: v.n_max,
            seeds: v.seeds,
            rng_seed: v.rng_seed,
            grid: 4096,
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn verifier(&self) -> VerifierConfig {
        VerifierConfig {
            path_steps: self.steps,
            m_max: self.m_max,
            k_max: self.k_max,
            n_max: self.n_max,
            seeds: self.seeds,
            rng_seed: self.rng_seed,
            finder: FinderConfig { modes: self.modes, ..FinderConfig::default() },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        let positive = [("modes", self.modes), ("steps", self.steps), ("m_max", self.m_max), ("k_max", self.k_max), ("grid", self.grid)];
        for (name, v) in positive {
            if v == 0 {
                return Err(InputError(format!("{name} must be positive")).into());
            }
        }
        Ok(())
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file with a (partial) run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for report files; without it the report goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// Fourier modes of the dual loops.
    #[arg(long = "modes", global = true)]
    pub modes: Option<usize>,
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    #[arg(long = "m-max", global = true)]
    pub m_max: Option<usize>,
    #[arg(long = "k-max", global = true)]
    pub k_max: Option<usize>,
    #[arg(long = "nmax", global = true)]
    pub n_max: Option<usize>,
    /// Random seeds of the orbit search.
    #[arg(long, global = true)]
    pub seeds: Option<usize>,
    /// RNG seed.
    #[arg(long = "seed", global = true)]
    pub rng_seed: Option<u64>,
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Tolerance override such as `orbit_tol=1e-7`; repeatable.
    #[arg(long = "tol", value_name = "NAME=VALUE", global = true)]
    pub tol: Vec<String>,
}

impl CommonArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => load(path)?,
            None => RunConfig::default(),
        };
        if self.alpha.is_some() {
            cfg.alpha = self.alpha;
        }
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field {
                    cfg.$field = v;
                }
            )*};
        }
        set!(modes, steps, m_max, k_max, n_max, seeds, rng_seed, grid);
        for item in &self.tol {
            cfg.tolerances = override_tolerance(&cfg.tolerances, item)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| InputError(format!("{}: {e}", path.display())).into())
}

fn override_tolerance(tol: &Tolerances, item: &str) -> Result<Tolerances> {
    let (name, value) = item.split_once('=').ok_or_else(|| InputError(format!("--tol expects NAME=VALUE, got {item:?}")))?;
    let value: f64 = value.trim().parse().map_err(|_| InputError(format!("--tol {name}: {value:?} is not a number")))?;
    let mut json = serde_json::to_value(tol).context("serialising tolerances")?;
    let slot = json
        .get_mut(name.trim())
        .ok_or_else(|| InputError(format!("--tol: unknown tolerance {name:?}")))?;
    *slot = serde_json::json!(value);
    serde_json::from_value(json).map_err(|e| InputError(format!("--tol {name}: {e}")).into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.json");
        std::fs::write(&file, r#"{"seeds": 12, "m_max": 7}"#).unwrap();
        let args = CommonArgs { config: Some(file), m_max: Some(9), tol: vec!["orbit_tol=1e-7".into()], ..Default::default() };
        let cfg = args.resolve().unwrap();
        assert_eq!((cfg.seeds, cfg.m_max, cfg.k_max), (12, 9, RunConfig::default().k_max));
        assert_eq!(cfg.tolerances.orbit_tol, 1e-7);
    }

    #[test]
    fn bad_overrides_are_input_errors() {
        for tol in ["orbit_tol", "nope=1", "orbit_tol=x", "orbit_tol=-1"] {
            let args = CommonArgs { tol: vec![tol.into()], ..Default::default() };
            let err = args.resolve().unwrap_err();
            assert!(crate::exit_code(&err) == 2, "{tol}: {err}");
        }
    }
}
