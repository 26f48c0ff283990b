//! Report assembly and output files.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Provenance block embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub schema: u32,
    pub command: String,
    pub config_hash: String,
    pub rng_seed: u64,
    pub config: RunConfig,
}

impl Meta {
    /// The hash covers the command, the resolved configuration and the
    /// parsed input, so reformatting an input file does not change it.
    pub fn new(command: &str, cfg: &RunConfig, input: &Value) -> Self {
        let canonical = json!({ "command": command, "config": cfg, "input": input });
        let digest = Sha256::digest(serde_json::to_vec(&canonical).expect("json value serialises"));
        Self {
            tool: "sil",
            version: env!("CARGO_PKG_VERSION"),
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            config_hash: hex::encode(digest),
            rng_seed: cfg.rng_seed,
            config: cfg.clone(),
        }
    }
}

/// A finished run: the JSON report plus any side tables.
pub struct Output {
    pub meta: Meta,
    pub body: Value,
    /// `(file name, contents)` written next to the report.
    pub extras: Vec<(String, String)>,
}

impl Output {
    pub fn new(meta: Meta, body: impl Serialize) -> Result<Self> {
        Ok(Self { meta, body: serde_json::to_value(body).context("serialising report")?, extras: Vec::new() })
    }

    pub fn with_extra(mut self, name: &str, contents: String) -> Self {
        self.extras.push((name.to_string(), contents));
        self
    }

    pub fn report(&self) -> Result<String> {
        let mut map = Map::new();
        map.insert("meta".into(), serde_json::to_value(&self.meta)?);
        match &self.body {
            Value::Object(fields) => map.extend(fields.clone()),
            other => {
                map.insert("result".into(), other.clone());
            }
        }
        Ok(serde_json::to_string_pretty(&Value::Object(map))? + "\n")
    }

    /// Print the report, or write it with its side files and a
    /// `timing.json` sidecar into `dir`. Wall time never enters the report,
    /// so identical runs produce identical report bytes.
    pub fn emit(&self, dir: Option<&Path>, wall: Duration) -> Result<Vec<PathBuf>> {
        let report = self.report()?;
        let Some(dir) = dir else {
            print!("{report}");
            eprintln!("{}: {:.3} s", self.meta.command, wall.as_secs_f64());
            return Ok(Vec::new());
        };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::new();
        let mut write = |name: &str, contents: &str| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
            written.push(path);
            Ok(())
        };
        write(&format!("{}.json", self.meta.command), &report)?;
        for (name, contents) in &self.extras {
            write(name, contents)?;
        }
        let timing = json!({ "command": self.meta.command, "config_hash": self.meta.config_hash, "wall_seconds": wall.as_secs_f64() });
        write("timing.json", &(serde_json::to_string_pretty(&timing)? + "\n"))?;
        Ok(written)
    }
}
