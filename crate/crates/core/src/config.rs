//! Flat key = value run configuration with lossless round-tripping.

use crate::chfsi::SolverConfig;
use crate::error::{EigenError, Result};
use crate::operators::Family;
use crate::pipeline::{RunMode, RunPlan};
use std::fmt::Write as _;
use std::path::PathBuf;

/// Environment variable that overrides `master_seed` when set.
pub const SEED_ENV: &str = "EIGENFORGE_SEED";

/// Every knob of a run as one flat document. Config files are `key = value`
/// lines; `#` starts a comment. CLI flags override file values, and the
/// `EIGENFORGE_SEED` environment variable overrides both for the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub family: Family,
    pub nx: usize,
    pub ny: usize,
    pub n_problems: usize,
    pub l: usize,
    pub tol: f64,
    pub m: usize,
    pub p0: usize,
    /// Subspace padding; `None` means the default 20% of L.
    pub extra: Option<usize>,
    pub mode: RunMode,
    pub chunks: usize,
    pub master_seed: u64,
    /// Side of the sampled coefficient fields (power of two).
    pub field_side: usize,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            family: Family::Poisson,
            nx: 20,
            ny: 20,
            n_problems: 10,
            l: 10,
            tol: 1e-8,
            m: 20,
            p0: 20,
            extra: None,
            mode: RunMode::Scsf,
            chunks: 1,
            master_seed: 0,
            field_side: 32,
            out_dir: PathBuf::from("eigenforge-out"),
        }
    }
}

impl RunConfig {
    pub fn extra_or_default(&self) -> usize {
        self.extra.unwrap_or_else(|| self.l.div_ceil(5))
    }

    pub fn solver_config(&self) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.l, self.tol);
        cfg.extra = self.extra_or_default();
        cfg.m = self.m;
        cfg.seed = self.master_seed;
        cfg
    }

    pub fn run_plan(&self) -> RunPlan {
        let mut plan = RunPlan::new(self.mode, self.solver_config());
        plan.p0 = self.p0.min(self.field_side);
        plan.chunks = self.chunks;
        plan
    }

    /// Applies the `EIGENFORGE_SEED` override if the variable is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            self.master_seed = v.parse().map_err(|_| {
                EigenError::InvalidParameter(format!("{SEED_ENV} must be an integer, got {v:?}"))
            })?;
        }
        Ok(())
    }

    /// Serializes to the config file format; `parse` inverts this exactly.
    pub fn to_kv_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "family = {}", self.family.as_str());
        let _ = writeln!(s, "nx = {}", self.nx);
        let _ = writeln!(s, "ny = {}", self.ny);
        let _ = writeln!(s, "n_problems = {}", self.n_problems);
        let _ = writeln!(s, "l = {}", self.l);
        let _ = writeln!(s, "tol = {:e}", self.tol);
        let _ = writeln!(s, "m = {}", self.m);
        let _ = writeln!(s, "p0 = {}", self.p0);
        match self.extra {
            Some(e) => {
                let _ = writeln!(s, "extra = {e}");
            }
            None => {
                let _ = writeln!(s, "extra = auto");
            }
        }
        let _ = writeln!(s, "mode = {}", self.mode);
        let _ = writeln!(s, "chunks = {}", self.chunks);
        let _ = writeln!(s, "master_seed = {}", self.master_seed);
        let _ = writeln!(s, "field_side = {}", self.field_side);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        s
    }

    /// Parses the `key = value` format, starting from defaults; unknown keys
    /// are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(EigenError::InvalidParameter(format!(
                    "config line {}: expected key = value, got {raw:?}",
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                EigenError::InvalidParameter(format!("config key {key}: bad value {value:?}"))
            })
        }
        match key {
            "family" => self.family = value.parse()?,
            "nx" => self.nx = num(key, value)?,
            "ny" => self.ny = num(key, value)?,
            "n_problems" => self.n_problems = num(key, value)?,
            "l" => self.l = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "m" => self.m = num(key, value)?,
            "p0" => self.p0 = num(key, value)?,
            "extra" => {
                self.extra = if value == "auto" {
                    None
                } else {
                    Some(num(key, value)?)
                }
            }
            "mode" => self.mode = value.parse()?,
            "chunks" => self.chunks = num(key, value)?,
            "master_seed" => self.master_seed = num(key, value)?,
            "field_side" => self.field_side = num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            other => {
                return Err(EigenError::InvalidParameter(format!(
                    "unknown config key {other:?}"
                )))
            }
        }
        Ok(())
    }
}
