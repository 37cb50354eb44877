//! Flat `key=value` config files and flag resolution.
//!
//! Keys are the long flag names (`gamma`, `tauS`, `regime`, ...). Blank lines
//! and lines starting with `#` are ignored. Command-line flags win over the
//! file, and the file wins over the built-in defaults (the fig1a economy
//! with `mu_s = 0`, `theta = 0` and no tax).

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use overreact::{presets, MarketParams, Regime, SolverSettings, TaxSpec};
use serde::{Deserialize, Serialize};

pub const KEYS: [&str; 11] = [
    "gamma", "beta", "tau0", "taueps", "tauS", "muS", "theta", "delta", "regime", "seed", "points",
];

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected key=value", n + 1))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                bail!("line {}: unknown key {k:?}", n + 1);
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| anyhow!("config key {key}: {e}")))
            .transpose()
    }
}

/// Model flags shared by the analytic commands.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelFlags {
    #[arg(long, allow_negative_numbers = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub tau0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub taueps: Option<f64>,
    #[arg(long = "tauS", allow_negative_numbers = true)]
    pub tau_s: Option<f64>,
    #[arg(long = "muS", allow_negative_numbers = true)]
    pub mu_s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub delta: Option<f64>,
    /// both | informed
    #[arg(long)]
    pub regime: Option<Regime>,
    /// Flat key=value file; flags override it.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
}

/// Fully resolved analytic inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub params: MarketParams,
    pub theta: f64,
    pub tax: TaxSpec,
    pub settings: SolverSettings,
}

impl ModelFlags {
    pub fn config(&self) -> Result<ConfigFile> {
        match &self.config {
            Some(p) => ConfigFile::load(p),
            None => Ok(ConfigFile::default()),
        }
    }

    pub fn resolve(&self) -> Result<Model> {
        let cfg = self.config()?;
        let base = presets::fig1a();
        let pick = |flag, key, default| flag_or_config(flag, &cfg, key, default);
        let params = MarketParams::new(
            pick(self.gamma, "gamma", base.gamma)?,
            pick(self.beta, "beta", base.beta)?,
            pick(self.tau0, "tau0", base.tau0)?,
            pick(self.taueps, "taueps", base.tau_eps)?,
            pick(self.tau_s, "tauS", base.tau_s)?,
            pick(self.mu_s, "muS", base.mu_s)?,
        );
        let regime = flag_or_config(self.regime, &cfg, "regime", Regime::default())?;
        Ok(Model {
            params,
            theta: pick(self.theta, "theta", 0.0)?,
            tax: TaxSpec::new(pick(self.delta, "delta", 0.0)?, regime),
            settings: SolverSettings::default(),
        })
    }
}

/// Resolves an optional flag that may also come from the config file.
pub fn flag_or_config<T: FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => cfg.get(key)?.unwrap_or(default),
    })
}
