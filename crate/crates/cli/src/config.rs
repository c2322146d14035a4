//! Run configuration: defaults, optional JSON file, command-line overrides.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qtoda::{QContext, Tolerances};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Flags shared by every subcommand. All are optional so that a config
/// file can supply them; flags win over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// Deformation parameter, 0 < q < 1
    #[arg(long, global = true)]
    pub q: Option<f64>,
    /// Exponent δ ∈ {0, 1, 2} of κ = q^δ
    #[arg(long, global = true)]
    pub delta: Option<i32>,
    /// Scale μ > 0
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Spectral parameter ν
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub nu: Option<f64>,
    /// Grid anchor x₀; points are x₀·qⁿ
    #[arg(long, global = true)]
    pub x0: Option<f64>,
    /// First grid index
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub lo: Option<i32>,
    /// Last grid index
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub hi: Option<i32>,
    #[arg(long, global = true)]
    pub rel_eps: Option<f64>,
    #[arg(long, global = true)]
    pub abs_eps: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output file (stdout if absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSON file with any of the above keys
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

/// Keys accepted in a config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    q: Option<f64>,
    delta: Option<i32>,
    mu: Option<f64>,
    nu: Option<f64>,
    x0: Option<f64>,
    lo: Option<i32>,
    hi: Option<i32>,
    rel_eps: Option<f64>,
    abs_eps: Option<f64>,
    format: Option<OutputFormat>,
    out: Option<PathBuf>,
}

/// Fully resolved configuration; echoed into JSON output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub q: f64,
    pub delta: i32,
    pub mu: f64,
    pub nu: f64,
    pub x0: f64,
    pub lo: i32,
    pub hi: i32,
    pub rel_eps: f64,
    pub abs_eps: f64,
    pub format: OutputFormat,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn resolve(subcommand: String, flags: &CommonFlags) -> Result<Self, String> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let cfg = Self {
            subcommand,
            q: flags.q.or(file.q).unwrap_or(0.5),
            delta: flags.delta.or(file.delta).unwrap_or(1),
            mu: flags.mu.or(file.mu).unwrap_or(1.0),
            nu: flags.nu.or(file.nu).unwrap_or(1.3),
            x0: flags.x0.or(file.x0).unwrap_or(1.0),
            lo: flags.lo.or(file.lo).unwrap_or(-20),
            hi: flags.hi.or(file.hi).unwrap_or(20),
            rel_eps: flags.rel_eps.or(file.rel_eps).unwrap_or(1e-12),
            abs_eps: flags.abs_eps.or(file.abs_eps).unwrap_or(1e-300),
            format: flags.format.or(file.format).unwrap_or(OutputFormat::Csv),
            out: flags.out.clone().or(file.out),
        };
        cfg.ctx()?;
        cfg.tolerances()?;
        if cfg.hi < cfg.lo {
            return Err(format!("empty grid: lo = {} > hi = {}", cfg.lo, cfg.hi));
        }
        if !(cfg.x0 > 0.0 && cfg.x0.is_finite()) {
            return Err(format!("x0 must be positive, got {}", cfg.x0));
        }
        Ok(cfg)
    }

    pub fn ctx(&self) -> Result<QContext, String> {
        QContext::new(self.q, self.delta, self.mu, self.nu).map_err(|e| e.to_string())
    }

    pub fn tolerances(&self) -> Result<Tolerances, String> {
        Tolerances::new(self.rel_eps, self.abs_eps, Tolerances::default().max_terms).map_err(|e| e.to_string())
    }

    /// Grid points in index order lo..=hi.
    pub fn grid(&self) -> Vec<f64> {
        (self.lo..=self.hi).map(|n| self.x0 * self.q.powi(n)).collect()
    }
}

fn read_file(p: &Path) -> Result<FileConfig, String> {
    let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read config {}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", p.display()))
}
