//! Settings shared by the test commands: an optional strict JSON config file
//! overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use post_core::{FamilyKind, PenaltyConfig, PenaltyKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const OUTPUT_ENV: &str = "POST_OUTPUT_DIR";
pub const DEFAULT_OUTPUT: &str = "post-output";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Comma-separated tables.
    #[default]
    #[value(alias = "delimited")]
    #[serde(alias = "delimited")]
    Csv,
    /// JSON arrays of records.
    #[value(alias = "records")]
    #[serde(alias = "records")]
    Json,
}

/// Either the literal `"zero"` or explicit coefficients.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Beta0Spec {
    Named(String),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Option<String>,
    pub penalty: Option<String>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub beta0: Option<Beta0Spec>,
    pub horizon: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub format: Option<ReportFormat>,
    pub procedure: Option<String>,
}

impl RunConfig {
    pub fn read(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::usage(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// JSON config file; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Expected family; must agree with the manifest.
    #[arg(long)]
    pub family: Option<String>,
    /// adalasso, scad, mcp or mle.
    #[arg(long)]
    pub penalty: Option<String>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// `zero` or comma-separated coefficients including the intercept.
    #[arg(long)]
    pub beta0: Option<String>,
    /// Per-arm horizon; defaults to the manifest or the total batch size.
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; falls back to $POST_OUTPUT_DIR, then ./post-output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<ReportFormat>,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub family: Option<FamilyKind>,
    pub penalty: PenaltyConfig,
    pub alpha: f64,
    pub beta0: Option<Vec<f64>>,
    pub horizon: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: u64,
    pub output: PathBuf,
    pub format: ReportFormat,
    pub procedure: Option<String>,
}

fn parse<T: std::str::FromStr<Err = post_core::Error>>(s: &str) -> CliResult<T> {
    s.parse().map_err(|e: post_core::Error| CliError::usage(e.to_string()))
}

pub fn output_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> PathBuf {
    flag.or(config)
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT))
}

impl TestArgs {
    pub fn resolve(&self) -> CliResult<Settings> {
        let file = match &self.config {
            Some(p) => RunConfig::read(p)?,
            None => RunConfig::default(),
        };
        let family = self.family.clone().or(file.family).map(|s| parse::<FamilyKind>(&s)).transpose()?;
        let kind = match self.penalty.clone().or(file.penalty) {
            Some(s) => parse::<PenaltyKind>(&s)?,
            None => PenaltyKind::AdaLasso,
        };
        let penalty = match self.gamma.or(file.gamma) {
            Some(g) => PenaltyConfig::new(kind, g).map_err(|e| CliError::usage(e.to_string()))?,
            None => PenaltyConfig::of_kind(kind),
        };
        let alpha = self.alpha.or(file.alpha).unwrap_or(0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(CliError::usage(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let beta0 = match (&self.beta0, file.beta0) {
            (Some(s), _) => parse_beta0(s)?,
            (None, Some(Beta0Spec::Values(v))) => Some(v),
            (None, Some(Beta0Spec::Named(s))) => parse_beta0(&s)?,
            (None, None) => None,
        };
        Ok(Settings {
            family,
            penalty,
            alpha,
            beta0,
            horizon: self.horizon.or(file.horizon),
            batch_size: self.batch_size.or(file.batch_size),
            seed: self.seed.or(file.seed).unwrap_or(0),
            output: output_dir(self.output.clone(), file.output),
            format: self.format.or(file.format).unwrap_or_default(),
            procedure: file.procedure,
        })
    }
}

/// `None` means the zero vector of whatever dimension the data have.
fn parse_beta0(s: &str) -> CliResult<Option<Vec<f64>>> {
    if s.trim().eq_ignore_ascii_case("zero") {
        return Ok(None);
    }
    s.split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::usage(format!("bad beta0 entry '{v}': {e}"))))
        .collect::<CliResult<Vec<f64>>>()
        .map(Some)
}
