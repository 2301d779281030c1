use std::path::PathBuf;

use clap::{Args, ValueEnum};
use post_core::formats::{write_envelope, REPORT_FORMAT};
use post_core::multiple::Procedure;
use post_core::simulation::{
    default_alt_effects, default_theta0, run_multiple_study, run_single_study, CovariateSetting, MeanStd, Method,
    MultipleStudyConfig, MultipleStudyReport, SimulationConfig, SingleStudyReport, StudyMetrics,
};
use post_core::{FamilyKind, GlmFamily};
use serde::Serialize;

use crate::config::{output_dir, ReportFormat};
use crate::error::{CliError, CliResult, EXIT_DECISION};
use crate::report::{ensure_dir, write_bytes, write_table};

pub const METRICS: &str = "metrics";
pub const REPORT_FILE: &str = "study_report.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    /// One experiment per replication.
    Single,
    /// m experiments per replication with a multiplicity correction.
    Multiple,
    /// Variable selection: all methods, links and settings at b = 0.
    Table2,
    /// Type I error: all methods, links and settings at b = 0.
    Table3,
    /// Power: all methods, links and settings at two effect sizes per link.
    Table4,
    /// FDR and TPR: the penalized methods under the multiple design.
    Table5,
}

impl Design {
    fn is_multiple(&self) -> bool {
        matches!(self, Design::Multiple | Design::Table5)
    }

    fn methods(&self) -> Vec<Method> {
        match self {
            Design::Single | Design::Multiple => vec![Method::PostAdaLasso],
            Design::Table5 => vec![Method::PostMcp, Method::PostScad, Method::PostAdaLasso],
            _ => vec![Method::PostMcp, Method::PostScad, Method::PostAdaLasso, Method::SstMle],
        }
    }

    fn links(&self) -> Vec<FamilyKind> {
        match self {
            Design::Single | Design::Multiple => vec![FamilyKind::GaussianIdentity],
            _ => vec![FamilyKind::GaussianIdentity, FamilyKind::BernoulliLogit, FamilyKind::PoissonLog],
        }
    }

    fn settings(&self) -> Vec<CovariateSetting> {
        match self {
            Design::Single | Design::Multiple => vec![CovariateSetting::Nu],
            _ => vec![CovariateSetting::Nu, CovariateSetting::Mvn],
        }
    }

    fn effects(&self, link: FamilyKind) -> Vec<f64> {
        match (self, link) {
            (Design::Table4, FamilyKind::GaussianIdentity) => vec![0.1, 0.15],
            (Design::Table4, FamilyKind::BernoulliLogit) => vec![0.5, 0.75],
            (Design::Table4, FamilyKind::PoissonLog) => vec![0.05, 0.08],
            _ => vec![0.0],
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value = "single")]
    pub design: Design,
    /// Comma-separated: adalasso, scad, mcp, mle.
    #[arg(long, value_delimiter = ',')]
    pub method: Vec<String>,
    /// Comma-separated: identity, logit, log.
    #[arg(long, value_delimiter = ',')]
    pub link: Vec<String>,
    /// Comma-separated: nu, mvn.
    #[arg(long, value_delimiter = ',')]
    pub setting: Vec<String>,
    /// Comma-separated effect sizes; replaces the design's defaults.
    #[arg(long, value_delimiter = ',')]
    pub b: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub p: usize,
    #[arg(long, default_value_t = 100)]
    pub batch_n: usize,
    #[arg(long, default_value_t = 1000)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Experiments per replication in the multiple design.
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    /// How many of the m experiments are null.
    #[arg(long, default_value_t = 24)]
    pub nulls: usize,
    /// Comma-separated alternative effect sizes, spread evenly over the
    /// non-null experiments; defaults depend on the link.
    #[arg(long, value_delimiter = ',')]
    pub alt_effects: Vec<f64>,
    #[arg(long, default_value = "by")]
    pub procedure: String,
    /// Also write per-batch FDR/TPR trajectories for multiple designs.
    #[arg(long)]
    pub trajectories: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: ReportFormat,
}

/// One line of the metrics table. Column order is fixed.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub design: Design,
    pub method: &'static str,
    pub link: &'static str,
    pub setting: &'static str,
    pub b: f64,
    pub replications: usize,
    pub failures: usize,
    pub coverage_mean: Option<f64>,
    pub coverage_std: Option<f64>,
    pub filter_mean: Option<f64>,
    pub filter_std: Option<f64>,
    pub rejection_mean: f64,
    pub rejection_std: f64,
    pub fdr_mean: Option<f64>,
    pub fdr_std: Option<f64>,
    pub tpr_mean: Option<f64>,
    pub tpr_std: Option<f64>,
    pub stopping_median: Option<f64>,
    pub stopping_p90: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum StudyReport {
    Single(SingleStudyReport),
    Multiple(MultipleStudyReport),
}

pub fn link_name(kind: FamilyKind) -> &'static str {
    match kind {
        FamilyKind::GaussianIdentity => "identity",
        FamilyKind::BernoulliLogit => "logit",
        FamilyKind::PoissonLog => "log",
    }
}

fn parse_list<T: std::str::FromStr<Err = post_core::Error>>(values: &[String], default: Vec<T>) -> CliResult<Vec<T>> {
    if values.is_empty() {
        return Ok(default);
    }
    values
        .iter()
        .map(|v| v.trim().parse().map_err(|e: post_core::Error| CliError::usage(e.to_string())))
        .collect()
}

fn split(m: Option<MeanStd>) -> (Option<f64>, Option<f64>) {
    (m.map(|x| x.mean), m.map(|x| x.std))
}

fn row(design: Design, method: Method, link: FamilyKind, setting: CovariateSetting, b: f64, m: &StudyMetrics) -> MetricsRow {
    let (coverage_mean, coverage_std) = split(m.coverage_ratio);
    let (filter_mean, filter_std) = split(m.filter_ratio);
    let (fdr_mean, fdr_std) = split(m.fdr);
    let (tpr_mean, tpr_std) = split(m.tpr);
    MetricsRow {
        design,
        method: method.name(),
        link: link_name(link),
        setting: setting.name(),
        b,
        replications: m.replications,
        failures: m.failures,
        coverage_mean,
        coverage_std,
        filter_mean,
        filter_std,
        rejection_mean: m.rejection_rate.mean,
        rejection_std: m.rejection_rate.std,
        fdr_mean,
        fdr_std,
        tpr_mean,
        tpr_std,
        stopping_median: m.stopping_time_median,
        stopping_p90: m.stopping_time_p90,
    }
}

pub fn run(args: &SimulateArgs) -> CliResult<i32> {
    let design = args.design;
    let methods = parse_list::<Method>(&args.method, design.methods())?;
    let links = parse_list::<FamilyKind>(&args.link, design.links())?;
    let settings = parse_list::<CovariateSetting>(&args.setting, design.settings())?;
    let procedure: Procedure = args.procedure.parse().map_err(|e: post_core::Error| CliError::usage(e.to_string()))?;
    let usage = |e: post_core::Error| CliError::usage(e.to_string());

    // Validate every configuration before spending time on any of them.
    let mut jobs: Vec<(Method, FamilyKind, CovariateSetting, f64, SimulationConfig)> = Vec::new();
    for &method in &methods {
        for &link in &links {
            for &setting in &settings {
                let effects = if args.b.is_empty() { design.effects(link) } else { args.b.clone() };
                for b in effects {
                    let mut cfg = SimulationConfig::new(GlmFamily::of_kind(link), setting, method, b);
                    cfg.p = args.p;
                    cfg.theta0 = default_theta0(args.p);
                    cfg.batch_n = args.batch_n;
                    cfg.horizon_n = args.horizon;
                    cfg.replications = args.reps;
                    cfg.alpha = args.alpha;
                    cfg.seed = args.seed;
                    cfg.validate().map_err(usage)?;
                    if design.is_multiple() {
                        multiple_config(args, cfg.clone(), link, procedure)?.validate().map_err(usage)?;
                    }
                    jobs.push((method, link, setting, b, cfg));
                }
            }
        }
    }

    let out = output_dir(args.output.clone(), None);
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (method, link, setting, b, cfg) in jobs {
        if design.is_multiple() {
            let mcfg = multiple_config(args, cfg, link, procedure)?;
            let report = run_multiple_study(&mcfg)?;
            rows.push(row(design, method, link, setting, b, &report.metrics));
            if args.trajectories {
                ensure_dir(&out)?;
                let stem = format!("trajectory_{}_{}_{}", method.name(), link_name(link), setting.name());
                write_table(&out, &stem, &report.trajectory, args.format)?;
            }
            reports.push(StudyReport::Multiple(report));
        } else {
            let report = run_single_study(&cfg)?;
            rows.push(row(design, method, link, setting, b, &report.metrics));
            reports.push(StudyReport::Single(report));
        }
        let r = rows.last().expect("row just pushed");
        eprintln!(
            "{} {} {} b={}: rejection {:.3}, failures {}",
            r.method, r.link, r.setting, r.b, r.rejection_mean, r.failures
        );
    }

    ensure_dir(&out)?;
    write_table(&out, METRICS, &rows, args.format)?;
    write_bytes(&out, REPORT_FILE, &write_envelope(REPORT_FORMAT, &reports)?)?;
    Ok(EXIT_DECISION)
}

fn multiple_config(
    args: &SimulateArgs,
    base: SimulationConfig,
    link: FamilyKind,
    procedure: Procedure,
) -> CliResult<MultipleStudyConfig> {
    let mut m = MultipleStudyConfig::new(base);
    m.m = args.m;
    m.null_count = args.nulls;
    m.alt_effect_sizes = if args.alt_effects.is_empty() { default_alt_effects(link) } else { args.alt_effects.clone() };
    m.procedure = procedure;
    Ok(m)
}
