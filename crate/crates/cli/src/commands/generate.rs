use std::path::PathBuf;

use clap::Args;
use post_core::formats::{write_batch, Manifest};
use post_core::simulation::{gen_batch, replication_rng, CovariateSetting, Method, SimulationConfig};
use post_core::{FamilyKind, GlmFamily};

use crate::error::{CliError, CliResult, EXIT_DECISION};
use crate::report::ensure_dir;

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    /// Directory to create; must not already contain a manifest.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "gaussian")]
    pub family: String,
    #[arg(long, default_value = "nu")]
    pub setting: String,
    /// Effect size on the two effect-carrying covariates.
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
    #[arg(long, default_value_t = 30)]
    pub p: usize,
    /// Observations per arm per batch.
    #[arg(long, default_value_t = 100)]
    pub batch_n: usize,
    #[arg(long, default_value_t = 10)]
    pub batches: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

/// Draws the batches of replication 0 in the study design and writes them
/// as `batch_000.csv`, `batch_001.csv`, ... next to a manifest.
pub fn run(args: &GenerateArgs) -> CliResult<i32> {
    let usage = |e: post_core::Error| CliError::usage(e.to_string());
    let kind: FamilyKind = args.family.parse().map_err(usage)?;
    let setting: CovariateSetting = args.setting.parse().map_err(usage)?;
    if args.batches == 0 {
        return Err(CliError::usage("--batches must be positive"));
    }
    let mut cfg = SimulationConfig::new(GlmFamily::of_kind(kind), setting, Method::PostAdaLasso, args.b);
    cfg.p = args.p;
    cfg.theta0 = post_core::simulation::default_theta0(args.p);
    cfg.batch_n = args.batch_n;
    cfg.horizon_n = args.batch_n * args.batches;
    cfg.seed = args.seed;
    cfg.validate().map_err(usage)?;
    if args.output.join(crate::input::MANIFEST_FILE).exists() {
        return Err(CliError::usage(format!("{} already holds an experiment", args.output.display())));
    }

    let mut manifest = Manifest::new(kind, args.p);
    manifest.horizon = Some(cfg.horizon_n);
    let beta = cfg.beta();
    let mut rng = replication_rng(args.seed, 0, 0);
    ensure_dir(&args.output)?;
    std::fs::write(args.output.join(crate::input::MANIFEST_FILE), manifest.to_json())?;
    for k in 0..args.batches {
        let batch = gen_batch(&cfg, &beta, k as u64, &mut rng)?;
        let file = std::fs::File::create(args.output.join(format!("batch_{k:03}.csv")))?;
        write_batch(std::io::BufWriter::new(file), &batch, &manifest)?;
    }
    println!("wrote {} batches of {} + {} rows to {}", args.batches, args.batch_n, args.batch_n, args.output.display());
    Ok(EXIT_DECISION)
}
