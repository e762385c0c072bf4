//! Clusters a model's thresholds against a validation set.

use std::path::PathBuf;

use anyhow::{Context, Result};
use boostfhe::clustering::{cluster_nodes, ClusterConfig, Validator, DEFAULT_INTENSITY};
use boostfhe::dataset::Dataset;
use boostfhe::forest::ForestModel;
use boostfhe_cli::{init_logging, CommonArgs, Reporter};
use clap::Parser;

#[derive(Debug, Parser)]
#[command(about = "Merge near-equal thresholds without losing validation accuracy")]
struct Cli {
    #[arg(long)]
    model: PathBuf,
    /// Labelled CSV used by the accuracy gate.
    #[arg(long)]
    validation: PathBuf,
    /// Normalized merge radius in [0, 1].
    #[arg(long)]
    intensity: Option<f64>,
    /// Accuracy drop a merge may cause.
    #[arg(long, default_value_t = 0.0)]
    tolerance: f64,
    /// Where to write the clustered model.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    init_logging(cli.common.verbose);
    let cfg = cli.common.resolve()?;
    let original = std::fs::read(&cli.model).with_context(|| format!("reading {}", cli.model.display()))?;
    let model = ForestModel::from_json(std::str::from_utf8(&original)?)?;
    let data = Dataset::load(&cli.validation).with_context(|| format!("reading {}", cli.validation.display()))?;
    let validator = Validator::from_dataset(&data, &model)?;
    let cluster_cfg = ClusterConfig {
        intensity: cli.intensity.or(cfg.intensity).unwrap_or(DEFAULT_INTENSITY),
        tolerance: cli.tolerance,
        bitwidth: cfg.bitwidth()?,
    };
    let (clustered, report) = cluster_nodes(&model, &cluster_cfg, &validator)?;
    if report.committed == 0 {
        std::fs::write(&cli.output, &original)?;
    } else {
        clustered.save(&cli.output)?;
    }
    tracing::info!(
        committed = report.committed,
        plan_before = report.plan_size_before,
        plan_after = report.plan_size_after,
        "clustering done"
    );
    Reporter::new(cfg.report.as_deref())?.emit(&report)?;
    Ok(())
}
