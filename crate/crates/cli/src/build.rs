//! `pwrgram build` and `pwrgram export`.

use std::path::PathBuf;

use clap::Args;

use pwrgram::builder::empty_ratio;
use pwrgram::io::{export_cells_obj, write_adjacency_csr, write_stats_json, RunReport};

use crate::common::{
    config_report, dispatch_build, load_sites, machine_descriptor, CliError, ConfigFlags,
};

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Input site file.
    pub input: PathBuf,
    /// Output adjacency file.
    #[arg(long)]
    pub csr: Option<PathBuf>,
    /// Output mesh file; implies keeping cell geometry.
    #[arg(long)]
    pub obj: Option<PathBuf>,
    /// Output JSON run report.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Replace file weights with a sampled set at this magnitude ratio.
    #[arg(long)]
    pub weights_ratio: Option<f64>,
    /// Seed for sampled weights.
    #[arg(long, default_value_t = 0)]
    pub weight_seed: u64,
    /// Machine label recorded in reports.
    #[arg(long, default_value = "")]
    pub machine: String,
    #[command(flatten)]
    pub config: ConfigFlags,
}

pub fn run(args: BuildArgs) -> Result<(), CliError> {
    let sites = load_sites(&args.input, args.weights_ratio, args.weight_seed)?;
    let config = args.config.to_config(args.obj.is_some())?;
    let diagram = dispatch_build(&sites, &config, None)?;
    let ratio = empty_ratio(&diagram);
    if let Some(path) = &args.csr {
        write_adjacency_csr(path, &diagram)?;
    }
    if let Some(path) = &args.obj {
        export_cells_obj(path, &diagram)?;
    }
    if let Some(path) = &args.stats {
        let report = RunReport::from_build(
            "build",
            &machine_descriptor(&args.machine),
            config_report(&config),
            &diagram,
            ratio,
        );
        write_stats_json(path, &report)?;
    }
    println!(
        "built {} cells in {:.3}s ({} threads): {} adjacency entries, empty ratio {:.4}, {} degraded",
        diagram.site_count,
        diagram.stats.total_seconds,
        diagram.stats.threads_used,
        diagram.neighbors.len(),
        ratio,
        diagram.stats.degraded_cells,
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Input site file.
    pub input: PathBuf,
    /// Output mesh file.
    #[arg(long)]
    pub obj: PathBuf,
    /// Replace file weights with a sampled set at this magnitude ratio.
    #[arg(long)]
    pub weights_ratio: Option<f64>,
    /// Seed for sampled weights.
    #[arg(long, default_value_t = 0)]
    pub weight_seed: u64,
    #[command(flatten)]
    pub config: ConfigFlags,
}

pub fn run_export(args: ExportArgs) -> Result<(), CliError> {
    let sites = load_sites(&args.input, args.weights_ratio, args.weight_seed)?;
    let config = args.config.to_config(true)?;
    let diagram = dispatch_build(&sites, &config, None)?;
    export_cells_obj(&args.obj, &diagram)?;
    println!(
        "exported {} cells to {}",
        diagram.site_count,
        args.obj.display()
    );
    Ok(())
}
