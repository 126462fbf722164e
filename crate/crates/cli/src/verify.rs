//! `pwrgram verify`: fast path against the brute-force reference.

use std::path::PathBuf;

use clap::Args;

use pwrgram::builder::{empty_ratio, global_box};
use pwrgram::geom::convert_sites;
use pwrgram::io::{write_stats_json, MismatchReport, RunReport};
use pwrgram::oracle::{brute_force_diagram_opts, diff, DiagramDiff};
use pwrgram::real::PrecisionMode;

use crate::common::{
    config_report, dispatch_build, load_sites, machine_descriptor, CliError, ConfigFlags,
};

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Input site file.
    pub input: PathBuf,
    /// Refuse inputs larger than this; the reference is quadratic.
    #[arg(long, default_value_t = 5000)]
    pub cap: usize,
    /// Maximum acceptable mismatch rate.
    #[arg(long, default_value_t = 0.0)]
    pub tolerance: f64,
    /// Replace file weights with a sampled set at this magnitude ratio.
    #[arg(long)]
    pub weights_ratio: Option<f64>,
    /// Seed for sampled weights.
    #[arg(long, default_value_t = 0)]
    pub weight_seed: u64,
    /// Output JSON run report.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// Machine label recorded in reports.
    #[arg(long, default_value = "")]
    pub machine: String,
    #[command(flatten)]
    pub config: ConfigFlags,
}

pub fn run(args: VerifyArgs) -> Result<(), CliError> {
    let sites = load_sites(&args.input, args.weights_ratio, args.weight_seed)?;
    if sites.len() > args.cap {
        return Err(CliError::Input(format!(
            "{} sites exceed the verification cap of {} (the reference is quadratic); \
             raise --cap to force",
            sites.len(),
            args.cap
        )));
    }
    let config = args.config.to_config(false)?;
    let fast = dispatch_build(&sites, &config, None)?;
    let reference = match config.precision {
        PrecisionMode::Double => {
            let domain = global_box(&sites, config.box_margin)?;
            brute_force_diagram_opts(&sites, &domain, false)
        }
        PrecisionMode::Single => {
            let sites32 = convert_sites::<f64, f32>(&sites);
            let domain = global_box(&sites32, config.box_margin)?;
            brute_force_diagram_opts(&sites32, &domain, false)
        }
    }
    .map_err(|e| CliError::Input(e.to_string()))?;
    let delta: DiagramDiff = diff(&reference, &fast).map_err(|e| CliError::Input(e.to_string()))?;
    println!(
        "reference pairs {}, missing {}, extra {}, mismatch rate {:.6}",
        delta.reference_pairs,
        delta.missing_pairs.len(),
        delta.extra_pairs.len(),
        delta.mismatch_rate
    );
    if let Some(path) = &args.stats {
        let mut report = RunReport::from_build(
            "verify",
            &machine_descriptor(&args.machine),
            config_report(&config),
            &fast,
            empty_ratio(&fast),
        );
        report.mismatch = Some(MismatchReport {
            missing_pairs: delta.missing_pairs.len(),
            extra_pairs: delta.extra_pairs.len(),
            reference_pairs: delta.reference_pairs,
            mismatch_rate: delta.mismatch_rate,
        });
        write_stats_json(path, &report)?;
    }
    if delta.mismatch_rate > args.tolerance {
        return Err(CliError::Verification(format!(
            "mismatch rate {:.6} exceeds tolerance {:.6}",
            delta.mismatch_rate, args.tolerance
        )));
    }
    Ok(())
}
