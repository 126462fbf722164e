//! `pwrgram sweep-weights`: empty-cell ratio and runtime across weight
//! magnitudes.

use std::path::PathBuf;

use clap::Args;

use pwrgram::builder::empty_ratio;
use pwrgram::datasets::{sample_weights, with_weights};
use pwrgram::io::read_sites;

use crate::common::{dispatch_build, CliError, ConfigFlags};

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Input site file.
    pub input: PathBuf,
    /// Comma-separated weight ratios, e.g. 0,1e-6,1e-4,1e-2.
    #[arg(long, value_delimiter = ',')]
    pub ratios: Vec<f64>,
    /// Base weight seed.
    #[arg(long, default_value_t = 0)]
    pub weight_seed: u64,
    /// Number of weight seeds per ratio; the table reports the median.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Output table (CSV). Defaults to stdout only.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub config: ConfigFlags,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    values[(values.len() - 1) / 2]
}

pub fn run(args: SweepArgs) -> Result<(), CliError> {
    if args.ratios.is_empty() {
        return Err(CliError::Input(
            "--ratios requires at least one value".into(),
        ));
    }
    if args.seeds == 0 {
        return Err(CliError::Input("--seeds must be at least 1".into()));
    }
    let file = read_sites(&args.input)?;
    let sites = file.sites;
    let config = args.config.to_config(false)?;

    let mut rows = Vec::new();
    println!("weight_ratio,empty_ratio,runtime_s");
    for &ratio in &args.ratios {
        if ratio < 0.0 {
            return Err(CliError::Input("ratios must be nonnegative".into()));
        }
        let mut ratios = Vec::with_capacity(args.seeds);
        let mut times = Vec::with_capacity(args.seeds);
        for s in 0..args.seeds {
            let weights = sample_weights(&sites, ratio, args.weight_seed + s as u64)
                .map_err(|e| CliError::Input(e.to_string()))?;
            let weighted = with_weights(&sites, &weights);
            let diagram = dispatch_build(&weighted, &config, None)?;
            ratios.push(empty_ratio(&diagram));
            times.push(diagram.stats.total_seconds);
        }
        let row = (ratio, median(&mut ratios), median(&mut times));
        println!("{},{:.6},{:.4}", row.0, row.1, row.2);
        rows.push(row);
    }

    if let Some(path) = &args.out {
        use std::io::Write;
        let mut out = String::from("weight_ratio,empty_ratio,runtime_s\n");
        for (r, e, t) in &rows {
            out.push_str(&format!("{r},{e:.6},{t:.4}\n"));
        }
        let mut f = std::fs::File::create(path).map_err(|e| CliError::Input(e.to_string()))?;
        f.write_all(out.as_bytes())
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    Ok(())
}
