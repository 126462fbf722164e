//! `pwrgram bench`: warm-ups, timed runs, and a configuration matrix with a
//! timeout per run.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use clap::Args;

use pwrgram::builder::{BuildConfig, BuildError};
use pwrgram::bvh::{TraversalOrder, TraversalStats};
use pwrgram::cell::CullingMode;
use pwrgram::io::{
    write_stats_json, BenchConfigEntry, BenchReport, RunOutcome, TimingReport, SCHEMA_VERSION,
};

use crate::common::{
    config_report, dispatch_build, load_sites, machine_descriptor, CliError, ConfigFlags,
};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Input site file.
    pub input: PathBuf,
    /// Untimed warm-up runs per configuration.
    #[arg(long, default_value_t = 3)]
    pub warmup: usize,
    /// Timed runs per configuration.
    #[arg(long, default_value_t = 10)]
    pub runs: usize,
    /// Per-run timeout in seconds; an overrun records a DNF and abandons the
    /// configuration's remaining runs.
    #[arg(long, default_value_t = 300.0)]
    pub timeout: f64,
    /// Matrix axis, repeatable: key=v1,v2 with keys culling, traversal,
    /// warm_start, leaf_size.
    #[arg(long = "matrix")]
    pub matrix: Vec<String>,
    /// Replace file weights with a sampled set at this magnitude ratio.
    #[arg(long)]
    pub weights_ratio: Option<f64>,
    /// Seed for sampled weights.
    #[arg(long, default_value_t = 0)]
    pub weight_seed: u64,
    /// JSON report path.
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// CSV report path (one row per timed run).
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Machine label recorded in reports.
    #[arg(long, default_value = "")]
    pub machine: String,
    #[command(flatten)]
    pub config: ConfigFlags,
}

/// One axis of the benchmark matrix.
#[derive(Debug, Clone)]
enum Axis {
    Culling(Vec<CullingMode>),
    Traversal(Vec<TraversalOrder>),
    WarmStart(Vec<bool>),
    LeafSize(Vec<usize>),
}

fn parse_axis(spec: &str) -> Result<Axis, CliError> {
    let Some((key, vals)) = spec.split_once('=') else {
        return Err(CliError::Input(format!(
            "--matrix expects key=v1,v2, got {spec:?}"
        )));
    };
    let vals: Vec<&str> = vals.split(',').map(str::trim).collect();
    let norm = |v: &str| v.replace('-', "_").to_ascii_lowercase();
    match norm(key).as_str() {
        "culling" => {
            let mut out = Vec::new();
            for v in vals {
                out.push(match norm(v).as_str() {
                    "directional" => CullingMode::Directional,
                    "isotropic" => CullingMode::Isotropic,
                    other => return Err(CliError::Input(format!("unknown culling {other:?}"))),
                });
            }
            Ok(Axis::Culling(out))
        }
        "traversal" => {
            let mut out = Vec::new();
            for v in vals {
                out.push(match norm(v).as_str() {
                    "best_first" => TraversalOrder::BestFirst,
                    "depth_first" => TraversalOrder::DepthFirst,
                    other => return Err(CliError::Input(format!("unknown traversal {other:?}"))),
                });
            }
            Ok(Axis::Traversal(out))
        }
        "warm_start" => {
            let mut out = Vec::new();
            for v in vals {
                out.push(match norm(v).as_str() {
                    "on" | "true" | "1" => true,
                    "off" | "false" | "0" => false,
                    other => return Err(CliError::Input(format!("unknown warm_start {other:?}"))),
                });
            }
            Ok(Axis::WarmStart(out))
        }
        "leaf_size" => {
            let mut out = Vec::new();
            for v in vals {
                out.push(v.parse::<usize>().map_err(|_| {
                    CliError::Input(format!("leaf_size values must be integers, got {v:?}"))
                })?);
            }
            Ok(Axis::LeafSize(out))
        }
        other => Err(CliError::Input(format!("unknown matrix key {other:?}"))),
    }
}

/// Cross product of the requested axes over the base configuration.
fn expand_matrix(base: BuildConfig, axes: &[Axis]) -> Vec<BuildConfig> {
    let mut configs = vec![base];
    for axis in axes {
        let mut next = Vec::new();
        for cfg in &configs {
            match axis {
                Axis::Culling(vs) => {
                    for &v in vs {
                        next.push(BuildConfig { culling: v, ..*cfg });
                    }
                }
                Axis::Traversal(vs) => {
                    for &v in vs {
                        next.push(BuildConfig {
                            traversal: v,
                            ..*cfg
                        });
                    }
                }
                Axis::WarmStart(vs) => {
                    for &v in vs {
                        next.push(BuildConfig {
                            warm_start: v,
                            ..*cfg
                        });
                    }
                }
                Axis::LeafSize(vs) => {
                    for &v in vs {
                        next.push(BuildConfig {
                            leaf_size: v,
                            ..*cfg
                        });
                    }
                }
            }
        }
        configs = next;
    }
    configs
}

pub fn run(args: BenchArgs) -> Result<(), CliError> {
    if args.runs == 0 {
        return Err(CliError::Input("--runs must be at least 1".into()));
    }
    let sites = load_sites(&args.input, args.weights_ratio, args.weight_seed)?;
    let axes: Result<Vec<Axis>, CliError> = args.matrix.iter().map(|s| parse_axis(s)).collect();
    let base = args.config.to_config(false)?;
    let configs = expand_matrix(base, &axes?);
    let timeout = Duration::from_secs_f64(args.timeout);
    let machine = machine_descriptor(&args.machine);

    let mut entries: Vec<BenchConfigEntry> = Vec::new();
    for config in &configs {
        let label = format!(
            "culling={:?} traversal={:?} warm_start={} leaf_size={}",
            config.culling, config.traversal, config.warm_start, config.leaf_size
        );
        println!(
            "config {label}: {} warm-ups + {} runs",
            args.warmup, args.runs
        );
        let mut outcomes: Vec<RunOutcome> = Vec::new();
        let mut completed: Vec<f64> = Vec::new();
        let mut fractions: Vec<f64> = Vec::new();
        let mut last_traversal = TraversalStats::default();
        let mut dnf = false;

        'config: for phase in 0..2 {
            let count = if phase == 0 { args.warmup } else { args.runs };
            for run_idx in 0..count {
                let start = Instant::now();
                let result = dispatch_build(&sites, config, Some(start + timeout));
                let elapsed = start.elapsed();
                // Cooperative checks stop between cells; the wall-clock check
                // catches runs that finished late anyway.
                let overran = elapsed > timeout;
                match result {
                    Ok(diagram) if !overran => {
                        if phase == 1 {
                            let s = &diagram.stats;
                            completed.push(s.total_seconds);
                            fractions.push(if s.total_seconds > 0.0 {
                                s.index_seconds / s.total_seconds
                            } else {
                                0.0
                            });
                            outcomes.push(RunOutcome::Completed {
                                seconds: s.total_seconds,
                                index_seconds: s.index_seconds,
                                cells_seconds: s.cells_seconds,
                            });
                            last_traversal = s.traversal;
                            println!("  run {run_idx}: {:.3}s", s.total_seconds);
                        }
                    }
                    Ok(_) | Err(BuildError::Timeout) => {
                        outcomes.push(RunOutcome::Dnf);
                        dnf = true;
                        println!("  run {run_idx}: DNF (timeout {:.0}s)", args.timeout);
                        break 'config;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }

        entries.push(BenchConfigEntry {
            config: config_report(config),
            outcomes,
            timing: TimingReport::from_runs(&completed, &fractions),
            traversal: last_traversal.into(),
            dnf,
        });
    }

    let report = BenchReport {
        schema_version: SCHEMA_VERSION,
        machine,
        site_count: sites.len(),
        warmup_runs: args.warmup,
        timed_runs: args.runs,
        timeout_seconds: args.timeout,
        configs: entries,
    };
    if let Some(path) = &args.json {
        write_stats_json(path, &report)?;
    }
    if let Some(path) = &args.csv {
        write_csv(path, &report)?;
    }
    for entry in &report.configs {
        let mean = entry
            .timing
            .mean_seconds
            .map(|m| format!("{m:.3}s"))
            .unwrap_or_else(|| "DNF".into());
        println!(
            "summary culling={} traversal={} warm_start={} leaf_size={}: mean {} over {} runs, {} clip calls",
            entry.config.culling,
            entry.config.traversal,
            entry.config.warm_start,
            entry.config.leaf_size,
            mean,
            entry.timing.runs_seconds.len(),
            entry.traversal.clip_calls,
        );
    }
    Ok(())
}

/// Stable CSV schema, one row per timed run:
/// `config_id,culling,traversal,warm_start,leaf_size,threads,run,status,total_s,index_s,cells_s`
fn write_csv(path: &PathBuf, report: &BenchReport) -> Result<(), CliError> {
    use std::io::Write;
    let mut out = String::new();
    out.push_str("config_id,culling,traversal,warm_start,leaf_size,threads,run,status,total_s,index_s,cells_s\n");
    for (cid, entry) in report.configs.iter().enumerate() {
        for (ridx, outcome) in entry.outcomes.iter().enumerate() {
            let c = &entry.config;
            match outcome {
                RunOutcome::Completed {
                    seconds,
                    index_seconds,
                    cells_seconds,
                } => {
                    out.push_str(&format!(
                        "{cid},{},{},{},{},{},{ridx},completed,{seconds},{index_seconds},{cells_seconds}\n",
                        c.culling, c.traversal, c.warm_start, c.leaf_size, c.threads
                    ));
                }
                RunOutcome::Dnf => {
                    out.push_str(&format!(
                        "{cid},{},{},{},{},{},{ridx},dnf,,,\n",
                        c.culling, c.traversal, c.warm_start, c.leaf_size, c.threads
                    ));
                }
            }
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| CliError::Input(e.to_string()))?;
    f.write_all(out.as_bytes())
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(())
}
