//! Shared flag handling and build dispatch.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use clap::{Args, ValueEnum};

use pwrgram::builder::{build_diagram_with_deadline, BuildConfig, BuildError, PowerDiagram};
use pwrgram::bvh::TraversalOrder;
use pwrgram::cell::CullingMode;
use pwrgram::datasets::{sample_weights, with_weights};
use pwrgram::geom::{convert_sites, WeightedSite};
use pwrgram::io::{read_sites, BenchConfigReport, FormatError};
use pwrgram::real::PrecisionMode;

pub const THREADS_ENV: &str = "PWRGRAM_THREADS";

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Verification(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Verification(m) => f.write_str(m),
        }
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<BuildError> for CliError {
    fn from(e: BuildError) -> Self {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Double,
    Single,
}

impl From<PrecisionArg> for PrecisionMode {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Double => PrecisionMode::Double,
            PrecisionArg::Single => PrecisionMode::Single,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CullingArg {
    Directional,
    Isotropic,
}

impl From<CullingArg> for CullingMode {
    fn from(c: CullingArg) -> Self {
        match c {
            CullingArg::Directional => CullingMode::Directional,
            CullingArg::Isotropic => CullingMode::Isotropic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TraversalArg {
    BestFirst,
    DepthFirst,
}

impl From<TraversalArg> for TraversalOrder {
    fn from(t: TraversalArg) -> Self {
        match t {
            TraversalArg::BestFirst => TraversalOrder::BestFirst,
            TraversalArg::DepthFirst => TraversalOrder::DepthFirst,
        }
    }
}

/// Build-configuration flags shared by `build`, `verify`, `bench`,
/// `sweep-weights`, and `export`.
#[derive(Debug, Args, Clone)]
pub struct ConfigFlags {
    /// Working precision of the whole build.
    #[arg(long, value_enum, default_value = "double")]
    pub precision: PrecisionArg,
    /// Hierarchy leaf size.
    #[arg(long, default_value_t = 10)]
    pub leaf_size: usize,
    /// Pre-clip each cell by its nearest neighbors before traversal.
    #[arg(long, default_value_t = false)]
    pub warm_start: bool,
    /// Neighbor count for the warm start.
    #[arg(long, default_value_t = 8)]
    pub warm_start_k: usize,
    /// Global box expansion as a fraction of the site-cloud diagonal.
    #[arg(long, default_value_t = 0.01)]
    pub box_margin: f64,
    /// Candidate culling bound.
    #[arg(long, value_enum, default_value = "directional")]
    pub culling: CullingArg,
    /// Hierarchy traversal order.
    #[arg(long, value_enum, default_value = "best-first")]
    pub traversal: TraversalArg,
    /// Worker threads: a number, or "max" for all cores.
    /// The PWRGRAM_THREADS environment variable overrides this.
    #[arg(long, default_value = "max")]
    pub threads: String,
}

impl ConfigFlags {
    pub fn to_config(&self, keep_geometry: bool) -> Result<BuildConfig, CliError> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => {
                parse_threads(&v).map_err(|e| CliError::Input(format!("{THREADS_ENV}: {e}")))?
            }
            Err(_) => parse_threads(&self.threads)
                .map_err(|e| CliError::Input(format!("--threads: {e}")))?,
        };
        if self.warm_start_k == 0 {
            return Err(CliError::Input("--warm-start-k must be at least 1".into()));
        }
        if self.box_margin < 0.0 {
            return Err(CliError::Input("--box-margin must be nonnegative".into()));
        }
        Ok(BuildConfig {
            precision: self.precision.into(),
            leaf_size: self.leaf_size.max(1),
            warm_start: self.warm_start,
            warm_start_k: self.warm_start_k,
            box_margin: self.box_margin,
            culling: self.culling.into(),
            traversal: self.traversal.into(),
            keep_geometry,
            threads,
        })
    }
}

fn parse_threads(v: &str) -> Result<usize, String> {
    if v.eq_ignore_ascii_case("max") || v == "0" {
        return Ok(0);
    }
    v.parse::<usize>()
        .map_err(|_| format!("expected a number or \"max\", got {v:?}"))
}

/// Run one build in the configured precision.
pub fn dispatch_build(
    sites: &[WeightedSite<f64>],
    config: &BuildConfig,
    deadline: Option<Instant>,
) -> Result<PowerDiagram, BuildError> {
    match config.precision {
        PrecisionMode::Double => build_diagram_with_deadline(sites, config, deadline),
        PrecisionMode::Single => {
            let sites32 = convert_sites::<f64, f32>(sites);
            build_diagram_with_deadline(&sites32, config, deadline)
        }
    }
}

/// Read a site file and optionally replace its weights with a sampled set.
pub fn load_sites(
    path: &Path,
    weights_ratio: Option<f64>,
    weight_seed: u64,
) -> Result<Vec<WeightedSite<f64>>, CliError> {
    let file = read_sites(path)?;
    let mut sites = file.sites;
    if let Some(ratio) = weights_ratio {
        if ratio < 0.0 {
            return Err(CliError::Input(
                "--weights-ratio must be nonnegative".into(),
            ));
        }
        let weights = sample_weights(&sites, ratio, weight_seed)
            .map_err(|e| CliError::Input(e.to_string()))?;
        sites = with_weights(&sites, &weights);
    }
    Ok(sites)
}

pub fn machine_descriptor(user: &str) -> String {
    let cores = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    if user.is_empty() {
        format!("{cores} cores")
    } else {
        format!("{user} ({cores} cores)")
    }
}

pub fn config_report(config: &BuildConfig) -> BenchConfigReport {
    BenchConfigReport {
        precision: config.precision.to_string(),
        leaf_size: config.leaf_size,
        warm_start: config.warm_start,
        warm_start_k: config.warm_start_k,
        box_margin: config.box_margin,
        culling: match config.culling {
            CullingMode::Directional => "directional".into(),
            CullingMode::Isotropic => "isotropic".into(),
        },
        traversal: match config.traversal {
            TraversalOrder::BestFirst => "best_first".into(),
            TraversalOrder::DepthFirst => "depth_first".into(),
        },
        threads: config.effective_threads(),
    }
}
