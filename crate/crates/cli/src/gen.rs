//! `pwrgram gen`: synthetic dataset generation.

use std::path::PathBuf;

use clap::{Args, Subcommand};

use pwrgram::datasets::{generate, median_nn_distance, GeneratorKind, GeneratorSpec};
use pwrgram::geom::{Aabb, Vec3};
use pwrgram::io::write_sites;

use crate::common::{CliError, PrecisionArg};

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(subcommand)]
    pub kind: GenKind,
}

#[derive(Debug, Subcommand)]
pub enum GenKind {
    /// Uniform points in the domain.
    WhiteNoise(CommonGen),
    /// Gaussian clusters around uniform centers.
    Clustered(ClusteredGen),
    /// Linear density gradient along the x axis.
    DensityGradient(CommonGen),
}

#[derive(Debug, Args)]
pub struct CommonGen {
    /// Number of sites.
    #[arg(long)]
    pub n: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Cubic domain lower bound, applied to every axis.
    #[arg(long, default_value_t = -10.0)]
    pub domain_min: f64,
    /// Cubic domain upper bound, applied to every axis.
    #[arg(long, default_value_t = 10.0)]
    pub domain_max: f64,
    /// Output site file.
    #[arg(long)]
    pub out: PathBuf,
    /// Storage precision of the site file.
    #[arg(long, value_enum, default_value = "double")]
    pub precision: PrecisionArg,
}

#[derive(Debug, Args)]
pub struct ClusteredGen {
    #[command(flatten)]
    pub common: CommonGen,
    /// Cluster count.
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Cluster standard deviation.
    #[arg(long, default_value_t = 0.1)]
    pub sigma: f64,
}

pub fn run(args: GenArgs) -> Result<(), CliError> {
    let (common, kind, k, sigma) = match &args.kind {
        GenKind::WhiteNoise(c) => (c, GeneratorKind::WhiteNoise, 1, 0.1),
        GenKind::Clustered(c) => (&c.common, GeneratorKind::Clustered, c.k, c.sigma),
        GenKind::DensityGradient(c) => (c, GeneratorKind::DensityGradient, 1, 0.1),
    };
    if common.n == 0 {
        return Err(CliError::Input("--n must be at least 1".into()));
    }
    if common.domain_max <= common.domain_min {
        return Err(CliError::Input(
            "--domain-max must exceed --domain-min".into(),
        ));
    }
    if sigma <= 0.0 {
        return Err(CliError::Input("--sigma must be positive".into()));
    }
    if k == 0 {
        return Err(CliError::Input("--k must be at least 1".into()));
    }
    let spec = GeneratorSpec {
        kind,
        n: common.n,
        domain: Aabb::new(
            Vec3::splat(common.domain_min),
            Vec3::splat(common.domain_max),
        ),
        cluster_count: k,
        cluster_sigma: sigma,
        seed: common.seed,
    };
    let sites = generate(&spec);
    write_sites(&common.out, &sites, common.precision.into())?;
    let d_nn = if sites.len() >= 2 {
        median_nn_distance(&sites).map_err(|e| CliError::Input(e.to_string()))?
    } else {
        f64::NAN
    };
    println!(
        "wrote {} sites to {} (median nn distance {:.6})",
        sites.len(),
        common.out.display(),
        d_nn
    );
    Ok(())
}
