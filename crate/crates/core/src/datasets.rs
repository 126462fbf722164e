//! Deterministic synthetic dataset generators and weight sampling.
//!
//! Everything here is a pure function of `(spec, seed)` and reproduces
//! bit-identical output on any platform. The generator is SplitMix64 with
//! explicit per-purpose streams, and normal deviates come from a plain
//! Box-Muller transform, so the exact byte streams can be reproduced from
//! the description below in any language:
//!
//! - `next_u64`: `state += 0x9E3779B97F4A7C15`, then mix `z = state`;
//!   `z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9`;
//!   `z = (z ^ (z >> 27)) * 0x94D049BB133111EB`; return `z ^ (z >> 31)`.
//! - `next_f64`: `(next_u64() >> 11) * 2^-53`, uniform in `[0, 1)`.
//! - stream with tag `t`: initial state is `seed ^ m` where `m` is the first
//!   `next_u64` of a SplitMix64 started at state `t`.
//! - normals: Box-Muller on `u1 = ((next_u64() >> 11) + 1) * 2^-53` (in
//!   `(0, 1]`) and `u2 = next_f64()`; the pair is
//!   `sqrt(-2 ln u1) * (cos, sin)(2 pi u2)`, consumed cosine first.
//!
//! Streams: positions = 1, cluster centers = 2, weights = 3.

use thiserror::Error;

use crate::bvh::{knn_warm_start, PowerBvh};
use crate::geom::{Aabb, Vec3, WeightedSite};

pub const STREAM_POSITIONS: u64 = 1;
pub const STREAM_CENTERS: u64 = 2;
pub const STREAM_WEIGHTS: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("nearest-neighbor statistics need at least two sites")]
    TooFewSites,
}

/// SplitMix64: a 64-bit counter-based generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    cached_normal: Option<f64>,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        Self {
            state,
            cached_normal: None,
        }
    }

    /// Independent stream `tag` derived from a user seed.
    pub fn stream(seed: u64, tag: u64) -> Self {
        let mask = Self::new(tag).next_u64();
        Self::new(seed ^ mask)
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform in `[lo, hi)`.
    #[inline]
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal deviate via Box-Muller; pairs are generated together
    /// and handed out one at a time.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = ((self.next_u64() >> 11) + 1) as f64 * (1.0 / 9007199254740992.0);
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Synthetic distribution shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorKind {
    WhiteNoise,
    Clustered,
    DensityGradient,
}

/// Parameters of one synthetic point set.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub domain: Aabb<f64>,
    /// Cluster count; used by [`GeneratorKind::Clustered`] only.
    pub cluster_count: usize,
    /// Cluster standard deviation.
    pub cluster_sigma: f64,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn default_domain() -> Aabb<f64> {
        Aabb::new(Vec3::new(-10.0, -10.0, -10.0), Vec3::new(10.0, 10.0, 10.0))
    }

    pub fn new(kind: GeneratorKind, n: usize, seed: u64) -> Self {
        Self {
            kind,
            n,
            domain: Self::default_domain(),
            cluster_count: 1,
            cluster_sigma: 0.1,
            seed,
        }
    }
}

/// Generate the point set described by `spec`, with zero weights.
pub fn generate(spec: &GeneratorSpec) -> Vec<WeightedSite<f64>> {
    match spec.kind {
        GeneratorKind::WhiteNoise => gen_white_noise(spec),
        GeneratorKind::Clustered => gen_clustered(spec),
        GeneratorKind::DensityGradient => gen_density_gradient(spec),
    }
}

/// Uniform points in the domain. Per point, x then y then z.
pub fn gen_white_noise(spec: &GeneratorSpec) -> Vec<WeightedSite<f64>> {
    let mut rng = SplitMix64::stream(spec.seed, STREAM_POSITIONS);
    let d = spec.domain;
    (0..spec.n)
        .map(|i| {
            let p = Vec3::new(
                rng.uniform(d.min.x, d.max.x),
                rng.uniform(d.min.y, d.max.y),
                rng.uniform(d.min.z, d.max.z),
            );
            WeightedSite::new(p, 0.0, i as u32)
        })
        .collect()
}

/// Gaussian clusters: cluster centers uniform in the domain, points assigned
/// round-robin (so the first `n mod K` clusters get one extra point), each
/// point an isotropic normal around its center, clamped to the domain.
pub fn gen_clustered(spec: &GeneratorSpec) -> Vec<WeightedSite<f64>> {
    let k = spec.cluster_count.max(1);
    let d = spec.domain;
    let mut centers_rng = SplitMix64::stream(spec.seed, STREAM_CENTERS);
    let centers: Vec<Vec3<f64>> = (0..k)
        .map(|_| {
            Vec3::new(
                centers_rng.uniform(d.min.x, d.max.x),
                centers_rng.uniform(d.min.y, d.max.y),
                centers_rng.uniform(d.min.z, d.max.z),
            )
        })
        .collect();
    let mut rng = SplitMix64::stream(spec.seed, STREAM_POSITIONS);
    (0..spec.n)
        .map(|i| {
            let c = centers[i % k];
            let p = Vec3::new(
                c.x + spec.cluster_sigma * rng.next_normal(),
                c.y + spec.cluster_sigma * rng.next_normal(),
                c.z + spec.cluster_sigma * rng.next_normal(),
            );
            let p = p.max(d.min).min(d.max);
            WeightedSite::new(p, 0.0, i as u32)
        })
        .collect()
}

/// Linear density gradient along x via inverse-transform sampling:
/// `x = a + (b - a) sqrt(u)`, denser toward `b`; y and z uniform.
/// Per point, u then y then z.
pub fn gen_density_gradient(spec: &GeneratorSpec) -> Vec<WeightedSite<f64>> {
    let mut rng = SplitMix64::stream(spec.seed, STREAM_POSITIONS);
    let d = spec.domain;
    let (a, b) = (d.min.x, d.max.x);
    (0..spec.n)
        .map(|i| {
            let u = rng.next_f64();
            let p = Vec3::new(
                a + (b - a) * u.sqrt(),
                rng.uniform(d.min.y, d.max.y),
                rng.uniform(d.min.z, d.max.z),
            );
            WeightedSite::new(p, 0.0, i as u32)
        })
        .collect()
}

/// Median distance to the nearest other site, lower-median for even counts.
pub fn median_nn_distance(sites: &[WeightedSite<f64>]) -> Result<f64, DatasetError> {
    if sites.len() < 2 {
        return Err(DatasetError::TooFewSites);
    }
    let bvh = PowerBvh::build(sites, 10).expect("nonempty");
    let mut dists: Vec<f64> = (0..sites.len() as u32)
        .map(|i| {
            let nn = knn_warm_start(&bvh, sites, i, 1)[0];
            sites[i as usize]
                .position
                .distance(sites[nn as usize].position)
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    Ok(dists[(dists.len() - 1) / 2])
}

/// Weights drawn i.i.d. from a centered normal whose standard deviation is
/// `weight_ratio * d_nn^2 / 3`, with `d_nn` the median nearest-neighbor
/// distance of the point set. Ratio zero yields exactly zero weights.
pub fn sample_weights(
    sites: &[WeightedSite<f64>],
    weight_ratio: f64,
    seed: u64,
) -> Result<Vec<f64>, DatasetError> {
    if weight_ratio == 0.0 {
        return Ok(vec![0.0; sites.len()]);
    }
    let d_nn = median_nn_distance(sites)?;
    let sigma = weight_ratio * d_nn * d_nn / 3.0;
    let mut rng = SplitMix64::stream(seed, STREAM_WEIGHTS);
    Ok((0..sites.len())
        .map(|_| sigma * rng.next_normal())
        .collect())
}

/// Apply a weight array to a site set.
pub fn with_weights(sites: &[WeightedSite<f64>], weights: &[f64]) -> Vec<WeightedSite<f64>> {
    sites
        .iter()
        .zip(weights)
        .map(|(s, &w)| WeightedSite::new(s.position, w, s.id))
        .collect()
}
