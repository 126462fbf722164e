//! Full-diagram construction: global box, duplicate handling, the per-cell
//! pipeline distributed across workers, and CSR adjacency assembly.
//!
//! Output is deterministic: the same site array and configuration produce
//! bit-identical adjacency for any worker count, because every cell is
//! computed independently and results are assembled in site order.

use std::time::Instant;

use thiserror::Error;

use crate::bvh::{
    clip_by_neighbors, clip_candidate, knn_warm_start, BvhError, PowerBvh, TraversalError,
    TraversalOrder, TraversalScratch, TraversalStats,
};
use crate::cell::{CellError, ConvexCell, CullingMode};
use crate::geom::{Aabb, PlaneSource, Tolerances, Vec3, WeightedSite};
use crate::real::{PrecisionMode, Real};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Cell flag bits, matching the adjacency file format.
pub const FLAG_EMPTY: u8 = 1;
pub const FLAG_BOUNDARY: u8 = 1 << 1;
pub const FLAG_DEGRADED: u8 = 1 << 2;

/// Rebuild attempts for a cell whose clip produced an inconsistent hole
/// boundary; each retry multiplies the classification tolerance by ten.
const TOLERANCE_RETRIES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite coordinate or weight at site {0}")]
    NonFiniteInput(usize),
    #[error("site {0} lies on or outside the global box; use a positive box margin")]
    SiteOutsideBox(usize),
    #[error("build aborted: deadline exceeded")]
    Timeout,
}

impl From<BvhError> for BuildError {
    fn from(e: BvhError) -> Self {
        match e {
            BvhError::EmptyInput => BuildError::EmptyInput,
        }
    }
}

/// Configuration of one diagram build.
#[derive(Debug, Clone, Copy)]
pub struct BuildConfig {
    pub precision: PrecisionMode,
    pub leaf_size: usize,
    pub warm_start: bool,
    pub warm_start_k: usize,
    /// Symmetric expansion of the global box, as a fraction of its diagonal.
    pub box_margin: f64,
    pub culling: CullingMode,
    pub traversal: TraversalOrder,
    pub keep_geometry: bool,
    /// Worker count; 0 means one worker per available core.
    pub threads: usize,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            precision: PrecisionMode::Double,
            leaf_size: 10,
            warm_start: false,
            warm_start_k: 8,
            box_margin: 0.01,
            culling: CullingMode::Directional,
            traversal: TraversalOrder::BestFirst,
            keep_geometry: false,
            threads: 0,
        }
    }
}

impl BuildConfig {
    pub fn effective_threads(&self) -> usize {
        if !cfg!(feature = "parallel") {
            return 1;
        }
        if self.threads == 0 {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        } else {
            self.threads
        }
    }
}

/// Tag on an output face: the neighbor site across it, or a global box face.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceTag {
    Neighbor(u32),
    Boundary(u8),
}

#[derive(Debug, Clone)]
pub struct GeomFace {
    pub tag: FaceTag,
    /// Vertex loop, wound so the polygon faces away from the cell.
    pub vertices: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, Default)]
pub struct CellGeometry {
    pub faces: Vec<GeomFace>,
}

/// Aggregate build statistics. Wall-clock fields vary between runs; all
/// counter fields are deterministic.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildStats {
    pub traversal: TraversalStats,
    pub index_seconds: f64,
    pub cells_seconds: f64,
    pub total_seconds: f64,
    pub degraded_cells: u64,
    pub asymmetric_pairs: u64,
    pub threads_used: usize,
}

/// A constructed power diagram: CSR adjacency, per-cell flags, optional cell
/// geometry, and build statistics.
#[derive(Debug, Clone)]
pub struct PowerDiagram {
    pub site_count: usize,
    /// CSR row offsets, length `site_count + 1`.
    pub offsets: Vec<u64>,
    /// Neighbor site ids, ascending within each row.
    pub neighbors: Vec<u32>,
    /// Flag byte per cell (`FLAG_EMPTY`, `FLAG_BOUNDARY`, `FLAG_DEGRADED`).
    pub flags: Vec<u8>,
    pub cell_geometry: Option<Vec<CellGeometry>>,
    pub stats: BuildStats,
}

impl PowerDiagram {
    pub fn neighbors_of(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn is_empty_cell(&self, i: usize) -> bool {
        self.flags[i] & FLAG_EMPTY != 0
    }

    pub fn is_boundary_cell(&self, i: usize) -> bool {
        self.flags[i] & FLAG_BOUNDARY != 0
    }

    pub fn is_degraded_cell(&self, i: usize) -> bool {
        self.flags[i] & FLAG_DEGRADED != 0
    }

    /// Undirected adjacency pairs `(i, j)` with `i < j`, sorted. A pair is
    /// present when either row lists the other site.
    pub fn undirected_pairs(&self) -> Vec<(u32, u32)> {
        let mut pairs = Vec::with_capacity(self.neighbors.len());
        for i in 0..self.site_count {
            let a = i as u32;
            for &b in self.neighbors_of(i) {
                pairs.push((a.min(b), a.max(b)));
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }

    /// Directed edges whose reverse is missing.
    pub fn count_asymmetric_pairs(&self) -> u64 {
        let mut count = 0u64;
        for i in 0..self.site_count {
            for &j in self.neighbors_of(i) {
                if self
                    .neighbors_of(j as usize)
                    .binary_search(&(i as u32))
                    .is_err()
                {
                    count += 1;
                }
            }
        }
        count
    }
}

/// Fraction of cells that are empty or have no neighbors.
pub fn empty_ratio(d: &PowerDiagram) -> f64 {
    if d.site_count == 0 {
        return 0.0;
    }
    let n = (0..d.site_count)
        .filter(|&i| d.is_empty_cell(i) || d.neighbors_of(i).is_empty())
        .count();
    n as f64 / d.site_count as f64
}

// ---------------------------------------------------------------------------
// Global box
// ---------------------------------------------------------------------------

/// Bounding box of all site positions, expanded symmetrically by
/// `margin × diagonal` on every axis. Axes that would end up with zero
/// extent are expanded by half the larger of the diagonal and one.
pub fn global_box<R: Real>(sites: &[WeightedSite<R>], margin: f64) -> Result<Aabb<R>, BuildError> {
    if sites.is_empty() {
        return Err(BuildError::EmptyInput);
    }
    let mut b = Aabb::empty();
    for s in sites {
        b.include(s.position);
    }
    let diag = b.diagonal();
    let pad = R::from_f64(margin) * diag;
    let mut min = b.min - Vec3::splat(pad);
    let mut max = b.max + Vec3::splat(pad);
    let fallback = (diag.max(R::ONE)) * R::HALF;
    for k in 0..3 {
        if max.axis(k) == min.axis(k) {
            match k {
                0 => {
                    min.x -= fallback;
                    max.x += fallback;
                }
                1 => {
                    min.y -= fallback;
                    max.y += fallback;
                }
                _ => {
                    min.z -= fallback;
                    max.z += fallback;
                }
            }
        }
    }
    Ok(Aabb::new(min, max))
}

// ---------------------------------------------------------------------------
// Duplicate handling
// ---------------------------------------------------------------------------

/// Among sites coincident within the tolerance, the one with the largest
/// weight owns the group; equal weights tie-break to the lowest id. Everyone
/// else is suppressed: they get empty cells and are skipped as candidates.
pub fn suppress_duplicates<R: Real>(sites: &[WeightedSite<R>], coincidence_sq: R) -> Vec<bool> {
    let n = sites.len();
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let pa = sites[a as usize].position;
        let pb = sites[b as usize].position;
        pa.x.partial_cmp(&pb.x)
            .unwrap()
            .then(pa.y.partial_cmp(&pb.y).unwrap())
            .then(pa.z.partial_cmp(&pb.z).unwrap())
            .then(a.cmp(&b))
    });

    // Union-find over coincident pairs found in a sliding window on the
    // x-sorted order.
    let mut parent: Vec<u32> = (0..n as u32).collect();
    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }
    let mut any = false;
    for i in 0..n {
        let a = order[i];
        let pa = sites[a as usize].position;
        for &b in order.iter().skip(i + 1) {
            let pb = sites[b as usize].position;
            let dx = pb.x - pa.x;
            if dx * dx > coincidence_sq {
                break;
            }
            if pa.distance_squared(pb) <= coincidence_sq {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                if ra != rb {
                    parent[ra.max(rb) as usize] = ra.min(rb);
                    any = true;
                }
            }
        }
    }
    let mut suppressed = vec![false; n];
    if !any {
        return suppressed;
    }
    // Owner per group: max weight, then lowest id.
    let mut owner: Vec<u32> = (0..n as u32).collect();
    for i in 0..n as u32 {
        let root = find(&mut parent, i) as usize;
        let cur = owner[root];
        let (wi, wc) = (sites[i as usize].weight, sites[cur as usize].weight);
        if wi > wc || (wi == wc && i < cur) {
            owner[root] = i;
        }
    }
    for i in 0..n as u32 {
        let root = find(&mut parent, i) as usize;
        if owner[root] != i {
            suppressed[i as usize] = true;
        }
    }
    suppressed
}

// ---------------------------------------------------------------------------
// Per-cell pipeline
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Default)]
struct CellResult {
    neighbors: Vec<u32>,
    flags: u8,
    geometry: Option<CellGeometry>,
    stats: TraversalStats,
}

struct Shared<'a, R: Real> {
    sites: &'a [WeightedSite<R>],
    suppressed: &'a [bool],
    any_suppressed: bool,
    bvh: &'a PowerBvh<R>,
    domain: Aabb<R>,
    tol: Tolerances<R>,
    config: &'a BuildConfig,
    deadline: Option<Instant>,
}

fn extract_result<R: Real>(
    cell: &ConvexCell<R>,
    stats: TraversalStats,
    degraded: bool,
    keep_geometry: bool,
) -> CellResult {
    let neighbors = cell.neighbor_ids();
    let mut flags = 0u8;
    if cell.is_empty() {
        flags |= FLAG_EMPTY;
    }
    if cell.touches_boundary() {
        flags |= FLAG_BOUNDARY;
    }
    if degraded {
        flags |= FLAG_DEGRADED;
    }
    let geometry = keep_geometry.then(|| CellGeometry {
        faces: cell
            .faces()
            .into_iter()
            .map(|f| GeomFace {
                tag: match f.source {
                    PlaneSource::Bisector(id) => FaceTag::Neighbor(id),
                    PlaneSource::Boundary(f) => FaceTag::Boundary(f),
                },
                vertices: f.vertices.iter().map(|v| v.to_f64()).collect(),
            })
            .collect(),
    });
    CellResult {
        neighbors,
        flags,
        geometry,
        stats,
    }
}

fn build_one_cell<R: Real>(
    id: u32,
    sh: &Shared<'_, R>,
    scratch: &mut TraversalScratch<R>,
) -> Result<CellResult, BuildError> {
    if sh.suppressed[id as usize] {
        return Ok(CellResult {
            neighbors: Vec::new(),
            flags: FLAG_EMPTY,
            geometry: sh.config.keep_geometry.then(CellGeometry::default),
            stats: TraversalStats::default(),
        });
    }
    let site = sh.sites[id as usize];
    let suppressed = sh.any_suppressed.then_some(sh.suppressed);
    let mut eps = sh.tol.plane_eps;
    let mut last_consistent: Option<(ConvexCell<R>, TraversalStats)> = None;

    for _attempt in 0..=TOLERANCE_RETRIES {
        let mut cell = ConvexCell::new(site, &sh.domain, eps)
            .map_err(|_| BuildError::SiteOutsideBox(id as usize))?;
        let mut stats = TraversalStats::default();
        let res = run_cell_pipeline(&mut cell, sh, suppressed, scratch, &mut stats);
        match res {
            Ok(()) => {
                return Ok(extract_result(&cell, stats, false, sh.config.keep_geometry));
            }
            Err(TraversalError::Cell(CellError::TopologyCorruption))
            | Err(TraversalError::Coincident(_)) => {
                // The failing clip left the cell at its last consistent
                // state; remember it and rebuild with a promoted tolerance.
                last_consistent = Some((cell, stats));
                eps *= R::from_f64(10.0);
            }
            Err(TraversalError::Cell(CellError::SiteOutsideBox)) => {
                return Err(BuildError::SiteOutsideBox(id as usize));
            }
        }
    }
    let (cell, stats) = last_consistent.expect("at least one attempt ran");
    Ok(extract_result(&cell, stats, true, sh.config.keep_geometry))
}

fn run_cell_pipeline<R: Real>(
    cell: &mut ConvexCell<R>,
    sh: &Shared<'_, R>,
    suppressed: Option<&[bool]>,
    scratch: &mut TraversalScratch<R>,
    stats: &mut TraversalStats,
) -> Result<(), TraversalError> {
    if sh.config.warm_start {
        let ids = knn_warm_start(sh.bvh, sh.sites, cell.site().id, sh.config.warm_start_k);
        for id in ids {
            if suppressed.is_some_and(|s| s[id as usize]) {
                continue;
            }
            clip_candidate(
                &sh.sites[id as usize],
                cell,
                sh.config.culling,
                sh.tol.coincidence_sq,
                &mut scratch.clip,
                stats,
            )?;
            if cell.is_empty() {
                return Ok(());
            }
        }
    }
    let t = clip_by_neighbors(
        sh.bvh,
        sh.sites,
        cell,
        sh.config.traversal,
        sh.config.culling,
        sh.tol.coincidence_sq,
        suppressed,
        scratch,
    )?;
    stats.merge(&t);
    Ok(())
}

// ---------------------------------------------------------------------------
// Whole-diagram build
// ---------------------------------------------------------------------------

/// Construct the power diagram of `sites`.
pub fn build_diagram<R: Real>(
    sites: &[WeightedSite<R>],
    config: &BuildConfig,
) -> Result<PowerDiagram, BuildError> {
    build_diagram_with_deadline(sites, config, None)
}

/// As [`build_diagram`], aborting with [`BuildError::Timeout`] once the
/// deadline passes. The check is cooperative, at per-cell granularity.
pub fn build_diagram_with_deadline<R: Real>(
    sites: &[WeightedSite<R>],
    config: &BuildConfig,
    deadline: Option<Instant>,
) -> Result<PowerDiagram, BuildError> {
    let t_start = Instant::now();
    if sites.is_empty() {
        return Err(BuildError::EmptyInput);
    }
    for (i, s) in sites.iter().enumerate() {
        if !s.is_finite() {
            return Err(BuildError::NonFiniteInput(i));
        }
    }

    let domain = global_box(sites, config.box_margin)?;
    let tol = Tolerances::for_diagonal(domain.diagonal());
    let suppressed = suppress_duplicates(sites, tol.coincidence_sq);
    let any_suppressed = suppressed.iter().any(|&s| s);

    let t_index = Instant::now();
    let bvh = PowerBvh::build(sites, config.leaf_size)?;
    let index_seconds = t_index.elapsed().as_secs_f64();

    let shared = Shared {
        sites,
        suppressed: &suppressed,
        any_suppressed,
        bvh: &bvh,
        domain,
        tol,
        config,
        deadline,
    };

    let t_cells = Instant::now();
    let results = run_cells(&shared)?;
    let cells_seconds = t_cells.elapsed().as_secs_f64();

    // Assemble CSR in site order.
    let n = sites.len();
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0u64);
    let mut total = 0u64;
    for r in &results {
        total += r.neighbors.len() as u64;
        offsets.push(total);
    }
    let mut neighbors = Vec::with_capacity(total as usize);
    let mut flags = Vec::with_capacity(n);
    let mut agg = TraversalStats::default();
    let mut degraded = 0u64;
    for r in &results {
        neighbors.extend_from_slice(&r.neighbors);
        flags.push(r.flags);
        agg.merge(&r.stats);
        if r.flags & FLAG_DEGRADED != 0 {
            degraded += 1;
        }
    }
    let cell_geometry = config.keep_geometry.then(|| {
        results
            .into_iter()
            .map(|r| r.geometry.unwrap_or_default())
            .collect()
    });

    let mut diagram = PowerDiagram {
        site_count: n,
        offsets,
        neighbors,
        flags,
        cell_geometry,
        stats: BuildStats {
            traversal: agg,
            index_seconds,
            cells_seconds,
            total_seconds: 0.0,
            degraded_cells: degraded,
            asymmetric_pairs: 0,
            threads_used: config.effective_threads(),
        },
    };
    diagram.stats.asymmetric_pairs = diagram.count_asymmetric_pairs();
    diagram.stats.total_seconds = t_start.elapsed().as_secs_f64();
    Ok(diagram)
}

fn run_cells<R: Real>(sh: &Shared<'_, R>) -> Result<Vec<CellResult>, BuildError> {
    let n = sh.sites.len();
    let threads = sh.config.effective_threads();
    // Cells are built in hierarchy leaf order so neighboring cells touch the
    // same nodes and sites; results scatter back to id order afterwards.
    let order = sh.bvh.prim_order();

    #[cfg(feature = "parallel")]
    let permuted: Vec<CellResult> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        pool.install(|| {
            order
                .par_iter()
                .map_init(TraversalScratch::new, |scratch, &id| {
                    if let Some(d) = sh.deadline {
                        if Instant::now() >= d {
                            return Err(BuildError::Timeout);
                        }
                    }
                    build_one_cell(id, sh, scratch)
                })
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        run_cells_serial(sh, order)?
    };
    #[cfg(not(feature = "parallel"))]
    let permuted: Vec<CellResult> = run_cells_serial(sh, order)?;

    let mut out: Vec<Option<CellResult>> = (0..n).map(|_| None).collect();
    for (&id, r) in order.iter().zip(permuted) {
        out[id as usize] = Some(r);
    }
    Ok(out
        .into_iter()
        .map(|r| r.expect("every cell built"))
        .collect())
}

fn run_cells_serial<R: Real>(
    sh: &Shared<'_, R>,
    order: &[u32],
) -> Result<Vec<CellResult>, BuildError> {
    let mut scratch = TraversalScratch::new();
    let mut out = Vec::with_capacity(order.len());
    for &id in order {
        if let Some(d) = sh.deadline {
            if Instant::now() >= d {
                return Err(BuildError::Timeout);
            }
        }
        out.push(build_one_cell(id, sh, &mut scratch)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(p: [f64; 3], w: f64, id: u32) -> WeightedSite<f64> {
        WeightedSite::new(Vec3::new(p[0], p[1], p[2]), w, id)
    }

    #[test]
    fn global_box_margins() {
        let sites = vec![site([0.0; 3], 0.0, 0), site([1.0, 1.0, 1.0], 0.0, 1)];
        let b = global_box(&sites, 0.0).unwrap();
        assert_eq!(b.min.to_f64(), [0.0; 3]);
        assert_eq!(b.max.to_f64(), [1.0; 3]);

        let b = global_box(&sites, 0.01).unwrap();
        let pad = 0.01 * 3f64.sqrt();
        for k in 0..3 {
            assert!((b.min.axis(k) + pad).abs() < 1e-15);
            assert!((b.max.axis(k) - 1.0 - pad).abs() < 1e-15);
        }
    }

    #[test]
    fn global_box_degenerate_axis() {
        let sites = vec![
            site([0.0, 0.0, 0.0], 0.0, 0),
            site([1.0, 2.0, 0.0], 0.0, 1),
            site([3.0, 1.0, 0.0], 0.0, 2),
        ];
        let b = global_box(&sites, 0.0).unwrap();
        assert!(b.max.z > b.min.z);

        let one = vec![site([5.0, 5.0, 5.0], 0.0, 0)];
        let b = global_box(&one, 0.01).unwrap();
        assert!(b.contains_strict(Vec3::new(5.0, 5.0, 5.0)));
    }

    #[test]
    fn single_site_diagram() {
        let sites = vec![site([0.5, 0.5, 0.5], 0.0, 0)];
        let d = build_diagram(&sites, &BuildConfig::default()).unwrap();
        assert_eq!(d.site_count, 1);
        assert_eq!(d.neighbors_of(0), &[] as &[u32]);
        assert!(d.is_boundary_cell(0));
        assert!(!d.is_empty_cell(0));
    }

    #[test]
    fn two_sites_adjacent_and_boundary() {
        let sites = vec![site([0.0; 3], 0.0, 0), site([1.0, 0.0, 0.0], 0.0, 1)];
        let d = build_diagram(&sites, &BuildConfig::default()).unwrap();
        assert_eq!(d.neighbors_of(0), &[1]);
        assert_eq!(d.neighbors_of(1), &[0]);
        assert!(d.is_boundary_cell(0) && d.is_boundary_cell(1));
        assert_eq!(d.stats.asymmetric_pairs, 0);
    }

    #[test]
    fn duplicate_sites_tie_break() {
        let sites = vec![
            site([0.0; 3], 0.0, 0),
            site([0.0; 3], 0.0, 1),
            site([2.0, 0.0, 0.0], 0.0, 2),
        ];
        let d = build_diagram(&sites, &BuildConfig::default()).unwrap();
        assert!(!d.is_empty_cell(0));
        assert!(d.is_empty_cell(1));
        assert_eq!(d.neighbors_of(0), &[2]);
        assert_eq!(d.neighbors_of(1), &[] as &[u32]);
        assert_eq!(d.neighbors_of(2), &[0]);
    }

    #[test]
    fn duplicate_sites_weight_owner() {
        let sites = vec![
            site([1.0, 1.0, 1.0], 0.5, 0),
            site([1.0, 1.0, 1.0], 2.0, 1),
            site([3.0, 1.0, 1.0], 0.0, 2),
        ];
        let suppressed = suppress_duplicates(&sites, 1e-20);
        assert_eq!(suppressed, vec![true, false, false]);
    }

    #[test]
    fn empty_ratio_distinct_unweighted_is_zero() {
        let mut sites = Vec::new();
        let mut id = 0;
        for x in 0..3 {
            for y in 0..3 {
                sites.push(site([x as f64, y as f64, 0.3 * (x + y) as f64], 0.0, id));
                id += 1;
            }
        }
        let d = build_diagram(&sites, &BuildConfig::default()).unwrap();
        assert_eq!(empty_ratio(&d), 0.0);
    }

    #[test]
    fn giant_weight_dominates_everything() {
        // One weight so large its cell swallows the whole box: every other
        // cell is empty, and the giant has no neighbors left, so every cell
        // counts toward the empty ratio.
        let mut sites: Vec<WeightedSite<f64>> = (0..100)
            .map(|i| {
                let f = i as f64;
                site(
                    [f.sin() * 4.0, (f * 0.7).cos() * 4.0, (f * 1.3).sin() * 4.0],
                    0.0,
                    i,
                )
            })
            .collect();
        sites[42].weight = 1e12;
        let d = build_diagram(&sites, &BuildConfig::default()).unwrap();
        for i in 0..100 {
            if i == 42 {
                assert!(!d.is_empty_cell(i));
                assert_eq!(d.neighbors_of(i), &[] as &[u32]);
            } else {
                assert!(d.is_empty_cell(i), "cell {i} should be dominated");
            }
        }
        assert_eq!(empty_ratio(&d), 1.0);
    }

    #[test]
    fn thread_counts_produce_identical_output() {
        let mut sites = Vec::new();
        let mut s = 12345u64;
        let mut next = move || {
            s = s.wrapping_add(0x9E37_79B9_7F4A_7C15);
            let mut z = s;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
            ((z ^ (z >> 31)) >> 11) as f64 * (1.0 / 9007199254740992.0)
        };
        for i in 0..400 {
            sites.push(site(
                [
                    next() * 20.0 - 10.0,
                    next() * 20.0 - 10.0,
                    next() * 20.0 - 10.0,
                ],
                next() * 0.1,
                i,
            ));
        }
        let base = BuildConfig::default();
        let d1 = build_diagram(&sites, &BuildConfig { threads: 1, ..base }).unwrap();
        let d2 = build_diagram(&sites, &BuildConfig { threads: 2, ..base }).unwrap();
        let dmax = build_diagram(&sites, &BuildConfig { threads: 0, ..base }).unwrap();
        assert_eq!(d1.offsets, d2.offsets);
        assert_eq!(d1.neighbors, d2.neighbors);
        assert_eq!(d1.flags, d2.flags);
        assert_eq!(d1.offsets, dmax.offsets);
        assert_eq!(d1.neighbors, dmax.neighbors);
        assert_eq!(d1.flags, dmax.flags);
        assert_eq!(d1.stats.traversal, d2.stats.traversal);
    }

    #[test]
    fn lattice_interior_cell_has_six_neighbors() {
        let mut sites = Vec::new();
        let mut id = 0;
        for z in 0..3 {
            for y in 0..3 {
                for x in 0..3 {
                    sites.push(site([x as f64, y as f64, z as f64], 0.0, id));
                    id += 1;
                }
            }
        }
        let d = build_diagram(&sites, &BuildConfig::default()).unwrap();
        assert_eq!(d.neighbors_of(13), &[4, 10, 12, 14, 16, 22]);
        assert!(!d.is_boundary_cell(13));
        assert!(d.is_boundary_cell(0));
        let s = d.stats.traversal;
        assert!(s.clip_unchanged <= s.clip_calls);
    }

    #[test]
    fn face_tags_agree_with_adjacency() {
        let sites: Vec<WeightedSite<f64>> = (0..60)
            .map(|i| {
                let f = i as f64;
                site(
                    [
                        (f * 0.71).sin() * 8.0,
                        (f * 1.13).cos() * 8.0,
                        (f * 0.37).sin() * 8.0,
                    ],
                    (f * 2.1).sin() * 0.05,
                    i,
                )
            })
            .collect();
        let cfg = BuildConfig {
            keep_geometry: true,
            ..BuildConfig::default()
        };
        let d = build_diagram(&sites, &cfg).unwrap();
        let geometry = d.cell_geometry.as_ref().unwrap();
        for (i, geom) in geometry.iter().enumerate() {
            for face in &geom.faces {
                if let FaceTag::Neighbor(j) = face.tag {
                    assert!(
                        d.neighbors_of(j as usize).contains(&(i as u32)),
                        "cell {i} face toward {j} not reciprocated"
                    );
                    assert!(d.neighbors_of(i).contains(&j));
                }
            }
        }
    }

    #[test]
    fn deadline_aborts() {
        let sites: Vec<_> = (0..2000)
            .map(|i| {
                let f = i as f64;
                site(
                    [f.sin() * 9.0, f.cos() * 9.0, (f * 0.37).sin() * 9.0],
                    0.0,
                    i,
                )
            })
            .collect();
        let past = Instant::now() - std::time::Duration::from_secs(1);
        let err = build_diagram_with_deadline(&sites, &BuildConfig::default(), Some(past));
        assert_eq!(err.unwrap_err(), BuildError::Timeout);
    }

    #[test]
    fn all_sites_coincident() {
        let sites = vec![
            site([1.0, 1.0, 1.0], 0.0, 0),
            site([1.0, 1.0, 1.0], 3.0, 1),
            site([1.0, 1.0, 1.0], 3.0, 2),
        ];
        let d = build_diagram(&sites, &BuildConfig::default()).unwrap();
        // Largest weight wins; the weight tie breaks to the lower id.
        assert!(d.is_empty_cell(0));
        assert!(!d.is_empty_cell(1));
        assert!(d.is_empty_cell(2));
        assert_eq!(d.neighbors.len(), 0);
        assert!(d.is_boundary_cell(1));
    }

    #[test]
    fn zero_margin_puts_hull_sites_on_the_box() {
        let sites = vec![site([0.0; 3], 0.0, 0), site([1.0, 1.0, 1.0], 0.0, 1)];
        let cfg = BuildConfig {
            box_margin: 0.0,
            ..BuildConfig::default()
        };
        assert!(matches!(
            build_diagram(&sites, &cfg),
            Err(BuildError::SiteOutsideBox(_))
        ));
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            build_diagram::<f64>(&[], &BuildConfig::default()).unwrap_err(),
            BuildError::EmptyInput
        );
        let sites = vec![site([0.0, f64::NAN, 0.0], 0.0, 0)];
        assert_eq!(
            build_diagram(&sites, &BuildConfig::default()).unwrap_err(),
            BuildError::NonFiniteInput(0)
        );
    }
}
