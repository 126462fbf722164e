//! Brute-force reference construction and diagram diffing.
//!
//! The reference clips every cell by the bisector of every other site with
//! no culling and no hierarchy, so it exercises none of the search logic the
//! fast path adds. It reuses the same clip kernel; an independent
//! point-sampling ownership check guards against shared clip bugs.

use thiserror::Error;

use crate::builder::{
    suppress_duplicates, BuildStats, CellGeometry, FaceTag, PowerDiagram, FLAG_BOUNDARY,
    FLAG_DEGRADED, FLAG_EMPTY,
};
use crate::bvh::TraversalStats;
use crate::cell::{CellError, ClipOutcome, ClipScratch, ConvexCell};
use crate::geom::{bisector, Aabb, PlaneSource, Tolerances, WeightedSite};
use crate::real::Real;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("empty input")]
    EmptyInput,
    #[error("site {0} lies on or outside the given box")]
    SiteOutsideBox(usize),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error("diagrams have different site counts: {0} vs {1}")]
    SizeMismatch(usize, usize),
}

/// One cell clipped by all other sites, nearest first (ties by id). Returns
/// the finished cell so callers can inspect planes and geometry.
pub fn brute_force_cell<R: Real>(
    id: u32,
    sites: &[WeightedSite<R>],
    domain: &Aabb<R>,
) -> Result<ConvexCell<R>, OracleError> {
    if sites.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    let tol = Tolerances::for_diagonal(domain.diagonal());
    let suppressed = suppress_duplicates(sites, tol.coincidence_sq);
    let (cell, _) = brute_force_cell_retrying(id, sites, domain, &tol, &suppressed)?;
    Ok(cell)
}

/// The same tolerance-promotion ladder the fast builder uses: an
/// inconsistent hole boundary rebuilds the cell from scratch with a ten
/// times larger classification tolerance, twice, before the cell is marked
/// degraded at its last consistent state.
fn brute_force_cell_retrying<R: Real>(
    id: u32,
    sites: &[WeightedSite<R>],
    domain: &Aabb<R>,
    tol: &Tolerances<R>,
    suppressed: &[bool],
) -> Result<(ConvexCell<R>, bool), OracleError> {
    let mut scaled = *tol;
    for _ in 0..2 {
        match brute_force_cell_inner(id, sites, domain, &scaled, suppressed, None) {
            Ok(cell) => return Ok((cell, false)),
            Err(OracleError::Cell(CellError::TopologyCorruption)) => {
                scaled.plane_eps *= R::from_f64(10.0);
            }
            Err(e) => return Err(e),
        }
    }
    match brute_force_cell_inner(id, sites, domain, &scaled, suppressed, None) {
        Ok(cell) => Ok((cell, false)),
        // The last consistent state is what the final failing attempt
        // leaves behind; rebuild up to (not including) the failing clip.
        Err(OracleError::Cell(CellError::TopologyCorruption)) => {
            let cell = brute_force_cell_salvage(id, sites, domain, &scaled, suppressed);
            Ok((cell, true))
        }
        Err(e) => Err(e),
    }
}

/// Re-run the clip sequence, skipping any clip that corrupts.
fn brute_force_cell_salvage<R: Real>(
    id: u32,
    sites: &[WeightedSite<R>],
    domain: &Aabb<R>,
    tol: &Tolerances<R>,
    suppressed: &[bool],
) -> ConvexCell<R> {
    let site = sites[id as usize];
    let mut cell =
        ConvexCell::new(site, domain, tol.plane_eps).expect("caller validated the domain");
    let mut scratch = ClipScratch::new();
    let mut ids: Vec<(R, u32)> = (0..sites.len() as u32)
        .filter(|&j| j != id && !suppressed[j as usize])
        .map(|j| {
            (
                site.position.distance_squared(sites[j as usize].position),
                j,
            )
        })
        .collect();
    ids.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    for (_, j) in ids {
        let h = bisector(&site, &sites[j as usize], tol.coincidence_sq)
            .expect("duplicates were suppressed");
        if let Ok(ClipOutcome::Emptied) = cell.clip(&h, &mut scratch) {
            break;
        }
    }
    cell
}

/// As [`brute_force_cell`] but clipping in the caller-provided order; used to
/// check that the result is independent of the clip permutation.
pub fn brute_force_cell_ordered<R: Real>(
    id: u32,
    sites: &[WeightedSite<R>],
    domain: &Aabb<R>,
    order: &[u32],
) -> Result<ConvexCell<R>, OracleError> {
    if sites.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    let tol = Tolerances::for_diagonal(domain.diagonal());
    let suppressed = suppress_duplicates(sites, tol.coincidence_sq);
    brute_force_cell_inner(id, sites, domain, &tol, &suppressed, Some(order))
}

fn brute_force_cell_inner<R: Real>(
    id: u32,
    sites: &[WeightedSite<R>],
    domain: &Aabb<R>,
    tol: &Tolerances<R>,
    suppressed: &[bool],
    order: Option<&[u32]>,
) -> Result<ConvexCell<R>, OracleError> {
    let site = sites[id as usize];
    let mut cell = ConvexCell::new(site, domain, tol.plane_eps)
        .map_err(|_| OracleError::SiteOutsideBox(id as usize))?;
    if suppressed[id as usize] {
        // A suppressed duplicate owns nothing; model it as an emptied cell.
        cell.empty_out();
        return Ok(cell);
    }
    let ids: Vec<u32> = match order {
        Some(o) => o.to_vec(),
        None => {
            let mut v: Vec<(R, u32)> = (0..sites.len() as u32)
                .filter(|&j| j != id && !suppressed[j as usize])
                .map(|j| {
                    (
                        site.position.distance_squared(sites[j as usize].position),
                        j,
                    )
                })
                .collect();
            v.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            v.into_iter().map(|(_, j)| j).collect()
        }
    };
    let mut scratch = ClipScratch::new();
    for j in ids {
        if j == id || suppressed[j as usize] {
            continue;
        }
        let h = bisector(&site, &sites[j as usize], tol.coincidence_sq)
            .expect("duplicates were suppressed");
        if cell.clip(&h, &mut scratch)? == ClipOutcome::Emptied {
            break;
        }
    }
    Ok(cell)
}

/// Reference diagram: every cell via [`brute_force_cell`]. Quadratic in the
/// site count; intended for a few thousand sites at most.
pub fn brute_force_diagram<R: Real>(
    sites: &[WeightedSite<R>],
    domain: &Aabb<R>,
) -> Result<PowerDiagram, OracleError> {
    brute_force_diagram_opts(sites, domain, true)
}

pub fn brute_force_diagram_opts<R: Real>(
    sites: &[WeightedSite<R>],
    domain: &Aabb<R>,
    keep_geometry: bool,
) -> Result<PowerDiagram, OracleError> {
    if sites.is_empty() {
        return Err(OracleError::EmptyInput);
    }
    let tol = Tolerances::for_diagonal(domain.diagonal());
    let suppressed = suppress_duplicates(sites, tol.coincidence_sq);
    let n = sites.len();

    let run_one = |id: u32| -> Result<(Vec<u32>, u8, Option<CellGeometry>), OracleError> {
        let (cell, degraded) = brute_force_cell_retrying(id, sites, domain, &tol, &suppressed)?;
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
        let geom = keep_geometry.then(|| CellGeometry {
            faces: cell
                .faces()
                .into_iter()
                .map(|f| crate::builder::GeomFace {
                    tag: match f.source {
                        PlaneSource::Bisector(b) => FaceTag::Neighbor(b),
                        PlaneSource::Boundary(b) => FaceTag::Boundary(b),
                    },
                    vertices: f.vertices.iter().map(|v| v.to_f64()).collect(),
                })
                .collect(),
        });
        Ok((cell.neighbor_ids(), flags, geom))
    };

    #[cfg(feature = "parallel")]
    let results: Result<Vec<_>, _> = (0..n as u32).into_par_iter().map(run_one).collect();
    #[cfg(not(feature = "parallel"))]
    let results: Result<Vec<_>, _> = (0..n as u32).map(run_one).collect();
    let results = results?;

    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0u64);
    let mut total = 0u64;
    for (nb, _, _) in &results {
        total += nb.len() as u64;
        offsets.push(total);
    }
    let mut neighbors = Vec::with_capacity(total as usize);
    let mut flags = Vec::with_capacity(n);
    let mut geometry = keep_geometry.then(|| Vec::with_capacity(n));
    for (nb, f, g) in results {
        neighbors.extend_from_slice(&nb);
        flags.push(f);
        if let Some(gs) = geometry.as_mut() {
            gs.push(g.unwrap_or_default());
        }
    }
    let mut d = PowerDiagram {
        site_count: n,
        offsets,
        neighbors,
        flags,
        cell_geometry: geometry,
        stats: BuildStats {
            traversal: TraversalStats::default(),
            ..Default::default()
        },
    };
    d.stats.asymmetric_pairs = d.count_asymmetric_pairs();
    Ok(d)
}

// ---------------------------------------------------------------------------
// Diffing
// ---------------------------------------------------------------------------

/// Symmetric difference of two diagrams' undirected adjacency pair sets.
#[derive(Debug, Clone, Default)]
pub struct DiagramDiff {
    /// Pairs in the reference but not the candidate, `(i, j)` with `i < j`.
    pub missing_pairs: Vec<(u32, u32)>,
    /// Pairs in the candidate but not the reference.
    pub extra_pairs: Vec<(u32, u32)>,
    /// `(missing + extra) / max(1, reference pair count)`.
    pub mismatch_rate: f64,
    pub reference_pairs: usize,
}

impl DiagramDiff {
    pub fn is_empty(&self) -> bool {
        self.missing_pairs.is_empty() && self.extra_pairs.is_empty()
    }
}

/// Compare `candidate` against `reference`.
pub fn diff(
    reference: &PowerDiagram,
    candidate: &PowerDiagram,
) -> Result<DiagramDiff, OracleError> {
    if reference.site_count != candidate.site_count {
        return Err(OracleError::SizeMismatch(
            reference.site_count,
            candidate.site_count,
        ));
    }
    let a = reference.undirected_pairs();
    let b = candidate.undirected_pairs();
    let mut missing = Vec::new();
    let mut extra = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(&x), Some(&y)) if x < y => {
                missing.push(x);
                i += 1;
            }
            (Some(_), Some(&y)) => {
                extra.push(y);
                j += 1;
            }
            (Some(&x), None) => {
                missing.push(x);
                i += 1;
            }
            (None, Some(&y)) => {
                extra.push(y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    let rate = (missing.len() + extra.len()) as f64 / a.len().max(1) as f64;
    Ok(DiagramDiff {
        missing_pairs: missing,
        extra_pairs: extra,
        mismatch_rate: rate,
        reference_pairs: a.len(),
    })
}
