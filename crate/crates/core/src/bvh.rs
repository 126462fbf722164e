//! Binary BVH over site positions, augmented with the maximum weight of each
//! subtree so whole volumes of candidates can be culled under weighted
//! distances. Hosts the KNN query used for warm starts and the best-first
//! neighbor traversal that drives cell construction.

use thiserror::Error;

use crate::cell::{CellError, ClipOutcome, ClipScratch, ConvexCell, CullingMode};
use crate::geom::{bisector, Aabb, CoincidentSites, Vec3, WeightedSite};
use crate::real::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BvhError {
    #[error("cannot build a hierarchy over an empty site array")]
    EmptyInput,
}

/// Node visiting order during neighbor search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraversalOrder {
    /// Pop the pending node with the deepest penetration key first.
    #[default]
    BestFirst,
    /// Plain LIFO stack order.
    DepthFirst,
}

#[derive(Debug, Clone, Copy)]
enum NodeContent {
    Internal { left: u32, right: u32 },
    Leaf { first: u32, count: u32 },
}

#[derive(Debug, Clone)]
pub struct BvhNode<R> {
    pub bounds: Aabb<R>,
    pub max_weight: R,
    content: NodeContent,
}

impl<R: Real> BvhNode<R> {
    pub fn is_leaf(&self) -> bool {
        matches!(self.content, NodeContent::Leaf { .. })
    }

    /// Leaf range into `prim_order`, if this is a leaf.
    pub fn leaf_range(&self) -> Option<(usize, usize)> {
        match self.content {
            NodeContent::Leaf { first, count } => Some((first as usize, (first + count) as usize)),
            NodeContent::Internal { .. } => None,
        }
    }

    pub fn children(&self) -> Option<(u32, u32)> {
        match self.content {
            NodeContent::Internal { left, right } => Some((left, right)),
            NodeContent::Leaf { .. } => None,
        }
    }
}

/// Bounding volume hierarchy with per-node subtree maximum weight.
#[derive(Debug, Clone)]
pub struct PowerBvh<R> {
    nodes: Vec<BvhNode<R>>,
    prim_order: Vec<u32>,
    /// The sites permuted into `prim_order`, so a leaf's members are one
    /// contiguous cache-friendly slice. Each entry keeps its original id.
    ordered_sites: Vec<WeightedSite<R>>,
    leaf_size: usize,
}

impl<R: Real> PowerBvh<R> {
    /// Deterministic median-split build over the longest axis; coordinate
    /// ties break toward the lower site id.
    pub fn build(sites: &[WeightedSite<R>], leaf_size: usize) -> Result<Self, BvhError> {
        if sites.is_empty() {
            return Err(BvhError::EmptyInput);
        }
        let leaf_size = leaf_size.max(1);
        let mut prim_order: Vec<u32> = (0..sites.len() as u32).collect();
        let mut bvh = Self {
            nodes: Vec::with_capacity(2 * sites.len() / leaf_size + 1),
            prim_order: Vec::new(),
            ordered_sites: Vec::new(),
            leaf_size,
        };
        bvh.build_node(sites, &mut prim_order, 0);
        bvh.ordered_sites = prim_order.iter().map(|&id| sites[id as usize]).collect();
        bvh.prim_order = prim_order;
        Ok(bvh)
    }

    fn build_node(&mut self, sites: &[WeightedSite<R>], order: &mut [u32], first: u32) -> u32 {
        let mut bounds = Aabb::empty();
        let mut max_weight = R::NEG_INFINITY;
        for &id in order.iter() {
            bounds.include(sites[id as usize].position);
            max_weight = max_weight.max(sites[id as usize].weight);
        }
        let idx = self.nodes.len() as u32;
        self.nodes.push(BvhNode {
            bounds,
            max_weight,
            content: NodeContent::Leaf {
                first,
                count: order.len() as u32,
            },
        });
        if order.len() <= self.leaf_size {
            return idx;
        }
        let extent = bounds.max - bounds.min;
        let mut axis = 0usize;
        if extent.y > extent.axis(axis) {
            axis = 1;
        }
        if extent.z > extent.axis(axis) {
            axis = 2;
        }
        let mid = order.len() / 2;
        order.select_nth_unstable_by(mid, |&a, &b| {
            let ca = sites[a as usize].position.axis(axis);
            let cb = sites[b as usize].position.axis(axis);
            ca.partial_cmp(&cb)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let (lo, hi) = order.split_at_mut(mid);
        let left = self.build_node(sites, lo, first);
        let right = self.build_node(sites, hi, first + mid as u32);
        self.nodes[idx as usize].content = NodeContent::Internal { left, right };
        idx
    }

    pub fn nodes(&self) -> &[BvhNode<R>] {
        &self.nodes
    }

    pub fn prim_order(&self) -> &[u32] {
        &self.prim_order
    }

    /// Sites permuted into leaf order; ids are the original ones.
    pub fn ordered_sites(&self) -> &[WeightedSite<R>] {
        &self.ordered_sites
    }

    pub fn leaf_size(&self) -> usize {
        self.leaf_size
    }

    pub fn root(&self) -> &BvhNode<R> {
        &self.nodes[0]
    }
}

// ---------------------------------------------------------------------------
// KNN
// ---------------------------------------------------------------------------

/// The `k` nearest sites to site `q` by Euclidean distance, excluding `q`
/// itself, nearest first; distance ties break toward the lower id. Returns
/// fewer than `k` entries when the set is small.
pub fn knn_warm_start<R: Real>(
    bvh: &PowerBvh<R>,
    sites: &[WeightedSite<R>],
    q: u32,
    k: usize,
) -> Vec<u32> {
    let query = sites[q as usize].position;
    let mut best: Vec<(R, u32)> = Vec::with_capacity(k + 1);
    knn_recurse(bvh, 0, query, q, k, &mut best);
    best.into_iter().map(|(_, id)| id).collect()
}

fn knn_recurse<R: Real>(
    bvh: &PowerBvh<R>,
    node: u32,
    query: Vec3<R>,
    skip: u32,
    k: usize,
    best: &mut Vec<(R, u32)>,
) {
    let n = &bvh.nodes[node as usize];
    match n.content {
        NodeContent::Leaf { first, count } => {
            for s in &bvh.ordered_sites[first as usize..(first + count) as usize] {
                let id = s.id;
                if id == skip {
                    continue;
                }
                let d = query.distance_squared(s.position);
                let cand = (d, id);
                if best.len() == k {
                    let worst = *best.last().expect("k >= 1");
                    if !knn_less(cand, worst) {
                        continue;
                    }
                }
                let pos = best.partition_point(|&e| knn_less(e, cand));
                best.insert(pos, cand);
                best.truncate(k);
            }
        }
        NodeContent::Internal { left, right } => {
            let dl = bvh.nodes[left as usize].bounds.min_distance_squared(query);
            let dr = bvh.nodes[right as usize].bounds.min_distance_squared(query);
            let (near, far, dn, df) = if dl <= dr {
                (left, right, dl, dr)
            } else {
                (right, left, dr, dl)
            };
            // Prune only on strictly greater distance: an equal-distance node
            // may still hold a lower-id tie.
            if best.len() < k || dn <= best.last().expect("nonempty").0 {
                knn_recurse(bvh, near, query, skip, k, best);
            }
            if best.len() < k || df <= best.last().expect("nonempty").0 {
                knn_recurse(bvh, far, query, skip, k, best);
            }
        }
    }
}

#[inline]
fn knn_less<R: Real>(a: (R, u32), b: (R, u32)) -> bool {
    a.0 < b.0 || (a.0 == b.0 && a.1 < b.1)
}

// ---------------------------------------------------------------------------
// Volume culling
// ---------------------------------------------------------------------------

/// Lower bound on the bisector distance from the cell's site to any site
/// inside `bounds` whose weight is at most `max_weight`:
/// `d/2 + min(w_site - max_weight, 0) / (2 d)` with `d` the distance from the
/// site to the box. Negative infinity when the site is inside the box.
#[inline]
fn weighted_lower_bound<R: Real>(cell: &ConvexCell<R>, bounds: &Aabb<R>, max_weight: R) -> R {
    let d = bounds.min_distance(cell.site().position);
    if d <= R::ZERO {
        return R::NEG_INFINITY;
    }
    let dw = (cell.site().weight - max_weight).min(R::ZERO);
    d * R::HALF + dw / (R::TWO * d)
}

/// True when no site inside `bounds` (with subtree max weight
/// `node_max_weight`) can clip the cell. Never culls a volume containing the
/// site itself.
pub fn node_culled<R: Real>(cell: &ConvexCell<R>, bounds: &Aabb<R>, node_max_weight: R) -> bool {
    node_culled_mode(cell, bounds, node_max_weight, CullingMode::Directional)
}

pub fn node_culled_mode<R: Real>(
    cell: &ConvexCell<R>,
    bounds: &Aabb<R>,
    node_max_weight: R,
    mode: CullingMode,
) -> bool {
    let lb = weighted_lower_bound(cell, bounds, node_max_weight);
    lb > cell.radius_toward_box(bounds, mode)
}

// ---------------------------------------------------------------------------
// Neighbor traversal
// ---------------------------------------------------------------------------

/// Counters describing one cell's neighbor search.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TraversalStats {
    pub nodes_visited: u64,
    pub leaves_visited: u64,
    pub clip_calls: u64,
    pub clip_unchanged: u64,
    pub stack_high_water: u64,
}

impl TraversalStats {
    /// Merge per-cell stats into an aggregate: counters add, the stack high
    /// water keeps its maximum.
    pub fn merge(&mut self, other: &TraversalStats) {
        self.nodes_visited += other.nodes_visited;
        self.leaves_visited += other.leaves_visited;
        self.clip_calls += other.clip_calls;
        self.clip_unchanged += other.clip_unchanged;
        self.stack_high_water = self.stack_high_water.max(other.stack_high_water);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum TraversalError {
    #[error(transparent)]
    Cell(#[from] CellError),
    /// Two distinct candidate sites coincide within the degeneracy
    /// tolerance; the caller must resolve duplicates before traversal.
    #[error(transparent)]
    Coincident(#[from] CoincidentSites),
}

/// Scratch reused across traversals.
#[derive(Debug, Default)]
pub struct TraversalScratch<R> {
    stack: Vec<(u32, R)>,
    members: Vec<(R, u32)>,
    pub clip: ClipScratch<R>,
}

impl<R: Real> TraversalScratch<R> {
    pub fn new() -> Self {
        Self {
            stack: Vec::new(),
            members: Vec::new(),
            clip: ClipScratch::new(),
        }
    }
}

/// Clip `cell` by every neighbor that can contribute, discovering candidates
/// through the hierarchy. On return the live bisector planes of the cell are
/// exactly the site's power-diagram neighbors.
///
/// `suppressed` marks sites to ignore entirely (duplicate-position losers);
/// candidate sites must otherwise be pairwise distinct within the degeneracy
/// tolerance implied by `coincidence_sq`.
#[allow(clippy::too_many_arguments)]
pub fn clip_by_neighbors<R: Real>(
    bvh: &PowerBvh<R>,
    sites: &[WeightedSite<R>],
    cell: &mut ConvexCell<R>,
    order: TraversalOrder,
    mode: CullingMode,
    coincidence_sq: R,
    suppressed: Option<&[bool]>,
    scratch: &mut TraversalScratch<R>,
) -> Result<TraversalStats, TraversalError> {
    debug_assert_eq!(
        sites.len(),
        bvh.ordered_sites.len(),
        "hierarchy was built over a different site array"
    );
    let mut stats = TraversalStats::default();
    match order {
        TraversalOrder::BestFirst => best_first(
            bvh,
            cell,
            mode,
            coincidence_sq,
            suppressed,
            scratch,
            &mut stats,
        )?,
        TraversalOrder::DepthFirst => depth_first(
            bvh,
            cell,
            mode,
            coincidence_sq,
            suppressed,
            scratch,
            &mut stats,
        )?,
    }
    Ok(stats)
}

/// Best-first traversal with default settings.
pub fn best_first_clip<R: Real>(
    bvh: &PowerBvh<R>,
    sites: &[WeightedSite<R>],
    cell: &mut ConvexCell<R>,
    coincidence_sq: R,
    scratch: &mut TraversalScratch<R>,
) -> Result<TraversalStats, TraversalError> {
    clip_by_neighbors(
        bvh,
        sites,
        cell,
        TraversalOrder::BestFirst,
        CullingMode::Directional,
        coincidence_sq,
        None,
        scratch,
    )
}

/// Penetration key of a node: weighted lower bound minus the directional
/// radius toward the node's bounds. Nonpositive means the node may still
/// contribute; more negative means deeper penetration, so higher priority.
#[inline]
fn node_delta<R: Real>(cell: &ConvexCell<R>, node: &BvhNode<R>, mode: CullingMode) -> (R, R) {
    let lb = weighted_lower_bound(cell, &node.bounds, node.max_weight);
    let r = cell.radius_toward_box(&node.bounds, mode);
    (lb - r, lb)
}

#[allow(clippy::too_many_arguments)]
fn best_first<R: Real>(
    bvh: &PowerBvh<R>,
    cell: &mut ConvexCell<R>,
    mode: CullingMode,
    coincidence_sq: R,
    suppressed: Option<&[bool]>,
    scratch: &mut TraversalScratch<R>,
    stats: &mut TraversalStats,
) -> Result<(), TraversalError> {
    scratch.stack.clear();
    let mut node: Option<u32> = Some(0);
    loop {
        // Descend toward the deeper-penetrating child, deferring the far one
        // while it can still contribute.
        while let Some(idx) = node {
            let n = &bvh.nodes[idx as usize];
            let Some((left, right)) = n.children() else {
                break;
            };
            stats.nodes_visited += 1;
            let (dl, lbl) = node_delta(cell, &bvh.nodes[left as usize], mode);
            let (dr, lbr) = node_delta(cell, &bvh.nodes[right as usize], mode);
            if dl.min(dr) > R::ZERO {
                node = None;
                break;
            }
            let (near, far_idx, far_lb, far_delta) = if dl < dr {
                (left, right, lbr, dr)
            } else {
                (right, left, lbl, dl)
            };
            node = Some(near);
            if far_delta <= R::ZERO {
                scratch.stack.push((far_idx, far_lb));
                stats.stack_high_water = stats.stack_high_water.max(scratch.stack.len() as u64);
            }
        }

        if let Some(idx) = node {
            stats.nodes_visited += 1;
            stats.leaves_visited += 1;
            let (first, end) = bvh.nodes[idx as usize]
                .leaf_range()
                .expect("descend stops at leaves");
            process_leaf(
                bvh,
                cell,
                first,
                end,
                mode,
                coincidence_sq,
                suppressed,
                scratch,
                stats,
            )?;
            if cell.is_empty() {
                return Ok(());
            }
        }

        // Backtrack: pop the pending node with the smallest stored bound.
        // The stack is unsorted; a linear scan finds the minimum and the
        // last entry fills the vacated slot. Each popped node is re-tested
        // against the current (possibly shrunk) radii before resuming.
        loop {
            if scratch.stack.is_empty() {
                return Ok(());
            }
            let mut min_slot = 0usize;
            for (slot, entry) in scratch.stack.iter().enumerate().skip(1) {
                if entry.1 < scratch.stack[min_slot].1 {
                    min_slot = slot;
                }
            }
            let (idx, lb) = scratch.stack.swap_remove(min_slot);
            let n = &bvh.nodes[idx as usize];
            let r = cell.radius_toward_box(&n.bounds, mode);
            if lb - r <= R::ZERO {
                node = Some(idx);
                break;
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn depth_first<R: Real>(
    bvh: &PowerBvh<R>,
    cell: &mut ConvexCell<R>,
    mode: CullingMode,
    coincidence_sq: R,
    suppressed: Option<&[bool]>,
    scratch: &mut TraversalScratch<R>,
    stats: &mut TraversalStats,
) -> Result<(), TraversalError> {
    scratch.stack.clear();
    scratch.stack.push((0, R::ZERO));
    stats.stack_high_water = stats.stack_high_water.max(1);
    while let Some((idx, _)) = scratch.stack.pop() {
        let n = &bvh.nodes[idx as usize];
        let (delta, _) = node_delta(cell, n, mode);
        if delta > R::ZERO {
            continue;
        }
        stats.nodes_visited += 1;
        match n.content {
            NodeContent::Leaf { first, count } => {
                stats.leaves_visited += 1;
                process_leaf(
                    bvh,
                    cell,
                    first as usize,
                    (first + count) as usize,
                    mode,
                    coincidence_sq,
                    suppressed,
                    scratch,
                    stats,
                )?;
                if cell.is_empty() {
                    return Ok(());
                }
            }
            NodeContent::Internal { left, right } => {
                scratch.stack.push((right, R::ZERO));
                scratch.stack.push((left, R::ZERO));
                stats.stack_high_water = stats.stack_high_water.max(scratch.stack.len() as u64);
            }
        }
    }
    Ok(())
}

/// Clip by the members of one leaf, nearest first.
#[allow(clippy::too_many_arguments)]
fn process_leaf<R: Real>(
    bvh: &PowerBvh<R>,
    cell: &mut ConvexCell<R>,
    first: usize,
    end: usize,
    mode: CullingMode,
    coincidence_sq: R,
    suppressed: Option<&[bool]>,
    scratch: &mut TraversalScratch<R>,
    stats: &mut TraversalStats,
) -> Result<(), TraversalError> {
    let own = cell.site().id;
    let q = cell.site().position;
    scratch.members.clear();
    for (slot, s) in bvh.ordered_sites[first..end].iter().enumerate() {
        if s.id == own {
            continue;
        }
        if suppressed.is_some_and(|sup| sup[s.id as usize]) {
            continue;
        }
        scratch
            .members
            .push((q.distance_squared(s.position), (first + slot) as u32));
    }
    scratch.members.sort_unstable_by(|a, b| {
        let ia = bvh.ordered_sites[a.1 as usize].id;
        let ib = bvh.ordered_sites[b.1 as usize].id;
        a.0.partial_cmp(&b.0).unwrap().then(ia.cmp(&ib))
    });
    for i in 0..scratch.members.len() {
        let slot = scratch.members[i].1 as usize;
        clip_candidate(
            &bvh.ordered_sites[slot],
            cell,
            mode,
            coincidence_sq,
            &mut scratch.clip,
            stats,
        )?;
        if cell.is_empty() {
            return Ok(());
        }
    }
    Ok(())
}

/// Cull-check then clip one candidate, maintaining stats and triggering the
/// occupancy-based garbage collection.
pub(crate) fn clip_candidate<R: Real>(
    candidate: &WeightedSite<R>,
    cell: &mut ConvexCell<R>,
    mode: CullingMode,
    coincidence_sq: R,
    clip_scratch: &mut ClipScratch<R>,
    stats: &mut TraversalStats,
) -> Result<(), TraversalError> {
    if cell.site_culled(candidate, mode) {
        return Ok(());
    }
    let h = bisector(cell.site(), candidate, coincidence_sq)?;
    stats.clip_calls += 1;
    match cell.clip(&h, clip_scratch)? {
        ClipOutcome::Unchanged => stats.clip_unchanged += 1,
        ClipOutcome::Clipped => cell.maybe_compact(),
        ClipOutcome::Emptied => {}
    }
    Ok(())
}
