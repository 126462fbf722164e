//! Per-site convex cell: a polyhedron stored as half-spaces plus vertices
//! encoded as plane-index triplets, progressively clipped by bisecting
//! planes.
//!
//! Vertex positions are cached instead of recomputed from their triplets.
//! The cell also maintains an AABB over its vertices and the eight distances
//! from the site to the AABB corners; those corner distances drive the
//! directional culling bound.

use thiserror::Error;

use crate::geom::{Aabb, HalfSpace, PlaneSource, Vec3, WeightedSite};
use crate::real::Real;

/// Result of clipping a cell by one half-space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipOutcome {
    /// No vertex was outside the half-space; the cell is untouched.
    Unchanged,
    /// At least one vertex was removed and a new facet was created.
    Clipped,
    /// Every vertex was outside; the cell is now empty.
    Emptied,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CellError {
    /// The site is not strictly inside the initial bounding box.
    #[error("site lies on or outside the initial bounding box")]
    SiteOutsideBox,
    /// The hole boundary did not close into a single cycle; a
    /// tolerance-induced inconsistency. The cell is left in its state from
    /// before the failing clip, and the caller may rebuild it from scratch
    /// with a promoted tolerance.
    #[error("clip produced an inconsistent hole boundary")]
    TopologyCorruption,
}

/// Which radius bound to use when culling candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CullingMode {
    /// Per-octant corner-distance bound toward the candidate.
    #[default]
    Directional,
    /// Single radius: the farthest AABB corner, used for every direction.
    Isotropic,
}

/// Scratch buffers reused across clip calls.
#[derive(Debug, Default)]
pub struct ClipScratch<R> {
    /// Marked vertex indices, ascending.
    work: Vec<u32>,
    /// Copy of `work` consumed by the peeling loop.
    work_peel: Vec<u32>,
    boundary: Vec<u32>,
    new_positions: Vec<Vec3<R>>,
}

impl<R: Real> ClipScratch<R> {
    pub fn new() -> Self {
        Self {
            work: Vec::new(),
            work_peel: Vec::new(),
            boundary: Vec::new(),
            new_positions: Vec::new(),
        }
    }
}

/// Soft capacity for the plane array before the first garbage collection.
const INITIAL_PLANE_BUDGET: usize = 64;
/// Occupancy fraction that triggers compaction of dead planes.
const GC_OCCUPANCY: f64 = 0.85;

#[derive(Debug, Clone)]
pub struct ConvexCell<R: Real> {
    site: WeightedSite<R>,
    plane_eps: R,
    planes: Vec<HalfSpace<R>>,
    /// Number of vertex triplets referencing each plane; a plane with zero
    /// references is dead and removable.
    plane_refs: Vec<u32>,
    live_planes: usize,
    plane_budget: usize,
    vertex_planes: Vec<[u32; 3]>,
    vertex_positions: Vec<Vec3<R>>,
    // Positions again as parallel coordinate arrays; the per-clip vertex
    // scan and bounds refresh run over these so they vectorize.
    pos_x: Vec<R>,
    pos_y: Vec<R>,
    pos_z: Vec<R>,
    aabb: Aabb<R>,
    corner_dist: [R; 8],
}

impl<R: Real> ConvexCell<R> {
    /// Initialize the cell as the global bounding box: six boundary planes
    /// and eight corner vertices. The site must be strictly inside the box.
    pub fn new(
        site: WeightedSite<R>,
        global_box: &Aabb<R>,
        plane_eps: R,
    ) -> Result<Self, CellError> {
        if !global_box.contains_strict(site.position) {
            return Err(CellError::SiteOutsideBox);
        }
        let b = *global_box;
        // Face order: 0 = min x, 1 = max x, 2 = min y, 3 = max y, 4 = min z,
        // 5 = max z. Inward unit normals.
        let planes = vec![
            HalfSpace {
                normal: Vec3::new(R::ONE, R::ZERO, R::ZERO),
                offset: -b.min.x,
                source: PlaneSource::Boundary(0),
            },
            HalfSpace {
                normal: Vec3::new(-R::ONE, R::ZERO, R::ZERO),
                offset: b.max.x,
                source: PlaneSource::Boundary(1),
            },
            HalfSpace {
                normal: Vec3::new(R::ZERO, R::ONE, R::ZERO),
                offset: -b.min.y,
                source: PlaneSource::Boundary(2),
            },
            HalfSpace {
                normal: Vec3::new(R::ZERO, -R::ONE, R::ZERO),
                offset: b.max.y,
                source: PlaneSource::Boundary(3),
            },
            HalfSpace {
                normal: Vec3::new(R::ZERO, R::ZERO, R::ONE),
                offset: -b.min.z,
                source: PlaneSource::Boundary(4),
            },
            HalfSpace {
                normal: Vec3::new(R::ZERO, R::ZERO, -R::ONE),
                offset: b.max.z,
                source: PlaneSource::Boundary(5),
            },
        ];
        let mut vertex_planes = Vec::with_capacity(8);
        let mut vertex_positions = Vec::with_capacity(8);
        let mut pos_x = Vec::with_capacity(8);
        let mut pos_y = Vec::with_capacity(8);
        let mut pos_z = Vec::with_capacity(8);
        for k in 0..8 {
            let xp = if k & 1 != 0 { 1 } else { 0 };
            let yp = if k & 2 != 0 { 3 } else { 2 };
            let zp = if k & 4 != 0 { 5 } else { 4 };
            vertex_planes.push([xp, yp, zp]);
            let c = b.corner(k);
            vertex_positions.push(c);
            pos_x.push(c.x);
            pos_y.push(c.y);
            pos_z.push(c.z);
        }
        let mut cell = Self {
            site,
            plane_eps,
            planes,
            plane_refs: vec![4; 6],
            live_planes: 6,
            plane_budget: INITIAL_PLANE_BUDGET,
            vertex_planes,
            vertex_positions,
            pos_x,
            pos_y,
            pos_z,
            aabb: b,
            corner_dist: [R::ZERO; 8],
        };
        cell.update_corner_distances();
        Ok(cell)
    }

    pub fn site(&self) -> &WeightedSite<R> {
        &self.site
    }

    pub fn plane_eps(&self) -> R {
        self.plane_eps
    }

    pub fn aabb(&self) -> &Aabb<R> {
        &self.aabb
    }

    pub fn corner_distances(&self) -> &[R; 8] {
        &self.corner_dist
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_planes.is_empty()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_planes.len()
    }

    pub fn stored_plane_count(&self) -> usize {
        self.planes.len()
    }

    pub fn live_plane_count(&self) -> usize {
        self.live_planes
    }

    pub fn planes(&self) -> &[HalfSpace<R>] {
        &self.planes
    }

    pub fn vertex_triplets(&self) -> &[[u32; 3]] {
        &self.vertex_planes
    }

    pub fn vertex_positions(&self) -> &[Vec3<R>] {
        &self.vertex_positions
    }

    /// Sources of the live planes, in storage order.
    pub fn live_sources(&self) -> impl Iterator<Item = PlaneSource> + '_ {
        self.planes
            .iter()
            .zip(&self.plane_refs)
            .filter(|(_, &r)| r > 0)
            .map(|(p, _)| p.source)
    }

    /// Ids of sites whose bisectors support a real face of the cell,
    /// ascending. A live plane whose vertices are all collinear within the
    /// tolerance is a zero-area tangency, not a shared face; those arise on
    /// exactly degenerate inputs (lattices, cospherical points) where the
    /// near-coplanar keep rule leaves sliver vertices behind.
    pub fn neighbor_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .planes
            .iter()
            .zip(&self.plane_refs)
            .enumerate()
            .filter(|(_, (_, &refs))| refs > 0)
            .filter_map(|(pi, (p, _))| match p.source {
                PlaneSource::Bisector(id) if self.face_has_area(pi as u32) => Some(id),
                _ => None,
            })
            .collect();
        ids.sort_unstable();
        debug_assert!(ids.windows(2).all(|w| w[0] != w[1]));
        ids
    }

    /// True when the vertices referencing `plane` span a polygon with
    /// nonzero area at the working tolerance.
    fn face_has_area(&self, plane: u32) -> bool {
        let tol = self.plane_eps * R::from_f64(4.0);
        let mut anchor: Option<Vec3<R>> = None;
        let mut dir: Option<Vec3<R>> = None;
        for (t, &p) in self.vertex_planes.iter().zip(&self.vertex_positions) {
            if !t.contains(&plane) {
                continue;
            }
            let Some(a) = anchor else {
                anchor = Some(p);
                continue;
            };
            match dir {
                None => {
                    let d = p - a;
                    if d.length() > tol {
                        dir = Some(d.scale(R::ONE / d.length()));
                    }
                }
                Some(u) => {
                    let d = p - a;
                    if u.cross(d).length() > tol {
                        return true;
                    }
                }
            }
        }
        false
    }

    pub fn touches_boundary(&self) -> bool {
        self.live_sources().any(|s| s.is_boundary())
    }

    // -----------------------------------------------------------------------
    // Clipping
    // -----------------------------------------------------------------------

    /// Clip the cell by `h`. On [`CellError::TopologyCorruption`] the cell is
    /// left exactly as it was before the call.
    pub fn clip(
        &mut self,
        h: &HalfSpace<R>,
        scratch: &mut ClipScratch<R>,
    ) -> Result<ClipOutcome, CellError> {
        debug_assert!(!self.is_empty(), "clip on an emptied cell");
        let nv = self.vertex_positions.len();
        let threshold = -self.plane_eps;

        // Cheap reject: every vertex lies inside the cell AABB, so if the
        // half-space contains the AABB no vertex can be marked.
        let n = h.normal;
        let lowest = (n.x * self.aabb.min.x).min(n.x * self.aabb.max.x)
            + (n.y * self.aabb.min.y).min(n.y * self.aabb.max.y)
            + (n.z * self.aabb.min.z).min(n.z * self.aabb.max.z)
            + h.offset;
        if lowest >= threshold {
            return Ok(ClipOutcome::Unchanged);
        }

        // Step 1: classify vertices. Evaluations within [-eps, eps] count as
        // inside so near-coplanar vertices are kept.
        // Hot path: a branchless scan over the coordinate arrays; the vast
        // majority of clips mark nothing and return here.
        let off = h.offset;
        let mut any_marked = false;
        for ((&x, &y), &z) in self.pos_x[..nv]
            .iter()
            .zip(&self.pos_y[..nv])
            .zip(&self.pos_z[..nv])
        {
            let e = n.x * x + n.y * y + n.z * z + off;
            any_marked |= e < threshold;
        }
        if !any_marked {
            return Ok(ClipOutcome::Unchanged);
        }

        scratch.work.clear();
        for (i, ((&x, &y), &z)) in self.pos_x[..nv]
            .iter()
            .zip(&self.pos_y[..nv])
            .zip(&self.pos_z[..nv])
            .enumerate()
        {
            let e = n.x * x + n.y * y + n.z * z + off;
            if e < threshold {
                scratch.work.push(i as u32);
            }
        }
        let marked = scratch.work.len();
        debug_assert!(marked > 0, "scan said a vertex is marked");
        if marked == nv {
            self.empty_out();
            return Ok(ClipOutcome::Emptied);
        }

        // Step 2: peel marked vertices one at a time, each adjacent to the
        // current hole boundary, which is kept as a circular list of plane
        // indices; consecutive entries (a, b) are the dangling edge on the
        // intersection of faces a and b. Only scratch state is touched, so a
        // corrupted boundary leaves the cell intact.
        self.build_hole_boundary(scratch)?;
        let boundary_len = scratch.boundary.len();
        if boundary_len < 3 {
            return Err(CellError::TopologyCorruption);
        }

        // Step 2b: positions of the facet vertices, computed up front so the
        // commit below cannot fail.
        scratch.new_positions.clear();
        for i in 0..boundary_len {
            let a = scratch.boundary[i] as usize;
            let j = if i + 1 == boundary_len { 0 } else { i + 1 };
            let b = scratch.boundary[j] as usize;
            let p = intersect_planes(h, &self.planes[a], &self.planes[b])
                .ok_or(CellError::TopologyCorruption)?;
            scratch.new_positions.push(p);
        }

        // Step 3: commit. Append h, drop marked vertices, close the hole with
        // one vertex per dangling edge.
        let hi = self.planes.len() as u32;
        self.planes.push(*h);
        self.plane_refs.push(0);
        // The work list holds marked indices ascending; removing from the
        // back keeps the earlier indices valid.
        for &v in scratch.work.iter().rev() {
            let i = v as usize;
            let t = self.vertex_planes[i];
            for &p in &t {
                self.release_plane(p);
            }
            self.vertex_planes.swap_remove(i);
            self.vertex_positions.swap_remove(i);
            self.pos_x.swap_remove(i);
            self.pos_y.swap_remove(i);
            self.pos_z.swap_remove(i);
        }
        for i in 0..boundary_len {
            let a = scratch.boundary[i];
            let j = if i + 1 == boundary_len { 0 } else { i + 1 };
            let b = scratch.boundary[j];
            self.vertex_planes.push([hi, a, b]);
            let p = scratch.new_positions[i];
            self.vertex_positions.push(p);
            self.pos_x.push(p.x);
            self.pos_y.push(p.y);
            self.pos_z.push(p.z);
            self.retain_plane(hi);
            self.retain_plane(a);
            self.retain_plane(b);
        }
        self.update_bounds();
        Ok(ClipOutcome::Clipped)
    }

    fn build_hole_boundary(&self, scratch: &mut ClipScratch<R>) -> Result<(), CellError> {
        let boundary = &mut scratch.boundary;
        boundary.clear();

        // Seed with the first marked vertex; its three edges become the
        // initial dangling edges.
        let work = &mut scratch.work_peel;
        work.clear();
        work.extend_from_slice(&scratch.work);
        let seed = work.swap_remove(0);
        boundary.extend_from_slice(&self.vertex_planes[seed as usize]);

        // Peel the remaining marked vertices. Each step removes one vertex
        // whose dangling edges form a contiguous stretch of the loop and
        // rewrites that stretch locally. A vertex whose matches are not
        // contiguous is deferred: removing it would pinch the hole into two
        // loops. A plane may appear at several positions mid-peel, so only
        // edges (consecutive pairs) are unique, never elements.
        while !work.is_empty() {
            let len = boundary.len();
            let mut progressed = false;
            'scan: for slot in 0..work.len() {
                let t = self.vertex_planes[work[slot] as usize];
                // Positions i where the dangling edge (boundary[i],
                // boundary[i+1]) ends at this vertex. At most its 3 edges.
                let mut matches = [0usize; 3];
                let mut nmatch = 0usize;
                let mut a = boundary[len - 1];
                for (i, &b) in boundary.iter().enumerate() {
                    // Pair at circular position i-1 is (a, b).
                    if t.contains(&a) && t.contains(&b) {
                        if nmatch == 3 {
                            return Err(CellError::TopologyCorruption);
                        }
                        matches[nmatch] = if i == 0 { len - 1 } else { i - 1 };
                        nmatch += 1;
                    }
                    a = b;
                }
                matches[..nmatch].sort_unstable();
                match nmatch {
                    0 => continue,
                    1 => {
                        // Hangs off one dangling edge: that edge is consumed
                        // and the vertex's third plane enters the loop.
                        let i = matches[0];
                        let a = boundary[i];
                        let b = boundary[(i + 1) % len];
                        let third = *t
                            .iter()
                            .find(|&&p| p != a && p != b)
                            .ok_or(CellError::TopologyCorruption)?;
                        boundary.insert(i + 1, third);
                    }
                    2 => {
                        // Two adjacent dangling edges meet at the vertex;
                        // their shared plane leaves the loop.
                        let (p0, p1) = (matches[0], matches[1]);
                        if p1 == p0 + 1 {
                            boundary.remove(p1);
                        } else if p0 == 0 && p1 == len - 1 {
                            boundary.remove(0);
                        } else {
                            continue; // not contiguous here yet; defer
                        }
                    }
                    _ => {
                        // All three edges dangling: an enclave closing a
                        // pocket [a, b, c, a]; the pocket collapses to a
                        // single `a`.
                        let Some(start) = run_start_of_three(&matches, len) else {
                            continue; // defer until contiguous
                        };
                        let mut drop = [(start + 1) % len, (start + 2) % len, (start + 3) % len];
                        drop.sort_unstable();
                        for &d in drop.iter().rev() {
                            boundary.remove(d);
                        }
                    }
                }
                work.swap_remove(slot);
                progressed = true;
                break 'scan;
            }
            if !progressed {
                // No removable vertex touches the hole with a contiguous
                // stretch: a tolerance-induced inconsistency.
                return Err(CellError::TopologyCorruption);
            }
        }
        Ok(())
    }

    /// Drop every vertex, leaving an empty cell with no live planes.
    pub(crate) fn empty_out(&mut self) {
        for r in &mut self.plane_refs {
            *r = 0;
        }
        self.live_planes = 0;
        self.vertex_planes.clear();
        self.vertex_positions.clear();
        self.pos_x.clear();
        self.pos_y.clear();
        self.pos_z.clear();
        self.aabb = Aabb::empty();
        self.corner_dist = [R::ZERO; 8];
    }

    #[inline]
    fn retain_plane(&mut self, p: u32) {
        let r = &mut self.plane_refs[p as usize];
        if *r == 0 {
            self.live_planes += 1;
        }
        *r += 1;
    }

    #[inline]
    fn release_plane(&mut self, p: u32) {
        let r = &mut self.plane_refs[p as usize];
        *r -= 1;
        if *r == 0 {
            self.live_planes -= 1;
        }
    }

    fn update_bounds(&mut self) {
        let mut min = Vec3::splat(R::INFINITY);
        let mut max = Vec3::splat(R::NEG_INFINITY);
        for &x in &self.pos_x {
            min.x = min.x.min(x);
            max.x = max.x.max(x);
        }
        for &y in &self.pos_y {
            min.y = min.y.min(y);
            max.y = max.y.max(y);
        }
        for &z in &self.pos_z {
            min.z = min.z.min(z);
            max.z = max.z.max(z);
        }
        self.aabb = Aabb::new(min, max);
        self.update_corner_distances();
    }

    fn update_corner_distances(&mut self) {
        for k in 0..8 {
            self.corner_dist[k] = self.site.position.distance(self.aabb.corner(k));
        }
    }

    // -----------------------------------------------------------------------
    // Garbage collection
    // -----------------------------------------------------------------------

    /// Remove planes referenced by no vertex and remap triplet indices.
    /// Geometry and the set of live plane sources are unchanged.
    #[allow(clippy::needless_range_loop)] // the loop swaps within the arrays it scans
    pub fn compact(&mut self) {
        if self.live_planes == self.planes.len() {
            return;
        }
        let mut remap = vec![u32::MAX; self.planes.len()];
        let mut write = 0usize;
        for read in 0..self.planes.len() {
            if self.plane_refs[read] > 0 {
                remap[read] = write as u32;
                self.planes.swap(write, read);
                self.plane_refs.swap(write, read);
                write += 1;
            }
        }
        self.planes.truncate(write);
        self.plane_refs.truncate(write);
        for t in &mut self.vertex_planes {
            for p in t.iter_mut() {
                *p = remap[*p as usize];
                debug_assert!(*p != u32::MAX);
            }
        }
    }

    /// Compact when the plane array exceeds the occupancy threshold; if it is
    /// still above the threshold afterwards, grow the budget instead of
    /// failing.
    pub fn maybe_compact(&mut self) {
        if (self.planes.len() as f64) < GC_OCCUPANCY * self.plane_budget as f64 {
            return;
        }
        self.compact();
        if (self.planes.len() as f64) >= GC_OCCUPANCY * self.plane_budget as f64 {
            self.plane_budget *= 2;
        }
    }

    // -----------------------------------------------------------------------
    // Directional bounds
    // -----------------------------------------------------------------------

    /// Bitmask of octants (relative to the site) that `target` intersects.
    /// A point with coordinate equal to the site's on some axis belongs to
    /// the positive side of that axis.
    #[inline]
    fn octant_mask(&self, target: &Aabb<R>) -> u8 {
        let s = self.site.position;
        let pos = [
            target.max.x >= s.x,
            target.max.y >= s.y,
            target.max.z >= s.z,
        ];
        let neg = [target.min.x < s.x, target.min.y < s.y, target.min.z < s.z];
        let mut mask = 0u8;
        for o in 0u8..8 {
            let ok = (0..3).all(|k| if o & (1 << k) != 0 { pos[k] } else { neg[k] });
            if ok {
                mask |= 1 << o;
            }
        }
        mask
    }

    /// Upper bound on the cell's extent from the site toward any point of
    /// `target`: the maximum corner distance over the octants the target
    /// intersects. A point target selects exactly one octant.
    pub fn directional_radius(&self, target: &Aabb<R>) -> R {
        let mask = self.octant_mask(target);
        let mut r = R::ZERO;
        for o in 0..8 {
            if mask & (1 << o) != 0 {
                r = r.max(self.corner_dist[o]);
            }
        }
        r
    }

    /// Single-radius bound: the farthest AABB corner, valid for every
    /// direction.
    pub fn isotropic_radius(&self) -> R {
        let mut r = R::ZERO;
        for o in 0..8 {
            r = r.max(self.corner_dist[o]);
        }
        r
    }

    #[inline]
    pub fn radius_toward_point(&self, p: Vec3<R>, mode: CullingMode) -> R {
        match mode {
            CullingMode::Directional => {
                let s = self.site.position;
                let mut o = 0usize;
                if p.x >= s.x {
                    o |= 1;
                }
                if p.y >= s.y {
                    o |= 2;
                }
                if p.z >= s.z {
                    o |= 4;
                }
                self.corner_dist[o]
            }
            CullingMode::Isotropic => self.isotropic_radius(),
        }
    }

    #[inline]
    pub fn radius_toward_box(&self, target: &Aabb<R>, mode: CullingMode) -> R {
        match mode {
            CullingMode::Directional => self.directional_radius(target),
            CullingMode::Isotropic => self.isotropic_radius(),
        }
    }

    /// True when the candidate's bisecting plane provably cannot intersect
    /// the cell, so clipping by it would return [`ClipOutcome::Unchanged`].
    pub fn site_culled(&self, candidate: &WeightedSite<R>, mode: CullingMode) -> bool {
        let d_sq = self.site.position.distance_squared(candidate.position);
        if d_sq <= R::ZERO {
            return false;
        }
        let d = d_sq.sqrt();
        let dw = self.site.weight - candidate.weight;
        let dist = (d_sq + dw) / (R::TWO * d);
        dist > self.radius_toward_point(candidate.position, mode)
    }

    // -----------------------------------------------------------------------
    // Geometry extraction
    // -----------------------------------------------------------------------

    /// Polygonal faces of the cell: for each live plane with a nonzero-area
    /// face, its vertices ordered into a loop whose winding faces outward.
    pub fn faces(&self) -> Vec<CellFace<R>> {
        let mut out = Vec::new();
        for (pi, plane) in self.planes.iter().enumerate() {
            if self.plane_refs[pi] == 0 || !self.face_has_area(pi as u32) {
                continue;
            }
            let pi = pi as u32;
            let merge_tol = self.plane_eps * R::from_f64(4.0);
            let mut verts: Vec<Vec3<R>> = Vec::new();
            for (t, &pos) in self.vertex_planes.iter().zip(&self.vertex_positions) {
                if t.contains(&pi) && !verts.iter().any(|&v| v.distance(pos) <= merge_tol) {
                    verts.push(pos);
                }
            }
            if verts.len() < 3 {
                continue;
            }
            order_face_loop(plane.normal, &mut verts);
            out.push(CellFace {
                source: plane.source,
                vertices: verts,
            });
        }
        out
    }
}

/// For three matched pair-positions, the start of a circular run
/// `[q, q+1, q+2]`, if they form one.
fn run_start_of_three(matches: &[usize; 3], len: usize) -> Option<usize> {
    matches
        .iter()
        .copied()
        .find(|&q| matches.contains(&((q + 1) % len)) && matches.contains(&((q + 2) % len)))
}

/// One polygonal face of a cell.
#[derive(Debug, Clone)]
pub struct CellFace<R> {
    pub source: PlaneSource,
    /// Loop ordered so its winding points away from the cell interior.
    pub vertices: Vec<Vec3<R>>,
}

/// Order a convex face's vertices by angle around their centroid in the
/// plane, then flip if the loop's normal does not face outward (the stored
/// plane normal points into the cell).
fn order_face_loop<R: Real>(inward_normal: Vec3<R>, verts: &mut [Vec3<R>]) {
    let n = inward_normal;
    // Tangent basis: cross with the axis least aligned with the normal.
    let ax = n.x.abs();
    let ay = n.y.abs();
    let az = n.z.abs();
    let pick = if ax <= ay && ax <= az {
        Vec3::new(R::ONE, R::ZERO, R::ZERO)
    } else if ay <= az {
        Vec3::new(R::ZERO, R::ONE, R::ZERO)
    } else {
        Vec3::new(R::ZERO, R::ZERO, R::ONE)
    };
    let u = n.cross(pick);
    let inv = R::ONE / u.length();
    let u = u.scale(inv);
    let v = n.cross(u);

    let mut c = Vec3::new(R::ZERO, R::ZERO, R::ZERO);
    for &p in verts.iter() {
        c = c + p;
    }
    let c = c.scale(R::ONE / R::from_f64(verts.len() as f64));

    let mut keyed: Vec<(f64, Vec3<R>)> = verts
        .iter()
        .map(|&p| {
            let d = p - c;
            let ang = d.dot(v).to_f64().atan2(d.dot(u).to_f64());
            (ang, p)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (dst, (_, p)) in verts.iter_mut().zip(&keyed) {
        *dst = *p;
    }

    // Newell normal of the ordered loop.
    let mut newell = Vec3::new(R::ZERO, R::ZERO, R::ZERO);
    for i in 0..verts.len() {
        let a = verts[i];
        let b = verts[(i + 1) % verts.len()];
        newell = newell + a.cross(b);
    }
    // Outward is the opposite of the stored (inward) plane normal.
    if newell.dot(n) > R::ZERO {
        verts.reverse();
    }
}

/// Intersection point of three planes, evaluated in a canonical operand
/// order (sorted by plane source) so the result depends only on which planes
/// meet, not on the order they were clipped in. `None` when the planes are
/// degenerate enough to produce a non-finite solution.
pub fn intersect_planes<R: Real>(
    a: &HalfSpace<R>,
    b: &HalfSpace<R>,
    c: &HalfSpace<R>,
) -> Option<Vec3<R>> {
    let mut ps = [a, b, c];
    ps.sort_by_key(|p| p.source.sort_key());
    let [p0, p1, p2] = ps;
    let n0 = p0.normal;
    let n1 = p1.normal;
    let n2 = p2.normal;
    let det = n0.dot(n1.cross(n2));
    let num = n1.cross(n2).scale(-p0.offset)
        + n2.cross(n0).scale(-p1.offset)
        + n0.cross(n1).scale(-p2.offset);
    let pos = num.scale(R::ONE / det);
    pos.is_finite().then_some(pos)
}
