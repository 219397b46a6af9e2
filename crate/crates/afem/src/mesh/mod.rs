//! Newest-vertex-bisection forest over a polygonal domain.
//!
//! The forest is created once from an initial triangulation with a
//! compatible newest-vertex labeling and only ever grows: bisecting an
//! element replaces it by its two children, so the current partition is the
//! set of active leaves and `#active = #roots + bisections`. Midpoints are
//! deduplicated through an edge map rather than coordinate comparison, which
//! keeps the topology exact for dyadic coordinates.
//!
//! The newest vertex of every element sits at local index 0; the refinement
//! edge is the opposite edge (1, 2). Bisection labels the new midpoint as
//! the newest vertex of both children, the standard rule that bounds the
//! number of similarity classes and hence the minimum angle.

pub mod io;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::geometry::{self, Point, Triangle};

pub type VertexId = usize;
pub type ElementId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vertex {
    pub x: f64,
    pub y: f64,
    pub on_boundary: bool,
}

#[derive(Debug, Clone)]
pub struct ElementNode {
    /// Vertex triple, counter-clockwise, newest vertex first. The
    /// refinement edge is (vertices[1], vertices[2]).
    pub vertices: [VertexId; 3],
    pub generation: u32,
    pub parent: Option<ElementId>,
    pub children: Option<[ElementId; 2]>,
    pub active: bool,
    root: u32,
    /// Child choices from the root, packed from the high bit down; together
    /// with `root` and `generation` this is the intrinsic forest order used
    /// to break ties deterministically.
    path: u128,
}

/// Intrinsic total order of forest elements (root index, then the binary
/// path of child choices). Independent of creation order, so tie-breaking is
/// reproducible across runs that grow the same forest differently.
pub type LexKey = (u32, u128, u32);

/// A snapshot of leaves of one forest, ids ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    forest: u64,
    elems: Vec<ElementId>,
}

impl Partition {
    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ElementId> + '_ {
        self.elems.iter().copied()
    }

    pub fn elements(&self) -> &[ElementId] {
        &self.elems
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.elems.binary_search(&id).is_ok()
    }
}

static FOREST_IDS: AtomicU64 = AtomicU64::new(1);

type EdgeKey = (VertexId, VertexId);

fn edge_key(a: VertexId, b: VertexId) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone)]
pub struct MeshForest {
    id: u64,
    pub vertices: Vec<Vertex>,
    nodes: Vec<ElementNode>,
    roots: Vec<ElementId>,
    /// Edge -> midpoint vertex created when the edge was first split.
    midpoints: HashMap<EdgeKey, VertexId>,
    /// Boundary edges at the finest current subdivision level.
    boundary_edges: HashSet<EdgeKey>,
    n_bisections: u64,
    active_count: usize,
    domain_area: f64,
    min_angle_bound: f64,
}

impl MeshForest {
    /// Build the forest from an initial triangulation. `labels[i]` names the
    /// newest vertex of triangle `i` (an index into its vertex triple); the
    /// triple is rotated so that vertex ends up first.
    ///
    /// Rejects degenerate or negatively oriented triangles, meshes that are
    /// not edge-to-edge, and labelings where an interior edge is the
    /// refinement edge of exactly one of its two neighbors.
    pub fn from_initial(
        coords: &[Point],
        triangles: &[[VertexId; 3]],
        labels: &[usize],
    ) -> Result<Self> {
        if triangles.len() != labels.len() {
            return Err(Error::InvalidParameter(
                "one newest-vertex label per triangle required".into(),
            ));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidParameter("empty initial mesh".into()));
        }
        let mut seen = HashMap::new();
        for (i, c) in coords.iter().enumerate() {
            if !c[0].is_finite() || !c[1].is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "vertex {i} has non-finite coordinates"
                )));
            }
            if let Some(j) = seen.insert((c[0].to_bits(), c[1].to_bits()), i) {
                return Err(Error::NonConformingMesh(format!(
                    "vertices {j} and {i} coincide"
                )));
            }
        }

        let mut nodes = Vec::with_capacity(triangles.len());
        let mut domain_area = 0.0;
        for (i, (tri, &label)) in triangles.iter().zip(labels).enumerate() {
            if label > 2 {
                return Err(Error::InvalidParameter(format!(
                    "label {label} of triangle {i} is not in 0..3"
                )));
            }
            let v = [tri[label], tri[(label + 1) % 3], tri[(label + 2) % 3]];
            for &vid in &v {
                if vid >= coords.len() {
                    return Err(Error::InvalidParameter(format!(
                        "triangle {i} references unknown vertex {vid}"
                    )));
                }
            }
            let t = [coords[v[0]], coords[v[1]], coords[v[2]]];
            let sa = geometry::signed_area(&t);
            if !(sa > 1e-300) {
                return Err(Error::DegenerateTriangle { index: i, area: sa });
            }
            domain_area += sa;
            nodes.push(ElementNode {
                vertices: v,
                generation: 0,
                parent: None,
                children: None,
                active: true,
                root: i as u32,
                path: 0,
            });
        }

        // Edge-to-edge check and adjacency.
        let mut edge_elems: HashMap<EdgeKey, Vec<ElementId>> = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            for k in 0..3 {
                edge_elems
                    .entry(edge_key(n.vertices[k], n.vertices[(k + 1) % 3]))
                    .or_default()
                    .push(i);
            }
        }
        let mut boundary_edges = HashSet::new();
        for (&e, adj) in &edge_elems {
            match adj.len() {
                1 => {
                    boundary_edges.insert(e);
                }
                2 => {
                    // Strict compatibility: an interior edge is the
                    // refinement edge of both neighbors or of neither.
                    let is_ref =
                        |t: ElementId| edge_key(nodes[t].vertices[1], nodes[t].vertices[2]) == e;
                    if is_ref(adj[0]) != is_ref(adj[1]) {
                        return Err(Error::IncompatibleLabeling(format!(
                            "edge ({}, {}) is the refinement edge of element {} but not of \
                             element {}",
                            e.0,
                            e.1,
                            if is_ref(adj[0]) { adj[0] } else { adj[1] },
                            if is_ref(adj[0]) { adj[1] } else { adj[0] },
                        )));
                    }
                }
                n => {
                    return Err(Error::NonConformingMesh(format!(
                        "edge ({}, {}) is shared by {n} triangles",
                        e.0, e.1
                    )));
                }
            }
        }

        let mut boundary_vertex = vec![false; coords.len()];
        for &(a, b) in &boundary_edges {
            boundary_vertex[a] = true;
            boundary_vertex[b] = true;
        }
        let vertices = coords
            .iter()
            .zip(&boundary_vertex)
            .map(|(c, &on_boundary)| Vertex {
                x: c[0],
                y: c[1],
                on_boundary,
            })
            .collect();

        let roots = (0..nodes.len()).collect();
        let mut forest = MeshForest {
            id: FOREST_IDS.fetch_add(1, Ordering::Relaxed),
            vertices,
            nodes,
            roots,
            midpoints: HashMap::new(),
            boundary_edges,
            n_bisections: 0,
            active_count: triangles.len(),
            domain_area,
            min_angle_bound: 0.0,
        };
        forest.min_angle_bound = forest.probe_min_angle_bound();
        Ok(forest)
    }

    /// Minimum angle over all similarity classes reachable from the roots,
    /// computed on a scratch copy refined uniformly twice.
    fn probe_min_angle_bound(&self) -> f64 {
        let mut probe = self.clone();
        for _ in 0..2 {
            let ids = probe.active_ids();
            for id in ids {
                probe.bisect(id).expect("probe bisection");
            }
        }
        let mut bound = f64::INFINITY;
        let mut walk = vec![];
        walk.extend(&probe.roots);
        while let Some(id) = walk.pop() {
            bound = bound.min(geometry::min_angle(&probe.triangle(id)));
            if let Some(c) = probe.nodes[id].children {
                walk.extend(c);
            }
        }
        bound
    }

    pub fn forest_id(&self) -> u64 {
        self.id
    }

    pub fn n_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn n_bisections(&self) -> u64 {
        self.n_bisections
    }

    pub fn n_active(&self) -> usize {
        self.active_count
    }

    pub fn domain_area(&self) -> f64 {
        self.domain_area
    }

    /// Lower bound for the minimum angle of any element this forest can
    /// produce; depends only on the initial triangulation.
    pub fn min_angle_bound(&self) -> f64 {
        self.min_angle_bound
    }

    pub fn is_active(&self, id: ElementId) -> bool {
        self.nodes.get(id).map(|n| n.active).unwrap_or(false)
    }

    pub fn node(&self, id: ElementId) -> &ElementNode {
        &self.nodes[id]
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn lex_key(&self, id: ElementId) -> LexKey {
        let n = &self.nodes[id];
        (n.root, n.path, n.generation)
    }

    pub fn triangle(&self, id: ElementId) -> Triangle {
        let v = self.nodes[id].vertices;
        [self.point(v[0]), self.point(v[1]), self.point(v[2])]
    }

    pub fn point(&self, v: VertexId) -> Point {
        [self.vertices[v].x, self.vertices[v].y]
    }

    pub fn area_of(&self, id: ElementId) -> f64 {
        geometry::area(&self.triangle(id))
    }

    pub fn diameter_of(&self, id: ElementId) -> f64 {
        geometry::diameter(&self.triangle(id))
    }

    fn active_ids(&self) -> Vec<ElementId> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].active)
            .collect()
    }

    /// Current partition: active leaves, ids ascending.
    pub fn active_partition(&self) -> Partition {
        Partition {
            forest: self.id,
            elems: self.active_ids(),
        }
    }

    pub fn owns(&self, p: &Partition) -> bool {
        p.forest == self.id
    }

    fn check_owned(&self, p: &Partition) -> Result<()> {
        if !self.owns(p) {
            return Err(Error::ForeignPartition);
        }
        Ok(())
    }

    /// Bisect the refinement edge of an active element. The midpoint vertex
    /// is shared with the neighbor's bisection through the edge map; a
    /// midpoint of a boundary edge becomes a boundary vertex.
    pub fn bisect(&mut self, id: ElementId) -> Result<[ElementId; 2]> {
        let node = self
            .nodes
            .get(id)
            .ok_or(Error::UnknownElement(id))?
            .clone();
        if !node.active {
            return Err(Error::InactiveElement(id));
        }
        if node.generation >= 127 {
            return Err(Error::InvalidParameter(format!(
                "element {id} exceeds the supported refinement depth"
            )));
        }
        let [v0, v1, v2] = node.vertices;
        let key = edge_key(v1, v2);
        let m = match self.midpoints.get(&key) {
            Some(&m) => m,
            None => {
                let on_boundary = self.boundary_edges.contains(&key);
                let p = geometry::midpoint(self.point(v1), self.point(v2));
                let m = self.vertices.len();
                self.vertices.push(Vertex {
                    x: p[0],
                    y: p[1],
                    on_boundary,
                });
                self.midpoints.insert(key, m);
                if on_boundary {
                    self.boundary_edges.remove(&key);
                    self.boundary_edges.insert(edge_key(v1, m));
                    self.boundary_edges.insert(edge_key(m, v2));
                }
                m
            }
        };
        let gen = node.generation + 1;
        let bit = 1u128 << (127 - node.generation);
        let c0 = self.nodes.len();
        let c1 = c0 + 1;
        // children keep the parent's orientation; the midpoint is their
        // newest vertex
        self.nodes.push(ElementNode {
            vertices: [m, v0, v1],
            generation: gen,
            parent: Some(id),
            children: None,
            active: true,
            root: node.root,
            path: node.path,
        });
        self.nodes.push(ElementNode {
            vertices: [m, v2, v0],
            generation: gen,
            parent: Some(id),
            children: None,
            active: true,
            root: node.root,
            path: node.path | bit,
        });
        let n = &mut self.nodes[id];
        n.active = false;
        n.children = Some([c0, c1]);
        self.n_bisections += 1;
        self.active_count += 1;
        Ok([c0, c1])
    }

    /// Bisect each marked element exactly once. Duplicate ids are tolerated;
    /// the result may be non-conforming.
    pub fn refine_marked(&mut self, marked: &[ElementId]) -> Result<Partition> {
        let unique: BTreeSet<ElementId> = marked.iter().copied().collect();
        for &id in &unique {
            if !self.is_active(id) {
                return Err(Error::InactiveElement(id));
            }
        }
        for &id in &unique {
            self.bisect(id)?;
        }
        Ok(self.active_partition())
    }

    /// Refine until no active element has a hanging vertex on one of its
    /// edges, by repeatedly bisecting the coarse side of every
    /// non-conforming edge. Only bisections are used, and only forced ones,
    /// so the result is the smallest conforming refinement of the current
    /// partition. Terminates because generation gaps across edges are
    /// bounded under a compatible initial labeling.
    pub fn conforming_closure(&mut self) -> Partition {
        loop {
            let mut changed = false;
            for id in self.active_ids() {
                if !self.nodes[id].active {
                    continue;
                }
                if self.has_hanging_edge(id) {
                    self.bisect(id).expect("closure bisection of active element");
                    changed = true;
                }
            }
            if !changed {
                return self.active_partition();
            }
        }
    }

    /// An edge of an active element carries a hanging node when some other
    /// element already split it, i.e. its midpoint exists in the edge map.
    fn has_hanging_edge(&self, id: ElementId) -> bool {
        let v = self.nodes[id].vertices;
        for k in 0..3 {
            if self
                .midpoints
                .contains_key(&edge_key(v[k], v[(k + 1) % 3]))
            {
                return true;
            }
        }
        false
    }

    /// Smallest common refinement of two partitions of this forest.
    pub fn overlay(&self, a: &Partition, b: &Partition) -> Result<Partition> {
        self.check_owned(a)?;
        self.check_owned(b)?;
        let mut interior = HashSet::new();
        for p in [a, b] {
            for id in p.iter() {
                if id >= self.nodes.len() {
                    return Err(Error::UnknownElement(id));
                }
                let mut cur = self.nodes[id].parent;
                while let Some(pid) = cur {
                    if !interior.insert(pid) {
                        break;
                    }
                    cur = self.nodes[pid].parent;
                }
            }
        }
        let mut elems = Vec::new();
        let mut walk: Vec<ElementId> = self.roots.clone();
        while let Some(id) = walk.pop() {
            if interior.contains(&id) {
                let c = self.nodes[id].children.expect("interior node has children");
                walk.extend(c);
            } else {
                elems.push(id);
            }
        }
        elems.sort_unstable();
        Ok(Partition {
            forest: self.id,
            elems,
        })
    }

    /// Edges of the partition with exactly one adjacent element, sorted.
    pub fn boundary_edges_of(&self, p: &Partition) -> Result<Vec<EdgeKey>> {
        self.check_owned(p)?;
        let mut counts: HashMap<EdgeKey, usize> = HashMap::new();
        for id in p.iter() {
            let v = self.nodes[id].vertices;
            for k in 0..3 {
                *counts.entry(edge_key(v[k], v[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut out: Vec<EdgeKey> = counts
            .into_iter()
            .filter_map(|(e, c)| (c == 1).then_some(e))
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Interior edges with their two adjacent elements, sorted by edge.
    /// Fails on non-conforming partitions, which have no well-defined
    /// element pairing across split edges.
    pub fn interior_edges_of(&self, p: &Partition) -> Result<Vec<InteriorEdge>> {
        self.check_owned(p)?;
        self.check_conforming(p)?;
        let mut adj: HashMap<EdgeKey, (ElementId, Option<ElementId>)> = HashMap::new();
        for id in p.iter() {
            let v = self.nodes[id].vertices;
            for k in 0..3 {
                adj.entry(edge_key(v[k], v[(k + 1) % 3]))
                    .and_modify(|e| e.1 = Some(id))
                    .or_insert((id, None));
            }
        }
        let mut out: Vec<InteriorEdge> = adj
            .into_iter()
            .filter_map(|(e, (t0, t1))| {
                t1.map(|t1| InteriorEdge {
                    vertices: e,
                    elements: (t0, t1),
                })
            })
            .collect();
        out.sort_unstable_by_key(|e| e.vertices);
        Ok(out)
    }

    pub fn is_conforming(&self, p: &Partition) -> bool {
        self.check_conforming(p).is_ok()
    }

    fn check_conforming(&self, p: &Partition) -> Result<()> {
        let mut used: HashSet<VertexId> = HashSet::new();
        for id in p.iter() {
            used.extend(self.nodes[id].vertices);
        }
        for id in p.iter() {
            let v = self.nodes[id].vertices;
            for k in 0..3 {
                let (a, b) = (v[k], v[(k + 1) % 3]);
                if let Some(&m) = self.midpoints.get(&edge_key(a, b)) {
                    // The edge is split somewhere in the forest; it hangs for
                    // this partition iff the midpoint is one of its vertices.
                    if used.contains(&m) {
                        return Err(Error::NonConformingPartition {
                            vertex: m,
                            v0: a,
                            v1: b,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Distinct vertices of a partition, ascending.
    pub fn vertex_ids_of(&self, p: &Partition) -> Vec<VertexId> {
        let mut set = BTreeSet::new();
        for id in p.iter() {
            set.extend(self.nodes[id].vertices);
        }
        set.into_iter().collect()
    }

    /// Total area of a partition.
    pub fn partition_area(&self, p: &Partition) -> f64 {
        p.iter().map(|id| self.area_of(id)).sum()
    }

    /// Uniform refinement: every edge of every active element is split, so
    /// each triangle is replaced by four similar children. One level is two
    /// bisection passes plus closure.
    pub fn refine_uniform(&mut self, levels: usize) -> Partition {
        for _ in 0..2 * levels {
            let all = self.active_ids();
            self.refine_marked(&all).expect("uniform refinement");
            self.conforming_closure();
        }
        self.active_partition()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InteriorEdge {
    pub vertices: EdgeKey,
    pub elements: (ElementId, ElementId),
}

/// The two-triangle unit square with the shared diagonal as both refinement
/// edges. Smallest compatible mesh; used all over the tests.
pub fn unit_square() -> MeshForest {
    MeshForest::from_initial(
        &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
        &[[1, 2, 0], [3, 0, 2]],
        &[0, 0],
    )
    .expect("unit square mesh")
}
