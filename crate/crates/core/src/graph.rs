//! The approximating graph `(V, d_V, m)` of an ε-net.
//!
//! Vertices are net members; `x ~ y` iff `ε <= d(x, y) <= 3ε`; the graph
//! metric is hop count times ε; the mass of a vertex is `μ(B(x, ε))`.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::net::EpsNet;
use crate::spaces::{BallSpec, SampledSpace};

pub const UNREACHED: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct NetGraph {
    epsilon: f64,
    vertex_point: Vec<usize>,
    point_vertex: HashMap<usize, usize>,
    adjacency: Vec<Vec<usize>>,
    masses: Vec<f64>,
    boundary_margin: Vec<f64>,
    dim: usize,
    coords: Vec<f64>,
    net_digest: Option<u64>,
    near_tie_edges: usize,
}

/// Per-vertex function `u: V -> R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFunction(Vec<f64>);

impl VertexFunction {
    pub fn new(g: &NetGraph, values: Vec<f64>) -> Result<Self> {
        if values.len() != g.len() {
            return Err(Error::invalid(format!("expected {} values, got {}", g.len(), values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vertex function values must be finite"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

impl std::ops::Index<usize> for VertexFunction {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VertexRecord {
    pub index: usize,
    pub coords: Vec<f64>,
    pub mass: f64,
    pub degree: usize,
}

/// JSON export of a graph.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphExport {
    pub epsilon: f64,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<[usize; 2]>,
}

fn boundary_margin(space: &SampledSpace, point: usize) -> f64 {
    if !space.is_full_space_lattice() {
        return f64::INFINITY;
    }
    let ext = space.extent().expect("lattice spaces have an extent");
    space
        .point(point)
        .iter()
        .enumerate()
        .map(|(d, &x)| (x - ext.lo[d]).min(ext.hi[d] - x))
        .fold(f64::INFINITY, f64::min)
}

/// Builds the approximating graph of `net` on `space`.
pub fn build_graph(space: &SampledSpace, net: &EpsNet) -> Result<NetGraph> {
    let eps = net.epsilon();
    let members = net.members();
    let lower = space.threshold(eps);
    let upper = space.threshold(3.0 * eps);
    let grid = space.grid_index(eps, members.iter().copied());
    let point_vertex: HashMap<usize, usize> = members.iter().enumerate().map(|(v, &p)| (p, v)).collect();
    let rows = exec::map_range(members.len(), |v| {
        let a = members[v];
        let mut nbrs = Vec::new();
        let mut ties = 0usize;
        let mut visit = |b: usize| {
            if b == a {
                return;
            }
            let lo = space.cmp_threshold(a, b, &lower);
            let hi = space.cmp_threshold(a, b, &upper);
            if lo != std::cmp::Ordering::Less && hi != std::cmp::Ordering::Greater {
                nbrs.push(point_vertex[&b]);
                if space.is_near_tie(a, b, 3.0 * eps) {
                    ties += 1;
                }
            }
        };
        match &grid {
            Some(g) => g.for_each_candidate(space.point(a), 3.0 * eps, &mut visit),
            None => members.iter().for_each(|&b| visit(b)),
        }
        nbrs.sort_unstable();
        (nbrs, ties)
    });
    let near_tie_edges = rows.iter().map(|r| r.1).sum::<usize>() / 2;
    let adjacency: Vec<Vec<usize>> = rows.into_iter().map(|r| r.0).collect();
    let masses = space.ball_measures(members, eps)?;
    if let Some(v) = masses.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::ZeroMass { center: v, radius: eps });
    }
    let dim = space.dim();
    let coords = members.iter().flat_map(|&p| space.point(p).iter().copied()).collect();
    Ok(NetGraph {
        epsilon: eps,
        vertex_point: members.to_vec(),
        point_vertex,
        adjacency,
        masses,
        boundary_margin: members.iter().map(|&p| boundary_margin(space, p)).collect(),
        dim,
        coords,
        net_digest: Some(net.digest()),
        near_tie_edges,
    })
}

impl NetGraph {
    /// An abstract graph with unit-length (`epsilon`) edges and given
    /// vertex masses. Adjacency must be symmetric and loop-free.
    pub fn from_adjacency(epsilon: f64, adjacency: Vec<Vec<usize>>, masses: Vec<f64>) -> Result<Self> {
        let n = adjacency.len();
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if masses.len() != n {
            return Err(Error::invalid("one mass per vertex required"));
        }
        if let Some(v) = masses.iter().position(|&m| !(m > 0.0 && m.is_finite())) {
            return Err(Error::ZeroMass { center: v, radius: epsilon });
        }
        let mut adjacency = adjacency;
        for (a, row) in adjacency.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            if row.contains(&a) {
                return Err(Error::invalid(format!("self-loop at vertex {a}")));
            }
        }
        for a in 0..n {
            for &b in &adjacency[a] {
                if b >= n || adjacency[b].binary_search(&a).is_err() {
                    return Err(Error::invalid(format!("adjacency is not symmetric at ({a},{b})")));
                }
            }
        }
        Ok(Self {
            epsilon,
            vertex_point: (0..n).collect(),
            point_vertex: (0..n).map(|i| (i, i)).collect(),
            adjacency,
            masses,
            boundary_margin: vec![f64::INFINITY; n],
            dim: 0,
            coords: Vec::new(),
            net_digest: None,
            near_tie_edges: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, row)| row.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, v: usize) -> f64 {
        self.masses[v]
    }

    /// Space point index of vertex `v`.
    pub fn point_of(&self, v: usize) -> usize {
        self.vertex_point[v]
    }

    pub fn vertex_of(&self, point: usize) -> Option<usize> {
        self.point_vertex.get(&point).copied()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coordinates of vertex `v` (empty for abstract or matrix graphs).
    pub fn coords(&self, v: usize) -> &[f64] {
        if self.dim == 0 {
            &[]
        } else {
            &self.coords[v * self.dim..(v + 1) * self.dim]
        }
    }

    pub fn has_coords(&self) -> bool {
        self.dim > 0
    }

    pub fn net_digest(&self) -> Option<u64> {
        self.net_digest
    }

    /// Edges whose `<= 3ε` test was decided by the float tolerance.
    pub fn near_tie_edges(&self) -> usize {
        self.near_tie_edges
    }

    /// Distance from the vertex to the sample extent (infinite when the
    /// measure is not truncated by the sample).
    pub fn boundary_margin(&self, v: usize) -> f64 {
        self.boundary_margin[v]
    }

    /// True when every ball computation reaching `reach` (in the ambient
    /// metric) from `v` stays inside the sample.
    pub fn is_interior(&self, v: usize, reach: f64) -> bool {
        self.boundary_margin[v] >= reach
    }

    /// Interior for degree purposes: the full `3ε` neighborhood is sampled.
    pub fn is_degree_interior(&self, v: usize) -> bool {
        self.is_interior(v, 3.0 * self.epsilon)
    }

    /// Replaces all masses (used to inject faults in uniformity checks).
    pub fn scale_masses(&mut self, factor: f64) {
        for m in &mut self.masses {
            *m *= factor;
        }
    }

    /// BFS hop counts from `src`, stopping after `max_hops` levels.
    /// Unreached vertices hold [`UNREACHED`].
    pub fn hops_from(&self, src: usize, max_hops: Option<u32>) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.len()];
        let mut queue = VecDeque::new();
        dist[src] = 0;
        queue.push_back(src);
        let cap = max_hops.unwrap_or(UNREACHED - 1);
        while let Some(a) = queue.pop_front() {
            let d = dist[a];
            if d >= cap {
                continue;
            }
            for &b in &self.adjacency[a] {
                if dist[b] == UNREACHED {
                    dist[b] = d + 1;
                    queue.push_back(b);
                }
            }
        }
        dist
    }

    /// `(vertex, hops)` pairs reached within `max_hops`, in BFS order.
    pub fn ball_levels(&self, src: usize, max_hops: u32) -> Vec<(usize, u32)> {
        let mut seen: HashMap<usize, u32> = HashMap::new();
        let mut order = vec![(src, 0)];
        seen.insert(src, 0);
        let mut head = 0;
        while head < order.len() {
            let (a, d) = order[head];
            head += 1;
            if d >= max_hops {
                continue;
            }
            for &b in &self.adjacency[a] {
                if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(b) {
                    e.insert(d + 1);
                    order.push((b, d + 1));
                }
            }
        }
        order
    }

    /// Graph distance `n·ε`, or infinity when disconnected.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return 0.0;
        }
        let h = self.hops_from(a, None)[b];
        if h == UNREACHED {
            f64::INFINITY
        } else {
            h as f64 * self.epsilon
        }
    }

    /// Largest hop count `h` with `h·ε < r`.
    pub fn hop_limit(&self, r: f64) -> u32 {
        let q = r / self.epsilon;
        let k = q.round();
        let h = if (q - k).abs() <= 1e-9 * q.max(1.0) { k - 1.0 } else { q.floor() };
        h.max(0.0).min((UNREACHED - 1) as f64) as u32
    }

    /// `B_V(center, r) = {y : d_V(center, y) < r}`, sorted.
    pub fn ball(&self, ball: &BallSpec) -> Vec<usize> {
        let limit = self.hop_limit(ball.radius);
        let mut vs: Vec<usize> = self.ball_levels(ball.center, limit).into_iter().map(|(v, _)| v).collect();
        vs.sort_unstable();
        vs
    }

    /// Sum of vertex masses over a nonempty set.
    pub fn ball_mass(&self, vertices: &[usize]) -> Result<f64> {
        if vertices.is_empty() {
            return Err(Error::EmptySet);
        }
        Ok(vertices.iter().map(|&v| self.masses[v]).sum())
    }

    /// Connected-component label per vertex, labels in order of first vertex.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        for s in 0..self.len() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(a) = stack.pop() {
                for &b in &self.adjacency[a] {
                    if label[b] == usize::MAX {
                        label[b] = next;
                        stack.push(b);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn export(&self) -> GraphExport {
        GraphExport {
            epsilon: self.epsilon,
            vertices: (0..self.len())
                .map(|v| VertexRecord {
                    index: self.vertex_point[v],
                    coords: self.coords(v).to_vec(),
                    mass: self.masses[v],
                    degree: self.degree(v),
                })
                .collect(),
            edges: self.edges().map(|(a, b)| [a, b]).collect(),
        }
    }

    /// Edge list as CSV (`source,target`, one row per undirected edge).
    pub fn adjacency_csv(&self) -> String {
        let mut out = String::from("source,target\n");
        for (a, b) in self.edges() {
            let _ = writeln!(out, "{a},{b}");
        }
        out
    }
}
