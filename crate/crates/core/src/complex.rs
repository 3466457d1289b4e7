//! The one-complex extension of a net graph: every edge becomes a metric
//! interval of length `ε`, carrying the measure spread from its endpoint
//! masses. Vertex-to-vertex distances come either from the graph metric or
//! from the ambient space.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::analysis::{reduce_doubling, sample_centers, DoublingReport, DoublingRow, DoublingTarget, SamplePlan};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{NetGraph, VertexFunction, UNREACHED};
use crate::poincare::{estimate_constant_lower, PiDomain, SuitePlan};
use crate::spaces::SampledSpace;

/// Quadrature nodes per edge for general test functions.
pub const EDGE_NODES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMode {
    /// Vertex distances are graph distances `d_V`.
    GraphDerived,
    /// Vertex distances are ambient distances `d_X`.
    SpaceDerived,
}

/// A vertex, or the point at distance `t ∈ (0, ε)` from the lower-index
/// endpoint of an edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComplexPoint {
    Vertex(usize),
    Edge { edge: usize, t: f64 },
}

#[derive(Debug, Clone)]
pub struct OneComplex<'a> {
    graph: &'a NetGraph,
    space: Option<&'a SampledSpace>,
    mode: MetricMode,
    edges: Vec<(usize, usize)>,
    edge_of: HashMap<(usize, usize), usize>,
}

pub fn build_complex<'a>(g: &'a NetGraph, mode: MetricMode, space: Option<&'a SampledSpace>) -> Result<OneComplex<'a>> {
    if mode == MetricMode::SpaceDerived && space.is_none() {
        return Err(Error::invalid("space-derived metric needs the sampled space"));
    }
    if let Some(s) = space {
        if let Some(v) = (0..g.len()).find(|&v| g.point_of(v) >= s.len()) {
            return Err(Error::invalid(format!("vertex {v} does not index a point of the space")));
        }
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let edge_of = edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    Ok(OneComplex {
        graph: g,
        space,
        mode,
        edges,
        edge_of,
    })
}

impl<'a> OneComplex<'a> {
    pub fn graph(&self) -> &'a NetGraph {
        self.graph
    }

    pub fn mode(&self) -> MetricMode {
        self.mode
    }

    pub fn epsilon(&self) -> f64 {
        self.graph.epsilon()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Endpoints `(a, b)` with `a < b`.
    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_of.get(&(a.min(b), a.max(b))).copied()
    }

    /// The point at distance `s` from `from` along the edge `{from, to}`,
    /// canonicalized.
    pub fn point_on(&self, from: usize, to: usize, s: f64) -> Result<ComplexPoint> {
        let e = self
            .edge_between(from, to)
            .ok_or_else(|| Error::invalid(format!("({from}, {to}) is not an edge")))?;
        let eps = self.epsilon();
        if !(0.0..=eps).contains(&s) {
            return Err(Error::invalid(format!("edge offset {s} outside [0, {eps}]")));
        }
        let t = if from < to { s } else { eps - s };
        Ok(self.canonical(ComplexPoint::Edge { edge: e, t }))
    }

    /// Maps `t = 0` and `t = ε` to the endpoint vertices.
    pub fn canonical(&self, p: ComplexPoint) -> ComplexPoint {
        match p {
            ComplexPoint::Edge { edge, t } if t <= 0.0 => ComplexPoint::Vertex(self.edges[edge].0),
            ComplexPoint::Edge { edge, t } if t >= self.epsilon() => ComplexPoint::Vertex(self.edges[edge].1),
            other => other,
        }
    }

    pub fn validate(&self, p: ComplexPoint) -> Result<()> {
        match p {
            ComplexPoint::Vertex(v) if v < self.graph.len() => Ok(()),
            ComplexPoint::Edge { edge, t } if edge < self.edges.len() && (0.0..=self.epsilon()).contains(&t) => Ok(()),
            _ => Err(Error::invalid(format!("invalid complex point {p:?}"))),
        }
    }

    /// `(vertex, offset)` exits of a point: itself, or both edge endpoints.
    fn exits(&self, p: ComplexPoint) -> Vec<(usize, f64)> {
        match p {
            ComplexPoint::Vertex(v) => vec![(v, 0.0)],
            ComplexPoint::Edge { edge, t } => {
                let (a, b) = self.edges[edge];
                vec![(a, t), (b, self.epsilon() - t)]
            }
        }
    }

    /// Distances from vertex `v` to every vertex in the base metric.
    pub fn vertex_distances(&self, v: usize) -> Vec<f64> {
        match self.mode {
            MetricMode::GraphDerived => {
                let eps = self.epsilon();
                self.graph
                    .hops_from(v, None)
                    .into_iter()
                    .map(|h| if h == UNREACHED { f64::INFINITY } else { h as f64 * eps })
                    .collect()
            }
            MetricMode::SpaceDerived => {
                let s = self.space.expect("checked at build");
                let pv = self.graph.point_of(v);
                (0..self.graph.len()).map(|w| s.distance(pv, self.graph.point_of(w))).collect()
            }
        }
    }

    /// Distances from `p` to every vertex (through the nearer exit).
    pub fn point_distances(&self, p: ComplexPoint) -> Vec<f64> {
        let mut out = vec![f64::INFINITY; self.graph.len()];
        for (v, off) in self.exits(p) {
            for (slot, d) in out.iter_mut().zip(self.vertex_distances(v)) {
                *slot = slot.min(off + d);
            }
        }
        out
    }

    /// Minimum over the endpoint routings, plus the within-edge path when
    /// both points lie on the same edge.
    pub fn distance(&self, p: ComplexPoint, q: ComplexPoint) -> f64 {
        let (p, q) = (self.canonical(p), self.canonical(q));
        let mut best = f64::INFINITY;
        if let (ComplexPoint::Edge { edge: e1, t: t1 }, ComplexPoint::Edge { edge: e2, t: t2 }) = (p, q) {
            if e1 == e2 {
                best = (t1 - t2).abs();
            }
        }
        let qx = self.exits(q);
        for (v, off_p) in self.exits(p) {
            let dv = self.vertex_distances(v);
            for &(w, off_q) in &qx {
                best = best.min(off_p + dv[w] + off_q);
            }
        }
        best
    }

    /// `m̄(I) = m(a) + m(b)`.
    pub fn edge_mass(&self, e: usize) -> f64 {
        let (a, b) = self.edges[e];
        self.graph.mass(a) + self.graph.mass(b)
    }

    /// Length of `{s ∈ [0, ε] : d(p, (e, s)) < r}` for every edge, given the
    /// distances from `p` to all vertices.
    fn covered_lengths(&self, p: ComplexPoint, dist: &[f64], r: f64) -> Vec<f64> {
        let eps = self.epsilon();
        let own = match p {
            ComplexPoint::Edge { edge, t } => Some((edge, t)),
            ComplexPoint::Vertex(_) => None,
        };
        self.edges
            .iter()
            .enumerate()
            .map(|(e, &(a, b))| {
                let mut iv: Vec<(f64, f64)> = Vec::with_capacity(3);
                if dist[a] < r {
                    iv.push((0.0, (r - dist[a]).min(eps)));
                }
                if dist[b] < r {
                    iv.push(((eps - (r - dist[b])).max(0.0), eps));
                }
                if let Some((pe, t)) = own {
                    if pe == e {
                        iv.push(((t - r).max(0.0), (t + r).min(eps)));
                    }
                }
                union_length(&mut iv)
            })
            .collect()
    }

    /// `m̄(B(p, r))`, exact: each edge contributes its covered length over
    /// `ε` times its mass.
    pub fn ball_mass(&self, p: ComplexPoint, r: f64) -> Result<f64> {
        self.validate(p)?;
        if !(r > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        let p = self.canonical(p);
        let dist = self.point_distances(p);
        Ok(self.ball_mass_with(p, &dist, r))
    }

    fn ball_mass_with(&self, p: ComplexPoint, dist: &[f64], r: f64) -> f64 {
        let eps = self.epsilon();
        self.covered_lengths(p, dist, r)
            .iter()
            .enumerate()
            .map(|(e, &len)| len / eps * self.edge_mass(e))
            .sum()
    }

    /// Uniformly random edge points (edge uniform, then offset uniform).
    pub fn sample_points(&self, count: usize, seed: u64) -> Vec<ComplexPoint> {
        if self.edges.is_empty() {
            return Vec::new();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| {
                let edge = rng.random_range(0..self.edges.len());
                let t = rng.random_range(0.0..self.epsilon());
                self.canonical(ComplexPoint::Edge { edge, t })
            })
            .collect()
    }

    /// Largest boundary margin among a point's endpoints' smallest.
    fn point_margin_ok(&self, p: ComplexPoint, reach: f64) -> bool {
        self.exits(p).iter().all(|&(v, _)| self.graph.is_interior(v, reach))
    }
}

fn union_length(iv: &mut [(f64, f64)]) -> f64 {
    iv.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut total = 0.0;
    let mut cur: Option<(f64, f64)> = None;
    for &(lo, hi) in iv.iter() {
        if hi <= lo {
            continue;
        }
        match cur {
            Some((cl, ch)) if lo <= ch => cur = Some((cl, ch.max(hi))),
            Some((cl, ch)) => {
                total += ch - cl;
                cur = Some((lo, hi));
            }
            None => cur = Some((lo, hi)),
        }
    }
    if let Some((cl, ch)) = cur {
        total += ch - cl;
    }
    total
}

/// Doubling ratios `m̄(B(P, 2r)) / m̄(B(P, r))` at vertices and random edge
/// points whose doubled balls stay away from the sample boundary.
pub fn complex_doubling(c: &OneComplex<'_>, plan: &SamplePlan) -> Result<DoublingReport> {
    if plan.radii.is_empty() || plan.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("radii must be positive"));
    }
    let rmax = plan.radii.iter().copied().fold(0.0, f64::max);
    let reach = 6.0 * rmax + 4.0 * c.epsilon();
    let mut candidates: Vec<ComplexPoint> = (0..c.graph.len()).map(ComplexPoint::Vertex).collect();
    candidates.extend(c.sample_points(c.graph.len(), plan.seed ^ 0x5eed));
    let (keep, excluded): (Vec<ComplexPoint>, Vec<ComplexPoint>) = candidates.into_iter().partition(|&p| c.point_margin_ok(p, reach));
    if keep.is_empty() {
        return Err(Error::Precondition("no interior complex points for these radii".into()));
    }
    let chosen = sample_centers((0..keep.len()).collect(), plan.centers, plan.seed);
    let rows_per = exec::map_slice(&chosen, |&k| {
        let p = keep[k];
        let dist = c.point_distances(p);
        plan.radii
            .iter()
            .map(|&r| {
                let m1 = c.ball_mass_with(p, &dist, r);
                let m2 = c.ball_mass_with(p, &dist, 2.0 * r);
                DoublingRow {
                    center: k,
                    radius: r,
                    mass: m1,
                    mass_doubled: m2,
                    ratio: m2 / m1,
                }
            })
            .collect::<Vec<_>>()
    });
    let rows: Vec<DoublingRow> = rows_per.into_iter().flatten().collect();
    if let Some(row) = rows.iter().find(|r| !(r.mass > 0.0)) {
        return Err(Error::ZeroMass {
            center: row.center,
            radius: row.radius,
        });
    }
    Ok(reduce_doubling(DoublingTarget::Complex, chosen.len(), excluded.len(), &plan.radii, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub p: f64,
    /// `Σ_I |Δu / ε|^p m̄(I)` of the piecewise-linear interpolant.
    pub linear_energy: f64,
    pub edges_checked: usize,
    pub perturbations_per_edge: usize,
    /// Perturbations with strictly smaller energy than the interpolant.
    pub violations: usize,
    /// Smallest `perturbed / linear` energy ratio over edges with nonzero
    /// linear energy.
    pub min_ratio: f64,
}

/// Relative slack when comparing perturbed and linear energies; sums of
/// same-sign slopes can round below the exact total by a few ulps.
pub const ENERGY_SLACK: f64 = 1e-12;

/// Energy of a piecewise-linear function on `[0, ε]` through knots
/// `(s_i, v_i)` (including both ends), against density `mass / ε`.
fn pl_energy(knots: &[(f64, f64)], p: f64, mass: f64, eps: f64) -> f64 {
    knots
        .windows(2)
        .map(|w| {
            let len = w[1].0 - w[0].0;
            if len <= 0.0 {
                return 0.0;
            }
            ((w[1].1 - w[0].1) / len).abs().powf(p) * len
        })
        .sum::<f64>()
        * mass
        / eps
}

/// Compares the linear interpolant on every edge with `perturbations`
/// random piecewise-linear functions sharing its endpoint values.
pub fn linear_extension_energy(c: &OneComplex<'_>, u: &VertexFunction, p: f64, perturbations: usize, seed: u64) -> Result<EnergyReport> {
    if !(p >= 1.0) {
        return Err(Error::invalid("p must be >= 1"));
    }
    let eps = c.epsilon();
    let vals = u.values();
    let per_edge = exec::map_range(c.edge_count(), |e| {
        let (a, b) = c.edge(e);
        let (ua, ub) = (vals[a], vals[b]);
        let mass = c.edge_mass(e);
        let linear = ((ub - ua) / eps).abs().powf(p) * mass;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (e as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let scale = (ub - ua).abs().max(1e-3);
        let mut violations = 0;
        let mut min_ratio = f64::INFINITY;
        for _ in 0..perturbations {
            let k = rng.random_range(1..=6);
            let mut s: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..eps)).collect();
            s.sort_by(f64::total_cmp);
            let mut knots = vec![(0.0, ua)];
            for si in s {
                let base = ua + (ub - ua) * si / eps;
                knots.push((si, base + scale * rng.sample::<f64, _>(StandardNormal)));
            }
            knots.push((eps, ub));
            let energy = pl_energy(&knots, p, mass, eps);
            if energy < linear * (1.0 - ENERGY_SLACK) {
                violations += 1;
            }
            if linear > 0.0 {
                min_ratio = min_ratio.min(energy / linear);
            }
        }
        (linear, violations, min_ratio)
    });
    let mut report = EnergyReport {
        p,
        linear_energy: 0.0,
        edges_checked: c.edge_count(),
        perturbations_per_edge: perturbations,
        violations: 0,
        min_ratio: f64::INFINITY,
    };
    for (lin, v, m) in per_edge {
        report.linear_energy += lin;
        report.violations += v;
        report.min_ratio = report.min_ratio.min(m);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexPiEstimate {
    pub p: f64,
    pub lambda: f64,
    pub radius: f64,
    pub center: ComplexPoint,
    /// `r <= ε` (small balls) or `r > ε`.
    pub case: String,
    pub c_lower: f64,
    pub functions_evaluated: usize,
    pub argmax_label: String,
    /// Best ratio of the base graph on the matching vertex ball, when the
    /// center is a vertex.
    pub base_graph_c_lower: Option<f64>,
    /// `c_lower / base_graph_c_lower`.
    pub factor: Option<f64>,
}

/// Quadrature nodes on edges touching a ball: `(edge, node, weight)` with
/// trapezoid weights times the edge density.
struct Quadrature {
    /// Node values index: edge * (EDGE_NODES + 1) + j.
    in_ball: Vec<(usize, f64)>,
    /// Segments `(edge, j)` whose midpoint lies in the inflated ball, with
    /// measure weight.
    segments: Vec<(usize, usize, f64)>,
}

fn quadrature(c: &OneComplex<'_>, center: ComplexPoint, r: f64, lambda: f64) -> Quadrature {
    let eps = c.epsilon();
    let h = eps / EDGE_NODES as f64;
    let dist = c.point_distances(center);
    let own = match center {
        ComplexPoint::Edge { edge, t } => Some((edge, t)),
        ComplexPoint::Vertex(_) => None,
    };
    let d_at = |e: usize, s: f64| {
        let (a, b) = c.edge(e);
        let mut d = (dist[a] + s).min(dist[b] + eps - s);
        if let Some((pe, t)) = own {
            if pe == e {
                d = d.min((s - t).abs());
            }
        }
        d
    };
    let mut in_ball = Vec::new();
    let mut segments = Vec::new();
    for e in 0..c.edge_count() {
        let density = c.edge_mass(e) / eps;
        for j in 0..=EDGE_NODES {
            let s = j as f64 * h;
            if d_at(e, s) < r {
                let w = if j == 0 || j == EDGE_NODES { 0.5 } else { 1.0 };
                in_ball.push((e * (EDGE_NODES + 1) + j, w * h * density));
            }
            if j < EDGE_NODES && d_at(e, s + h / 2.0) < lambda * r {
                segments.push((e, j, h * density));
            }
        }
    }
    Quadrature { in_ball, segments }
}

fn pl_ratio(q: &Quadrature, values: &[f64], r: f64, p: f64, eps: f64) -> f64 {
    let h = eps / EDGE_NODES as f64;
    let total: f64 = q.in_ball.iter().map(|&(_, w)| w).sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let reference = values[q.in_ball[0].0];
    let mean = reference + q.in_ball.iter().map(|&(i, w)| (values[i] - reference) * w).sum::<f64>() / total;
    let lhs = q.in_ball.iter().map(|&(i, w)| (values[i] - mean).abs() * w).sum::<f64>() / total;
    if lhs == 0.0 {
        return 0.0;
    }
    let seg_total: f64 = q.segments.iter().map(|&(_, _, w)| w).sum();
    let grad: f64 = q
        .segments
        .iter()
        .map(|&(e, j, w)| {
            let i = e * (EDGE_NODES + 1) + j;
            ((values[i + 1] - values[i]) / h).abs().powf(p) * w
        })
        .sum::<f64>();
    let rhs = r * (grad / seg_total).powf(1.0 / p);
    if rhs == 0.0 {
        f64::INFINITY
    } else {
        lhs / rhs
    }
}

/// Poincaré ratio for piecewise-linear test functions on a ball of the
/// complex, by trapezoid quadrature on [`EDGE_NODES`] segments per edge.
pub fn complex_pi_check(
    c: &OneComplex<'_>,
    center: ComplexPoint,
    r: f64,
    lambda: f64,
    p: f64,
    functions: usize,
    seed: u64,
) -> Result<ComplexPiEstimate> {
    c.validate(center)?;
    if !(r > 0.0) || !(lambda >= 1.0) || !(p >= 1.0) {
        return Err(Error::invalid("need r > 0, lambda >= 1, p >= 1"));
    }
    let center = c.canonical(center);
    let g = c.graph();
    let eps = c.epsilon();
    let q = quadrature(c, center, r, lambda);
    let stride = EDGE_NODES + 1;
    let from_vertices = |vals: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; c.edge_count() * stride];
        for e in 0..c.edge_count() {
            let (a, b) = c.edge(e);
            for j in 0..stride {
                out[e * stride + j] = vals[a] + (vals[b] - vals[a]) * j as f64 / EDGE_NODES as f64;
            }
        }
        out
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite: Vec<(String, Vec<f64>)> = Vec::new();
    if g.has_coords() {
        for d in 0..g.dim() {
            let vals: Vec<f64> = (0..g.len()).map(|v| g.coords(v)[d]).collect();
            suite.push((format!("coordinate-{d}"), from_vertices(&vals)));
        }
    }
    // distance to the center, evaluated at every node
    {
        let dist = c.point_distances(center);
        let mut vals = vec![0.0; c.edge_count() * stride];
        for e in 0..c.edge_count() {
            let (a, b) = c.edge(e);
            for j in 0..stride {
                let s = j as f64 * eps / EDGE_NODES as f64;
                let mut d = (dist[a] + s).min(dist[b] + eps - s);
                if let ComplexPoint::Edge { edge, t } = center {
                    if edge == e {
                        d = d.min((s - t).abs());
                    }
                }
                vals[e * stride + j] = if d.is_finite() { d } else { 0.0 };
            }
        }
        suite.push(("distance-to-center".into(), vals));
    }
    for k in 0..functions {
        let vals: Vec<f64> = (0..g.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let mut nodes = from_vertices(&vals);
        if k % 2 == 1 {
            // interior bumps vanishing at the vertices
            for e in 0..c.edge_count() {
                let bump = rng.sample::<f64, _>(StandardNormal);
                for j in 1..EDGE_NODES {
                    let x = j as f64 / EDGE_NODES as f64;
                    nodes[e * stride + j] += bump * 4.0 * x * (1.0 - x);
                }
            }
        }
        suite.push((format!("random-{k}"), nodes));
    }
    let ratios = exec::map_slice(&suite, |(_, vals)| pl_ratio(&q, vals, r, p, eps));
    let (best_k, best) = ratios
        .iter()
        .enumerate()
        .filter(|(_, r)| r.is_finite())
        .fold((usize::MAX, 0.0f64), |acc, (k, &r)| if r > acc.1 { (k, r) } else { acc });
    let base = match center {
        ComplexPoint::Vertex(v) if r >= eps => {
            let d = PiDomain::graph_ball(g, v, r, lambda)?;
            Some(estimate_constant_lower(g, &d, p, &SuitePlan::default().seeds_only(), seed)?.c_lower)
        }
        _ => None,
    };
    Ok(ComplexPiEstimate {
        p,
        lambda,
        radius: r,
        center,
        case: if r <= eps { "small-ball".into() } else { "large-ball".into() },
        c_lower: best,
        functions_evaluated: suite.len(),
        argmax_label: if best_k == usize::MAX { String::new() } else { suite[best_k].0.clone() },
        base_graph_c_lower: base,
        factor: base.filter(|b| *b > 0.0).map(|b| best / b),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeComparison {
    pub pairs: usize,
    /// `max d_G / d̃_G`.
    pub max_space_over_graph: f64,
    /// `max d̃_G / d_G`.
    pub max_graph_over_space: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Compares the two metric modes on random pairs of complex points; both
/// ratios must stay within `bound` (the measured bi-Lipschitz constant).
pub fn compare_modes(space: &SampledSpace, g: &NetGraph, pairs: usize, bound: f64, seed: u64) -> Result<ModeComparison> {
    let tilde = build_complex(g, MetricMode::GraphDerived, Some(space))?;
    let plain = build_complex(g, MetricMode::SpaceDerived, Some(space))?;
    let pts = tilde.sample_points(2 * pairs, seed);
    let jobs: Vec<(ComplexPoint, ComplexPoint)> = pts.chunks(2).filter(|c| c.len() == 2).map(|c| (c[0], c[1])).collect();
    let ratios = exec::map_slice(&jobs, |&(p, q)| {
        let dt = tilde.distance(p, q);
        let dg = plain.distance(p, q);
        if dt == 0.0 || !dt.is_finite() {
            None
        } else {
            Some((dg / dt, dt / dg))
        }
    });
    let mut a: f64 = 0.0;
    let mut b: f64 = 0.0;
    for (x, y) in ratios.into_iter().flatten() {
        a = a.max(x);
        b = b.max(y);
    }
    Ok(ModeComparison {
        pairs: jobs.len(),
        max_space_over_graph: a,
        max_graph_over_space: b,
        bound,
        pass: a <= bound && b <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poincare::dyadic_grid;

    fn path(n: usize) -> NetGraph {
        let adj = (0..n)
            .map(|i| {
                let mut r = Vec::new();
                if i > 0 {
                    r.push(i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        NetGraph::from_adjacency(1.0, adj, vec![1.0, 2.0, 3.0, 4.0][..n].to_vec()).unwrap()
    }

    #[test]
    fn single_edge_interval() {
        let g = path(2);
        let c = build_complex(&g, MetricMode::GraphDerived, None).unwrap();
        assert_eq!(c.edge_count(), 1);
        assert_eq!(c.edge_mass(0), 3.0);
        let p = ComplexPoint::Edge { edge: 0, t: 0.2 };
        let q = ComplexPoint::Edge { edge: 0, t: 0.7 };
        assert!((c.distance(p, q) - 0.5).abs() < 1e-15);
        let mid = ComplexPoint::Edge { edge: 0, t: 0.5 };
        assert_eq!(c.distance(ComplexPoint::Vertex(0), mid), 0.5);
        // whole edge inside a big ball
        assert_eq!(c.ball_mass(mid, 10.0).unwrap(), 3.0);
    }

    #[test]
    fn adjacent_midpoints() {
        let g = path(3);
        let c = build_complex(&g, MetricMode::GraphDerived, None).unwrap();
        let m0 = c.point_on(0, 1, 0.5).unwrap();
        let m1 = c.point_on(1, 2, 0.5).unwrap();
        assert_eq!(c.distance(m0, m1), 1.0);
        assert_eq!(c.point_on(1, 0, 1.0).unwrap(), ComplexPoint::Vertex(0));
    }

    #[test]
    fn quarter_ball_at_vertex() {
        let g = path(3);
        let c = build_complex(&g, MetricMode::GraphDerived, None).unwrap();
        let m = c.ball_mass(ComplexPoint::Vertex(1), 0.25).unwrap();
        assert!((m - 0.25 * ((2.0 + 1.0) + (2.0 + 3.0))).abs() < 1e-15);
    }

    #[test]
    fn handshake_on_grid() {
        let (_, g) = dyadic_grid(2, 6).unwrap();
        let c = build_complex(&g, MetricMode::GraphDerived, None).unwrap();
        let degrees: usize = (0..g.len()).map(|v| g.degree(v)).sum();
        assert_eq!(c.edge_count() * 2, degrees);
    }

    #[test]
    fn space_mode_uses_ambient_distance() {
        let (s, g) = dyadic_grid(2, 6).unwrap();
        let c = build_complex(&g, MetricMode::SpaceDerived, Some(&s)).unwrap();
        for (a, b) in [(0, 5), (3, 40), (12, 100)] {
            let d = c.distance(ComplexPoint::Vertex(a), ComplexPoint::Vertex(b));
            assert_eq!(d, s.distance(g.point_of(a), g.point_of(b)));
        }
        assert!(build_complex(&g, MetricMode::SpaceDerived, None).is_err());
    }

    #[test]
    fn union_of_intervals() {
        assert_eq!(union_length(&mut [(0.0, 0.3), (0.2, 0.5), (0.7, 1.0)]), 0.8);
        assert_eq!(union_length(&mut [(0.5, 0.4)]), 0.0);
    }

    #[test]
    fn linear_interpolant_is_minimal() {
        let (_, g) = dyadic_grid(2, 5).unwrap();
        let c = build_complex(&g, MetricMode::GraphDerived, None).unwrap();
        let u = VertexFunction::new(&g, (0..g.len()).map(|v| (g.coords(v)[0] * 3.0).sin()).collect()).unwrap();
        for p in [1.0, 2.0, 3.0] {
            let rep = linear_extension_energy(&c, &u, p, 20, 7).unwrap();
            assert_eq!(rep.violations, 0, "p = {p}");
            assert!(rep.min_ratio >= 1.0 - 1e-12);
        }
    }

    #[test]
    fn constant_function_has_zero_ratio() {
        let (_, g) = dyadic_grid(2, 6).unwrap();
        let c = build_complex(&g, MetricMode::GraphDerived, None).unwrap();
        let v = g.vertex_of(0).unwrap();
        let q = quadrature(&c, ComplexPoint::Vertex(v), 1.0, 1.0);
        let vals = vec![4.0; c.edge_count() * (EDGE_NODES + 1)];
        assert_eq!(pl_ratio(&q, &vals, 1.0, 1.0, c.epsilon()), 0.0);
    }
}
