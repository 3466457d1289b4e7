//! Pointed Gromov-Hausdorff conditions for a chain of one-complexes, the
//! nearest-vertex comparison maps, and the multiscale uniformity report.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::{comparability, distortion, estimate_doubling_graph, theoretical_bounds, PairPlan, SamplePlan};
use crate::complex::{ComplexPoint, MetricMode, OneComplex};
use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{build_graph, NetGraph};
use crate::net::{hausdorff_gap, nested_chain, EpsNet};
use crate::poincare::{estimate_constant_lower, PiDomain, SuitePlan};
use crate::spaces::{BallSpec, SampledSpace};

/// The endpoint of `p`'s edge within `ε/2`; exact midpoints go to the
/// lower-index endpoint.
pub fn nearest_vertex_map(c: &OneComplex<'_>, p: ComplexPoint) -> usize {
    match c.canonical(p) {
        ComplexPoint::Vertex(v) => v,
        ComplexPoint::Edge { edge, t } => {
            let (a, b) = c.edge(edge);
            if t <= c.epsilon() / 2.0 {
                a
            } else {
                b
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhLevelRecord {
    pub level: usize,
    pub epsilon: f64,
    pub base_vertex: usize,
    pub condition1_pass: bool,
    pub pairs: usize,
    pub max_metric_defect: f64,
    /// Defect over vertex pairs only; zero in the space-derived metric.
    pub max_vertex_pair_defect: f64,
    /// `2 L ε`.
    pub defect_bound: f64,
    pub within_defect_bound: bool,
    pub condition2_pass: bool,
    /// Largest distance from a sample point of `B(q, r − η)` to the image
    /// of the ball, plus the sample's own coverage gap.
    pub coverage_defect: f64,
    pub sample_gap: f64,
    pub condition3_pass: bool,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GhCheckReport {
    pub r: f64,
    pub eta: f64,
    pub l: f64,
    pub base_point: usize,
    /// First level from which every later level passes all conditions.
    pub i0: Option<usize>,
    pub levels: Vec<GhLevelRecord>,
}

/// Checks the three pointed GH conditions at every level of a chain of
/// complexes built over the same space (space-derived metric).
#[allow(clippy::too_many_arguments)]
pub fn gh_condition_check(
    space: &SampledSpace,
    levels: &[OneComplex<'_>],
    q: usize,
    r: f64,
    eta: f64,
    l: f64,
    pairs: usize,
    seed: u64,
) -> Result<GhCheckReport> {
    if !(eta > 0.0 && eta < r) {
        return Err(Error::invalid(format!("need 0 < η < r, got η = {eta}, r = {r}")));
    }
    if !(l >= 1.0) {
        return Err(Error::invalid("L must be >= 1"));
    }
    if q >= space.len() {
        return Err(Error::invalid(format!("base point {q} out of range")));
    }
    let mut bases = Vec::with_capacity(levels.len());
    for (i, c) in levels.iter().enumerate() {
        if c.mode() != MetricMode::SpaceDerived {
            return Err(Error::invalid("GH conditions are checked in the space-derived metric"));
        }
        bases.push(c.graph().vertex_of(q).ok_or(Error::NotNested { level: i })?);
    }
    let gap = space.coverage_gap().unwrap_or(0.0);
    let inner = space_ball(space, q, r - eta);
    let records = levels
        .iter()
        .enumerate()
        .map(|(i, c)| level_record(space, c, i, bases[i], q, r, eta, l, pairs, seed.wrapping_add(i as u64), &inner, gap))
        .collect::<Vec<_>>();
    let mut i0 = None;
    for k in (0..records.len()).rev() {
        if records[k].pass {
            i0 = Some(k);
        } else {
            break;
        }
    }
    Ok(GhCheckReport {
        r,
        eta,
        l,
        base_point: q,
        i0,
        levels: records,
    })
}

fn space_ball(space: &SampledSpace, q: usize, radius: f64) -> Vec<usize> {
    let mut out = Vec::new();
    if radius <= 0.0 {
        return out;
    }
    let grid = space.grid_index(radius, 0..space.len());
    space.for_each_in_ball_with(grid.as_ref(), q, radius, |z| out.push(z));
    out.sort_unstable();
    out
}

#[allow(clippy::too_many_arguments)]
fn level_record(
    space: &SampledSpace,
    c: &OneComplex<'_>,
    level: usize,
    qv: usize,
    q: usize,
    r: f64,
    eta: f64,
    l: f64,
    pairs: usize,
    seed: u64,
    inner: &[usize],
    gap: f64,
) -> GhLevelRecord {
    let g = c.graph();
    let eps = c.epsilon();
    let dist = c.point_distances(ComplexPoint::Vertex(qv));
    let condition1 = g.point_of(nearest_vertex_map(c, ComplexPoint::Vertex(qv))) == q;

    // sample points of B(q_i, r)
    let in_ball_vertices: Vec<usize> = (0..g.len()).filter(|&v| dist[v] < r).collect();
    let in_ball_edges: Vec<usize> = (0..c.edge_count())
        .filter(|&e| {
            let (a, b) = c.edge(e);
            dist[a] < r || dist[b] < r
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, vertex: bool| -> Option<ComplexPoint> {
        for _ in 0..64 {
            let p = if vertex {
                ComplexPoint::Vertex(in_ball_vertices[rng.random_range(0..in_ball_vertices.len())])
            } else {
                let e = in_ball_edges[rng.random_range(0..in_ball_edges.len())];
                c.canonical(ComplexPoint::Edge {
                    edge: e,
                    t: rng.random_range(0.0..eps),
                })
            };
            let d = match p {
                ComplexPoint::Vertex(v) => dist[v],
                ComplexPoint::Edge { edge, t } => {
                    let (a, b) = c.edge(edge);
                    (dist[a] + t).min(dist[b] + eps - t)
                }
            };
            if d < r {
                return Some(p);
            }
        }
        None
    };
    let mut jobs: Vec<(ComplexPoint, ComplexPoint, bool)> = Vec::with_capacity(pairs);
    if !in_ball_vertices.is_empty() {
        for k in 0..pairs {
            let vertex_pair = k % 2 == 0 || in_ball_edges.is_empty();
            if let (Some(x), Some(y)) = (draw(&mut rng, vertex_pair), draw(&mut rng, vertex_pair)) {
                jobs.push((x, y, vertex_pair));
            }
        }
    }
    let defects = exec::map_slice(&jobs, |&(x, y, vp)| {
        let fx = g.point_of(nearest_vertex_map(c, x));
        let fy = g.point_of(nearest_vertex_map(c, y));
        ((space.distance(fx, fy) - c.distance(x, y)).abs(), vp)
    });
    let mut max_defect: f64 = 0.0;
    let mut max_vertex: f64 = 0.0;
    for (d, vp) in defects {
        max_defect = max_defect.max(d);
        if vp {
            max_vertex = max_vertex.max(d);
        }
    }

    // image of the ball under the nearest-vertex map
    let mut image = vec![false; g.len()];
    for &v in &in_ball_vertices {
        image[v] = true;
    }
    for e in 0..c.edge_count() {
        let (a, b) = c.edge(e);
        if dist[b] + eps / 2.0 < r {
            image[a] = true;
        }
        if dist[a] + eps / 2.0 < r {
            image[b] = true;
        }
    }
    let image_points: Vec<usize> = (0..g.len()).filter(|&v| image[v]).map(|v| g.point_of(v)).collect();
    let grid = space.grid_index(eta, image_points.iter().copied());
    let cover = exec::map_slice(inner, |&z| {
        let mut best = f64::INFINITY;
        match &grid {
            Some(gi) => gi.for_each_candidate(space.point(z), eta, |w| best = best.min(space.distance(z, w))),
            None => {
                for &w in &image_points {
                    best = best.min(space.distance(z, w));
                }
            }
        }
        best
    });
    let coverage = cover.into_iter().fold(0.0, f64::max) + gap;
    let bound = 2.0 * l * eps;
    let condition2 = max_defect < eta;
    let condition3 = coverage < eta;
    GhLevelRecord {
        level,
        epsilon: eps,
        base_vertex: qv,
        condition1_pass: condition1,
        pairs: jobs.len(),
        max_metric_defect: max_defect,
        max_vertex_pair_defect: max_vertex,
        defect_bound: bound,
        within_defect_bound: max_defect <= bound,
        condition2_pass: condition2,
        coverage_defect: coverage,
        sample_gap: gap,
        condition3_pass: condition3,
        pass: condition1 && condition2 && condition3,
    }
}

/// Dyadic sublattices of a lattice space: level `k` keeps the points whose
/// integer coordinates are all divisible by `2^(fine − k)`, where the
/// lattice itself has spacing `2^-fine` relative to `epsilon0`.
pub fn dyadic_sublattice_chain(space: &SampledSpace, epsilon0: f64, levels: usize) -> Result<Vec<Arc<EpsNet>>> {
    let scale = space
        .lattice_scale()
        .ok_or_else(|| Error::invalid("dyadic sublattices need a lattice space"))?
        .to_f64();
    let ratio = epsilon0 / scale;
    let steps = ratio.log2().round();
    if !(steps >= 0.0) || (2f64.powf(steps) - ratio).abs() > 1e-9 * ratio {
        return Err(Error::invalid(format!("epsilon0 / scale = {ratio} is not a power of two")));
    }
    let steps = steps as u32;
    if levels as u32 > steps + 1 {
        return Err(Error::invalid(format!(
            "lattice too coarse: {levels} levels from epsilon0 need spacing epsilon0 / 2^{}",
            levels - 1
        )));
    }
    let mut out: Vec<Arc<EpsNet>> = Vec::with_capacity(levels);
    for k in 0..levels {
        let stride = 1i64 << (steps - k as u32);
        let members: Vec<usize> = (0..space.len())
            .filter(|&i| space.lattice_point(i).expect("lattice").iter().all(|c| c.rem_euclid(stride) == 0))
            .collect();
        let parent = out.last().cloned();
        let eps = epsilon0 / (1u64 << k) as f64;
        out.push(Arc::new(EpsNet::from_members(space, eps, members, parent)?));
    }
    Ok(out)
}

/// Knobs for [`multiscale_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleConfig {
    pub levels: usize,
    pub epsilon0: f64,
    pub seed: u64,
    pub p: f64,
    pub lambda: f64,
    pub doubling_centers: usize,
    /// Radii in units of each level's ε.
    pub radius_multiples: Vec<f64>,
    pub distortion_sources: usize,
    pub distortion_targets: usize,
    /// Poincaré ball radius in units of ε.
    pub pi_radius_multiple: f64,
    pub suite: SuitePlan,
    /// A constant is uniform when every level lies within this factor of
    /// the median over levels.
    pub drift_factor: f64,
    /// Fixed radii at which ball masses are tracked across levels.
    pub mass_radii: Vec<f64>,
    /// Doubling constant of the space measure, for the theoretical bound.
    pub c_mu: f64,
}

impl Default for MultiscaleConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            epsilon0: 0.5,
            seed: 0,
            p: 1.0,
            lambda: 2.0,
            doubling_centers: 16,
            radius_multiples: vec![1.0, 2.0, 3.0],
            distortion_sources: 8,
            distortion_targets: 32,
            pi_radius_multiple: 2.0,
            suite: SuitePlan {
                ascent_steps: 100,
                restarts: 2,
                ..SuitePlan::default()
            },
            drift_factor: 8.0,
            mass_radii: vec![0.5, 1.0],
            c_mu: 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassRecord {
    pub radius: f64,
    pub graph_mass: f64,
    pub space_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelReport {
    pub level: usize,
    pub epsilon: f64,
    pub vertices: usize,
    pub edges: usize,
    pub max_degree: usize,
    /// Hausdorff gap between the net and the space sample.
    pub h: f64,
    /// Measured bi-Lipschitz constant of `d_V` against `d_X`.
    pub l: f64,
    pub k: f64,
    pub doubling: f64,
    pub pi_constant: f64,
    pub pi_disconnected: bool,
    pub masses: Vec<MassRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionVerdict {
    pub uniform: bool,
    /// Maximum over levels (minimum for the gap condition).
    pub constant: f64,
    pub witness_level: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub gaps_shrink: ConditionVerdict,
    pub uniform_l: ConditionVerdict,
    pub uniform_k: ConditionVerdict,
    pub uniform_doubling: ConditionVerdict,
    pub uniform_poincare: ConditionVerdict,
}

impl Verdicts {
    pub fn all(&self) -> bool {
        [
            &self.gaps_shrink,
            &self.uniform_l,
            &self.uniform_k,
            &self.uniform_doubling,
            &self.uniform_poincare,
        ]
        .iter()
        .all(|v| v.uniform)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleReport {
    pub base_point: usize,
    pub certified_levels: (usize, usize),
    pub drift_factor: f64,
    pub doubling_bound: f64,
    pub levels: Vec<LevelReport>,
    pub verdicts: Verdicts,
}

/// Point of the space nearest the origin among `members` (lowest index on
/// ties); falls back to the first member for non-Euclidean samples.
pub fn origin_nearest(space: &SampledSpace, members: &[usize]) -> Option<usize> {
    if space.coords().is_empty() {
        return members.iter().copied().min();
    }
    members.iter().copied().min_by(|&a, &b| {
        let na: f64 = space.point(a).iter().map(|x| x * x).sum();
        let nb: f64 = space.point(b).iter().map(|x| x * x).sum();
        na.total_cmp(&nb).then(a.cmp(&b))
    })
}

/// Nested nets and graphs: dyadic sublattices on lattice spaces, seeded
/// greedy refinements elsewhere.
pub fn build_levels(space: &SampledSpace, cfg: &MultiscaleConfig) -> Result<Vec<(Arc<EpsNet>, NetGraph)>> {
    if cfg.levels < 2 {
        return Err(Error::invalid("multiscale analysis needs at least two levels"));
    }
    let nets = if space.lattice_scale().is_some() {
        dyadic_sublattice_chain(space, cfg.epsilon0, cfg.levels)?
    } else {
        nested_chain(space, cfg.epsilon0, cfg.levels, cfg.seed)?
    };
    let graphs = exec::map_slice(&nets, |n| build_graph(space, n));
    nets.into_iter()
        .zip(graphs)
        .map(|(n, g)| Ok((n, g?)))
        .collect()
}

/// Runs the per-level checks and reduces them to uniformity verdicts.
pub fn multiscale_report(space: &SampledSpace, cfg: &MultiscaleConfig) -> Result<MultiscaleReport> {
    let levels = build_levels(space, cfg)?;
    multiscale_from_levels(space, &levels, cfg)
}

pub fn multiscale_from_levels(space: &SampledSpace, levels: &[(Arc<EpsNet>, NetGraph)], cfg: &MultiscaleConfig) -> Result<MultiscaleReport> {
    if levels.len() < 2 {
        return Err(Error::invalid("multiscale analysis needs at least two levels"));
    }
    let q = origin_nearest(space, levels[0].0.members()).ok_or(Error::EmptyNet)?;
    for (i, (_, g)) in levels.iter().enumerate() {
        if g.vertex_of(q).is_none() {
            return Err(Error::NotNested { level: i });
        }
    }
    let reports = levels
        .iter()
        .enumerate()
        .map(|(i, (net, g))| level_report(space, net, g, i, q, cfg))
        .collect::<Result<Vec<_>>>()?;
    let bounds = theoretical_bounds(cfg.c_mu, reports.iter().map(|r| r.l).fold(1.0, f64::max))?;
    let verdicts = verdicts_from(&reports, cfg.drift_factor, bounds.c_m_bound);
    Ok(MultiscaleReport {
        base_point: q,
        certified_levels: (0, reports.len() - 1),
        drift_factor: cfg.drift_factor,
        doubling_bound: bounds.c_m_bound,
        levels: reports,
        verdicts,
    })
}

fn level_report(space: &SampledSpace, net: &EpsNet, g: &NetGraph, i: usize, q: usize, cfg: &MultiscaleConfig) -> Result<LevelReport> {
    let eps = g.epsilon();
    let seed = cfg.seed.wrapping_add(1000 * i as u64);
    let radii: Vec<f64> = cfg.radius_multiples.iter().map(|m| m * eps).collect();
    let plan = SamplePlan {
        centers: cfg.doubling_centers,
        radii: radii.clone(),
        seed,
    };
    let doubling = estimate_doubling_graph(g, &plan)?;
    let comp = comparability(space, g, &plan)?;
    let dist = distortion(
        space,
        g,
        &PairPlan {
            sources: cfg.distortion_sources,
            targets_per_source: cfg.distortion_targets,
            seed,
        },
    )?;
    let qv = g.vertex_of(q).expect("checked");
    let domain = PiDomain::graph_ball(g, qv, cfg.pi_radius_multiple * eps, cfg.lambda)?;
    let pi = estimate_constant_lower(g, &domain, cfg.p, &cfg.suite, seed)?;
    let mut masses = Vec::new();
    for &r in &cfg.mass_radii {
        let ball = g.ball(&BallSpec::new(qv, r)?);
        masses.push(MassRecord {
            radius: r,
            graph_mass: g.ball_mass(&ball)?,
            space_mass: space.ball_measure(&BallSpec::new(q, r)?)?,
        });
    }
    Ok(LevelReport {
        level: i,
        epsilon: eps,
        vertices: g.len(),
        edges: g.edge_count(),
        max_degree: g.max_degree(),
        h: hausdorff_gap(space, net)?,
        l: dist.bilipschitz,
        k: comp.k,
        doubling: doubling.max_ratio,
        pi_constant: pi.c_lower,
        pi_disconnected: pi.disconnected,
        masses,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Uniform when every value is finite, positive and within `drift` of the
/// median; the witness is the level farthest from the median.
fn uniform_verdict(values: &[f64], drift: f64, ceiling: Option<f64>, name: &str) -> ConditionVerdict {
    let max = values.iter().copied().fold(0.0, f64::max);
    let med = median(values);
    let spread = |x: f64| if x > 0.0 && med > 0.0 { (x / med).max(med / x) } else { f64::INFINITY };
    let mut witness = None;
    let mut worst = 1.0;
    for (i, &x) in values.iter().enumerate() {
        let s = if x.is_finite() { spread(x) } else { f64::INFINITY };
        let over = ceiling.is_some_and(|c| x > c);
        if (s > drift || over) && (witness.is_none() || s > worst) {
            witness = Some(i);
            worst = s;
        }
    }
    let uniform = witness.is_none();
    let detail = match (witness, ceiling) {
        (None, Some(c)) => format!("{name}: max {max} over levels, within factor {drift} of median {med} and below {c}"),
        (None, None) => format!("{name}: max {max} over levels, within factor {drift} of median {med}"),
        (Some(w), _) => format!("{name}: level {w} has {} against median {med}", values[w]),
    };
    ConditionVerdict {
        uniform,
        constant: max,
        witness_level: witness,
        detail,
    }
}

/// Recomputes the verdicts from per-level records alone.
pub fn verdicts_from(levels: &[LevelReport], drift: f64, doubling_bound: f64) -> Verdicts {
    let h: Vec<f64> = levels.iter().map(|l| l.h).collect();
    let mut gap_witness = None;
    for (i, l) in levels.iter().enumerate() {
        let grows = i > 0 && h[i] > h[i - 1];
        if grows || l.h > l.epsilon || !l.h.is_finite() {
            gap_witness = Some(i);
            break;
        }
    }
    let shrinks = h.last() < h.first();
    let gaps_shrink = ConditionVerdict {
        uniform: gap_witness.is_none() && shrinks,
        constant: h.iter().copied().fold(0.0, f64::max),
        witness_level: gap_witness.or(if shrinks { None } else { Some(levels.len() - 1) }),
        detail: format!("gaps {h:?}"),
    };
    let pick = |f: fn(&LevelReport) -> f64| levels.iter().map(f).collect::<Vec<f64>>();
    Verdicts {
        gaps_shrink,
        uniform_l: uniform_verdict(&pick(|l| l.l), drift, None, "L"),
        uniform_k: uniform_verdict(&pick(|l| l.k), drift, None, "K"),
        uniform_doubling: uniform_verdict(&pick(|l| l.doubling), drift, Some(doubling_bound), "doubling"),
        uniform_poincare: uniform_verdict(&pick(|l| l.pi_constant), drift, None, "Poincare"),
    }
}
