//! Empirical certificates for the metric and measure hypotheses: doubling
//! constants, measure comparability and bi-Lipschitz distortion, plus the
//! closed-form bounds they are compared against.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{NetGraph, UNREACHED};
use crate::spaces::{BallSpec, SampledSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DoublingTarget {
    Space,
    Graph,
    Complex,
}

/// Centers × radii over which a constant is witnessed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub centers: usize,
    pub radii: Vec<f64>,
    pub seed: u64,
}

impl SamplePlan {
    /// `count` log-spaced radii in `[lo, hi]`.
    pub fn log_spaced(centers: usize, lo: f64, hi: f64, count: usize, seed: u64) -> Self {
        Self {
            centers,
            radii: log_radii(lo, hi, count),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.radii.is_empty() || self.radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::invalid("sample plan radii must be positive and finite"));
        }
        Ok(())
    }

    fn max_radius(&self) -> f64 {
        self.radii.iter().copied().fold(0.0, f64::max)
    }
}

pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..count)
                .map(|k| {
                    if k == count - 1 {
                        hi
                    } else if k == 0 {
                        lo
                    } else {
                        (a + (b - a) * k as f64 / (count - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub center: usize,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingRow {
    pub center: usize,
    pub radius: f64,
    pub mass: f64,
    pub mass_doubled: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    pub target: DoublingTarget,
    pub sampled_centers: usize,
    pub excluded_boundary_centers: usize,
    pub radii: Vec<f64>,
    pub max_ratio: f64,
    pub theoretical_bound: Option<f64>,
    pub witness: Option<Witness>,
    #[serde(skip)]
    pub table: Vec<DoublingRow>,
}

impl DoublingReport {
    pub fn with_bound(mut self, bound: f64) -> Self {
        self.theoretical_bound = Some(bound);
        self
    }

    pub fn within_bound(&self) -> Option<bool> {
        self.theoretical_bound.map(|b| self.max_ratio <= b)
    }
}

pub(crate) fn sample_centers(candidates: Vec<usize>, k: usize, seed: u64) -> Vec<usize> {
    if candidates.len() <= k {
        return candidates;
    }
    let mut c = candidates;
    c.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    c.truncate(k);
    c.sort_unstable();
    c
}

/// Reduces per-center rows into a report (max ratio, first witness in
/// center/radius order on ties).
pub(crate) fn reduce_doubling(
    target: DoublingTarget,
    centers: usize,
    excluded: usize,
    radii: &[f64],
    rows: Vec<DoublingRow>,
) -> DoublingReport {
    let mut best: Option<&DoublingRow> = None;
    for row in &rows {
        if best.is_none_or(|b| row.ratio > b.ratio) {
            best = Some(row);
        }
    }
    DoublingReport {
        target,
        sampled_centers: centers,
        excluded_boundary_centers: excluded,
        radii: radii.to_vec(),
        max_ratio: best.map_or(1.0, |b| b.ratio),
        theoretical_bound: None,
        witness: best.map(|b| Witness {
            center: b.center,
            radius: b.radius,
        }),
        table: rows,
    }
}

/// Doubling ratios `μ(B(c, 2r)) / μ(B(c, r))` of the space measure.
pub fn estimate_doubling_space(space: &SampledSpace, plan: &SamplePlan) -> Result<DoublingReport> {
    plan.validate()?;
    let centers = sample_centers((0..space.len()).collect(), plan.centers, plan.seed);
    let mut rows = Vec::with_capacity(centers.len() * plan.radii.len());
    for &r in &plan.radii {
        let inner = space.ball_measures(&centers, r)?;
        let outer = space.ball_measures(&centers, 2.0 * r)?;
        for (k, &c) in centers.iter().enumerate() {
            if !(inner[k] > 0.0) {
                return Err(Error::ZeroMass { center: c, radius: r });
            }
            rows.push(DoublingRow {
                center: c,
                radius: r,
                mass: inner[k],
                mass_doubled: outer[k],
                ratio: outer[k] / inner[k],
            });
        }
    }
    rows.sort_by(|a, b| a.center.cmp(&b.center).then(a.radius.total_cmp(&b.radius)));
    Ok(reduce_doubling(DoublingTarget::Space, centers.len(), 0, &plan.radii, rows))
}

/// Vertices whose balls up to ambient reach `reach` are unaffected by the
/// sample boundary, plus the number excluded.
pub(crate) fn interior_vertices(g: &NetGraph, reach: f64) -> (Vec<usize>, usize) {
    let all: Vec<usize> = (0..g.len()).collect();
    let interior: Vec<usize> = all.iter().copied().filter(|&v| g.is_interior(v, reach)).collect();
    let excluded = all.len() - interior.len();
    (interior, excluded)
}

/// Graph-ball masses `m(B_V(c, r))` for each radius, from one truncated BFS.
pub(crate) fn graph_ball_masses(g: &NetGraph, center: usize, radii: &[f64]) -> Vec<f64> {
    let limits: Vec<u32> = radii.iter().map(|&r| g.hop_limit(r)).collect();
    let max = limits.iter().copied().max().unwrap_or(0);
    let levels = g.ball_levels(center, max);
    let mut by_hop = vec![0.0; max as usize + 1];
    for (v, h) in levels {
        by_hop[h as usize] += g.mass(v);
    }
    let mut cumulative = Vec::with_capacity(by_hop.len());
    let mut acc = 0.0;
    for m in by_hop {
        acc += m;
        cumulative.push(acc);
    }
    limits.iter().map(|&h| cumulative[h as usize]).collect()
}

/// Doubling ratios `m(B_V(c, 2r)) / m(B_V(c, r))` of the vertex masses.
/// Centers whose doubled balls could reach the sample boundary are excluded.
pub fn estimate_doubling_graph(g: &NetGraph, plan: &SamplePlan) -> Result<DoublingReport> {
    plan.validate()?;
    let reach = 6.0 * plan.max_radius() + 3.0 * g.epsilon();
    let (interior, excluded) = interior_vertices(g, reach);
    if interior.is_empty() {
        return Err(Error::Precondition(format!(
            "no interior centers for radii up to {} (sample too small)",
            plan.max_radius()
        )));
    }
    let centers = sample_centers(interior, plan.centers, plan.seed);
    let mut doubled: Vec<f64> = plan.radii.clone();
    doubled.extend(plan.radii.iter().map(|r| 2.0 * r));
    let k = plan.radii.len();
    let per_center = exec::map_slice(&centers, |&c| graph_ball_masses(g, c, &doubled));
    let mut rows = Vec::with_capacity(centers.len() * k);
    for (&c, masses) in centers.iter().zip(per_center) {
        for (j, &r) in plan.radii.iter().enumerate() {
            rows.push(DoublingRow {
                center: c,
                radius: r,
                mass: masses[j],
                mass_doubled: masses[k + j],
                ratio: masses[k + j] / masses[j],
            });
        }
    }
    Ok(reduce_doubling(DoublingTarget::Graph, centers.len(), excluded, &plan.radii, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    /// Bound on the number of net points in a `2ε` ball, `C_μ^4`.
    pub degree_bound: f64,
    /// `⌈log2(L + 1)⌉`.
    pub alpha: u32,
    /// `C_μ^(8 + 2α)`.
    pub c_m_bound: f64,
}

pub fn theoretical_bounds(c_mu: f64, l: f64) -> Result<TheoreticalBounds> {
    if !(c_mu >= 1.0) || !(l >= 1.0) {
        return Err(Error::invalid(format!("need C_mu >= 1 and L >= 1, got ({c_mu}, {l})")));
    }
    let alpha = (l + 1.0).log2().ceil() as u32;
    Ok(TheoreticalBounds {
        degree_bound: c_mu.powi(4),
        alpha,
        c_m_bound: c_mu.powi(8 + 2 * alpha as i32),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    /// Smallest observed `m(B_V) / μ(B_X)`.
    pub k_lower: f64,
    /// Largest observed `m(B_V) / μ(B_X)`.
    pub k_upper: f64,
    /// `max(k_upper, 1 / k_lower)`.
    pub k: f64,
    pub radii_tested: Vec<f64>,
    pub scale_floor: f64,
    pub sampled_centers: usize,
    pub witness_lower: Option<Witness>,
    pub witness_upper: Option<Witness>,
}

/// Compares graph-ball masses with space-ball measures at radii `>= ε`.
pub fn comparability(space: &SampledSpace, g: &NetGraph, plan: &SamplePlan) -> Result<ComparabilityReport> {
    plan.validate()?;
    let eps = g.epsilon();
    if let Some(&r) = plan.radii.iter().find(|&&r| r < eps * (1.0 - 1e-12)) {
        return Err(Error::BelowScaleFloor { radius: r, epsilon: eps });
    }
    let reach = 3.0 * plan.max_radius() + 3.0 * eps;
    let (interior, _) = interior_vertices(g, reach);
    if interior.is_empty() {
        return Err(Error::Precondition("no interior centers for comparability".into()));
    }
    let centers = sample_centers(interior, plan.centers, plan.seed);
    let points: Vec<usize> = centers.iter().map(|&v| g.point_of(v)).collect();
    let graph_masses = exec::map_slice(&centers, |&c| graph_ball_masses(g, c, &plan.radii));
    let mut lo = (f64::INFINITY, None);
    let mut hi = (0.0f64, None);
    for (j, &r) in plan.radii.iter().enumerate() {
        let mu = space.ball_measures(&points, r)?;
        for (k, &c) in centers.iter().enumerate() {
            if !(mu[k] > 0.0) {
                return Err(Error::ZeroMass { center: c, radius: r });
            }
            let ratio = graph_masses[k][j] / mu[k];
            let w = Some(Witness { center: c, radius: r });
            if ratio < lo.0 {
                lo = (ratio, w);
            }
            if ratio > hi.0 {
                hi = (ratio, w);
            }
        }
    }
    Ok(ComparabilityReport {
        k_lower: lo.0,
        k_upper: hi.0,
        k: hi.0.max(1.0 / lo.0),
        radii_tested: plan.radii.clone(),
        scale_floor: eps,
        sampled_centers: centers.len(),
        witness_lower: lo.1,
        witness_upper: hi.1,
    })
}

/// Pair sampling for distortion estimates: BFS from `sources` random
/// vertices, `targets_per_source` random targets each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPlan {
    pub sources: usize,
    pub targets_per_source: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    /// `max(d_V / d_X) - 1`, clipped below at 1.
    pub l_estimate: f64,
    /// Smallest `L` with `1/L <= d_X / d_V <= L` on the sampled pairs.
    pub bilipschitz: f64,
    pub max_dv_over_dx: f64,
    pub max_dx_over_dv: f64,
    pub max_ratio_pair: Option<(usize, usize)>,
    pub min_ratio_pair: Option<(usize, usize)>,
    pub connected_fraction: f64,
    pub pairs_sampled: usize,
    /// Pairs with `d_X > 3 d_V` (must be zero).
    pub upper_bound_violations: usize,
    pub declared_l: Option<f64>,
    /// Whether `max(d_V / d_X) <= declared_l + 1`.
    pub declared_consistent: Option<bool>,
}

/// `d_X(x, y) <= 3 d_V(x, y)` decided exactly on lattices and with no
/// tolerance elsewhere.
pub(crate) fn within_three_hops(space: &SampledSpace, x: usize, y: usize, hops: u32, eps: f64) -> bool {
    let bound = 3.0 * hops as f64 * eps;
    let t = space.threshold(bound);
    if t.is_exact() {
        space.cmp_threshold(x, y, &t) != std::cmp::Ordering::Greater
    } else {
        space.distance(x, y) <= bound
    }
}

pub fn distortion(space: &SampledSpace, g: &NetGraph, plan: &PairPlan) -> Result<DistortionReport> {
    if g.len() < 2 {
        return Err(Error::Precondition("distortion needs at least two vertices".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let all: Vec<usize> = (0..g.len()).collect();
    let sources: Vec<usize> = (0..plan.sources).map(|_| *all.choose(&mut rng).unwrap()).collect();
    let targets: Vec<Vec<usize>> = sources
        .iter()
        .map(|&s| {
            (0..plan.targets_per_source)
                .map(|_| loop {
                    let t = *all.choose(&mut rng).unwrap();
                    if t != s {
                        break t;
                    }
                })
                .collect()
        })
        .collect();
    let eps = g.epsilon();
    let jobs: Vec<(usize, &Vec<usize>)> = sources.iter().copied().zip(targets.iter()).collect();
    let per_source = exec::map_slice(&jobs, |&(s, ts)| {
        let hops = g.hops_from(s, None);
        ts.iter()
            .map(|&t| {
                let h = hops[t];
                if h == UNREACHED {
                    return (s, t, None);
                }
                let (px, py) = (g.point_of(s), g.point_of(t));
                let dx = space.distance(px, py);
                let dv = h as f64 * eps;
                let ok = within_three_hops(space, px, py, h, eps);
                (s, t, Some((dv, dx, ok)))
            })
            .collect::<Vec<_>>()
    });
    let mut pairs = 0usize;
    let mut connected = 0usize;
    let mut violations = 0usize;
    let mut max_vx = (0.0f64, None);
    let mut max_xv = (0.0f64, None);
    for (s, t, r) in per_source.into_iter().flatten() {
        pairs += 1;
        let Some((dv, dx, ok)) = r else { continue };
        connected += 1;
        if !ok {
            violations += 1;
        }
        if dv / dx > max_vx.0 {
            max_vx = (dv / dx, Some((s, t)));
        }
        if dx / dv > max_xv.0 {
            max_xv = (dx / dv, Some((s, t)));
        }
    }
    let l_estimate = (max_vx.0 - 1.0).max(1.0);
    let declared = space.quasiconvexity_l();
    Ok(DistortionReport {
        l_estimate,
        bilipschitz: max_vx.0.max(max_xv.0).max(1.0),
        max_dv_over_dx: max_vx.0,
        max_dx_over_dv: max_xv.0,
        max_ratio_pair: max_vx.1,
        min_ratio_pair: max_xv.1,
        connected_fraction: if pairs == 0 { 0.0 } else { connected as f64 / pairs as f64 },
        pairs_sampled: pairs,
        upper_bound_violations: violations,
        declared_l: declared,
        declared_consistent: declared.map(|l| max_vx.0 <= l + 1.0),
    })
}

/// Single-ball helper: `m(B_V(c, r))`.
pub fn graph_ball_mass(g: &NetGraph, ball: &BallSpec) -> f64 {
    graph_ball_masses(g, ball.center, &[ball.radius])[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;
    use crate::net::build_maximal_net;
    use crate::spaces::Rational;

    fn dyadic(k: u32, extent: i64) -> (SampledSpace, NetGraph) {
        let s = SampledSpace::euclidean_lattice(2, Rational::dyadic(k), extent).unwrap();
        let net = build_maximal_net(&s, Rational::dyadic(k).to_f64(), 0).unwrap();
        let g = build_graph(&s, &net).unwrap();
        (s, g)
    }

    #[test]
    fn plane_lebesgue_doubles_by_four() {
        let s = SampledSpace::euclidean_lattice(2, Rational::dyadic(1), 4).unwrap();
        let r = estimate_doubling_space(&s, &SamplePlan::log_spaced(10, 0.1, 3.0, 5, 1)).unwrap();
        assert!(r.table.iter().all(|row| row.ratio == 4.0));
        assert_eq!(r.max_ratio, 4.0);
    }

    #[test]
    fn bounds_formulae() {
        let b = theoretical_bounds(4.0, 1.0).unwrap();
        assert_eq!((b.degree_bound, b.alpha, b.c_m_bound), (256.0, 1, 4f64.powi(10)));
        let b = theoretical_bounds(1.0, 1.0).unwrap();
        assert_eq!((b.degree_bound, b.c_m_bound), (1.0, 1.0));
        let b = theoretical_bounds(4.0, 3.0).unwrap();
        assert_eq!((b.alpha, b.c_m_bound), (2, 4f64.powi(12)));
        assert!(theoretical_bounds(0.5, 1.0).is_err());
        assert!(theoretical_bounds(4.0, 0.9).is_err());
    }

    #[test]
    fn dyadic_graph_doubling_is_bounded() {
        let (_, g) = dyadic(2, 40);
        let eps = g.epsilon();
        let plan = SamplePlan::log_spaced(16, eps, 4.0 * eps, 5, 3);
        let r = estimate_doubling_graph(&g, &plan).unwrap();
        assert!(r.max_ratio >= 1.0);
        assert!(r.max_ratio <= 7128.0);
        assert!(r.excluded_boundary_centers > 0);
    }

    #[test]
    fn isolated_component_does_not_grow() {
        // a tight cluster far from a second cluster
        let s = SampledSpace::from_points(1, vec![0.0, 1.0, 100.0, 101.0, 102.0], None, "two").unwrap();
        let net = build_maximal_net(&s, 1.0, 0).unwrap();
        let g = build_graph(&s, &net).unwrap();
        let c = g.vertex_of(0).unwrap();
        let plan = SamplePlan {
            centers: 5,
            radii: vec![2.0],
            seed: 0,
        };
        let r = estimate_doubling_graph(&g, &plan).unwrap();
        let row = r.table.iter().find(|row| row.center == c).unwrap();
        assert_eq!(row.ratio, 1.0);
    }

    #[test]
    fn comparability_at_epsilon_is_one() {
        let (s, g) = dyadic(2, 16);
        let eps = g.epsilon();
        let plan = SamplePlan {
            centers: 8,
            radii: vec![eps],
            seed: 0,
        };
        let r = comparability(&s, &g, &plan).unwrap();
        assert_eq!((r.k_lower, r.k_upper, r.k), (1.0, 1.0, 1.0));
        let bad = SamplePlan {
            centers: 8,
            radii: vec![eps / 2.0],
            seed: 0,
        };
        assert!(matches!(comparability(&s, &g, &bad), Err(Error::BelowScaleFloor { .. })));
    }

    #[test]
    fn comparability_on_grid_is_finite() {
        let (s, g) = dyadic(2, 40);
        let eps = g.epsilon();
        let plan = SamplePlan {
            centers: 8,
            radii: vec![2.0 * eps, 4.0 * eps, 8.0 * eps],
            seed: 0,
        };
        let r = comparability(&s, &g, &plan).unwrap();
        assert!(r.k.is_finite() && r.k >= 1.0);
    }

    #[test]
    fn distortion_on_grid() {
        let (s, g) = dyadic(1, 12);
        let r = distortion(
            &s,
            &g,
            &PairPlan {
                sources: 10,
                targets_per_source: 30,
                seed: 5,
            },
        )
        .unwrap();
        assert_eq!(r.upper_bound_violations, 0);
        assert!(r.max_dx_over_dv <= 3.0);
        assert_eq!(r.connected_fraction, 1.0);
        assert!(r.l_estimate >= 1.0 && r.l_estimate.is_finite());
        assert_eq!(r.declared_consistent, Some(true));
    }

    #[test]
    fn single_edge_ratios() {
        let s = SampledSpace::from_points(1, vec![0.0, 2.0], None, "pair").unwrap();
        let net = build_maximal_net(&s, 1.0, 0).unwrap();
        let g = build_graph(&s, &net).unwrap();
        let r = distortion(
            &s,
            &g,
            &PairPlan {
                sources: 1,
                targets_per_source: 1,
                seed: 0,
            },
        )
        .unwrap();
        assert_eq!(r.max_dv_over_dx, 0.5);
        assert_eq!(r.max_dx_over_dv, 2.0);
    }
}
