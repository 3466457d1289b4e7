//! Discrete gradients and the (1,p)-Poincaré inequality on net graphs.
//!
//! Both sides of the inequality are evaluated on a ball `B` and its
//! inflation `λB`. Best constants are bracketed three ways: test-function
//! suites give certified lower bounds, an extreme-point enumeration gives the
//! exact constant at `p = 1` on tiny instances, and a quadratic relaxation
//! gives a certified upper bound for `p >= 2`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{build_graph, NetGraph, VertexFunction, UNREACHED};
use crate::net::EpsNet;
use crate::spaces::{BallSpec, Rational, SampledSpace};

/// Largest `|λB|` accepted by [`exact_constant_p1_tiny`].
pub const ORACLE_LIMIT: usize = 6;
const ORACLE_MAX_SUBSETS: u64 = 2_000_000;
/// Largest variable count for the dense p = 2 upper bound.
pub const UPPER_BOUND_LIMIT: usize = 600;
/// The grid constant the chaining argument produces.
pub const GRID_PI_BOUND: f64 = 256.0;

/// `|grad u|(a) = Σ_{b ∼ a} |u(b) − u(a)| / ε`.
pub fn discrete_gradient(g: &NetGraph, u: &VertexFunction, a: usize) -> f64 {
    let u = u.values();
    let ua = u[a];
    g.neighbors(a).iter().map(|&b| (u[b] - ua).abs()).sum::<f64>() / g.epsilon()
}

/// A ball `B`, its inflation `λB` and the radius `r` scaling the right side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiDomain {
    pub ball: Vec<usize>,
    pub inflated: Vec<usize>,
    pub radius: f64,
    pub lambda: f64,
    pub center: Option<usize>,
}

impl PiDomain {
    /// `B = B_V(center, r)` and `λB = B_V(center, λr)`.
    pub fn graph_ball(g: &NetGraph, center: usize, radius: f64, lambda: f64) -> Result<Self> {
        if center >= g.len() {
            return Err(Error::invalid(format!("center {center} out of range")));
        }
        if !(lambda >= 1.0) {
            return Err(Error::invalid(format!("lambda must be >= 1, got {lambda}")));
        }
        let ball = g.ball(&BallSpec::new(center, radius)?);
        let inflated = g.ball(&BallSpec::new(center, lambda * radius)?);
        Ok(Self {
            ball,
            inflated,
            radius,
            lambda,
            center: Some(center),
        })
    }

    /// Explicit vertex sets, e.g. a Euclidean ball of net points.
    pub fn from_sets(g: &NetGraph, ball: Vec<usize>, inflated: Vec<usize>, radius: f64, lambda: f64) -> Result<Self> {
        let mut ball = ball;
        let mut inflated = inflated;
        ball.sort_unstable();
        ball.dedup();
        inflated.sort_unstable();
        inflated.dedup();
        if ball.is_empty() || inflated.is_empty() {
            return Err(Error::EmptySet);
        }
        if let Some(&v) = ball.iter().chain(&inflated).find(|&&v| v >= g.len()) {
            return Err(Error::invalid(format!("vertex {v} out of range")));
        }
        if !(radius > 0.0) || !(lambda >= 1.0) {
            return Err(Error::invalid("radius must be positive and lambda >= 1"));
        }
        Ok(Self {
            ball,
            inflated,
            radius,
            lambda,
            center: None,
        })
    }

    /// Splits `λB` into connected components of its induced subgraph. Each
    /// part keeps the ball vertices it contains; parts without any are
    /// dropped.
    pub fn components(&self, g: &NetGraph) -> Vec<PiDomain> {
        let mut label: std::collections::HashMap<usize, usize> = self.inflated.iter().map(|&v| (v, usize::MAX)).collect();
        let mut parts: Vec<Vec<usize>> = Vec::new();
        for &s in &self.inflated {
            if label[&s] != usize::MAX {
                continue;
            }
            let id = parts.len();
            label.insert(s, id);
            let mut members = vec![s];
            let mut stack = vec![s];
            while let Some(a) = stack.pop() {
                for &b in g.neighbors(a) {
                    if label.get(&b) == Some(&usize::MAX) {
                        label.insert(b, id);
                        members.push(b);
                        stack.push(b);
                    }
                }
            }
            members.sort_unstable();
            parts.push(members);
        }
        let mut out = Vec::new();
        for (id, inflated) in parts.into_iter().enumerate() {
            let ball: Vec<usize> = self.ball.iter().copied().filter(|v| label.get(v) == Some(&id)).collect();
            if ball.is_empty() {
                continue;
            }
            out.push(PiDomain {
                ball,
                inflated,
                radius: self.radius,
                lambda: self.lambda,
                center: self.center,
            });
        }
        out
    }
}

/// Local view of one domain: variables live on `W = λB ∪ N(λB)`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluator {
    /// Global id of each local variable; `λB` comes first.
    pub(crate) vars: Vec<usize>,
    ball: Vec<usize>,
    ball_w: Vec<f64>,
    infl_w: Vec<f64>,
    /// Local neighbor lists of the `λB` variables.
    nbrs: Vec<Vec<usize>>,
    eps: f64,
    radius: f64,
}

impl Evaluator {
    pub(crate) fn new(g: &NetGraph, d: &PiDomain) -> Self {
        let mut local: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
        let mut vars = Vec::new();
        for &v in &d.inflated {
            local.insert(v, vars.len());
            vars.push(v);
        }
        for &v in &d.inflated {
            for &b in g.neighbors(v) {
                local.entry(b).or_insert_with(|| {
                    vars.push(b);
                    vars.len() - 1
                });
            }
        }
        let infl_mass: f64 = d.inflated.iter().map(|&v| g.mass(v)).sum();
        let ball_mass: f64 = d.ball.iter().map(|&v| g.mass(v)).sum();
        let ball: Vec<usize> = d.ball.iter().map(|v| match local.get(v) {
            Some(&i) => i,
            None => {
                // ball vertex outside λB: give it a variable anyway
                vars.push(*v);
                vars.len() - 1
            }
        }).collect();
        Self {
            ball_w: d.ball.iter().map(|&v| g.mass(v) / ball_mass).collect(),
            infl_w: d.inflated.iter().map(|&v| g.mass(v) / infl_mass).collect(),
            nbrs: d.inflated.iter().map(|&v| g.neighbors(v).iter().map(|b| local[b]).collect()).collect(),
            vars,
            ball,
            eps: g.epsilon(),
            radius: d.radius,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.vars.len()
    }

    pub(crate) fn gather(&self, u: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&v| u[v]).collect()
    }

    /// `(lhs, lhs_double)`. Both use the same inner differences so that
    /// `lhs <= lhs_double` holds in floating point, not just in exact
    /// arithmetic.
    pub(crate) fn lhs_pair(&self, u: &[f64]) -> (f64, f64) {
        let mut lhs = 0.0;
        let mut dbl = 0.0;
        for (&x, &wx) in self.ball.iter().zip(&self.ball_w) {
            let ux = u[x];
            let mut a = 0.0;
            let mut b = 0.0;
            for (&y, &wy) in self.ball.iter().zip(&self.ball_w) {
                let d = ux - u[y];
                a += wy * d;
                b += wy * d.abs();
            }
            lhs += wx * a.abs();
            dbl += wx * b;
        }
        (lhs, dbl)
    }

    pub(crate) fn lhs(&self, u: &[f64]) -> f64 {
        self.lhs_pair(u).0
    }

    fn gradients(&self, u: &[f64]) -> Vec<f64> {
        self.nbrs
            .iter()
            .enumerate()
            .map(|(a, nb)| nb.iter().map(|&b| (u[b] - u[a]).abs()).sum::<f64>() / self.eps)
            .collect()
    }

    /// `r · (mean_{λB} |grad u|^p)^{1/p}`, as a power mean of gradients
    /// normalized by their maximum so that it is monotone in `p` in floating
    /// point whenever the gradient is constant.
    pub(crate) fn rhs(&self, u: &[f64], p: f64) -> f64 {
        let grads = self.gradients(u);
        let gmax = grads.iter().copied().fold(0.0, f64::max);
        if gmax == 0.0 {
            return 0.0;
        }
        let int_p = (p.fract() == 0.0 && p <= 8.0).then_some(p as i32);
        let s: f64 = grads
            .iter()
            .zip(&self.infl_w)
            .map(|(&gr, &w)| {
                let t = gr / gmax;
                w * match int_p {
                    Some(k) => t.powi(k),
                    None => t.powf(p),
                }
            })
            .sum::<f64>()
            .min(1.0);
        let mean = if p == 1.0 { s } else { s.powf(1.0 / p) };
        self.radius * gmax * mean
    }

    /// `lhs / rhs`; zero when `lhs = 0`, infinite when only `rhs` vanishes.
    pub(crate) fn ratio(&self, u: &[f64], p: f64) -> f64 {
        let l = self.lhs(u);
        if l == 0.0 {
            return 0.0;
        }
        let r = self.rhs(u, p);
        if r == 0.0 {
            f64::INFINITY
        } else {
            l / r
        }
    }

    /// Undirected edges with at least one endpoint in `λB`, as local pairs.
    fn active_edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<(usize, usize)> = self
            .nbrs
            .iter()
            .enumerate()
            .flat_map(|(a, nb)| nb.iter().map(move |&b| (a.min(b), a.max(b))))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }
}

/// Both sides of the inequality for one function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiSides {
    /// `⨏_B |u − u_B| dm`.
    pub lhs: f64,
    /// `⨏_B ⨏_B |u(x) − u(y)| dm dm`.
    pub lhs_double: f64,
    /// `r (⨏_{λB} |grad u|^p dm)^{1/p}`.
    pub rhs: f64,
    /// `rhs = 0` while `lhs > 0`; only possible when `λB` is disconnected.
    pub violated: bool,
}

impl PiSides {
    pub fn ratio(&self) -> f64 {
        if self.lhs == 0.0 {
            0.0
        } else if self.rhs == 0.0 {
            f64::INFINITY
        } else {
            self.lhs / self.rhs
        }
    }
}

pub fn pi_sides(g: &NetGraph, domain: &PiDomain, p: f64, u: &VertexFunction) -> Result<PiSides> {
    check_p(p)?;
    let ev = Evaluator::new(g, domain);
    let local = ev.gather(u.values());
    let (lhs, lhs_double) = ev.lhs_pair(&local);
    let rhs = ev.rhs(&local, p);
    Ok(PiSides {
        lhs,
        lhs_double,
        rhs,
        violated: rhs == 0.0 && lhs > 0.0,
    })
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::invalid(format!("p must be a finite real >= 1, got {p}")));
    }
    Ok(())
}

/// Which test functions [`estimate_constant_lower`] tries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuitePlan {
    pub coordinates: bool,
    pub distance_centers: usize,
    /// Random ±1 functions; all sign patterns are used instead when
    /// `|λB ∪ N(λB)| <= 10`.
    pub random_signs: usize,
    pub gaussians: usize,
    pub ascent_steps: usize,
    pub restarts: usize,
}

impl Default for SuitePlan {
    fn default() -> Self {
        Self {
            coordinates: true,
            distance_centers: 8,
            random_signs: 32,
            gaussians: 16,
            ascent_steps: 200,
            restarts: 4,
        }
    }
}

impl SuitePlan {
    /// Seed functions only, no ascent.
    pub fn seeds_only(mut self) -> Self {
        self.ascent_steps = 0;
        self.restarts = 0;
        self
    }
}

/// One evaluated test function (local values on its component).
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub label: String,
    pub component: usize,
    pub values: Vec<f64>,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareEstimate {
    pub p: f64,
    pub lambda: f64,
    pub radius: f64,
    pub center: Option<usize>,
    pub ball_size: usize,
    pub inflated_size: usize,
    pub components: usize,
    pub disconnected: bool,
    /// Best ratio found; a certified lower bound on the optimal constant.
    pub c_lower: f64,
    pub c_exact: Option<f64>,
    /// Certified upper bound from the quadratic relaxation; only valid for
    /// `p >= 2` and only computed for small domains.
    pub c_upper: Option<f64>,
    /// `(vertex, value)` pairs of the best function.
    pub argmax: Vec<(usize, f64)>,
    pub argmax_label: String,
    pub functions_evaluated: usize,
    pub violations: Vec<String>,
    #[serde(skip)]
    pub suite: Vec<SuiteEntry>,
}

impl PoincareEstimate {
    /// Adds the exact `p = 1` constant when the domain is small enough.
    pub fn with_oracle(mut self, g: &NetGraph, domain: &PiDomain) -> Result<Self> {
        self.c_exact = Some(exact_constant_p1_tiny(g, domain)?);
        Ok(self)
    }

    pub fn max_suite_ratio(&self) -> f64 {
        self.suite.iter().map(|e| e.ratio).filter(|r| r.is_finite()).fold(0.0, f64::max)
    }
}

fn seed_functions(
    g: &NetGraph,
    ev: &Evaluator,
    domain: &PiDomain,
    plan: &SuitePlan,
    rng: &mut ChaCha8Rng,
) -> Vec<(String, Vec<f64>)> {
    let n = ev.len();
    let mut out: Vec<(String, Vec<f64>)> = Vec::new();
    if plan.coordinates && g.has_coords() {
        for d in 0..g.dim() {
            out.push((format!("coordinate-{d}"), ev.vars.iter().map(|&v| g.coords(v)[d]).collect()));
        }
    }
    let mut centers: Vec<usize> = domain.center.into_iter().collect();
    for _ in 0..plan.distance_centers.saturating_sub(centers.len()) {
        centers.push(domain.inflated[rng.random_range(0..domain.inflated.len())]);
    }
    centers.truncate(plan.distance_centers);
    for c in centers {
        let hops = g.hops_from(c, None);
        let cap = ev.vars.iter().map(|&v| hops[v]).filter(|&h| h != UNREACHED).max().unwrap_or(0) + 1;
        let vals = ev.vars.iter().map(|&v| if hops[v] == UNREACHED { cap } else { hops[v] } as f64 * g.epsilon()).collect();
        out.push((format!("distance-from-{c}"), vals));
    }
    if n <= 10 {
        for mask in 0u32..(1 << n.saturating_sub(1)) {
            let vals: Vec<f64> = (0..n).map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 }).collect();
            out.push((format!("signs-{mask}"), vals));
        }
    } else {
        for k in 0..plan.random_signs {
            let vals = (0..n).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
            out.push((format!("random-signs-{k}"), vals));
        }
    }
    for k in 0..plan.gaussians {
        let vals = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        out.push((format!("gaussian-{k}"), vals));
    }
    out
}

/// Randomized coordinate ascent on the ratio from `start`.
fn ascend(ev: &Evaluator, p: f64, start: &[f64], steps: usize, seed: u64) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = start.to_vec();
    let mut best = ev.ratio(&u, p);
    let range = {
        let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if hi > lo { hi - lo } else { 1.0 }
    };
    let mut sigma = 0.25 * range;
    for _ in 0..steps {
        let i = rng.random_range(0..u.len());
        let old = u[i];
        let mut improved = false;
        for delta in [sigma, -sigma] {
            u[i] = old + delta;
            let r = ev.ratio(&u, p);
            if r.is_finite() && r > best {
                best = r;
                improved = true;
                break;
            }
        }
        if !improved {
            u[i] = old;
        }
        sigma *= 0.985;
    }
    (u, best)
}

/// Maximizes `lhs / rhs` over a test-function suite plus coordinate ascent.
pub fn estimate_constant_lower(g: &NetGraph, domain: &PiDomain, p: f64, plan: &SuitePlan, seed: u64) -> Result<PoincareEstimate> {
    estimate_constant_lower_with(g, domain, p, plan, seed, &[])
}

/// As [`estimate_constant_lower`], also evaluating caller-supplied functions.
pub fn estimate_constant_lower_with(
    g: &NetGraph,
    domain: &PiDomain,
    p: f64,
    plan: &SuitePlan,
    seed: u64,
    extra: &[VertexFunction],
) -> Result<PoincareEstimate> {
    check_p(p)?;
    let parts = domain.components(g);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut suite: Vec<SuiteEntry> = Vec::new();
    let mut violations = Vec::new();
    let mut best: Option<(f64, usize, usize)> = None; // ratio, entry, component
    let mut evaluators = Vec::with_capacity(parts.len());
    for (ci, part) in parts.iter().enumerate() {
        let ev = Evaluator::new(g, part);
        let mut seeds = seed_functions(g, &ev, part, plan, &mut rng);
        for (k, f) in extra.iter().enumerate() {
            seeds.push((format!("supplied-{k}"), ev.gather(f.values())));
        }
        let ratios = exec::map_slice(&seeds, |(_, u)| ev.ratio(u, p));
        let first = suite.len();
        for ((label, values), ratio) in seeds.into_iter().zip(ratios) {
            suite.push(SuiteEntry {
                label,
                component: ci,
                values,
                ratio,
            });
        }
        // ascent from the best distinct seeds
        let mut order: Vec<usize> = (first..suite.len()).filter(|&k| suite[k].ratio.is_finite()).collect();
        order.sort_by(|&a, &b| suite[b].ratio.total_cmp(&suite[a].ratio).then(a.cmp(&b)));
        order.truncate(plan.restarts);
        if plan.ascent_steps > 0 {
            let starts: Vec<(usize, Vec<f64>)> = order.iter().map(|&k| (k, suite[k].values.clone())).collect();
            let base = rng.random::<u64>();
            let runs = exec::map_slice(&starts, |(k, u)| ascend(&ev, p, u, plan.ascent_steps, base ^ *k as u64));
            for ((k, _), (values, ratio)) in starts.iter().zip(runs) {
                suite.push(SuiteEntry {
                    label: format!("ascent-from-{}", suite[*k].label),
                    component: ci,
                    values,
                    ratio,
                });
            }
        }
        for (k, entry) in suite.iter().enumerate().skip(first) {
            let r = entry.ratio;
            if r.is_infinite() {
                violations.push(format!(
                    "PI violated at this ball: function constant-gradient but nonconstant ({})",
                    entry.label
                ));
                continue;
            }
            if best.is_none_or(|(b, _, _)| r > b) {
                best = Some((r, k, ci));
            }
        }
        evaluators.push(ev);
    }
    let (c_lower, argmax, argmax_label) = match best {
        Some((r, k, ci)) => (
            r,
            evaluators[ci].vars.iter().copied().zip(suite[k].values.iter().copied()).collect(),
            suite[k].label.clone(),
        ),
        None => (0.0, Vec::new(), String::new()),
    };
    let c_upper = if p >= 2.0 { upper_bound_p2(g, domain).ok().flatten() } else { None };
    Ok(PoincareEstimate {
        p,
        lambda: domain.lambda,
        radius: domain.radius,
        center: domain.center,
        ball_size: domain.ball.len(),
        inflated_size: domain.inflated.len(),
        components: parts.len(),
        disconnected: parts.len() > 1,
        c_lower,
        c_exact: None,
        c_upper,
        argmax,
        argmax_label,
        functions_evaluated: suite.len(),
        violations,
        suite,
    })
}

/// Iterates over all `k`-subsets of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    acc
}

/// Exact best constant at `p = 1` for `|λB| <= 6`.
///
/// After normalizing `u_B = 0` the feasible set `{⨏_{λB} |grad u| <= 1/r}`
/// is a polytope and `lhs` is convex, so the maximum sits at an extreme
/// point. Extreme points are the one-dimensional solution sets of square
/// systems made of the gauge row and `|W| − 2` edge equalities
/// `u(b) = u(a)`; every such system is solved and the best ratio returned.
/// Disconnected `λB` is handled per component and the maximum returned.
pub fn exact_constant_p1_tiny(g: &NetGraph, domain: &PiDomain) -> Result<f64> {
    Ok(exact_p1_maximizer(g, domain)?.0)
}

/// [`exact_constant_p1_tiny`] together with a maximizing function (zero
/// outside the maximizing component's variables).
pub fn exact_p1_maximizer(g: &NetGraph, domain: &PiDomain) -> Result<(f64, VertexFunction)> {
    if domain.inflated.len() > ORACLE_LIMIT {
        return Err(Error::OracleTooLarge {
            size: domain.inflated.len(),
            limit: ORACLE_LIMIT,
        });
    }
    let mut best: f64 = 0.0;
    let mut values = vec![0.0; g.len()];
    for part in domain.components(g) {
        let ev = Evaluator::new(g, &part);
        let n = ev.len();
        if n < 2 {
            continue;
        }
        let edges = ev.active_edges();
        let k = n - 2;
        if binomial(edges.len(), k) > ORACLE_MAX_SUBSETS {
            return Err(Error::OracleTooLarge {
                size: n,
                limit: ORACLE_LIMIT,
            });
        }
        let mut gauge = vec![0.0; n];
        for (&x, &w) in ev.ball.iter().zip(&ev.ball_w) {
            gauge[x] += w;
        }
        for_each_subset(edges.len(), k, |chosen| {
            let mut m = DMatrix::<f64>::zeros(n, n);
            for (row, &e) in chosen.iter().enumerate() {
                let (a, b) = edges[e];
                m[(row, a)] = -1.0;
                m[(row, b)] = 1.0;
            }
            for (j, &w) in gauge.iter().enumerate() {
                m[(k, j)] = w;
            }
            // last row stays zero: the system is square with a 1-dim kernel
            let svd = m.svd(false, true);
            let v_t = svd.v_t.expect("requested");
            let sv = &svd.singular_values;
            let smax = sv.iter().copied().fold(0.0, f64::max);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
            if sv[order[1]] <= 1e-10 * smax {
                return; // rank deficient: kernel has dimension > 1
            }
            let x: Vec<f64> = v_t.row(order[0]).iter().copied().collect();
            let r = ev.ratio(&x, 1.0);
            if r.is_finite() && r > best {
                best = r;
                values.iter_mut().for_each(|v| *v = 0.0);
                for (&vertex, &xv) in ev.vars.iter().zip(&x) {
                    values[vertex] = xv;
                }
            }
        });
    }
    Ok((best, VertexFunction::new(g, values)?))
}

/// Certified upper bound on the best constant for every `p >= 2`.
///
/// Uses `⨏_B |u − u_B| <= (Var_B u)^{1/2}` and
/// `|grad u|² >= Σ_{b∼a} |u(b) − u(a)|² / ε²`, then the largest generalized
/// eigenvalue of the variance form against the resulting quadratic form.
/// Returns `None` for domains above [`UPPER_BOUND_LIMIT`] variables or when
/// the quadratic form is singular.
pub fn upper_bound_p2(g: &NetGraph, domain: &PiDomain) -> Result<Option<f64>> {
    let mut best: f64 = 0.0;
    for part in domain.components(g) {
        let ev = Evaluator::new(g, &part);
        let n = ev.len();
        if n > UPPER_BOUND_LIMIT {
            return Ok(None);
        }
        if n < 2 {
            continue;
        }
        // gauge: drop variable 0 (both forms vanish on constants)
        let m = n - 1;
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut wfull = vec![0.0; n];
        for (&x, &w) in ev.ball.iter().zip(&ev.ball_w) {
            wfull[x] += w;
        }
        for i in 1..n {
            for j in 1..n {
                a[(i - 1, j - 1)] = if i == j { wfull[i] } else { 0.0 } - wfull[i] * wfull[j];
            }
        }
        let mut q = DMatrix::<f64>::zeros(m, m);
        let e2 = ev.eps * ev.eps;
        for (x, nb) in ev.nbrs.iter().enumerate() {
            let c = ev.infl_w[x] / e2;
            for &y in nb {
                for (s, t, sign) in [(x, x, 1.0), (y, y, 1.0), (x, y, -1.0), (y, x, -1.0)] {
                    if s > 0 && t > 0 {
                        q[(s - 1, t - 1)] += sign * c;
                    }
                }
            }
        }
        let Some(chol) = q.cholesky() else {
            return Ok(None);
        };
        let l = chol.l();
        let linv = match l.clone().try_inverse() {
            Some(x) => x,
            None => return Ok(None),
        };
        let mut mm = &linv * a * linv.transpose();
        mm = (&mm + mm.transpose()) * 0.5;
        let top = SymmetricEigen::new(mm).eigenvalues.iter().copied().fold(0.0, f64::max);
        best = best.max(top.max(0.0).sqrt() / ev.radius);
    }
    Ok(Some(best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub p: f64,
    pub p_prime: f64,
    pub functions: usize,
    /// Functions whose ratio increased from `p` to `p'`.
    pub violations: usize,
    pub max_ratio_p: f64,
    pub max_ratio_p_prime: f64,
}

/// Re-evaluates every suite function of `estimate` at `p_prime >= p`; the
/// ratio must not increase (power-mean monotonicity of the right side).
pub fn holder_lift(g: &NetGraph, domain: &PiDomain, estimate: &PoincareEstimate, p_prime: f64) -> Result<HolderReport> {
    check_p(p_prime)?;
    if p_prime < estimate.p {
        return Err(Error::invalid("holder_lift needs p' >= p"));
    }
    let evs: Vec<Evaluator> = domain.components(g).iter().map(|d| Evaluator::new(g, d)).collect();
    let mut violations = 0;
    let mut max_p: f64 = 0.0;
    let mut max_q: f64 = 0.0;
    for e in &estimate.suite {
        let ev = &evs[e.component];
        let r_p = ev.ratio(&e.values, estimate.p);
        let r_q = ev.ratio(&e.values, p_prime);
        if r_q > r_p {
            violations += 1;
        }
        if r_p.is_finite() {
            max_p = max_p.max(r_p);
        }
        if r_q.is_finite() {
            max_q = max_q.max(r_q);
        }
    }
    Ok(HolderReport {
        p: estimate.p,
        p_prime,
        functions: estimate.suite.len(),
        violations,
        max_ratio_p: max_p,
        max_ratio_p_prime: max_q,
    })
}

/// Lattice points (integer units) of the straight-line chain from `x` to
/// `y`: one step per unit of length, each snapped to the nearest point.
pub fn lattice_chain(x: &[i64], y: &[i64]) -> Vec<Vec<i64>> {
    let len = x.iter().zip(y).map(|(a, b)| ((b - a) * (b - a)) as f64).sum::<f64>().sqrt();
    let k = len.ceil().max(1.0) as i64;
    (0..=k)
        .map(|i| {
            let t = i as f64 / k as f64;
            x.iter().zip(y).map(|(&a, &b)| (a as f64 + t * (b - a) as f64).round() as i64).collect()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub from: Vec<i64>,
    pub to: Vec<i64>,
    pub steps: usize,
    /// Largest squared step in lattice units; the chain needs `<= 9`.
    pub max_step_sq: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPiCertificate {
    pub level: u32,
    pub epsilon: f64,
    pub n: u32,
    pub ball_size: usize,
    pub pairs_checked: usize,
    pub max_step_sq: i64,
    pub chains_ok: bool,
    pub telescoping_ok: bool,
    /// `max_f ⨏_B⨏_B |f(x) − f(y)| / (n ⨏_B |grad f|)` over the suite.
    pub c_empirical: f64,
    /// Best single-average ratio at `p = 1`, `λ = 1`.
    pub c_suite: f64,
    pub max_suite_ratio: f64,
    pub bound: f64,
    pub pass: bool,
    pub sample_chains: Vec<ChainRecord>,
}

/// The dyadic grid of `level` (spacing `2^{1−level}`), as a space, its graph
/// and the lattice scale.
pub fn dyadic_grid(level: u32, half_width_units: i64) -> Result<(SampledSpace, NetGraph)> {
    if !(1..=16).contains(&level) {
        return Err(Error::invalid(format!("level must be in 1..=16, got {level}")));
    }
    let scale = Rational::dyadic(level - 1);
    let space = SampledSpace::euclidean_lattice(2, scale, half_width_units)?;
    let net = EpsNet::from_members(&space, scale.to_f64(), (0..space.len()).collect(), None)?;
    let g = build_graph(&space, &net)?;
    Ok((space, g))
}

/// Rebuilds the straight-line chaining argument on the Euclidean ball of
/// radius `n` about the origin of the level-`level` dyadic grid, checks its
/// step bound and telescoping, and compares the resulting constants with
/// [`GRID_PI_BOUND`] at `p = 1`, `λ = 1`.
pub fn grid_pi_certificate(level: u32, n: u32, plan: &SuitePlan, seed: u64) -> Result<GridPiCertificate> {
    if level < 1 || n < 1 {
        return Err(Error::invalid("level and n must be >= 1"));
    }
    let k = 1i64 << (level - 1);
    let rad_units = n as i64 * k;
    let (space, g) = dyadic_grid(level, rad_units + 4)?;
    let eps = g.epsilon();
    let ball: Vec<usize> = (0..g.len())
        .filter(|&v| {
            let p = space.lattice_point(g.point_of(v)).expect("lattice");
            p.iter().map(|c| c * c).sum::<i64>() < rad_units * rad_units
        })
        .collect();
    let domain = PiDomain::from_sets(&g, ball.clone(), ball.clone(), n as f64, 1.0)?;
    let est = estimate_constant_lower(&g, &domain, 1.0, plan, seed)?;
    let ev = Evaluator::new(&g, &domain);
    let mut c_emp: f64 = 0.0;
    for e in &est.suite {
        let (_, dbl) = ev.lhs_pair(&e.values);
        let rhs = ev.rhs(&e.values, 1.0);
        if dbl > 0.0 && rhs > 0.0 {
            c_emp = c_emp.max(dbl / rhs);
        }
    }

    // chains between sampled ball points, plus the diagonal example
    let vertex_at = |p: &[i64]| space.lattice_index(p).and_then(|i| g.vertex_of(i));
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9);
    let mut pairs: Vec<(Vec<i64>, Vec<i64>)> = vec![(vec![0, 0], vec![k, k])];
    for _ in 0..64 {
        let a = ball[rng.random_range(0..ball.len())];
        let b = ball[rng.random_range(0..ball.len())];
        pairs.push((
            space.lattice_point(g.point_of(a)).unwrap().to_vec(),
            space.lattice_point(g.point_of(b)).unwrap().to_vec(),
        ));
    }
    let funcs: Vec<Vec<f64>> = est
        .suite
        .iter()
        .take(8)
        .map(|e| {
            let mut full = vec![0.0; g.len()];
            for (&v, &x) in ev.vars.iter().zip(&e.values) {
                full[v] = x;
            }
            full
        })
        .collect();
    let mut chains_ok = true;
    let mut telescoping_ok = true;
    let mut max_step_sq = 0;
    let mut samples = Vec::new();
    for (x, y) in &pairs {
        let chain = lattice_chain(x, y);
        let mut worst = 0;
        let mut verts = Vec::with_capacity(chain.len());
        for w in chain.windows(2) {
            let d2: i64 = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum();
            worst = worst.max(d2);
        }
        for p in &chain {
            match vertex_at(p) {
                Some(v) => verts.push(v),
                None => chains_ok = false,
            }
        }
        if worst > 9 {
            chains_ok = false;
        }
        for w in verts.windows(2) {
            if w[0] != w[1] && !g.neighbors(w[0]).contains(&w[1]) {
                chains_ok = false;
            }
        }
        max_step_sq = max_step_sq.max(worst);
        if verts.len() == chain.len() {
            for f in &funcs {
                let total: f64 = verts.windows(2).map(|w| (f[w[1]] - f[w[0]]).abs()).sum();
                let direct = (f[verts[verts.len() - 1]] - f[verts[0]]).abs();
                if direct > total * (1.0 + 1e-12) {
                    telescoping_ok = false;
                }
                // each hop is one term of the gradient sum at its start
                for w in verts.windows(2) {
                    let grad_sum: f64 = g.neighbors(w[0]).iter().map(|&b| (f[b] - f[w[0]]).abs()).sum();
                    if (f[w[1]] - f[w[0]]).abs() > grad_sum {
                        telescoping_ok = false;
                    }
                }
            }
        }
        if samples.len() < 4 {
            samples.push(ChainRecord {
                from: x.clone(),
                to: y.clone(),
                steps: chain.len() - 1,
                max_step_sq: worst,
            });
        }
    }
    let max_suite = est.max_suite_ratio();
    let pass = chains_ok && telescoping_ok && c_emp <= GRID_PI_BOUND && est.c_lower <= GRID_PI_BOUND && max_suite <= GRID_PI_BOUND;
    Ok(GridPiCertificate {
        level,
        epsilon: eps,
        n,
        ball_size: ball.len(),
        pairs_checked: pairs.len(),
        max_step_sq,
        chains_ok,
        telescoping_ok,
        c_empirical: c_emp,
        c_suite: est.c_lower,
        max_suite_ratio: max_suite,
        bound: GRID_PI_BOUND,
        pass,
        sample_chains: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

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
        NetGraph::from_adjacency(1.0, adj, vec![1.0; n]).unwrap()
    }

    #[test]
    fn gradient_on_integer_line() {
        let s = SampledSpace::euclidean_lattice(1, Rational::dyadic(0), 10).unwrap();
        let net = EpsNet::from_members(&s, 1.0, (0..s.len()).collect(), None).unwrap();
        let g = build_graph(&s, &net).unwrap();
        let u = VertexFunction::new(&g, (0..g.len()).map(|v| g.coords(v)[0]).collect()).unwrap();
        let mid = g.vertex_of(s.lattice_index(&[0]).unwrap()).unwrap();
        assert_eq!(discrete_gradient(&g, &u, mid), 12.0);
        let c = VertexFunction::new(&g, vec![3.0; g.len()]).unwrap();
        assert_eq!(discrete_gradient(&g, &c, mid), 0.0);
    }

    #[test]
    fn isolated_vertex_has_zero_gradient() {
        let g = NetGraph::from_adjacency(1.0, vec![vec![]], vec![1.0]).unwrap();
        let u = VertexFunction::new(&g, vec![5.0]).unwrap();
        assert_eq!(discrete_gradient(&g, &u, 0), 0.0);
    }

    #[test]
    fn singleton_ball_gives_zero() {
        let g = path(3);
        let d = PiDomain::graph_ball(&g, 1, 0.5, 1.0).unwrap();
        assert_eq!(d.ball, vec![1]);
        let est = estimate_constant_lower(&g, &d, 1.0, &SuitePlan::default(), 0).unwrap();
        assert_eq!(est.c_lower, 0.0);
        assert_eq!(exact_constant_p1_tiny(&g, &d).unwrap(), 0.0);
    }

    #[test]
    fn two_point_closed_form() {
        // u = (s, t): lhs = |s − t|/2, both gradients |s − t|, so C = 1/2
        let g = path(2);
        let d = PiDomain::from_sets(&g, vec![0, 1], vec![0, 1], 1.0, 1.0).unwrap();
        let c = exact_constant_p1_tiny(&g, &d).unwrap();
        assert!((c - 0.5).abs() < 1e-12, "{c}");
    }

    #[test]
    fn path3_suite_meets_oracle() {
        let g = path(3);
        let d = PiDomain::from_sets(&g, vec![0, 1, 2], vec![0, 1, 2], 1.0, 1.0).unwrap();
        let exact = exact_constant_p1_tiny(&g, &d).unwrap();
        let est = estimate_constant_lower(&g, &d, 1.0, &SuitePlan::default(), 1).unwrap();
        assert!(est.c_lower <= exact + 1e-9);
        assert!((est.c_lower - exact).abs() < 1e-9, "{} vs {exact}", est.c_lower);
    }

    #[test]
    fn oracle_rejects_large_domains() {
        let g = path(8);
        let d = PiDomain::from_sets(&g, (0..8).collect(), (0..8).collect(), 1.0, 1.0).unwrap();
        let err = exact_constant_p1_tiny(&g, &d).unwrap_err();
        assert!(err.to_string().contains("oracle restricted to tiny instances"));
    }

    #[test]
    fn constants_give_zero_sides() {
        let g = path(5);
        let d = PiDomain::graph_ball(&g, 2, 2.5, 2.0).unwrap();
        let u = VertexFunction::new(&g, vec![1.25; 5]).unwrap();
        let s = pi_sides(&g, &d, 2.0, &u).unwrap();
        assert_eq!((s.lhs, s.lhs_double, s.rhs), (0.0, 0.0, 0.0));
        assert_eq!(s.ratio(), 0.0);
    }

    #[test]
    fn disconnected_inflation_is_split() {
        // two disjoint edges
        let g = NetGraph::from_adjacency(1.0, vec![vec![1], vec![0], vec![3], vec![2]], vec![1.0; 4]).unwrap();
        let d = PiDomain::from_sets(&g, vec![0, 1, 2, 3], vec![0, 1, 2, 3], 1.0, 1.0).unwrap();
        assert_eq!(d.components(&g).len(), 2);
        let u = VertexFunction::new(&g, vec![0.0, 0.0, 1.0, 1.0]).unwrap();
        let s = pi_sides(&g, &d, 1.0, &u).unwrap();
        assert!(s.violated);
        let est = estimate_constant_lower(&g, &d, 1.0, &SuitePlan::default(), 0).unwrap();
        assert!(est.disconnected);
        assert!(est.c_lower.is_finite());
    }

    #[test]
    fn upper_bound_dominates_p2_suite() {
        let g = path(6);
        let d = PiDomain::from_sets(&g, vec![1, 2, 3, 4], (0..6).collect(), 2.0, 1.0).unwrap();
        let est = estimate_constant_lower(&g, &d, 2.0, &SuitePlan::default(), 3).unwrap();
        let up = est.c_upper.unwrap();
        assert!(est.c_lower <= up, "{} > {up}", est.c_lower);
    }

    #[test]
    fn chain_steps_are_short() {
        let c = lattice_chain(&[0, 0], &[4, 4]);
        assert_eq!(c.first().unwrap(), &vec![0, 0]);
        assert_eq!(c.last().unwrap(), &vec![4, 4]);
        for w in c.windows(2) {
            let d2: i64 = w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum();
            assert!(d2 <= 9);
        }
    }

    #[test]
    fn subsets_enumerated() {
        let mut n = 0;
        for_each_subset(5, 2, |_| n += 1);
        assert_eq!(n, 10);
        let mut n = 0;
        for_each_subset(4, 0, |s| {
            assert!(s.is_empty());
            n += 1
        });
        assert_eq!(n, 1);
        assert_eq!(binomial(15, 4), 1365);
    }
}
