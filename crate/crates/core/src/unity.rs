//! Bump functions, the partition of unity subordinate to the `2ε` balls of a
//! net, extension of vertex functions to the ambient space, and numerical
//! checks of the resulting pointwise and integral gradient bounds.
//!
//! Only Euclidean samples are supported: `d(x, X∖B(a, 2ε))` is evaluated as
//! `max(0, 2ε − d(x, a))`, which is exact on the whole of `R^d`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::graph::{NetGraph, VertexFunction};
use crate::index::GridIndex;
use crate::spaces::{euclid, euclidean_ball_volume, BallSpec};

/// Number of probe directions used for finite-difference Lipschitz probes.
pub const PROBE_DIRECTIONS: usize = 64;

/// `min(1, max(0, 2ε − d) / ε)`.
pub fn psi_value(epsilon: f64, d: f64) -> f64 {
    ((2.0 * epsilon - d).max(0.0) / epsilon).min(1.0)
}

#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    epsilon: f64,
    dim: usize,
    /// Net member coordinates, indexed by graph vertex.
    centers: Vec<f64>,
    grid: GridIndex,
}

impl PartitionOfUnity {
    pub fn new(g: &NetGraph) -> Result<Self> {
        if !g.has_coords() {
            return Err(Error::Precondition("partition of unity needs Euclidean vertex coordinates".into()));
        }
        let dim = g.dim();
        let centers: Vec<f64> = (0..g.len()).flat_map(|v| g.coords(v).to_vec()).collect();
        let grid = GridIndex::build(dim, 2.0 * g.epsilon(), &centers, 0..g.len())
            .ok_or_else(|| Error::Precondition(format!("unsupported dimension {dim}")))?;
        Ok(Self {
            epsilon: g.epsilon(),
            dim,
            centers,
            grid,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, a: usize) -> &[f64] {
        &self.centers[a * self.dim..(a + 1) * self.dim]
    }

    pub fn psi(&self, a: usize, x: &[f64]) -> f64 {
        psi_value(self.epsilon, euclid(self.center(a), x))
    }

    /// Members with `ψ_a(x) > 0`, with their `ψ` values, sorted by member.
    pub fn active(&self, x: &[f64]) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        self.grid.for_each_candidate(x, 2.0 * self.epsilon, |a| {
            let v = self.psi(a, x);
            if v > 0.0 {
                out.push((a, v));
            }
        });
        out.sort_unstable_by_key(|&(a, _)| a);
        out
    }

    /// `φ_a(x) = ψ_a(x) / Σ_b ψ_b(x)` over the active members.
    pub fn phi(&self, x: &[f64]) -> Result<Vec<(usize, f64)>> {
        let act = self.active(x);
        let total: f64 = act.iter().map(|&(_, v)| v).sum();
        if !(total > 0.0) {
            return Err(Error::MaximalityViolated);
        }
        Ok(act.into_iter().map(|(a, v)| (a, v / total)).collect())
    }

    /// Nearest member and its distance.
    pub fn nearest(&self, x: &[f64]) -> Result<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        self.grid.for_each_candidate(x, 2.0 * self.epsilon, |a| {
            let d = euclid(self.center(a), x);
            if best.is_none_or(|(b, bd)| d < bd || (d == bd && a < b)) {
                best = Some((a, d));
            }
        });
        best.filter(|&(_, d)| d < 2.0 * self.epsilon).ok_or(Error::MaximalityViolated)
    }
}

/// `f(x) = Σ_a ũ(a) φ_a(x)`.
pub fn extend_function(pou: &PartitionOfUnity, u: &VertexFunction, x: &[f64]) -> Result<f64> {
    let phi = pou.phi(x)?;
    let u = u.values();
    Ok(combine(&phi, u, u[phi[0].0]))
}

/// `ũ(ref) + Σ_a (ũ(a) − ũ(ref)) φ_a`, equal to `Σ_a ũ(a) φ_a` because the
/// weights sum to one, but exactly constant for constant `ũ`.
fn combine(phi: &[(usize, f64)], u: &[f64], reference: f64) -> f64 {
    reference + phi.iter().map(|&(a, w)| (u[a] - reference) * w).sum::<f64>()
}

fn random_direction(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = v.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|c| c / n).collect();
        }
    }
}

fn phi_difference(a: &[(usize, f64)], b: &[(usize, f64)]) -> f64 {
    // both sorted by member
    let (mut i, mut j, mut worst) = (0, 0, 0.0f64);
    while i < a.len() || j < b.len() {
        let (d, step_i, step_j) = match (a.get(i), b.get(j)) {
            (Some(&(x, u)), Some(&(y, v))) if x == y => ((u - v).abs(), true, true),
            (Some(&(x, u)), Some(&(y, _))) if x < y => (u, true, false),
            (Some(_), Some(&(_, v))) => (v, false, true),
            (Some(&(_, u)), None) => (u, true, false),
            (None, Some(&(_, v))) => (v, false, true),
            (None, None) => unreachable!(),
        };
        worst = worst.max(d);
        i += step_i as usize;
        j += step_j as usize;
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointwiseBound {
    pub nearest_member: usize,
    pub probe_radius: f64,
    /// `max_y |f(x) − f(y)| / |x − y|` over the probes.
    pub lip_estimate: f64,
    /// `max_{a, y} |φ_a(x) − φ_a(y)| / |x − y|` over the same probes.
    pub phi_lipschitz: f64,
    pub gradient_at_nearest: f64,
    /// `C_eff = ε · phi_lipschitz`.
    pub c_eff: f64,
    /// `C_eff · |grad ũ|(a₀)`.
    pub bound: f64,
    pub pass: bool,
}

/// Finite-difference probe of `Lip f(x)` against `C_eff |grad ũ|(a₀)`.
///
/// Writing `f(y) − f(x) = Σ_a (ũ(a) − ũ(a₀))(φ_a(y) − φ_a(x))`, every member
/// active at `x` or `y` is a graph neighbor of `a₀` when `h` meets the
/// precondition, so the measured `φ` Lipschitz constant times `ε` is a valid
/// `C` for these probes.
pub fn check_pointwise_bound(
    pou: &PartitionOfUnity,
    g: &NetGraph,
    u: &VertexFunction,
    x: &[f64],
    h: f64,
    seed: u64,
) -> Result<PointwiseBound> {
    let (a0, d0) = pou.nearest(x)?;
    let eps = pou.epsilon;
    let limit = (eps - d0) / 2.0;
    if !(h > 0.0 && h <= limit) {
        return Err(Error::Precondition(format!(
            "probe radius {h} must lie in (0, (ε − d(x, a₀))/2] = (0, {limit}]"
        )));
    }
    let vals = u.values();
    let phi_x = pou.phi(x)?;
    let fx = combine(&phi_x, vals, vals[a0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lip: f64 = 0.0;
    let mut lphi: f64 = 0.0;
    for _ in 0..PROBE_DIRECTIONS {
        let dir = random_direction(pou.dim, &mut rng);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(c, d)| c + h * d).collect();
        let dist = euclid(x, &y);
        if dist == 0.0 {
            continue;
        }
        let phi_y = pou.phi(&y)?;
        let fy = combine(&phi_y, vals, vals[a0]);
        lip = lip.max((fx - fy).abs() / dist);
        lphi = lphi.max(phi_difference(&phi_x, &phi_y) / dist);
    }
    let grad = crate::poincare::discrete_gradient(g, u, a0);
    let c_eff = eps * lphi;
    let bound = c_eff * grad;
    Ok(PointwiseBound {
        nearest_member: a0,
        probe_radius: h,
        lip_estimate: lip,
        phi_lipschitz: lphi,
        gradient_at_nearest: grad,
        c_eff,
        bound,
        pass: lip <= bound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralCheck {
    pub p: f64,
    pub radius: f64,
    pub samples: usize,
    pub skipped: usize,
    /// Monte-Carlo estimate of `∫_{B_X(x, r)} (Lip f)^p dμ`.
    pub lhs_integral: f64,
    /// `C_eff^p Σ_{a ∈ B_V(a₀, (L+1)(r+2ε))} |grad ũ|(a)^p m(a)`.
    pub rhs_integral: f64,
    pub c_eff: f64,
    pub pass: bool,
}

/// Monte-Carlo check of the integrated gradient bound on `B_X(x, r)` with
/// Lebesgue measure; the right side is an exact vertex sum.
#[allow(clippy::too_many_arguments)]
pub fn lip_gradient_integral_check(
    pou: &PartitionOfUnity,
    g: &NetGraph,
    u: &VertexFunction,
    x: &[f64],
    r: f64,
    p: f64,
    l: f64,
    samples: usize,
    seed: u64,
) -> Result<IntegralCheck> {
    if !(r > 0.0) || !(p >= 1.0) || !(l >= 1.0) || samples == 0 {
        return Err(Error::invalid("need r > 0, p >= 1, L >= 1 and at least one sample"));
    }
    let dim = pou.dim;
    let eps = pou.epsilon;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples);
    while points.len() < samples {
        let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        if z.iter().map(|c| c * c).sum::<f64>() < 1.0 {
            points.push((x.iter().zip(&z).map(|(a, b)| a + r * b).collect::<Vec<f64>>(), rng.random::<u64>()));
        }
    }
    let probes = exec::map_slice(&points, |(z, s)| {
        let (a0, d0) = pou.nearest(z).ok()?;
        let h = ((eps - d0) / 2.0).min(eps / 16.0);
        if !(h > 0.0) {
            return None;
        }
        let vals = u.values();
        let phi_z = pou.phi(z).ok()?;
        let fz = combine(&phi_z, vals, vals[a0]);
        let mut rng = ChaCha8Rng::seed_from_u64(*s);
        let (mut lip, mut lphi) = (0.0f64, 0.0f64);
        for _ in 0..8 {
            let dir = random_direction(dim, &mut rng);
            let y: Vec<f64> = z.iter().zip(&dir).map(|(c, d)| c + h * d).collect();
            let dist = euclid(z, &y);
            let phi_y = pou.phi(&y).ok()?;
            let fy = combine(&phi_y, vals, vals[a0]);
            lip = lip.max((fz - fy).abs() / dist);
            lphi = lphi.max(phi_difference(&phi_z, &phi_y) / dist);
        }
        Some((lip, lphi))
    });
    let mut acc = 0.0;
    let mut used = 0usize;
    let mut lphi: f64 = 0.0;
    for (lip, lp) in probes.iter().flatten() {
        acc += lip.powf(p);
        used += 1;
        lphi = lphi.max(*lp);
    }
    let skipped = samples - used;
    let volume = euclidean_ball_volume(dim, r);
    let lhs = if used == 0 { 0.0 } else { volume * acc / used as f64 };
    let c_eff = eps * lphi;
    let (a0, _) = pou.nearest(x)?;
    let reach = (l + 1.0) * (r + 2.0 * eps);
    let ball = g.ball(&BallSpec::new(a0, reach)?);
    let sum: f64 = ball
        .iter()
        .map(|&a| crate::poincare::discrete_gradient(g, u, a).powf(p) * g.mass(a))
        .sum();
    let rhs = c_eff.powf(p) * sum;
    Ok(IntegralCheck {
        p,
        radius: r,
        samples,
        skipped,
        lhs_integral: lhs,
        rhs_integral: rhs,
        c_eff,
        pass: lhs <= rhs,
    })
}

/// Largest `|φ_a(x) − φ_a(y)| / |x − y|` over random pairs at distance up to
/// `ε/4` around sampled points of the box spanned by the members.
pub fn phi_lipschitz_scan(pou: &PartitionOfUnity, points: &[Vec<f64>], seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for x in points {
        let dir = random_direction(pou.dim, &mut rng);
        let t = rng.random_range(0.0..0.25) * pou.epsilon + 1e-9;
        let y: Vec<f64> = x.iter().zip(&dir).map(|(c, d)| c + t * d).collect();
        let d = phi_difference(&pou.phi(x)?, &pou.phi(&y)?) / euclid(x, &y);
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Worst-case constant `5 C_μ^9` for the `φ` Lipschitz bound (times `1/ε`).
pub fn worst_case_phi_constant(c_mu: f64) -> f64 {
    5.0 * c_mu.powi(9)
}

/// Points sampled uniformly from the disc (or ball) of radius `r` about `x`.
pub fn sample_ball_points(x: &[f64], r: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let z: Vec<f64> = x.iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        if z.iter().map(|c| c * c).sum::<f64>() < 1.0 {
            out.push(x.iter().zip(&z).map(|(a, b)| a + r * b).collect());
        }
    }
    out
}
