//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use metric_discretize::{NetGraph, SampledSpace, VertexFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Integer pairs `(j, k)` with `j² + k² < 4^(level−1)`: net points of the
/// level-`level` dyadic grid inside the open unit ball.
pub fn unit_ball_lattice_count(level: u32) -> u64 {
    let k = 1i64 << (level - 1);
    let mut count = 0;
    for a in -k..=k {
        for b in -k..=k {
            if a * a + b * b < k * k {
                count += 1;
            }
        }
    }
    count
}

/// Random connected graph: a random spanning tree plus extra edges, with
/// masses from a small dyadic set.
pub fn random_connected_graph(n: usize, extra_p: f64, eps: f64, rng: &mut ChaCha8Rng) -> NetGraph {
    let mut adj = vec![Vec::new(); n];
    let add = |adj: &mut Vec<Vec<usize>>, a: usize, b: usize| {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    for v in 1..n {
        let parent = rng.random_range(0..v);
        add(&mut adj, v, parent);
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(extra_p) {
                add(&mut adj, a, b);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    let masses = (0..n).map(|_| [0.5, 1.0, 1.5, 2.0][rng.random_range(0..4)]).collect();
    NetGraph::from_adjacency(eps, adj, masses).unwrap()
}

/// Values `k / 64` with `|k| <= 256`: exact under shifts by dyadic constants.
pub fn random_dyadic_function(g: &NetGraph, rng: &mut ChaCha8Rng) -> VertexFunction {
    let vals = (0..g.len()).map(|_| rng.random_range(-256i32..=256) as f64 / 64.0).collect();
    VertexFunction::new(g, vals).unwrap()
}

/// Plain BFS hop counts (`None` when unreachable).
pub fn bfs_hops(g: &NetGraph, src: usize) -> Vec<Option<u32>> {
    let mut d = vec![None; g.len()];
    d[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(a) = q.pop_front() {
        let da = d[a].unwrap();
        for &b in g.neighbors(a) {
            if d[b].is_none() {
                d[b] = Some(da + 1);
                q.push_back(b);
            }
        }
    }
    d
}

pub fn random_cloud(n: usize, dim: usize, side: f64, rng: &mut ChaCha8Rng) -> SampledSpace {
    let coords = (0..n * dim).map(|_| rng.random_range(0.0..side)).collect();
    SampledSpace::from_points(dim, coords, None, "random-cloud").unwrap()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Brute-force net checks: pairwise separation `>= eps`, and every point
/// strictly within `eps` of some member. Returns (separated, maximal,
/// max distance to the net).
pub fn brute_force_net(space: &SampledSpace, members: &[usize], eps: f64) -> (bool, bool, f64) {
    let mut separated = true;
    for (i, &a) in members.iter().enumerate() {
        for &b in &members[i + 1..] {
            if euclid(space.point(a), space.point(b)) < eps {
                separated = false;
            }
        }
    }
    let mut maximal = true;
    let mut gap: f64 = 0.0;
    for z in 0..space.len() {
        let d = members.iter().map(|&m| euclid(space.point(z), space.point(m))).fold(f64::INFINITY, f64::min);
        gap = gap.max(d);
        if d >= eps {
            maximal = false;
        }
    }
    (separated, maximal, gap)
}
