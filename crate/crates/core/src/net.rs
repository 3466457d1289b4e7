//! Maximal ε-separated subsets and their dyadic refinements.

use std::cmp::Ordering;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::index::GridIndex;
use crate::spaces::SampledSpace;

/// A maximal ε-separated subset of a [`SampledSpace`], stored as point
/// indices in admission order.
#[derive(Debug, Clone)]
pub struct EpsNet {
    epsilon: f64,
    members: Vec<usize>,
    seed: u64,
    parent: Option<Arc<EpsNet>>,
}

/// JSON form of a net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetRecord {
    pub epsilon: f64,
    pub seed: u64,
    pub member_indices: Vec<usize>,
    pub parent_digest: Option<String>,
}

/// 64-bit FNV-1a over the sorted indices (each as little-endian u64).
pub fn fnv1a_digest(indices: &[usize]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let mut h = OFFSET;
    for i in sorted {
        for b in (i as u64).to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(PRIME);
        }
    }
    h
}

impl EpsNet {
    /// Wraps an explicit member list after checking separation and
    /// maximality on `space`.
    pub fn from_members(space: &SampledSpace, epsilon: f64, members: Vec<usize>, parent: Option<Arc<EpsNet>>) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if members.iter().any(|&m| m >= space.len()) {
            return Err(Error::invalid("net member out of range"));
        }
        let net = Self {
            epsilon,
            members,
            seed: 0,
            parent,
        };
        let check = net.check(space);
        if !check.separated || !check.maximal || !check.nested {
            return Err(Error::invalid(format!("member list is not a valid nested ε-net: {check:?}")));
        }
        Ok(net)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn parent(&self) -> Option<&EpsNet> {
        self.parent.as_deref()
    }

    pub fn digest(&self) -> u64 {
        fnv1a_digest(&self.members)
    }

    pub fn record(&self) -> NetRecord {
        NetRecord {
            epsilon: self.epsilon,
            seed: self.seed,
            member_indices: self.members.clone(),
            parent_digest: self.parent.as_ref().map(|p| format!("{:016x}", p.digest())),
        }
    }

    /// Checks separation, maximality and (if a parent is set) nestedness by
    /// spatial-index queries.
    pub fn check(&self, space: &SampledSpace) -> NetCheck {
        let eps = self.epsilon;
        let grid = space.grid_index(eps, self.members.iter().copied());
        let t = space.threshold(eps);
        let separated = exec::map_slice(&self.members, |&a| {
            let mut ok = true;
            let mut visit = |b: usize| {
                if b != a && space.cmp_threshold(a, b, &t) == Ordering::Less {
                    ok = false;
                }
            };
            match &grid {
                Some(g) => g.for_each_candidate(space.point(a), eps, &mut visit),
                None => self.members.iter().for_each(|&b| visit(b)),
            }
            ok
        })
        .into_iter()
        .all(|x| x);
        let maximal = exec::map_range(space.len(), |x| {
            let mut hit = false;
            let mut visit = |b: usize| {
                if space.cmp_threshold(x, b, &t) == Ordering::Less {
                    hit = true;
                }
            };
            match &grid {
                Some(g) => g.for_each_candidate(space.point(x), eps, &mut visit),
                None => self.members.iter().for_each(|&b| visit(b)),
            }
            hit
        })
        .into_iter()
        .all(|x| x);
        let nested = match &self.parent {
            None => true,
            Some(p) => {
                let mine: std::collections::HashSet<usize> = self.members.iter().copied().collect();
                p.epsilon == 2.0 * eps && p.members.iter().all(|m| mine.contains(m))
            }
        };
        NetCheck {
            separated,
            maximal: maximal || space.is_empty(),
            nested,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetCheck {
    pub separated: bool,
    pub maximal: bool,
    pub nested: bool,
}

fn greedy_extend(space: &SampledSpace, epsilon: f64, mut members: Vec<usize>, order: &[usize]) -> Vec<usize> {
    let t = space.threshold(epsilon);
    let mut admitted = vec![false; space.len()];
    let mut grid = space.grid_index(epsilon, std::iter::empty());
    if let Some(g) = grid.as_mut() {
        for &m in &members {
            g.insert(m, space.point(m));
        }
    }
    for &m in &members {
        admitted[m] = true;
    }
    for &x in order {
        if admitted[x] {
            continue;
        }
        let mut separated = true;
        match &grid {
            Some(g) => g.for_each_candidate(space.point(x), epsilon, |b| {
                if separated && space.cmp_threshold(x, b, &t) == Ordering::Less {
                    separated = false;
                }
            }),
            None => {
                separated = members.iter().all(|&b| space.cmp_threshold(x, b, &t) != Ordering::Less);
            }
        }
        if separated {
            admitted[x] = true;
            members.push(x);
            if let Some(g) = grid.as_mut() {
                g.insert(x, space.point(x));
            }
        }
    }
    members
}

fn shuffled_order(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Greedy maximal ε-separated subset over a seeded shuffle of the points.
pub fn build_maximal_net(space: &SampledSpace, epsilon: f64, seed: u64) -> Result<EpsNet> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    let order = shuffled_order(space.len(), seed);
    let members = greedy_extend(space, epsilon, Vec::new(), &order);
    Ok(EpsNet {
        epsilon,
        members,
        seed,
        parent: None,
    })
}

/// Halves ε: keeps every coarse member (an ε-separated set is ε/2-separated)
/// and greedily extends to a maximal ε/2-separated set.
pub fn refine_nested(space: &SampledSpace, coarse: &Arc<EpsNet>, seed: u64) -> Result<EpsNet> {
    if coarse.members.iter().any(|&m| m >= space.len()) {
        return Err(Error::invalid("coarse net does not belong to this space"));
    }
    let epsilon = coarse.epsilon / 2.0;
    let order = shuffled_order(space.len(), seed);
    let members = greedy_extend(space, epsilon, coarse.members.clone(), &order);
    Ok(EpsNet {
        epsilon,
        members,
        seed,
        parent: Some(Arc::clone(coarse)),
    })
}

/// Chain of `levels` nested nets starting at `epsilon0`, each seeded by
/// `seed + level`.
pub fn nested_chain(space: &SampledSpace, epsilon0: f64, levels: usize, seed: u64) -> Result<Vec<Arc<EpsNet>>> {
    let mut out: Vec<Arc<EpsNet>> = Vec::with_capacity(levels);
    if levels == 0 {
        return Ok(out);
    }
    out.push(Arc::new(build_maximal_net(space, epsilon0, seed)?));
    for l in 1..levels {
        let next = refine_nested(space, &out[l - 1], seed.wrapping_add(l as u64))?;
        out.push(Arc::new(next));
    }
    Ok(out)
}

/// Largest distance from a space point to its nearest net member.
pub fn hausdorff_gap(space: &SampledSpace, net: &EpsNet) -> Result<f64> {
    if space.is_empty() {
        return Ok(0.0);
    }
    if net.is_empty() {
        return Err(Error::EmptyNet);
    }
    let grid: Option<GridIndex> = space.grid_index(net.epsilon, net.members.iter().copied());
    let gaps = exec::map_range(space.len(), |x| {
        let mut best = f64::INFINITY;
        if let Some(g) = &grid {
            g.for_each_candidate(space.point(x), net.epsilon, |b| best = best.min(space.distance(x, b)));
        }
        if best >= net.epsilon || grid.is_none() {
            best = net.members.iter().map(|&b| space.distance(x, b)).fold(f64::INFINITY, f64::min);
        }
        best
    });
    Ok(gaps.into_iter().fold(0.0, f64::max))
}
