//! Acceptance run: one line per criterion on stdout (written past the test
//! harness capture), then a single assertion listing every failure.

mod common;

use std::f64::consts::PI;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use metric_discretize::analysis::{distortion, theoretical_bounds, PairPlan, SamplePlan};
use metric_discretize::complex::{build_complex, compare_modes, complex_doubling, linear_extension_energy, MetricMode};
use metric_discretize::ghcheck::{build_levels, gh_condition_check, multiscale_from_levels, origin_nearest, MultiscaleConfig};
use metric_discretize::poincare::{
    dyadic_grid, estimate_constant_lower, estimate_constant_lower_with, exact_p1_maximizer, grid_pi_certificate, pi_sides, PiDomain,
    SuitePlan, GRID_PI_BOUND,
};
use metric_discretize::reproduce::{degree_census, grid_doubling, unit_ball_row, PUBLISHED_DOUBLING};
use metric_discretize::unity::{check_pointwise_bound, PartitionOfUnity};
use metric_discretize::{build_graph, build_maximal_net, hausdorff_gap, refine_nested, Rational, SampledSpace, VertexFunction};
use rand::Rng;

use common::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn within_time(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn c1_grid_reproduction() -> Verdict {
    let t = Instant::now();
    let rows: Vec<_> = (3..=5).map(|l| unit_ball_row(l).unwrap()).collect();
    let elapsed = t.elapsed();
    let oracle: Vec<u64> = (3..=5).map(unit_ball_lattice_count).collect();
    let counts: Vec<u64> = rows.iter().map(|r| r.count).collect();
    let mass_err = rows
        .iter()
        .map(|r| {
            let expect = r.count as f64 * PI * r.epsilon * r.epsilon;
            (r.mass - expect).abs() / expect
        })
        .fold(0.0, f64::max);
    let pass = counts[1] == 193 && counts[2] == 793 && counts == oracle && mass_err <= 1e-12 && within_time(elapsed, 5.0);
    verdict(
        pass,
        format!(
            "counts L3..L5 = {counts:?} (oracle {oracle:?}; published L3 = 43 flagged), mass rel err {mass_err:.1e} <= 1e-12, {:.2}s < 5s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c2_degree() -> Verdict {
    let t = Instant::now();
    let census: Vec<_> = (1..=6).map(|l| degree_census(l).unwrap()).collect();
    let elapsed = t.elapsed();
    let all = census
        .iter()
        .all(|c| c.interior_vertices > 0 && c.min_interior_degree == 28 && c.max_interior_degree == 28);
    let ranges: Vec<String> = census
        .iter()
        .map(|c| format!("L{}:{}..{}", c.level, c.min_interior_degree, c.max_interior_degree))
        .collect();
    verdict(
        all && within_time(elapsed, 5.0),
        format!("interior degrees {} == 28, {:.2}s < 5s", ranges.join(" "), elapsed.as_secs_f64()),
    )
}

fn c3_trend() -> Verdict {
    let rows: Vec<_> = (3..=7).map(|l| unit_ball_row(l).unwrap()).collect();
    let oracle_ok = rows.iter().all(|r| r.count == unit_ball_lattice_count(r.level));
    let masses: Vec<f64> = rows.iter().map(|r| r.mass).collect();
    let monotone = masses.windows(2).all(|w| w[0] <= w[1]);
    let limit = PI * PI;
    let below = masses.iter().all(|&m| m <= limit * (1.0 + 1e-9));
    let gaps: Vec<String> = masses.iter().map(|m| format!("{:.4}", limit - m)).collect();
    verdict(
        oracle_ok && monotone && below,
        format!(
            "masses L3..L7 nondecreasing={monotone}, all <= pi^2(1+1e-9)={below}, gaps to pi^2 [{}], counts match oracle={oracle_ok}",
            gaps.join(", ")
        ),
    )
}

fn c4_doubling() -> Verdict {
    let t = Instant::now();
    let d = grid_doubling(3, 64, 12, 4).unwrap();
    let elapsed = t.elapsed();
    let bound = theoretical_bounds(4.0, 1.0).unwrap().c_m_bound;
    let pass = d.centers == 64 && d.radii.len() == 12 && d.max_ratio <= PUBLISHED_DOUBLING && d.max_ratio <= bound && within_time(elapsed, 30.0);
    verdict(
        pass,
        format!(
            "max ratio {:.3} over {} centers x {} radii <= 7128 and <= C_m bound {bound:.3e}, {:.2}s < 30s",
            d.max_ratio,
            d.centers,
            d.radii.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn c5_identities() -> Verdict {
    let mut r = rng(5);
    let mut failures = Vec::new();
    let mut checked = 0usize;
    for gi in 0..50 {
        let n = r.random_range(2..=60);
        let g = random_connected_graph(n, (3.0 / n as f64).min(1.0), 0.5, &mut r);
        let center = r.random_range(0..n);
        let radius = g.epsilon() * r.random_range(1..=4) as f64;
        let lambda = [1.0, 2.0][r.random_range(0..2)];
        let domain = PiDomain::graph_ball(&g, center, radius, lambda).unwrap();
        for fi in 0..20 {
            let u = random_dyadic_function(&g, &mut r);
            let tag = format!("graph {gi} fn {fi}");
            let s1 = pi_sides(&g, &domain, 1.0, &u).unwrap();
            let s2 = pi_sides(&g, &domain, 2.0, &u).unwrap();
            let s3 = pi_sides(&g, &domain, 3.0, &u).unwrap();
            let shifted = VertexFunction::new(&g, u.values().iter().map(|x| x + 3.5).collect()).unwrap();
            if pi_sides(&g, &domain, 1.0, &shifted).unwrap() != s1 {
                failures.push(format!("{tag}: shift"));
            }
            for alpha in [-2.0, 0.5] {
                let scaled = VertexFunction::new(&g, u.values().iter().map(|x| alpha * x).collect()).unwrap();
                let rs = pi_sides(&g, &domain, 1.0, &scaled).unwrap().ratio();
                let r1 = s1.ratio();
                let ok = if r1 == 0.0 { rs == 0.0 } else { (rs - r1).abs() <= 1e-12 * r1 };
                if !ok {
                    failures.push(format!("{tag}: scale {alpha}"));
                }
            }
            if !(s1.lhs <= s1.lhs_double && s1.lhs_double <= 2.0 * s1.lhs) {
                failures.push(format!("{tag}: double average {} {}", s1.lhs, s1.lhs_double));
            }
            if !(s1.rhs <= s2.rhs && s2.rhs <= s3.rhs) {
                failures.push(format!("{tag}: holder {} {} {}", s1.rhs, s2.rhs, s3.rhs));
            }
            let c = VertexFunction::new(&g, vec![1.25; n]).unwrap();
            let sc = pi_sides(&g, &domain, 2.0, &c).unwrap();
            if sc.lhs != 0.0 || sc.lhs_double != 0.0 || sc.ratio() != 0.0 {
                failures.push(format!("{tag}: constant"));
            }
            checked += 1;
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{checked} (graph, function) cases: shift exact, scale 1e-12, lhs <= lhs_double <= 2 lhs exact, holder p=1,2,3 exact, constants 0; failures {:?}",
            failures.iter().take(3).collect::<Vec<_>>()
        ),
    )
}

fn c6_oracle() -> Verdict {
    let t = Instant::now();
    let mut r = rng(6);
    let mut worst_excess: f64 = f64::NEG_INFINITY;
    let mut worst_reinject: f64 = 0.0;
    for _ in 0..30 {
        let n = r.random_range(2..=6);
        let g = random_connected_graph(n, 0.4, 1.0, &mut r);
        let center = r.random_range(0..n);
        let radius = [1.0, 2.0, n as f64][r.random_range(0..3)];
        let lambda = [1.0, 2.0][r.random_range(0..2)];
        let domain = PiDomain::graph_ball(&g, center, radius, lambda).unwrap();
        let (exact, maximizer) = exact_p1_maximizer(&g, &domain).unwrap();
        let est = estimate_constant_lower(&g, &domain, 1.0, &SuitePlan::default(), 11).unwrap();
        for e in &est.suite {
            worst_excess = worst_excess.max(e.ratio - exact);
        }
        let again = estimate_constant_lower_with(&g, &domain, 1.0, &SuitePlan::default().seeds_only(), 11, &[maximizer]).unwrap();
        worst_reinject = worst_reinject.max((again.c_lower - exact).abs());
    }
    let elapsed = t.elapsed();
    verdict(
        worst_excess <= 1e-9 && worst_reinject <= 1e-9 && within_time(elapsed, 60.0),
        format!(
            "30 graphs: max(suite ratio - exact) = {worst_excess:.2e} <= 1e-9, |reinjected - exact| = {worst_reinject:.2e} <= 1e-9, {:.2}s < 60s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c7_grid_pi() -> Verdict {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for level in 2..=4 {
        for n in 1..=3 {
            let plan = SuitePlan {
                ascent_steps: 60,
                restarts: 2,
                ..SuitePlan::default()
            };
            let cert = grid_pi_certificate(level, n, &plan, 7).unwrap();
            worst = worst.max(cert.max_suite_ratio);
            ok &= cert.max_suite_ratio <= GRID_PI_BOUND && cert.chains_ok && cert.telescoping_ok;
        }
    }
    let elapsed = t.elapsed();
    verdict(
        ok && within_time(elapsed, 60.0),
        format!("levels 2..4, n = 1..3: max suite ratio {worst:.4} <= 256, chains ok, {:.2}s < 60s", elapsed.as_secs_f64()),
    )
}

fn c8_nets() -> Verdict {
    let t = Instant::now();
    let mut r = rng(8);
    let mut bad = Vec::new();
    for case in 0..100 {
        let n = r.random_range(2..=500);
        let dim = r.random_range(1..=3);
        let space = random_cloud(n, dim, 4.0, &mut r);
        let eps = r.random_range(0.2..1.5);
        let seed = r.random::<u64>();
        let net = Arc::new(build_maximal_net(&space, eps, seed).unwrap());
        let (sep, max, gap) = brute_force_net(&space, net.members(), eps);
        let h = hausdorff_gap(&space, &net).unwrap();
        let fine = refine_nested(&space, &net, seed ^ 1).unwrap();
        let (fsep, fmax, _) = brute_force_net(&space, fine.members(), eps / 2.0);
        let nested = net.members().iter().all(|m| fine.members().contains(m));
        if !(sep && max && fsep && fmax && nested && h < eps && h == gap) {
            bad.push(case);
        }
    }
    let elapsed = t.elapsed();
    verdict(
        bad.is_empty() && within_time(elapsed, 60.0),
        format!(
            "100 clouds: separation, maximality, nesting, gap < eps against brute force; failing cases {bad:?}, {:.2}s < 60s",
            elapsed.as_secs_f64()
        ),
    )
}

fn c9_embedding() -> Verdict {
    let mut r = rng(9);
    let mut violations = 0usize;
    let mut pairs = 0usize;
    for _ in 0..10 {
        let space = random_cloud(300, 2, 5.0, &mut r);
        let net = build_maximal_net(&space, 0.5, r.random()).unwrap();
        let g = build_graph(&space, &net).unwrap();
        for src in 0..g.len().min(40) {
            let hops = bfs_hops(&g, src);
            for (v, h) in hops.iter().enumerate() {
                if let Some(h) = h {
                    pairs += 1;
                    let dx = space.distance(g.point_of(src), g.point_of(v));
                    if dx > 3.0 * (*h as f64 * g.epsilon()) {
                        violations += 1;
                    }
                }
            }
        }
    }
    let plan = PairPlan {
        sources: 8,
        targets_per_source: 64,
        seed: 9,
    };
    let (ls, lg) = dyadic_grid(3, 12).unwrap();
    let l_lattice = distortion(&ls, &lg, &plan).unwrap().bilipschitz;
    let gasket = SampledSpace::sierpinski_prefractal(5).unwrap();
    let gnet = build_maximal_net(&gasket, 1.0 / 8.0, 0).unwrap();
    let gg = build_graph(&gasket, &gnet).unwrap();
    let l_gasket = distortion(&gasket, &gg, &plan).unwrap().bilipschitz;
    verdict(
        violations == 0 && l_lattice.is_finite() && l_gasket.is_finite(),
        format!("d_X <= 3 d_V on {pairs} connected pairs, {violations} violations; measured L lattice {l_lattice:.3}, gasket {l_gasket:.3}"),
    )
}

fn c10_unity() -> Verdict {
    let (_, g) = dyadic_grid(3, 16).unwrap();
    let eps = g.epsilon();
    let pou = PartitionOfUnity::new(&g).unwrap();
    let mut r = rng(10);
    let mut sum_err: f64 = 0.0;
    let mut support_ok = true;
    for _ in 0..10_000 {
        let x = [r.random_range(-3.0..3.0), r.random_range(-3.0..3.0)];
        let phi = pou.phi(&x).unwrap();
        sum_err = sum_err.max((phi.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs());
        let mut expect: Vec<usize> = (0..g.len()).filter(|&v| euclid(g.coords(v), &x) < 2.0 * eps).collect();
        let mut got: Vec<usize> = phi.iter().filter(|(_, p)| *p > 0.0).map(|(a, _)| *a).collect();
        expect.sort_unstable();
        got.sort_unstable();
        support_ok &= expect == got;
    }
    let linear = VertexFunction::new(&g, (0..g.len()).map(|v| 0.3 * g.coords(v)[0] - 1.2 * g.coords(v)[1]).collect()).unwrap();
    let random = VertexFunction::new(&g, (0..g.len()).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
    let mut probes_failed = 0;
    for (k, u) in [linear, random].iter().enumerate() {
        for i in 0..100 {
            let x = [r.random_range(-2.0..2.0), r.random_range(-2.0..2.0)];
            let (_, d0) = pou.nearest(&x).unwrap();
            let h = 0.5 * (eps - d0) / 2.0;
            let b = check_pointwise_bound(&pou, &g, u, &x, h, (k * 1000 + i) as u64).unwrap();
            if !b.pass {
                probes_failed += 1;
            }
        }
    }
    verdict(
        sum_err <= 1e-12 && support_ok && probes_failed == 0,
        format!(
            "max |sum phi - 1| = {sum_err:.1e} <= 1e-12 over 1e4 points, supports exact = {support_ok}, pointwise bound failures {probes_failed}/200"
        ),
    )
}

fn c11_complex() -> Verdict {
    let (space, g) = dyadic_grid(2, 24).unwrap();
    let c = build_complex(&g, MetricMode::GraphDerived, None).unwrap();
    let mass_exact = (0..c.edge_count()).all(|e| {
        let (a, b) = c.edge(e);
        c.edge_mass(e) == g.mass(a) + g.mass(b)
    });
    let mut r = rng(11);
    let u = VertexFunction::new(&g, (0..g.len()).map(|_| r.random_range(-1.0..1.0)).collect()).unwrap();
    let mut violations = 0;
    for p in [1.0, 2.0, 3.0] {
        violations += linear_extension_energy(&c, &u, p, 20, 11).unwrap().violations;
    }
    let eps = g.epsilon();
    let doubling = complex_doubling(
        &c,
        &SamplePlan {
            centers: 32,
            radii: vec![eps, 2.0 * eps],
            seed: 11,
        },
    )
    .unwrap();
    let l = distortion(
        &space,
        &g,
        &PairPlan {
            sources: 8,
            targets_per_source: 64,
            seed: 11,
        },
    )
    .unwrap()
    .bilipschitz;
    let modes = compare_modes(&space, &g, 1000, l, 11).unwrap();
    verdict(
        mass_exact && violations == 0 && doubling.max_ratio.is_finite() && doubling.max_ratio > 0.0 && modes.pass,
        format!(
            "edge masses exact = {mass_exact}, energy violations {violations} (p = 1,2,3; 20 per edge), complex doubling {:.3}, mode ratios {:.3}/{:.3} <= L {l:.3} on {} pairs",
            doubling.max_ratio, modes.max_space_over_graph, modes.max_graph_over_space, modes.pairs
        ),
    )
}

fn c12_gh() -> Verdict {
    let t = Instant::now();
    let space = SampledSpace::euclidean_lattice(2, Rational::dyadic(5), 6 * 32).unwrap();
    let cfg = MultiscaleConfig {
        levels: 6,
        epsilon0: 1.0,
        ..MultiscaleConfig::default()
    };
    let levels = build_levels(&space, &cfg).unwrap();
    let plan = PairPlan {
        sources: 8,
        targets_per_source: 32,
        seed: 12,
    };
    let l = levels
        .iter()
        .map(|(_, g)| distortion(&space, g, &plan).unwrap().bilipschitz)
        .fold(1.0, f64::max);
    let complexes: Vec<_> = levels
        .iter()
        .map(|(_, g)| build_complex(g, MetricMode::SpaceDerived, Some(&space)).unwrap())
        .collect();
    let q = origin_nearest(&space, levels[0].0.members()).unwrap();
    let (r, eta) = (4.0, 0.5);
    let rep = gh_condition_check(&space, &complexes, q, r, eta, l, 200, 12).unwrap();
    let elapsed = t.elapsed();
    let predicted: Vec<usize> = rep.levels.iter().filter(|x| x.epsilon < eta / (2.0 * l)).map(|x| x.level).collect();
    let predicted_pass = !predicted.is_empty() && predicted.iter().all(|&i| rep.levels[i].pass && rep.levels[i].within_defect_bound);
    let vertex_zero = rep.levels.iter().all(|x| x.max_vertex_pair_defect == 0.0);
    verdict(
        predicted_pass && vertex_zero && rep.i0.is_some() && within_time(elapsed, 60.0),
        format!(
            "(r, eta) = (4, 0.5), measured L = {l:.3}: levels {predicted:?} with eps < eta/2L pass, vertex-pair defect 0 = {vertex_zero}, i0 = {:?}, {:.2}s < 60s",
            rep.i0,
            elapsed.as_secs_f64()
        ),
    )
}

fn c13_multiscale() -> Verdict {
    let space = SampledSpace::euclidean_lattice(2, Rational::dyadic(4), 12 * 16).unwrap();
    let cfg = MultiscaleConfig::default();
    let mut levels = build_levels(&space, &cfg).unwrap();
    let rep = multiscale_from_levels(&space, &levels, &cfg).unwrap();
    levels[1].1.scale_masses(100.0);
    let bad = multiscale_from_levels(&space, &levels, &cfg).unwrap();
    let caught = !bad.verdicts.uniform_k.uniform && bad.verdicts.uniform_k.witness_level == Some(1);
    verdict(
        rep.verdicts.all() && caught,
        format!(
            "4 levels uniform (1)-(5) = {}, K = {:.3}; masses x100 at level index 1 -> K uniform = {}, witness {:?}",
            rep.verdicts.all(),
            rep.verdicts.uniform_k.constant,
            bad.verdicts.uniform_k.uniform,
            bad.verdicts.uniform_k.witness_level
        ),
    )
}

#[test]
fn acceptance() {
    type Criterion = (&'static str, fn() -> Verdict);
    let criteria: [Criterion; 13] = [
        ("grid reproduction", c1_grid_reproduction),
        ("degree 28", c2_degree),
        ("trend toward pi^2", c3_trend),
        ("grid doubling", c4_doubling),
        ("PI structural identities", c5_identities),
        ("oracle equivalence", c6_oracle),
        ("grid PI bound", c7_grid_pi),
        ("net invariants", c8_nets),
        ("embedding bounds", c9_embedding),
        ("partition of unity", c10_unity),
        ("one-complex", c11_complex),
        ("GH conditions", c12_gh),
        ("multiscale verdict", c13_multiscale),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    writeln!(out).unwrap();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let tag = if v.pass { "PASS" } else { "FAIL" };
        writeln!(out, "[{tag}] {:>2} {name}: {}", i + 1, v.detail).unwrap();
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
