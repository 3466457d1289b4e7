//! Parallel versus single-threaded runs of the hot kernels. The "sequential"
//! variants run inside a one-thread pool; build with
//! `--no-default-features` to drop rayon from the library entirely.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use metric_discretize::analysis::{estimate_doubling_graph, SamplePlan};
use metric_discretize::poincare::{estimate_constant_lower, PiDomain, SuitePlan};
use metric_discretize::{build_graph, build_maximal_net, hausdorff_gap, Rational, SampledSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cloud(n: usize) -> SampledSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let coords = (0..2 * n).map(|_| rng.random_range(0.0..10.0)).collect();
    SampledSpace::from_points(2, coords, None, "bench").unwrap()
}

fn modes<F: Fn() + Sync>(c: &mut Criterion, name: &str, f: F) {
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let mut group = c.benchmark_group(name);
    group.sample_size(10);
    group.bench_function(BenchmarkId::new("parallel", rayon::current_num_threads()), |b| b.iter(&f));
    group.bench_function(BenchmarkId::new("sequential", 1), |b| b.iter(|| single.install(&f)));
    group.finish();
}

fn kernels(c: &mut Criterion) {
    let lattice = SampledSpace::euclidean_lattice(2, Rational::dyadic(3), 80).unwrap();
    let lattice_net = build_maximal_net(&lattice, 0.125, 0).unwrap();
    modes(c, "build_graph/lattice", || {
        build_graph(&lattice, &lattice_net).unwrap();
    });

    let points = cloud(20_000);
    let net = build_maximal_net(&points, 0.1, 0).unwrap();
    modes(c, "hausdorff_gap/cloud", || {
        hausdorff_gap(&points, &net).unwrap();
    });

    let g = build_graph(&lattice, &lattice_net).unwrap();
    let plan = SamplePlan::log_spaced(64, 0.125, 0.5, 6, 0);
    modes(c, "doubling/lattice", || {
        estimate_doubling_graph(&g, &plan).unwrap();
    });

    let center = g.vertex_of(lattice.lattice_index(&[0, 0]).unwrap()).unwrap();
    let domain = PiDomain::graph_ball(&g, center, 0.5, 2.0).unwrap();
    let suite = SuitePlan {
        ascent_steps: 40,
        restarts: 2,
        ..SuitePlan::default()
    };
    modes(c, "poincare_suite/lattice", || {
        estimate_constant_lower(&g, &domain, 1.0, &suite, 0).unwrap();
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
