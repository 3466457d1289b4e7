mod common;

use common::*;
use metric_discretize::poincare::{
    estimate_constant_lower, exact_constant_p1_tiny, holder_lift, pi_sides, upper_bound_p2, PiDomain, SuitePlan,
};
use metric_discretize::{Error, VertexFunction};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn suite_never_beats_the_exact_constant(seed in any::<u64>(), n in 2usize..=6) {
        let mut r = rng(seed);
        let g = random_connected_graph(n, 0.5, 1.0, &mut r);
        let domain = PiDomain::graph_ball(&g, 0, n as f64, 1.0).unwrap();
        let exact = exact_constant_p1_tiny(&g, &domain).unwrap();
        let est = estimate_constant_lower(&g, &domain, 1.0, &SuitePlan::default(), seed).unwrap();
        prop_assert!(est.c_lower <= exact + 1e-9, "{} > {}", est.c_lower, exact);
    }

    #[test]
    fn cut_functions_stay_below_the_oracle(seed in any::<u64>(), n in 2usize..=6) {
        // an independent family of candidates: every indicator 1_S
        let mut r = rng(seed);
        let g = random_connected_graph(n, 0.5, 1.0, &mut r);
        let domain = PiDomain::graph_ball(&g, 0, n as f64, 1.0).unwrap();
        let exact = exact_constant_p1_tiny(&g, &domain).unwrap();
        for mask in 1u32..(1 << n) - 1 {
            let u = VertexFunction::new(&g, (0..n).map(|v| ((mask >> v) & 1) as f64).collect()).unwrap();
            let ratio = pi_sides(&g, &domain, 1.0, &u).unwrap().ratio();
            prop_assert!(ratio <= exact + 1e-9);
        }
    }

    #[test]
    fn certified_upper_bound_dominates(seed in any::<u64>(), n in 3usize..30) {
        let mut r = rng(seed);
        let g = random_connected_graph(n, 0.2, 0.5, &mut r);
        let domain = PiDomain::graph_ball(&g, 0, 2.0, 2.0).unwrap();
        let plan = SuitePlan { ascent_steps: 50, restarts: 2, ..SuitePlan::default() };
        for p in [2.0, 3.0] {
            let est = estimate_constant_lower(&g, &domain, p, &plan, seed).unwrap();
            if let Some(upper) = upper_bound_p2(&g, &domain).unwrap() {
                prop_assert!(est.c_lower <= upper * (1.0 + 1e-9), "p = {}: {} > {}", p, est.c_lower, upper);
            }
        }
    }

    #[test]
    fn holder_lift_never_increases_ratios(seed in any::<u64>(), n in 3usize..40) {
        let mut r = rng(seed);
        let g = random_connected_graph(n, 0.15, 1.0, &mut r);
        let domain = PiDomain::graph_ball(&g, 0, 3.0, 1.0).unwrap();
        let est = estimate_constant_lower(&g, &domain, 1.0, &SuitePlan::default().seeds_only(), seed).unwrap();
        let lift = holder_lift(&g, &domain, &est, 2.0).unwrap();
        prop_assert_eq!(lift.violations, 0);
        prop_assert!(lift.max_ratio_p_prime <= lift.max_ratio_p);
    }
}

#[test]
fn oracle_limit_is_enforced() {
    let mut r = rng(1);
    let g = random_connected_graph(9, 0.3, 1.0, &mut r);
    let domain = PiDomain::graph_ball(&g, 0, 9.0, 1.0).unwrap();
    assert!(matches!(exact_constant_p1_tiny(&g, &domain), Err(Error::OracleTooLarge { .. })));
}

#[test]
fn path_of_three_has_constant_one_third() {
    // P3 with unit masses and r = 2 covering all three vertices: the step
    // (0, 0, 1) has mean deviation 4/9 and mean gradient 2/3, so the ratio is
    // (4/9) / (2 · 2/3) = 1/3, and no function does better
    let g = metric_discretize::NetGraph::from_adjacency(1.0, vec![vec![1], vec![0, 2], vec![1]], vec![1.0; 3]).unwrap();
    let domain = PiDomain::graph_ball(&g, 1, 2.0, 1.0).unwrap();
    let step = VertexFunction::new(&g, vec![0.0, 0.0, 1.0]).unwrap();
    let s = pi_sides(&g, &domain, 1.0, &step).unwrap();
    assert!((s.lhs - 4.0 / 9.0).abs() <= 1e-15);
    assert!((s.ratio() - 1.0 / 3.0).abs() <= 1e-12);
    let exact = exact_constant_p1_tiny(&g, &domain).unwrap();
    assert!((exact - 1.0 / 3.0).abs() <= 1e-12, "{exact}");
}
