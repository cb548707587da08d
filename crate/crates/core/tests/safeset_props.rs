use partial_control::safeset::brute_force_safe_grid;
use partial_control::{
    maximal_safe_set, sculpt_step, verify_maximality, verify_safe, ControlParams, IntervalSet,
    PiecewiseLinearMap, SafeSetResult, SolverOptions,
};
use proptest::prelude::*;

fn tent() -> PiecewiseLinearMap {
    PiecewiseLinearMap::asymmetric_tent()
}

fn solve(f: &PiecewiseLinearMap, u: f64, beta: f64) -> SafeSetResult {
    let p = ControlParams::new(u, beta, 0.5, 1.0).unwrap();
    maximal_safe_set(f, &p, &SolverOptions::default()).unwrap()
}

/// Expanding maps of `[0, 1]` with 2–4 pieces alternating between low and
/// high values.
fn expanding_map() -> impl Strategy<Value = PiecewiseLinearMap> {
    (2usize..5)
        .prop_flat_map(|n| prop::collection::vec(0.0..0.1f64, n + 1).prop_map(move |v| (n, v)))
        .prop_map(|(n, jitter)| {
            let xs: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
            let vs: Vec<f64> = jitter
                .iter()
                .enumerate()
                .map(|(k, j)| if k % 2 == 0 { *j } else { 1.0 - j })
                .collect();
            PiecewiseLinearMap::new(xs, vs).unwrap()
        })
}

fn bounds() -> impl Strategy<Value = (f64, f64)> {
    (0.005..0.1f64, 0.3..0.99f64).prop_map(|(beta, r)| (r * beta, beta))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sculpt_step_never_grows(
        (u, beta) in bounds(),
        pairs in prop::collection::vec((0.5..1.0f64, 0.0..0.2f64), 1..5),
    ) {
        let raw: Vec<(f64, f64)> = pairs.iter().map(|&(a, w)| (a, (a + w).min(1.0))).collect();
        let s = IntervalSet::from_pairs(&raw).unwrap();
        let p = ControlParams::new(u, beta, 0.5, 1.0).unwrap();
        let next = sculpt_step(&s, &tent(), &p, false).unwrap();
        prop_assert!(next.is_subset_of(&s, 0.0));
    }

    #[test]
    fn converged_sets_are_safe_and_maximal(f in expanding_map(), (u, beta) in bounds()) {
        let p = ControlParams::new(u, beta, 0.0, 1.0).unwrap();
        let r = maximal_safe_set(&f, &p, &SolverOptions::default()).unwrap();
        prop_assume!(r.converged && !r.safe_set.is_empty());
        prop_assert!(verify_safe(&r.safe_set, &f, &p, 1e-9).unwrap().safe);
        prop_assert!(r.maximality_residual.unwrap() <= 1e-8);
        let again = sculpt_step(&r.safe_set, &f, &p, false).unwrap();
        prop_assert!(again.hausdorff_distance(&r.safe_set).is_ok_and(|d| d <= 1e-9));
    }

    #[test]
    fn monotone_in_control_bound(beta in 0.01..0.1f64, r1 in 0.3..0.99f64, r2 in 0.3..0.99f64) {
        let (u1, u2) = if r1 <= r2 { (r1 * beta, r2 * beta) } else { (r2 * beta, r1 * beta) };
        let s1 = solve(&tent(), u1, beta).safe_set;
        let s2 = solve(&tent(), u2, beta).safe_set;
        prop_assert!(s1.is_subset_of(&s2, 1e-9));
    }

    #[test]
    fn kink_is_never_safe((u, beta) in bounds()) {
        prop_assert!(!solve(&tent(), u, beta).safe_set.contains(0.7));
    }
}

#[test]
fn diagonal_shift_keeps_fig5_set() {
    let s = solve(&tent(), 0.04, 0.05).safe_set;
    let shifted = solve(&tent(), 0.041, 0.051).safe_set;
    assert!(s.hausdorff_distance(&shifted).unwrap() <= 1e-9);
}

#[test]
fn upper_continuity_in_control_bound() {
    let base = solve(&tent(), 0.04, 0.05).safe_set;
    let dists: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|d| solve(&tent(), 0.04 + d, 0.05).safe_set.hausdorff_distance(&base).unwrap())
        .collect();
    assert!(dists[0] > dists[1] && dists[1] > dists[2], "{dists:?}");
    assert!(dists[2] < 1e-3);
}

#[test]
fn oracle_grid_is_inside_maximal_set() {
    let f = tent();
    for (u, beta) in [(0.04, 0.05), (0.06, 0.08), (0.025, 0.03)] {
        let p = ControlParams::new(u, beta, 0.5, 1.0).unwrap();
        let s = solve(&f, u, beta).safe_set;
        let g = brute_force_safe_grid(&f, &p, 2000, 41, 41).unwrap();
        assert!(g.to_interval_set().is_subset_of(&s, 2.0 * g.spacing), "({u}, {beta})");
    }
}

#[test]
fn maximality_residual_on_random_cells() {
    let f = tent();
    for (u, beta) in [(0.03, 0.04), (0.07, 0.09), (0.012, 0.015), (0.15, 0.19)] {
        let p = ControlParams::new(u, beta, 0.5, 1.0).unwrap();
        let s = solve(&f, u, beta).safe_set;
        if !s.is_empty() {
            assert!(verify_maximality(&s, &f, &p).unwrap() <= 1e-8);
        }
    }
}
