use super::*;
use crate::model::{two_tract_example, CoverageMode, Profile, ScenarioBuilder, SystemParameters};

fn flow_on(s: &ScenarioInstance, sol: &AssignmentSolution, i: usize, j: usize) -> f64 {
    let k = s.distances.tract_arc_range(i).find(|&k| s.distances.arcs()[k].physician == j).unwrap();
    sol.flows_medicaid[k] + sol.flows_other[k]
}

fn both_backends() -> [AssignmentOptions; 2] {
    [
        AssignmentOptions { audit: true, ..Default::default() },
        AssignmentOptions { backend: Backend::Simplex, audit: true, ..Default::default() },
    ]
}

#[test]
fn two_tract_example_routes_to_nearest() {
    let s = two_tract_example(300.0);
    for opts in both_backends() {
        let sol = solve_assignment_with(&s, &opts).unwrap();
        assert!((sol.total_distance - 700.0).abs() < 1e-9);
        assert!((flow_on(&s, &sol, 0, 0) - 200.0).abs() < 1e-9);
        assert!((flow_on(&s, &sol, 1, 1) - 100.0).abs() < 1e-9);
        assert!((sol.achieved_coverage_fraction - 1.0).abs() < 1e-12);
    }
}

#[test]
fn tight_capacity_spills_to_second_physician() {
    let s = two_tract_example(150.0);
    for opts in both_backends() {
        let sol = solve_assignment_with(&s, &opts).unwrap();
        assert!((sol.total_distance - 1000.0).abs() < 1e-9, "{}", sol.total_distance);
        assert!((flow_on(&s, &sol, 0, 0) - 150.0).abs() < 1e-9);
        assert!((flow_on(&s, &sol, 0, 1) - 50.0).abs() < 1e-9);
        assert!((flow_on(&s, &sol, 1, 1) - 100.0).abs() < 1e-9);
    }
}

#[test]
fn mobility_row_caps_far_medicaid_flow() {
    let mut b = ScenarioBuilder::new(SystemParameters { lc: 0.0, ..Default::default() });
    let t = b.tract(100.0, 0.0, 0.5, 1.0);
    let j = b.physician(t, 1.0, 1.0);
    b.arc(t, j, 15.0);
    let s = b.build().unwrap();
    for opts in both_backends() {
        let sol = solve_assignment_with(&s, &opts).unwrap();
        assert!((sol.assigned_medicaid - 50.0).abs() < 1e-9);
        assert!((sol.achieved_coverage_fraction - 0.5).abs() < 1e-12);
    }
}

#[test]
fn ten_miles_counts_as_far() {
    let mut b = ScenarioBuilder::new(SystemParameters { lc: 0.0, ..Default::default() });
    let t = b.tract(0.0, 100.0, 1.0, 0.3);
    let j = b.physician(t, 1.0, 1.0);
    b.arc(t, j, 10.0);
    let s = b.build().unwrap();
    let sol = solve_assignment(&s).unwrap();
    assert!((sol.assigned_other - 30.0).abs() < 1e-9);
}

#[test]
fn row_census_of_minimal_instance() {
    let mut b = ScenarioBuilder::new(SystemParameters::default());
    let t = b.tract(10.0, 10.0, 1.0, 1.0);
    let j = b.physician(t, 1.0, 0.32);
    b.arc(t, j, 5.0);
    let a = build_lp(&b.build().unwrap());
    assert_eq!(a.count(|k| matches!(k, RowKind::CapacityUpper { .. })), 1);
    assert_eq!(a.count(|k| matches!(k, RowKind::CapacityFloor { .. })), 1);
    assert_eq!(a.count(|k| matches!(k, RowKind::Congestion { .. })), 0);
    assert_eq!(a.count(|k| matches!(k, RowKind::Mobility { .. })), 2);
    assert_eq!(a.count(|k| matches!(k, RowKind::MedicaidAcceptance { .. })), 1);
    assert_eq!(a.count(|k| matches!(k, RowKind::Population { .. })), 2);
    assert_eq!(a.count(|k| matches!(k, RowKind::Coverage)), 1);
    // both mobility rows are empty: the only arc is near
    for (r, k) in a.row_kinds.iter().enumerate() {
        if matches!(k, RowKind::Mobility { .. }) {
            assert!(a.lp.row(r).coefs.is_empty());
        }
    }
}

#[test]
fn three_local_physicians_give_one_congestion_row() {
    let p = SystemParameters::default();
    let mut b = ScenarioBuilder::new(p);
    let t = b.tract(10.0, 10.0, 1.0, 1.0);
    for _ in 0..3 {
        let j = b.physician(t, 1.0, 0.32);
        b.arc(t, j, 1.0);
    }
    let a = build_lp(&b.build().unwrap());
    let rows: Vec<usize> = (0..a.row_kinds.len())
        .filter(|&r| matches!(a.row_kinds[r], RowKind::Congestion { .. }))
        .collect();
    assert_eq!(rows.len(), 1);
    assert!((a.lp.row(rows[0]).rhs - p.pc * p.cc * 3.0).abs() < 1e-9);
}

#[test]
fn far_arc_enters_medicaid_mobility_row() {
    let mut b = ScenarioBuilder::new(SystemParameters::default());
    let t = b.tract(10.0, 10.0, 0.8, 1.0);
    let j = b.physician(t, 1.0, 0.32);
    b.arc(t, j, 12.0);
    let a = build_lp(&b.build().unwrap());
    let r = a
        .row_kinds
        .iter()
        .position(|k| *k == RowKind::Mobility { tract: 0, group: Group::Medicaid })
        .unwrap();
    assert_eq!(a.lp.row(r).coefs, vec![(a.var_medicaid[0], 1.0)]);
}

#[test]
fn zero_arc_tract_is_unserved() {
    let mut b = ScenarioBuilder::new(SystemParameters { lc: 0.0, ..Default::default() });
    let t0 = b.tract(10.0, 10.0, 1.0, 1.0);
    b.tract(5.0, 5.0, 1.0, 1.0);
    let j = b.physician(t0, 1.0, 1.0);
    b.arc(t0, j, 1.0);
    let s = b.build().unwrap();
    let sol = solve_assignment(&s).unwrap();
    assert_eq!(sol.unserved_tracts, vec![1]);
    assert!((sol.achieved_coverage_fraction - 20.0 / 30.0).abs() < 1e-12);
}

#[test]
fn unmet_floor_is_reported() {
    let mut b = ScenarioBuilder::new(SystemParameters::default());
    let t = b.tract(100.0, 100.0, 1.0, 1.0);
    let j = b.physician(t, 1.0, 1.0);
    b.arc(t, j, 1.0);
    let s = b.build().unwrap();
    let sol = solve_assignment(&s).unwrap();
    assert_eq!(sol.relaxation_report.len(), 1);
    assert!((sol.relaxation_report[0].slack - (625.0 - 200.0)).abs() < 1e-9);
}

#[test]
fn fixed_fraction_above_maximum_reports_achievable() {
    let mut b = ScenarioBuilder::new(SystemParameters {
        lc: 0.0,
        coverage: CoverageMode::FixedFraction(0.99),
        ..Default::default()
    });
    let t = b.tract(0.0, 100.0, 1.0, 0.9);
    let j = b.physician(t, 1.0, 1.0);
    b.arc(t, j, 20.0);
    let s = b.build().unwrap();
    for opts in both_backends() {
        match solve_assignment_with(&s, &opts) {
            Err(AssignmentError::InfeasibleCoverage { required, achievable }) => {
                assert_eq!(required, 0.99);
                assert!((achievable - 0.9).abs() < 1e-9);
            }
            other => panic!("expected infeasible coverage, got {other:?}"),
        }
    }
}

#[test]
fn fixed_fraction_below_maximum_assigns_exactly_alpha() {
    let mut b = ScenarioBuilder::new(SystemParameters {
        lc: 0.0,
        coverage: CoverageMode::FixedFraction(0.5),
        ..Default::default()
    });
    let t = b.tract(0.0, 100.0, 1.0, 1.0);
    let j = b.physician(t, 1.0, 1.0);
    b.arc(t, j, 4.0);
    let s = b.build().unwrap();
    let sol = solve_assignment(&s).unwrap();
    assert!((sol.assigned_other - 50.0).abs() < 1e-6);
}

#[test]
fn backends_agree_on_synthetic_instances() {
    for seed in 0..6 {
        let s = crate::model::generate_synthetic_state(seed, 25, 30, Profile::GeorgiaLike).unwrap();
        let a = solve_assignment(&s).unwrap();
        let b = solve_assignment_with(&s, &AssignmentOptions { backend: Backend::Simplex, audit: true, ..Default::default() }).unwrap();
        let cov = (a.assigned_medicaid + a.assigned_other) - (b.assigned_medicaid + b.assigned_other);
        assert!(cov.abs() < 1e-6 * (1.0 + s.total_population()), "seed {seed}: coverage {cov}");
        assert!((a.objective - b.objective).abs() <= 1e-6 * (1.0 + b.objective.abs()), "seed {seed}: {} vs {}", a.objective, b.objective);
    }
}

#[test]
fn identical_solutions_are_equivalent() {
    let s = two_tract_example(300.0);
    let a = solve_assignment(&s).unwrap();
    let r = solutions_equivalent(&a, &a, &s, 999, 1).unwrap();
    assert!(r.differences.iter().all(|d| d.travel_cost == 0.0));
    assert_eq!(r.p_value, 1.0);
}

#[test]
fn shuffled_arc_order_keeps_objective() {
    // two equidistant physicians make the optimum non-unique
    let mut b = ScenarioBuilder::new(SystemParameters { lc: 0.0, ..Default::default() });
    let t = b.tract(60.0, 60.0, 1.0, 1.0);
    let j1 = b.physician(t, 1.0, 1.0);
    let j2 = b.physician(t, 1.0, 1.0);
    b.arc(t, j1, 3.0).arc(t, j2, 3.0);
    let s = b.build().unwrap();
    let a = solve_assignment(&s).unwrap();
    for seed in 0..5 {
        let o = solve_assignment_with(&s, &AssignmentOptions { arc_order_seed: Some(seed), audit: true, ..Default::default() }).unwrap();
        assert!((a.total_distance - o.total_distance).abs() < 1e-9);
    }
}

#[test]
fn mismatched_scenarios_rejected() {
    let s1 = two_tract_example(300.0);
    let s2 = two_tract_example(150.0);
    let a = solve_assignment(&s1).unwrap();
    let b = solve_assignment(&s2).unwrap();
    assert!(matches!(solutions_equivalent(&a, &b, &s1, 10, 0), Err(AssignmentError::ScenarioMismatch)));
}
