use super::*;
use crate::assignment::solve_assignment;
use crate::model::{two_tract_example, ScenarioBuilder, SystemParameters};

#[test]
fn two_tract_example_measures() {
    let s = two_tract_example(300.0);
    let sol = solve_assignment(&s).unwrap();
    let m = compute_measures(&s, &sol, Scope::Overall).unwrap();
    assert!((m.tracts[0].travel_cost - 2.0).abs() < 1e-12);
    assert!((m.tracts[1].travel_cost - 3.0).abs() < 1e-12);
    assert!((m.tracts[0].congestion - 200.0 / 300.0).abs() < 1e-12);
    assert!((m.tracts[1].congestion - 100.0 / 300.0).abs() < 1e-12);
    assert!(m.tracts.iter().all(|t| t.coverage == 1.0));
    let summary = summarize(&m);
    assert!((summary.travel_cost - 7.0 / 3.0).abs() < 1e-12);
}

#[test]
fn unserved_tract_gets_worst_values() {
    let mut b = ScenarioBuilder::new(SystemParameters { lc: 0.0, ..Default::default() });
    let t0 = b.tract(10.0, 10.0, 1.0, 1.0);
    b.tract(5.0, 5.0, 1.0, 1.0);
    let j = b.physician(t0, 1.0, 1.0);
    b.arc(t0, j, 1.0);
    let s = b.build().unwrap();
    let sol = solve_assignment(&s).unwrap();
    for scope in Scope::ALL {
        let m = compute_measures(&s, &sol, scope).unwrap();
        assert_eq!(m.tracts[1].travel_cost, 25.0);
        assert_eq!(m.tracts[1].congestion, 1.0);
        assert_eq!(m.tracts[1].coverage, 0.0);
    }
}

#[test]
fn half_served_tract() {
    // 50 of 100 children at 4 miles to a physician whose total load is 1250
    let mut b = ScenarioBuilder::new(SystemParameters { lc: 0.0, ..Default::default() });
    let t = b.tract(0.0, 100.0, 1.0, 1.0);
    let other = b.tract(0.0, 1200.0, 1.0, 1.0);
    let j = b.physician(t, 1.0, 1.0);
    b.arc(t, j, 4.0).arc(other, j, 1.0);
    let s = b.build().unwrap();
    let mut sol = solve_assignment(&s).unwrap();
    sol.flows_other = vec![50.0, 1200.0];
    let m = compute_measures(&s, &sol, Scope::Other).unwrap();
    assert_eq!(m.tracts[0].coverage, 0.5);
    assert!((m.tracts[0].travel_cost - 14.5).abs() < 1e-12);
    assert!((m.tracts[0].congestion - 0.75).abs() < 1e-12);
}

#[test]
fn zero_scope_population_is_not_applicable() {
    let s = {
        let mut b = ScenarioBuilder::new(SystemParameters { lc: 0.0, ..Default::default() });
        let t = b.tract(0.0, 10.0, 1.0, 1.0);
        b.tract(5.0, 5.0, 1.0, 1.0);
        let j = b.physician(t, 1.0, 1.0);
        b.arc(t, j, 1.0).arc(1, j, 2.0);
        b.build().unwrap()
    };
    let sol = solve_assignment(&s).unwrap();
    let m = compute_measures(&s, &sol, Scope::Medicaid).unwrap();
    assert!(!m.tracts[0].applicable && m.tracts[1].applicable);
    let sum = summarize(&m);
    assert_eq!(sum.population, 5.0);
}

#[test]
fn empty_scope_is_an_error() {
    let mut b = ScenarioBuilder::new(SystemParameters { lc: 0.0, ..Default::default() });
    let t = b.tract(0.0, 10.0, 1.0, 1.0);
    let j = b.physician(t, 1.0, 1.0);
    b.arc(t, j, 1.0);
    let s = b.build().unwrap();
    let sol = solve_assignment(&s).unwrap();
    assert_eq!(compute_measures(&s, &sol, Scope::Medicaid), Err(MetricsError::EmptyScope("medicaid")));
}

#[test]
fn aggregate_arithmetic() {
    let m = AccessibilityMeasures {
        scope: Scope::Overall,
        tracts: [2.0, 3.0]
            .iter()
            .map(|&tc| TractMeasure {
                population: 10.0,
                assigned: 10.0,
                coverage: 1.0,
                travel_cost: tc,
                congestion: 0.5,
                applicable: true,
            })
            .collect(),
    };
    let s = aggregate(&m, &[10.0, 10.0]).unwrap();
    assert_eq!(s.travel_cost, 2.5);
    let single = AccessibilityMeasures { scope: Scope::Overall, tracts: vec![m.tracts[0]] };
    let one = aggregate(&single, &[3.0]).unwrap();
    assert_eq!((one.coverage, one.travel_cost, one.congestion), (1.0, 2.0, 0.5));
    assert!(aggregate(&m, &[1.0]).is_err());
}

#[test]
fn quantiles_interpolate() {
    assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.5), 3.0);
    assert_eq!(quantile_sorted(&[0.0, 10.0], 0.25), 2.5);
    assert!(quantile_sorted(&[], 0.5).is_nan());
}
