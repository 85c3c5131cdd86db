use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assignment::{scenario_fingerprint, AssignmentError, AssignmentSolution};
use crate::metrics::{compute_measures, Scope};
use crate::model::ScenarioInstance;
use crate::rng::substream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TractDifference {
    pub tract: usize,
    pub coverage: f64,
    pub travel_cost: f64,
    pub congestion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    /// `a - b` per tract with children, overall scope.
    pub differences: Vec<TractDifference>,
    pub total_distance_difference: f64,
    pub mean_travel_cost_difference: f64,
    pub max_abs_travel_cost_difference: f64,
    /// Two-sided sign-permutation p-value for a zero mean travel-cost
    /// difference.
    pub p_value: f64,
    pub permutations: usize,
}

/// Compares two feasible solutions of the same scenario tract by tract.
pub fn solutions_equivalent(
    a: &AssignmentSolution,
    b: &AssignmentSolution,
    scenario: &ScenarioInstance,
    permutations: usize,
    seed: u64,
) -> Result<EquivalenceReport, AssignmentError> {
    let fp = scenario_fingerprint(scenario);
    if a.scenario_fingerprint != fp || b.scenario_fingerprint != fp {
        return Err(AssignmentError::ScenarioMismatch);
    }
    let ma = compute_measures(scenario, a, Scope::Overall).map_err(|e| AssignmentError::Infeasible(e.to_string()))?;
    let mb = compute_measures(scenario, b, Scope::Overall).map_err(|e| AssignmentError::Infeasible(e.to_string()))?;
    let differences: Vec<TractDifference> = ma
        .tracts
        .iter()
        .zip(&mb.tracts)
        .enumerate()
        .filter(|(_, (x, _))| x.applicable)
        .map(|(i, (x, y))| TractDifference {
            tract: i,
            coverage: x.coverage - y.coverage,
            travel_cost: x.travel_cost - y.travel_cost,
            congestion: x.congestion - y.congestion,
        })
        .collect();
    let d: Vec<f64> = differences.iter().map(|t| t.travel_cost).collect();
    let n = d.len().max(1) as f64;
    let observed = (d.iter().sum::<f64>() / n).abs();
    let mut rng = substream(seed, "assignment/sign-permutation");
    let tol = 1e-12 * (1.0 + observed);
    let mut extreme = 0usize;
    for _ in 0..permutations {
        let s: f64 = d.iter().map(|&x| if rng.random::<bool>() { x } else { -x }).sum();
        if (s / n).abs() >= observed - tol {
            extreme += 1;
        }
    }
    Ok(EquivalenceReport {
        total_distance_difference: a.total_distance - b.total_distance,
        mean_travel_cost_difference: d.iter().sum::<f64>() / n,
        max_abs_travel_cost_difference: d.iter().fold(0.0, |m, x| m.max(x.abs())),
        p_value: (1 + extreme) as f64 / (1 + permutations) as f64,
        permutations,
        differences,
    })
}
