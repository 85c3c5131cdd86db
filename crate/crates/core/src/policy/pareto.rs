use serde::{Deserialize, Serialize};

use crate::metrics::Scope;
use crate::policy::SweepPoint;

/// Relative tolerance used when none is given.
pub const DEFAULT_PARETO_EPSILON: f64 = 0.005;

/// A policy's outcome vector: coverage, travel cost and congestion for the
/// Medicaid scope, then the same for the other scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoCandidate {
    pub label: String,
    pub values: [f64; 6],
}

impl ParetoCandidate {
    pub fn from_sweep_point(label: impl Into<String>, p: &SweepPoint) -> Self {
        let m = p.summary(Scope::Medicaid);
        let o = p.summary(Scope::Other);
        Self {
            label: label.into(),
            values: [m.coverage, m.travel_cost, m.congestion, o.coverage, o.travel_cost, o.congestion],
        }
    }
}

// coverage is maximized, travel cost and congestion minimized
const MAXIMIZE: [bool; 6] = [true, false, false, true, false, false];

/// Relative improvement of `a` over `b` in measure `k`.
fn gain(a: f64, b: f64, k: usize) -> f64 {
    let scale = a.abs().max(b.abs()).max(1e-12);
    let d = if MAXIMIZE[k] { a - b } else { b - a };
    d / scale
}

fn dominates(a: &ParetoCandidate, b: &ParetoCandidate, eps: f64) -> bool {
    let gains: Vec<f64> = (0..6).map(|k| gain(a.values[k], b.values[k], k)).collect();
    gains.iter().any(|&g| g > eps) && gains.iter().all(|&g| g >= -eps)
}

/// Indices of candidates that no other candidate ε-dominates, in input
/// order.
pub fn pareto_filter(candidates: &[ParetoCandidate], eps: f64) -> Vec<usize> {
    (0..candidates.len())
        .filter(|&b| !(0..candidates.len()).any(|a| a != b && dominates(&candidates[a], &candidates[b], eps)))
        .collect()
}
