//! Per-tract accessibility measures and population-weighted summaries.
//!
//! For a scope (Medicaid, other, or all children) with flows `n_ij` and
//! population `p_i`:
//!
//! - coverage `C_i = Σ_j n_ij / p_i`
//! - travel cost `TC_i = Σ_j d_ij n_ij / p_i + mi_max (1 - C_i)`
//! - congestion `CG_i = Σ_j n_ij L_j / (PC p_i) + (1 - C_i)`, where `L_j` is
//!   physician `j`'s total load over both groups.

mod export;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{AssignmentSolution, Group};
use crate::model::ScenarioInstance;

pub use export::{write_measures_csv, write_measures_geojson};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("scope {0} has zero population in every tract")]
    EmptyScope(&'static str),
    #[error("solution does not match the scenario ({0})")]
    Mismatch(String),
    #[error("{0} weights for {1} tracts")]
    WeightLength(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Medicaid,
    Other,
    Overall,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Scope::Medicaid, Scope::Other, Scope::Overall];

    pub fn as_str(self) -> &'static str {
        match self {
            Scope::Medicaid => "medicaid",
            Scope::Other => "other",
            Scope::Overall => "overall",
        }
    }

    fn includes(self, g: Group) -> bool {
        matches!(
            (self, g),
            (Scope::Overall, _) | (Scope::Medicaid, Group::Medicaid) | (Scope::Other, Group::Other)
        )
    }

    pub fn population(self, t: &crate::model::CensusTract) -> f64 {
        match self {
            Scope::Medicaid => t.pop_medicaid,
            Scope::Other => t.pop_other,
            Scope::Overall => t.population(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TractMeasure {
    pub population: f64,
    pub assigned: f64,
    pub coverage: f64,
    pub travel_cost: f64,
    pub congestion: f64,
    /// False when the tract has no children in scope; measures are NaN then.
    pub applicable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibilityMeasures {
    pub scope: Scope,
    pub tracts: Vec<TractMeasure>,
}

impl AccessibilityMeasures {
    pub fn coverage(&self) -> Vec<f64> {
        self.tracts.iter().map(|t| t.coverage).collect()
    }

    pub fn travel_cost(&self) -> Vec<f64> {
        self.tracts.iter().map(|t| t.travel_cost).collect()
    }

    pub fn congestion(&self) -> Vec<f64> {
        self.tracts.iter().map(|t| t.congestion).collect()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.tracts.iter().map(|t| t.population).collect()
    }
}

pub fn compute_measures(
    s: &ScenarioInstance,
    sol: &AssignmentSolution,
    scope: Scope,
) -> Result<AccessibilityMeasures, MetricsError> {
    let arcs = s.distances.arcs();
    if sol.flows_medicaid.len() != arcs.len() || sol.flows_other.len() != arcs.len() {
        return Err(MetricsError::Mismatch(format!(
            "{} arcs, {} flows",
            arcs.len(),
            sol.flows_medicaid.len()
        )));
    }
    if s.tracts.iter().all(|t| scope.population(t) <= 0.0) {
        return Err(MetricsError::EmptyScope(scope.as_str()));
    }
    let load = sol.physician_loads(s);
    let p = &s.params;
    let tracts = s
        .tracts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let pop = scope.population(t);
            if pop <= 0.0 {
                return TractMeasure {
                    population: 0.0,
                    assigned: 0.0,
                    coverage: f64::NAN,
                    travel_cost: f64::NAN,
                    congestion: f64::NAN,
                    applicable: false,
                };
            }
            let mut assigned = 0.0;
            let mut miles = 0.0;
            let mut crowd = 0.0;
            for k in s.distances.tract_arc_range(i) {
                let a = arcs[k];
                let mut n = 0.0;
                for g in Group::BOTH {
                    if scope.includes(g) {
                        n += sol.flows(g)[k];
                    }
                }
                assigned += n;
                miles += a.miles * n;
                crowd += n * load[a.physician] / p.pc;
            }
            let coverage = (assigned / pop).clamp(0.0, 1.0);
            let unserved = 1.0 - coverage;
            TractMeasure {
                population: pop,
                assigned,
                coverage,
                travel_cost: miles / pop + p.mi_max * unserved,
                congestion: (crowd / pop + unserved).clamp(0.0, 1.0),
                applicable: true,
            }
        })
        .collect();
    Ok(AccessibilityMeasures { scope, tracts })
}

/// Measures for all three scopes, in [`Scope::ALL`] order.
pub fn compute_all(s: &ScenarioInstance, sol: &AssignmentSolution) -> Result<Vec<AccessibilityMeasures>, MetricsError> {
    Scope::ALL.iter().map(|&sc| compute_measures(s, sol, sc)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
}

impl Quantiles {
    fn of(mut v: Vec<f64>) -> Self {
        v.retain(|x| x.is_finite());
        v.sort_by(f64::total_cmp);
        let q = |p: f64| quantile_sorted(&v, p);
        Self {
            q05: q(0.05),
            q25: q(0.25),
            q50: q(0.5),
            q75: q(0.75),
            q95: q(0.95),
        }
    }
}

/// Linear-interpolation quantile of sorted values; NaN when empty.
pub fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub scope: Scope,
    pub population: f64,
    pub coverage: f64,
    pub travel_cost: f64,
    pub congestion: f64,
    pub coverage_quantiles: Quantiles,
    pub travel_cost_quantiles: Quantiles,
    pub congestion_quantiles: Quantiles,
}

/// Weighted means over applicable tracts. Non-applicable tracts and
/// non-positive weights are excluded.
pub fn aggregate(m: &AccessibilityMeasures, weights: &[f64]) -> Result<StateSummary, MetricsError> {
    if weights.len() != m.tracts.len() {
        return Err(MetricsError::WeightLength(weights.len(), m.tracts.len()));
    }
    let mut w_total = 0.0;
    let mut sums = [0.0; 3];
    for (t, &w) in m.tracts.iter().zip(weights) {
        if t.applicable && w > 0.0 {
            w_total += w;
            sums[0] += w * t.coverage;
            sums[1] += w * t.travel_cost;
            sums[2] += w * t.congestion;
        }
    }
    let mean = |x: f64| if w_total > 0.0 { x / w_total } else { f64::NAN };
    Ok(StateSummary {
        scope: m.scope,
        population: w_total,
        coverage: mean(sums[0]),
        travel_cost: mean(sums[1]),
        congestion: mean(sums[2]),
        coverage_quantiles: Quantiles::of(m.coverage()),
        travel_cost_quantiles: Quantiles::of(m.travel_cost()),
        congestion_quantiles: Quantiles::of(m.congestion()),
    })
}

/// [`aggregate`] weighted by the scope's own populations.
pub fn summarize(m: &AccessibilityMeasures) -> StateSummary {
    aggregate(m, &m.populations()).expect("own populations match")
}

/// Pearson correlation between coverage and travel cost over applicable
/// tracts; `None` when either is constant.
pub fn coverage_travel_correlation(m: &AccessibilityMeasures) -> Option<f64> {
    let pairs: Vec<(f64, f64)> = m
        .tracts
        .iter()
        .filter(|t| t.applicable)
        .map(|t| (t.coverage, t.travel_cost))
        .collect();
    pearson(&pairs)
}

pub(crate) fn pearson(pairs: &[(f64, f64)]) -> Option<f64> {
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return None;
    }
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx).powi(2);
        syy += (y - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

#[cfg(test)]
mod tests;
