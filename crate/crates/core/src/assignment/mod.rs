//! The constrained patient-to-physician assignment.
//!
//! Children of two groups (Medicaid, other) in each tract are assigned to
//! physicians within `mi_max` miles, minimizing child-miles subject to
//! physician capacity (with a soft lower floor), tract congestion, vehicle
//! mobility, and Medicaid acceptance limits. Coverage is lexicographically
//! maximized first (or fixed at a fraction), then distance is minimized.
//!
//! The LP has pure network structure, so the default backend solves it as a
//! min-cost flow; the general simplex backend solves [`build_lp`] directly.

mod audit;
mod build;
mod equivalence;
mod export;
mod flow;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lp::LpError;
use crate::model::{ModelError, ScenarioInstance};

pub use audit::{audit, AuditViolation};
pub use build::{build_lp, AssignmentLp, RowKind};
pub use equivalence::{solutions_equivalent, EquivalenceReport, TractDifference};
pub use export::{write_assignment_csv, write_relaxations_csv};

/// Unit penalty on LC floor slack, relative to the longest arc.
pub const FLOOR_PENALTY_FACTOR: f64 = 1e4;

#[derive(Debug, Error)]
pub enum AssignmentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solver failure: {0}")]
    Solver(#[from] LpError),
    #[error("required coverage {required:.6} exceeds the maximum achievable {achievable:.6}")]
    InfeasibleCoverage { required: f64, achievable: f64 },
    #[error("assignment model infeasible: {0}")]
    Infeasible(String),
    #[error("returned flows fail the constraint audit: {0:?}")]
    Audit(Vec<AuditViolation>),
    #[error("solutions belong to different scenarios")]
    ScenarioMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Group {
    Medicaid,
    Other,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::Medicaid, Group::Other];

    pub fn as_str(self) -> &'static str {
        match self {
            Group::Medicaid => "medicaid",
            Group::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Network,
    Simplex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignmentOptions {
    pub backend: Backend,
    /// Shuffles the order in which arcs enter the solver; alternative optima
    /// may differ between seeds.
    pub arc_order_seed: Option<u64>,
    /// Re-check every constraint family on the returned flows.
    pub audit: bool,
}

impl Default for AssignmentOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Network,
            arc_order_seed: None,
            audit: cfg!(debug_assertions),
        }
    }
}

/// A physician whose LC floor could not be met.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relaxation {
    pub physician: usize,
    pub floor: f64,
    pub load: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentSolution {
    /// Medicaid flow per arc, aligned with `scenario.distances.arcs()`.
    pub flows_medicaid: Vec<f64>,
    /// Other-group flow per arc.
    pub flows_other: Vec<f64>,
    pub assigned_medicaid: f64,
    pub assigned_other: f64,
    pub achieved_coverage_fraction: f64,
    /// Child-miles, `Σ d_ij (n_ij^M + n_ij^O)`.
    pub total_distance: f64,
    /// Distance plus floor penalty: the phase-two objective.
    pub objective: f64,
    pub relaxation_report: Vec<Relaxation>,
    /// Tracts with no physician in range.
    pub unserved_tracts: Vec<usize>,
    pub backend: Backend,
    /// Pivots (network) or iterations (simplex) over both phases.
    pub iterations: usize,
    pub scenario_fingerprint: u64,
}

impl AssignmentSolution {
    pub fn flows(&self, g: Group) -> &[f64] {
        match g {
            Group::Medicaid => &self.flows_medicaid,
            Group::Other => &self.flows_other,
        }
    }

    /// Total patients at each physician.
    pub fn physician_loads(&self, scenario: &ScenarioInstance) -> Vec<f64> {
        let mut load = vec![0.0; scenario.physicians.len()];
        for (k, a) in scenario.distances.arcs().iter().enumerate() {
            load[a.physician] += self.flows_medicaid[k] + self.flows_other[k];
        }
        load
    }

    /// Nonzero flows as `(arc index, group, flow)`.
    pub fn nonzero_flows(&self) -> impl Iterator<Item = (usize, Group, f64)> + '_ {
        Group::BOTH.into_iter().flat_map(move |g| {
            self.flows(g)
                .iter()
                .enumerate()
                .filter(|(_, &f)| f > 0.0)
                .map(move |(k, &f)| (k, g, f))
        })
    }
}

/// FNV-1a over the quantities that determine the assignment LP.
pub fn scenario_fingerprint(s: &ScenarioInstance) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |v: u64| {
        for b in v.to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(s.tracts.len() as u64);
    eat(s.physicians.len() as u64);
    for t in &s.tracts {
        for v in [t.pop_medicaid, t.pop_other, t.mob_medicaid, t.mob_other] {
            eat(v.to_bits());
        }
    }
    for p in &s.physicians {
        eat(p.tract as u64);
        eat(p.pam.to_bits());
        eat(p.mc.to_bits());
    }
    for a in s.distances.arcs() {
        eat(a.tract as u64);
        eat(a.physician as u64);
        eat(a.miles.to_bits());
    }
    let p = &s.params;
    for v in [p.mi_max, p.mi_max_limited, p.pc, p.lc, p.cc] {
        eat(v.to_bits());
    }
    h
}

pub(crate) fn floor_penalty(s: &ScenarioInstance) -> f64 {
    FLOOR_PENALTY_FACTOR * s.distances.max_miles().max(1.0)
}

/// Arc processing order, optionally shuffled.
pub(crate) fn arc_order(n: usize, seed: Option<u64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = seed {
        order.shuffle(&mut crate::rng::substream(seed, "assignment/arc-order"));
    }
    order
}

/// Raw per-arc flows and floor usage produced by a backend.
pub(crate) struct RawFlows {
    pub medicaid: Vec<f64>,
    pub other: Vec<f64>,
    pub iterations: usize,
}

pub fn solve_assignment(scenario: &ScenarioInstance) -> Result<AssignmentSolution, AssignmentError> {
    solve_assignment_with(scenario, &AssignmentOptions::default())
}

pub fn solve_assignment_with(
    scenario: &ScenarioInstance,
    opts: &AssignmentOptions,
) -> Result<AssignmentSolution, AssignmentError> {
    scenario.validate()?;
    let raw = match opts.backend {
        Backend::Network => flow::solve(scenario, opts.arc_order_seed)?,
        Backend::Simplex => build::solve_with_simplex(scenario, opts.arc_order_seed)?,
    };
    let sol = assemble(scenario, raw, opts.backend);
    if opts.audit {
        let violations = audit(scenario, &sol, 1e-6);
        if !violations.is_empty() {
            return Err(AssignmentError::Audit(violations));
        }
    }
    Ok(sol)
}

fn assemble(scenario: &ScenarioInstance, raw: RawFlows, backend: Backend) -> AssignmentSolution {
    let arcs = scenario.distances.arcs();
    let clean = |v: Vec<f64>| -> Vec<f64> { v.into_iter().map(|f| if f > 1e-9 { f } else { 0.0 }).collect() };
    let flows_medicaid = clean(raw.medicaid);
    let flows_other = clean(raw.other);
    let assigned_medicaid: f64 = flows_medicaid.iter().sum();
    let assigned_other: f64 = flows_other.iter().sum();
    let total_distance: f64 = arcs
        .iter()
        .zip(flows_medicaid.iter().zip(&flows_other))
        .map(|(a, (m, o))| a.miles * (m + o))
        .sum();
    let p = &scenario.params;
    let floor = p.pc * p.lc;
    let penalty = floor_penalty(scenario);
    let mut load = vec![0.0; scenario.physicians.len()];
    for (k, a) in arcs.iter().enumerate() {
        load[a.physician] += flows_medicaid[k] + flows_other[k];
    }
    let relaxation_report: Vec<Relaxation> = load
        .iter()
        .enumerate()
        .filter(|(_, &l)| l < floor - 1e-9)
        .map(|(j, &l)| Relaxation {
            physician: j,
            floor,
            load: l,
            slack: floor - l,
        })
        .collect();
    let slack_total: f64 = relaxation_report.iter().map(|r| r.slack).sum();
    let total_pop = scenario.total_population();
    let assigned = assigned_medicaid + assigned_other;
    AssignmentSolution {
        assigned_medicaid,
        assigned_other,
        achieved_coverage_fraction: if total_pop > 0.0 { (assigned / total_pop).min(1.0) } else { 0.0 },
        total_distance,
        objective: total_distance + penalty * slack_total,
        relaxation_report,
        unserved_tracts: scenario.zero_arc_tracts(),
        backend,
        iterations: raw.iterations,
        scenario_fingerprint: scenario_fingerprint(scenario),
        flows_medicaid,
        flows_other,
    }
}

#[cfg(test)]
mod tests;
