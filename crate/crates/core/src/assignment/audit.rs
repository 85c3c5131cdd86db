//! Independent re-check of returned flows against every constraint family,
//! computed straight from the scenario rather than from the solver's model.

use serde::{Deserialize, Serialize};

use crate::assignment::AssignmentSolution;
use crate::model::{CoverageMode, ScenarioInstance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub family: &'static str,
    /// Tract, physician or arc index depending on the family.
    pub index: usize,
    pub excess: f64,
}

/// Every violation larger than `tol` (absolute).
pub fn audit(s: &ScenarioInstance, sol: &AssignmentSolution, tol: f64) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    let mut check = |family: &'static str, index: usize, excess: f64| {
        if !(excess <= tol) {
            out.push(AuditViolation { family, index, excess });
        }
    };
    let p = &s.params;
    let arcs = s.distances.arcs();
    if sol.flows_medicaid.len() != arcs.len() || sol.flows_other.len() != arcs.len() {
        check("shape", 0, f64::INFINITY);
        return out;
    }

    let mut load = vec![0.0; s.physicians.len()];
    let mut medicaid_load = vec![0.0; s.physicians.len()];
    let mut tract_m = vec![0.0; s.tracts.len()];
    let mut tract_o = vec![0.0; s.tracts.len()];
    let mut far_m = vec![0.0; s.tracts.len()];
    let mut far_o = vec![0.0; s.tracts.len()];
    for (k, a) in arcs.iter().enumerate() {
        let (m, o) = (sol.flows_medicaid[k], sol.flows_other[k]);
        check("nonnegativity", k, -m.min(o));
        check("arc_range", k, if m + o > 0.0 { a.miles - p.mi_max } else { 0.0 });
        load[a.physician] += m + o;
        medicaid_load[a.physician] += m;
        tract_m[a.tract] += m;
        tract_o[a.tract] += o;
        if a.miles >= p.mi_max_limited {
            far_m[a.tract] += m;
            far_o[a.tract] += o;
        }
    }
    for (i, t) in s.tracts.iter().enumerate() {
        check("population", i, tract_m[i] - t.pop_medicaid);
        check("population", i, tract_o[i] - t.pop_other);
        check("mobility", i, far_m[i] - t.mob_medicaid * t.pop_medicaid);
        check("mobility", i, far_o[i] - t.mob_other * t.pop_other);
        let md = t.physician_count();
        if md >= 2 {
            let at: f64 = t.local_physicians.iter().map(|&j| load[j]).sum();
            check("congestion", i, at - p.pc * p.cc * md as f64);
        }
        if s.distances.tract_arc_range(i).is_empty() {
            check("unserved_flow", i, tract_m[i] + tract_o[i]);
        }
    }
    let floor = p.pc * p.lc;
    for (j, ph) in s.physicians.iter().enumerate() {
        check("capacity", j, load[j] - p.pc);
        check("medicaid", j, medicaid_load[j] - p.pc * ph.mc * ph.pam);
        let slack = sol
            .relaxation_report
            .iter()
            .find(|r| r.physician == j)
            .map_or(0.0, |r| r.slack);
        check("capacity_floor", j, floor - load[j] - slack);
    }
    if let CoverageMode::FixedFraction(alpha) = p.coverage {
        let assigned: f64 = tract_m.iter().chain(&tract_o).sum();
        check("coverage", 0, alpha * s.total_population() - assigned - 1e-9 * (1.0 + s.total_population()));
    }
    out
}
