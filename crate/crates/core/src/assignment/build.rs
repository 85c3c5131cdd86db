use crate::assignment::{arc_order, floor_penalty, AssignmentError, Group, RawFlows};
use crate::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::model::{CoverageMode, ScenarioInstance};

/// What a row of the assignment LP encodes, with the tract or physician it
/// belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    CapacityUpper { physician: usize },
    CapacityFloor { physician: usize },
    Congestion { tract: usize },
    Mobility { tract: usize, group: Group },
    MedicaidAcceptance { physician: usize },
    Population { tract: usize, group: Group },
    Coverage,
}

#[derive(Debug, Clone)]
pub struct AssignmentLp {
    pub lp: LinearProgram<f64>,
    pub row_kinds: Vec<RowKind>,
    /// Medicaid flow variable per arc.
    pub var_medicaid: Vec<usize>,
    pub var_other: Vec<usize>,
    /// LC floor slack variable per physician.
    pub floor_slack: Vec<usize>,
    pub coverage_row: usize,
    pub penalty: f64,
}

impl AssignmentLp {
    pub fn count(&self, pred: impl Fn(&RowKind) -> bool) -> usize {
        self.row_kinds.iter().filter(|k| pred(k)).count()
    }
}

/// The assignment LP with the phase-two objective (distance plus floor
/// penalty). Under `MaxCoverage` the coverage row carries a zero right-hand
/// side until phase one fixes it.
pub fn build_lp(s: &ScenarioInstance) -> AssignmentLp {
    build_lp_ordered(s, None)
}

pub(crate) fn build_lp_ordered(s: &ScenarioInstance, seed: Option<u64>) -> AssignmentLp {
    let p = &s.params;
    let arcs = s.distances.arcs();
    let penalty = floor_penalty(s);
    let mut lp = LinearProgram::new();
    let mut var_medicaid = vec![0; arcs.len()];
    let mut var_other = vec![0; arcs.len()];
    for k in arc_order(arcs.len(), seed) {
        let a = arcs[k];
        var_medicaid[k] = lp.add_var(format!("nM_{}_{}", a.tract, a.physician), 0.0, f64::INFINITY, a.miles);
        var_other[k] = lp.add_var(format!("nO_{}_{}", a.tract, a.physician), 0.0, f64::INFINITY, a.miles);
    }
    let floor = p.pc * p.lc;
    let floor_slack: Vec<usize> = (0..s.physicians.len())
        .map(|j| lp.add_var(format!("lc_slack_{j}"), 0.0, floor, penalty))
        .collect();

    let mut kinds = Vec::new();
    let both = |k: usize| [(var_medicaid[k], 1.0), (var_other[k], 1.0)];

    for j in 0..s.physicians.len() {
        let coefs: Vec<(usize, f64)> = s.distances.physician_arcs(j).iter().flat_map(|&k| both(k)).collect();
        lp.add_row(format!("cap_{j}"), coefs.clone(), Sense::Le, p.pc);
        kinds.push(RowKind::CapacityUpper { physician: j });
        let mut floor_coefs = coefs;
        floor_coefs.push((floor_slack[j], 1.0));
        lp.add_row(format!("floor_{j}"), floor_coefs, Sense::Ge, floor);
        kinds.push(RowKind::CapacityFloor { physician: j });
    }
    for (i, t) in s.tracts.iter().enumerate() {
        let md = t.physician_count();
        if md >= 2 {
            let coefs: Vec<(usize, f64)> = t
                .local_physicians
                .iter()
                .flat_map(|&j| s.distances.physician_arcs(j).iter().flat_map(|&k| both(k)))
                .collect();
            lp.add_row(format!("congestion_{i}"), coefs, Sense::Le, p.pc * p.cc * md as f64);
            kinds.push(RowKind::Congestion { tract: i });
        }
    }
    for (i, t) in s.tracts.iter().enumerate() {
        for g in Group::BOTH {
            let (vars, mob, pop) = match g {
                Group::Medicaid => (&var_medicaid, t.mob_medicaid, t.pop_medicaid),
                Group::Other => (&var_other, t.mob_other, t.pop_other),
            };
            let coefs: Vec<(usize, f64)> = s
                .distances
                .tract_arc_range(i)
                .filter(|&k| arcs[k].miles >= p.mi_max_limited)
                .map(|k| (vars[k], 1.0))
                .collect();
            lp.add_row(format!("mobility_{}_{i}", g.as_str()), coefs, Sense::Le, mob * pop);
            kinds.push(RowKind::Mobility { tract: i, group: g });
        }
    }
    for (j, ph) in s.physicians.iter().enumerate() {
        let coefs: Vec<(usize, f64)> = s.distances.physician_arcs(j).iter().map(|&k| (var_medicaid[k], 1.0)).collect();
        lp.add_row(format!("medicaid_{j}"), coefs, Sense::Le, p.pc * ph.mc * ph.pam);
        kinds.push(RowKind::MedicaidAcceptance { physician: j });
    }
    for (i, t) in s.tracts.iter().enumerate() {
        for g in Group::BOTH {
            let (vars, pop) = match g {
                Group::Medicaid => (&var_medicaid, t.pop_medicaid),
                Group::Other => (&var_other, t.pop_other),
            };
            let coefs: Vec<(usize, f64)> = s.distances.tract_arc_range(i).map(|k| (vars[k], 1.0)).collect();
            lp.add_row(format!("population_{}_{i}", g.as_str()), coefs, Sense::Le, pop);
            kinds.push(RowKind::Population { tract: i, group: g });
        }
    }
    let all: Vec<(usize, f64)> = (0..arcs.len()).flat_map(both).collect();
    let rhs = match p.coverage {
        CoverageMode::MaxCoverage => 0.0,
        CoverageMode::FixedFraction(a) => a * s.total_population(),
    };
    let coverage_row = lp.add_row("coverage", all, Sense::Ge, rhs);
    kinds.push(RowKind::Coverage);

    AssignmentLp {
        lp,
        row_kinds: kinds,
        var_medicaid,
        var_other,
        floor_slack,
        coverage_row,
        penalty,
    }
}

/// Two-phase solve of [`build_lp`] with the general simplex.
pub(crate) fn solve_with_simplex(s: &ScenarioInstance, seed: Option<u64>) -> Result<RawFlows, AssignmentError> {
    let mut a = build_lp_ordered(s, seed);
    let total = s.total_population();
    let phase2_cost = a.lp.objective().to_vec();

    let mut phase1 = vec![0.0; a.lp.n_vars()];
    for k in 0..a.var_medicaid.len() {
        phase1[a.var_medicaid[k]] = -1.0;
        phase1[a.var_other[k]] = -1.0;
    }
    a.lp.set_objective(phase1);
    a.lp.set_rhs(a.coverage_row, 0.0);
    let p1 = solve_lp(&a.lp, 1e-9)?;
    if p1.status != LpStatus::Optimal {
        return Err(AssignmentError::Infeasible(format!("phase one ended {:?}", p1.status)));
    }
    let best = -p1.objective_value;
    let rhs = match s.params.coverage {
        CoverageMode::MaxCoverage => best,
        CoverageMode::FixedFraction(alpha) => {
            let need = alpha * total;
            if best < need - 1e-9 * (1.0 + total) {
                return Err(AssignmentError::InfeasibleCoverage {
                    required: alpha,
                    achievable: if total > 0.0 { best / total } else { 0.0 },
                });
            }
            need.min(best)
        }
    };
    a.lp.set_objective(phase2_cost);
    a.lp.set_rhs(a.coverage_row, rhs.max(0.0));
    let p2 = solve_lp(&a.lp, 1e-9)?;
    if p2.status != LpStatus::Optimal {
        return Err(AssignmentError::Infeasible(format!("phase two ended {:?}", p2.status)));
    }
    let medicaid = a.var_medicaid.iter().map(|&v| p2.primal[v].max(0.0)).collect();
    let other = a.var_other.iter().map(|&v| p2.primal[v].max(0.0)).collect();
    Ok(RawFlows {
        medicaid,
        other,
        iterations: p1.iterations + p2.iterations,
    })
}
