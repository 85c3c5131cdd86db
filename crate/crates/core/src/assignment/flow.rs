//! The assignment LP as a min-cost flow.
//!
//! Each tract-group with children is a source. Near arcs run straight to the
//! physician; far arcs pass through a per-tract-group hub whose inflow is
//! capped at the mobile population. Medicaid flow enters a physician through
//! an acceptance node capped at `PC·MC·pam`. Each physician drains through a
//! floor arc (capacity `PC·LC`, cost `-penalty`) and a regular arc, either
//! into its tract's congestion node or straight to the sink. Unassigned
//! children reach the sink through a collector.

use crate::assignment::{arc_order, floor_penalty, AssignmentError, RawFlows};
use crate::lp::{FlowNetwork, FlowStatus};
use crate::model::{CoverageMode, ScenarioInstance};

const NONE: usize = usize::MAX;

struct Built {
    net: FlowNetwork<f64>,
    /// Network arc per (scenario arc, group).
    arc_of: Vec<[usize; 2]>,
    collector: usize,
    total: f64,
}

fn build(s: &ScenarioInstance, seed: Option<u64>) -> Built {
    let p = &s.params;
    let arcs = s.distances.arcs();
    let mut net = FlowNetwork::new();
    let total = s.total_population();
    let sink = net.add_node(-total);
    let collector_node = net.add_node(0.0);

    let mut source = vec![[NONE; 2]; s.tracts.len()];
    let mut hub = vec![[NONE; 2]; s.tracts.len()];
    for (i, t) in s.tracts.iter().enumerate() {
        for (g, (pop, mob)) in [(t.pop_medicaid, t.mob_medicaid), (t.pop_other, t.mob_other)]
            .into_iter()
            .enumerate()
        {
            if pop <= 0.0 {
                continue;
            }
            let u = net.add_node(pop);
            source[i][g] = u;
            net.add_arc(u, collector_node, f64::INFINITY, 0.0);
            if s.distances.tract_arcs(i).iter().any(|a| a.miles >= p.mi_max_limited) {
                let h = net.add_node(0.0);
                hub[i][g] = h;
                net.add_arc(u, h, mob * pop, 0.0);
            }
        }
    }

    let congestion: Vec<usize> = s
        .tracts
        .iter()
        .map(|t| {
            let md = t.physician_count();
            if md >= 2 {
                let c = net.add_node(0.0);
                net.add_arc(c, sink, p.pc * p.cc * md as f64, 0.0);
                c
            } else {
                NONE
            }
        })
        .collect();

    let penalty = floor_penalty(s);
    let mut phys = vec![NONE; s.physicians.len()];
    let mut phys_m = vec![NONE; s.physicians.len()];
    for (j, ph) in s.physicians.iter().enumerate() {
        let v = net.add_node(0.0);
        let vm = net.add_node(0.0);
        phys[j] = v;
        phys_m[j] = vm;
        net.add_arc(vm, v, p.pc * ph.mc * ph.pam, 0.0);
        let dest = if congestion[ph.tract] != NONE { congestion[ph.tract] } else { sink };
        net.add_arc(v, dest, p.pc * p.lc, -penalty);
        net.add_arc(v, dest, p.pc * (1.0 - p.lc), 0.0);
    }

    let mut arc_of = vec![[NONE; 2]; arcs.len()];
    for k in arc_order(arcs.len(), seed) {
        let a = arcs[k];
        for g in 0..2 {
            let from = if a.miles >= p.mi_max_limited { hub[a.tract][g] } else { source[a.tract][g] };
            if from == NONE {
                continue;
            }
            let to = if g == 0 { phys_m[a.physician] } else { phys[a.physician] };
            arc_of[k][g] = net.add_arc(from, to, f64::INFINITY, a.miles);
        }
    }
    let collector = net.add_arc(collector_node, sink, f64::INFINITY, 0.0);
    Built {
        net,
        arc_of,
        collector,
        total,
    }
}

pub(crate) fn solve(s: &ScenarioInstance, seed: Option<u64>) -> Result<RawFlows, AssignmentError> {
    let mut b = build(s, seed);
    let costs: Vec<f64> = (0..b.net.n_arcs()).map(|e| b.net.arc(e).3).collect();

    // phase one: only unassigned children cost anything
    for e in 0..b.net.n_arcs() {
        b.net.set_cost(e, 0.0);
    }
    b.net.set_cost(b.collector, 1.0);
    let p1 = b.net.solve()?;
    if p1.status != FlowStatus::Optimal {
        return Err(AssignmentError::Infeasible(format!("phase one ended {:?}", p1.status)));
    }
    let unassigned = p1.flow[b.collector];
    let delta = 1e-9 * (1.0 + b.total);
    let cap = match s.params.coverage {
        CoverageMode::MaxCoverage => unassigned,
        CoverageMode::FixedFraction(alpha) => {
            let allowed = (1.0 - alpha) * b.total;
            if unassigned > allowed + delta {
                return Err(AssignmentError::InfeasibleCoverage {
                    required: alpha,
                    achievable: if b.total > 0.0 { 1.0 - unassigned / b.total } else { 0.0 },
                });
            }
            allowed.max(unassigned)
        }
    };

    for (e, &c) in costs.iter().enumerate() {
        b.net.set_cost(e, c);
    }
    b.net.set_capacity(b.collector, cap);
    let p2 = b.net.solve()?;
    if p2.status != FlowStatus::Optimal {
        return Err(AssignmentError::Infeasible(format!("phase two ended {:?}", p2.status)));
    }
    let pick = |g: usize| -> Vec<f64> {
        b.arc_of
            .iter()
            .map(|e| if e[g] == NONE { 0.0 } else { p2.flow[e[g]].max(0.0) })
            .collect()
    };
    Ok(RawFlows {
        medicaid: pick(0),
        other: pick(1),
        iterations: p1.pivots + p2.pivots,
    })
}
