//! Shared test oracles: an exact rational simplex, a small random instance
//! generator, and a constraint re-checker that reads only the scenario and
//! the returned flows.
#![allow(dead_code)]

use num::{BigRational, One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachcare::assignment::{AssignmentSolution, FLOOR_PENALTY_FACTOR};
use reachcare::model::{CoverageMode, ScenarioBuilder, ScenarioInstance, SystemParameters};

pub type Rat = BigRational;

pub fn rat(v: f64) -> Rat {
    Rat::from_float(v).expect("finite")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct ExactLp {
    pub n: usize,
    pub cost: Vec<Rat>,
    pub rows: Vec<(Vec<(usize, Rat)>, Sense, Rat)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Optimal { value: Rat, x: Vec<Rat> },
    Infeasible,
    Unbounded,
}

struct Tableau {
    t: Vec<Vec<Rat>>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c].clone();
        for v in self.t[r].iter_mut() {
            *v = &*v / &p;
        }
        let row = self.t[r].clone();
        for (i, other) in self.t.iter_mut().enumerate() {
            if i == r || other[c].is_zero() {
                continue;
            }
            let f = other[c].clone();
            for (v, w) in other.iter_mut().zip(&row) {
                if !w.is_zero() {
                    *v -= &f * w;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Bland's rule: smallest improving column, ties in the ratio test to
    /// the smallest basic index. Never cycles.
    fn optimize(&mut self, cost: &[Rat], allowed: &dyn Fn(usize) -> bool) -> bool {
        let rhs = self.width;
        loop {
            let mut entering = None;
            for j in 0..self.width {
                if !allowed(j) || self.basis.contains(&j) {
                    continue;
                }
                let mut d = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !self.t[i][j].is_zero() {
                        d -= &cost[b] * &self.t[i][j];
                    }
                }
                if d.is_negative() {
                    entering = Some(j);
                    break;
                }
            }
            let Some(c) = entering else { return true };
            let mut leave: Option<(usize, Rat)> = None;
            for i in 0..self.t.len() {
                if self.t[i][c].is_positive() {
                    let ratio = &self.t[i][rhs] / &self.t[i][c];
                    let better = match &leave {
                        None => true,
                        Some((k, best)) => ratio < *best || (ratio == *best && self.basis[i] < self.basis[*k]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

/// Minimizes `cost . x` over `x >= 0` and the rows, exactly.
pub fn solve_exact(lp: &ExactLp) -> Outcome {
    let m = lp.rows.len();
    let n = lp.n;
    let n_slack = lp.rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let mut needs_art = Vec::new();
    let mut rows = Vec::new();
    for (coefs, sense, rhs) in &lp.rows {
        let mut dense = vec![Rat::zero(); n];
        for (j, a) in coefs {
            dense[*j] += a;
        }
        let (mut dense, mut sense, mut rhs) = (dense, *sense, rhs.clone());
        if rhs.is_negative() {
            dense.iter_mut().for_each(|v| *v = -v.clone());
            rhs = -rhs;
            sense = match sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
        needs_art.push(sense != Sense::Le);
        rows.push((dense, sense, rhs));
    }
    let n_art = needs_art.iter().filter(|&&a| a).count();
    let width = n + n_slack + n_art;
    let mut t = vec![vec![Rat::zero(); width + 1]; m];
    let mut basis = vec![0; m];
    let (mut s, mut a) = (n, n + n_slack);
    for (i, (dense, sense, rhs)) in rows.into_iter().enumerate() {
        t[i][..n].clone_from_slice(&dense);
        t[i][width] = rhs;
        match sense {
            Sense::Le => {
                t[i][s] = Rat::one();
                basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                t[i][s] = -Rat::one();
                s += 1;
                t[i][a] = Rat::one();
                basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                t[i][a] = Rat::one();
                basis[i] = a;
                a += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, width };
    let is_art = |j: usize| j >= n + n_slack && j < width;

    let mut phase1 = vec![Rat::zero(); width];
    for c in phase1.iter_mut().skip(n + n_slack) {
        *c = Rat::one();
    }
    tab.optimize(&phase1, &|_| true);
    let infeasibility: Rat = tab
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| is_art(b))
        .map(|(i, _)| tab.t[i][width].clone())
        .sum();
    if infeasibility.is_positive() {
        return Outcome::Infeasible;
    }
    // drive zero-level artificials out; rows where that fails are redundant
    let mut i = 0;
    while i < tab.t.len() {
        if is_art(tab.basis[i]) {
            match (0..n + n_slack).find(|&j| !tab.t[i][j].is_zero()) {
                Some(j) => tab.pivot(i, j),
                None => {
                    tab.t.remove(i);
                    tab.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }
    let mut cost = vec![Rat::zero(); width];
    cost[..n].clone_from_slice(&lp.cost);
    if !tab.optimize(&cost, &|j| !is_art(j)) {
        return Outcome::Unbounded;
    }
    let mut x = vec![Rat::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.t[i][width].clone();
        }
    }
    let value = x.iter().zip(&lp.cost).map(|(x, c)| x * c).sum();
    Outcome::Optimal { value, x }
}

/// A raw small instance: the oracle reads these fields, the library gets
/// the same data through its scenario builder.
#[derive(Debug, Clone)]
pub struct Small {
    pub params: SystemParameters,
    /// (pop_medicaid, pop_other, mob_medicaid, mob_other)
    pub tracts: Vec<(f64, f64, f64, f64)>,
    /// (tract, pam, mc)
    pub physicians: Vec<(usize, f64, f64)>,
    /// (tract, physician, miles), before pruning
    pub arcs: Vec<(usize, usize, f64)>,
}

impl Small {
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_t = rng.random_range(1..=4);
        let n_p = rng.random_range(1..=3);
        let pick = |rng: &mut ChaCha8Rng, v: &[f64]| v[rng.random_range(0..v.len())];
        let params = SystemParameters {
            pc: pick(&mut rng, &[60.0, 100.0, 150.0, 250.0]),
            lc: pick(&mut rng, &[0.0, 0.0, 0.25, 0.5]),
            cc: pick(&mut rng, &[0.5, 0.7, 1.0]),
            coverage: if rng.random_bool(0.3) {
                CoverageMode::FixedFraction(pick(&mut rng, &[0.25, 0.5]))
            } else {
                CoverageMode::MaxCoverage
            },
            ..SystemParameters::default()
        };
        let tracts = (0..n_t)
            .map(|_| {
                (
                    rng.random_range(0..=120) as f64,
                    rng.random_range(0..=120) as f64,
                    pick(&mut rng, &[0.0, 0.5, 0.75, 1.0]),
                    pick(&mut rng, &[0.5, 1.0]),
                )
            })
            .collect();
        let physicians = (0..n_p)
            .map(|_| {
                (
                    rng.random_range(0..n_t),
                    pick(&mut rng, &[0.0, 0.5, 1.0]),
                    pick(&mut rng, &[0.1, 0.25, 0.5, 1.0]),
                )
            })
            .collect();
        let mut arcs = Vec::new();
        for i in 0..n_t {
            for j in 0..n_p {
                if rng.random_bool(0.8) {
                    arcs.push((i, j, rng.random_range(0..=60) as f64 * 0.5));
                }
            }
        }
        Small {
            params,
            tracts,
            physicians,
            arcs,
        }
    }

    pub fn scenario(&self) -> ScenarioInstance {
        let mut b = ScenarioBuilder::new(self.params);
        for &(pm, po, mm, mo) in &self.tracts {
            b.tract(pm, po, mm, mo);
        }
        for &(t, pam, mc) in &self.physicians {
            b.physician(t, pam, mc);
        }
        for &(t, p, d) in &self.arcs {
            b.arc(t, p, d);
        }
        b.build().expect("generated instance is valid")
    }

    pub fn total_population(&self) -> f64 {
        self.tracts.iter().map(|t| t.0 + t.1).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub assigned: Rat,
    pub objective: Rat,
    pub distance: Rat,
}

/// Both phases of the assignment model in exact arithmetic, written out
/// row by row from the model definition. `None` when infeasible.
pub fn assignment_oracle(s: &Small) -> Option<OracleResult> {
    let p = &s.params;
    let arcs: Vec<(usize, usize, f64)> = s.arcs.iter().copied().filter(|a| a.2 <= p.mi_max).collect();
    let k = arcs.len();
    let n_p = s.physicians.len();
    let medicaid = |a: usize| 2 * a;
    let other = |a: usize| 2 * a + 1;
    let slack = |j: usize| 2 * k + j;
    let n = 2 * k + n_p;
    let floor = rat(p.pc) * rat(p.lc);
    let one = Rat::one;
    let mut rows: Vec<(Vec<(usize, Rat)>, Sense, Rat)> = Vec::new();

    let load = |j: usize| -> Vec<(usize, Rat)> {
        (0..k)
            .filter(|&a| arcs[a].1 == j)
            .flat_map(|a| [(medicaid(a), one()), (other(a), one())])
            .collect()
    };
    for j in 0..n_p {
        rows.push((load(j), Sense::Le, rat(p.pc)));
        let mut f = load(j);
        f.push((slack(j), one()));
        rows.push((f, Sense::Ge, floor.clone()));
        rows.push((vec![(slack(j), one())], Sense::Le, floor.clone()));
    }
    for i in 0..s.tracts.len() {
        let local: Vec<usize> = (0..n_p).filter(|&j| s.physicians[j].0 == i).collect();
        if local.len() >= 2 {
            let coefs = local.iter().flat_map(|&j| load(j)).collect();
            rows.push((coefs, Sense::Le, rat(p.pc) * rat(p.cc) * Rat::from_integer(local.len().into())));
        }
    }
    for (i, &(pm, po, mm, mo)) in s.tracts.iter().enumerate() {
        for (var, pop, mob) in [(medicaid as fn(usize) -> usize, pm, mm), (other, po, mo)] {
            let far = (0..k)
                .filter(|&a| arcs[a].0 == i && arcs[a].2 >= p.mi_max_limited)
                .map(|a| (var(a), one()))
                .collect();
            rows.push((far, Sense::Le, rat(mob) * rat(pop)));
            let all = (0..k).filter(|&a| arcs[a].0 == i).map(|a| (var(a), one())).collect();
            rows.push((all, Sense::Le, rat(pop)));
        }
    }
    for (j, &(_, pam, mc)) in s.physicians.iter().enumerate() {
        let coefs = (0..k).filter(|&a| arcs[a].1 == j).map(|a| (medicaid(a), one())).collect();
        rows.push((coefs, Sense::Le, rat(p.pc) * rat(mc) * rat(pam)));
    }

    let mut phase1 = vec![Rat::zero(); n];
    for a in 0..k {
        phase1[medicaid(a)] = -one();
        phase1[other(a)] = -one();
    }
    let best = match solve_exact(&ExactLp { n, cost: phase1, rows: rows.clone() }) {
        Outcome::Optimal { value, .. } => -value,
        _ => return None,
    };
    let target = match p.coverage {
        CoverageMode::MaxCoverage => best,
        CoverageMode::FixedFraction(alpha) => {
            let need = rat(alpha) * rat(s.total_population());
            if best < need {
                return None;
            }
            need
        }
    };
    let everything = (0..k).flat_map(|a| [(medicaid(a), one()), (other(a), one())]).collect();
    rows.push((everything, Sense::Ge, target));
    let max_miles = arcs.iter().map(|a| a.2).fold(1.0f64, f64::max);
    let penalty = rat(FLOOR_PENALTY_FACTOR) * rat(max_miles);
    let mut cost = vec![Rat::zero(); n];
    for (a, arc) in arcs.iter().enumerate() {
        cost[medicaid(a)] = rat(arc.2);
        cost[other(a)] = rat(arc.2);
    }
    for j in 0..n_p {
        cost[slack(j)] = penalty.clone();
    }
    match solve_exact(&ExactLp { n, cost, rows }) {
        Outcome::Optimal { value, x } => {
            let assigned = (0..2 * k).map(|v| x[v].clone()).sum();
            let distance = (0..k).map(|a| rat(arcs[a].2) * (&x[medicaid(a)] + &x[other(a)])).sum();
            Some(OracleResult {
                assigned,
                objective: value,
                distance,
            })
        }
        _ => None,
    }
}

pub fn to_f64(r: &Rat) -> f64 {
    use num::ToPrimitive;
    r.to_f64().expect("representable")
}

/// Independent re-check of every constraint family on `sol`, straight from
/// the scenario. Returns one message per violation larger than `tol`.
pub fn recheck(s: &ScenarioInstance, sol: &AssignmentSolution, tol: f64) -> Vec<String> {
    let p = &s.params;
    let arcs = s.distances.arcs();
    let mut bad = Vec::new();
    let mut over = |what: String, excess: f64| {
        if excess > tol {
            bad.push(format!("{what}: excess {excess:.3e}"));
        }
    };
    if sol.flows_medicaid.len() != arcs.len() || sol.flows_other.len() != arcs.len() {
        return vec!["flow vectors do not match the arc list".into()];
    }
    let mut load = vec![0.0; s.physicians.len()];
    let mut medicaid_load = vec![0.0; s.physicians.len()];
    let mut tract_group = vec![[0.0f64; 2]; s.tracts.len()];
    let mut tract_far = vec![[0.0f64; 2]; s.tracts.len()];
    for (k, a) in arcs.iter().enumerate() {
        let (m, o) = (sol.flows_medicaid[k], sol.flows_other[k]);
        over(format!("negative flow on arc {k}"), -m.min(o));
        over(format!("arc {k} longer than mi_max"), if m + o > 0.0 { a.miles - p.mi_max } else { 0.0 });
        load[a.physician] += m + o;
        medicaid_load[a.physician] += m;
        tract_group[a.tract][0] += m;
        tract_group[a.tract][1] += o;
        if a.miles >= p.mi_max_limited {
            tract_far[a.tract][0] += m;
            tract_far[a.tract][1] += o;
        }
    }
    for (j, ph) in s.physicians.iter().enumerate() {
        over(format!("capacity of physician {j}"), load[j] - p.pc);
        over(format!("Medicaid acceptance of physician {j}"), medicaid_load[j] - p.pc * ph.mc * ph.pam);
        let floor = p.pc * p.lc;
        let reported = sol
            .relaxation_report
            .iter()
            .find(|r| r.physician == j)
            .map_or(0.0, |r| r.slack);
        over(format!("floor of physician {j}"), floor - reported - load[j]);
    }
    for (i, t) in s.tracts.iter().enumerate() {
        let local: Vec<usize> = s.physicians.iter().filter(|ph| ph.tract == i).map(|ph| ph.index).collect();
        if local.len() >= 2 {
            let total: f64 = local.iter().map(|&j| load[j]).sum();
            over(format!("congestion of tract {i}"), total - p.pc * p.cc * local.len() as f64);
        }
        for (g, (pop, mob)) in [(t.pop_medicaid, t.mob_medicaid), (t.pop_other, t.mob_other)].into_iter().enumerate() {
            over(format!("population of tract {i} group {g}"), tract_group[i][g] - pop);
            over(format!("mobility of tract {i} group {g}"), tract_far[i][g] - mob * pop);
        }
    }
    if let CoverageMode::FixedFraction(alpha) = p.coverage {
        let assigned: f64 = load.iter().sum();
        over("coverage".into(), alpha * s.total_population() - assigned);
    }
    bad
}
