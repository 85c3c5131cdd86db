//! Bounded-variable revised simplex.
//!
//! Every row gets a slack (`a·x + s = b`) whose bounds encode the row sense,
//! so the all-slack basis is always available. Infeasible starts run a
//! composite phase one minimizing the sum of bound violations of basic
//! variables. Pricing is Dantzig with lowest-index ties; after a streak of
//! degenerate pivots the solver switches to Bland's rule until progress
//! resumes. The basis inverse is kept dense and refactored periodically.

use crate::lp::dense::invert;
use crate::lp::scaling::equilibrate;
use crate::lp::{certify, Infeasibility, LinearProgram, LpError, LpSolution, LpStatus, Sense};
use crate::Scalar;

const NONE: usize = usize::MAX;

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions<T> {
    /// Primal and dual feasibility tolerance on the scaled problem.
    pub tol: T,
    /// Smallest acceptable pivot magnitude.
    pub pivot_tol: T,
    /// Zero means `10_000 + 50 (rows + vars)`.
    pub max_iterations: usize,
    pub refactor_every: usize,
    pub scaling: bool,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub bland_after: usize,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        let eps = T::epsilon();
        Self {
            tol: T::lit(1e-9).max(eps * T::lit(100.0)),
            pivot_tol: T::lit(1e-10).max(eps * T::lit(100.0)),
            max_iterations: 0,
            refactor_every: 64,
            scaling: true,
            bland_after: 40,
        }
    }
}

/// Solves `lp` with default options and feasibility tolerance `tol`.
pub fn solve_lp<T: Scalar>(lp: &LinearProgram<T>, tol: T) -> Result<LpSolution<T>, LpError> {
    let defaults = SolverOptions::<T>::default();
    let opts = SolverOptions {
        tol: tol.max(T::epsilon() * T::lit(100.0)),
        ..defaults
    };
    solve_lp_with(lp, &opts)
}

pub fn solve_lp_with<T: Scalar>(lp: &LinearProgram<T>, opts: &SolverOptions<T>) -> Result<LpSolution<T>, LpError> {
    if !(opts.tol > T::zero()) {
        return Err(LpError::Invalid("tolerance must be positive".into()));
    }
    lp.validate()?;
    let (row_scale, col_scale) = if opts.scaling {
        equilibrate(lp, 4)
    } else {
        (vec![T::one(); lp.n_rows()], vec![T::one(); lp.n_vars()])
    };
    let mut s = Simplex::new(lp, &row_scale, &col_scale, opts);
    let outcome = s.run()?;

    let n = lp.n_vars();
    let primal: Vec<T> = (0..n).map(|j| s.x[j] * col_scale[j]).collect();
    let unscale_y = |y: Vec<T>| -> Vec<T> { y.into_iter().zip(&row_scale).map(|(v, &r)| v * r).collect() };

    match outcome {
        Outcome::Optimal => {
            let y = unscale_y(s.duals(Phase::Two));
            let (certificate, reduced_costs) = certify(lp, &primal, &y);
            Ok(LpSolution {
                status: LpStatus::Optimal,
                objective_value: lp.objective_value(&primal),
                primal,
                dual: y,
                reduced_costs,
                certificate,
                iterations: s.iterations,
                infeasibility: None,
                unbounded_ray: None,
            })
        }
        Outcome::Infeasible => {
            let y = unscale_y(s.duals(Phase::One));
            let ytol = opts.tol * T::lit(10.0);
            let rows: Vec<usize> = (0..y.len()).filter(|&r| y[r].abs() > ytol).collect();
            let (certificate, reduced_costs) = certify(lp, &primal, &y);
            Ok(LpSolution {
                status: LpStatus::Infeasible,
                objective_value: lp.objective_value(&primal),
                primal,
                dual: y.clone(),
                reduced_costs,
                certificate,
                iterations: s.iterations,
                infeasibility: Some(Infeasibility {
                    multipliers: y,
                    rows,
                    residual_infeasibility: s.infeasibility_sum(),
                }),
                unbounded_ray: None,
            })
        }
        Outcome::Unbounded(ray) => {
            let ray: Vec<T> = ray.into_iter().zip(&col_scale).map(|(v, &c)| v * c).collect();
            let y = vec![T::zero(); lp.n_rows()];
            let (certificate, reduced_costs) = certify(lp, &primal, &y);
            Ok(LpSolution {
                status: LpStatus::Unbounded,
                objective_value: T::neg_infinity(),
                primal,
                dual: y,
                reduced_costs,
                certificate,
                iterations: s.iterations,
                infeasibility: None,
                unbounded_ray: Some(ray),
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    One,
    Two,
}

enum Outcome<T> {
    Optimal,
    Infeasible,
    Unbounded(Vec<T>),
}

struct Simplex<'a, T> {
    opts: &'a SolverOptions<T>,
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, T)>>,
    b: Vec<T>,
    lb: Vec<T>,
    ub: Vec<T>,
    cost: Vec<T>,
    x: Vec<T>,
    head: Vec<usize>,
    pos: Vec<usize>,
    binv: Vec<T>,
    since_refactor: usize,
    iterations: usize,
    condition: f64,
}

impl<'a, T: Scalar> Simplex<'a, T> {
    fn new(lp: &LinearProgram<T>, row_scale: &[T], col_scale: &[T], opts: &'a SolverOptions<T>) -> Self {
        let m = lp.n_rows();
        let n = lp.n_vars();
        let mut cols: Vec<Vec<(usize, T)>> = vec![Vec::new(); n];
        let mut b = Vec::with_capacity(m);
        let mut lb = Vec::with_capacity(n + m);
        let mut ub = Vec::with_capacity(n + m);
        let mut cost = Vec::with_capacity(n + m);
        for (r, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coefs {
                if a != T::zero() {
                    cols[j].push((r, a * row_scale[r] * col_scale[j]));
                }
            }
            b.push(row.rhs * row_scale[r]);
        }
        for col in cols.iter_mut() {
            // merge duplicate entries for the same row
            col.sort_by_key(|e| e.0);
            col.dedup_by(|later, earlier| {
                if later.0 == earlier.0 {
                    earlier.1 += later.1;
                    true
                } else {
                    false
                }
            });
        }
        for j in 0..n {
            lb.push(lp.lower()[j] / col_scale[j]);
            ub.push(lp.upper()[j] / col_scale[j]);
            cost.push(lp.objective()[j] * col_scale[j]);
        }
        for row in lp.rows() {
            let (l, u) = match row.sense {
                Sense::Le => (T::zero(), T::infinity()),
                Sense::Ge => (T::neg_infinity(), T::zero()),
                Sense::Eq => (T::zero(), T::zero()),
            };
            lb.push(l);
            ub.push(u);
            cost.push(T::zero());
        }
        let mut x = vec![T::zero(); n + m];
        for j in 0..n {
            x[j] = if lb[j].is_finite() {
                lb[j]
            } else if ub[j].is_finite() {
                ub[j]
            } else {
                T::zero()
            };
        }
        let head: Vec<usize> = (n..n + m).collect();
        let mut pos = vec![NONE; n + m];
        for (i, &h) in head.iter().enumerate() {
            pos[h] = i;
        }
        let mut binv = vec![T::zero(); m * m];
        for i in 0..m {
            binv[i * m + i] = T::one();
        }
        let mut s = Self {
            opts,
            m,
            n,
            cols,
            b,
            lb,
            ub,
            cost,
            x,
            head,
            pos,
            binv,
            since_refactor: 0,
            iterations: 0,
            condition: 1.0,
        };
        s.recompute_basics();
        s
    }

    fn column(&self, j: usize) -> ColumnRef<'_, T> {
        if j < self.n {
            ColumnRef::Sparse(&self.cols[j])
        } else {
            ColumnRef::Unit(j - self.n)
        }
    }

    fn col_dot(&self, y: &[T], j: usize) -> T {
        match self.column(j) {
            ColumnRef::Sparse(c) => c.iter().map(|&(r, a)| y[r] * a).sum(),
            ColumnRef::Unit(r) => y[r],
        }
    }

    fn ftran(&self, j: usize) -> Vec<T> {
        let m = self.m;
        let mut alpha = vec![T::zero(); m];
        match self.column(j) {
            ColumnRef::Sparse(c) => {
                for &(k, a) in c {
                    for (i, al) in alpha.iter_mut().enumerate() {
                        *al += self.binv[i * m + k] * a;
                    }
                }
            }
            ColumnRef::Unit(k) => {
                for (i, al) in alpha.iter_mut().enumerate() {
                    *al = self.binv[i * m + k];
                }
            }
        }
        alpha
    }

    fn btran(&self, cb: &[T]) -> Vec<T> {
        let m = self.m;
        let mut y = vec![T::zero(); m];
        for (i, &c) in cb.iter().enumerate() {
            if c != T::zero() {
                let row = &self.binv[i * m..(i + 1) * m];
                for (yk, &v) in y.iter_mut().zip(row) {
                    *yk += c * v;
                }
            }
        }
        y
    }

    fn recompute_basics(&mut self) {
        let m = self.m;
        let mut rhs = self.b.clone();
        for j in 0..self.n + m {
            if self.pos[j] == NONE && self.x[j] != T::zero() {
                let xj = self.x[j];
                match self.column(j) {
                    ColumnRef::Sparse(c) => {
                        for &(r, a) in c {
                            rhs[r] -= a * xj;
                        }
                    }
                    ColumnRef::Unit(r) => rhs[r] -= xj,
                }
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            let v: T = row.iter().zip(&rhs).map(|(&a, &b)| a * b).sum();
            self.x[self.head[i]] = v;
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        if m == 0 {
            return Ok(());
        }
        let mut dense = vec![T::zero(); m * m];
        for (i, &j) in self.head.iter().enumerate() {
            match self.column(j) {
                ColumnRef::Sparse(c) => {
                    for &(r, a) in c {
                        dense[r * m + i] = a;
                    }
                }
                ColumnRef::Unit(r) => dense[r * m + i] = T::one(),
            }
        }
        let tiny = self.opts.pivot_tol * T::lit(1e-3);
        match invert(&dense, m, tiny) {
            Some((inv, cond)) => {
                self.binv = inv;
                self.condition = cond;
                self.since_refactor = 0;
                self.recompute_basics();
                Ok(())
            }
            None => Err(LpError::NumericalBreakdown {
                detail: "basis matrix became singular during refactorization".into(),
                condition_estimate: f64::INFINITY,
            }),
        }
    }

    fn below(&self, j: usize) -> bool {
        self.x[j] < self.lb[j] - self.opts.tol
    }

    fn above(&self, j: usize) -> bool {
        self.x[j] > self.ub[j] + self.opts.tol
    }

    fn infeasibility_sum(&self) -> T {
        self.head
            .iter()
            .map(|&j| {
                (self.lb[j] - self.x[j]).max(T::zero()) + (self.x[j] - self.ub[j]).max(T::zero())
            })
            .sum()
    }

    fn basic_costs(&self, phase: Phase) -> Vec<T> {
        self.head
            .iter()
            .map(|&j| match phase {
                Phase::Two => self.cost[j],
                Phase::One => {
                    if self.below(j) {
                        -T::one()
                    } else if self.above(j) {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
            })
            .collect()
    }

    fn duals(&self, phase: Phase) -> Vec<T> {
        self.btran(&self.basic_costs(phase))
    }

    fn pivot_binv(&mut self, r: usize, alpha: &[T]) {
        let m = self.m;
        let p = alpha[r];
        for k in 0..m {
            self.binv[r * m + k] /= p;
        }
        let (before, rest) = self.binv.split_at_mut(r * m);
        let (prow, after) = rest.split_at_mut(m);
        for (i, row) in before.chunks_exact_mut(m).enumerate() {
            let f = alpha[i];
            if f != T::zero() {
                row.iter_mut().zip(prow.iter()).for_each(|(a, &b)| *a -= f * b);
            }
        }
        for (off, row) in after.chunks_exact_mut(m).enumerate() {
            let f = alpha[r + 1 + off];
            if f != T::zero() {
                row.iter_mut().zip(prow.iter()).for_each(|(a, &b)| *a -= f * b);
            }
        }
    }

    fn run(&mut self) -> Result<Outcome<T>, LpError> {
        let tol = self.opts.tol;
        let ptol = self.opts.pivot_tol;
        let max_iter = if self.opts.max_iterations == 0 {
            10_000 + 50 * (self.m + self.n)
        } else {
            self.opts.max_iterations
        };
        let total = self.n + self.m;
        let mut degenerate_streak = 0usize;

        loop {
            if self.iterations >= max_iter {
                return Err(LpError::IterationLimit(max_iter));
            }
            if self.since_refactor >= self.opts.refactor_every {
                self.refactor()?;
            }
            let phase = if self.head.iter().any(|&j| self.below(j) || self.above(j)) {
                Phase::One
            } else {
                Phase::Two
            };
            let y = self.duals(phase);
            let bland = degenerate_streak > self.opts.bland_after;

            // pricing
            let mut entering = NONE;
            let mut dir = T::zero();
            let mut best = T::zero();
            for j in 0..total {
                if self.pos[j] != NONE {
                    continue;
                }
                let cj = if phase == Phase::Two { self.cost[j] } else { T::zero() };
                let d = cj - self.col_dot(&y, j);
                let can_up = self.x[j] < self.ub[j];
                let can_down = self.x[j] > self.lb[j];
                let (ok, sgn) = if d < -tol && can_up {
                    (true, T::one())
                } else if d > tol && can_down {
                    (true, -T::one())
                } else {
                    (false, T::zero())
                };
                if ok && (bland || d.abs() > best) {
                    best = d.abs();
                    entering = j;
                    dir = sgn;
                    if bland {
                        break;
                    }
                }
            }

            if entering == NONE {
                if self.since_refactor > 0 {
                    // confirm on a fresh factorization before declaring
                    self.refactor()?;
                    continue;
                }
                return Ok(match phase {
                    Phase::Two => Outcome::Optimal,
                    Phase::One => Outcome::Infeasible,
                });
            }

            let j = entering;
            let alpha = self.ftran(j);

            // ratio test
            let mut relaxed_max = T::infinity();
            let mut limits: Vec<(usize, T, bool)> = Vec::new(); // (row, exact step, leaves at upper)
            for (i, &a) in alpha.iter().enumerate() {
                if a.abs() <= ptol {
                    continue;
                }
                let rate = -dir * a;
                let h = self.head[i];
                let (xi, l, u) = (self.x[h], self.lb[h], self.ub[h]);
                let lim = if phase == Phase::One && xi < l - tol {
                    (rate > T::zero()).then(|| ((l - xi) / rate, (l - xi) / rate, false))
                } else if phase == Phase::One && xi > u + tol {
                    (rate < T::zero()).then(|| ((xi - u) / -rate, (xi - u) / -rate, true))
                } else if rate < T::zero() && l.is_finite() {
                    Some((((xi - l) / -rate).max(T::zero()), (xi - l + tol) / -rate, false))
                } else if rate > T::zero() && u.is_finite() {
                    Some((((u - xi) / rate).max(T::zero()), (u - xi + tol) / rate, true))
                } else {
                    None
                };
                if let Some((exact, relaxed, to_upper)) = lim {
                    relaxed_max = relaxed_max.min(relaxed);
                    limits.push((i, exact, to_upper));
                }
            }

            let mut leave: Option<(usize, T, bool)> = None;
            if bland {
                let min_t = limits.iter().map(|l| l.1).fold(T::infinity(), T::min);
                let cutoff = min_t + tol * T::lit(1e-3) * (T::one() + min_t.abs());
                for &cand in limits.iter().filter(|l| l.1 <= cutoff) {
                    if leave.is_none_or(|(r, _, _)| self.head[cand.0] < self.head[r]) {
                        leave = Some(cand);
                    }
                }
            } else {
                for &cand in limits.iter().filter(|l| l.1 <= relaxed_max) {
                    if leave.is_none_or(|(r, _, _)| alpha[cand.0].abs() > alpha[r].abs()) {
                        leave = Some(cand);
                    }
                }
            }

            let flip = if self.lb[j].is_finite() && self.ub[j].is_finite() {
                Some(self.ub[j] - self.lb[j])
            } else {
                None
            };
            let step_leave = leave.map(|l| l.1);
            let do_flip = match (flip, step_leave) {
                (Some(f), Some(t)) => f <= t,
                (Some(_), None) => true,
                _ => false,
            };

            if !do_flip && leave.is_none() {
                return match phase {
                    Phase::Two => {
                        let mut ray = vec![T::zero(); self.n];
                        if j < self.n {
                            ray[j] = dir;
                        }
                        for (i, &h) in self.head.iter().enumerate() {
                            if h < self.n {
                                ray[h] = -dir * alpha[i];
                            }
                        }
                        Ok(Outcome::Unbounded(ray))
                    }
                    Phase::One => Err(LpError::NumericalBreakdown {
                        detail: "phase-one ratio test found no blocking variable".into(),
                        condition_estimate: self.condition,
                    }),
                };
            }

            self.iterations += 1;
            if do_flip {
                let t = flip.unwrap();
                for (i, &a) in alpha.iter().enumerate() {
                    let h = self.head[i];
                    self.x[h] -= dir * t * a;
                }
                self.x[j] = if dir > T::zero() { self.ub[j] } else { self.lb[j] };
                degenerate_streak = 0;
                continue;
            }

            let (r, t, to_upper) = leave.unwrap();
            if alpha[r].abs() <= ptol {
                return Err(LpError::NumericalBreakdown {
                    detail: format!("pivot {:e} below tolerance", alpha[r].to_f64_lossy()),
                    condition_estimate: self.condition,
                });
            }
            if t <= tol {
                degenerate_streak += 1;
            } else {
                degenerate_streak = 0;
            }
            for (i, &a) in alpha.iter().enumerate() {
                let h = self.head[i];
                self.x[h] -= dir * t * a;
            }
            self.x[j] += dir * t;
            let leaving = self.head[r];
            self.x[leaving] = if to_upper { self.ub[leaving] } else { self.lb[leaving] };
            self.pivot_binv(r, &alpha);
            self.pos[leaving] = NONE;
            self.pos[j] = r;
            self.head[r] = j;
            self.since_refactor += 1;
        }
    }
}

enum ColumnRef<'a, T> {
    Sparse(&'a [(usize, T)]),
    Unit(usize),
}
