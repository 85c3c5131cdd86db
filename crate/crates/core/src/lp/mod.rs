//! Sparse linear programs: a bounded-variable revised simplex for general
//! problems and a primal network simplex for min-cost flow structure.
//!
//! Problems are `minimize c·x subject to A x {<=,=,>=} b, l <= x <= u`.

mod dump;
mod dense;
pub mod network;
mod scaling;
mod simplex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use dump::write_lp_text;
pub use network::{FlowNetwork, FlowSolution, FlowStatus};
pub use simplex::{solve_lp, solve_lp_with, SolverOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("malformed program: {0}")]
    Invalid(String),
    #[error("numerical breakdown: {detail} (basis condition estimate {condition_estimate:.3e})")]
    NumericalBreakdown {
        detail: String,
        condition_estimate: f64,
    },
    #[error("iteration limit of {0} exceeded")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row<T> {
    pub name: String,
    pub coefs: Vec<(usize, T)>,
    pub sense: Sense,
    pub rhs: T,
}

impl<T: Scalar> Row<T> {
    pub fn activity(&self, x: &[T]) -> T {
        self.coefs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates the row (zero when satisfied).
    pub fn violation(&self, x: &[T]) -> T {
        let ax = self.activity(x);
        match self.sense {
            Sense::Le => (ax - self.rhs).max(T::zero()),
            Sense::Ge => (self.rhs - ax).max(T::zero()),
            Sense::Eq => (ax - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    objective: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
    var_names: Vec<String>,
    rows: Vec<Row<T>>,
}

impl<T: Scalar> Default for LinearProgram<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> LinearProgram<T> {
    pub fn new() -> Self {
        Self {
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            var_names: Vec::new(),
            rows: Vec::new(),
        }
    }

    /// Adds a variable with bounds `[lower, upper]` (either may be infinite)
    /// and objective coefficient `cost`.
    pub fn add_var(&mut self, name: impl Into<String>, lower: T, upper: T, cost: T) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.var_names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, name: impl Into<String>, coefs: Vec<(usize, T)>, sense: Sense, rhs: T) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coefs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[T] {
        &self.objective
    }

    pub fn set_objective(&mut self, c: Vec<T>) {
        assert_eq!(c.len(), self.n_vars(), "objective length");
        self.objective = c;
    }

    pub fn set_cost(&mut self, var: usize, cost: T) {
        self.objective[var] = cost;
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn set_bounds(&mut self, var: usize, lower: T, upper: T) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    pub fn var_name(&self, var: usize) -> &str {
        &self.var_names[var]
    }

    pub fn rows(&self) -> &[Row<T>] {
        &self.rows
    }

    pub fn row(&self, r: usize) -> &Row<T> {
        &self.rows[r]
    }

    pub fn set_rhs(&mut self, r: usize, rhs: T) {
        self.rows[r].rhs = rhs;
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective.iter().zip(x).map(|(&c, &v)| c * v).sum()
    }

    /// Maximum violation of any row or bound by `x`.
    pub fn primal_violation(&self, x: &[T]) -> T {
        let rows = self.rows.iter().map(|r| r.violation(x));
        let bounds = x.iter().enumerate().map(|(j, &v)| {
            (self.lower[j] - v).max(v - self.upper[j]).max(T::zero())
        });
        rows.chain(bounds).fold(T::zero(), T::max)
    }

    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l > u || l == T::infinity() || u == T::neg_infinity() {
                return Err(LpError::Invalid(format!(
                    "variable {} has bounds [{l}, {u}]",
                    self.var_names[j]
                )));
            }
            if !self.objective[j].is_finite() {
                return Err(LpError::Invalid(format!("variable {} has non-finite cost", self.var_names[j])));
            }
        }
        for r in &self.rows {
            if !r.rhs.is_finite() {
                return Err(LpError::Invalid(format!("row {} has non-finite rhs", r.name)));
            }
            for &(j, a) in &r.coefs {
                if j >= n {
                    return Err(LpError::Invalid(format!("row {} references undeclared variable {j}", r.name)));
                }
                if !a.is_finite() {
                    return Err(LpError::Invalid(format!("row {} has non-finite coefficient", r.name)));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Residual norms certifying a reported optimum, measured on the unscaled
/// problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate<T> {
    /// Largest row or bound violation.
    pub primal_residual: T,
    /// Largest sign violation of row duals and reduced costs.
    pub dual_residual: T,
    /// `|c·x - dual objective| / (1 + |c·x|)`.
    pub complementarity_gap: T,
}

/// Evidence for infeasibility: phase-one row multipliers and the rows that
/// carry them.
#[derive(Debug, Clone, PartialEq)]
pub struct Infeasibility<T> {
    pub multipliers: Vec<T>,
    pub rows: Vec<usize>,
    /// Sum of bound violations at the phase-one optimum.
    pub residual_infeasibility: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub status: LpStatus,
    pub primal: Vec<T>,
    /// Row multipliers `y`, with reduced costs `c - A^T y`.
    pub dual: Vec<T>,
    pub reduced_costs: Vec<T>,
    pub objective_value: T,
    pub certificate: Certificate<T>,
    pub iterations: usize,
    pub infeasibility: Option<Infeasibility<T>>,
    /// Improving direction when unbounded.
    pub unbounded_ray: Option<Vec<T>>,
}

/// Computes the optimality certificate of `(x, y)` for `lp`.
pub fn certify<T: Scalar>(lp: &LinearProgram<T>, x: &[T], y: &[T]) -> (Certificate<T>, Vec<T>) {
    let mut d = lp.objective.clone();
    for (r, row) in lp.rows.iter().enumerate() {
        for &(j, a) in &row.coefs {
            d[j] -= a * y[r];
        }
    }
    let mut dual_res = T::zero();
    for (r, row) in lp.rows.iter().enumerate() {
        let bad = match row.sense {
            Sense::Le => y[r].max(T::zero()),
            Sense::Ge => (-y[r]).max(T::zero()),
            Sense::Eq => T::zero(),
        };
        dual_res = dual_res.max(bad);
    }
    let mut dual_obj: T = lp.rows.iter().zip(y).map(|(row, &yr)| row.rhs * yr).sum();
    for j in 0..lp.n_vars() {
        let (l, u, dj) = (lp.lower[j], lp.upper[j], d[j]);
        if dj > T::zero() {
            if l.is_finite() {
                dual_obj += dj * l;
            } else {
                dual_res = dual_res.max(dj);
            }
        } else if dj < T::zero() {
            if u.is_finite() {
                dual_obj += dj * u;
            } else {
                dual_res = dual_res.max(-dj);
            }
        }
    }
    let obj = lp.objective_value(x);
    let cert = Certificate {
        primal_residual: lp.primal_violation(x),
        dual_residual: dual_res,
        complementarity_gap: (obj - dual_obj).abs() / (T::one() + obj.abs()),
    };
    (cert, d)
}
