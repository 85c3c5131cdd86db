//! Policy interventions as scenario transforms, λ sweeps, Monte Carlo over
//! Medicaid acceptance, and approximate Pareto filtering of outcomes.

mod export;
mod montecarlo;
mod pareto;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::{scenario_fingerprint, solve_assignment_with, AssignmentError, AssignmentOptions};
use crate::metrics::{compute_all, summarize, MetricsError, Scope, StateSummary};
use crate::model::{ModelError, ScenarioInstance};

pub use export::{write_monte_carlo_csv, write_pareto_csv, write_sweep_csv};
pub use montecarlo::{
    draw_pam_realization, monte_carlo, sample_pam_realizations, MonteCarloSummary, ScopeDrawStats,
};
pub use pareto::{pareto_filter, ParetoCandidate, DEFAULT_PARETO_EPSILON};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("lambda {lambda} outside [{lo}, {hi}] for {kind}")]
    LambdaOutOfRange {
        kind: TransformKind,
        lambda: f64,
        lo: f64,
        hi: f64,
    },
    #[error("bad grid: {0}")]
    Grid(String),
    #[error("solve failed at lambda {lambda}: {source}")]
    Solve {
        lambda: f64,
        #[source]
        source: AssignmentError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("monte carlo draw {draw} failed: {source}")]
    Draw {
        draw: usize,
        #[source]
        source: AssignmentError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    Mobility,
    PamThreshold,
    McThreshold,
    PamScale,
    McScale,
}

impl TransformKind {
    pub const ALL: [TransformKind; 5] = [
        TransformKind::Mobility,
        TransformKind::PamThreshold,
        TransformKind::McThreshold,
        TransformKind::PamScale,
        TransformKind::McScale,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TransformKind::Mobility => "mobility",
            TransformKind::PamThreshold => "pam-threshold",
            TransformKind::McThreshold => "mc-threshold",
            TransformKind::PamScale => "pam-scale",
            TransformKind::McScale => "mc-scale",
        }
    }

    /// Admissible λ interval.
    pub fn range(self) -> (f64, f64) {
        match self {
            TransformKind::PamScale | TransformKind::McScale => (0.5, 2.0),
            _ => (0.0, 1.0),
        }
    }

    /// λ that leaves every scenario unchanged.
    pub fn identity(self) -> f64 {
        match self {
            TransformKind::Mobility => 0.0,
            _ => 1.0,
        }
    }

    /// The full range in steps of 0.05.
    pub fn default_grid(self) -> Vec<f64> {
        let (lo, hi) = self.range();
        grid(lo, 0.05, hi).expect("static grid")
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TransformKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.trim().to_ascii_lowercase().replace('_', "-");
        TransformKind::ALL
            .into_iter()
            .find(|t| t.as_str() == k)
            .ok_or_else(|| format!("unknown transform `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyTransform {
    pub kind: TransformKind,
    pub lambda: f64,
}

impl PolicyTransform {
    pub fn new(kind: TransformKind, lambda: f64) -> Result<Self, PolicyError> {
        let (lo, hi) = kind.range();
        if !(lo..=hi).contains(&lambda) {
            return Err(PolicyError::LambdaOutOfRange { kind, lambda, lo, hi });
        }
        Ok(Self { kind, lambda })
    }

    /// Transformed Medicaid mobility for a tract.
    pub fn mobility(&self, mob_medicaid: f64, mob_other: f64) -> f64 {
        match self.kind {
            TransformKind::Mobility => mob_medicaid + self.lambda * (mob_other - mob_medicaid),
            _ => mob_medicaid,
        }
    }

    pub fn pam(&self, pam: f64) -> f64 {
        match self.kind {
            TransformKind::PamThreshold => self.lambda.min(pam),
            TransformKind::PamScale => (self.lambda * pam).min(1.0),
            _ => pam,
        }
    }

    pub fn mc(&self, mc: f64) -> f64 {
        match self.kind {
            TransformKind::McThreshold => self.lambda.min(mc),
            TransformKind::McScale => (self.lambda * mc).min(1.0),
            _ => mc,
        }
    }
}

/// Returns a transformed copy; `scenario` is untouched.
pub fn apply_transform(scenario: &ScenarioInstance, t: PolicyTransform) -> Result<ScenarioInstance, PolicyError> {
    let t = PolicyTransform::new(t.kind, t.lambda)?;
    let mut out = scenario.clone();
    for tr in out.tracts.iter_mut() {
        tr.mob_medicaid = t.mobility(tr.mob_medicaid, tr.mob_other);
    }
    for p in out.physicians.iter_mut() {
        p.pam = t.pam(p.pam);
        p.mc = t.mc(p.mc);
    }
    out.validate()?;
    Ok(out)
}

/// `lo, lo+step, ..., hi` with endpoints hit exactly.
pub fn grid(lo: f64, step: f64, hi: f64) -> Result<Vec<f64>, PolicyError> {
    if !(step > 0.0) || !(hi >= lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(PolicyError::Grid(format!("{lo}:{step}:{hi}")));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let v = lo + k as f64 * step;
            (v * 1e12).round() / 1e12
        })
        .collect())
}

/// Parses `lo:step:hi` or a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>, PolicyError> {
    let bad = || PolicyError::Grid(text.to_string());
    let parts: Vec<&str> = text.split(':').collect();
    let mut g = if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| bad())?;
        grid(v[0], v[1], v[2])?
    } else if parts.len() == 1 {
        text.split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| bad())?
    } else {
        return Err(bad());
    };
    g.sort_by(f64::total_cmp);
    if g.is_empty() || g.windows(2).any(|w| w[0] == w[1]) {
        return Err(bad());
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub scenario_digest: u64,
    /// Medicaid, other, overall.
    pub summaries: Vec<StateSummary>,
    pub status: String,
    pub iterations: usize,
    pub relaxed_physicians: usize,
}

impl SweepPoint {
    pub fn summary(&self, scope: Scope) -> &StateSummary {
        &self.summaries[Scope::ALL.iter().position(|&s| s == scope).unwrap()]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub kind: TransformKind,
    pub points: Vec<SweepPoint>,
}

pub fn run_sweep(scenario: &ScenarioInstance, kind: TransformKind, grid: &[f64]) -> Result<SweepResult, PolicyError> {
    run_sweep_with(scenario, kind, grid, &AssignmentOptions::default())
}

/// Solves every grid point (in parallel) and returns them in grid order.
pub fn run_sweep_with(
    scenario: &ScenarioInstance,
    kind: TransformKind,
    grid: &[f64],
    opts: &AssignmentOptions,
) -> Result<SweepResult, PolicyError> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(PolicyError::Grid("lambda values must be strictly increasing".into()));
    }
    let transforms: Vec<PolicyTransform> = grid
        .iter()
        .map(|&l| PolicyTransform::new(kind, l))
        .collect::<Result<_, _>>()?;
    let points = transforms
        .par_iter()
        .map(|&t| -> Result<SweepPoint, PolicyError> {
            let s = apply_transform(scenario, t)?;
            let sol = solve_assignment_with(&s, opts).map_err(|source| PolicyError::Solve {
                lambda: t.lambda,
                source,
            })?;
            let summaries = compute_all(&s, &sol)?.iter().map(summarize).collect();
            Ok(SweepPoint {
                lambda: t.lambda,
                scenario_digest: scenario_fingerprint(&s),
                summaries,
                status: "optimal".into(),
                iterations: sol.iterations,
                relaxed_physicians: sol.relaxation_report.len(),
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepResult { kind, points })
}
