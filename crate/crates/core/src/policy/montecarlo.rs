use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assignment::{solve_assignment_with, AssignmentOptions};
use crate::metrics::{compute_all, summarize, Scope};
use crate::model::ScenarioInstance;
use crate::policy::PolicyError;
use crate::rng::indexed_substream;

/// Replaces every `pam_j` with a Bernoulli(`pam_j`) outcome. Draw `index`
/// uses its own substream, so the first `n` draws of a larger run equal an
/// `n`-draw run.
pub fn draw_pam_realization(scenario: &ScenarioInstance, seed: u64, index: usize) -> ScenarioInstance {
    let mut rng = indexed_substream(seed, "montecarlo/pam", index as u64);
    let mut out = scenario.clone();
    for p in out.physicians.iter_mut() {
        let u: f64 = rng.random();
        p.pam = if u < p.pam { 1.0 } else { 0.0 };
    }
    out
}

/// Per-tract and state-level statistics of one scope across draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeDrawStats {
    pub scope: Scope,
    pub coverage_mean: Vec<f64>,
    pub coverage_var: Vec<f64>,
    pub travel_cost_mean: Vec<f64>,
    pub travel_cost_var: Vec<f64>,
    pub congestion_mean: Vec<f64>,
    pub congestion_var: Vec<f64>,
    /// State-level population-weighted coverage of each draw.
    pub state_coverage: Vec<f64>,
    pub state_travel_cost: Vec<f64>,
    pub state_congestion: Vec<f64>,
}

impl ScopeDrawStats {
    /// Mean of the state-level coverage over draws.
    pub fn state_coverage_mean(&self) -> f64 {
        mean_var(&self.state_coverage).0
    }

    /// Monte Carlo standard error of [`Self::state_coverage_mean`].
    pub fn state_coverage_se(&self) -> f64 {
        let (_, v) = mean_var(&self.state_coverage);
        (v / self.state_coverage.len() as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub n_draws: usize,
    pub seed: u64,
    /// Medicaid, other, overall.
    pub scopes: Vec<ScopeDrawStats>,
}

impl MonteCarloSummary {
    pub fn scope(&self, scope: Scope) -> &ScopeDrawStats {
        self.scopes.iter().find(|s| s.scope == scope).expect("all scopes present")
    }
}

/// Sample mean and (n-1) variance; variance 0 for a single value.
fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var)
}

struct Draw {
    per_scope: Vec<[Vec<f64>; 3]>,
    state: Vec<[f64; 3]>,
}

/// Solves `n_draws` Bernoulli realizations and summarizes the measures.
pub fn monte_carlo(
    scenario: &ScenarioInstance,
    n_draws: usize,
    seed: u64,
    opts: &AssignmentOptions,
) -> Result<MonteCarloSummary, PolicyError> {
    if n_draws == 0 {
        return Err(PolicyError::Grid("n_draws must be at least 1".into()));
    }
    let draws: Vec<Draw> = (0..n_draws)
        .into_par_iter()
        .map(|d| -> Result<Draw, PolicyError> {
            let s = draw_pam_realization(scenario, seed, d);
            let sol = solve_assignment_with(&s, opts).map_err(|source| PolicyError::Draw { draw: d, source })?;
            let all = compute_all(&s, &sol)?;
            Ok(Draw {
                per_scope: all.iter().map(|m| [m.coverage(), m.travel_cost(), m.congestion()]).collect(),
                state: all
                    .iter()
                    .map(|m| {
                        let sm = summarize(m);
                        [sm.coverage, sm.travel_cost, sm.congestion]
                    })
                    .collect(),
            })
        })
        .collect::<Result<_, _>>()?;

    let n_tracts = scenario.tracts.len();
    let scopes = Scope::ALL
        .iter()
        .enumerate()
        .map(|(si, &scope)| {
            let stat = |measure: usize| -> (Vec<f64>, Vec<f64>) {
                (0..n_tracts)
                    .map(|i| {
                        let v: Vec<f64> = draws.iter().map(|d| d.per_scope[si][measure][i]).collect();
                        mean_var(&v)
                    })
                    .unzip()
            };
            let (coverage_mean, coverage_var) = stat(0);
            let (travel_cost_mean, travel_cost_var) = stat(1);
            let (congestion_mean, congestion_var) = stat(2);
            ScopeDrawStats {
                scope,
                coverage_mean,
                coverage_var,
                travel_cost_mean,
                travel_cost_var,
                congestion_mean,
                congestion_var,
                state_coverage: draws.iter().map(|d| d.state[si][0]).collect(),
                state_travel_cost: draws.iter().map(|d| d.state[si][1]).collect(),
                state_congestion: draws.iter().map(|d| d.state[si][2]).collect(),
            }
        })
        .collect();
    Ok(MonteCarloSummary { n_draws, seed, scopes })
}

/// The realizations themselves together with their summary.
pub fn sample_pam_realizations(
    scenario: &ScenarioInstance,
    n_draws: usize,
    seed: u64,
) -> Result<(Vec<ScenarioInstance>, MonteCarloSummary), PolicyError> {
    let summary = monte_carlo(scenario, n_draws, seed, &AssignmentOptions::default())?;
    let draws = (0..n_draws).map(|d| draw_pam_realization(scenario, seed, d)).collect();
    Ok((draws, summary))
}
