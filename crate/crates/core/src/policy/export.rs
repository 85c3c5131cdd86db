use std::path::Path;

use crate::metrics::Scope;
use crate::model::{ModelError, ScenarioInstance};
use crate::policy::{MonteCarloSummary, ParetoCandidate, SweepResult};

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> ModelError + '_ {
    move |source| ModelError::Csv {
        file: path.display().to_string(),
        source,
    }
}

fn flush(w: &mut csv::Writer<std::fs::File>, path: &Path) -> Result<(), ModelError> {
    w.flush().map_err(|source| ModelError::Io {
        file: path.display().to_string(),
        source,
    })
}

/// `sweep.csv`: `kind,lambda,scope,coverage,travel_cost,congestion,solve_status`.
pub fn write_sweep_csv(results: &[SweepResult], path: &Path) -> Result<(), ModelError> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["kind", "lambda", "scope", "coverage", "travel_cost", "congestion", "solve_status"])
        .map_err(&err)?;
    for r in results {
        for p in &r.points {
            for scope in Scope::ALL {
                let s = p.summary(scope);
                w.write_record([
                    r.kind.as_str().to_string(),
                    format!("{}", p.lambda),
                    scope.as_str().to_string(),
                    format!("{}", s.coverage),
                    format!("{}", s.travel_cost),
                    format!("{}", s.congestion),
                    p.status.clone(),
                ])
                .map_err(&err)?;
            }
        }
    }
    flush(&mut w, path)
}

/// `pareto.csv`: one row per candidate with its six tracked values and
/// whether it survived the filter.
pub fn write_pareto_csv(candidates: &[ParetoCandidate], retained: &[usize], path: &Path) -> Result<(), ModelError> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record([
        "policy",
        "medicaid_coverage",
        "medicaid_travel_cost",
        "medicaid_congestion",
        "other_coverage",
        "other_travel_cost",
        "other_congestion",
        "retained",
    ])
    .map_err(&err)?;
    for (k, c) in candidates.iter().enumerate() {
        let mut rec = vec![c.label.clone()];
        rec.extend(c.values.iter().map(|v| format!("{v}")));
        rec.push(retained.contains(&k).to_string());
        w.write_record(&rec).map_err(&err)?;
    }
    flush(&mut w, path)
}

/// Per-tract draw means and variances: `tract_id,scope,measure,mean,variance`.
pub fn write_monte_carlo_csv(s: &ScenarioInstance, summary: &MonteCarloSummary, path: &Path) -> Result<(), ModelError> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["tract_id", "scope", "measure", "mean", "variance"])
        .map_err(&err)?;
    let cell = |v: f64| if v.is_finite() { format!("{v}") } else { "NA".into() };
    for st in &summary.scopes {
        for (name, mean, var) in [
            ("coverage", &st.coverage_mean, &st.coverage_var),
            ("travel_cost", &st.travel_cost_mean, &st.travel_cost_var),
            ("congestion", &st.congestion_mean, &st.congestion_var),
        ] {
            for (i, t) in s.tracts.iter().enumerate() {
                w.write_record([
                    t.external_id.to_string(),
                    st.scope.as_str().to_string(),
                    name.to_string(),
                    cell(mean[i]),
                    cell(var[i]),
                ])
                .map_err(&err)?;
            }
        }
    }
    flush(&mut w, path)
}
