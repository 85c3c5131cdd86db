use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::spatial::MoranResult;
use crate::svcm::{BasisSpec, ModelFit, Shape, ShapeVerdict, SignificanceMap, SvcmError};

#[derive(Debug, Serialize)]
struct SurfaceSummary<'a> {
    name: &'a str,
    lambda: f64,
    edf: f64,
    center: f64,
    scale: f64,
    estimate_min: f64,
    estimate_max: f64,
    critical_value: Option<f64>,
    shape: Option<ShapeVerdict>,
}

#[derive(Debug, Serialize)]
struct FitReport<'a> {
    response: &'a str,
    covariates: &'a [String],
    n_sites: usize,
    dropped: usize,
    basis: BasisSpec,
    edf: f64,
    aic: f64,
    residual_correlation: f64,
    residual_moran: Option<MoranResult>,
    converged: bool,
    cycles: usize,
    trace: &'a [f64],
    surfaces: Vec<SurfaceSummary<'a>>,
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Diagnostics and convergence trace.
pub fn write_fit_json(fit: &ModelFit, path: &Path) -> Result<(), SvcmError> {
    let report = FitReport {
        response: &fit.response,
        covariates: &fit.covariates,
        n_sites: fit.y.len(),
        dropped: fit.dropped,
        basis: fit.basis,
        edf: fit.edf,
        aic: fit.aic,
        residual_correlation: fit.residual_correlation,
        residual_moran: fit.moran,
        converged: fit.converged,
        cycles: fit.cycles,
        trace: &fit.trace,
        surfaces: fit
            .surfaces
            .iter()
            .map(|s| {
                let (lo, hi) = range(&s.estimate);
                SurfaceSummary {
                    name: &s.name,
                    lambda: s.lambda,
                    edf: s.edf,
                    center: s.center,
                    scale: s.scale,
                    estimate_min: lo,
                    estimate_max: hi,
                    critical_value: s.band.as_ref().map(|b| b.critical_value),
                    shape: s.band.as_ref().map(|b| b.shape()),
                }
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&report).map_err(|e| SvcmError::Export(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| SvcmError::Export(format!("{}: {e}", path.display())))
}

/// One row per (site, surface): tract_id, covariate, estimate, lower, upper,
/// sign. `tract_ids` is indexed by input row; band columns are `NA` when no
/// band was computed.
pub fn write_coefficients_csv(fit: &ModelFit, tract_ids: &[i64], path: &Path) -> Result<(), SvcmError> {
    let err = |e: csv::Error| SvcmError::Export(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(["tract_id", "covariate", "estimate", "lower", "upper", "sign"])
        .map_err(err)?;
    for s in &fit.surfaces {
        for (i, &row) in fit.kept.iter().enumerate() {
            let id = tract_ids.get(row).copied().unwrap_or(row as i64);
            let (lo, up, sign) = match &s.band {
                Some(b) => (b.lower[i].to_string(), b.upper[i].to_string(), b.sign_at(i).as_str()),
                None => ("NA".into(), "NA".into(), "NA"),
            };
            w.write_record([id.to_string(), s.name.clone(), s.estimate[i].to_string(), lo, up, sign.to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| SvcmError::Export(e.to_string()))
}

/// Point features carrying `<coefficient>_sign` per site, with each
/// coefficient's shape verdict in the collection properties.
pub fn write_significance_geojson(map: &SignificanceMap, tract_ids: &[i64], path: &Path) -> Result<(), SvcmError> {
    let features: Vec<Value> = map
        .sites
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let row = map.kept[i];
            let mut props = serde_json::Map::new();
            props.insert("tract_id".into(), json!(tract_ids.get(row).copied().unwrap_or(row as i64)));
            for c in &map.coefficients {
                props.insert(format!("{}_sign", c.name), json!(c.signs[i].as_str()));
            }
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                "properties": props,
            })
        })
        .collect();
    let shapes: serde_json::Map<String, Value> = map
        .coefficients
        .iter()
        .map(|c| {
            let shape = match c.shape.shape {
                Shape::Constant => "constant",
                Shape::Nonconstant => "nonconstant",
            };
            (
                c.name.clone(),
                json!({"shape": shape, "constant_interval": c.shape.constant_interval, "significance": c.shape.significance.as_str()}),
            )
        })
        .collect();
    let doc = json!({
        "type": "FeatureCollection",
        "properties": {"alpha": map.alpha, "coefficients": shapes},
        "features": features,
    });
    let text = serde_json::to_string_pretty(&doc).map_err(|e| SvcmError::Export(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| SvcmError::Export(format!("{}: {e}", path.display())))
}
