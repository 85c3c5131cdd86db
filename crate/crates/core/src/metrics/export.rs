use std::path::Path;

use serde_json::{json, Map, Value};

use crate::metrics::AccessibilityMeasures;
use crate::model::{ModelError, ScenarioInstance};

fn io_err(path: &Path, source: std::io::Error) -> ModelError {
    ModelError::Io {
        file: path.display().to_string(),
        source,
    }
}

fn cell(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else {
        "NA".into()
    }
}

/// `measures.csv`: `tract_id,scope,coverage,travel_cost,congestion`; `NA`
/// where the tract has no children in scope.
pub fn write_measures_csv(s: &ScenarioInstance, all: &[AccessibilityMeasures], path: &Path) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_path(path).map_err(|source| ModelError::Csv {
        file: path.display().to_string(),
        source,
    })?;
    let err = |source| ModelError::Csv {
        file: path.display().to_string(),
        source,
    };
    w.write_record(["tract_id", "scope", "coverage", "travel_cost", "congestion"])
        .map_err(err)?;
    for m in all {
        for (t, v) in s.tracts.iter().zip(&m.tracts) {
            w.write_record([
                t.external_id.to_string(),
                m.scope.as_str().to_string(),
                cell(v.coverage),
                cell(v.travel_cost),
                cell(v.congestion),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// Point FeatureCollection at tract centroids with `<scope>_<measure>`
/// properties.
pub fn write_measures_geojson(
    s: &ScenarioInstance,
    all: &[AccessibilityMeasures],
    path: &Path,
) -> Result<(), ModelError> {
    let features: Vec<Value> = s
        .tracts
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let mut props = Map::new();
            props.insert("tract_id".into(), json!(t.external_id));
            for m in all {
                let v = m.tracts[i];
                let sc = m.scope.as_str();
                props.insert(format!("{sc}_coverage"), num(v.coverage));
                props.insert(format!("{sc}_travel_cost"), num(v.travel_cost));
                props.insert(format!("{sc}_congestion"), num(v.congestion));
            }
            json!({
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [t.centroid.lon, t.centroid.lat]},
                "properties": props,
            })
        })
        .collect();
    let doc = json!({"type": "FeatureCollection", "features": features});
    let text = serde_json::to_string_pretty(&doc).expect("json values serialize");
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}
