use std::path::Path;

use crate::assignment::AssignmentSolution;
use crate::model::{ModelError, ScenarioInstance};

fn csv_err(path: &Path, source: csv::Error) -> ModelError {
    ModelError::Csv {
        file: path.display().to_string(),
        source,
    }
}

/// `assignment.csv`: `tract_id,physician_id,group,flow`, nonzero flows only,
/// external ids.
pub fn write_assignment_csv(s: &ScenarioInstance, sol: &AssignmentSolution, path: &Path) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["tract_id", "physician_id", "group", "flow"])
        .map_err(|e| csv_err(path, e))?;
    let arcs = s.distances.arcs();
    let mut rows: Vec<_> = sol.nonzero_flows().collect();
    rows.sort_by_key(|&(k, g, _)| (k, g));
    for (k, g, f) in rows {
        let a = arcs[k];
        w.write_record([
            s.tracts[a.tract].external_id.to_string(),
            s.physicians[a.physician].external_id.to_string(),
            g.as_str().to_string(),
            format!("{f}"),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| ModelError::Io {
        file: path.display().to_string(),
        source,
    })
}

/// `relaxations.csv`: `physician_id,floor,load,slack`.
pub fn write_relaxations_csv(s: &ScenarioInstance, sol: &AssignmentSolution, path: &Path) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["physician_id", "floor", "load", "slack"])
        .map_err(|e| csv_err(path, e))?;
    for r in &sol.relaxation_report {
        w.write_record([
            s.physicians[r.physician].external_id.to_string(),
            format!("{}", r.floor),
            format!("{}", r.load),
            format!("{}", r.slack),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| ModelError::Io {
        file: path.display().to_string(),
        source,
    })
}
