use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::path::Path;

use serde::Deserialize;

use crate::model::{
    great_circle_arcs, Arc, CensusTract, CoverageMode, DistanceMatrix, GeoPoint, ModelError,
    Physician, PracticeSetting, ScenarioInstance, SystemParameters, COVARIATE_NAMES,
};
use crate::spatial::Hospital;

struct Table {
    file: String,
    columns: HashMap<String, usize>,
    records: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Self, ModelError> {
        let file = path.display().to_string();
        let handle = File::open(path).map_err(|source| ModelError::Io {
            file: file.clone(),
            source,
        })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(handle);
        let headers = rdr
            .headers()
            .map_err(|source| ModelError::Csv {
                file: file.clone(),
                source,
            })?
            .clone();
        let columns = headers
            .iter()
            .enumerate()
            .map(|(k, h)| (h.to_ascii_lowercase(), k))
            .collect();
        let records = rdr
            .records()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|source| ModelError::Csv {
                file: file.clone(),
                source,
            })?;
        Ok(Self {
            file,
            columns,
            records,
        })
    }

    fn require(&self, column: &str) -> Result<usize, ModelError> {
        self.columns
            .get(column)
            .copied()
            .ok_or_else(|| ModelError::MissingColumn {
                file: self.file.clone(),
                column: column.to_string(),
            })
    }

    fn schema_err(&self, row: usize, column: &str, message: impl Into<String>) -> ModelError {
        ModelError::Schema {
            file: self.file.clone(),
            // 1-based, counting the header line
            row: row + 2,
            column: column.to_string(),
            message: message.into(),
        }
    }

    fn raw<'a>(&'a self, row: usize, col: usize) -> &'a str {
        self.records[row].get(col).unwrap_or("")
    }

    fn f64_at(&self, row: usize, column: &str, col: usize) -> Result<f64, ModelError> {
        let raw = self.raw(row, col);
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.schema_err(row, column, format!("expected a number, got `{raw}`")))
    }

    fn i64_at(&self, row: usize, column: &str, col: usize) -> Result<i64, ModelError> {
        let raw = self.raw(row, col);
        raw.parse::<i64>()
            .map_err(|_| self.schema_err(row, column, format!("expected an integer id, got `{raw}`")))
    }

    fn fraction_at(&self, row: usize, column: &str, col: usize, what: &str) -> Result<f64, ModelError> {
        let v = self.f64_at(row, column, col)?;
        if !(0.0..=1.0).contains(&v) {
            return Err(self.schema_err(row, column, format!("{what} fraction out of range ({v})")));
        }
        Ok(v)
    }
}

fn read_tracts(path: &Path) -> Result<Vec<CensusTract>, ModelError> {
    let t = Table::read(path)?;
    let id = t.require("id")?;
    let lat = t.require("lat")?;
    let lon = t.require("lon")?;
    let pm = t.require("pop_medicaid")?;
    let po = t.require("pop_other")?;
    let mm = t.require("mob_medicaid")?;
    let mo = t.require("mob_other")?;
    let cov_cols: Vec<(&str, usize)> = COVARIATE_NAMES
        .iter()
        .filter_map(|name| t.columns.get(&format!("cov_{name}")).map(|&c| (*name, c)))
        .collect();

    let mut seen = HashMap::new();
    let mut tracts = Vec::with_capacity(t.records.len());
    for row in 0..t.records.len() {
        let external_id = t.i64_at(row, "id", id)?;
        if seen.insert(external_id, row).is_some() {
            return Err(ModelError::DuplicateId {
                file: t.file.clone(),
                id: external_id,
            });
        }
        let pop_medicaid = t.f64_at(row, "pop_medicaid", pm)?;
        let pop_other = t.f64_at(row, "pop_other", po)?;
        for (name, v) in [("pop_medicaid", pop_medicaid), ("pop_other", pop_other)] {
            if v < 0.0 {
                return Err(t.schema_err(row, name, format!("negative population ({v})")));
            }
        }
        let mut covariates = BTreeMap::new();
        for &(name, col) in &cov_cols {
            let raw = t.raw(row, col);
            // Empty cells are missing values, dropped later by the regression.
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") {
                continue;
            }
            covariates.insert(name.to_string(), t.f64_at(row, &format!("cov_{name}"), col)?);
        }
        tracts.push(CensusTract {
            index: row,
            external_id,
            centroid: GeoPoint::new(t.f64_at(row, "lat", lat)?, t.f64_at(row, "lon", lon)?),
            pop_medicaid,
            pop_other,
            mob_medicaid: t.fraction_at(row, "mob_medicaid", mm, "mobility")?,
            mob_other: t.fraction_at(row, "mob_other", mo, "mobility")?,
            local_physicians: Vec::new(),
            covariates,
        });
    }
    Ok(tracts)
}

fn read_physicians(path: &Path, tract_ids: &HashMap<i64, usize>) -> Result<Vec<Physician>, ModelError> {
    let t = Table::read(path)?;
    let id = t.require("id")?;
    let lat = t.require("lat")?;
    let lon = t.require("lon")?;
    let tract_id = t.require("tract_id")?;
    let pam = t.require("pam")?;
    let mc = t.columns.get("mc").copied();
    let setting = t.columns.get("setting").copied();

    let mut seen = HashMap::new();
    let mut out = Vec::with_capacity(t.records.len());
    for row in 0..t.records.len() {
        let external_id = t.i64_at(row, "id", id)?;
        if seen.insert(external_id, row).is_some() {
            return Err(ModelError::DuplicateId {
                file: t.file.clone(),
                id: external_id,
            });
        }
        let tid = t.i64_at(row, "tract_id", tract_id)?;
        let tract = *tract_ids.get(&tid).ok_or_else(|| {
            ModelError::DanglingReference(format!(
                "{}: row {}: physician {external_id} references unknown tract {tid}",
                t.file,
                row + 2
            ))
        })?;
        let setting = match setting {
            Some(c) => t
                .raw(row, c)
                .parse::<PracticeSetting>()
                .map_err(|m| t.schema_err(row, "setting", m))?,
            None => PracticeSetting::Other,
        };
        let mc = match mc {
            Some(c) if !t.raw(row, c).is_empty() => t.fraction_at(row, "mc", c, "Medicaid caseload")?,
            _ => setting.default_mc(),
        };
        out.push(Physician {
            index: row,
            external_id,
            location: GeoPoint::new(t.f64_at(row, "lat", lat)?, t.f64_at(row, "lon", lon)?),
            tract,
            pam: t.fraction_at(row, "pam", pam, "Medicaid acceptance")?,
            mc,
            setting,
        });
    }
    Ok(out)
}

fn read_distances(
    path: &Path,
    tract_ids: &HashMap<i64, usize>,
    physician_ids: &HashMap<i64, usize>,
) -> Result<Vec<Arc>, ModelError> {
    let t = Table::read(path)?;
    let tc = t.require("tract_id")?;
    let pc = t.require("physician_id")?;
    let mc = t.require("miles")?;
    let mut arcs = Vec::with_capacity(t.records.len());
    let mut seen = std::collections::HashSet::new();
    for row in 0..t.records.len() {
        let tid = t.i64_at(row, "tract_id", tc)?;
        let pid = t.i64_at(row, "physician_id", pc)?;
        let tract = *tract_ids.get(&tid).ok_or_else(|| {
            ModelError::DanglingReference(format!("{}: row {}: unknown tract {tid}", t.file, row + 2))
        })?;
        let physician = *physician_ids.get(&pid).ok_or_else(|| {
            ModelError::DanglingReference(format!("{}: row {}: unknown physician {pid}", t.file, row + 2))
        })?;
        if !seen.insert((tract, physician)) {
            return Err(ModelError::DuplicateArc {
                tract: tid,
                physician: pid,
            });
        }
        let miles = t.f64_at(row, "miles", mc)?;
        if miles < 0.0 {
            return Err(t.schema_err(row, "miles", format!("negative distance ({miles})")));
        }
        arcs.push(Arc {
            tract,
            physician,
            miles,
        });
    }
    Ok(arcs)
}

/// Loads and validates a scenario from the CSV schemas. Without a distance
/// file, arcs come from great-circle distances pruned at `mi_max`.
pub fn load_scenario(
    tract_file: &Path,
    physician_file: &Path,
    distance_file: Option<&Path>,
    params: SystemParameters,
) -> Result<ScenarioInstance, ModelError> {
    params.validate()?;
    let tracts = read_tracts(tract_file)?;
    let tract_ids: HashMap<i64, usize> = tracts.iter().map(|t| (t.external_id, t.index)).collect();
    let physicians = read_physicians(physician_file, &tract_ids)?;
    let arcs = match distance_file {
        Some(path) => {
            let physician_ids: HashMap<i64, usize> =
                physicians.iter().map(|p| (p.external_id, p.index)).collect();
            read_distances(path, &tract_ids, &physician_ids)?
        }
        None => great_circle_arcs(&tracts, &physicians, params.mi_max),
    };
    let distances = DistanceMatrix::from_arcs(tracts.len(), physicians.len(), arcs, params.mi_max)?;
    ScenarioInstance::new(tracts, physicians, distances, params)
}

fn write_err(file: &Path, source: csv::Error) -> ModelError {
    ModelError::Csv {
        file: file.display().to_string(),
        source,
    }
}

/// Writes `tracts.csv`, `physicians.csv` and `distances.csv` into `dir`.
pub fn write_scenario(scenario: &ScenarioInstance, dir: &Path) -> Result<(), ModelError> {
    std::fs::create_dir_all(dir).map_err(|source| ModelError::Io {
        file: dir.display().to_string(),
        source,
    })?;

    let path = dir.join("tracts.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| write_err(&path, e))?;
    let present: Vec<&str> = COVARIATE_NAMES
        .iter()
        .copied()
        .filter(|n| scenario.tracts.iter().any(|t| t.covariates.contains_key(*n)))
        .collect();
    let mut header: Vec<String> = [
        "id", "lat", "lon", "pop_medicaid", "pop_other", "mob_medicaid", "mob_other",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(present.iter().map(|n| format!("cov_{n}")));
    w.write_record(&header).map_err(|e| write_err(&path, e))?;
    for t in &scenario.tracts {
        let mut rec = vec![
            t.external_id.to_string(),
            t.centroid.lat.to_string(),
            t.centroid.lon.to_string(),
            t.pop_medicaid.to_string(),
            t.pop_other.to_string(),
            t.mob_medicaid.to_string(),
            t.mob_other.to_string(),
        ];
        rec.extend(
            present
                .iter()
                .map(|n| t.covariates.get(*n).map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&rec).map_err(|e| write_err(&path, e))?;
    }
    w.flush().map_err(|source| ModelError::Io {
        file: path.display().to_string(),
        source,
    })?;

    let path = dir.join("physicians.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| write_err(&path, e))?;
    w.write_record(["id", "lat", "lon", "tract_id", "pam", "mc", "setting"])
        .map_err(|e| write_err(&path, e))?;
    for p in &scenario.physicians {
        w.write_record([
            p.external_id.to_string(),
            p.location.lat.to_string(),
            p.location.lon.to_string(),
            scenario.tracts[p.tract].external_id.to_string(),
            p.pam.to_string(),
            p.mc.to_string(),
            p.setting.as_str().to_string(),
        ])
        .map_err(|e| write_err(&path, e))?;
    }
    w.flush().map_err(|source| ModelError::Io {
        file: path.display().to_string(),
        source,
    })?;

    let path = dir.join("distances.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| write_err(&path, e))?;
    w.write_record(["tract_id", "physician_id", "miles"])
        .map_err(|e| write_err(&path, e))?;
    for a in scenario.distances.arcs() {
        w.write_record([
            scenario.tracts[a.tract].external_id.to_string(),
            scenario.physicians[a.physician].external_id.to_string(),
            a.miles.to_string(),
        ])
        .map_err(|e| write_err(&path, e))?;
    }
    w.flush().map_err(|source| ModelError::Io {
        file: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamsFile {
    mi_max: Option<f64>,
    mi_max_limited: Option<f64>,
    pc: Option<f64>,
    lc: Option<f64>,
    cc: Option<f64>,
    coverage: Option<String>,
}

/// Parses a TOML key-value parameter file. Absent keys keep their defaults.
pub fn parse_params(text: &str) -> Result<SystemParameters, ModelError> {
    let raw: ParamsFile =
        toml::from_str(text).map_err(|e| ModelError::InvalidParameters(e.to_string()))?;
    let d = SystemParameters::default();
    let coverage = match raw.coverage {
        Some(s) => s.parse::<CoverageMode>().map_err(ModelError::InvalidParameters)?,
        None => d.coverage,
    };
    let p = SystemParameters {
        mi_max: raw.mi_max.unwrap_or(d.mi_max),
        mi_max_limited: raw.mi_max_limited.unwrap_or(d.mi_max_limited),
        pc: raw.pc.unwrap_or(d.pc),
        lc: raw.lc.unwrap_or(d.lc),
        cc: raw.cc.unwrap_or(d.cc),
        coverage,
    };
    p.validate()?;
    Ok(p)
}

pub fn load_params(path: &Path) -> Result<SystemParameters, ModelError> {
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        file: path.display().to_string(),
        source,
    })?;
    parse_params(&text)
}

/// Reads `hospitals.csv` (`id,lat,lon,beds`).
pub fn load_hospitals(path: &Path) -> Result<Vec<Hospital>, ModelError> {
    let t = Table::read(path)?;
    let id = t.require("id")?;
    let lat = t.require("lat")?;
    let lon = t.require("lon")?;
    let beds = t.require("beds")?;
    (0..t.records.len())
        .map(|row| {
            let b = t.f64_at(row, "beds", beds)?;
            if b < 0.0 {
                return Err(t.schema_err(row, "beds", format!("negative bed count ({b})")));
            }
            Ok(Hospital {
                id: t.i64_at(row, "id", id)?,
                location: GeoPoint::new(t.f64_at(row, "lat", lat)?, t.f64_at(row, "lon", lon)?),
                beds: b,
            })
        })
        .collect()
}

pub fn write_hospitals(hospitals: &[Hospital], path: &Path) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| write_err(path, e))?;
    w.write_record(["id", "lat", "lon", "beds"])
        .map_err(|e| write_err(path, e))?;
    for h in hospitals {
        w.write_record([
            h.id.to_string(),
            h.location.lat.to_string(),
            h.location.lon.to_string(),
            h.beds.to_string(),
        ])
        .map_err(|e| write_err(path, e))?;
    }
    w.flush().map_err(|source| ModelError::Io {
        file: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    const PHYS: &str = "id,lat,lon,tract_id,pam,mc,setting\n7,33.0,-84.0,10,0.8,,community_clinic\n";

    #[test]
    fn loads_minimal_files() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(
            dir.path(),
            "tracts.csv",
            "id,lat,lon,pop_medicaid,pop_other,mob_medicaid,mob_other\n10,33.0,-84.01,40,60,0.5,0.9\n",
        );
        let p = write(dir.path(), "physicians.csv", PHYS);
        let s = load_scenario(&t, &p, None, SystemParameters::default()).unwrap();
        assert_eq!(s.tracts[0].external_id, 10);
        assert_eq!(s.physicians[0].mc, 0.64);
        assert_eq!(s.tracts[0].local_physicians, vec![0]);
        assert_eq!(s.distances.len(), 1);
    }

    #[test]
    fn mobility_out_of_range_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(
            dir.path(),
            "tracts.csv",
            "id,lat,lon,pop_medicaid,pop_other,mob_medicaid,mob_other\n10,33.0,-84.0,40,60,1.2,0.9\n",
        );
        let p = write(dir.path(), "physicians.csv", PHYS);
        let err = load_scenario(&t, &p, None, SystemParameters::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("mobility fraction out of range"), "{msg}");
        assert!(msg.contains("row 2") && msg.contains("mob_medicaid"), "{msg}");
    }

    #[test]
    fn negative_population_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(
            dir.path(),
            "tracts.csv",
            "id,lat,lon,pop_medicaid,pop_other,mob_medicaid,mob_other\n10,33.0,-84.0,-4,60,0.2,0.9\n",
        );
        let p = write(dir.path(), "physicians.csv", PHYS);
        let err = load_scenario(&t, &p, None, SystemParameters::default()).unwrap_err();
        assert!(err.to_string().contains("negative population"));
    }

    #[test]
    fn dangling_tract_reference() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(
            dir.path(),
            "tracts.csv",
            "id,lat,lon,pop_medicaid,pop_other,mob_medicaid,mob_other\n11,33.0,-84.0,4,60,0.2,0.9\n",
        );
        let p = write(dir.path(), "physicians.csv", PHYS);
        assert!(matches!(
            load_scenario(&t, &p, None, SystemParameters::default()),
            Err(ModelError::DanglingReference(_))
        ));
    }

    #[test]
    fn distance_file_used_and_pruned() {
        let dir = tempfile::tempdir().unwrap();
        let t = write(
            dir.path(),
            "tracts.csv",
            "id,lat,lon,pop_medicaid,pop_other,mob_medicaid,mob_other\n10,33.0,-84.0,4,6,0.2,0.9\n20,33.0,-84.0,4,6,0.2,0.9\n",
        );
        let p = write(dir.path(), "physicians.csv", PHYS);
        let d = write(dir.path(), "distances.csv", "tract_id,physician_id,miles\n10,7,3.5\n20,7,40\n");
        let s = load_scenario(&t, &p, Some(&d), SystemParameters::default()).unwrap();
        assert_eq!(s.distances.len(), 1);
        assert_eq!(s.distances.get(0, 0), Some(3.5));
        assert_eq!(s.zero_arc_tracts(), vec![1]);
    }

    #[test]
    fn missing_file_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_scenario(
            &dir.path().join("nope.csv"),
            &dir.path().join("physicians.csv"),
            None,
            SystemParameters::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("nope.csv"));
    }

    #[test]
    fn params_file() {
        let p = parse_params("pc = 2000\ncoverage = \"fixed:0.9\"\n").unwrap();
        assert_eq!(p.pc, 2000.0);
        assert_eq!(p.coverage, CoverageMode::FixedFraction(0.9));
        assert_eq!(p.mi_max, 25.0);
        assert!(parse_params("bogus = 1\n").is_err());
        assert!(parse_params("lc = 0.9\n").is_err());
    }
}
