//! Domain types for an accessibility scenario: census tracts, physicians,
//! sparse tract-to-physician distances, and system parameters.

mod builder;
mod geo;
mod io;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use builder::{two_tract_example, ScenarioBuilder};
pub use geo::{great_circle_distance, haversine_miles, EARTH_RADIUS_MILES};
pub use io::{
    load_hospitals, load_params, load_scenario, parse_params, write_hospitals, write_scenario,
};
pub use synth::{generate_synthetic_state, generate_synthetic_world, Profile, SyntheticWorld};

/// Covariate names in their canonical column order (`cov_<name>` in `tracts.csv`).
pub const COVARIATE_NAMES: [&str; 7] = [
    "income", "edu", "unemp", "nonwhite", "density", "hospdist", "divratio",
];

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{file}: row {row}, column {column}: {message}")]
    Schema {
        file: String,
        row: usize,
        column: String,
        message: String,
    },
    #[error("{file}: missing required column `{column}`")]
    MissingColumn { file: String, column: String },
    #[error("cannot read {file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Csv {
        file: String,
        #[source]
        source: csv::Error,
    },
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("duplicate id {id} in {file}")]
    DuplicateId { file: String, id: i64 },
    #[error("duplicate distance entry for tract {tract}, physician {physician}")]
    DuplicateArc { tract: i64, physician: i64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    pub fn miles_to(&self, other: &GeoPoint) -> f64 {
        great_circle_distance(*self, *other)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusTract {
    /// Dense 0-based index.
    pub index: usize,
    /// Identifier as it appeared in the input.
    pub external_id: i64,
    pub centroid: GeoPoint,
    pub pop_medicaid: f64,
    pub pop_other: f64,
    pub mob_medicaid: f64,
    pub mob_other: f64,
    /// Indices of physicians located in this tract.
    pub local_physicians: Vec<usize>,
    pub covariates: BTreeMap<String, f64>,
}

impl CensusTract {
    pub fn population(&self) -> f64 {
        self.pop_medicaid + self.pop_other
    }

    /// Number of physicians in the tract (`md_i`).
    pub fn physician_count(&self) -> usize {
        self.local_physicians.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PracticeSetting {
    PublicHospital,
    CommunityClinic,
    Other,
}

impl PracticeSetting {
    /// Default maximum Medicaid caseload fraction for the setting.
    pub fn default_mc(self) -> f64 {
        match self {
            PracticeSetting::PublicHospital => 0.74,
            PracticeSetting::CommunityClinic => 0.64,
            PracticeSetting::Other => 0.32,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PracticeSetting::PublicHospital => "public_hospital",
            PracticeSetting::CommunityClinic => "community_clinic",
            PracticeSetting::Other => "other",
        }
    }
}

impl FromStr for PracticeSetting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "public_hospital" | "hospital" => Ok(PracticeSetting::PublicHospital),
            "community_clinic" | "clinic" => Ok(PracticeSetting::CommunityClinic),
            "other" | "" => Ok(PracticeSetting::Other),
            other => Err(format!("unknown practice setting `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Physician {
    pub index: usize,
    pub external_id: i64,
    pub location: GeoPoint,
    /// Index of the containing tract.
    pub tract: usize,
    /// Probability of accepting any Medicaid patients.
    pub pam: f64,
    /// Maximum Medicaid caseload fraction.
    pub mc: f64,
    pub setting: PracticeSetting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoverageMode {
    /// Maximize assigned children, then minimize distance.
    MaxCoverage,
    /// Require at least this fraction of all children assigned.
    FixedFraction(f64),
}

impl fmt::Display for CoverageMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoverageMode::MaxCoverage => write!(f, "max"),
            CoverageMode::FixedFraction(a) => write!(f, "fixed:{a}"),
        }
    }
}

impl FromStr for CoverageMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("max") || s.eq_ignore_ascii_case("max_coverage") {
            return Ok(CoverageMode::MaxCoverage);
        }
        let frac = s
            .strip_prefix("fixed:")
            .ok_or_else(|| format!("coverage mode `{s}` is neither `max` nor `fixed:<alpha>`"))?;
        let alpha: f64 = frac
            .parse()
            .map_err(|_| format!("bad coverage fraction `{frac}`"))?;
        if !(0.0..=1.0).contains(&alpha) {
            return Err(format!("coverage fraction {alpha} outside [0,1]"));
        }
        Ok(CoverageMode::FixedFraction(alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParameters {
    /// Maximum distance any family travels (miles).
    pub mi_max: f64,
    /// Maximum distance for families without a vehicle (miles).
    pub mi_max_limited: f64,
    /// Physician patient capacity.
    pub pc: f64,
    /// Lowest sustainable congestion fraction.
    pub lc: f64,
    /// Maximum tract-level congestion where physicians cluster.
    pub cc: f64,
    pub coverage: CoverageMode,
}

impl Default for SystemParameters {
    fn default() -> Self {
        Self {
            mi_max: 25.0,
            mi_max_limited: 10.0,
            pc: 2500.0,
            lc: 0.25,
            cc: 0.70,
            coverage: CoverageMode::MaxCoverage,
        }
    }
}

impl SystemParameters {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidParameters(m));
        if !(self.pc > 0.0 && self.pc.is_finite()) {
            return bad(format!("pc must be positive, got {}", self.pc));
        }
        if !(0.0 <= self.lc && self.lc <= self.cc && self.cc <= 1.0) {
            return bad(format!(
                "need 0 <= lc <= cc <= 1, got lc={} cc={}",
                self.lc, self.cc
            ));
        }
        if !(0.0 < self.mi_max_limited && self.mi_max_limited <= self.mi_max)
            || !self.mi_max.is_finite()
        {
            return bad(format!(
                "need 0 < mi_max_limited <= mi_max, got {} and {}",
                self.mi_max_limited, self.mi_max
            ));
        }
        if let CoverageMode::FixedFraction(a) = self.coverage {
            if !(0.0..=1.0).contains(&a) {
                return bad(format!("coverage fraction {a} outside [0,1]"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arc {
    pub tract: usize,
    pub physician: usize,
    pub miles: f64,
}

/// Sparse tract-to-physician distances, pruned at `mi_max`.
///
/// Arcs are stored sorted by `(tract, physician)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    arcs: Vec<Arc>,
    tract_offsets: Vec<usize>,
    by_physician: Vec<Vec<usize>>,
}

impl DistanceMatrix {
    /// Builds the matrix, silently dropping arcs longer than `mi_max`.
    pub fn from_arcs(
        n_tracts: usize,
        n_physicians: usize,
        mut arcs: Vec<Arc>,
        mi_max: f64,
    ) -> Result<Self, ModelError> {
        for a in &arcs {
            if a.tract >= n_tracts || a.physician >= n_physicians {
                return Err(ModelError::DanglingReference(format!(
                    "arc ({}, {}) outside {} tracts x {} physicians",
                    a.tract, a.physician, n_tracts, n_physicians
                )));
            }
            if !(a.miles >= 0.0 && a.miles.is_finite()) {
                return Err(ModelError::InvalidScenario(format!(
                    "distance {} for arc ({}, {}) is not a finite non-negative number",
                    a.miles, a.tract, a.physician
                )));
            }
        }
        arcs.retain(|a| a.miles <= mi_max);
        arcs.sort_by_key(|a| (a.tract, a.physician));
        for w in arcs.windows(2) {
            if w[0].tract == w[1].tract && w[0].physician == w[1].physician {
                return Err(ModelError::DuplicateArc {
                    tract: w[0].tract as i64,
                    physician: w[0].physician as i64,
                });
            }
        }
        let mut tract_offsets = vec![0usize; n_tracts + 1];
        for a in &arcs {
            tract_offsets[a.tract + 1] += 1;
        }
        for i in 0..n_tracts {
            tract_offsets[i + 1] += tract_offsets[i];
        }
        let mut by_physician = vec![Vec::new(); n_physicians];
        for (k, a) in arcs.iter().enumerate() {
            by_physician[a.physician].push(k);
        }
        Ok(Self {
            arcs,
            tract_offsets,
            by_physician,
        })
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Arc indices leaving tract `i`.
    pub fn tract_arc_range(&self, i: usize) -> std::ops::Range<usize> {
        self.tract_offsets[i]..self.tract_offsets[i + 1]
    }

    pub fn tract_arcs(&self, i: usize) -> &[Arc] {
        &self.arcs[self.tract_arc_range(i)]
    }

    /// Arc indices reaching physician `j`.
    pub fn physician_arcs(&self, j: usize) -> &[usize] {
        &self.by_physician[j]
    }

    pub fn get(&self, tract: usize, physician: usize) -> Option<f64> {
        let arcs = self.tract_arcs(tract);
        arcs.binary_search_by_key(&physician, |a| a.physician)
            .ok()
            .map(|k| arcs[k].miles)
    }

    pub fn max_miles(&self) -> f64 {
        self.arcs.iter().map(|a| a.miles).fold(0.0, f64::max)
    }
}

/// Full problem input. Immutable once built; transforms produce new instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInstance {
    pub tracts: Vec<CensusTract>,
    pub physicians: Vec<Physician>,
    pub distances: DistanceMatrix,
    pub params: SystemParameters,
}

impl ScenarioInstance {
    /// Assembles and validates a scenario. `local_physicians` on the tracts is
    /// recomputed from the physician records.
    pub fn new(
        mut tracts: Vec<CensusTract>,
        physicians: Vec<Physician>,
        distances: DistanceMatrix,
        params: SystemParameters,
    ) -> Result<Self, ModelError> {
        for t in tracts.iter_mut() {
            t.local_physicians.clear();
        }
        for p in &physicians {
            let t = tracts.get_mut(p.tract).ok_or_else(|| {
                ModelError::DanglingReference(format!(
                    "physician {} references tract index {}",
                    p.external_id, p.tract
                ))
            })?;
            t.local_physicians.push(p.index);
        }
        let s = Self {
            tracts,
            physicians,
            distances,
            params,
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds arcs from great-circle distances, pruned at `params.mi_max`.
    pub fn with_great_circle_distances(
        tracts: Vec<CensusTract>,
        physicians: Vec<Physician>,
        params: SystemParameters,
    ) -> Result<Self, ModelError> {
        let arcs = great_circle_arcs(&tracts, &physicians, params.mi_max);
        let distances =
            DistanceMatrix::from_arcs(tracts.len(), physicians.len(), arcs, params.mi_max)?;
        Self::new(tracts, physicians, distances, params)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.params.validate()?;
        let invalid = |m: String| Err(ModelError::InvalidScenario(m));
        for (k, t) in self.tracts.iter().enumerate() {
            if t.index != k {
                return invalid(format!("tract index {} at position {k}", t.index));
            }
            for (name, v) in [("pop_medicaid", t.pop_medicaid), ("pop_other", t.pop_other)] {
                if !(v >= 0.0 && v.is_finite()) {
                    return invalid(format!(
                        "tract {}: {name} must be a non-negative number, got {v}",
                        t.external_id
                    ));
                }
            }
            for (name, v) in [("mob_medicaid", t.mob_medicaid), ("mob_other", t.mob_other)] {
                if !(0.0..=1.0).contains(&v) {
                    return invalid(format!(
                        "tract {}: {name} mobility fraction out of range ({v})",
                        t.external_id
                    ));
                }
            }
        }
        for (k, p) in self.physicians.iter().enumerate() {
            if p.index != k {
                return invalid(format!("physician index {} at position {k}", p.index));
            }
            if p.tract >= self.tracts.len() {
                return Err(ModelError::DanglingReference(format!(
                    "physician {} references tract index {}",
                    p.external_id, p.tract
                )));
            }
            if !(0.0..=1.0).contains(&p.pam) {
                return invalid(format!("physician {}: pam out of range ({})", p.external_id, p.pam));
            }
            if !(0.0..=1.0).contains(&p.mc) {
                return invalid(format!("physician {}: mc out of range ({})", p.external_id, p.mc));
            }
            if !self.tracts[p.tract].local_physicians.contains(&p.index) {
                return invalid(format!(
                    "physician {} missing from its tract's local physician list",
                    p.external_id
                ));
            }
        }
        let listed: usize = self.tracts.iter().map(|t| t.local_physicians.len()).sum();
        if listed != self.physicians.len() {
            return invalid(format!(
                "tracts list {listed} local physicians but there are {}",
                self.physicians.len()
            ));
        }
        if self.distances.tract_offsets.len() != self.tracts.len() + 1
            || self.distances.by_physician.len() != self.physicians.len()
        {
            return invalid("distance matrix dimensions do not match scenario".into());
        }
        if self
            .distances
            .arcs
            .iter()
            .any(|a| a.miles > self.params.mi_max)
        {
            return invalid("distance matrix contains arcs beyond mi_max".into());
        }
        Ok(())
    }

    pub fn total_population(&self) -> f64 {
        self.tracts.iter().map(|t| t.population()).sum()
    }

    /// Re-prunes arcs after a parameter change that lowers `mi_max`.
    pub fn with_params(&self, params: SystemParameters) -> Result<Self, ModelError> {
        let arcs = self.distances.arcs().to_vec();
        let distances =
            DistanceMatrix::from_arcs(self.tracts.len(), self.physicians.len(), arcs, params.mi_max)?;
        Self::new(self.tracts.clone(), self.physicians.clone(), distances, params)
    }

    /// Tracts with no physician within `mi_max`.
    pub fn zero_arc_tracts(&self) -> Vec<usize> {
        (0..self.tracts.len())
            .filter(|&i| self.distances.tract_arc_range(i).is_empty())
            .collect()
    }
}

pub(crate) fn great_circle_arcs(
    tracts: &[CensusTract],
    physicians: &[Physician],
    mi_max: f64,
) -> Vec<Arc> {
    // Latitude band prefilter: one degree of latitude is ~69 miles.
    let lat_band = mi_max / 68.0 + 1e-6;
    let mut order: Vec<usize> = (0..physicians.len()).collect();
    order.sort_by(|&a, &b| {
        physicians[a]
            .location
            .lat
            .total_cmp(&physicians[b].location.lat)
    });
    let lats: Vec<f64> = order.iter().map(|&j| physicians[j].location.lat).collect();
    let mut arcs = Vec::new();
    for t in tracts {
        let lo = lats.partition_point(|&l| l < t.centroid.lat - lat_band);
        let hi = lats.partition_point(|&l| l <= t.centroid.lat + lat_band);
        for &j in &order[lo..hi] {
            let d = great_circle_distance(t.centroid, physicians[j].location);
            if d <= mi_max {
                arcs.push(Arc {
                    tract: t.index,
                    physician: j,
                    miles: d,
                });
            }
        }
    }
    arcs
}
