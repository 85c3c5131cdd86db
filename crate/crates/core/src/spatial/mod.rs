//! Spatial covariates and diagnostics: kernel density of child population,
//! bed-weighted hospital distance, two-scale diversity ratio, and Moran's I.

mod diversity;
mod kde;
mod moran;
mod weights;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::GeoPoint;

pub use diversity::{diversity_ratio, normalized_entropy, two_group_composition};
pub use kde::{kde_density, kde_density_geo, silverman_bandwidth, Kde};
pub use moran::{morans_i, MoranResult};
pub use weights::{SpatialWeightMatrix, WeightScheme};

/// Default radius for the hospital-distance covariate and its sentinel value.
pub const HOSPITAL_RADIUS_MILES: f64 = 25.0;
pub const DIVERSITY_LOCAL_MILES: f64 = 2.0;
pub const DIVERSITY_REGIONAL_MILES: f64 = 10.0;

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("empty point set")]
    EmptyPoints,
    #[error("bandwidth must be positive, got {0}")]
    BadBandwidth(f64),
    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },
    #[error("values have zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid radii: need regional > local > 0, got local={local} regional={regional}")]
    BadRadii { local: f64, regional: f64 },
    #[error("invalid weights: {0}")]
    BadWeights(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hospital {
    pub id: i64,
    pub location: GeoPoint,
    pub beds: f64,
}

/// Bed-weighted mean distance to hospitals within `radius` miles; `radius`
/// itself when none are in range.
pub fn hospital_distance(from: GeoPoint, hospitals: &[Hospital], radius: f64) -> f64 {
    let mut num = 0.0;
    let mut beds = 0.0;
    let mut plain = 0.0;
    let mut n = 0usize;
    for h in hospitals {
        let d = from.miles_to(&h.location);
        if d <= radius {
            num += d * h.beds;
            beds += h.beds;
            plain += d;
            n += 1;
        }
    }
    match n {
        0 => radius,
        _ if beds > 0.0 => num / beds,
        _ => plain / n as f64,
    }
}

/// A named per-tract covariate with its standardization record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSurface {
    pub name: String,
    pub values: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

impl CovariateSurface {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Self {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            name: name.into(),
            values,
            mean,
            sd: var.sqrt(),
        }
    }

    /// Values centered and scaled to unit (population) standard deviation.
    /// A constant covariate is only centered.
    pub fn standardized(&self) -> Vec<f64> {
        let sd = if self.sd > 0.0 { self.sd } else { 1.0 };
        self.values.iter().map(|v| (v - self.mean) / sd).collect()
    }
}
