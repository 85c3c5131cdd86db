//! Space-varying coefficient regression: penalized tensor splines fitted by
//! backfitting, wild-bootstrap simultaneous bands, significance maps,
//! difference and location tests, and model comparison.

mod bands;
mod basis;
mod export;
mod fit;
mod inference;
mod smoother;

#[cfg(test)]
mod tests;

use thiserror::Error;

use crate::spatial::SpatialError;

pub use bands::{
    attach_bands, classify_shape, simultaneous_band, simultaneous_bands, simultaneous_bands_with, Band, Refit, Shape,
    ShapeVerdict, Sign, MIN_BOOTSTRAP, PILOT_UNDERSMOOTH,
};
pub use basis::{Basis, BasisKind, BasisSpec, KnotLayout};
pub use export::{write_coefficients_csv, write_fit_json, write_significance_geojson};
pub use fit::{fit_svcm, CoefficientSurface, ModelFit, SvcmOptions};
pub use inference::{
    difference_test, evaluate_models, location_test, significance_map, weighted_mean, CoefficientSignificance,
    CovariateConsistency, CovariateVerdict, EvaluateOptions, InferenceOptions, ModelComparison, ModelRow,
    SignificanceMap,
};

/// Name of the intercept surface.
pub const INTERCEPT: &str = "intercept";

#[derive(Debug, Error)]
pub enum SvcmError {
    #[error("no sites")]
    Empty,
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid basis: {0}")]
    BadBasis(String),
    #[error("model has no terms")]
    NoTerms,
    #[error("need at least {need} complete sites, got {got}")]
    TooFewSites { need: usize, got: usize },
    #[error("basis for term {term} is rank deficient")]
    RankDeficient { term: usize },
    #[error("n_boot = {n_boot} is below the minimum of {min}")]
    TooFewBootstrap { n_boot: usize, min: usize },
    #[error("alpha must lie in (0, 1), got {0}")]
    BadAlpha(f64),
    #[error("no surface with index {0}")]
    NoSuchTerm(usize),
    #[error("surface '{0}' has no band")]
    NoBand(String),
    #[error("invalid candidate: {0}")]
    BadCandidate(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("spatial: {0}")]
    Spatial(#[from] SpatialError),
    #[error("export failed: {0}")]
    Export(String),
}
