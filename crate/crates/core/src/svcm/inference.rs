use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model::GeoPoint;
use crate::spatial::CovariateSurface;
use crate::svcm::{attach_bands, fit_svcm, ModelFit, Shape, ShapeVerdict, Sign, SvcmError, SvcmOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceOptions {
    pub alpha: f64,
    pub n_boot: usize,
    pub seed: u64,
    pub fit: SvcmOptions,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            n_boot: 200,
            seed: 0,
            fit: SvcmOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSignificance {
    pub name: String,
    pub signs: Vec<Sign>,
    pub shape: ShapeVerdict,
}

/// Per-site signs for each banded coefficient of a fit, at level `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceMap {
    pub alpha: f64,
    pub sites: Vec<GeoPoint>,
    /// Input row of each site.
    pub kept: Vec<usize>,
    pub coefficients: Vec<CoefficientSignificance>,
}

impl SignificanceMap {
    /// Signs of the first coefficient (the only one for difference and
    /// location tests).
    pub fn signs(&self) -> &[Sign] {
        &self.coefficients[0].signs
    }

    pub fn count(&self, sign: Sign) -> usize {
        self.signs().iter().filter(|s| **s == sign).count()
    }
}

/// Significance map of every surface in a fit whose bands are attached.
pub fn significance_map(fit: &ModelFit) -> Result<SignificanceMap, SvcmError> {
    let mut alpha = f64::NAN;
    let coefficients = fit
        .surfaces
        .iter()
        .map(|s| {
            let band = s.band.as_ref().ok_or_else(|| SvcmError::NoBand(s.name.clone()))?;
            alpha = band.alpha;
            Ok(CoefficientSignificance {
                name: s.name.clone(),
                signs: band.signs(),
                shape: band.shape(),
            })
        })
        .collect::<Result<Vec<_>, SvcmError>>()?;
    Ok(SignificanceMap {
        alpha,
        sites: fit.sites.clone(),
        kept: fit.kept.clone(),
        coefficients,
    })
}

fn intercept_only(z: &[f64], sites: &[GeoPoint], opts: &InferenceOptions, name: &str) -> Result<SignificanceMap, SvcmError> {
    let mut fit_opts = opts.fit.clone();
    fit_opts.intercept = true;
    fit_opts.response_name = name.into();
    let mut fit = fit_svcm(z, &[], sites, &fit_opts)?;
    attach_bands(&mut fit, opts.alpha, opts.n_boot, opts.seed)?;
    significance_map(&fit)
}

/// Where does `m - o` differ from zero? Fits an intercept-only surface to the
/// per-site difference and flags sites whose band excludes zero.
pub fn difference_test(
    m: &[f64],
    o: &[f64],
    sites: &[GeoPoint],
    opts: &InferenceOptions,
) -> Result<SignificanceMap, SvcmError> {
    if m.len() != o.len() || m.len() != sites.len() {
        return Err(SvcmError::LengthMismatch(format!(
            "{} vs {} values at {} sites",
            m.len(),
            o.len(),
            sites.len()
        )));
    }
    let z: Vec<f64> = m.iter().zip(o).map(|(a, b)| a - b).collect();
    intercept_only(&z, sites, opts, "difference")
}

/// Population-weighted mean over finite values; the plain mean without
/// weights.
pub fn weighted_mean(y: &[f64], weights: Option<&[f64]>) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        if v.is_finite() {
            let w = weights.map_or(1.0, |w| w[i]);
            num += w * v;
            den += w;
        }
    }
    num / den
}

/// Where does `y` exceed or fall below `mu0` (default: the weighted mean)?
pub fn location_test(
    y: &[f64],
    mu0: Option<f64>,
    weights: Option<&[f64]>,
    sites: &[GeoPoint],
    opts: &InferenceOptions,
) -> Result<SignificanceMap, SvcmError> {
    if y.len() != sites.len() || weights.is_some_and(|w| w.len() != y.len()) {
        return Err(SvcmError::LengthMismatch(format!("{} values at {} sites", y.len(), sites.len())));
    }
    let mu = mu0.unwrap_or_else(|| weighted_mean(y, weights));
    if !mu.is_finite() {
        return Err(SvcmError::NonFinite(format!("threshold {mu}")));
    }
    let z: Vec<f64> = y.iter().map(|v| v - mu).collect();
    intercept_only(&z, sites, opts, "location")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOptions {
    pub inference: InferenceOptions,
    pub min_covariates: usize,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            inference: InferenceOptions::default(),
            min_covariates: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateVerdict {
    pub name: String,
    pub shape: ShapeVerdict,
    /// Some part of the surface is significantly nonzero.
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub covariates: Vec<String>,
    pub aic: f64,
    pub abs_residual_correlation: f64,
    pub moran_i: Option<f64>,
    pub moran_z: Option<f64>,
    pub edf: f64,
    pub converged: bool,
    pub retained: bool,
    pub verdicts: Vec<CovariateVerdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateConsistency {
    pub name: String,
    pub models: usize,
    pub constant: usize,
    pub nonconstant: usize,
    pub positive: usize,
    pub negative: usize,
    pub not_significant: usize,
    /// Hull of the feasible constant ranges over models calling it constant.
    pub constant_range: Option<(f64, f64)>,
    /// Same shape and same significance in every retained model.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub rows: Vec<ModelRow>,
    pub consistency: Vec<CovariateConsistency>,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn verdict(fit: &ModelFit, r: usize) -> CovariateVerdict {
    let s = &fit.surfaces[r];
    let band = s.band.as_ref().expect("bands attached");
    CovariateVerdict {
        name: s.name.clone(),
        shape: band.shape(),
        significant: band.any_significant(),
    }
}

/// Fit each candidate covariate subset (indices into `covariates`) and
/// compare AIC, residual-response correlation and residual Moran's I.
/// A model is retained when it is no worse than the median candidate on
/// all three. Candidates are fitted in parallel; bootstrap seeds are shared
/// so results do not depend on scheduling.
pub fn evaluate_models(
    candidates: &[Vec<usize>],
    y: &[f64],
    covariates: &[CovariateSurface],
    sites: &[GeoPoint],
    opts: &EvaluateOptions,
) -> Result<ModelComparison, SvcmError> {
    if candidates.is_empty() {
        return Err(SvcmError::BadCandidate("no candidate subsets".into()));
    }
    for c in candidates {
        if c.len() < opts.min_covariates {
            return Err(SvcmError::BadCandidate(format!(
                "subset {c:?} has fewer than {} covariates",
                opts.min_covariates
            )));
        }
        if let Some(&bad) = c.iter().find(|&&k| k >= covariates.len()) {
            return Err(SvcmError::BadCandidate(format!("covariate index {bad} out of range")));
        }
    }
    let inf = &opts.inference;
    let fits = candidates
        .par_iter()
        .map(|c| {
            let chosen: Vec<CovariateSurface> = c.iter().map(|&k| covariates[k].clone()).collect();
            let mut fit = fit_svcm(y, &chosen, sites, &inf.fit)?;
            attach_bands(&mut fit, inf.alpha, inf.n_boot, inf.seed)?;
            Ok(fit)
        })
        .collect::<Result<Vec<_>, SvcmError>>()?;

    let aic: Vec<f64> = fits.iter().map(|f| f.aic).collect();
    let corr: Vec<f64> = fits.iter().map(|f| f.residual_correlation).collect();
    let moran: Vec<f64> = fits.iter().map(|f| f.moran.map_or(0.0, |m| m.i.abs())).collect();
    let (ma, mc, mm) = (median(&aic), median(&corr), median(&moran));

    let rows: Vec<ModelRow> = fits
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let first = usize::from(inf.fit.intercept);
            ModelRow {
                covariates: f.covariates[first..].to_vec(),
                aic: f.aic,
                abs_residual_correlation: f.residual_correlation,
                moran_i: f.moran.map(|m| m.i),
                moran_z: f.moran.map(|m| m.z),
                edf: f.edf,
                converged: f.converged,
                retained: aic[k] <= ma && corr[k] <= mc && moran[k] <= mm,
                verdicts: (first..f.surfaces.len()).map(|r| verdict(f, r)).collect(),
            }
        })
        .collect();

    let mut by_name: BTreeMap<String, Vec<&CovariateVerdict>> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.retained) {
        for v in &row.verdicts {
            by_name.entry(v.name.clone()).or_default().push(v);
        }
    }
    let consistency = by_name
        .into_iter()
        .map(|(name, vs)| {
            let count = |p: &dyn Fn(&CovariateVerdict) -> bool| vs.iter().filter(|v| p(v)).count();
            let constant_range = vs
                .iter()
                .filter_map(|v| v.shape.constant_interval)
                .fold(None, |acc: Option<(f64, f64)>, (lo, hi)| match acc {
                    None => Some((lo, hi)),
                    Some((a, b)) => Some((a.min(lo), b.max(hi))),
                });
            let first = vs[0];
            CovariateConsistency {
                models: vs.len(),
                constant: count(&|v| v.shape.shape == Shape::Constant),
                nonconstant: count(&|v| v.shape.shape == Shape::Nonconstant),
                positive: count(&|v| v.shape.significance == Sign::Positive),
                negative: count(&|v| v.shape.significance == Sign::Negative),
                not_significant: count(&|v| !v.significant),
                constant_range,
                consistent: vs
                    .iter()
                    .all(|v| v.shape.shape == first.shape.shape && v.significant == first.significant
                        && v.shape.significance == first.shape.significance),
                name,
            }
        })
        .collect();
    Ok(ModelComparison { rows, consistency })
}
