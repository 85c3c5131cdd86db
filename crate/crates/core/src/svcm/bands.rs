use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng::indexed_substream;
use crate::svcm::{ModelFit, SvcmError};

pub const MIN_BOOTSTRAP: usize = 100;

/// Replicates are centred on a pilot fit at `lambda / PILOT_UNDERSMOOTH`.
/// Undersmoothing the pilot keeps the smoothing bias of the estimate out of
/// the bootstrap truth, which otherwise leaves curved surfaces undercovered.
pub const PILOT_UNDERSMOOTH: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
    None,
}

impl Sign {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
            Sign::None => "none",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Constant,
    Nonconstant,
}

/// Simultaneous band for one coefficient surface at the fitted sites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub alpha: f64,
    pub n_boot: usize,
    /// Quantile of the sup-normalized bootstrap deviation.
    pub critical_value: f64,
    pub estimate: Vec<f64>,
    pub se: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Band edges closer to zero than this do not count as excluding it.
    pub zero_tolerance: f64,
}

impl Band {
    pub fn sign_at(&self, i: usize) -> Sign {
        if self.lower[i] > self.zero_tolerance {
            Sign::Positive
        } else if self.upper[i] < -self.zero_tolerance {
            Sign::Negative
        } else {
            Sign::None
        }
    }

    pub fn signs(&self) -> Vec<Sign> {
        (0..self.lower.len()).map(|i| self.sign_at(i)).collect()
    }

    pub fn contains(&self, truth: &[f64]) -> bool {
        truth
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(t, (lo, up))| *lo <= *t && *t <= *up)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeVerdict {
    pub shape: Shape,
    /// Range of constants lying inside the band everywhere.
    pub constant_interval: Option<(f64, f64)>,
    /// For constant shapes: whether that range excludes zero, and on which side.
    pub significance: Sign,
}

/// Constant iff some horizontal plane fits inside the band at every site.
pub fn classify_shape(lower: &[f64], upper: &[f64]) -> ShapeVerdict {
    let hi_floor = lower.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo_ceiling = upper.iter().cloned().fold(f64::INFINITY, f64::min);
    if hi_floor <= lo_ceiling {
        let significance = if hi_floor > 0.0 {
            Sign::Positive
        } else if lo_ceiling < 0.0 {
            Sign::Negative
        } else {
            Sign::None
        };
        ShapeVerdict {
            shape: Shape::Constant,
            constant_interval: Some((hi_floor, lo_ceiling)),
            significance,
        }
    } else {
        ShapeVerdict {
            shape: Shape::Nonconstant,
            constant_interval: None,
            significance: Sign::None,
        }
    }
}

impl Band {
    pub fn shape(&self) -> ShapeVerdict {
        let mut v = classify_shape(&self.lower, &self.upper);
        if let Some((lo, hi)) = v.constant_interval {
            if lo <= self.zero_tolerance && hi >= -self.zero_tolerance {
                v.significance = Sign::None;
            }
        }
        v
    }

    /// Whether any part of the surface is flagged: a constant whose range
    /// excludes zero, or a site where the band does.
    pub fn any_significant(&self) -> bool {
        self.shape().significance != Sign::None || self.signs().iter().any(|s| *s != Sign::None)
    }
}

fn check(alpha: f64, n_boot: usize) -> Result<(), SvcmError> {
    if n_boot < MIN_BOOTSTRAP {
        return Err(SvcmError::TooFewBootstrap { n_boot, min: MIN_BOOTSTRAP });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SvcmError::BadAlpha(alpha));
    }
    Ok(())
}

/// Wild-bootstrap simultaneous bands for every surface of `fit`.
///
/// Each replicate adds Rademacher-signed residuals, inflated by
/// `sqrt(n / (n - edf))`, to the fitted values of an undersmoothed pilot
/// (see [`PILOT_UNDERSMOOTH`]) and refits with fresh GCV selection. The band
/// is `estimate +- c * se`, where `se` is the bootstrap standard deviation
/// and `c` the `(1 - alpha)` quantile of the largest standardized deviation
/// from the pilot over sites.
pub fn simultaneous_bands(fit: &ModelFit, alpha: f64, n_boot: usize, seed: u64) -> Result<Vec<Band>, SvcmError> {
    simultaneous_bands_with(fit, alpha, n_boot, seed, Refit::default())
}

/// How bootstrap replicates are refitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refit {
    /// Backfit each replicate with GCV, so smoothing-parameter selection
    /// contributes to the spread.
    #[default]
    Reselect,
    /// One linear solve per replicate at the fitted smoothing parameters.
    FixedSmoothing,
}

pub fn simultaneous_bands_with(
    fit: &ModelFit,
    alpha: f64,
    n_boot: usize,
    seed: u64,
    refit: Refit,
) -> Result<Vec<Band>, SvcmError> {
    check(alpha, n_boot)?;
    let n = fit.y.len();
    let nf = n as f64;
    let inflation = (nf / (nf - fit.edf).max(1.0)).sqrt();
    let (pilot, fitted) = fit.pilot(PILOT_UNDERSMOOTH)?;
    let draws = (0..n_boot)
        .into_par_iter()
        .map(|b| {
            let mut rng = indexed_substream(seed, "svcm/bootstrap", b as u64);
            let mut y = fitted.clone();
            for (yi, e) in y.iter_mut().zip(&fit.residuals) {
                let v = if rng.random::<bool>() { 1.0 } else { -1.0 };
                *yi += inflation * e * v;
            }
            match refit {
                Refit::Reselect => fit.refit_surfaces_reselect(&y),
                Refit::FixedSmoothing => Ok(fit.refit_surfaces(&y)),
            }
        })
        .collect::<Result<Vec<Vec<DVector<f64>>>, SvcmError>>()?;

    let y_scale = fit.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let bands = fit
        .surfaces
        .iter()
        .enumerate()
        .map(|(r, surface)| {
            let est = &surface.estimate;
            let se: Vec<f64> = (0..n)
                .map(|i| {
                    let mean = draws.iter().map(|d| d[r][i]).sum::<f64>() / n_boot as f64;
                    let var = draws.iter().map(|d| (d[r][i] - mean).powi(2)).sum::<f64>() / (n_boot - 1) as f64;
                    var.sqrt()
                })
                .collect();
            let est_scale = est.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            let floor = 1e-12 * (1.0 + est_scale);
            let mut sup: Vec<f64> = draws
                .iter()
                .map(|d| {
                    (0..n)
                        .filter(|&i| se[i] > floor)
                        .map(|i| (d[r][i] - pilot[r][i]).abs() / se[i])
                        .fold(0.0, f64::max)
                })
                .collect();
            sup.sort_by(|a, b| a.total_cmp(b));
            let rank = (((1.0 - alpha) * (n_boot + 1) as f64).ceil() as usize).clamp(1, n_boot);
            let c = sup[rank - 1];
            let lower = est.iter().zip(&se).map(|(e, s)| e - c * s).collect();
            let upper = est.iter().zip(&se).map(|(e, s)| e + c * s).collect();
            let column_scale = fit.columns[r].iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            Band {
                alpha,
                n_boot,
                critical_value: c,
                estimate: est.clone(),
                se,
                lower,
                upper,
                zero_tolerance: 1e-10 * (1.0 + y_scale / column_scale),
            }
        })
        .collect();
    Ok(bands)
}

/// Band for surface `r` alone.
pub fn simultaneous_band(fit: &ModelFit, r: usize, alpha: f64, n_boot: usize, seed: u64) -> Result<Band, SvcmError> {
    if r >= fit.surfaces.len() {
        return Err(SvcmError::NoSuchTerm(r));
    }
    Ok(simultaneous_bands(fit, alpha, n_boot, seed)?.swap_remove(r))
}

/// Attach bands to every surface of `fit`.
pub fn attach_bands(fit: &mut ModelFit, alpha: f64, n_boot: usize, seed: u64) -> Result<(), SvcmError> {
    let bands = simultaneous_bands(fit, alpha, n_boot, seed)?;
    for (s, b) in fit.surfaces.iter_mut().zip(bands) {
        s.band = Some(b);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wide_band_is_constant_not_significant() {
        let v = classify_shape(&[-1.0; 5], &[1.0; 5]);
        assert_eq!(v.shape, Shape::Constant);
        assert_eq!(v.significance, Sign::None);
        assert_eq!(v.constant_interval, Some((-1.0, 1.0)));
    }

    #[test]
    fn positive_band_is_constant_significant() {
        let v = classify_shape(&[0.2; 5], &[0.5; 5]);
        assert_eq!(v.shape, Shape::Constant);
        assert_eq!(v.significance, Sign::Positive);
        let v = classify_shape(&[-0.5; 3], &[-0.2; 3]);
        assert_eq!(v.significance, Sign::Negative);
    }

    #[test]
    fn crossing_band_is_nonconstant() {
        let lower = [0.8, -0.5, 0.0];
        let upper = [1.2, 0.2, 0.6];
        let v = classify_shape(&lower, &upper);
        assert_eq!(v.shape, Shape::Nonconstant);
        assert!(v.constant_interval.is_none());
    }

    proptest! {
        #[test]
        fn shape_invariant_to_shift(
            mid in proptest::collection::vec(-2.0f64..2.0, 1..20),
            half in proptest::collection::vec(0.0f64..1.5, 20),
            shift in -10.0f64..10.0,
        ) {
            let lower: Vec<f64> = mid.iter().zip(&half).map(|(m, h)| m - h).collect();
            let upper: Vec<f64> = mid.iter().zip(&half).map(|(m, h)| m + h).collect();
            let a = classify_shape(&lower, &upper);
            let ls: Vec<f64> = lower.iter().map(|v| v + shift).collect();
            let us: Vec<f64> = upper.iter().map(|v| v + shift).collect();
            let b = classify_shape(&ls, &us);
            prop_assert_eq!(a.shape, b.shape);
        }
    }
}
