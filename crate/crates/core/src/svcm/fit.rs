use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::model::GeoPoint;
use crate::spatial::{morans_i, CovariateSurface, MoranResult, SpatialWeightMatrix};
use crate::svcm::basis::{Basis, BasisSpec, KnotLayout};
use crate::svcm::smoother::TermSmoother;
use crate::svcm::{Band, SvcmError, INTERCEPT};

const MAX_JUMPS: usize = 20;
const WARM_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcmOptions {
    pub basis: BasisSpec,
    pub intercept: bool,
    /// Center and scale covariates to unit sd. Constant covariates are left
    /// as given.
    pub standardize: bool,
    pub max_cycles: usize,
    pub tolerance: f64,
    /// Use this smoothing parameter for every term instead of GCV.
    pub fixed_lambda: Option<f64>,
    /// Shuffle the backfitting order with this seed (stability check).
    pub order_seed: Option<u64>,
    pub moran_k: usize,
    pub response_name: String,
}

impl Default for SvcmOptions {
    fn default() -> Self {
        Self {
            basis: BasisSpec::default(),
            intercept: true,
            standardize: true,
            max_cycles: 200,
            tolerance: 1e-6,
            fixed_lambda: None,
            order_seed: None,
            moran_k: 8,
            response_name: "y".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CoefficientSurface {
    pub name: String,
    /// Basis coefficients.
    pub theta: Vec<f64>,
    pub lambda: f64,
    pub edf: f64,
    /// Centering and scale applied to the covariate before fitting.
    pub center: f64,
    pub scale: f64,
    /// `beta(s_i)` at the fitted sites.
    pub estimate: Vec<f64>,
    pub band: Option<Band>,
}

/// Per-term smoothers and the stacked design, kept for refits.
#[derive(Debug)]
pub(crate) struct Engine {
    pub basis: Basis,
    pub phi: DMatrix<f64>,
    designs: Vec<DMatrix<f64>>,
    smoothers: Vec<TermSmoother>,
    /// All term designs side by side, `n x (R K)`.
    design: DMatrix<f64>,
    gram: DMatrix<f64>,
    order: Vec<usize>,
    fixed_lambda: Option<f64>,
    tolerance: f64,
    max_cycles: usize,
    /// Joint normal matrix at the fitted smoothing parameters, factored.
    joint: Option<Cholesky<f64, Dyn>>,
}

#[derive(Debug, Clone)]
pub(crate) struct Backfit {
    pub parts: Vec<DVector<f64>>,
    pub thetas: Vec<DVector<f64>>,
    pub lambdas: Vec<f64>,
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl Engine {
    fn k(&self) -> usize {
        self.phi.ncols()
    }

    fn joint_at(&self, lambdas: &[f64]) -> Result<Cholesky<f64, Dyn>, SvcmError> {
        let k = self.k();
        let mut normal = self.gram.clone();
        for (r, sm) in self.smoothers.iter().enumerate() {
            let mut view = normal.view_mut((r * k, r * k), (k, k));
            view += self.basis.penalty() * lambdas[r];
            for d in 0..k {
                view[(d, d)] += sm.ridge;
            }
        }
        normal
            .cholesky()
            .ok_or(SvcmError::RankDeficient { term: self.smoothers.len() })
    }

    fn solve_joint(&self, chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let k = self.k();
        let theta = chol.solve(&self.design.tr_mul(y));
        let thetas: Vec<DVector<f64>> = (0..self.designs.len()).map(|r| theta.rows(r * k, k).into_owned()).collect();
        let parts = thetas.iter().zip(&self.designs).map(|(t, d)| d * t).collect();
        (thetas, parts)
    }

    /// Cyclic backfitting with per-term GCV. The joint penalized normal
    /// equations at given smoothing parameters have the backfitting fixed
    /// point as their solution, so once the parameters settle between
    /// cycles a direct solve jumps there; a converged run lands on it.
    pub(crate) fn backfit(&self, y: &DVector<f64>, start: Option<&Backfit>) -> Result<Backfit, SvcmError> {
        let n = y.len();
        let r_terms = self.designs.len();
        let (mut parts, mut thetas, mut lambdas) = match start {
            Some(s) => (s.parts.clone(), s.thetas.clone(), s.lambdas.clone()),
            None => (
                vec![DVector::zeros(n); r_terms],
                vec![DVector::zeros(self.k()); r_terms],
                vec![self.fixed_lambda.unwrap_or(1.0); r_terms],
            ),
        };
        let mut previous: Option<Vec<f64>> = start.map(|s| s.lambdas.clone());
        // Warm starts (bootstrap replicates) stop at a looser tolerance.
        let tolerance = if start.is_some() { self.tolerance.max(WARM_TOLERANCE) } else { self.tolerance };
        let mut jumps = 0;
        let mut trace = Vec::new();
        let mut converged = false;
        for _cycle in 0..self.max_cycles {
            let mut moved = Vec::with_capacity(r_terms);
            for &r in &self.order {
                let partial = partial_residual(y, &parts, r);
                let lambda = match self.fixed_lambda {
                    Some(l) => l,
                    None => self.smoothers[r].select_lambda(&partial),
                };
                let (theta, f) = self.smoothers[r].fit(&partial, lambda);
                moved.push((&f - &parts[r]).norm());
                parts[r] = f;
                thetas[r] = theta;
                lambdas[r] = lambda;
            }
            let scale = parts.iter().fold(DVector::zeros(n), |a, f| a + f).norm();
            let worst = moved.into_iter().fold(0.0f64, |w, m| {
                let rel = if scale > 0.0 {
                    m / scale
                } else if m > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                };
                w.max(rel)
            });
            trace.push(worst);
            if !worst.is_finite() {
                return Err(SvcmError::NonFinite("backfitting diverged".into()));
            }
            // A lone term is its own fixed point after one pass.
            if worst < tolerance || r_terms == 1 {
                converged = true;
                break;
            }
            let settled = previous
                .as_ref()
                .is_some_and(|p| p.iter().zip(&lambdas).all(|(a, b)| (a / b).ln().abs() < 0.5));
            if settled && jumps < MAX_JUMPS {
                jumps += 1;
                (thetas, parts) = self.solve_joint(&self.joint_at(&lambdas)?, y);
            }
            previous = Some(lambdas.clone());
        }
        if converged && r_terms > 1 {
            (thetas, parts) = self.solve_joint(&self.joint_at(&lambdas)?, y);
        }
        Ok(Backfit {
            parts,
            thetas,
            lambdas,
            trace,
            converged,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelFit {
    pub response: String,
    pub covariates: Vec<String>,
    pub surfaces: Vec<CoefficientSurface>,
    pub sites: Vec<GeoPoint>,
    /// Input row of each fitted site.
    pub kept: Vec<usize>,
    pub dropped: usize,
    pub y: Vec<f64>,
    /// Covariate columns as fitted (after standardization), one per surface.
    pub columns: Vec<Vec<f64>>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub edf: f64,
    pub aic: f64,
    pub residual_correlation: f64,
    pub moran: Option<MoranResult>,
    pub trace: Vec<f64>,
    pub converged: bool,
    pub cycles: usize,
    pub basis: BasisSpec,
    pub layout: KnotLayout,
    #[serde(skip)]
    pub(crate) engine: Option<Arc<Engine>>,
}

impl ModelFit {
    pub fn surface(&self, name: &str) -> Option<&CoefficientSurface> {
        self.surfaces.iter().find(|s| s.name == name)
    }

    /// `beta_r(s)` at an arbitrary location.
    pub fn evaluate(&self, r: usize, at: &GeoPoint) -> f64 {
        let engine = self.engine.as_ref().expect("fit carries its basis");
        engine.basis.evaluate(&self.surfaces[r].theta, at)
    }

    /// `Phi theta_r` at the fitted sites via the dense basis matrix.
    pub fn design_product(&self, r: usize) -> Vec<f64> {
        let engine = self.engine.as_ref().expect("fit carries its basis");
        let theta = DVector::from_column_slice(&self.surfaces[r].theta);
        (&engine.phi * theta).iter().copied().collect()
    }

    /// Largest relative change in any term's fitted values from one more
    /// backfitting cycle at the chosen smoothing parameters.
    pub fn extra_cycle_change(&self) -> f64 {
        let engine = self.engine.as_ref().expect("fit carries its basis");
        let n = self.y.len();
        let mut parts: Vec<DVector<f64>> = self
            .surfaces
            .iter()
            .zip(&self.columns)
            .map(|(s, x)| DVector::from_iterator(n, s.estimate.iter().zip(x).map(|(b, x)| b * x)))
            .collect();
        let y = DVector::from_column_slice(&self.y);
        let norm = DVector::from_column_slice(&self.fitted).norm().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for &r in &engine.order {
            let partial = partial_residual(&y, &parts, r);
            let (_, f) = engine.smoothers[r].fit(&partial, self.surfaces[r].lambda);
            worst = worst.max((&f - &parts[r]).norm() / norm);
            parts[r] = f;
        }
        worst
    }

    /// Surfaces and fitted values from a joint solve with every smoothing
    /// parameter divided by `factor`.
    pub(crate) fn pilot(&self, factor: f64) -> Result<(Vec<DVector<f64>>, DVector<f64>), SvcmError> {
        let engine = self.engine.as_ref().expect("fit carries its basis");
        let lambdas: Vec<f64> = self.surfaces.iter().map(|s| s.lambda / factor).collect();
        let y = DVector::from_column_slice(&self.y);
        let (thetas, parts) = engine.solve_joint(&engine.joint_at(&lambdas)?, &y);
        let fitted = parts.iter().fold(DVector::zeros(self.y.len()), |a, f| a + f);
        Ok((self.surfaces_from(&thetas), fitted))
    }

    fn surfaces_from(&self, thetas: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let engine = self.engine.as_ref().expect("fit carries its basis");
        thetas.iter().map(|t| &engine.phi * t).collect()
    }

    /// Surfaces at the sites for a new response, holding the smoothing
    /// parameters at their fitted values.
    pub(crate) fn refit_surfaces(&self, y: &DVector<f64>) -> Vec<DVector<f64>> {
        let engine = self.engine.as_ref().expect("fit carries its basis");
        let chol = engine.joint.as_ref().expect("joint system factored");
        let (thetas, _) = engine.solve_joint(chol, y);
        self.surfaces_from(&thetas)
    }

    /// Surfaces at the sites for a new response with smoothing parameters
    /// chosen afresh, backfitting from the fitted state.
    pub(crate) fn refit_surfaces_reselect(&self, y: &DVector<f64>) -> Result<Vec<DVector<f64>>, SvcmError> {
        let engine = self.engine.as_ref().expect("fit carries its basis");
        let n = self.y.len();
        let start = Backfit {
            parts: self
                .surfaces
                .iter()
                .zip(&self.columns)
                .map(|(s, x)| DVector::from_iterator(n, s.estimate.iter().zip(x).map(|(b, x)| b * x)))
                .collect(),
            thetas: self.surfaces.iter().map(|s| DVector::from_column_slice(&s.theta)).collect(),
            lambdas: self.surfaces.iter().map(|s| s.lambda).collect(),
            trace: Vec::new(),
            converged: true,
        };
        let state = engine.backfit(y, Some(&start))?;
        Ok(self.surfaces_from(&state.thetas))
    }
}

fn term_design(phi: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    let mut d = phi.clone();
    for (mut row, &v) in d.row_iter_mut().zip(x) {
        row *= v;
    }
    d
}

fn partial_residual(y: &DVector<f64>, parts: &[DVector<f64>], skip: usize) -> DVector<f64> {
    let mut r = y.clone();
    for (q, f) in parts.iter().enumerate() {
        if q != skip {
            r -= f;
        }
    }
    r
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa > 0.0 && sbb > 0.0 {
        sab / (saa * sbb).sqrt()
    } else {
        0.0
    }
}

/// Space-varying coefficient fit `y_i = sum_r beta_r(s_i) x_ri + e_i` by
/// cyclic backfitting of penalized tensor splines, with per-term GCV.
/// Rows with a non-finite response or covariate are dropped.
pub fn fit_svcm(
    y: &[f64],
    covariates: &[CovariateSurface],
    sites: &[GeoPoint],
    opts: &SvcmOptions,
) -> Result<ModelFit, SvcmError> {
    let n_all = y.len();
    if sites.len() != n_all || covariates.iter().any(|c| c.values.len() != n_all) {
        return Err(SvcmError::LengthMismatch(format!(
            "{n_all} responses, {} sites, covariate lengths {:?}",
            sites.len(),
            covariates.iter().map(|c| c.values.len()).collect::<Vec<_>>()
        )));
    }
    if covariates.is_empty() && !opts.intercept {
        return Err(SvcmError::NoTerms);
    }
    let kept: Vec<usize> = (0..n_all)
        .filter(|&i| y[i].is_finite() && sites[i].lat.is_finite() && sites[i].lon.is_finite() && covariates.iter().all(|c| c.values[i].is_finite()))
        .collect();
    let n = kept.len();
    if n < 3 {
        return Err(SvcmError::TooFewSites { need: 3, got: n });
    }
    let sites_k: Vec<GeoPoint> = kept.iter().map(|&i| sites[i]).collect();
    let yk: Vec<f64> = kept.iter().map(|&i| y[i]).collect();

    let mut names = Vec::new();
    let mut columns = Vec::new();
    let mut centering = Vec::new();
    if opts.intercept {
        names.push(INTERCEPT.to_string());
        columns.push(vec![1.0; n]);
        centering.push((0.0, 1.0));
    }
    for c in covariates {
        let vals: Vec<f64> = kept.iter().map(|&i| c.values[i]).collect();
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        let (center, scale) = if opts.standardize && sd > 1e-12 * (1.0 + mean.abs()) {
            (mean, sd)
        } else {
            (0.0, 1.0)
        };
        names.push(c.name.clone());
        columns.push(vals.iter().map(|v| (v - center) / scale).collect());
        centering.push((center, scale));
    }
    let r_terms = columns.len();

    let basis = Basis::new(opts.basis, &sites_k)?;
    let phi = basis.matrix(&sites_k);
    let designs: Vec<DMatrix<f64>> = columns.iter().map(|x| term_design(&phi, x)).collect();
    let smoothers = designs
        .iter()
        .enumerate()
        .map(|(r, d)| TermSmoother::new(d, basis.penalty(), r))
        .collect::<Result<Vec<_>, _>>()?;

    let mut order: Vec<usize> = (0..r_terms).collect();
    if let Some(seed) = opts.order_seed {
        order.shuffle(&mut crate::rng::substream(seed, "svcm/order"));
    }

    let k = basis.size();
    let mut design = DMatrix::zeros(n, k * r_terms);
    for (r, d) in designs.iter().enumerate() {
        design.view_mut((0, r * k), (n, k)).copy_from(d);
    }
    let gram = design.tr_mul(&design);
    let mut engine = Engine {
        basis,
        phi,
        designs,
        smoothers,
        design,
        gram,
        order,
        fixed_lambda: opts.fixed_lambda,
        tolerance: opts.tolerance,
        max_cycles: opts.max_cycles.max(1),
        joint: None,
    };
    let yv = DVector::from_column_slice(&yk);
    let state = engine.backfit(&yv, None)?;
    engine.joint = Some(engine.joint_at(&state.lambdas)?);
    let Backfit {
        parts,
        thetas,
        lambdas,
        trace,
        converged,
    } = state;
    let smoothers = &engine.smoothers;
    let phi = &engine.phi;

    let fitted: DVector<f64> = parts.iter().fold(DVector::zeros(n), |a, f| a + f);
    let residuals: Vec<f64> = yk.iter().zip(fitted.iter()).map(|(y, f)| y - f).collect();
    let edfs: Vec<f64> = smoothers.iter().zip(&lambdas).map(|(s, &l)| s.edf(l)).collect();
    let edf: f64 = edfs.iter().sum();
    let rss: f64 = residuals.iter().map(|e| e * e).sum();
    let aic = n as f64 * (rss / n as f64).max(1e-300).ln() + 2.0 * edf;
    let residual_correlation = correlation(&residuals, &yk).abs();
    let moran = SpatialWeightMatrix::knn(&sites_k, opts.moran_k.min(n - 1))
        .ok()
        .and_then(|w| morans_i(&residuals, &w.row_standardize()).ok());

    let surfaces = (0..r_terms)
        .map(|r| {
            let estimate: Vec<f64> = (phi * &thetas[r]).iter().copied().collect();
            CoefficientSurface {
                name: names[r].clone(),
                theta: thetas[r].iter().copied().collect(),
                lambda: lambdas[r],
                edf: edfs[r],
                center: centering[r].0,
                scale: centering[r].1,
                estimate,
                band: None,
            }
        })
        .collect();

    Ok(ModelFit {
        response: opts.response_name.clone(),
        covariates: names,
        surfaces,
        basis: opts.basis,
        sites: sites_k,
        dropped: n_all - n,
        kept,
        y: yk,
        columns,
        fitted: fitted.iter().copied().collect(),
        residuals,
        edf,
        aic,
        residual_correlation,
        moran,
        cycles: trace.len(),
        trace,
        converged,
        layout: engine.basis.layout,
        engine: Some(Arc::new(engine)),
    })
}
