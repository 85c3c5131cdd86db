use nalgebra::{DMatrix, DVector};

use crate::svcm::SvcmError;

const GRID_STEP_DECADES: f64 = 0.25;
const GOLDEN_ITERATIONS: usize = 30;

/// One penalized-spline smoother `y -> B (B'B + rho I + lambda P)^{-1} B' y`
/// in eigen form. With `G = B'B + rho I = L L'` and
/// `L^{-1} P L^{-T} = U diag(ev) U'`, the smoother is
/// `Q diag(1 / (1 + lambda ev)) Q'` where `Q = B L^{-T} U`.
#[derive(Debug, Clone)]
pub(crate) struct TermSmoother {
    design: DMatrix<f64>,
    /// `B'B + rho I`.
    gram: DMatrix<f64>,
    penalty: DMatrix<f64>,
    q: DMatrix<f64>,
    /// `L^{-T} U`, mapping shrunken scores to basis coefficients.
    to_theta: DMatrix<f64>,
    eig: Vec<f64>,
    q_gram: DMatrix<f64>,
    q_norm2: Vec<f64>,
    pub(crate) ridge: f64,
    lambda_lo: f64,
    lambda_hi: f64,
}

impl TermSmoother {
    pub(crate) fn new(design: &DMatrix<f64>, penalty: &DMatrix<f64>, term: usize) -> Result<Self, SvcmError> {
        let k = design.ncols();
        let mut g = design.transpose() * design;
        let trace = g.trace();
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(SvcmError::RankDeficient { term });
        }
        let ridge = 1e-9 * trace / k as f64;
        for d in 0..k {
            g[(d, d)] += ridge;
        }
        let chol = g.clone().cholesky().ok_or(SvcmError::RankDeficient { term })?;
        let l = chol.l();
        // M = L^{-1} P L^{-T}
        let lp = l
            .solve_lower_triangular(penalty)
            .ok_or(SvcmError::RankDeficient { term })?;
        let m = l
            .solve_lower_triangular(&lp.transpose())
            .ok_or(SvcmError::RankDeficient { term })?;
        let m = (&m + m.transpose()) * 0.5;
        let eigen = m.symmetric_eigen();
        let to_theta = l
            .transpose()
            .solve_upper_triangular(&eigen.eigenvectors)
            .ok_or(SvcmError::RankDeficient { term })?;
        let q = design * &to_theta;
        let q_gram = q.transpose() * &q;
        let q_norm2 = (0..k).map(|c| q_gram[(c, c)]).collect();
        let eig: Vec<f64> = eigen.eigenvalues.iter().map(|&v| v.max(0.0)).collect();
        let top = eig.iter().cloned().fold(0.0, f64::max);
        let small = eig
            .iter()
            .cloned()
            .filter(|&v| v > 1e-10 * top)
            .fold(f64::INFINITY, f64::min);
        let (lambda_lo, lambda_hi) = if top > 0.0 {
            (1e-6 / top, 1e6 / small)
        } else {
            (1.0, 1.0)
        };
        Ok(Self {
            design: design.clone(),
            gram: g,
            penalty: penalty.clone(),
            q,
            to_theta,
            eig,
            q_gram,
            q_norm2,
            ridge,
            lambda_lo,
            lambda_hi,
        })
    }

    fn shrink(&self, lambda: f64) -> Vec<f64> {
        self.eig.iter().map(|&e| 1.0 / (1.0 + lambda * e)).collect()
    }

    /// Trace of the smoother matrix.
    pub(crate) fn edf(&self, lambda: f64) -> f64 {
        self.shrink(lambda).iter().zip(&self.q_norm2).map(|(s, q)| s * q).sum()
    }

    fn gcv_from_scores(&self, z: &DVector<f64>, yy: f64, n: f64, lambda: f64) -> f64 {
        let s = self.shrink(lambda);
        let w = DVector::from_iterator(z.len(), z.iter().zip(&s).map(|(z, s)| z * s));
        let cross: f64 = z.iter().zip(&s).map(|(z, s)| s * z * z).sum();
        // Below this the expanded form is rounding noise; flooring it makes
        // exact fits tie and the tie go to the smoothest of them.
        let rss = (yy - 2.0 * cross + w.dot(&(&self.q_gram * &w))).max(1e-12 * yy);
        let edf: f64 = s.iter().zip(&self.q_norm2).map(|(s, q)| s * q).sum();
        let room = n - edf;
        if room <= 1e-8 * n {
            return f64::INFINITY;
        }
        n * rss / (room * room)
    }

    /// GCV-optimal smoothing parameter for response `y`: coarse log grid,
    /// largest lambda on ties, then golden-section refinement.
    pub(crate) fn select_lambda(&self, y: &DVector<f64>) -> f64 {
        if self.lambda_lo == self.lambda_hi {
            return self.lambda_lo;
        }
        let z = self.q.tr_mul(y);
        let yy = y.dot(y);
        let n = y.len() as f64;
        let (lo, hi) = (self.lambda_lo.log10(), self.lambda_hi.log10());
        let steps = ((hi - lo) / GRID_STEP_DECADES).ceil() as usize;
        let score = |g: f64| self.gcv_from_scores(&z, yy, n, 10f64.powf(g));
        let mut best_g = hi;
        let mut best = score(hi);
        for s in (0..steps).rev() {
            let g = lo + s as f64 * GRID_STEP_DECADES;
            let v = score(g);
            if v < best * (1.0 - 1e-10) {
                best = v;
                best_g = g;
            }
        }
        if !best.is_finite() {
            return self.lambda_hi;
        }
        let (mut a, mut b) = ((best_g - GRID_STEP_DECADES).max(lo), (best_g + GRID_STEP_DECADES).min(hi));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let (mut fc, mut fd) = (score(c), score(d));
        for _ in 0..GOLDEN_ITERATIONS {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = score(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = score(d);
            }
        }
        let (g, v) = if fc < fd { (c, fc) } else { (d, fd) };
        if v < best {
            10f64.powf(g)
        } else {
            10f64.powf(best_g)
        }
    }

    /// Basis coefficients and fitted values for response `y`. Solved
    /// directly: the eigen form is accurate enough to rank smoothing
    /// parameters but loses digits in the penalty null space at large lambda.
    pub(crate) fn fit(&self, y: &DVector<f64>, lambda: f64) -> (DVector<f64>, DVector<f64>) {
        let a = &self.gram + &self.penalty * lambda;
        let rhs = self.design.tr_mul(y);
        let theta = match a.cholesky() {
            Some(c) => c.solve(&rhs),
            None => {
                let s = self.shrink(lambda);
                let mut z = self.q.tr_mul(y);
                z.iter_mut().zip(&s).for_each(|(z, s)| *z *= s);
                &self.to_theta * z
            }
        };
        let fitted = &self.design * &theta;
        (theta, fitted)
    }
}
