use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::GeoPoint;
use crate::svcm::SvcmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    #[default]
    TensorBSpline,
    ThinPlateRadial,
}

impl std::str::FromStr for BasisKind {
    type Err = SvcmError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "tensor_b_spline" | "tensor" | "bspline" => Ok(Self::TensorBSpline),
            "thin_plate_radial" | "thin_plate" | "tps" => Ok(Self::ThinPlateRadial),
            other => Err(SvcmError::BadBasis(format!("unknown basis kind '{other}'"))),
        }
    }
}

/// Requested basis. `knots_per_dim` equally spaced knots span the bounding
/// box in each direction; a cubic tensor basis then has
/// `(knots_per_dim + 2)^2` functions, a radial basis `knots_per_dim^2 + 3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub knots_per_dim: usize,
    pub penalty_order: usize,
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self {
            kind: BasisKind::TensorBSpline,
            knots_per_dim: 8,
            penalty_order: 2,
        }
    }
}

impl BasisSpec {
    pub fn size(&self) -> usize {
        match self.kind {
            BasisKind::TensorBSpline => (self.knots_per_dim + 2).pow(2),
            BasisKind::ThinPlateRadial => self.knots_per_dim.pow(2) + 3,
        }
    }

    /// Basis with `k` functions per dimension for the tensor kind.
    pub fn tensor(per_dim: usize) -> Self {
        Self {
            knots_per_dim: per_dim.saturating_sub(2),
            ..Self::default()
        }
    }
}

/// Planar `(lon, lat)` box the knots cover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotLayout {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub knots_per_dim: usize,
}

impl KnotLayout {
    fn covering(sites: &[GeoPoint], knots_per_dim: usize) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for p in sites {
            x0 = x0.min(p.lon);
            x1 = x1.max(p.lon);
            y0 = y0.min(p.lat);
            y1 = y1.max(p.lat);
        }
        let widen = |lo: f64, hi: f64| {
            let w = hi - lo;
            if w > 0.0 {
                (lo - 1e-9 * w, hi + 1e-9 * w)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        let (x_min, x_max) = widen(x0, x1);
        let (y_min, y_max) = widen(y0, y1);
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
            knots_per_dim,
        }
    }

    fn unit(&self, p: &GeoPoint) -> (f64, f64) {
        (
            (p.lon - self.x_min) / (self.x_max - self.x_min),
            (p.lat - self.y_min) / (self.y_max - self.y_min),
        )
    }
}

/// A realized basis: evaluates `phi_k(s)` and carries the roughness penalty.
#[derive(Debug, Clone)]
pub struct Basis {
    pub spec: BasisSpec,
    pub layout: KnotLayout,
    /// Radial kind only: `Omega^{-1/2}` mapping raw radial columns.
    radial_transform: Option<DMatrix<f64>>,
    penalty: DMatrix<f64>,
}

/// Uniform cubic B-spline values at `t` in knot-interval units over
/// `intervals` intervals: the first of the four nonzero functions and
/// their values.
fn cubic_pieces(t: f64, intervals: usize) -> (usize, [f64; 4]) {
    let cell = (t.floor().max(0.0) as usize).min(intervals - 1);
    let u = t - cell as f64;
    let u2 = u * u;
    let u3 = u2 * u;
    let w = [
        (1.0 - u).powi(3) / 6.0,
        (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
        (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
        u3 / 6.0,
    ];
    (cell, w)
}

fn tps_kernel(r: f64) -> f64 {
    if r > 0.0 {
        r * r * r.ln()
    } else {
        0.0
    }
}

fn difference_matrix(k: usize, order: usize) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::identity(k, k);
    for _ in 0..order {
        let rows = d.nrows();
        if rows < 2 {
            break;
        }
        d = DMatrix::from_fn(rows - 1, k, |i, j| d[(i + 1, j)] - d[(i, j)]);
    }
    d
}

impl Basis {
    pub fn new(spec: BasisSpec, sites: &[GeoPoint]) -> Result<Self, SvcmError> {
        if sites.is_empty() {
            return Err(SvcmError::Empty);
        }
        if spec.size() < 3 || spec.knots_per_dim < 2 {
            return Err(SvcmError::BadBasis(format!("basis too small (knots_per_dim = {})", spec.knots_per_dim)));
        }
        let layout = KnotLayout::covering(sites, spec.knots_per_dim);
        match spec.kind {
            BasisKind::TensorBSpline => {
                let m = spec.knots_per_dim + 2;
                let d = difference_matrix(m, spec.penalty_order.min(m - 1));
                let dtd = d.transpose() * &d;
                let eye = DMatrix::<f64>::identity(m, m);
                let penalty = dtd.kronecker(&eye) + eye.kronecker(&dtd);
                Ok(Self {
                    spec,
                    layout,
                    radial_transform: None,
                    penalty,
                })
            }
            BasisKind::ThinPlateRadial => {
                let knots = Self::radial_knots(spec.knots_per_dim);
                let q = knots.len();
                let omega = DMatrix::from_fn(q, q, |a, b| {
                    tps_kernel(((knots[a].0 - knots[b].0).powi(2) + (knots[a].1 - knots[b].1).powi(2)).sqrt())
                });
                let svd = omega.svd(true, true);
                let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
                let top = svd.singular_values.max();
                let inv_sqrt = DVector::from_iterator(
                    q,
                    svd.singular_values.iter().map(|&s| if s > 1e-10 * top { 1.0 / s.sqrt() } else { 0.0 }),
                );
                let transform = vt.transpose() * DMatrix::from_diagonal(&inv_sqrt) * u.transpose();
                let k = q + 3;
                let penalty = DMatrix::from_fn(k, k, |a, b| if a == b && a >= 3 { 1.0 } else { 0.0 });
                Ok(Self {
                    spec,
                    layout,
                    radial_transform: Some(transform),
                    penalty,
                })
            }
        }
    }

    fn radial_knots(per_dim: usize) -> Vec<(f64, f64)> {
        let step = 1.0 / (per_dim as f64 + 1.0);
        (0..per_dim)
            .flat_map(|a| (0..per_dim).map(move |b| ((a as f64 + 1.0) * step, (b as f64 + 1.0) * step)))
            .collect()
    }

    pub fn size(&self) -> usize {
        self.spec.size()
    }

    pub fn penalty(&self) -> &DMatrix<f64> {
        &self.penalty
    }

    /// Nonzero `(k, phi_k(s))` pairs.
    pub fn eval(&self, p: &GeoPoint) -> Vec<(usize, f64)> {
        let (ux, uy) = self.layout.unit(p);
        match (&self.spec.kind, &self.radial_transform) {
            (BasisKind::TensorBSpline, _) => {
                let intervals = self.spec.knots_per_dim - 1;
                let m = self.spec.knots_per_dim + 2;
                let (cx, wx) = cubic_pieces(ux * intervals as f64, intervals);
                let (cy, wy) = cubic_pieces(uy * intervals as f64, intervals);
                let mut out = Vec::with_capacity(16);
                for (a, wa) in wx.iter().enumerate() {
                    for (b, wb) in wy.iter().enumerate() {
                        out.push(((cx + a) * m + cy + b, wa * wb));
                    }
                }
                out
            }
            (BasisKind::ThinPlateRadial, Some(t)) => {
                let knots = Self::radial_knots(self.spec.knots_per_dim);
                let raw = DVector::from_iterator(
                    knots.len(),
                    knots.iter().map(|k| tps_kernel(((ux - k.0).powi(2) + (uy - k.1).powi(2)).sqrt())),
                );
                let z = t.transpose() * raw;
                let mut out = vec![(0, 1.0), (1, ux), (2, uy)];
                out.extend(z.iter().enumerate().map(|(k, &v)| (k + 3, v)));
                out
            }
            (BasisKind::ThinPlateRadial, None) => unreachable!("radial basis built without transform"),
        }
    }

    /// Dense `n x K` basis matrix at `sites`.
    pub fn matrix(&self, sites: &[GeoPoint]) -> DMatrix<f64> {
        let mut phi = DMatrix::zeros(sites.len(), self.size());
        for (i, p) in sites.iter().enumerate() {
            for (k, v) in self.eval(p) {
                phi[(i, k)] += v;
            }
        }
        phi
    }

    /// `sum_k theta_k phi_k(s)`.
    pub fn evaluate(&self, theta: &[f64], p: &GeoPoint) -> f64 {
        self.eval(p).into_iter().map(|(k, v)| theta[k] * v).sum()
    }
}
