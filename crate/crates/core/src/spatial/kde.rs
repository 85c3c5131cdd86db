use crate::model::haversine_miles as haversine;
use crate::model::GeoPoint;
use crate::spatial::SpatialError;
use crate::Scalar;

/// Gaussian kernel density over weighted `(lat, lon)` points, distances in
/// great-circle miles. Densities are in weight per square mile.
#[derive(Debug, Clone)]
pub struct Kde<T> {
    points: Vec<(T, T)>,
    weights: Vec<T>,
    bandwidth: T,
}

impl<T: Scalar> Kde<T> {
    pub fn new(points: Vec<(T, T)>, weights: Vec<T>, bandwidth: T) -> Result<Self, SpatialError> {
        if points.is_empty() {
            return Err(SpatialError::EmptyPoints);
        }
        if points.len() != weights.len() {
            return Err(SpatialError::LengthMismatch(format!(
                "{} points, {} weights",
                points.len(),
                weights.len()
            )));
        }
        if !(bandwidth > T::zero()) || !bandwidth.is_finite() {
            return Err(SpatialError::BadBandwidth(bandwidth.to_f64_lossy()));
        }
        Ok(Self {
            points,
            weights,
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> T {
        self.bandwidth
    }

    pub fn density_at(&self, lat: T, lon: T) -> T {
        let h2 = self.bandwidth * self.bandwidth;
        let norm = T::one() / (T::lit(2.0 * std::f64::consts::PI) * h2);
        let half = T::lit(0.5);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&(plat, plon), &w)| {
                let d = haversine(lat, lon, plat, plon);
                w * (-(d * d) / h2 * half).exp()
            })
            .sum::<T>()
            * norm
    }
}

/// Silverman-style bandwidth in miles for a 2-d Gaussian kernel:
/// `sigma * n_eff^(-1/6)`, with `sigma` the pooled weighted coordinate spread
/// after a local equirectangular projection.
pub fn silverman_bandwidth<T: Scalar>(points: &[(T, T)], weights: &[T]) -> Result<T, SpatialError> {
    if points.is_empty() {
        return Err(SpatialError::EmptyPoints);
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(SpatialError::BadWeights("weights must have a positive sum".into()));
    }
    let mile_per_deg = T::lit(crate::model::EARTH_RADIUS_MILES.to_radians());
    let lat0 = points.iter().zip(weights).map(|(p, &w)| p.0 * w).sum::<T>() / total;
    let coslat = lat0.to_radians().cos();
    let proj: Vec<(T, T)> = points
        .iter()
        .map(|&(la, lo)| (lo * coslat * mile_per_deg, la * mile_per_deg))
        .collect();
    let mx = proj.iter().zip(weights).map(|(p, &w)| p.0 * w).sum::<T>() / total;
    let my = proj.iter().zip(weights).map(|(p, &w)| p.1 * w).sum::<T>() / total;
    let var = proj
        .iter()
        .zip(weights)
        .map(|(p, &w)| w * ((p.0 - mx).powi(2) + (p.1 - my).powi(2)))
        .sum::<T>()
        / total
        * T::lit(0.5);
    let sum_sq: T = weights.iter().map(|&w| w * w).sum();
    let n_eff = total * total / sum_sq;
    let h = var.sqrt() * n_eff.powf(T::lit(-1.0 / 6.0));
    if h > T::zero() {
        Ok(h)
    } else {
        // All points coincide; fall back to one mile.
        Ok(T::one())
    }
}

/// Density at each evaluation point (children per square mile).
pub fn kde_density<T: Scalar>(
    points: &[(T, T)],
    weights: &[T],
    eval_at: &[(T, T)],
    bandwidth: T,
) -> Result<Vec<T>, SpatialError> {
    let kde = Kde::new(points.to_vec(), weights.to_vec(), bandwidth)?;
    Ok(eval_at.iter().map(|&(la, lo)| kde.density_at(la, lo)).collect())
}

/// [`kde_density`] over geographic points.
pub fn kde_density_geo(
    points: &[GeoPoint],
    weights: &[f64],
    eval_at: &[GeoPoint],
    bandwidth: f64,
) -> Result<Vec<f64>, SpatialError> {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.lat, p.lon)).collect();
    let ev: Vec<(f64, f64)> = eval_at.iter().map(|p| (p.lat, p.lon)).collect();
    kde_density(&pts, weights, &ev, bandwidth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const DEG: f64 = 69.09404;

    #[test]
    fn gaussian_ratio_at_three_bandwidths() {
        let h = 2.0;
        let kde = Kde::new(vec![(0.0, 0.0)], vec![1.0], h).unwrap();
        let at0 = kde.density_at(0.0, 0.0);
        let at3 = kde.density_at(0.0, 3.0 * h / DEG);
        assert!((at3 / at0 - (-4.5f64).exp()).abs() < 1e-6);
        assert!((at0 - 1.0 / (2.0 * std::f64::consts::PI * 4.0)).abs() < 1e-12);
    }

    #[test]
    fn symmetric_pair_at_midpoint() {
        let kde_a = Kde::<f64>::new(vec![(0.0, -0.05)], vec![1.0], 3.0).unwrap();
        let kde_b = Kde::new(vec![(0.0, 0.05)], vec![1.0], 3.0).unwrap();
        assert!((kde_a.density_at(0.0, 0.0) - kde_b.density_at(0.0, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn empty_points_rejected() {
        assert_eq!(kde_density::<f64>(&[], &[], &[(0.0, 0.0)], 1.0), Err(SpatialError::EmptyPoints));
        assert!(matches!(
            kde_density(&[(0.0, 0.0)], &[1.0], &[(0.0, 0.0)], 0.0),
            Err(SpatialError::BadBandwidth(_))
        ));
    }

    #[test]
    fn silverman_positive() {
        let pts = [(33.0, -84.0), (33.1, -84.2), (33.3, -84.1)];
        let h = silverman_bandwidth(&pts, &[1.0, 2.0, 1.0]).unwrap();
        assert!(h > 0.0 && h < 20.0);
    }

    proptest! {
        #[test]
        fn linear_in_point_sets(
            a in proptest::collection::vec((-0.3f64..0.3, -0.3f64..0.3, 0.1f64..5.0), 1..6),
            b in proptest::collection::vec((-0.3f64..0.3, -0.3f64..0.3, 0.1f64..5.0), 1..6),
            at in (-0.3f64..0.3, -0.3f64..0.3),
        ) {
            let split = |v: &[(f64, f64, f64)]| -> (Vec<(f64, f64)>, Vec<f64>) {
                (v.iter().map(|p| (p.0, p.1)).collect(), v.iter().map(|p| p.2).collect())
            };
            let (pa, wa) = split(&a);
            let (pb, wb) = split(&b);
            let mut pu = pa.clone(); pu.extend(&pb);
            let mut wu = wa.clone(); wu.extend(&wb);
            let da = kde_density(&pa, &wa, &[at], 4.0).unwrap()[0];
            let db = kde_density(&pb, &wb, &[at], 4.0).unwrap()[0];
            let du = kde_density(&pu, &wu, &[at], 4.0).unwrap()[0];
            prop_assert!((du - (da + db)).abs() <= 1e-12 * (1.0 + du.abs()));
        }
    }
}
