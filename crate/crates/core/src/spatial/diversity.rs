use crate::model::GeoPoint;
use crate::spatial::{CovariateSurface, SpatialError};
use crate::Scalar;

/// Shannon entropy of group counts, natural log, normalized by `ln(groups)`
/// so that an even split scores 1. Empty or single-group input scores 0.
pub fn normalized_entropy<T: Scalar>(counts: &[T]) -> T {
    let total: T = counts.iter().copied().sum();
    if counts.len() < 2 || !(total > T::zero()) {
        return T::zero();
    }
    let h = counts
        .iter()
        .filter(|&&c| c > T::zero())
        .map(|&c| {
            let p = c / total;
            -p * p.ln()
        })
        .sum::<T>();
    h / T::from_usize(counts.len()).unwrap().ln()
}

/// Two-group (nonwhite, white) head counts from a population and a nonwhite
/// fraction.
pub fn two_group_composition(population: f64, nonwhite_fraction: f64) -> Vec<f64> {
    let f = nonwhite_fraction.clamp(0.0, 1.0);
    vec![population * f, population * (1.0 - f)]
}

/// Ratio of local to regional diversity: entropy of group composition pooled
/// over tracts within `local_radius` versus within `regional_radius` of each
/// tract. Defined as 1 when both pooled entropies vanish.
pub fn diversity_ratio(
    locations: &[GeoPoint],
    compositions: &[Vec<f64>],
    local_radius: f64,
    regional_radius: f64,
) -> Result<CovariateSurface, SpatialError> {
    if !(regional_radius > local_radius && local_radius > 0.0) {
        return Err(SpatialError::BadRadii {
            local: local_radius,
            regional: regional_radius,
        });
    }
    if locations.len() != compositions.len() {
        return Err(SpatialError::LengthMismatch(format!(
            "{} locations, {} compositions",
            locations.len(),
            compositions.len()
        )));
    }
    let groups = compositions.first().map_or(0, |c| c.len());
    if compositions.iter().any(|c| c.len() != groups) {
        return Err(SpatialError::LengthMismatch("compositions differ in group count".into()));
    }
    let values = locations
        .iter()
        .map(|here| {
            let mut local = vec![0.0; groups];
            let mut regional = vec![0.0; groups];
            for (there, comp) in locations.iter().zip(compositions) {
                let d = here.miles_to(there);
                if d <= regional_radius {
                    regional.iter_mut().zip(comp).for_each(|(a, b)| *a += b);
                    if d <= local_radius {
                        local.iter_mut().zip(comp).for_each(|(a, b)| *a += b);
                    }
                }
            }
            let hl = normalized_entropy(&local);
            let hr = normalized_entropy(&regional);
            if hr > 0.0 {
                hl / hr
            } else {
                1.0
            }
        })
        .collect();
    Ok(CovariateSurface::new("divratio", values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(n: usize, step_deg: f64) -> Vec<GeoPoint> {
        (0..n).map(|k| GeoPoint::new(0.0, k as f64 * step_deg)).collect()
    }

    #[test]
    fn identical_composition_gives_one() {
        let locs = row(6, 0.02);
        let comps = vec![vec![30.0, 70.0]; 6];
        let r = diversity_ratio(&locs, &comps, 2.0, 10.0).unwrap();
        assert!(r.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn homogeneous_local_in_mixed_region() {
        // Tract 0 alone within 2 miles; tract 1 ~5.5 miles away.
        let locs = vec![GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 0.08)];
        let comps = vec![vec![100.0, 0.0], vec![0.0, 100.0]];
        let r = diversity_ratio(&locs, &comps, 2.0, 10.0).unwrap();
        assert_eq!(r.values[0], 0.0);
    }

    #[test]
    fn even_local_inside_skewed_region() {
        // Local pool 50/50; regional pool 90/10.
        let locs = vec![GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 0.08)];
        let comps = vec![vec![10.0, 10.0], vec![170.0, 10.0]];
        let r = diversity_ratio(&locs, &comps, 2.0, 10.0).unwrap();
        let h = -(0.9f64 * 0.9f64.ln() + 0.1 * 0.1f64.ln()) / 2f64.ln();
        assert!((r.values[0] - 1.0 / h).abs() < 1e-12);
        assert!((r.values[0] - 2.13).abs() < 0.01);
    }

    #[test]
    fn all_zero_entropy_defaults_to_one() {
        let locs = row(3, 0.01);
        let comps = vec![vec![5.0, 0.0]; 3];
        let r = diversity_ratio(&locs, &comps, 2.0, 10.0).unwrap();
        assert!(r.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn radii_checked() {
        assert!(diversity_ratio(&row(2, 0.1), &[vec![1.0], vec![1.0]], 10.0, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn invariant_to_group_relabeling(
            comps in proptest::collection::vec(proptest::collection::vec(0.0f64..100.0, 3), 5),
            perm in Just([2usize, 0, 1]),
        ) {
            let locs = row(5, 0.03);
            let permuted: Vec<Vec<f64>> = comps.iter().map(|c| perm.iter().map(|&k| c[k]).collect()).collect();
            let a = diversity_ratio(&locs, &comps, 2.5, 10.0).unwrap();
            let b = diversity_ratio(&locs, &permuted, 2.5, 10.0).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
