use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::spatial::{SpatialError, SpatialWeightMatrix};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoranResult {
    pub i: f64,
    pub expectation: f64,
    pub variance: f64,
    pub z: f64,
    /// Two-sided normal-approximation p-value.
    pub p_value: f64,
}

/// Global Moran's I with moments under the randomization assumption
/// (normality assumption when `n == 3`, where the randomization variance is
/// undefined).
pub fn morans_i<T: Scalar>(values: &[T], w: &SpatialWeightMatrix) -> Result<MoranResult, SpatialError> {
    let n = values.len();
    if n < 3 {
        return Err(SpatialError::TooFewValues { need: 3, got: n });
    }
    if w.len() != n {
        return Err(SpatialError::LengthMismatch(format!("{n} values, {} weight rows", w.len())));
    }
    let x: Vec<f64> = values.iter().map(|v| v.to_f64_lossy()).collect();
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let z: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let m2: f64 = z.iter().map(|v| v * v).sum();
    let scale = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m2 <= (1e-14 * scale).powi(2) * nf || m2 == 0.0 {
        return Err(SpatialError::ZeroVariance);
    }
    let m4: f64 = z.iter().map(|v| v.powi(4)).sum();

    let mut s0 = 0.0;
    let mut cross = 0.0;
    let mut row_sum = vec![0.0; n];
    let mut col_sum = vec![0.0; n];
    for (i, row) in w.rows().iter().enumerate() {
        for &(j, wij) in row {
            s0 += wij;
            cross += wij * z[i] * z[j];
            row_sum[i] += wij;
            col_sum[j] += wij;
        }
    }
    if s0 <= 0.0 {
        return Err(SpatialError::BadWeights("weights sum to zero".into()));
    }
    let mut s1 = 0.0;
    for (i, row) in w.rows().iter().enumerate() {
        for &(j, wij) in row {
            let wji = w.row(j).iter().find(|e| e.0 == i).map_or(0.0, |e| e.1);
            s1 += (wij + wji).powi(2);
        }
    }
    // pairs with w_ij = 0 but w_ji > 0 are covered from the other row
    for (i, row) in w.rows().iter().enumerate() {
        for &(j, wij) in row {
            if !w.row(j).iter().any(|e| e.0 == i) {
                s1 += wij * wij;
            }
        }
    }
    s1 *= 0.5;
    let s2: f64 = row_sum.iter().zip(&col_sum).map(|(a, b)| (a + b).powi(2)).sum();

    let i_stat = nf / s0 * cross / m2;
    let expectation = -1.0 / (nf - 1.0);
    let variance = if n > 3 {
        let b2 = nf * m4 / (m2 * m2);
        let num = nf * ((nf * nf - 3.0 * nf + 3.0) * s1 - nf * s2 + 3.0 * s0 * s0)
            - b2 * ((nf * nf - nf) * s1 - 2.0 * nf * s2 + 6.0 * s0 * s0);
        num / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0) * s0 * s0) - expectation * expectation
    } else {
        (nf * nf * s1 - nf * s2 + 3.0 * s0 * s0) / ((nf * nf - 1.0) * s0 * s0) - expectation * expectation
    };
    let sd = variance.max(0.0).sqrt();
    let z_score = if sd > 0.0 { (i_stat - expectation) / sd } else { 0.0 };
    let std_normal = Normal::standard();
    let p_value = (2.0 * (1.0 - std_normal.cdf(z_score.abs()))).clamp(0.0, 1.0);
    Ok(MoranResult {
        i: i_stat,
        expectation,
        variance,
        z: z_score,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ring(n: usize) -> SpatialWeightMatrix {
        let nb: Vec<Vec<usize>> = (0..n).map(|i| vec![(i + 1) % n]).collect();
        SpatialWeightMatrix::from_neighbors(&nb).unwrap()
    }

    #[test]
    fn expectation_is_analytic() {
        let r = morans_i(&[1.0, 3.0, 2.0, 5.0, 4.0], &ring(5)).unwrap();
        assert_eq!(r.expectation, -0.25);
    }

    #[test]
    fn alternating_ring_is_negative() {
        let vals: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = morans_i(&vals, &ring(10)).unwrap();
        assert!((r.i + 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_variance_rejected() {
        assert_eq!(morans_i(&[2.0; 5], &ring(5)), Err(SpatialError::ZeroVariance));
        assert!(matches!(morans_i(&[1.0, 2.0], &ring(2)), Err(SpatialError::TooFewValues { .. })));
    }

    #[test]
    fn three_sites_supported() {
        let r = morans_i(&[1.0, 2.0, 4.0], &ring(3)).unwrap();
        assert!(r.variance.is_finite());
    }

    #[test]
    fn single_precision_input() {
        let a = morans_i(&[1.0f32, 3.0, 2.0, 5.0, 4.0], &ring(5)).unwrap();
        let b = morans_i(&[1.0f64, 3.0, 2.0, 5.0, 4.0], &ring(5)).unwrap();
        assert!((a.i - b.i).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn affine_invariance(
            vals in proptest::collection::vec(-10.0f64..10.0, 8),
            a in 0.1f64..10.0, b in -50.0f64..50.0,
        ) {
            let w = ring(8);
            if let Ok(r) = morans_i(&vals, &w) {
                let t: Vec<f64> = vals.iter().map(|v| a * v + b).collect();
                let r2 = morans_i(&t, &w).unwrap();
                prop_assert!((r.i - r2.i).abs() < 1e-8);
            }
        }
    }
}
