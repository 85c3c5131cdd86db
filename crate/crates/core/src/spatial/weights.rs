use serde::{Deserialize, Serialize};

use crate::model::GeoPoint;
use crate::spatial::SpatialError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum WeightScheme {
    Knn(usize),
    InverseDistance { cutoff_miles: f64 },
    Custom,
}

/// Sparse spatial weights between sites. Rows are stored as `(neighbor,
/// weight)` lists sorted by neighbor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialWeightMatrix {
    rows: Vec<Vec<(usize, f64)>>,
    pub scheme: WeightScheme,
    pub row_standardized: bool,
}

impl SpatialWeightMatrix {
    /// Binary weights from neighbor lists, symmetrized by union.
    pub fn from_neighbors(neighbors: &[Vec<usize>]) -> Result<Self, SpatialError> {
        let n = neighbors.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, nb) in neighbors.iter().enumerate() {
            for &j in nb {
                if j >= n {
                    return Err(SpatialError::BadWeights(format!("neighbor {j} of {i} out of range")));
                }
                if j != i {
                    rows[i].push((j, 1.0));
                    rows[j].push((i, 1.0));
                }
            }
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
            r.dedup_by_key(|e| e.0);
        }
        Ok(Self {
            rows,
            scheme: WeightScheme::Custom,
            row_standardized: false,
        })
    }

    /// k-nearest-neighbor weights (great-circle), symmetrized so that `i ~ j`
    /// when either is among the other's `k` nearest. Ties go to the lower
    /// index.
    pub fn knn(points: &[GeoPoint], k: usize) -> Result<Self, SpatialError> {
        let n = points.len();
        if n < 2 || k == 0 {
            return Err(SpatialError::BadWeights(format!("knn needs n >= 2 and k >= 1 (n={n}, k={k})")));
        }
        let k = k.min(n - 1);
        let neighbors: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut d: Vec<(f64, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (points[i].miles_to(&points[j]), j))
                    .collect();
                d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                d.into_iter().take(k).map(|(_, j)| j).collect()
            })
            .collect();
        let mut w = Self::from_neighbors(&neighbors)?;
        w.scheme = WeightScheme::Knn(k);
        Ok(w)
    }

    /// Inverse-distance weights `1/d` for pairs within `cutoff_miles`.
    /// Coincident points get weight `1/0.01`.
    pub fn inverse_distance(points: &[GeoPoint], cutoff_miles: f64) -> Result<Self, SpatialError> {
        if !(cutoff_miles > 0.0) {
            return Err(SpatialError::BadWeights(format!("cutoff must be positive, got {cutoff_miles}")));
        }
        let n = points.len();
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = points[i].miles_to(&points[j]);
                if d <= cutoff_miles {
                    let w = 1.0 / d.max(0.01);
                    rows[i].push((j, w));
                    rows[j].push((i, w));
                }
            }
        }
        for r in rows.iter_mut() {
            r.sort_by_key(|e| e.0);
        }
        Ok(Self {
            rows,
            scheme: WeightScheme::InverseDistance { cutoff_miles },
            row_standardized: false,
        })
    }

    pub fn row_standardize(mut self) -> Self {
        for r in self.rows.iter_mut() {
            let s: f64 = r.iter().map(|e| e.1).sum();
            if s > 0.0 {
                r.iter_mut().for_each(|e| e.1 /= s);
            }
        }
        self.row_standardized = true;
        self
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<(usize, f64)>] {
        &self.rows
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows.iter().enumerate().all(|(i, r)| {
            r.iter().all(|&(j, w)| {
                self.rows[j]
                    .iter()
                    .find(|e| e.0 == i)
                    .is_some_and(|e| (e.1 - w).abs() <= tol)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lattice(side: usize) -> Vec<GeoPoint> {
        (0..side * side)
            .map(|k| GeoPoint::new((k / side) as f64 * 0.01, (k % side) as f64 * 0.01))
            .collect()
    }

    #[test]
    fn knn_symmetric_without_self_loops() {
        let w = SpatialWeightMatrix::knn(&lattice(5), 4).unwrap();
        assert!(w.is_symmetric(0.0));
        for i in 0..w.len() {
            assert!(w.row(i).iter().all(|e| e.0 != i));
            assert!(w.row(i).len() >= 4);
        }
    }

    #[test]
    fn row_standardized_rows_sum_to_one() {
        let w = SpatialWeightMatrix::knn(&lattice(4), 3).unwrap().row_standardize();
        for i in 0..w.len() {
            let s: f64 = w.row(i).iter().map(|e| e.1).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_distance_cutoff() {
        let pts = vec![GeoPoint::new(0.0, 0.0), GeoPoint::new(0.0, 0.01), GeoPoint::new(0.0, 1.0)];
        let w = SpatialWeightMatrix::inverse_distance(&pts, 5.0).unwrap();
        assert_eq!(w.row(0).len(), 1);
        assert!(w.row(2).is_empty());
        assert!(w.is_symmetric(1e-12));
    }
}
