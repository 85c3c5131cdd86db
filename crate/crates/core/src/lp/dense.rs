use crate::Scalar;

/// Inverse of a dense row-major `m x m` matrix by Gauss-Jordan elimination
/// with partial pivoting. Returns the inverse and the ratio of the largest to
/// smallest pivot magnitude, or `None` when a pivot falls below `tol`.
pub(crate) fn invert<T: Scalar>(a: &[T], m: usize, tol: T) -> Option<(Vec<T>, f64)> {
    let mut work = a.to_vec();
    let mut inv = vec![T::zero(); m * m];
    for i in 0..m {
        inv[i * m + i] = T::one();
    }
    let mut big = 0.0f64;
    let mut small = f64::INFINITY;
    for col in 0..m {
        let mut piv = col;
        let mut best = work[col * m + col].abs();
        for r in (col + 1)..m {
            let v = work[r * m + col].abs();
            if v > best {
                best = v;
                piv = r;
            }
        }
        if !(best > tol) {
            return None;
        }
        big = big.max(best.to_f64_lossy());
        small = small.min(best.to_f64_lossy());
        if piv != col {
            for k in 0..m {
                work.swap(col * m + k, piv * m + k);
                inv.swap(col * m + k, piv * m + k);
            }
        }
        let p = work[col * m + col];
        for k in 0..m {
            work[col * m + k] /= p;
            inv[col * m + k] /= p;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let f = work[r * m + col];
            if f == T::zero() {
                continue;
            }
            for k in 0..m {
                let wk = work[col * m + k];
                let ik = inv[col * m + k];
                work[r * m + k] -= f * wk;
                inv[r * m + k] -= f * ik;
            }
        }
    }
    Some((inv, if small > 0.0 { big / small } else { f64::INFINITY }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_small_matrix() {
        let a = [4.0f64, 7.0, 2.0, 6.0];
        let (inv, cond) = invert(&a, 2, 1e-12).unwrap();
        let expect = [0.6, -0.7, -0.2, 0.4];
        for (x, y) in inv.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(cond >= 1.0);
    }

    #[test]
    fn singular_detected() {
        assert!(invert(&[1.0, 2.0, 2.0, 4.0], 2, 1e-12).is_none());
    }
}
