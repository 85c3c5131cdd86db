use crate::lp::LinearProgram;
use crate::Scalar;

/// Power-of-two row and column scale factors from a few passes of
/// geometric-mean equilibration. Powers of two keep the scaled data exact.
pub(crate) fn equilibrate<T: Scalar>(lp: &LinearProgram<T>, passes: usize) -> (Vec<T>, Vec<T>) {
    let m = lp.n_rows();
    let n = lp.n_vars();
    let mut row_scale = vec![1.0f64; m];
    let mut col_scale = vec![1.0f64; n];
    for _ in 0..passes {
        for (r, row) in lp.rows().iter().enumerate() {
            let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
            for &(j, a) in &row.coefs {
                let v = a.to_f64_lossy().abs() * col_scale[j];
                if v > 0.0 {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if hi > 0.0 {
                row_scale[r] = pow2(1.0 / (lo * hi).sqrt());
            }
        }
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![0.0f64; n];
        for (r, row) in lp.rows().iter().enumerate() {
            for &(j, a) in &row.coefs {
                let v = a.to_f64_lossy().abs() * row_scale[r];
                if v > 0.0 {
                    lo[j] = lo[j].min(v);
                    hi[j] = hi[j].max(v);
                }
            }
        }
        for j in 0..n {
            if hi[j] > 0.0 {
                col_scale[j] = pow2(1.0 / (lo[j] * hi[j]).sqrt());
            }
        }
    }
    (
        row_scale.into_iter().map(T::lit).collect(),
        col_scale.into_iter().map(T::lit).collect(),
    )
}

fn pow2(v: f64) -> f64 {
    if !v.is_finite() || v <= 0.0 {
        return 1.0;
    }
    2f64.powi(v.log2().round().clamp(-40.0, 40.0) as i32)
}
