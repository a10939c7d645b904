//! Small dense linear-algebra helpers shared by the regression stages.

use nalgebra::{DMatrix, DVector, SVD};

/// Minimum-norm least-squares solution of `a x ≈ b` via the SVD.
///
/// Singular values below `rel_cutoff * σ_max` are treated as zero. Returns
/// `None` when nothing survives the cutoff (including an all-zero `a`).
pub(crate) fn lstsq_min_norm(a: DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> Option<DVector<f64>> {
    let svd = SVD::new(a, true, true);
    let sigma_max = svd.singular_values.max();
    if !(sigma_max > 0.0) || !sigma_max.is_finite() {
        return None;
    }
    let cutoff = rel_cutoff * sigma_max;
    let u = svd.u.as_ref()?;
    let v_t = svd.v_t.as_ref()?;
    let mut x = DVector::zeros(v_t.ncols());
    let mut kept = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s < cutoff {
            continue;
        }
        kept += 1;
        let coef = u.column(i).dot(b) / s;
        x.axpy(coef, &v_t.row(i).transpose(), 1.0);
    }
    (kept > 0).then_some(x)
}

/// `n` evenly spaced points on `[a, b]`, endpoints included.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => {
            let step = (b - a) / (n - 1) as f64;
            (0..n)
                .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let x = lstsq_min_norm(a, &b, 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((x[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_min_norm_on_duplicate_columns() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let x = lstsq_min_norm(a, &b, 1e-10).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lstsq_zero_matrix() {
        let a = DMatrix::zeros(3, 2);
        assert!(lstsq_min_norm(a, &DVector::zeros(3), 1e-10).is_none());
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(0.0, 20.0, 1000);
        assert_eq!(v[0], 0.0);
        assert_eq!(v[999], 20.0);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
    }
}
