//! Recovering ODE coefficients from the null space of a spline's gradient
//! matrix.

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::bspline::SplineModel;
use crate::characteristic::CoefficientVector;
use crate::error::{Error, Result};
use crate::linalg::linspace;

pub const DEFAULT_N_SAMPLES: usize = 1000;
pub const DEFAULT_RANK_TOL: f64 = 1e-8;
/// Fraction of the domain skipped at each end when sampling derivatives.
pub const TRIM_FRACTION: f64 = 0.02;
pub const DEFAULT_ZERO_TOL: f64 = 1e-4;
pub const SPRING_ONE_TOL: f64 = 0.98;
pub const KINETICS_ONE_TOL: f64 = 0.1;

/// Derivatives of orders `0..=P` (rows) sampled at `sample_xs` (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    pub entries: DMatrix<f64>,
    pub sample_xs: Vec<f64>,
}

impl GradientMatrix {
    pub fn order(&self) -> usize {
        self.entries.nrows() - 1
    }
}

/// Which coefficient is scaled to +1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "order")]
pub enum Pivot {
    /// Smallest derivative order whose unit-norm coefficient reaches `zero_tol`.
    LowestSurvivingOrder,
    OrderK(usize),
}

impl std::str::FromStr for Pivot {
    type Err = Error;

    /// Accepts `lowest` or `order:<k>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowest" | "lowest_surviving_order" => Ok(Pivot::LowestSurvivingOrder),
            _ => s
                .strip_prefix("order:")
                .and_then(|k| k.parse().ok())
                .map(Pivot::OrderK)
                .ok_or_else(|| Error::Parse(format!("unknown pivot `{s}`"))),
        }
    }
}

impl std::fmt::Display for Pivot {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Pivot::LowestSurvivingOrder => f.write_str("lowest"),
            Pivot::OrderK(k) => write!(f, "order:{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveredOde {
    pub coefficients: CoefficientVector,
    /// Unit-norm right singular vector for the smallest singular value.
    pub raw_null_vector: Vec<f64>,
    /// `‖Gᵀ C‖ / (n_samples · ‖C‖)`.
    pub residual: f64,
    pub rank_estimate: usize,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub sparsity_mask: Vec<f64>,
    pub pivot_order: Option<usize>,
}

/// Samples `d^p S/dx^p` for `p = 0..=order` at `n_samples` points spread
/// uniformly over the domain with the outer [`TRIM_FRACTION`] removed.
pub fn gradient_matrix(model: &SplineModel, order: usize, n_samples: usize) -> Result<GradientMatrix> {
    if order > model.degree() {
        return Err(Error::OrderExceedsDegree {
            order,
            degree: model.degree(),
        });
    }
    if n_samples < order + 1 {
        return Err(Error::InvalidConfig(format!(
            "{n_samples} samples cannot constrain {} coefficients",
            order + 1
        )));
    }
    let (lo, hi) = model.domain;
    let trim = TRIM_FRACTION * (hi - lo);
    let sample_xs = linspace(lo + trim, hi - trim, n_samples);
    let mut entries = DMatrix::zeros(order + 1, n_samples);
    for p in 0..=order {
        let piece = model.derivative_spline(p);
        for (k, &x) in sample_xs.iter().enumerate() {
            entries[(p, k)] = piece.eval(x);
        }
    }
    if entries.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidCoefficients("non-finite spline derivative".into()));
    }
    Ok(GradientMatrix { entries, sample_xs })
}

/// Minimal-singular-value direction of `Gᵀ`. The returned coefficients are
/// the raw null vector; call [`normalize_and_sparsify`] for the final form.
/// An identically zero `G` yields a zero vector, which normalization rejects.
pub fn null_coefficients(g: &GradientMatrix, rank_tol: f64) -> Result<DiscoveredOde> {
    let gt = g.entries.transpose();
    let n = gt.nrows();
    let svd = SVD::new(gt.clone(), false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or(Error::InvalidConfig("SVD without V".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let sigma_max = singular_values[0];
    let rank_estimate = singular_values
        .iter()
        .filter(|&&s| s >= rank_tol * sigma_max && s > 0.0)
        .count();

    if !(sigma_max > 0.0) {
        // An all-zero matrix singles out no direction.
        let zeros = vec![0.0; gt.ncols()];
        return Ok(DiscoveredOde {
            coefficients: CoefficientVector::new(zeros.clone())?,
            raw_null_vector: zeros,
            residual: 0.0,
            rank_estimate: 0,
            singular_values,
            sparsity_mask: Vec::new(),
            pivot_order: None,
        });
    }
    let smallest = *order.last().unwrap();
    let mut v: Vec<f64> = v_t.row(smallest).iter().copied().collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    // Deterministic sign: first non-negligible entry positive.
    let lead = v
        .iter()
        .copied()
        .find(|x| x.abs() >= DEFAULT_ZERO_TOL)
        .unwrap_or(0.0);
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let residual = residual_of(&gt, &v, n);
    Ok(DiscoveredOde {
        coefficients: CoefficientVector::new(v.clone())?,
        raw_null_vector: v,
        residual,
        rank_estimate,
        singular_values,
        sparsity_mask: Vec::new(),
        pivot_order: None,
    })
}

fn residual_of(gt: &DMatrix<f64>, c: &[f64], n: usize) -> f64 {
    let c_norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cv = nalgebra::DVector::from_column_slice(c);
    (gt * cv).norm() / (n as f64 * c_norm)
}

/// Scales the null vector so the pivot coefficient is +1, zeroes entries whose
/// unit-norm magnitude is below `zero_tol`, and builds the sparsity mask.
pub fn normalize_and_sparsify(
    d: &DiscoveredOde,
    pivot: Pivot,
    zero_tol: f64,
    one_tol: f64,
) -> Result<DiscoveredOde> {
    let raw = &d.raw_null_vector;
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::AllCoefficientsBelowTolerance { zero_tol });
    }
    let unit: Vec<f64> = raw.iter().map(|x| x / norm).collect();
    let surviving = |x: f64| x.abs() >= zero_tol;
    let k = match pivot {
        Pivot::LowestSurvivingOrder => unit
            .iter()
            .position(|&x| surviving(x))
            .ok_or(Error::AllCoefficientsBelowTolerance { zero_tol })?,
        Pivot::OrderK(k) => {
            if k >= unit.len() {
                return Err(Error::InvalidConfig(format!(
                    "pivot order {k} exceeds candidate order {}",
                    unit.len() - 1
                )));
            }
            if !surviving(unit[k]) {
                return Err(Error::AllCoefficientsBelowTolerance { zero_tol });
            }
            k
        }
    };
    let sign = unit[k].signum();
    let raw_null_vector: Vec<f64> = unit.iter().map(|x| sign * x).collect();
    let coeffs: Vec<f64> = raw_null_vector
        .iter()
        .map(|&x| if surviving(x) { x / raw_null_vector[k] } else { 0.0 })
        .collect();
    let sparsity_mask = sparsity_mask(&coeffs, zero_tol, one_tol);
    Ok(DiscoveredOde {
        coefficients: CoefficientVector::new(coeffs)?,
        raw_null_vector,
        residual: d.residual,
        rank_estimate: d.rank_estimate,
        singular_values: d.singular_values.clone(),
        sparsity_mask,
        pivot_order: Some(k),
    })
}

/// Threshold transform on coefficient magnitudes: below `zero_tol` → 0,
/// above `one_tol` → 1, then min-max normalization of the whole row.
pub fn sparsity_mask(coeffs: &[f64], zero_tol: f64, one_tol: f64) -> Vec<f64> {
    let clipped: Vec<f64> = coeffs
        .iter()
        .map(|c| {
            let a = c.abs();
            if a < zero_tol {
                0.0
            } else if a > one_tol {
                1.0
            } else {
                a
            }
        })
        .collect();
    let min = clipped.iter().copied().fold(f64::INFINITY, f64::min);
    let max = clipped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > min {
        clipped.iter().map(|v| (v - min) / (max - min)).collect()
    } else {
        clipped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bspline::{fit, refine, uniform_knots};
    use crate::datagen::{spring_mass_series, SpringParams};

    fn quadratic() -> SplineModel {
        let xs = linspace(0.0, 10.0, 400);
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        fit(&xs, &ys, &uniform_knots(0.0, 10.0, 3, 4).unwrap()).unwrap()
    }

    #[test]
    fn gradient_rows_of_a_parabola() {
        let g = gradient_matrix(&quadratic(), 3, DEFAULT_N_SAMPLES).unwrap();
        assert_eq!(g.entries.shape(), (4, 1000));
        assert!((g.sample_xs[0] - 0.2).abs() < 1e-12);
        assert!((g.sample_xs[999] - 9.8).abs() < 1e-12);
        for (k, &x) in g.sample_xs.iter().enumerate().step_by(97) {
            assert!((g.entries[(0, k)] - x * x).abs() < 1e-8);
            assert!((g.entries[(1, k)] - 2.0 * x).abs() < 1e-8);
            assert!((g.entries[(2, k)] - 2.0).abs() < 1e-8);
            assert!(g.entries[(3, k)].abs() < 1e-8);
        }
    }

    #[test]
    fn order_above_degree_rejected() {
        assert!(matches!(
            gradient_matrix(&quadratic(), 4, 100),
            Err(Error::OrderExceedsDegree { order: 4, degree: 3 })
        ));
    }

    #[test]
    fn constant_spline_rows() {
        let kv = uniform_knots(0.0, 1.0, 2, 5).unwrap();
        let m = SplineModel::new(kv, vec![3.5; 5]).unwrap();
        let g = gradient_matrix(&m, 1, 50).unwrap();
        assert!(g.entries.row(0).iter().all(|v| (v - 3.5).abs() < 1e-14));
        assert!(g.entries.row(1).iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn third_derivative_is_the_null_direction() {
        let g = gradient_matrix(&quadratic(), 3, DEFAULT_N_SAMPLES).unwrap();
        let d = null_coefficients(&g, DEFAULT_RANK_TOL).unwrap();
        assert!(d.residual <= 1e-10, "residual {}", d.residual);
        assert_eq!(d.rank_estimate, 3);
        let n = normalize_and_sparsify(&d, Pivot::LowestSurvivingOrder, DEFAULT_ZERO_TOL, SPRING_ONE_TOL)
            .unwrap();
        assert_eq!(n.coefficients.as_slice(), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(n.sparsity_mask, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(n.pivot_order, Some(3));
    }

    #[test]
    fn null_vector_is_orthogonal_to_the_row_space() {
        let p = SpringParams::benchmark_underdamped();
        let ts = spring_mass_series(&p).unwrap();
        let m = fit(ts.xs(), ts.ys(), &uniform_knots(0.0, 20.0, 5, 60).unwrap()).unwrap();
        let g = gradient_matrix(&m, 3, 500).unwrap();
        let d = null_coefficients(&g, DEFAULT_RANK_TOL).unwrap();
        let norm: f64 = d.raw_null_vector.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        let svd = SVD::new(g.entries.transpose(), false, true);
        let v_t = svd.v_t.unwrap();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            if s >= DEFAULT_RANK_TOL * d.singular_values[0] && s > d.singular_values[3] {
                let dot: f64 = v_t
                    .row(i)
                    .iter()
                    .zip(&d.raw_null_vector)
                    .map(|(a, b)| a * b)
                    .sum();
                assert!(dot.abs() < 1e-8, "dot {dot}");
            }
        }
    }

    #[test]
    fn scale_invariance() {
        let g = gradient_matrix(&quadratic(), 2, 300).unwrap();
        let base = null_coefficients(&g, DEFAULT_RANK_TOL).unwrap();
        for a in [1e-3, 0.5, 7.0, 1e4] {
            let scaled = GradientMatrix {
                entries: &g.entries * a,
                sample_xs: g.sample_xs.clone(),
            };
            let d = null_coefficients(&scaled, DEFAULT_RANK_TOL).unwrap();
            for (x, y) in d.raw_null_vector.iter().zip(&base.raw_null_vector) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn pivot_k_and_errors() {
        let d = DiscoveredOde {
            coefficients: CoefficientVector::new(vec![0.2, -0.9, 0.01]).unwrap(),
            raw_null_vector: vec![0.2, -0.9, 0.01],
            residual: 0.0,
            rank_estimate: 2,
            singular_values: vec![1.0, 0.5, 0.0],
            sparsity_mask: vec![],
            pivot_order: None,
        };
        let n = normalize_and_sparsify(&d, Pivot::OrderK(1), 1e-4, 0.1).unwrap();
        let c = n.coefficients.as_slice();
        assert_eq!(c[1], 1.0);
        assert!((c[0] + 0.2 / 0.9).abs() < 1e-12);
        assert!(n.raw_null_vector[1] > 0.0);
        assert!(normalize_and_sparsify(&d, Pivot::OrderK(5), 1e-4, 0.1).is_err());
        let zero = DiscoveredOde {
            raw_null_vector: vec![0.0, 0.0],
            coefficients: CoefficientVector::new(vec![0.0, 0.0]).unwrap(),
            ..d
        };
        assert!(matches!(
            normalize_and_sparsify(&zero, Pivot::LowestSurvivingOrder, 1e-4, 0.98),
            Err(Error::AllCoefficientsBelowTolerance { .. })
        ));
    }

    #[test]
    fn mask_transform() {
        let m = sparsity_mask(&[1.0, 2.1, 4.5, 1e-6, 0.0, 0.0], 1e-4, 0.98);
        assert_eq!(m, vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0]);
        assert_eq!(sparsity_mask(&[1.0, 0.0, 0.0], 1e-4, 0.98), vec![1.0, 0.0, 0.0]);
        let m = sparsity_mask(&[0.5, 0.02, 0.0], 1e-4, 0.98);
        assert_eq!(m[0], 1.0);
        assert!((m[1] - 0.04).abs() < 1e-12);
        assert_eq!(m[2], 0.0);
        let edc = sparsity_mask(&[0.23, 1.0, -0.0025], 1e-4, 0.1);
        assert_eq!(edc[1], 1.0);
    }

    #[test]
    fn pivot_parse() {
        assert_eq!("lowest".parse::<Pivot>().unwrap(), Pivot::LowestSurvivingOrder);
        assert_eq!("order:1".parse::<Pivot>().unwrap(), Pivot::OrderK(1));
        assert!("order:x".parse::<Pivot>().is_err());
        assert_eq!(Pivot::OrderK(3).to_string(), "order:3");
    }

    fn recover(ts: &crate::series::TimeSeries, p: usize, degree: usize, n_basis: usize) -> Vec<f64> {
        let (lo, hi) = ts.domain();
        let kv = uniform_knots(lo, hi, degree, n_basis).unwrap();
        let m = fit(ts.xs(), ts.ys(), &kv).unwrap();
        let r = refine(ts.xs(), ts.ys(), &m, 1e-6, 12).unwrap();
        let g = gradient_matrix(&r.model, p, DEFAULT_N_SAMPLES).unwrap();
        let d = null_coefficients(&g, DEFAULT_RANK_TOL).unwrap();
        normalize_and_sparsify(&d, Pivot::LowestSurvivingOrder, DEFAULT_ZERO_TOL, SPRING_ONE_TOL)
            .unwrap()
            .coefficients
            .as_slice()
            .to_vec()
    }

    #[test]
    fn analytic_underdamped_recovery() {
        let ts = spring_mass_series(&SpringParams::benchmark_underdamped()).unwrap();
        let c = recover(&ts, 5, 5, 171);
        for (got, want) in c.iter().zip([1.0, 2.0, 4.0]) {
            assert!((got - want).abs() / want < 0.05, "{c:?}");
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(50))]
        #[test]
        fn random_second_order_recovery(r1 in -2.0f64..-0.1, r2 in -2.0f64..-0.1) {
            let params = SpringParams {
                mass: 1.0,
                damping: -(r1 + r2),
                stiffness: r1 * r2,
                x0: 0.4,
                v0: -0.6,
                duration: 20.0,
                n_points: 1000,
            };
            let ts = spring_mass_series(&params).unwrap();
            let c = recover(&ts, 2, 5, 200);
            let truth = [1.0, params.damping / params.stiffness, 1.0 / params.stiffness];
            for (got, want) in c.iter().zip(truth) {
                proptest::prop_assert!((got - want).abs() / want < 0.05, "{:?} vs {:?}", c, truth);
            }
        }
    }
}
