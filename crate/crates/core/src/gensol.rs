//! Approximate general solution: eigenfunction regression for one candidate.
//!
//! Given a candidate coefficient vector, the distinct characteristic modes
//! define a basis; the amplitudes are the minimum-norm least-squares fit of
//! that basis to the samples. The resulting mean squared error is the GA
//! fitness.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::characteristic::{
    eigen_spectrum, eigenfunction_value, CoefficientVector, EigenMode, EigenSpectrum, DEFAULT_CLUSTER_TOL,
};
use crate::error::{Error, Result};
use crate::linalg::lstsq_min_norm;
use crate::series::TimeSeries;

/// Fitness assigned to candidates whose basis cannot be built or fitted.
pub const PENALTY: f64 = 1e30;

/// Basis entries beyond this magnitude count as overflow.
pub const OVERFLOW_LIMIT: f64 = 1e150;

/// Singular values below `SVD_REL_CUTOFF · σ_max` are dropped in the amplitude fit.
pub const SVD_REL_CUTOFF: f64 = 1e-10;

/// How modes map onto basis rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisLayout {
    /// One row per mode: `(Σ_{j≤α} x^j) e^{βx} (cos γx + sin γx)`.
    #[default]
    Compact,
    /// Separate rows for each power `x^j`, and separate cos / sin rows for
    /// oscillatory modes, each with its own amplitude.
    ExtendedPhase,
}

impl std::str::FromStr for BasisLayout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(BasisLayout::Compact),
            "extended_phase" => Ok(BasisLayout::ExtendedPhase),
            other => Err(Error::InvalidConfig(format!(
                "unknown basis_layout `{other}` (expected compact or extended_phase)"
            ))),
        }
    }
}

impl std::fmt::Display for BasisLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BasisLayout::Compact => "compact",
            BasisLayout::ExtendedPhase => "extended_phase",
        })
    }
}

/// Number of basis rows a mode contributes under `layout`.
fn rows_for(mode: &EigenMode, layout: BasisLayout) -> usize {
    match layout {
        BasisLayout::Compact => 1,
        BasisLayout::ExtendedPhase => {
            let powers = mode.multiplicity as usize + 1;
            if mode.is_oscillatory() {
                2 * powers
            } else {
                powers
            }
        }
    }
}

pub fn basis_size(spectrum: &EigenSpectrum, layout: BasisLayout) -> usize {
    spectrum.modes().iter().map(|m| rows_for(m, layout)).sum()
}

fn fill_extended(mode: &EigenMode, x: f64, out: &mut impl FnMut(f64)) {
    let envelope = (mode.real_part * x).exp();
    let (s, c) = (mode.imag_part * x).sin_cos();
    let mut power = 1.0;
    for _ in 0..=mode.multiplicity {
        if mode.is_oscillatory() {
            out(power * envelope * c);
            out(power * envelope * s);
        } else {
            out(power * envelope);
        }
        power *= x;
    }
}

/// Eigenfunction basis matrix: one row per basis function, one column per sample.
pub fn basis_matrix(spectrum: &EigenSpectrum, xs: &[f64], layout: BasisLayout) -> Result<DMatrix<f64>> {
    let rows = basis_size(spectrum, layout);
    let mut e = DMatrix::zeros(rows, xs.len());
    for (k, &x) in xs.iter().enumerate() {
        let mut row = 0;
        for mode in spectrum.modes() {
            match layout {
                BasisLayout::Compact => {
                    e[(row, k)] = eigenfunction_value(mode, x);
                    row += 1;
                }
                BasisLayout::ExtendedPhase => fill_extended(mode, x, &mut |v| {
                    e[(row, k)] = v;
                    row += 1;
                }),
            }
        }
    }
    if e.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_LIMIT) {
        return Err(Error::BasisOverflow);
    }
    Ok(e)
}

/// Minimum-norm least-squares amplitudes `D` for `Eᵀ D ≈ y`.
pub fn fit_amplitudes(e: &DMatrix<f64>, ys: &[f64]) -> Result<Vec<f64>> {
    if e.ncols() != ys.len() {
        return Err(Error::InvalidSeries(format!(
            "basis has {} columns but {} targets",
            e.ncols(),
            ys.len()
        )));
    }
    if e.iter().any(|v| !v.is_finite()) {
        return Err(Error::BasisOverflow);
    }
    let b = DVector::from_column_slice(ys);
    lstsq_min_norm(e.transpose(), &b, SVD_REL_CUTOFF)
        .map(|d| d.as_slice().to_vec())
        .ok_or(Error::DegenerateBasis)
}

/// Fitted eigenfunction expansion `y(x) = Σ D_i E_i(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralSolutionModel {
    pub spectrum: EigenSpectrum,
    pub amplitudes: Vec<f64>,
    pub basis_layout: BasisLayout,
}

impl GeneralSolutionModel {
    pub fn new(spectrum: EigenSpectrum, amplitudes: Vec<f64>, basis_layout: BasisLayout) -> Result<Self> {
        let expected = basis_size(&spectrum, basis_layout);
        if amplitudes.len() != expected {
            return Err(Error::InvalidCoefficients(format!(
                "{} amplitudes for {expected} basis functions",
                amplitudes.len()
            )));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite amplitude".into()));
        }
        Ok(GeneralSolutionModel {
            spectrum,
            amplitudes,
            basis_layout,
        })
    }

    /// Fits amplitudes for the spectrum of `c` against `data`.
    pub fn fit(data: &TimeSeries, c: &CoefficientVector, layout: BasisLayout) -> Result<Self> {
        let spectrum = eigen_spectrum(c, DEFAULT_CLUSTER_TOL)?;
        let e = basis_matrix(&spectrum, data.xs(), layout)?;
        let amplitudes = fit_amplitudes(&e, data.ys())?;
        GeneralSolutionModel::new(spectrum, amplitudes, layout)
    }
}

pub fn predict(model: &GeneralSolutionModel, xs: &[f64]) -> Result<Vec<f64>> {
    let e = basis_matrix(&model.spectrum, xs, model.basis_layout)?;
    let d = DVector::from_column_slice(&model.amplitudes);
    Ok((e.transpose() * d).as_slice().to_vec())
}

pub fn mean_squared_error(pred: &[f64], ys: &[f64]) -> f64 {
    let n = ys.len() as f64;
    pred.iter().zip(ys).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / n
}

/// GA fitness: MSE of the fitted general solution, or [`PENALTY`] when any
/// step fails or the loss is not finite.
pub fn fitness(data: &TimeSeries, c: &CoefficientVector, layout: BasisLayout) -> f64 {
    let loss = GeneralSolutionModel::fit(data, c, layout)
        .and_then(|model| predict(&model, data.xs()))
        .map(|pred| mean_squared_error(&pred, data.ys()));
    match loss {
        Ok(l) if l.is_finite() && l < PENALTY => l,
        _ => PENALTY,
    }
}

/// [`fitness`] over a raw slice, for callers that hold candidates as plain vectors.
pub fn fitness_slice(data: &TimeSeries, coeffs: &[f64], layout: BasisLayout) -> f64 {
    match CoefficientVector::new(coeffs.to_vec()) {
        Ok(c) => fitness(data, &c, layout),
        Err(_) => PENALTY,
    }
}
