//! Characteristic polynomial, companion matrix and eigenfunction basis.
//!
//! A candidate ODE `Σ_p C_p y^(p) = 0` has solutions spanned by exponential
//! modes whose rates are the roots of `Σ_p C_p λ^p`. The roots are computed
//! as eigenvalues of the (balanced) companion matrix, then grouped into
//! [`EigenMode`]s: one per distinct root, with conjugate pairs folded into a
//! single mode carrying a non-negative imaginary part.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for merging numerically coincident roots.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-6;

/// `|C_P| < LEADING_REL_TOL * max|C_p|` is treated as a vanishing leading term.
pub const LEADING_REL_TOL: f64 = 1e-8;

const SCHUR_MAX_ITER: usize = 1000;

/// ODE coefficients `C_0 … C_P`, index = derivative order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector {
    coeffs: Vec<f64>,
}

impl CoefficientVector {
    /// Requires at least two finite entries. A vanishing leading coefficient
    /// is accepted here (normalized discoveries often have one) and rejected
    /// by [`companion_matrix`].
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidCoefficients(
                "need at least C_0 and C_1 (order >= 1)".into(),
            ));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidCoefficients("non-finite entry".into()));
        }
        Ok(CoefficientVector { coeffs })
    }

    /// ODE order `P`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn leading(&self) -> f64 {
        self.coeffs[self.order()]
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `Σ_p C_p λ^p`.
    pub fn characteristic(&self, lambda: Complex<f64>) -> Complex<f64> {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex::new(0.0, 0.0), |acc, &c| acc * lambda + c)
    }

    fn check_leading(&self) -> Result<()> {
        let lead = self.leading();
        if lead == 0.0 || lead.abs() < LEADING_REL_TOL * self.max_abs() {
            return Err(Error::LeadingCoefficientZero { value: lead });
        }
        Ok(())
    }
}

/// A distinct root `β + iγ` with multiplicity `α`; `γ ≥ 0` stands for the
/// conjugate pair when positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenMode {
    pub multiplicity: u32,
    pub real_part: f64,
    pub imag_part: f64,
}

impl EigenMode {
    pub fn new(multiplicity: u32, real_part: f64, imag_part: f64) -> Self {
        EigenMode {
            multiplicity,
            real_part,
            imag_part,
        }
    }

    /// Number of characteristic roots this mode accounts for.
    pub fn root_count(&self) -> usize {
        let pair = if self.imag_part > 0.0 { 2 } else { 1 };
        self.multiplicity as usize * pair
    }

    pub fn is_oscillatory(&self) -> bool {
        self.imag_part > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    modes: Vec<EigenMode>,
    source_order: usize,
}

impl EigenSpectrum {
    /// Builds a spectrum from explicit modes, sorting them by
    /// `(real_part, imag_part)`. Root counts must add up to `source_order`.
    pub fn new(mut modes: Vec<EigenMode>, source_order: usize) -> Result<Self> {
        if modes.iter().any(|m| {
            m.multiplicity == 0 || !m.real_part.is_finite() || !m.imag_part.is_finite() || m.imag_part < 0.0
        }) {
            return Err(Error::InvalidCoefficients(
                "modes need multiplicity >= 1, finite parts and imag_part >= 0".into(),
            ));
        }
        let total: usize = modes.iter().map(EigenMode::root_count).sum();
        if total != source_order {
            return Err(Error::InvalidCoefficients(format!(
                "modes account for {total} roots, expected {source_order}"
            )));
        }
        modes.sort_by(|a, b| {
            a.real_part
                .total_cmp(&b.real_part)
                .then(a.imag_part.total_cmp(&b.imag_part))
        });
        Ok(EigenSpectrum { modes, source_order })
    }

    /// Spectrum without the root-count check; used for hand-built bases.
    pub fn from_modes_unchecked(modes: Vec<EigenMode>) -> Self {
        let source_order = modes.iter().map(EigenMode::root_count).sum();
        EigenSpectrum { modes, source_order }
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    pub fn source_order(&self) -> usize {
        self.source_order
    }

    /// All roots, expanded by multiplicity and conjugation.
    pub fn roots(&self) -> Vec<Complex<f64>> {
        let mut out = Vec::with_capacity(self.source_order);
        for m in &self.modes {
            for _ in 0..m.multiplicity {
                out.push(Complex::new(m.real_part, m.imag_part));
                if m.is_oscillatory() {
                    out.push(Complex::new(m.real_part, -m.imag_part));
                }
            }
        }
        out
    }
}

/// Companion matrix: ones on the superdiagonal, `-C_j / C_P` along the last row.
pub fn companion_matrix(c: &CoefficientVector) -> Result<DMatrix<f64>> {
    c.check_leading()?;
    let p = c.order();
    let lead = c.leading();
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p - 1 {
        m[(i, i + 1)] = 1.0;
    }
    for j in 0..p {
        m[(p - 1, j)] = -c.as_slice()[j] / lead;
    }
    Ok(m)
}

/// Parlett–Reinsch diagonal similarity scaling (radix 2, so exact).
fn balance(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / 2.0;
            while c < g {
                f *= 2.0;
                c *= 4.0;
            }
            g = r * 2.0;
            while c >= g {
                f /= 2.0;
                c /= 4.0;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
}

/// Roots of the characteristic polynomial, in no particular order.
pub fn characteristic_roots(c: &CoefficientVector) -> Result<Vec<Complex<f64>>> {
    let mut m = companion_matrix(c)?;
    balance(&mut m);
    let schur = m
        .try_schur(f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(Error::EigenSolveFailure)?;
    let roots: Vec<_> = schur.complex_eigenvalues().iter().copied().collect();
    if roots.iter().any(|r| !r.re.is_finite() || !r.im.is_finite()) {
        return Err(Error::EigenSolveFailure);
    }
    Ok(roots)
}

fn coincide(a: Complex<f64>, b: Complex<f64>, tol: f64) -> bool {
    (a - b).norm() <= tol * a.norm().max(1.0)
}

/// Groups `values` (already sorted) into clusters anchored at their first member.
fn cluster(values: &[Complex<f64>], tol: f64) -> Vec<(Complex<f64>, u32)> {
    let mut clusters: Vec<(Complex<f64>, Complex<f64>, u32)> = Vec::new();
    for &v in values {
        match clusters
            .iter_mut()
            .find(|(anchor, _, _)| coincide(*anchor, v, tol))
        {
            Some((_, sum, count)) => {
                *sum += v;
                *count += 1;
            }
            None => clusters.push((v, v, 1)),
        }
    }
    clusters
        .into_iter()
        .map(|(_, sum, count)| (sum / count as f64, count))
        .collect()
}

/// Eigenvalues of the companion matrix grouped into distinct modes.
///
/// Roots within `cluster_tol · max(1, |λ|)` of each other are merged, and a
/// root whose imaginary part is within that tolerance is taken as real.
pub fn eigen_spectrum(c: &CoefficientVector, cluster_tol: f64) -> Result<EigenSpectrum> {
    let roots = characteristic_roots(c)?;
    let mut real = Vec::new();
    let mut upper = Vec::new();
    let mut lower = 0usize;
    for r in roots {
        if r.im.abs() <= cluster_tol * r.norm().max(1.0) {
            real.push(Complex::new(r.re, 0.0));
        } else if r.im > 0.0 {
            upper.push(r);
        } else {
            lower += 1;
        }
    }
    if lower != upper.len() {
        // A real matrix must yield conjugate pairs.
        return Err(Error::EigenSolveFailure);
    }
    let by_parts = |a: &Complex<f64>, b: &Complex<f64>| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
    real.sort_by(by_parts);
    upper.sort_by(by_parts);

    let modes = cluster(&real, cluster_tol)
        .into_iter()
        .map(|(v, n)| EigenMode::new(n, v.re, 0.0))
        .chain(
            cluster(&upper, cluster_tol)
                .into_iter()
                .map(|(v, n)| EigenMode::new(n, v.re, v.im)),
        )
        .collect();
    EigenSpectrum::new(modes, c.order())
}

/// Eigenfunction of one mode at `x`:
/// `(Σ_{j=0}^{α} x^j) · e^{βx} · (cos γx + sin γx)`.
///
/// Returns `f64::INFINITY` when the value is not finite (exponential overflow);
/// callers treat that as a failed candidate.
pub fn eigenfunction_value(mode: &EigenMode, x: f64) -> f64 {
    let poly = (0..=mode.multiplicity).fold(0.0, |acc, _| acc * x + 1.0);
    let trig = if mode.imag_part == 0.0 {
        1.0
    } else {
        let (s, c) = (mode.imag_part * x).sin_cos();
        c + s
    };
    let v = poly * (mode.real_part * x).exp() * trig;
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}
