//! Clamped B-splines: least-squares fitting, adaptive knot refinement and
//! analytic derivatives.
//!
//! Degrees are used throughout the public API; [`basis_value`] alone takes
//! the Cox–de Boor *order* (degree + 1), matching the textbook recursion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq_min_norm;

/// Default per-interval squared-error threshold for refinement.
pub const DEFAULT_TAU: f64 = 1e-6;
/// Default cap on refinement rounds.
pub const DEFAULT_MAX_ROUNDS: usize = 12;

const FIT_REL_CUTOFF: f64 = 1e-14;

/// Non-decreasing knots with `degree + 1` fold end knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    knots: Vec<f64>,
    degree: usize,
}

impl KnotVector {
    pub fn new(knots: Vec<f64>, degree: usize) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidKnots("degree must be >= 1".into()));
        }
        if knots.len() < 2 * (degree + 1) {
            return Err(Error::InvalidKnots(format!(
                "{} knots cannot clamp a degree-{degree} spline",
                knots.len()
            )));
        }
        if knots.iter().any(|k| !k.is_finite()) {
            return Err(Error::InvalidKnots("non-finite knot".into()));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidKnots("knots must be non-decreasing".into()));
        }
        let (first, last) = (knots[0], knots[knots.len() - 1]);
        if !(first < last) {
            return Err(Error::InvalidDomain {
                min: first,
                max: last,
            });
        }
        let n = knots.len();
        if knots[..=degree].iter().any(|&k| k != first) || knots[n - degree - 1..].iter().any(|&k| k != last)
        {
            return Err(Error::InvalidKnots(
                "end knots must have multiplicity degree + 1".into(),
            ));
        }
        let interior = &knots[degree + 1..n - degree - 1];
        let mut run = 0;
        for (i, k) in interior.iter().enumerate() {
            run = if i > 0 && interior[i - 1] == *k {
                run + 1
            } else {
                1
            };
            if run > degree || *k == first || *k == last {
                return Err(Error::InvalidKnots(format!(
                    "interior knot {k} exceeds multiplicity {degree}"
                )));
            }
        }
        Ok(KnotVector { knots, degree })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    /// Distinct interior breakpoints.
    pub fn interior(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.knots.len() - self.degree - 1]
    }

    /// Knot indices `j` with `t_j < t_{j+1}`.
    pub fn nonempty_spans(&self) -> Vec<usize> {
        (0..self.knots.len() - 1)
            .filter(|&j| self.knots[j] < self.knots[j + 1])
            .collect()
    }

    /// Index `j ∈ [degree, n_basis − 1]` with `t_j ≤ x < t_{j+1}`; the right
    /// end of the domain belongs to the last span.
    pub fn find_span(&self, x: f64) -> usize {
        span_index(&self.knots, self.degree, self.n_basis(), x)
    }

    /// Copy with extra interior knots merged in.
    pub fn with_inserted(&self, new_knots: &[f64]) -> Result<Self> {
        let mut knots = self.knots.clone();
        knots.extend_from_slice(new_knots);
        knots.sort_by(f64::total_cmp);
        KnotVector::new(knots, self.degree)
    }
}

fn span_index(knots: &[f64], degree: usize, n: usize, x: f64) -> usize {
    // Largest k with t_k <= x, restricted to the valid range.
    let k = knots[..n].partition_point(|&t| t <= x);
    k.saturating_sub(1).clamp(degree, n - 1)
}

/// Clamped knot vector with `n_basis − degree − 1` equally spaced interior knots.
pub fn uniform_knots(x_min: f64, x_max: f64, degree: usize, n_basis: usize) -> Result<KnotVector> {
    if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
        return Err(Error::InvalidDomain {
            min: x_min,
            max: x_max,
        });
    }
    if n_basis < degree + 1 {
        return Err(Error::InvalidKnots(format!(
            "n_basis {n_basis} < degree + 1 = {}",
            degree + 1
        )));
    }
    let n_interior = n_basis - degree - 1;
    let mut knots = vec![x_min; degree + 1];
    let width = x_max - x_min;
    knots.extend((1..=n_interior).map(|i| x_min + width * i as f64 / (n_interior + 1) as f64));
    knots.extend(std::iter::repeat_n(x_max, degree + 1));
    KnotVector::new(knots, degree)
}

/// Cox–de Boor recursion for `B_s` of order `ω` (degree `ω − 1`), with the
/// `0/0 = 0` convention for repeated knots.
pub fn basis_value(kv: &KnotVector, s: usize, order: usize, x: f64) -> Result<f64> {
    let t = &kv.knots;
    if order == 0 || s + order >= t.len() {
        return Err(Error::IndexOutOfRange {
            index: s,
            order,
            count: t.len().saturating_sub(order),
        });
    }
    Ok(cox_de_boor(t, s, order, x))
}

fn cox_de_boor(t: &[f64], s: usize, order: usize, x: f64) -> f64 {
    if order == 1 {
        let last = t[t.len() - 1];
        let inside = t[s] <= x && x < t[s + 1];
        // Close the final nonempty span on the right.
        let right_end = x == last && t[s] < t[s + 1] && t[s + 1] == last;
        return if inside || right_end { 1.0 } else { 0.0 };
    }
    let mut v = 0.0;
    let left = t[s + order - 1] - t[s];
    if left > 0.0 {
        v += (x - t[s]) / left * cox_de_boor(t, s, order - 1, x);
    }
    let right = t[s + order] - t[s + 1];
    if right > 0.0 {
        v += (t[s + order] - x) / right * cox_de_boor(t, s + 1, order - 1, x);
    }
    v
}

/// The `degree + 1` basis functions that are nonzero on `span`, evaluated at `x`.
fn nonzero_basis(knots: &[f64], span: usize, degree: usize, x: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom != 0.0 { n[r] / denom } else { 0.0 };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// `S(x) = Σ_s μ_s B_s(x)` on a clamped knot vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineModel {
    pub knot_vector: KnotVector,
    pub control_coeffs: Vec<f64>,
    pub domain: (f64, f64),
}

/// Spline of any degree (including 0) sharing the clamped layout; produced
/// by differentiating a [`SplineModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePolynomial {
    knots: Vec<f64>,
    degree: usize,
    coeffs: Vec<f64>,
}

impl PiecewisePolynomial {
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// De Boor evaluation. `x` is assumed to lie in the domain.
    pub fn eval(&self, x: f64) -> f64 {
        let q = self.degree;
        let n = self.coeffs.len();
        if n == 0 {
            return 0.0;
        }
        let t = &self.knots;
        let k = span_index(t, q, n, x);
        let mut d: Vec<f64> = (0..=q).map(|j| self.coeffs[j + k - q]).collect();
        for r in 1..=q {
            for j in (r..=q).rev() {
                let lo = t[j + k - q];
                let hi = t[j + 1 + k - r];
                let alpha = if hi > lo { (x - lo) / (hi - lo) } else { 0.0 };
                d[j] = (1.0 - alpha) * d[j - 1] + alpha * d[j];
            }
        }
        d[q]
    }

    /// One derivative: degree drops by one, outer knots are removed.
    fn differentiate(&self) -> PiecewisePolynomial {
        let q = self.degree;
        if q == 0 {
            return PiecewisePolynomial {
                knots: self.knots.clone(),
                degree: 0,
                coeffs: vec![0.0; self.coeffs.len()],
            };
        }
        let t = &self.knots;
        let coeffs = self
            .coeffs
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let denom = t[i + q + 1] - t[i + 1];
                if denom > 0.0 {
                    q as f64 * (w[1] - w[0]) / denom
                } else {
                    0.0
                }
            })
            .collect();
        PiecewisePolynomial {
            knots: t[1..t.len() - 1].to_vec(),
            degree: q - 1,
            coeffs,
        }
    }
}

impl SplineModel {
    pub fn new(knot_vector: KnotVector, control_coeffs: Vec<f64>) -> Result<Self> {
        if control_coeffs.len() != knot_vector.n_basis() {
            return Err(Error::InvalidKnots(format!(
                "{} control coefficients for {} basis functions",
                control_coeffs.len(),
                knot_vector.n_basis()
            )));
        }
        let domain = knot_vector.domain();
        Ok(SplineModel {
            knot_vector,
            control_coeffs,
            domain,
        })
    }

    pub fn degree(&self) -> usize {
        self.knot_vector.degree
    }

    fn check_domain(&self, x: f64) -> Result<()> {
        let (min, max) = self.domain;
        if x >= min && x <= max {
            Ok(())
        } else {
            Err(Error::OutsideDomain { x, min, max })
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        self.check_domain(x)?;
        Ok(self.as_piecewise().eval(x))
    }

    fn as_piecewise(&self) -> PiecewisePolynomial {
        PiecewisePolynomial {
            knots: self.knot_vector.knots.clone(),
            degree: self.degree(),
            coeffs: self.control_coeffs.clone(),
        }
    }

    /// The `p`-th derivative as a standalone piecewise polynomial. Orders
    /// above the degree give the zero function.
    pub fn derivative_spline(&self, p: usize) -> PiecewisePolynomial {
        let mut piece = self.as_piecewise();
        for _ in 0..p.min(self.degree() + 1) {
            piece = piece.differentiate();
        }
        piece
    }

    /// Residuals `y_k − S(x_k)`.
    pub fn residuals(&self, xs: &[f64], ys: &[f64]) -> Vec<f64> {
        let piece = self.as_piecewise();
        xs.iter().zip(ys).map(|(&x, &y)| y - piece.eval(x)).collect()
    }
}

/// `d^p S / dx^p` at `x`; exactly 0 when `p` exceeds the degree.
pub fn derivative(model: &SplineModel, p: usize, x: f64) -> Result<f64> {
    model.check_domain(x)?;
    if p > model.degree() {
        return Ok(0.0);
    }
    Ok(model.derivative_spline(p).eval(x))
}

/// Least-squares spline on a fixed knot vector.
pub fn fit(xs: &[f64], ys: &[f64], kv: &KnotVector) -> Result<SplineModel> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidSeries(format!(
            "{} x values but {} y values",
            xs.len(),
            ys.len()
        )));
    }
    let (min, max) = kv.domain();
    if let Some(&x) = xs.iter().find(|&&x| !(x >= min && x <= max)) {
        return Err(Error::OutsideDomain { x, min, max });
    }
    let n = kv.n_basis();
    if xs.len() < n {
        return Err(Error::InvalidSeries(format!(
            "{} points cannot determine {n} basis functions",
            xs.len()
        )));
    }
    let d = kv.degree;
    let mut a = DMatrix::zeros(xs.len(), n);
    let mut support = vec![0.0f64; n];
    for (row, &x) in xs.iter().enumerate() {
        let span = kv.find_span(x);
        for (j, v) in nonzero_basis(&kv.knots, span, d, x).into_iter().enumerate() {
            let col = span - d + j;
            a[(row, col)] = v;
            support[col] = support[col].max(v.abs());
        }
    }
    if let Some(index) = support.iter().position(|&s| s == 0.0) {
        return Err(Error::RankDeficientFit { index });
    }
    let b = DVector::from_column_slice(ys);
    let mu = lstsq_min_norm(a, &b, FIT_REL_CUTOFF).ok_or(Error::RankDeficientFit { index: 0 })?;
    SplineModel::new(kv.clone(), mu.as_slice().to_vec())
}

/// Per-span squared-error sums `φ(t_j)` over nonempty spans, with the
/// number of samples falling in each span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanError {
    pub start: f64,
    pub end: f64,
    pub phi: f64,
    pub points: usize,
}

pub fn span_errors(model: &SplineModel, xs: &[f64], ys: &[f64]) -> Vec<SpanError> {
    let kv = &model.knot_vector;
    let spans = kv.nonempty_spans();
    let mut out: Vec<SpanError> = spans
        .iter()
        .map(|&j| SpanError {
            start: kv.knots[j],
            end: kv.knots[j + 1],
            phi: 0.0,
            points: 0,
        })
        .collect();
    let residuals = model.residuals(xs, ys);
    for (&x, r) in xs.iter().zip(residuals) {
        let j = kv.find_span(x);
        let slot = spans.partition_point(|&s| s < j);
        out[slot].phi += r * r;
        out[slot].points += 1;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RefineStatus {
    Converged,
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub model: SplineModel,
    pub rounds: usize,
    pub status: RefineStatus,
    pub max_phi: f64,
    /// `Σ r_k²` after the initial fit and after every round.
    pub sse_history: Vec<f64>,
}

impl Refinement {
    /// `Err(RefinementStalled)` unless every span met the threshold.
    pub fn ensure_converged(&self) -> Result<()> {
        match self.status {
            RefineStatus::Converged => Ok(()),
            RefineStatus::Stalled => Err(Error::RefinementStalled {
                rounds: self.rounds,
                max_phi: self.max_phi,
            }),
        }
    }
}

/// Adaptive knot refinement: spans whose squared-error sum exceeds `tau`
/// get a midpoint knot, then the spline is refitted. Spans holding fewer
/// than `degree + 1` samples are never split.
pub fn refine(
    xs: &[f64],
    ys: &[f64],
    initial: &SplineModel,
    tau: f64,
    max_rounds: usize,
) -> Result<Refinement> {
    if !(tau > 0.0) {
        return Err(Error::InvalidConfig(format!("tau must be positive, got {tau}")));
    }
    let sse = |m: &SplineModel| m.residuals(xs, ys).iter().map(|r| r * r).sum::<f64>();
    let min_points = initial.degree() + 1;
    let mut model = initial.clone();
    let mut history = vec![sse(&model)];
    let mut rounds = 0;
    loop {
        let errors = span_errors(&model, xs, ys);
        let max_phi = errors.iter().map(|e| e.phi).fold(0.0, f64::max);
        let flagged: Vec<&SpanError> = errors.iter().filter(|e| e.phi > tau).collect();
        let finish = |model, rounds, status, history| {
            Ok(Refinement {
                model,
                rounds,
                status,
                max_phi,
                sse_history: history,
            })
        };
        if flagged.is_empty() {
            return finish(model, rounds, RefineStatus::Converged, history);
        }
        let midpoints: Vec<f64> = flagged
            .iter()
            .filter(|e| e.points >= min_points)
            .map(|e| 0.5 * (e.start + e.end))
            .filter(|&m| errors.iter().all(|e| e.start != m))
            .collect();
        if rounds == max_rounds || midpoints.is_empty() {
            log::debug!("refinement stalled after {rounds} rounds, max phi {max_phi:e}");
            return finish(model, rounds, RefineStatus::Stalled, history);
        }
        let kv = model.knot_vector.with_inserted(&midpoints)?;
        model = fit(xs, ys, &kv)?;
        rounds += 1;
        history.push(sse(&model));
    }
}
