//! Benchmark data: damped spring-mass trajectories, first-order decay,
//! seeded Gaussian noise and log-linear densification of sparse kinetics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::linspace;
use crate::series::TimeSeries;

/// `m ẍ + b ẋ + k x = 0` with `x(0) = x0`, `ẋ(0) = v0`, sampled on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpringParams {
    pub mass: f64,
    pub damping: f64,
    pub stiffness: f64,
    pub x0: f64,
    pub v0: f64,
    pub duration: f64,
    pub n_points: usize,
}

impl SpringParams {
    fn benchmark(mass: f64, damping: f64) -> Self {
        SpringParams {
            mass,
            damping,
            stiffness: 1.0,
            x0: 0.4,
            v0: -0.6,
            duration: 20.0,
            n_points: 1000,
        }
    }

    pub fn benchmark_underdamped() -> Self {
        Self::benchmark(4.0, 2.0)
    }

    pub fn benchmark_critical() -> Self {
        Self::benchmark(1.0, 2.0)
    }

    pub fn benchmark_overdamped() -> Self {
        Self::benchmark(2.0, 4.0)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.mass > 0.0
            && self.damping >= 0.0
            && self.stiffness > 0.0
            && self.duration > 0.0
            && self.x0.is_finite()
            && self.v0.is_finite()
            && self.n_points >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid spring parameters {self:?}"
            )))
        }
    }

    /// `b² − 4mk`.
    pub fn discriminant(&self) -> f64 {
        self.damping * self.damping - 4.0 * self.mass * self.stiffness
    }

    pub fn regime(&self) -> Regime {
        let d = self.discriminant();
        let scale = self.damping * self.damping + 4.0 * self.mass * self.stiffness;
        if d.abs() <= 1e-12 * scale {
            Regime::Critical
        } else if d > 0.0 {
            Regime::Overdamped
        } else {
            Regime::Underdamped
        }
    }

    /// ODE coefficients `(k, b, m)` ordered by derivative.
    pub fn coefficients(&self) -> [f64; 3] {
        [self.stiffness, self.damping, self.mass]
    }

    /// Closed-form solution `x(t)`.
    pub fn solution(&self) -> SpringSolution {
        let (m, b, k) = (self.mass, self.damping, self.stiffness);
        let d = b * b - 4.0 * m * k;
        let decay = -b / (2.0 * m);
        let regime = self.regime();
        // Basis values and first derivatives at t = 0 for the regime's two
        // fundamental solutions; the constants come from a 2×2 solve.
        let (basis, [[f0, g0], [df0, dg0]]) = match regime {
            Regime::Overdamped => {
                let s = d.sqrt() / (2.0 * m);
                let (r1, r2) = (decay + s, decay - s);
                (Basis::Exponentials(r1, r2), [[1.0, 1.0], [r1, r2]])
            }
            Regime::Critical => (Basis::Repeated(decay), [[1.0, 0.0], [decay, 1.0]]),
            Regime::Underdamped => {
                let w = (-d).sqrt() / (2.0 * m);
                (Basis::Damped(decay, w), [[1.0, 0.0], [decay, w]])
            }
        };
        let det = f0 * dg0 - g0 * df0;
        let c1 = (self.x0 * dg0 - g0 * self.v0) / det;
        let c2 = (f0 * self.v0 - df0 * self.x0) / det;
        SpringSolution { basis, c1, c2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Overdamped,
    Critical,
    Underdamped,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Overdamped => "overdamped",
            Regime::Critical => "critical",
            Regime::Underdamped => "underdamped",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overdamped" => Ok(Regime::Overdamped),
            "critical" => Ok(Regime::Critical),
            "underdamped" => Ok(Regime::Underdamped),
            _ => Err(Error::InvalidConfig(format!(
                "unknown regime `{s}` (overdamped | critical | underdamped)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Basis {
    Exponentials(f64, f64),
    Repeated(f64),
    Damped(f64, f64),
}

/// `x(t) = c1 f(t) + c2 g(t)` for the regime's fundamental pair `(f, g)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpringSolution {
    basis: Basis,
    c1: f64,
    c2: f64,
}

impl SpringSolution {
    pub fn eval(&self, t: f64) -> f64 {
        match self.basis {
            Basis::Exponentials(r1, r2) => self.c1 * (r1 * t).exp() + self.c2 * (r2 * t).exp(),
            Basis::Repeated(r) => (self.c1 + self.c2 * t) * (r * t).exp(),
            Basis::Damped(s, w) => {
                let (sin, cos) = (w * t).sin_cos();
                (s * t).exp() * (self.c1 * cos + self.c2 * sin)
            }
        }
    }

    pub fn constants(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }
}

pub fn spring_mass_series(p: &SpringParams) -> Result<TimeSeries> {
    p.validate()?;
    let sol = p.solution();
    let xs = linspace(0.0, p.duration, p.n_points);
    let ys = xs.iter().map(|&t| sol.eval(t)).collect();
    TimeSeries::new(xs, ys)
}

/// `C(t) = c0 · e^{−k t}` on a uniform grid over `[0, duration]`.
pub fn first_order_series(rate_k: f64, c0: f64, duration: f64, n_points: usize) -> Result<TimeSeries> {
    if !(rate_k > 0.0 && c0 > 0.0 && duration > 0.0 && n_points >= 2) {
        return Err(Error::InvalidConfig(format!(
            "first-order series needs rate_k > 0, c0 > 0, duration > 0, n_points >= 2 \
             (got {rate_k}, {c0}, {duration}, {n_points})"
        )));
    }
    let xs = linspace(0.0, duration, n_points);
    let ys = xs.iter().map(|&t| c0 * (-rate_k * t).exp()).collect();
    TimeSeries::new(xs, ys)
}

/// Additive Gaussian noise `scale · N(mean, sd)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub mean: f64,
    pub sd: f64,
    pub scale: f64,
    pub seed: u64,
}

impl NoiseSpec {
    /// Mean 0.5, SD 0.1, scale 0.001.
    pub fn benchmark(seed: u64) -> Self {
        NoiseSpec {
            mean: 0.5,
            sd: 0.1,
            scale: 0.001,
            seed,
        }
    }

    pub fn none() -> Self {
        NoiseSpec {
            mean: 0.0,
            sd: 0.0,
            scale: 0.0,
            seed: 0,
        }
    }
}

pub fn add_noise(ts: &TimeSeries, spec: &NoiseSpec) -> Result<TimeSeries> {
    if !(spec.sd >= 0.0 && spec.scale >= 0.0 && spec.mean.is_finite()) {
        return Err(Error::InvalidConfig(format!("invalid noise spec {spec:?}")));
    }
    if spec.scale == 0.0 {
        return Ok(ts.clone());
    }
    let normal = Normal::new(spec.mean, spec.sd)
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ys = ts
        .ys()
        .iter()
        .map(|y| y + spec.scale * normal.sample(&mut rng))
        .collect();
    ts.with_ys(ys)
}

/// Densifies a sparse, strictly positive decay curve: interpolates
/// `ln(y / c0)` linearly onto `n_new` uniform points spanning the sparse
/// abscissae, maps back with `c0 · exp(·)`, then adds noise.
pub fn augment_log_linear(
    sparse: &TimeSeries,
    n_new: usize,
    c0: f64,
    noise: &NoiseSpec,
) -> Result<TimeSeries> {
    if !(c0 > 0.0) {
        return Err(Error::NonPositiveConcentration { index: 0, value: c0 });
    }
    if n_new < 2 {
        return Err(Error::InvalidConfig("n_new must be at least 2".into()));
    }
    if let Some((i, &v)) = sparse.ys().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::NonPositiveConcentration { index: i, value: v });
    }
    let sx = sparse.xs();
    let logs: Vec<f64> = sparse.ys().iter().map(|y| (y / c0).ln()).collect();
    let (lo, hi) = sparse.domain();
    let xs = linspace(lo, hi, n_new);
    let mut seg = 0;
    let ys = xs
        .iter()
        .map(|&x| {
            while seg + 2 < sx.len() && x > sx[seg + 1] {
                seg += 1;
            }
            let (x0, x1) = (sx[seg], sx[seg + 1]);
            let (l0, l1) = (logs[seg], logs[seg + 1]);
            let log = if x == x0 {
                l0
            } else if x == x1 {
                l1
            } else {
                l0 + (l1 - l0) * (x - x0) / (x1 - x0)
            };
            c0 * log.exp()
        })
        .collect::<Vec<_>>();
    // Reproduce the measured endpoints exactly.
    let mut ys = ys;
    ys[0] = sparse.ys()[0];
    ys[n_new - 1] = sparse.ys()[sparse.len() - 1];
    add_noise(&TimeSeries::new(xs, ys)?, noise)
}

/// One photolysis series of the estrogenic-chemical benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EdcComponent {
    pub name: &'static str,
    /// Reference apparent first-order rate constant.
    pub rate: f64,
    /// Sampling times of the sparse series.
    pub times: &'static [f64],
}

const UVA_TIMES: &[f64] = &[0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
const UVC_TIMES: &[f64] = &[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0];

/// The eight components with their reference rate constants.
pub const EDC_COMPONENTS: [EdcComponent; 8] = [
    EdcComponent {
        name: "UVA-E1",
        rate: 0.22400,
        times: UVA_TIMES,
    },
    EdcComponent {
        name: "UVA-E2",
        rate: 0.07440,
        times: UVA_TIMES,
    },
    EdcComponent {
        name: "UVA-EE2",
        rate: 0.01710,
        times: UVA_TIMES,
    },
    EdcComponent {
        name: "UVA-E3",
        rate: 0.09590,
        times: UVA_TIMES,
    },
    EdcComponent {
        name: "UVC-E1",
        rate: 1.30000,
        times: UVC_TIMES,
    },
    EdcComponent {
        name: "UVC-E2",
        rate: 0.30543,
        times: UVC_TIMES,
    },
    EdcComponent {
        name: "UVC-EE2",
        rate: 0.30543,
        times: UVC_TIMES,
    },
    EdcComponent {
        name: "UVC-E3",
        rate: 0.30543,
        times: UVC_TIMES,
    },
];

impl EdcComponent {
    pub fn by_name(name: &str) -> Option<&'static EdcComponent> {
        EDC_COMPONENTS.iter().find(|c| c.name.eq_ignore_ascii_case(name))
    }

    /// Synthetic stand-in for the measured points: normalized concentration
    /// `e^{−k t}` at the component's sampling times.
    pub fn synthetic_sparse(&self) -> TimeSeries {
        let ys = self.times.iter().map(|t| (-self.rate * t).exp()).collect();
        TimeSeries::new(self.times.to_vec(), ys).expect("static sampling grid is valid")
    }

    /// File stem of the shipped CSV, e.g. `uva_e1`.
    pub fn file_stem(&self) -> String {
        self.name.to_ascii_lowercase().replace('-', "_")
    }
}
