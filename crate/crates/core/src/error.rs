use thiserror::Error;

/// Everything that can go wrong between raw samples and a discovered ODE.
///
/// The first four variants are produced while scoring GA candidates and are
/// normally absorbed into the fitness penalty rather than surfaced.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("leading coefficient is zero (|C_P| = {value:e})")]
    LeadingCoefficientZero { value: f64 },
    #[error("eigenvalue iteration did not converge")]
    EigenSolveFailure,
    #[error("eigenfunction basis overflowed")]
    BasisOverflow,
    #[error("eigenfunction basis has no singular value above cutoff")]
    DegenerateBasis,

    #[error("invalid coefficient vector: {0}")]
    InvalidCoefficients(String),
    #[error("invalid time series: {0}")]
    InvalidSeries(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid domain [{min}, {max}]")]
    InvalidDomain { min: f64, max: f64 },
    #[error("invalid knot vector: {0}")]
    InvalidKnots(String),
    #[error("basis index {index} out of range for {count} basis functions of order {order}")]
    IndexOutOfRange {
        index: usize,
        order: usize,
        count: usize,
    },
    #[error("basis function {index} has no supporting data point")]
    RankDeficientFit { index: usize },
    #[error("refinement stopped after {rounds} rounds with max interval error {max_phi:e}")]
    RefinementStalled { rounds: usize, max_phi: f64 },
    #[error("x = {x} lies outside the spline domain [{min}, {max}]")]
    OutsideDomain { x: f64, min: f64, max: f64 },

    #[error("candidate order {order} exceeds spline degree {degree}")]
    OrderExceedsDegree { order: usize, degree: usize },
    #[error("every coefficient is below the zero tolerance {zero_tol:e}")]
    AllCoefficientsBelowTolerance { zero_tol: f64 },

    #[error("concentration {value} at index {index} is not positive")]
    NonPositiveConcentration { index: usize, value: f64 },

    #[error("{stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Pipeline stages, used to tag errors that escape [`crate::pipeline::discover`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    GeneticSearch,
    GeneralSolution,
    Spline,
    NullSpace,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::GeneticSearch => "genetic_search",
            Stage::GeneralSolution => "general_solution",
            Stage::Spline => "spline",
            Stage::NullSpace => "null_space",
        })
    }
}

impl Error {
    pub(crate) fn at(self, stage: Stage) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerics (as opposed to bad input or config).
    /// Anything raised inside a pipeline stage counts as numerical, since
    /// inputs and config are validated before the first stage runs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Stage { .. }
                | Error::LeadingCoefficientZero { .. }
                | Error::EigenSolveFailure
                | Error::BasisOverflow
                | Error::DegenerateBasis
                | Error::RankDeficientFit { .. }
                | Error::RefinementStalled { .. }
                | Error::OrderExceedsDegree { .. }
                | Error::AllCoefficientsBelowTolerance { .. }
        )
    }

    /// Innermost error with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
