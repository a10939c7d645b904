//! Flat key-value run configuration.
//!
//! A config file is a TOML document without tables. Each key maps to one
//! [`RunConfig`] field; the same keys are accepted as `key=value` overrides,
//! where the value is read as a TOML literal and falls back to a bare string.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Value;

use crate::error::{Error, Result};
use crate::evolve::GaConfig;
use crate::gensol::BasisLayout;
use crate::nullspace::{self, Pivot};

/// GA budget presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Full,
    Ci,
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Profile::Full),
            "ci" => Ok(Profile::Ci),
            _ => Err(Error::InvalidConfig(format!("unknown profile `{s}` (full | ci)"))),
        }
    }
}

impl Profile {
    pub fn ga(self) -> GaConfig {
        match self {
            Profile::Full => GaConfig::full(),
            Profile::Ci => GaConfig::ci(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub candidate_order: usize,
    pub profile: Profile,
    pub ga: GaConfig,
    /// Whether `ga.seed` was set explicitly.
    #[serde(skip)]
    pub seed_given: bool,
    pub basis_layout: BasisLayout,
    pub dense_grid: usize,
    /// Initial spline basis count; 0 picks one from the grid density.
    pub spline_initial_basis: usize,
    pub spline_tau: f64,
    pub spline_max_rounds: usize,
    pub n_gradient_samples: usize,
    pub rank_tol: f64,
    pub pivot: Pivot,
    pub zero_tol: f64,
    pub one_tol: f64,
    pub input: Option<String>,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            candidate_order: 5,
            profile: Profile::Full,
            ga: GaConfig::full(),
            seed_given: false,
            basis_layout: BasisLayout::Compact,
            dense_grid: 2000,
            spline_initial_basis: 0,
            spline_tau: crate::bspline::DEFAULT_TAU,
            spline_max_rounds: crate::bspline::DEFAULT_MAX_ROUNDS,
            n_gradient_samples: nullspace::DEFAULT_N_SAMPLES,
            rank_tol: nullspace::DEFAULT_RANK_TOL,
            pivot: Pivot::LowestSurvivingOrder,
            zero_tol: nullspace::DEFAULT_ZERO_TOL,
            one_tol: nullspace::SPRING_ONE_TOL,
            input: None,
            output: None,
        }
    }
}

/// Every key accepted by [`RunConfig::set`].
pub const KEYS: &[&str] = &[
    "candidate_order",
    "profile",
    "population_size",
    "max_generations",
    "function_tolerance",
    "lower_bound",
    "upper_bound",
    "crossover_rate",
    "mutation_rate",
    "elite_fraction",
    "seed",
    "basis_layout",
    "dense_grid",
    "spline_initial_basis",
    "spline_tau",
    "spline_max_rounds",
    "n_gradient_samples",
    "rank_tol",
    "pivot",
    "zero_tol",
    "one_tol",
    "input",
    "output",
];

impl RunConfig {
    /// Spring-mass defaults: order 5, pivot on the lowest surviving order.
    pub fn spring() -> Self {
        Self::default()
    }

    /// Kinetics defaults: order 7, pivot on the first derivative, one_tol 0.1.
    pub fn kinetics() -> Self {
        RunConfig {
            candidate_order: 7,
            pivot: Pivot::OrderK(1),
            one_tol: nullspace::KINETICS_ONE_TOL,
            ..Self::default()
        }
    }

    pub fn with_profile(mut self, profile: Profile) -> Self {
        let seed = self.ga.seed;
        self.profile = profile;
        self.ga = GaConfig { seed, ..profile.ga() };
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ga.seed = seed;
        self.seed_given = true;
        self
    }

    pub fn from_toml_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::default().merge_toml(&text)
    }

    /// Applies the keys of a flat TOML document. `profile` is applied first
    /// so explicit GA keys in the same document win over the preset.
    pub fn merge_toml(self, text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Parse(format!("{e}")))?;
        let mut entries: Vec<(String, Value)> = table.into_iter().collect();
        entries.sort_by_key(|(k, _)| k != "profile");
        let mut cfg = self;
        for (key, value) in entries {
            cfg.set(&key, value)?;
        }
        Ok(cfg)
    }

    /// Applies `key=value` overrides in order.
    pub fn apply_overrides<S: AsRef<str>>(self, overrides: &[S]) -> Result<Self> {
        let mut cfg = self;
        let mut parsed: Vec<(String, Value)> = Vec::with_capacity(overrides.len());
        for raw in overrides {
            let raw = raw.as_ref();
            let (key, value) = raw
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("override `{raw}` is not key=value")))?;
            parsed.push((key.trim().to_string(), parse_literal(value.trim())));
        }
        parsed.sort_by_key(|(k, _)| k != "profile");
        for (key, value) in parsed {
            cfg.set(&key, value)?;
        }
        Ok(cfg)
    }

    /// Sets one key.
    pub fn set(&mut self, key: &str, value: Value) -> Result<()> {
        let bad = |what: &str| Error::InvalidConfig(format!("`{key}` expects {what}, got {value}"));
        let uint = |v: &Value| {
            v.as_integer()
                .and_then(|i| usize::try_from(i).ok())
                .ok_or_else(|| bad("a non-negative integer"))
        };
        let float = |v: &Value| {
            v.as_float()
                .or_else(|| v.as_integer().map(|i| i as f64))
                .ok_or_else(|| bad("a number"))
        };
        let string = |v: &Value| v.as_str().map(str::to_string).ok_or_else(|| bad("a string"));
        match key {
            "candidate_order" => self.candidate_order = uint(&value)?,
            "profile" => {
                let profile = string(&value)?.parse()?;
                *self = self.clone().with_profile(profile);
            }
            "population_size" => self.ga.population_size = uint(&value)?,
            "max_generations" => self.ga.max_generations = uint(&value)?,
            "function_tolerance" => self.ga.function_tolerance = float(&value)?,
            "lower_bound" => self.ga.lower_bound = float(&value)?,
            "upper_bound" => self.ga.upper_bound = float(&value)?,
            "crossover_rate" => self.ga.crossover_rate = float(&value)?,
            "mutation_rate" => self.ga.mutation_rate = float(&value)?,
            "elite_fraction" => self.ga.elite_fraction = float(&value)?,
            "seed" => {
                let seed = value
                    .as_integer()
                    .and_then(|i| u64::try_from(i).ok())
                    .or_else(|| value.as_str().and_then(|s| s.parse().ok()))
                    .ok_or_else(|| bad("a non-negative integer"))?;
                *self = self.clone().with_seed(seed);
            }
            "basis_layout" => self.basis_layout = string(&value)?.parse()?,
            "dense_grid" => self.dense_grid = uint(&value)?,
            "spline_initial_basis" => self.spline_initial_basis = uint(&value)?,
            "spline_tau" => self.spline_tau = float(&value)?,
            "spline_max_rounds" => self.spline_max_rounds = uint(&value)?,
            "n_gradient_samples" => self.n_gradient_samples = uint(&value)?,
            "rank_tol" => self.rank_tol = float(&value)?,
            "pivot" => {
                self.pivot = string(&value)?
                    .parse()
                    .map_err(|_| bad("`lowest` or `order:<k>`"))?
            }
            "zero_tol" => self.zero_tol = float(&value)?,
            "one_tol" => self.one_tol = float(&value)?,
            "input" => self.input = Some(string(&value)?),
            "output" => self.output = Some(string(&value)?),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "unknown key `{key}` (expected one of: {})",
                    KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.ga.validate()?;
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.candidate_order < 1 {
            return fail("candidate_order must be >= 1".into());
        }
        if self.dense_grid < self.candidate_order + 2 {
            return fail(format!("dense_grid {} is too small", self.dense_grid));
        }
        if self.spline_initial_basis != 0 && self.spline_initial_basis < self.candidate_order + 1 {
            return fail(format!(
                "spline_initial_basis must be 0 (auto) or >= candidate_order + 1 = {}",
                self.candidate_order + 1
            ));
        }
        if !(self.spline_tau > 0.0) {
            return fail("spline_tau must be positive".into());
        }
        if self.n_gradient_samples < self.candidate_order + 1 {
            return fail("n_gradient_samples must be >= candidate_order + 1".into());
        }
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return fail("rank_tol must lie in (0, 1)".into());
        }
        if !(self.zero_tol >= 0.0 && self.zero_tol < self.one_tol) {
            return fail("need 0 <= zero_tol < one_tol".into());
        }
        if let Pivot::OrderK(k) = self.pivot {
            if k > self.candidate_order {
                return fail(format!("pivot order {k} exceeds candidate_order"));
            }
        }
        Ok(())
    }

    /// Spline basis count actually used for the initial fit.
    pub fn initial_basis(&self) -> usize {
        if self.spline_initial_basis != 0 {
            return self.spline_initial_basis;
        }
        // Spans holding about two spline pieces' worth of grid points each.
        let degree = self.candidate_order;
        let spans = (self.dense_grid / (2 * (degree + 1))).max(1);
        spans + degree
    }

    /// Flat TOML rendering; reading it back gives the same config.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        let q = |s: &str| Value::String(s.to_string()).to_string();
        line("candidate_order", self.candidate_order.to_string());
        line(
            "profile",
            q(match self.profile {
                Profile::Full => "full",
                Profile::Ci => "ci",
            }),
        );
        line("population_size", self.ga.population_size.to_string());
        line("max_generations", self.ga.max_generations.to_string());
        line(
            "function_tolerance",
            Value::Float(self.ga.function_tolerance).to_string(),
        );
        line("lower_bound", Value::Float(self.ga.lower_bound).to_string());
        line("upper_bound", Value::Float(self.ga.upper_bound).to_string());
        line("crossover_rate", Value::Float(self.ga.crossover_rate).to_string());
        line("mutation_rate", Value::Float(self.ga.mutation_rate).to_string());
        line("elite_fraction", Value::Float(self.ga.elite_fraction).to_string());
        if self.seed_given {
            line("seed", self.ga.seed.to_string());
        }
        line("basis_layout", q(&self.basis_layout.to_string()));
        line("dense_grid", self.dense_grid.to_string());
        line("spline_initial_basis", self.spline_initial_basis.to_string());
        line("spline_tau", Value::Float(self.spline_tau).to_string());
        line("spline_max_rounds", self.spline_max_rounds.to_string());
        line("n_gradient_samples", self.n_gradient_samples.to_string());
        line("rank_tol", Value::Float(self.rank_tol).to_string());
        line("pivot", q(&self.pivot.to_string()));
        line("zero_tol", Value::Float(self.zero_tol).to_string());
        line("one_tol", Value::Float(self.one_tol).to_string());
        if let Some(input) = &self.input {
            line("input", q(input));
        }
        if let Some(output) = &self.output {
            line("output", q(output));
        }
        out
    }
}

fn parse_literal(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}
