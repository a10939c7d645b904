//! Real-valued genetic algorithm over candidate coefficient vectors.
//!
//! Operators: stochastic uniform selection on rank-scaled fitness,
//! intermediate crossover, adaptive feasible mutation and elitism. Fitness
//! evaluations within a generation run on the rayon pool; each result lands
//! in its individual's slot, so the outcome depends only on the seed.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characteristic::CoefficientVector;
use crate::error::{Error, Result};
use crate::gensol::{fitness_slice, BasisLayout};
use crate::series::TimeSeries;

/// Mutation step (standard deviation) at the start of a run, as a fraction
/// of the bound width. Shrinks linearly to zero over the run.
const INITIAL_STEP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    pub function_tolerance: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elite_fraction: f64,
    pub seed: u64,
}

impl GaConfig {
    /// Population 750, 300 generations, tolerance 1e-28, bounds ±10.
    pub fn full() -> Self {
        GaConfig {
            population_size: 750,
            max_generations: 300,
            function_tolerance: 1e-28,
            lower_bound: -10.0,
            upper_bound: 10.0,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            elite_fraction: 0.05,
            seed: 0,
        }
    }

    /// Reduced budget for CI: population 200, 100 generations.
    pub fn ci() -> Self {
        GaConfig {
            population_size: 200,
            max_generations: 100,
            ..Self::full()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |r: f64| (0.0..=1.0).contains(&r);
        let problems = [
            (self.population_size < 2, "population_size must be >= 2"),
            (self.max_generations < 1, "max_generations must be >= 1"),
            (
                !(self.lower_bound < self.upper_bound)
                    || !self.lower_bound.is_finite()
                    || !self.upper_bound.is_finite(),
                "lower_bound must be below upper_bound",
            ),
            (!unit(self.crossover_rate), "crossover_rate must lie in [0, 1]"),
            (!unit(self.mutation_rate), "mutation_rate must lie in [0, 1]"),
            (!unit(self.elite_fraction), "elite_fraction must lie in [0, 1]"),
            (self.function_tolerance.is_nan(), "function_tolerance is NaN"),
        ];
        match problems.iter().find(|(bad, _)| *bad) {
            Some((_, msg)) => Err(Error::InvalidConfig((*msg).into())),
            None => Ok(()),
        }
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            lower: self.lower_bound,
            upper: self.upper_bound,
        }
    }

    fn elite_count(&self) -> usize {
        let n = (self.elite_fraction * self.population_size as f64).ceil() as usize;
        n.min(self.population_size - 1)
    }
}

impl Default for GaConfig {
    fn default() -> Self {
        Self::full()
    }
}

/// Box constraint applied to every gene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lower, self.upper)
    }

    fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaResult {
    pub best_coefficients: CoefficientVector,
    pub best_loss: f64,
    pub generations_run: usize,
    /// Best loss after each evaluated generation.
    pub loss_history: Vec<f64>,
}

/// `child_i = a_i + u_i · ratio · (b_i − a_i)`, `u_i ~ U[0, 1]`, clamped.
pub fn intermediate_crossover(
    parent_a: &[f64],
    parent_b: &[f64],
    ratio: f64,
    bounds: &Bounds,
    rng: &mut impl Rng,
) -> Vec<f64> {
    parent_a
        .iter()
        .zip(parent_b)
        .map(|(&a, &b)| {
            let u: f64 = rng.random();
            bounds.clamp(a + u * ratio * (b - a))
        })
        .collect()
}

/// Gaussian step along the genes picked with probability `rate` (at least
/// one gene always moves), scaled by `1 − progress` and shortened so the
/// result stays inside `bounds`.
pub fn adaptive_feasible_mutation(
    individual: &[f64],
    bounds: &Bounds,
    progress: f64,
    rate: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let n = individual.len();
    let forced = rng.random_range(0..n);
    let sigma = (1.0 - progress.clamp(0.0, 1.0)) * INITIAL_STEP_FRACTION * bounds.width();
    let direction: Vec<f64> = (0..n)
        .map(|i| {
            let picked = i == forced || rng.random::<f64>() < rate;
            let z: f64 = rng.sample(StandardNormal);
            if picked {
                sigma * z
            } else {
                0.0
            }
        })
        .collect();
    // Largest t ∈ [0, 1] keeping x + t·d feasible.
    let mut t: f64 = 1.0;
    for (&x, &d) in individual.iter().zip(&direction) {
        if d > 0.0 {
            t = t.min((bounds.upper - x) / d);
        } else if d < 0.0 {
            t = t.min((bounds.lower - x) / d);
        }
    }
    let t = t.max(0.0);
    individual
        .iter()
        .zip(&direction)
        .map(|(&x, &d)| bounds.clamp(x + t * d))
        .collect()
}

/// Fractional ranks (1 = lowest loss); ties share their average rank.
fn fractional_ranks(losses: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; losses.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && losses[order[j + 1]] == losses[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Expected selection counts `∝ 1/√rank`, summing to `count`.
fn rank_expectations(losses: &[f64], count: usize) -> Vec<f64> {
    let scores: Vec<f64> = fractional_ranks(losses).iter().map(|r| 1.0 / r.sqrt()).collect();
    let total: f64 = scores.iter().sum();
    scores.iter().map(|s| s / total * count as f64).collect()
}

/// Lays the rank-scaled expectations end to end on a line of length `count`
/// and walks it in unit steps from one random offset in `[0, 1)`.
pub fn stochastic_uniform_selection(losses: &[f64], count: usize, rng: &mut impl Rng) -> Vec<usize> {
    let offset: f64 = rng.random();
    select_with_offset(losses, count, offset)
}

pub(crate) fn select_with_offset(losses: &[f64], count: usize, offset: f64) -> Vec<usize> {
    let expectations = rank_expectations(losses, count);
    let mut out = Vec::with_capacity(count);
    let mut edge = 0.0;
    let mut idx = 0;
    for step in 0..count {
        let pos = offset + step as f64;
        while idx + 1 < expectations.len() && edge + expectations[idx] <= pos {
            edge += expectations[idx];
            idx += 1;
        }
        out.push(idx);
    }
    out
}

/// Minimizes `objective` over `[lb, ub]^dim`.
pub fn minimize<F>(dim: usize, config: &GaConfig, objective: F) -> Result<(Vec<f64>, GaTrace)>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    config.validate()?;
    if dim == 0 {
        return Err(Error::InvalidConfig("search dimension must be positive".into()));
    }
    let bounds = config.bounds();
    let n = config.population_size;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut population: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| rng.random_range(bounds.lower..=bounds.upper))
                .collect()
        })
        .collect();
    // Losses of carried-over elites are reused instead of recomputed.
    let mut known: Vec<Option<f64>> = vec![None; n];

    let n_elite = config.elite_count();
    let n_children = n - n_elite;
    let n_cross = (config.crossover_rate * n_children as f64).round() as usize;
    let n_mut = n_children - n_cross;

    let mut history = Vec::new();
    let mut best = (f64::INFINITY, Vec::new());
    let mut generations = 0;

    for gen in 0..config.max_generations {
        let losses: Vec<f64> = population
            .par_iter()
            .zip(known.par_iter())
            .map(|(ind, k)| k.unwrap_or_else(|| sanitize(objective(ind))))
            .collect();
        generations = gen + 1;

        let gen_best = (0..n)
            .min_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)))
            .expect("population is non-empty");
        if losses[gen_best] < best.0 || best.1.is_empty() {
            best = (losses[gen_best], population[gen_best].clone());
        }
        history.push(best.0);
        if best.0 < config.function_tolerance || gen + 1 == config.max_generations {
            break;
        }

        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));

        let mut parents = stochastic_uniform_selection(&losses, 2 * n_cross + n_mut, &mut rng);
        parents.shuffle(&mut rng);

        let progress = gen as f64 / config.max_generations as f64;
        let mut next = Vec::with_capacity(n);
        let mut next_known = Vec::with_capacity(n);
        for &e in &order[..n_elite] {
            next.push(population[e].clone());
            next_known.push(Some(losses[e]));
        }
        for pair in parents[..2 * n_cross].chunks_exact(2) {
            let child =
                intermediate_crossover(&population[pair[0]], &population[pair[1]], 1.0, &bounds, &mut rng);
            next.push(child);
            next_known.push(None);
        }
        for &p in &parents[2 * n_cross..] {
            let child =
                adaptive_feasible_mutation(&population[p], &bounds, progress, config.mutation_rate, &mut rng);
            next.push(child);
            next_known.push(None);
        }
        population = next;
        known = next_known;
    }

    Ok((
        best.1,
        GaTrace {
            best_loss: best.0,
            generations_run: generations,
            loss_history: history,
        },
    ))
}

fn sanitize(loss: f64) -> f64 {
    if loss.is_nan() {
        f64::INFINITY
    } else {
        loss
    }
}

/// Summary of a [`minimize`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct GaTrace {
    pub best_loss: f64,
    pub generations_run: usize,
    pub loss_history: Vec<f64>,
}

/// Searches order-`P` coefficient vectors for the best general-solution fit.
pub fn run_ga(
    data: &TimeSeries,
    ode_order: usize,
    config: &GaConfig,
    layout: BasisLayout,
) -> Result<GaResult> {
    if ode_order < 1 {
        return Err(Error::InvalidConfig("ODE order must be >= 1".into()));
    }
    let (best, trace) = minimize(ode_order + 1, config, |c| fitness_slice(data, c, layout))?;
    Ok(GaResult {
        best_coefficients: CoefficientVector::new(best)?,
        best_loss: trace.best_loss,
        generations_run: trace.generations_run,
        loss_history: trace.loss_history,
    })
}
