//! The end-to-end discovery chain and the benchmark reproductions.
//!
//! [`discover`] runs: genetic search over coefficient vectors, general
//! solution on a dense grid, adaptive spline of that prediction, and the
//! null space of the spline's gradient matrix.

mod bench;
mod config;
mod report;

use std::time::Instant;

pub use bench::{
    benchmark_edc, benchmark_spring, cell_seed, load_edc_series, shipped_edc_csv, sparsity_map, EdcOptions,
    EdcRow, EdcTable, SparsityMap, SpringCell, SpringOptions, SpringTable,
};
pub use config::{Profile, RunConfig, KEYS as CONFIG_KEYS};
pub use report::{GaSummary, GeneralSolutionSummary, Provenance, RunReport, SplineSummary, StageTimings};

use crate::bspline::{self, RefineStatus, SplineModel};
use crate::error::{Error, Result, Stage};
use crate::evolve::run_ga;
use crate::gensol::{self, GeneralSolutionModel};
use crate::linalg::linspace;
use crate::nullspace;
use crate::series::TimeSeries;

/// A finished run: the report plus the intermediate curves used for plots.
#[derive(Debug, Clone)]
pub struct Discovery {
    pub report: RunReport,
    pub general_solution: GeneralSolutionModel,
    /// General-solution prediction on the dense grid (the spline's target).
    pub prediction: TimeSeries,
    pub spline: SplineModel,
}

/// Runs the full chain on `data`. Errors raised inside a stage come back
/// wrapped in [`Error::Stage`].
pub fn discover(data: &TimeSeries, cfg: &RunConfig) -> Result<Discovery> {
    cfg.validate()?;
    let p = cfg.candidate_order;
    let mut timings = StageTimings::default();

    let clock = Instant::now();
    let ga = run_ga(data, p, &cfg.ga, cfg.basis_layout).map_err(|e| e.at(Stage::GeneticSearch))?;
    timings.genetic_search = clock.elapsed().as_secs_f64();
    log::info!(
        "genetic search: loss {:e} after {} generations",
        ga.best_loss,
        ga.generations_run
    );

    let clock = Instant::now();
    let (general_solution, mse, prediction) = (|| {
        let model = GeneralSolutionModel::fit(data, &ga.best_coefficients, cfg.basis_layout)?;
        let mse = gensol::mean_squared_error(&gensol::predict(&model, data.xs())?, data.ys());
        let (lo, hi) = data.domain();
        let grid = linspace(lo, hi, cfg.dense_grid);
        let ys = gensol::predict(&model, &grid)?;
        if ys.iter().any(|y| !y.is_finite()) {
            return Err(Error::BasisOverflow);
        }
        Ok((model, mse, TimeSeries::new(grid, ys)?))
    })()
    .map_err(|e| e.at(Stage::GeneralSolution))?;
    timings.general_solution = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let initial_basis = cfg.initial_basis();
    let refinement = (|| {
        let (lo, hi) = prediction.domain();
        let kv = bspline::uniform_knots(lo, hi, p, initial_basis)?;
        let initial = bspline::fit(prediction.xs(), prediction.ys(), &kv)?;
        bspline::refine(
            prediction.xs(),
            prediction.ys(),
            &initial,
            cfg.spline_tau,
            cfg.spline_max_rounds,
        )
    })()
    .map_err(|e| e.at(Stage::Spline))?;
    if refinement.status == RefineStatus::Stalled {
        log::warn!(
            "spline refinement stalled after {} rounds (max phi {:e}); continuing",
            refinement.rounds,
            refinement.max_phi
        );
    }
    timings.spline = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let discovered = (|| {
        let g = nullspace::gradient_matrix(&refinement.model, p, cfg.n_gradient_samples)?;
        let raw = nullspace::null_coefficients(&g, cfg.rank_tol)?;
        nullspace::normalize_and_sparsify(&raw, cfg.pivot, cfg.zero_tol, cfg.one_tol)
    })()
    .map_err(|e| e.at(Stage::NullSpace))?;
    timings.null_space = clock.elapsed().as_secs_f64();

    let (lo, hi) = data.domain();
    let report = RunReport {
        provenance: Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config: cfg.clone(),
            seed: cfg.ga.seed,
            input_checksum: data.checksum(),
            n_points: data.len(),
            domain: [lo, hi],
        },
        genetic_search: GaSummary {
            best_coefficients: ga.best_coefficients.as_slice().to_vec(),
            best_loss: ga.best_loss,
            generations_run: ga.generations_run,
            loss_history: ga.loss_history,
        },
        general_solution: GeneralSolutionSummary {
            mse,
            modes: general_solution.spectrum.modes().to_vec(),
            amplitudes: general_solution.amplitudes.clone(),
            dense_grid: cfg.dense_grid,
        },
        spline: SplineSummary {
            degree: refinement.model.degree(),
            initial_basis,
            knot_count: refinement.model.knot_vector.knots().len(),
            rounds: refinement.rounds,
            status: refinement.status,
            max_phi: refinement.max_phi,
            sse_history: refinement.sse_history.clone(),
        },
        discovered,
        timings,
    };
    Ok(Discovery {
        report,
        general_solution,
        prediction,
        spline: refinement.model,
    })
}
