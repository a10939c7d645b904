//! Benchmark tables: spring-mass regimes with and without noise, and the
//! photolysis rate constants.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datagen::{
    add_noise, augment_log_linear, spring_mass_series, EdcComponent, NoiseSpec, Regime, SpringParams,
    EDC_COMPONENTS,
};
use crate::error::{Error, Result};
use crate::nullspace::sparsity_mask;
use crate::series::TimeSeries;

use super::{discover, RunConfig, RunReport};

/// Seed of benchmark cell `index`: `base + index`.
pub fn cell_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// Noise draws use a stream decorrelated from the GA seed of the same cell.
fn noise_seed(cell: u64) -> u64 {
    cell ^ 0x9E37_79B9_7F4A_7C15
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpringOptions {
    /// Applied to every cell; `ga.seed` is the base seed.
    pub config: RunConfig,
    /// Restrict to these regimes (all three when empty).
    pub regimes: Vec<Regime>,
    /// Restrict to one noise setting (both when `None`).
    pub noise: Option<bool>,
    /// Noise for the noisy cells; the seed is replaced per cell.
    pub noise_spec: NoiseSpec,
}

impl SpringOptions {
    pub fn new(config: RunConfig) -> Self {
        SpringOptions {
            config,
            regimes: Vec::new(),
            noise: None,
            noise_spec: NoiseSpec::benchmark(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringCell {
    pub regime: Regime,
    pub noise: bool,
    pub seed: u64,
    /// `(k, b, m) / k`, indexed by derivative order.
    pub truth: Vec<f64>,
    pub coefficients: Option<Vec<f64>>,
    /// Relative error of orders 0–2 against `truth`.
    pub relative_errors: Option<Vec<f64>>,
    pub sparsity_mask: Option<Vec<f64>>,
    pub error: Option<String>,
    pub report: Option<RunReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpringTable {
    pub base_seed: u64,
    pub cells: Vec<SpringCell>,
}

const REGIMES: [Regime; 3] = [Regime::Overdamped, Regime::Critical, Regime::Underdamped];

fn params_for(regime: Regime) -> SpringParams {
    match regime {
        Regime::Overdamped => SpringParams::benchmark_overdamped(),
        Regime::Critical => SpringParams::benchmark_critical(),
        Regime::Underdamped => SpringParams::benchmark_underdamped(),
    }
}

/// The six regime × noise cells. Cell `i` (regimes in the order overdamped,
/// critical, underdamped; clean before noisy) runs with seed `base + i`.
/// A failing cell records its error and the table continues.
pub fn benchmark_spring(opts: &SpringOptions) -> Result<SpringTable> {
    opts.config.validate()?;
    let base = opts.config.ga.seed;
    let mut cells = Vec::new();
    for (r, &regime) in REGIMES.iter().enumerate() {
        if !opts.regimes.is_empty() && !opts.regimes.contains(&regime) {
            continue;
        }
        for (n, noisy) in [false, true].into_iter().enumerate() {
            if opts.noise.is_some_and(|want| want != noisy) {
                continue;
            }
            let seed = cell_seed(base, 2 * r + n);
            let noise = NoiseSpec {
                seed: noise_seed(seed),
                ..opts.noise_spec
            };
            cells.push(spring_cell(regime, noisy.then_some(noise), seed, &opts.config)?);
        }
    }
    Ok(SpringTable {
        base_seed: base,
        cells,
    })
}

fn spring_cell(regime: Regime, noise: Option<NoiseSpec>, seed: u64, cfg: &RunConfig) -> Result<SpringCell> {
    let params = params_for(regime);
    let clean = spring_mass_series(&params)?;
    let noisy = noise.is_some();
    let data = match noise {
        Some(spec) => add_noise(&clean, &spec)?,
        None => clean,
    };
    let [k, b, m] = params.coefficients();
    let truth = vec![1.0, b / k, m / k];
    let mut cfg = cfg.clone().with_seed(seed);
    // Per-cell runs read generated data and write nothing themselves.
    cfg.input = None;
    cfg.output = None;
    log::info!("spring cell {} noise={noisy} seed={seed}", regime.name());
    let mut cell = SpringCell {
        regime,
        noise: noisy,
        seed,
        truth: truth.clone(),
        coefficients: None,
        relative_errors: None,
        sparsity_mask: None,
        error: None,
        report: None,
    };
    match discover(&data, &cfg) {
        Ok(d) => {
            let c = d.report.discovered.coefficients.as_slice().to_vec();
            cell.relative_errors = Some(
                truth
                    .iter()
                    .zip(&c)
                    .map(|(t, got)| (got - t).abs() / t.abs())
                    .collect(),
            );
            cell.coefficients = Some(c);
            cell.sparsity_mask = Some(d.report.discovered.sparsity_mask.clone());
            cell.report = Some(d.report);
        }
        Err(e) => {
            log::warn!("spring cell {} noise={noisy} failed: {e}", regime.name());
            cell.error = Some(e.to_string());
        }
    }
    Ok(cell)
}

impl SpringTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    /// One row per cell: regime, noise flag, seed, then `c0..cP` (empty on failure).
    pub fn to_csv(&self) -> String {
        let width = self
            .cells
            .iter()
            .filter_map(|c| c.coefficients.as_ref().map(Vec::len))
            .max()
            .unwrap_or(0);
        let mut header: Vec<String> = vec!["regime".into(), "noise".into(), "seed".into()];
        header.extend((0..width).map(|p| format!("c{p}")));
        header.push("error".into());
        let rows = self.cells.iter().map(|cell| {
            let mut row = vec![
                cell.regime.name().to_string(),
                cell.noise.to_string(),
                cell.seed.to_string(),
            ];
            row.extend((0..width).map(|p| {
                cell.coefficients
                    .as_ref()
                    .and_then(|c| c.get(p))
                    .map(|v| format!("{v:?}"))
                    .unwrap_or_default()
            }));
            row.push(cell.error.clone().unwrap_or_default());
            row
        });
        render_csv(header, rows)
    }
}

fn render_csv(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

macro_rules! shipped {
    ($($stem:literal),* $(,)?) => {
        /// Bundled synthetic sparse series for `component`.
        pub fn shipped_edc_csv(component: &EdcComponent) -> &'static str {
            match component.file_stem().as_str() {
                $($stem => include_str!(concat!("../../data/edc/", $stem, ".csv")),)*
                other => unreachable!("no bundled series for {other}"),
            }
        }
    };
}

shipped!("uva_e1", "uva_e2", "uva_ee2", "uva_e3", "uvc_e1", "uvc_e2", "uvc_ee2", "uvc_e3");

/// Sparse series for `component`, from `dir/<stem>.csv` when a directory is
/// given, else the bundled copy.
pub fn load_edc_series(component: &EdcComponent, dir: Option<&Path>) -> Result<TimeSeries> {
    match dir {
        Some(dir) => TimeSeries::read_csv(dir.join(format!("{}.csv", component.file_stem()))),
        None => TimeSeries::from_csv(shipped_edc_csv(component)),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdcOptions {
    /// Applied to every component; `ga.seed` is the base seed.
    pub config: RunConfig,
    /// Points after log-linear augmentation.
    pub n_new: usize,
    pub noise: bool,
    pub data_dir: Option<PathBuf>,
    /// Restrict to these component names (all when empty).
    pub components: Vec<String>,
}

impl EdcOptions {
    pub fn new(config: RunConfig) -> Self {
        EdcOptions {
            config,
            n_new: 1000,
            noise: true,
            data_dir: None,
            components: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdcRow {
    pub component: String,
    pub seed: u64,
    pub reference_rate: f64,
    /// Normalized zeroth-order coefficient.
    pub recovered_rate: Option<f64>,
    pub squared_error: Option<f64>,
    pub coefficients: Option<Vec<f64>>,
    pub sparsity_mask: Option<Vec<f64>>,
    pub error: Option<String>,
    pub report: Option<RunReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdcTable {
    pub base_seed: u64,
    pub rows: Vec<EdcRow>,
}

/// Rate constants for each component: augment the sparse series, discover,
/// read the rate from the order-0 coefficient (pivot on order 1).
pub fn benchmark_edc(opts: &EdcOptions) -> Result<EdcTable> {
    opts.config.validate()?;
    for name in &opts.components {
        if EdcComponent::by_name(name).is_none() {
            return Err(Error::InvalidConfig(format!("unknown EDC component `{name}`")));
        }
    }
    let base = opts.config.ga.seed;
    let mut rows = Vec::new();
    for (i, comp) in EDC_COMPONENTS.iter().enumerate() {
        if !opts.components.is_empty() && !opts.components.iter().any(|n| n.eq_ignore_ascii_case(comp.name)) {
            continue;
        }
        let seed = cell_seed(base, i);
        let sparse = load_edc_series(comp, opts.data_dir.as_deref())?;
        let noise = if opts.noise {
            NoiseSpec::benchmark(noise_seed(seed))
        } else {
            NoiseSpec::none()
        };
        let data = augment_log_linear(&sparse, opts.n_new, sparse.ys()[0], &noise)?;
        let mut cfg = opts.config.clone().with_seed(seed);
        cfg.input = None;
        cfg.output = None;
        log::info!("edc component {} seed={seed}", comp.name);
        let mut row = EdcRow {
            component: comp.name.to_string(),
            seed,
            reference_rate: comp.rate,
            recovered_rate: None,
            squared_error: None,
            coefficients: None,
            sparsity_mask: None,
            error: None,
            report: None,
        };
        match discover(&data, &cfg) {
            Ok(d) => {
                let c = d.report.discovered.coefficients.as_slice().to_vec();
                row.recovered_rate = Some(c[0]);
                row.squared_error = Some((c[0] - comp.rate).powi(2));
                row.coefficients = Some(c);
                row.sparsity_mask = Some(d.report.discovered.sparsity_mask.clone());
                row.report = Some(d.report);
            }
            Err(e) => {
                log::warn!("edc component {} failed: {e}", comp.name);
                row.error = Some(e.to_string());
            }
        }
        rows.push(row);
    }
    Ok(EdcTable {
        base_seed: base,
        rows,
    })
}

impl EdcTable {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let header = [
            "component",
            "seed",
            "reference_rate",
            "recovered_rate",
            "squared_error",
            "error",
        ];
        let opt = |v: Option<f64>| v.map(|v| format!("{v:?}")).unwrap_or_default();
        let rows = self.rows.iter().map(|r| {
            vec![
                r.component.clone(),
                r.seed.to_string(),
                format!("{:?}", r.reference_rate),
                opt(r.recovered_rate),
                opt(r.squared_error),
                r.error.clone().unwrap_or_default(),
            ]
        });
        render_csv(header.map(String::from).to_vec(), rows)
    }
}

/// Stacked sparsity rows, one per labelled report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsityMap {
    pub candidate_order: usize,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl SparsityMap {
    /// `label,c0..cP`.
    pub fn to_csv(&self) -> String {
        let mut header = vec!["label".to_string()];
        header.extend((0..=self.candidate_order).map(|p| format!("c{p}")));
        let rows = self.rows.iter().map(|(label, row)| {
            std::iter::once(label.clone())
                .chain(row.iter().map(|v| format!("{v:?}")))
                .collect()
        });
        render_csv(header, rows)
    }
}

/// Applies the threshold transform to each report's normalized coefficients.
pub fn sparsity_map(reports: &[(String, RunReport)], zero_tol: f64, one_tol: f64) -> Result<SparsityMap> {
    let order = match reports.first() {
        Some((_, r)) => r.provenance.config.candidate_order,
        None => return Err(Error::InvalidConfig("no reports given".into())),
    };
    let mut rows = Vec::with_capacity(reports.len());
    for (label, r) in reports {
        let c = r.discovered.coefficients.as_slice();
        if c.len() != order + 1 {
            return Err(Error::InvalidConfig(format!(
                "report `{label}` has order {} but the first has order {order}",
                c.len() - 1
            )));
        }
        rows.push((label.clone(), sparsity_mask(c, zero_tol, one_tol)));
    }
    Ok(SparsityMap {
        candidate_order: order,
        rows,
    })
}
