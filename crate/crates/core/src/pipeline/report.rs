//! Run reports and their plot sidecars.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bspline::RefineStatus;
use crate::characteristic::EigenMode;
use crate::error::{Error, Result};
use crate::nullspace::DiscoveredOde;
use crate::series::TimeSeries;

use super::{Discovery, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub config: RunConfig,
    pub seed: u64,
    /// SHA-256 of the canonical CSV rendering of the input.
    pub input_checksum: String,
    pub n_points: usize,
    pub domain: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaSummary {
    pub best_coefficients: Vec<f64>,
    pub best_loss: f64,
    pub generations_run: usize,
    pub loss_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralSolutionSummary {
    /// Against the input samples.
    pub mse: f64,
    pub modes: Vec<EigenMode>,
    pub amplitudes: Vec<f64>,
    pub dense_grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSummary {
    pub degree: usize,
    pub initial_basis: usize,
    pub knot_count: usize,
    pub rounds: usize,
    pub status: RefineStatus,
    pub max_phi: f64,
    pub sse_history: Vec<f64>,
}

/// Wall-clock seconds per stage. Kept out of the JSON report so reruns
/// compare byte for byte.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub genetic_search: f64,
    pub general_solution: f64,
    pub spline: f64,
    pub null_space: f64,
}

/// Field order here is the key order of the JSON output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub genetic_search: GaSummary,
    pub general_solution: GeneralSolutionSummary,
    pub spline: SplineSummary,
    pub discovered: DiscoveredOde,
    #[serde(skip)]
    pub timings: StageTimings,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("report: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// `order,coefficient,raw,mask` rows.
    pub fn coefficients_csv(&self) -> String {
        let d = &self.discovered;
        let mut out = String::from("order,coefficient,raw,mask\n");
        for (p, c) in d.coefficients.as_slice().iter().enumerate() {
            let mask = d.sparsity_mask.get(p).copied().unwrap_or(0.0);
            writeln!(out, "{p},{c:?},{:?},{mask:?}", d.raw_null_vector[p]).unwrap();
        }
        out
    }

    /// `generation,best_loss` rows.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best_loss\n");
        for (g, l) in self.genetic_search.loss_history.iter().enumerate() {
            writeln!(out, "{},{l:?}", g + 1).unwrap();
        }
        out
    }
}

impl Discovery {
    /// `x,y,prediction,spline` at the input abscissae.
    pub fn fit_csv(&self, data: &TimeSeries) -> Result<String> {
        let pred = crate::gensol::predict(&self.general_solution, data.xs())?;
        let mut out = String::from("x,y,prediction,spline\n");
        for ((x, y), p) in data.xs().iter().zip(data.ys()).zip(pred) {
            let s = self.spline.evaluate(*x)?;
            writeln!(out, "{x:?},{y:?},{p:?},{s:?}").unwrap();
        }
        Ok(out)
    }

    /// Writes `<stem>.json` plus the CSV and timing sidecars; returns the
    /// paths written.
    pub fn write_outputs(&self, data: &TimeSeries, stem: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
        let stem = stem.as_ref();
        if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let timings = serde_json::to_string_pretty(&self.report.timings).expect("timings serialize") + "\n";
        let files = [
            ("json", self.report.to_json()),
            ("timings.json", timings),
            ("fit.csv", self.fit_csv(data)?),
            ("history.csv", self.report.history_csv()),
            ("coefficients.csv", self.report.coefficients_csv()),
        ];
        let mut written = Vec::new();
        for (ext, body) in files {
            let path = with_suffix(stem, ext);
            std::fs::write(&path, body).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            written.push(path);
        }
        Ok(written)
    }
}

pub(crate) fn with_suffix(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
