//! Sampled `(x, y)` series and the `x,y` CSV format used on disk.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Strictly increasing abscissae with matching finite ordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TimeSeries {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::InvalidSeries(format!(
                "{} x values but {} y values",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InvalidSeries("need at least two points".into()));
        }
        if let Some(i) = xs.iter().chain(&ys).position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite value at position {}",
                i % xs.len()
            )));
        }
        if let Some(i) = xs.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSeries(format!(
                "x not strictly increasing at row {}",
                i + 1
            )));
        }
        Ok(TimeSeries { xs, ys })
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn ys(&self) -> &[f64] {
        &self.ys
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    /// Same abscissae, new ordinates.
    pub fn with_ys(&self, ys: Vec<f64>) -> Result<Self> {
        TimeSeries::new(self.xs.clone(), ys)
    }

    /// Serialize as `x,y` CSV. Floats use the shortest representation that
    /// parses back to the identical `f64`.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 40 + 4);
        out.push_str("x,y\n");
        for (x, y) in self.xs.iter().zip(&self.ys) {
            let _ = writeln!(out, "{x:?},{y:?}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| Error::Parse(e.to_string()))?;
        if header.is_empty() {
            return Err(Error::Parse("empty input".into()));
        }
        if header != vec!["x", "y"] {
            let found: Vec<&str> = header.iter().collect();
            return Err(Error::Parse(format!(
                "expected header `x,y`, found `{}`",
                found.join(",")
            )));
        }
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let (x, y): (f64, f64) = record
                .deserialize(None)
                .map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
            xs.push(x);
            ys.push(y);
        }
        TimeSeries::new(xs, ys)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    /// SHA-256 of the canonical CSV serialization, hex encoded.
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_csv().as_bytes()))
    }
}
