use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::McmcConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawsMeta {
    pub seed: u64,
    /// Gibbs updates are always accepted.
    pub acceptance_rate: f64,
    pub config: Option<McmcConfig>,
}

impl Default for DrawsMeta {
    fn default() -> Self {
        DrawsMeta {
            seed: 0,
            acceptance_rate: 1.0,
            config: None,
        }
    }
}

/// Kept draws stored row-major: one row per kept iteration, one column per
/// named parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    names: Vec<String>,
    values: Vec<f64>,
    pub meta: DrawsMeta,
}

impl PosteriorDraws {
    pub fn new(names: Vec<String>, values: Vec<f64>, meta: DrawsMeta) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::Data("posterior draws need at least one parameter".into()));
        }
        if !values.len().is_multiple_of(names.len()) {
            return Err(Error::Data(format!(
                "{} values do not fill rows of {} parameters",
                values.len(),
                names.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite draw for {} in row {}",
                names[pos % names.len()],
                pos / names.len()
            )));
        }
        Ok(PosteriorDraws { names, values, meta })
    }

    pub(crate) fn with_capacity(names: Vec<String>, rows: usize, meta: DrawsMeta) -> Self {
        let cap = rows * names.len();
        PosteriorDraws {
            names,
            values: Vec::with_capacity(cap),
            meta,
        }
    }

    pub(crate) fn push_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.names.len());
        self.values.extend_from_slice(row);
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn n_draws(&self) -> usize {
        self.values.len() / self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_params();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_params())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Data(format!("no parameter named {name:?}")))
    }

    pub fn column_at(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column_at(self.index_of(name)?))
    }

    /// Per-column arithmetic means (compensated summation).
    pub fn means(&self) -> Vec<f64> {
        (0..self.n_params())
            .map(|j| crate::stats::mean(self.rows().map(|r| r[j])))
            .collect()
    }

    pub fn mean(&self, name: &str) -> Result<f64> {
        let j = self.index_of(name)?;
        Ok(crate::stats::mean(self.rows().map(|r| r[j])))
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(&self.names)?;
        for row in self.rows() {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush().map_err(|e| Error::io("<draws>", e))?;
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let names: Vec<String> = input.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut values = Vec::new();
        for (i, record) in input.records().enumerate() {
            let record = record?;
            if record.len() != names.len() {
                return Err(Error::Data(format!("draws line {}: wrong field count", i + 2)));
            }
            for field in record.iter() {
                values.push(
                    field
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Data(format!("draws line {}: bad number {field:?}", i + 2)))?,
                );
            }
        }
        PosteriorDraws::new(names, values, DrawsMeta::default())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
