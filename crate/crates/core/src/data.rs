//! Combined two-study dataset and its delimited text format.
//!
//! A file has one header row:
//!
//! ```text
//! study,z1_1..z1_L,z2_1..z2_K,z3_1..z3_M,x1,x2,y1,y2
//! ```
//!
//! `study` is `A` or `B`, genotype counts are integers in {0, 1, 2}, and the
//! exposures of study-B rows are the literal token `NA`. Reals are written in
//! Rust's shortest round-trip form, so write → read is lossless.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{RandomEffects, SimConfig};

pub const MISSING_TOKEN: &str = "NA";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Study {
    A,
    B,
}

impl Study {
    pub fn index(self) -> usize {
        match self {
            Study::A => 0,
            Study::B => 1,
        }
    }
}

impl fmt::Display for Study {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Study::A => "A",
            Study::B => "B",
        })
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Study::A),
            "B" | "b" => Ok(Study::B),
            other => Err(Error::Data(format!("unknown study label {other:?}"))),
        }
    }
}

/// Number of instruments in each group: `l` for X1 only, `k` for X2 only,
/// `m` shared by both exposures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IvCounts {
    pub l: usize,
    pub k: usize,
    pub m: usize,
}

impl Default for IvCounts {
    fn default() -> Self {
        IvCounts { l: 15, k: 15, m: 5 }
    }
}

impl IvCounts {
    pub fn total(&self) -> usize {
        self.l + self.k + self.m
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub study: Study,
    pub z1: Vec<u8>,
    pub z2: Vec<u8>,
    pub z3: Vec<u8>,
    pub x1: Option<f64>,
    pub x2: Option<f64>,
    pub y1: f64,
    pub y2: f64,
}

/// Simulation-only values kept alongside a row for oracle checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatentRow {
    pub u: f64,
    pub x1: f64,
    pub x2: f64,
}

/// Provenance of a simulated dataset. `latent` is aligned with `rows`.
#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub config: SimConfig,
    pub random_effects: RandomEffects,
    pub latent: Vec<LatentRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinedDataset {
    pub ivs: IvCounts,
    pub rows: Vec<Row>,
    pub truth: Option<Truth>,
}

impl CombinedDataset {
    pub fn new(ivs: IvCounts, rows: Vec<Row>) -> Result<Self> {
        let data = CombinedDataset { ivs, rows, truth: None };
        data.validate()?;
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn count(&self, study: Study) -> usize {
        self.rows.iter().filter(|r| r.study == study).count()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            let widths = [
                ("z1", row.z1.len(), self.ivs.l),
                ("z2", row.z2.len(), self.ivs.k),
                ("z3", row.z3.len(), self.ivs.m),
            ];
            for (name, got, want) in widths {
                if got != want {
                    return Err(Error::Data(format!(
                        "row {i}: {name} has {got} genotypes, expected {want}"
                    )));
                }
            }
            if row.z1.iter().chain(&row.z2).chain(&row.z3).any(|&g| g > 2) {
                return Err(Error::Data(format!("row {i}: genotype count outside {{0,1,2}}")));
            }
            let observed = row.x1.is_some() && row.x2.is_some();
            let missing = row.x1.is_none() && row.x2.is_none();
            match row.study {
                Study::A if !observed => return Err(Error::Data(format!("row {i}: study A row lacks exposures"))),
                Study::B if !missing => return Err(Error::Data(format!("row {i}: study B row has exposures"))),
                _ => {}
            }
            let reals = [row.y1, row.y2, row.x1.unwrap_or(0.0), row.x2.unwrap_or(0.0)];
            if reals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("row {i}: non-finite value")));
            }
        }
        if let Some(truth) = &self.truth {
            if truth.latent.len() != self.rows.len() {
                return Err(Error::Data("latent truth not aligned with rows".into()));
            }
        }
        Ok(())
    }

    /// A heterogeneity fit needs both studies represented.
    pub fn require_both_studies(&self) -> Result<()> {
        let (a, b) = (self.count(Study::A), self.count(Study::B));
        if a == 0 || b == 0 {
            return Err(Error::Data(format!(
                "heterogeneity fit needs rows from both studies (A: {a}, B: {b})"
            )));
        }
        Ok(())
    }

    /// Same rows with the simulation truth stripped.
    pub fn public(&self) -> CombinedDataset {
        CombinedDataset {
            ivs: self.ivs,
            rows: self.rows.clone(),
            truth: None,
        }
    }

    pub fn header(ivs: &IvCounts) -> Vec<String> {
        let mut cols = vec!["study".to_string()];
        for (prefix, count) in [("z1", ivs.l), ("z2", ivs.k), ("z3", ivs.m)] {
            cols.extend((1..=count).map(|j| format!("{prefix}_{j}")));
        }
        cols.extend(["x1", "x2", "y1", "y2"].map(String::from));
        cols
    }

    pub fn write_to<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(Self::header(&self.ivs))?;
        let mut record = Vec::with_capacity(self.ivs.total() + 5);
        for row in &self.rows {
            record.clear();
            record.push(row.study.to_string());
            record.extend(row.z1.iter().chain(&row.z2).chain(&row.z3).map(|g| g.to_string()));
            for x in [row.x1, row.x2] {
                record.push(x.map_or_else(|| MISSING_TOKEN.to_string(), |v| v.to_string()));
            }
            record.push(row.y1.to_string());
            record.push(row.y2.to_string());
            out.write_record(&record)?;
        }
        out.flush().map_err(|e| Error::io("<dataset>", e))?;
        Ok(())
    }

    pub fn read_from<R: Read>(reader: R) -> Result<Self> {
        let mut input = csv::Reader::from_reader(reader);
        let header: Vec<String> = input.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let count = |prefix: &str| header.iter().filter(|c| c.starts_with(&format!("{prefix}_"))).count();
        let ivs = IvCounts {
            l: count("z1"),
            k: count("z2"),
            m: count("z3"),
        };
        if header != Self::header(&ivs) {
            return Err(Error::Data(format!(
                "unexpected header; expected {}",
                Self::header(&ivs).join(",")
            )));
        }
        let parse_real = |s: &str, line: usize| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("line {line}: bad number {s:?}")))
        };
        let parse_opt = |s: &str, line: usize| -> Result<Option<f64>> {
            if s.trim() == MISSING_TOKEN {
                Ok(None)
            } else {
                parse_real(s, line).map(Some)
            }
        };
        let mut rows = Vec::new();
        for (i, record) in input.records().enumerate() {
            let record = record?;
            let line = i + 2;
            let mut genos = Vec::with_capacity(ivs.total());
            for field in record.iter().skip(1).take(ivs.total()) {
                let g: u8 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Data(format!("line {line}: bad genotype {field:?}")))?;
                genos.push(g);
            }
            let tail = ivs.total() + 1;
            let z3 = genos.split_off(ivs.l + ivs.k);
            let z2 = genos.split_off(ivs.l);
            rows.push(Row {
                study: record[0].parse()?,
                z1: genos,
                z2,
                z3,
                x1: parse_opt(&record[tail], line)?,
                x2: parse_opt(&record[tail + 1], line)?,
                y1: parse_real(&record[tail + 2], line)?,
                y2: parse_real(&record[tail + 3], line)?,
            });
        }
        CombinedDataset::new(ivs, rows)
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
