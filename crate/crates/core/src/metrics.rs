//! Posterior summaries and replicate-level scoring.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorDraws;
use crate::stats::percentile_sorted;

/// Fewest kept draws [`summarize`] accepts.
pub const MIN_DRAWS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub ci95: [f64; 2],
}

/// Mean, sd (n - 1) and equal-tailed 95% interval of one parameter.
///
/// The interval ends are the 2.5% and 97.5% percentiles of the sorted draws
/// `x[0..n]`: with `h = (n - 1) p`, the percentile is
/// `x[floor h] + (h - floor h) * (x[floor h + 1] - x[floor h])`.
pub fn summarize(draws: &PosteriorDraws, param: &str) -> Result<Summary> {
    summarize_values(&draws.column(param)?)
}

pub fn summarize_values(values: &[f64]) -> Result<Summary> {
    if values.len() < MIN_DRAWS {
        return Err(Error::Estimation(format!(
            "summary needs at least {MIN_DRAWS} draws, got {}",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: crate::stats::mean(values.iter().copied()),
        sd: crate::stats::sd(values),
        ci95: [percentile_sorted(&sorted, 0.025), percentile_sorted(&sorted, 0.975)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bayesian,
    Ivw,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bayesian => "bayesian",
            Method::Ivw => "ivw",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bayesian" => Ok(Method::Bayesian),
            "ivw" => Ok(Method::Ivw),
            other => Err(Error::Config(format!("unknown method {other:?} (bayesian, ivw)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Beta1,
    Beta2,
}

impl Target {
    pub const BOTH: [Target; 2] = [Target::Beta1, Target::Beta2];

    pub fn index(self) -> usize {
        match self {
            Target::Beta1 => 0,
            Target::Beta2 => 1,
        }
    }

    /// Parameter name in [`PosteriorDraws`].
    pub fn param(self) -> &'static str {
        match self {
            Target::Beta1 => "beta1",
            Target::Beta2 => "beta2",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.param())
    }
}

/// One replicate's point estimate and 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEstimate {
    pub estimate: f64,
    pub ci95: [f64; 2],
}

impl ReplicateEstimate {
    pub fn covers(&self, value: f64) -> bool {
        self.ci95[0] <= value && value <= self.ci95[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub config_id: String,
    pub method: Method,
    pub target: Target,
    pub mean: f64,
    pub sd: f64,
    pub coverage: f64,
    /// Absent when the true effect is zero.
    pub power: Option<f64>,
    pub replicates: usize,
}

/// Mean and sd of estimates, interval coverage of `beta_true`, and the share
/// of intervals excluding zero.
pub fn score_replicates(
    config_id: &str,
    method: Method,
    target: Target,
    reps: &[ReplicateEstimate],
    beta_true: f64,
) -> Result<MetricsRow> {
    if reps.is_empty() {
        return Err(Error::Config(format!(
            "{config_id}/{method}/{target}: no replicates to score"
        )));
    }
    let n = reps.len() as f64;
    let estimates: Vec<f64> = reps.iter().map(|r| r.estimate).collect();
    let covered = reps.iter().filter(|r| r.covers(beta_true)).count() as f64;
    let power = (beta_true != 0.0).then(|| reps.iter().filter(|r| !r.covers(0.0)).count() as f64 / n);
    Ok(MetricsRow {
        config_id: config_id.to_string(),
        method,
        target,
        mean: crate::stats::mean(estimates.iter().copied()),
        sd: crate::stats::sd(&estimates),
        coverage: covered / n,
        power,
        replicates: reps.len(),
    })
}

pub const METRICS_HEADER: [&str; 8] = [
    "config",
    "method",
    "target",
    "mean",
    "sd",
    "coverage",
    "power",
    "replicates",
];

/// Writes rows with full precision; absent power is an empty field.
pub fn write_metrics<W: Write>(rows: &[MetricsRow], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(METRICS_HEADER)?;
    for r in rows {
        out.write_record([
            r.config_id.clone(),
            r.method.to_string(),
            r.target.to_string(),
            r.mean.to_string(),
            r.sd.to_string(),
            r.coverage.to_string(),
            r.power.map(|p| p.to_string()).unwrap_or_default(),
            r.replicates.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("<metrics>", e))?;
    Ok(())
}

pub fn read_metrics<R: std::io::Read>(reader: R) -> Result<Vec<MetricsRow>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in input.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let field = |k: usize| rec.get(k).map(str::trim).unwrap_or("");
        let num = |k: usize| -> Result<f64> {
            field(k)
                .parse()
                .map_err(|_| Error::Data(format!("metrics line {line}: bad {} {:?}", METRICS_HEADER[k], field(k))))
        };
        let target = match field(2) {
            "beta1" => Target::Beta1,
            "beta2" => Target::Beta2,
            other => return Err(Error::Data(format!("metrics line {line}: unknown target {other:?}"))),
        };
        rows.push(MetricsRow {
            config_id: field(0).to_string(),
            method: field(1).parse()?,
            target,
            mean: num(3)?,
            sd: num(4)?,
            coverage: num(5)?,
            power: if field(6).is_empty() { None } else { Some(num(6)?) },
            replicates: num(7)? as usize,
        });
    }
    Ok(rows)
}
