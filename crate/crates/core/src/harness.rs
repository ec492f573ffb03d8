//! Config-driven simulation studies.
//!
//! [`run_study`] simulates replicate datasets for each configuration, fits the
//! requested methods, and scores them. [`run_large_study`] fits one large
//! dataset per configuration in full and partitioned, and emits density grids
//! plus the drift of the aggregated means.
//!
//! Every random stream is derived from `master_seed` (see [`crate::seed`]):
//!
//! | task                         | labels                                   |
//! |------------------------------|------------------------------------------|
//! | replicate dataset            | `Config(c), Replicate(r), Role("simulate")` |
//! | replicate chain              | `Config(c), Replicate(r), Role("chain")`    |
//! | large-study dataset          | `Config(c), Role("simulate")`               |
//! | large-study full chain       | `Config(c), Role("chain")`                  |
//! | large-study partitioned fits | `Config(c), Role("partition")`, then per subset as in [`crate::aggregate`] |
//!
//! The `seed` field of each listed `SimConfig` is ignored. Output files are a
//! pure function of the configuration; worker count and output location never
//! appear in them.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregate::fit_partitioned;
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, McmcConfig, PosteriorDraws};
use crate::ivw::ivw_fit;
use crate::kde::{gkde2d, scott_bandwidth, DensityGrid, GridSpec};
use crate::metrics::{score_replicates, summarize, write_metrics, Method, MetricsRow, ReplicateEstimate, Target};
use crate::model::PriorSpec;
use crate::seed::{derive_seed, SeedLabel};
use crate::sim::{simulate_dataset, SimConfig};

/// Cross product of missing rates, instrument strengths and causal effects
/// over a base configuration. Expansion order: missing rate, then strength,
/// then effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigGrid {
    pub base: SimConfig,
    pub missing_rates: Vec<f64>,
    pub iv_strengths: Vec<f64>,
    pub beta_true: Vec<f64>,
}

impl Default for ConfigGrid {
    fn default() -> Self {
        ConfigGrid {
            base: SimConfig::default(),
            missing_rates: vec![0.8, 0.5, 0.2],
            iv_strengths: vec![0.3, 0.1],
            beta_true: vec![0.3],
        }
    }
}

impl ConfigGrid {
    pub fn expand(&self) -> Vec<SimConfig> {
        let mut out = Vec::new();
        for &m in &self.missing_rates {
            for &a in &self.iv_strengths {
                for &b in &self.beta_true {
                    out.push(SimConfig {
                        missing_rate: m,
                        iv_strength: a,
                        beta_true: [b, b],
                        ..self.base
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PartitionPlan {
    /// Subset counts; `1` reuses the full-data fit.
    pub j_values: Vec<usize>,
    pub grid: GridSpec,
}

impl Default for PartitionPlan {
    fn default() -> Self {
        PartitionPlan {
            j_values: vec![5, 25],
            grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Explicit configurations, run before any grid expansion.
    pub configs: Vec<SimConfig>,
    pub grid: Option<ConfigGrid>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    /// Chain settings; the seed is replaced per task.
    pub mcmc: McmcConfig,
    pub priors: PriorSpec,
    pub partition: Option<PartitionPlan>,
    pub master_seed: u64,
    pub output_dir: PathBuf,
    /// `None` defers to `HETMR_WORKERS`, then to the core count.
    pub max_workers: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            configs: Vec::new(),
            grid: None,
            replicates: 50,
            methods: vec![Method::Bayesian, Method::Ivw],
            mcmc: McmcConfig::default(),
            priors: PriorSpec::default(),
            partition: None,
            master_seed: 20_240_601,
            output_dir: PathBuf::from("out"),
            max_workers: None,
        }
    }
}

impl ExperimentConfig {
    /// Six configurations with non-zero effects, 50 replicates of n = 400.
    pub fn table1() -> Self {
        ExperimentConfig {
            grid: Some(ConfigGrid::default()),
            output_dir: PathBuf::from("out/table1"),
            ..Default::default()
        }
    }

    /// Six configurations with null effects.
    pub fn table2() -> Self {
        ExperimentConfig {
            grid: Some(ConfigGrid {
                beta_true: vec![0.0],
                ..ConfigGrid::default()
            }),
            output_dir: PathBuf::from("out/table2"),
            ..Default::default()
        }
    }

    /// All twelve configurations at n = 5,000 with J in {5, 25}.
    pub fn contours() -> Self {
        ExperimentConfig {
            grid: Some(ConfigGrid {
                base: SimConfig {
                    n_total: 5000,
                    ..SimConfig::default()
                },
                beta_true: vec![0.3, 0.0],
                ..ConfigGrid::default()
            }),
            replicates: 1,
            methods: vec![Method::Bayesian],
            partition: Some(PartitionPlan::default()),
            output_dir: PathBuf::from("out/contours"),
            ..Default::default()
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn resolved_configs(&self) -> Vec<SimConfig> {
        let mut all = self.configs.clone();
        if let Some(grid) = &self.grid {
            all.extend(grid.expand());
        }
        all
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("methods must name at least one of bayesian, ivw".into()));
        }
        let configs = self.resolved_configs();
        if configs.is_empty() {
            return Err(Error::Config("no configurations: set `configs` or `grid`".into()));
        }
        let mut seen = BTreeMap::new();
        for (i, c) in configs.iter().enumerate() {
            c.validate()
                .map_err(|e| Error::Config(format!("configuration {i} ({}): {e}", c.id())))?;
            if let Some(j) = seen.insert(c.id(), i) {
                return Err(Error::Config(format!(
                    "configurations {j} and {i} share the identifier {}",
                    c.id()
                )));
            }
        }
        self.mcmc.validate()?;
        self.priors.validate()?;
        if let Some(plan) = &self.partition {
            if plan.j_values.is_empty() || plan.j_values.contains(&0) {
                return Err(Error::Config("partition j_values must be non-empty and >= 1".into()));
            }
        }
        Ok(())
    }

    fn workers(&self) -> Result<usize> {
        crate::parallel::resolve_workers(self.max_workers)
    }
}

/// Everything in the configuration that influences results.
#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    master_seed: u64,
    replicates: usize,
    methods: &'a [Method],
    mcmc: McmcConfig,
    priors: PriorSpec,
    partition: Option<&'a PartitionPlan>,
    configs: Vec<ManifestConfig>,
}

#[derive(Debug, Clone, Serialize)]
struct ManifestConfig {
    index: usize,
    id: String,
    config: SimConfig,
}

impl<'a> Manifest<'a> {
    fn of(cfg: &'a ExperimentConfig) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            master_seed: cfg.master_seed,
            replicates: cfg.replicates,
            methods: &cfg.methods,
            mcmc: cfg.mcmc,
            priors: cfg.priors,
            partition: cfg.partition.as_ref(),
            configs: cfg
                .resolved_configs()
                .into_iter()
                .enumerate()
                .map(|(index, config)| ManifestConfig {
                    index,
                    id: config.id(),
                    config,
                })
                .collect(),
        }
    }
}

/// One method's estimate for one target in one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub config: String,
    pub replicate: usize,
    pub method: Method,
    pub target: Target,
    pub beta_true: f64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub sim_seed: u64,
    pub chain_seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub config: String,
    pub replicate: usize,
    /// `simulate`, `bayesian` or `ivw`.
    pub stage: String,
    pub error: String,
    pub exit_code: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub metrics: Vec<MetricsRow>,
    pub replicates: Vec<ReplicateRecord>,
    pub failures: Vec<FailureRecord>,
}

impl StudyReport {
    /// 0 when every replicate succeeded, else the most severe failure code.
    pub fn exit_code(&self) -> i32 {
        self.failures.iter().map(|f| f.exit_code).max().unwrap_or(0)
    }
}

pub fn replicate_sim_seed(master: u64, config: usize, replicate: usize) -> u64 {
    derive_seed(
        master,
        &[
            SeedLabel::Config(config as u64),
            SeedLabel::Replicate(replicate as u64),
            SeedLabel::Role("simulate"),
        ],
    )
}

pub fn replicate_chain_seed(master: u64, config: usize, replicate: usize) -> u64 {
    derive_seed(
        master,
        &[
            SeedLabel::Config(config as u64),
            SeedLabel::Replicate(replicate as u64),
            SeedLabel::Role("chain"),
        ],
    )
}

type TaskOutput = (Vec<ReplicateRecord>, Vec<FailureRecord>);

fn run_replicate(cfg: &ExperimentConfig, index: usize, sim: &SimConfig, r: usize) -> TaskOutput {
    let id = sim.id();
    let sim_seed = replicate_sim_seed(cfg.master_seed, index, r);
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let fail = |stage: &str, e: &Error| FailureRecord {
        config: id.clone(),
        replicate: r,
        stage: stage.to_string(),
        error: e.to_string(),
        exit_code: e.exit_code(),
    };
    let data = match simulate_dataset(&SimConfig { seed: sim_seed, ..*sim }) {
        Ok(d) => d,
        Err(e) => return (records, vec![fail("simulate", &e)]),
    };
    let record = |method, target: Target, est: ReplicateEstimate, chain_seed| ReplicateRecord {
        config: id.clone(),
        replicate: r,
        method,
        target,
        beta_true: sim.beta_true[target.index()],
        estimate: est.estimate,
        ci_lo: est.ci95[0],
        ci_hi: est.ci95[1],
        sim_seed,
        chain_seed,
    };
    for &method in &cfg.methods {
        match method {
            Method::Bayesian => {
                let chain_seed = replicate_chain_seed(cfg.master_seed, index, r);
                let fitted = run_chain(&data, &cfg.priors, &cfg.mcmc.with_seed(chain_seed)).and_then(|draws| {
                    Target::BOTH
                        .iter()
                        .map(|&t| {
                            let s = summarize(&draws, t.param())?;
                            Ok(record(
                                method,
                                t,
                                ReplicateEstimate {
                                    estimate: s.mean,
                                    ci95: s.ci95,
                                },
                                Some(chain_seed),
                            ))
                        })
                        .collect::<Result<Vec<_>>>()
                });
                match fitted {
                    Ok(rs) => records.extend(rs),
                    Err(e) => failures.push(fail("bayesian", &e)),
                }
            }
            Method::Ivw => match ivw_fit(&data) {
                Ok(fit) => {
                    for t in Target::BOTH {
                        let res = fit.get(t.index());
                        records.push(record(
                            method,
                            t,
                            ReplicateEstimate {
                                estimate: res.estimate,
                                ci95: res.ci95,
                            },
                            None,
                        ));
                    }
                }
                Err(e) => failures.push(fail("ivw", &e)),
            },
        }
    }
    (records, failures)
}

/// Scores replicate records grouped by (config, method, target), in order of
/// first appearance.
pub fn metrics_from_replicates(records: &[ReplicateRecord]) -> Result<Vec<MetricsRow>> {
    let mut order: Vec<(String, Method, Target)> = Vec::new();
    let mut groups: BTreeMap<(String, Method, Target), (f64, Vec<ReplicateEstimate>)> = BTreeMap::new();
    for rec in records {
        let key = (rec.config.clone(), rec.method, rec.target);
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            (rec.beta_true, Vec::new())
        });
        if entry.0 != rec.beta_true {
            return Err(Error::Data(format!(
                "{}/{}/{}: inconsistent beta_true across replicates",
                rec.config, rec.method, rec.target
            )));
        }
        entry.1.push(ReplicateEstimate {
            estimate: rec.estimate,
            ci95: [rec.ci_lo, rec.ci_hi],
        });
    }
    order
        .into_iter()
        .map(|key| {
            let (truth, reps) = &groups[&key];
            score_replicates(&key.0, key.1, key.2, reps, *truth)
        })
        .collect()
}

pub fn write_replicates<W: Write>(records: &[ReplicateRecord], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    for r in records {
        out.serialize(r)?;
    }
    if records.is_empty() {
        out.write_record([
            "config",
            "replicate",
            "method",
            "target",
            "beta_true",
            "estimate",
            "ci_lo",
            "ci_hi",
            "sim_seed",
            "chain_seed",
        ])?;
    }
    out.flush().map_err(|e| Error::io("<replicates>", e))?;
    Ok(())
}

pub fn read_replicates<R: std::io::Read>(reader: R) -> Result<Vec<ReplicateRecord>> {
    let mut input = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for rec in input.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

/// One row per configuration. Columns: for each target, Bayesian then IVW,
/// each with mean, sd, coverage and power.
pub fn write_wide_table<W: Write>(
    configs: &[SimConfig],
    rows: &[MetricsRow],
    methods: &[Method],
    writer: W,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["missing_rate".to_string(), "alpha".into(), "beta_true".into()];
    for t in Target::BOTH {
        for m in methods {
            for stat in ["mean", "sd", "coverage", "power"] {
                header.push(format!("{t}_{m}_{stat}"));
            }
        }
    }
    out.write_record(&header)?;
    for c in configs {
        let id = c.id();
        let mut line = vec![
            c.missing_rate.to_string(),
            c.iv_strength.to_string(),
            c.beta_true[0].to_string(),
        ];
        for t in Target::BOTH {
            for &m in methods {
                match rows
                    .iter()
                    .find(|r| r.config_id == id && r.method == m && r.target == t)
                {
                    Some(r) => line.extend([
                        fmt3(r.mean),
                        fmt3(r.sd),
                        fmt3(r.coverage),
                        r.power.map(fmt3).unwrap_or_else(|| "NA".into()),
                    ]),
                    None => line.extend(std::iter::repeat_n("NA".to_string(), 4)),
                }
            }
        }
        out.write_record(&line)?;
    }
    out.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_file(path, |buf| {
        serde_json::to_writer_pretty(&mut *buf, value)?;
        buf.push(b'\n');
        Ok(())
    })
}

/// Output files of [`run_study`].
pub const STUDY_FILES: [&str; 5] = [
    "metrics.csv",
    "table.csv",
    "replicates.csv",
    "manifest.json",
    "failures.json",
];

/// Runs every (configuration, replicate) task and writes [`STUDY_FILES`]
/// into `cfg.output_dir`.
///
/// Failed replicates are listed in `failures.json` and left out of the
/// scores; the returned report's [`StudyReport::exit_code`] is then non-zero.
pub fn run_study(cfg: &ExperimentConfig) -> Result<StudyReport> {
    cfg.validate()?;
    let workers = cfg.workers()?;
    create_dir(&cfg.output_dir)?;
    let configs = cfg.resolved_configs();
    let reps = cfg.replicates;
    log::info!(
        "{} configurations x {reps} replicates on {workers} worker(s)",
        configs.len()
    );
    let outputs = crate::parallel::map_indexed(workers, configs.len() * reps, |task| {
        let (c, r) = (task / reps, task % reps);
        let out = run_replicate(cfg, c, &configs[c], r);
        if r + 1 == reps {
            log::info!("configuration {} finished its last replicate", configs[c].id());
        }
        out
    })?;
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (rs, fs) in outputs {
        records.extend(rs);
        failures.extend(fs);
    }
    // Group by configuration, then method order, then target.
    let method_rank = |m: Method| cfg.methods.iter().position(|x| *x == m).unwrap_or(usize::MAX);
    let config_rank: BTreeMap<String, usize> = configs.iter().enumerate().map(|(i, c)| (c.id(), i)).collect();
    let mut sorted = records.clone();
    sorted.sort_by_key(|r| (config_rank[&r.config], method_rank(r.method), r.target, r.replicate));
    let metrics = metrics_from_replicates(&sorted)?;

    let dir = &cfg.output_dir;
    write_file(&dir.join("metrics.csv"), |b| write_metrics(&metrics, b))?;
    write_file(&dir.join("table.csv"), |b| {
        write_wide_table(&configs, &metrics, &cfg.methods, b)
    })?;
    write_file(&dir.join("replicates.csv"), |b| write_replicates(&records, b))?;
    write_json(&dir.join("manifest.json"), &Manifest::of(cfg))?;
    write_json(&dir.join("failures.json"), &failures)?;
    if !failures.is_empty() {
        log::warn!("{} replicate task(s) failed; see failures.json", failures.len());
    }
    Ok(StudyReport {
        metrics,
        replicates: records,
        failures,
    })
}

/// One posterior (full or aggregated) of the large study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    /// 1 for the full-data fit.
    pub j: usize,
    pub beta_mean: [f64; 2],
    pub kde_mode: [f64; 2],
    /// `|mean - full-data mean|` per parameter; zero for the full fit.
    pub drift: BTreeMap<String, f64>,
    pub contour_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeStudyEntry {
    pub config: String,
    pub beta_true: [f64; 2],
    pub n_total: usize,
    pub full: FitSummary,
    pub partitioned: Vec<FitSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LargeStudyReport {
    pub entries: Vec<LargeStudyEntry>,
}

impl LargeStudyReport {
    pub fn entry(&self, config: &str) -> Option<&LargeStudyEntry> {
        self.entries.iter().find(|e| e.config == config)
    }
}

fn beta_columns(draws: &PosteriorDraws) -> Result<[Vec<f64>; 2]> {
    Ok([draws.column("beta1")?, draws.column("beta2")?])
}

/// Shared grid over several posteriors so their contours overlay.
fn common_grid(spec: &GridSpec, posteriors: &[&[Vec<f64>; 2]]) -> GridSpec {
    let mut range = [[f64::INFINITY, f64::NEG_INFINITY]; 2];
    let mut h_max = [0.0f64; 2];
    for p in posteriors {
        for d in 0..2 {
            let h = spec.bandwidth.map_or_else(|| scott_bandwidth(&p[d]), |b| b[d]);
            h_max[d] = h_max[d].max(h);
            for &v in &p[d] {
                range[d][0] = range[d][0].min(v);
                range[d][1] = range[d][1].max(v);
            }
        }
    }
    let pad = |d: usize| [range[d][0] - spec.pad * h_max[d], range[d][1] + spec.pad * h_max[d]];
    GridSpec {
        x_range: spec.x_range.or(Some(pad(0))),
        y_range: spec.y_range.or(Some(pad(1))),
        ..*spec
    }
}

/// Full-data and partitioned fits of one large dataset per configuration.
///
/// Writes `contours/<config>/full.json` and `contours/<config>/j<J>.json`
/// (density grids on a grid shared within the configuration), `drift.json`
/// and `manifest.json` into `cfg.output_dir`.
pub fn run_large_study(cfg: &ExperimentConfig) -> Result<LargeStudyReport> {
    cfg.validate()?;
    let plan = cfg
        .partition
        .as_ref()
        .ok_or_else(|| Error::Config("large study needs a `partition` plan with j_values".into()))?;
    let workers = cfg.workers()?;
    let configs = cfg.resolved_configs();
    for c in &configs {
        let (n_a, n_b) = c.split()?;
        for &j in &plan.j_values {
            if n_a % j != 0 || n_b % j != 0 {
                return Err(Error::Config(format!(
                    "{}: J = {j} does not divide n_A = {n_a} and n_B = {n_b}",
                    c.id()
                )));
            }
        }
    }
    create_dir(&cfg.output_dir)?;
    let mut entries = Vec::with_capacity(configs.len());
    for (index, sim) in configs.iter().enumerate() {
        let id = sim.id();
        log::info!("large study {id}: n = {}", sim.n_total);
        let label = |role| {
            derive_seed(
                cfg.master_seed,
                &[SeedLabel::Config(index as u64), SeedLabel::Role(role)],
            )
        };
        let data = simulate_dataset(&SimConfig {
            seed: label("simulate"),
            ..*sim
        })?;
        let full = run_chain(&data, &cfg.priors, &cfg.mcmc.with_seed(label("chain")))?;
        let full_means = full.means();
        let mut fits: Vec<(usize, PosteriorDraws)> = Vec::new();
        for &j in &plan.j_values {
            if j == 1 {
                fits.push((1, full.clone()));
                continue;
            }
            let mcmc = cfg.mcmc.with_seed(label("partition"));
            let pf = fit_partitioned(&data, j, &cfg.priors, &mcmc, workers)?;
            fits.push((j, pf.aggregated.draws));
        }
        let full_beta = beta_columns(&full)?;
        let fit_betas: Vec<[Vec<f64>; 2]> = fits.iter().map(|(_, d)| beta_columns(d)).collect::<Result<_>>()?;
        let mut all: Vec<&[Vec<f64>; 2]> = vec![&full_beta];
        all.extend(fit_betas.iter());
        let spec = common_grid(&plan.grid, &all);

        let dir = cfg.output_dir.join("contours").join(&id);
        create_dir(&dir)?;
        let summarize_fit =
            |j: usize, draws: &PosteriorDraws, betas: &[Vec<f64>; 2], name: String| -> Result<FitSummary> {
                let grid: DensityGrid = gkde2d(&betas[0], &betas[1], &spec)?;
                write_json(&dir.join(&name), &grid)?;
                let means = draws.means();
                let drift = draws
                    .names()
                    .iter()
                    .zip(means.iter().zip(&full_means))
                    .map(|(n, (m, f))| (n.clone(), (m - f).abs()))
                    .collect();
                Ok(FitSummary {
                    j,
                    beta_mean: [draws.mean("beta1")?, draws.mean("beta2")?],
                    kde_mode: grid.mode(),
                    drift,
                    contour_file: format!("contours/{id}/{name}"),
                })
            };
        let full_summary = summarize_fit(1, &full, &full_beta, "full.json".into())?;
        let mut partitioned = Vec::with_capacity(fits.len());
        for ((j, draws), betas) in fits.iter().zip(&fit_betas) {
            partitioned.push(summarize_fit(*j, draws, betas, format!("j{j}.json"))?);
        }
        entries.push(LargeStudyEntry {
            config: id,
            beta_true: sim.beta_true,
            n_total: sim.n_total,
            full: full_summary,
            partitioned,
        });
    }
    let report = LargeStudyReport { entries };
    write_json(&cfg.output_dir.join("drift.json"), &report)?;
    write_json(&cfg.output_dir.join("manifest.json"), &Manifest::of(cfg))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_expands_in_table_order() {
        let configs = ExperimentConfig::table1().resolved_configs();
        let ids: Vec<String> = configs.iter().map(|c| c.id()).collect();
        assert_eq!(ids[0], "m0.8_a0.3_b0.3");
        assert_eq!(ids[1], "m0.8_a0.1_b0.3");
        assert_eq!(ids.len(), 6);
        assert_eq!(ExperimentConfig::contours().resolved_configs().len(), 12);
    }

    #[test]
    fn validation_catches_bad_configs() {
        let mut cfg = ExperimentConfig::table1();
        cfg.validate().unwrap();
        cfg.replicates = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::table1();
        cfg.configs.push(SimConfig {
            missing_rate: 0.8,
            iv_strength: 0.3,
            ..Default::default()
        });
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("share the identifier"), "{err}");
        let mut cfg = ExperimentConfig::table1();
        cfg.configs.push(SimConfig {
            n_total: 401,
            ..Default::default()
        });
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_defaults_fill_missing_fields() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"replicates": 3, "grid": {"beta_true": [0.0]}}"#).unwrap();
        assert_eq!(cfg.replicates, 3);
        assert_eq!(cfg.resolved_configs().len(), 6);
        assert_eq!(cfg.mcmc, McmcConfig::default());
    }

    #[test]
    fn seeds_differ_by_role_and_replicate() {
        assert_ne!(replicate_sim_seed(1, 0, 0), replicate_chain_seed(1, 0, 0));
        assert_ne!(replicate_sim_seed(1, 0, 0), replicate_sim_seed(1, 0, 1));
        assert_ne!(replicate_sim_seed(1, 0, 1), replicate_sim_seed(1, 1, 0));
    }

    #[test]
    fn metrics_group_in_first_appearance_order() {
        let rec = |config: &str, method, target, estimate: f64| ReplicateRecord {
            config: config.into(),
            replicate: 0,
            method,
            target,
            beta_true: 0.3,
            estimate,
            ci_lo: estimate - 0.1,
            ci_hi: estimate + 0.1,
            sim_seed: 0,
            chain_seed: None,
        };
        let records = vec![
            rec("b", Method::Ivw, Target::Beta1, 0.3),
            rec("a", Method::Ivw, Target::Beta1, 0.5),
            rec("b", Method::Ivw, Target::Beta1, 0.25),
        ];
        let rows = metrics_from_replicates(&records).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].config_id, "b");
        assert_eq!(rows[0].replicates, 2);
        assert_eq!(rows[1].coverage, 0.0);
        let mut buf = Vec::new();
        write_replicates(&records, &mut buf).unwrap();
        assert_eq!(read_replicates(buf.as_slice()).unwrap(), records);
    }
}
