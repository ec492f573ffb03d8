use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hetmr::aggregate::fit_partitioned;
use hetmr::data::CombinedDataset;
use hetmr::error::{Error, Result};
use hetmr::gibbs::{run_chain, Init, McmcConfig, PosteriorDraws};
use hetmr::harness::{metrics_from_replicates, read_replicates, run_large_study, run_study, ExperimentConfig};
use hetmr::ivw::ivw_fit;
use hetmr::kde::{gkde2d, GridSpec};
use hetmr::metrics::{summarize, write_metrics};
use hetmr::model::{IgTarget, PriorSpec};
use hetmr::parallel::{resolve_workers, WORKERS_ENV};
use hetmr::sim::{simulate_dataset, Provenance, SimConfig};

#[derive(Parser)]
#[command(name = "hetmr", version, about = "Random-effect Bayesian Mendelian randomization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one combined two-study dataset.
    Simulate(SimulateArgs),
    /// Run one Gibbs chain on a dataset and write its draws.
    Fit(FitArgs),
    /// Two-sample IVW estimates of both causal effects.
    Ivw(IvwArgs),
    /// Fit J subsets in parallel and aggregate their posteriors.
    PartitionFit(PartitionArgs),
    /// Score replicate records, or summarize one parameter of a draws file.
    Metrics(MetricsArgs),
    /// Joint kernel density of two parameters of a draws file.
    Contours(ContoursArgs),
    /// Six configurations with non-zero effects.
    ReproduceTable1(StudyArgs),
    /// Six configurations with null effects.
    ReproduceTable2(StudyArgs),
    /// Full versus partitioned fits of large datasets.
    ReproduceContours(ContourStudyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file with a full simulation config; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_total: Option<usize>,
    #[arg(long)]
    missing_rate: Option<f64>,
    #[arg(long)]
    iv_strength: Option<f64>,
    /// One value for both effects, or two comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 1..=2)]
    beta: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset CSV; the provenance sidecar goes to `<out>.provenance.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ChainArgs {
    #[arg(long, default_value_t = 5000)]
    iterations: usize,
    #[arg(long, default_value_t = 1000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Start from least squares or from a prior draw.
    #[arg(long, value_parser = parse_init, default_value = "least_squares")]
    init: Init,
    #[arg(long)]
    beta_sd: Option<f64>,
    #[arg(long)]
    alpha_sd: Option<f64>,
    #[arg(long)]
    delta_sd: Option<f64>,
    #[arg(long)]
    v_sd: Option<f64>,
    #[arg(long)]
    ig_shape: Option<f64>,
    #[arg(long)]
    ig_rate: Option<f64>,
    /// Put the inverse-gamma prior on the noise `sd` or `variance`.
    #[arg(long, value_parser = parse_ig_target)]
    ig_target: Option<IgTarget>,
}

impl ChainArgs {
    fn mcmc(&self) -> McmcConfig {
        McmcConfig {
            n_iter: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            init: self.init,
            ..McmcConfig::default()
        }
    }

    fn priors(&self) -> PriorSpec {
        let d = PriorSpec::default();
        PriorSpec {
            beta_sd: self.beta_sd.unwrap_or(d.beta_sd),
            alpha_sd: self.alpha_sd.unwrap_or(d.alpha_sd),
            delta_sd: self.delta_sd.unwrap_or(d.delta_sd),
            v_sd: self.v_sd.unwrap_or(d.v_sd),
            ig_shape: self.ig_shape.unwrap_or(d.ig_shape),
            ig_rate: self.ig_rate.unwrap_or(d.ig_rate),
            ig_target: self.ig_target.unwrap_or(d.ig_target),
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IvwArgs {
    #[arg(long)]
    data: PathBuf,
    /// JSON output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PartitionArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    j: usize,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// Replicate records written by a study run.
    #[arg(long, conflicts_with = "draws", required_unless_present = "draws")]
    replicates: Option<PathBuf>,
    /// Draws file to summarize instead.
    #[arg(long)]
    draws: Option<PathBuf>,
    #[arg(long, default_value = "beta1")]
    param: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ContoursArgs {
    #[arg(long)]
    draws: PathBuf,
    #[arg(long, default_value = "beta1")]
    x: String,
    #[arg(long, default_value = "beta2")]
    y: String,
    #[arg(long, default_value_t = 101)]
    nx: usize,
    #[arg(long, default_value_t = 101)]
    ny: usize,
    /// Explicit bandwidths `hx,hy`; Scott's rule otherwise.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    bandwidth: Option<Vec<f64>>,
    /// Grid padding in bandwidths beyond the sample range.
    #[arg(long, default_value_t = 5.0)]
    pad: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StudyArgs {
    /// JSON experiment config replacing the preset; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
}

impl StudyArgs {
    fn apply(&self, preset: ExperimentConfig) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => preset,
        };
        if let Some(r) = self.replicates {
            cfg.replicates = r;
        }
        if let Some(n) = self.iterations {
            cfg.mcmc.n_iter = n;
        }
        if let Some(b) = self.burn_in {
            cfg.mcmc.burn_in = b;
        }
        if let Some(s) = self.master_seed {
            cfg.master_seed = s;
        }
        if let Some(d) = &self.out_dir {
            cfg.output_dir = d.clone();
        }
        if self.workers.is_some() {
            cfg.max_workers = self.workers;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct ContourStudyArgs {
    #[command(flatten)]
    study: StudyArgs,
    #[arg(long)]
    n_total: Option<usize>,
    /// Subset counts, comma-separated.
    #[arg(long, value_delimiter = ',')]
    j: Option<Vec<usize>>,
}

fn parse_init(s: &str) -> std::result::Result<Init, String> {
    match s {
        "least_squares" => Ok(Init::LeastSquares),
        "prior_draw" => Ok(Init::PriorDraw),
        _ => Err("expected least_squares or prior_draw".into()),
    }
}

fn parse_ig_target(s: &str) -> std::result::Result<IgTarget, String> {
    match s {
        "sd" => Ok(IgTarget::Sd),
        "variance" => Ok(IgTarget::Variance),
        _ => Err("expected sd or variance".into()),
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| io_error(path, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".provenance.json");
    PathBuf::from(name)
}

fn simulate(args: SimulateArgs) -> Result<i32> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
            serde_json::from_str(&text)?
        }
        None => SimConfig::default(),
    };
    if let Some(n) = args.n_total {
        cfg.n_total = n;
    }
    if let Some(m) = args.missing_rate {
        cfg.missing_rate = m;
    }
    if let Some(a) = args.iv_strength {
        cfg.iv_strength = a;
    }
    if let Some(b) = &args.beta {
        cfg.beta_true = [b[0], *b.last().unwrap_or(&b[0])];
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let data = simulate_dataset(&cfg)?;
    data.save(&args.out)?;
    if let Some(p) = Provenance::of(&data) {
        p.save(sidecar(&args.out))?;
    }
    log::info!("wrote {} rows to {}", data.len(), args.out.display());
    Ok(0)
}

fn fit(args: FitArgs) -> Result<i32> {
    let data = CombinedDataset::load(&args.data)?;
    let draws = run_chain(&data, &args.chain.priors(), &args.chain.mcmc())?;
    draws.save(&args.out)?;
    Ok(0)
}

fn ivw(args: IvwArgs) -> Result<i32> {
    let data = CombinedDataset::load(&args.data)?;
    write_json(&ivw_fit(&data)?, args.out.as_deref())?;
    Ok(0)
}

fn partition_fit(args: PartitionArgs) -> Result<i32> {
    let data = CombinedDataset::load(&args.data)?;
    let workers = resolve_workers(args.workers)?;
    let mcmc = args.chain.mcmc();
    let fit = fit_partitioned(&data, args.j, &args.chain.priors(), &mcmc, workers)?;
    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    for s in &fit.subsets {
        s.draws.save(dir.join(format!("subset_{}.csv", s.index)))?;
    }
    fit.aggregated.draws.save(dir.join("aggregated.csv"))?;
    write_json(&fit.manifest(mcmc.seed), Some(&dir.join("manifest.json")))?;
    Ok(0)
}

fn metrics(args: MetricsArgs) -> Result<i32> {
    if let Some(path) = &args.replicates {
        let file = std::fs::File::open(path).map_err(|e| io_error(path, e))?;
        let rows = metrics_from_replicates(&read_replicates(file)?)?;
        let mut buf = Vec::new();
        write_metrics(&rows, &mut buf)?;
        match &args.out {
            Some(out) => std::fs::write(out, buf).map_err(|e| io_error(out, e))?,
            None => print!("{}", String::from_utf8_lossy(&buf)),
        }
        return Ok(0);
    }
    let path = args.draws.as_ref().expect("clap requires --replicates or --draws");
    let draws = PosteriorDraws::load(path)?;
    write_json(&summarize(&draws, &args.param)?, args.out.as_deref())?;
    Ok(0)
}

fn contours(args: ContoursArgs) -> Result<i32> {
    let draws = PosteriorDraws::load(&args.draws)?;
    let spec = GridSpec {
        nx: args.nx,
        ny: args.ny,
        bandwidth: args.bandwidth.map(|b| [b[0], b[1]]),
        pad: args.pad,
        ..GridSpec::default()
    };
    let grid = gkde2d(&draws.column(&args.x)?, &draws.column(&args.y)?, &spec)?;
    write_json(&grid, args.out.as_deref())?;
    Ok(0)
}

fn study(args: StudyArgs, preset: ExperimentConfig) -> Result<i32> {
    let cfg = args.apply(preset)?;
    let report = run_study(&cfg)?;
    for f in &report.failures {
        eprintln!(
            "replicate {} of {} failed at {}: {}",
            f.replicate, f.config, f.stage, f.error
        );
    }
    println!(
        "wrote {} metric rows to {}",
        report.metrics.len(),
        cfg.output_dir.display()
    );
    Ok(report.exit_code())
}

fn contour_study(args: ContourStudyArgs) -> Result<i32> {
    let mut cfg = args.study.apply(ExperimentConfig::contours())?;
    if let Some(n) = args.n_total {
        if let Some(grid) = cfg.grid.as_mut() {
            grid.base.n_total = n;
        }
        for c in &mut cfg.configs {
            c.n_total = n;
        }
    }
    if let Some(j) = args.j {
        cfg.partition.get_or_insert_with(Default::default).j_values = j;
    }
    let report = run_large_study(&cfg)?;
    for e in &report.entries {
        let drift: Vec<String> = e
            .partitioned
            .iter()
            .map(|p| {
                format!(
                    "J={} |dbeta1|={:.4}",
                    p.j,
                    p.drift.get("beta1").copied().unwrap_or(f64::NAN)
                )
            })
            .collect();
        println!("{}: full mode {:?}; {}", e.config, e.full.kde_mode, drift.join(", "));
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap reports usage errors with status 2, which is reserved for numerical failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Ivw(a) => ivw(a),
        Command::PartitionFit(a) => partition_fit(a),
        Command::Metrics(a) => metrics(a),
        Command::Contours(a) => contours(a),
        Command::ReproduceTable1(a) => study(a, ExperimentConfig::table1()),
        Command::ReproduceTable2(a) => study(a, ExperimentConfig::table2()),
        Command::ReproduceContours(a) => contour_study(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
