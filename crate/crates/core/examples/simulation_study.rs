//! A small replicate study over two configurations. Pass a replicate count
//! as the first argument (default 5).

use hetmr::harness::{run_study, ExperimentConfig};
use hetmr::sim::SimConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let replicates = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(5);
    let mut cfg = ExperimentConfig {
        configs: vec![
            SimConfig::default(),
            SimConfig {
                beta_true: [0.0, 0.0],
                ..Default::default()
            },
        ],
        replicates,
        output_dir: std::env::temp_dir().join("hetmr_study"),
        ..Default::default()
    };
    cfg.mcmc.n_iter = 2000;
    cfg.mcmc.burn_in = 500;
    let report = run_study(&cfg)?;
    for row in &report.metrics {
        println!(
            "{} {:>8} {}: mean {:.3} sd {:.3} coverage {:.2} power {}",
            row.config_id,
            row.method,
            row.target,
            row.mean,
            row.sd,
            row.coverage,
            row.power.map_or("NA".into(), |p| format!("{p:.2}"))
        );
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}
