//! Split a dataset into J subsets, fit each, and compare the pooled posterior
//! with the full-data fit.

use hetmr::aggregate::fit_partitioned;
use hetmr::gibbs::{run_chain, McmcConfig};
use hetmr::model::PriorSpec;
use hetmr::sim::{simulate_dataset, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = simulate_dataset(&SimConfig {
        n_total: 2000,
        seed: 3,
        ..Default::default()
    })?;
    let priors = PriorSpec::default();
    let mcmc = McmcConfig {
        n_iter: 3000,
        burn_in: 500,
        seed: 9,
        ..Default::default()
    };
    let full = run_chain(&data, &priors, &mcmc)?;
    let workers = hetmr::parallel::resolve_workers(None)?;
    for j in [2, 5, 10] {
        let fit = fit_partitioned(&data, j, &priors, &mcmc, workers)?;
        let agg = &fit.aggregated.draws;
        println!(
            "J = {j:>2}: beta1 {:.4} (full {:.4}), slowest subset {:.2}s",
            agg.mean("beta1")?,
            full.mean("beta1")?,
            fit.timings.iter().copied().fold(0.0, f64::max)
        );
    }
    Ok(())
}
