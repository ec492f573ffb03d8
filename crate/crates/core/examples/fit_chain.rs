//! Fit one chain and summarize both causal effects.

use hetmr::gibbs::{run_chain, McmcConfig};
use hetmr::metrics::summarize;
use hetmr::model::PriorSpec;
use hetmr::sim::{simulate_dataset, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = simulate_dataset(&SimConfig {
        seed: 11,
        ..Default::default()
    })?;
    let mcmc = McmcConfig {
        seed: 1,
        ..Default::default()
    };
    let draws = run_chain(&data, &PriorSpec::default(), &mcmc)?;
    for param in ["beta1", "beta2"] {
        let s = summarize(&draws, param)?;
        println!(
            "{param}: mean {:.4}, sd {:.4}, 95% [{:.4}, {:.4}]",
            s.mean, s.sd, s.ci95[0], s.ci95[1]
        );
    }
    Ok(())
}
