//! Kernel density of the joint (beta1, beta2) posterior on a grid.

use hetmr::gibbs::{run_chain, McmcConfig};
use hetmr::kde::{gkde2d, GridSpec};
use hetmr::model::PriorSpec;
use hetmr::sim::{simulate_dataset, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = simulate_dataset(&SimConfig {
        seed: 21,
        ..Default::default()
    })?;
    let draws = run_chain(
        &data,
        &PriorSpec::default(),
        &McmcConfig {
            seed: 2,
            ..Default::default()
        },
    )?;
    let grid = gkde2d(&draws.column("beta1")?, &draws.column("beta2")?, &GridSpec::default())?;
    println!("bandwidths {:?}", grid.bandwidth);
    println!("mode {:?}, mass on grid {:.4}", grid.mode(), grid.mass());
    Ok(())
}
