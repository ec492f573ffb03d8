//! Per-task seeds derived from one master seed.

use hetmr::harness::{replicate_chain_seed, replicate_sim_seed};
use hetmr::seed::{derive_seed, SeedLabel};

fn main() {
    let master = 20_240_601;
    for r in 0..3 {
        println!(
            "config 0 replicate {r}: simulate {:#018x}, chain {:#018x}",
            replicate_sim_seed(master, 0, r),
            replicate_chain_seed(master, 0, r)
        );
    }
    let custom = derive_seed(master, &[SeedLabel::Subset(4), SeedLabel::Role("chain")]);
    println!("subset 4 chain under the master seed: {custom:#018x}");
}
