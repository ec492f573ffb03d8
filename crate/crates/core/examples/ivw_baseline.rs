//! Two-sample IVW on a simulated dataset, with per-instrument Wald ratios.

use hetmr::ivw::ivw_fit;
use hetmr::sim::{simulate_dataset, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = simulate_dataset(&SimConfig {
        seed: 11,
        ..Default::default()
    })?;
    let fit = ivw_fit(&data)?;
    for (name, r) in [("beta1", &fit.beta1), ("beta2", &fit.beta2)] {
        println!(
            "{name}: {:.4} (se {:.4}) from {} instruments",
            r.estimate,
            r.se,
            r.ratios.len()
        );
    }
    for w in fit.beta1.ratios.iter().take(3) {
        println!("  {} ratio {:.3}", w.label, w.ratio);
    }
    Ok(())
}
