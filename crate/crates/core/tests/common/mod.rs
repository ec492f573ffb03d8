//! Helpers shared by integration test targets.

use hetmr::data::{CombinedDataset, Study};
use hetmr::gibbs::{run_chain_from, Clamp, McmcConfig};
use hetmr::model::{Equation, ParamState, PriorSpec};
use hetmr::sim::{simulate_dataset, SimConfig};

/// Study-A data with δ, σ² and u held at their true values: the `beta1`
/// marginal is the conjugate Gaussian regression posterior.
#[allow(dead_code)]
pub fn conjugate_check(n_draws: usize) -> (f64, f64, f64, f64) {
    let sim = SimConfig {
        n_total: 200,
        missing_rate: 0.5,
        seed: 77,
        ..Default::default()
    };
    let full = simulate_dataset(&sim).unwrap();
    let truth = full.truth.clone().unwrap();
    let n_a = full.count(Study::A);
    let data = CombinedDataset::new(full.ivs, full.rows[..n_a].to_vec()).unwrap();
    let priors = PriorSpec::default();
    let sigma2 = sim.sigma_true * sim.sigma_true;
    let mut init = ParamState::for_data(&data);
    init.delta = [sim.delta_true; 4];
    init.sigma2 = [sigma2; 8];
    init.u = truth.latent[..n_a].iter().map(|l| l.u).collect();
    let mcmc = McmcConfig {
        n_iter: n_draws + 200,
        burn_in: 200,
        seed: 5,
        clamp: Clamp {
            delta: true,
            sigma2: true,
            u: true,
        },
        ..Default::default()
    };
    let draws = run_chain_from(&data, &priors, &mcmc, init.clone()).unwrap();
    let b = draws.column("beta1").unwrap();
    let mean = b.iter().sum::<f64>() / b.len() as f64;
    let sd = (b.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (b.len() - 1) as f64).sqrt();

    let (mut sxx, mut sxr) = (0.0, 0.0);
    for (row, u) in data.rows.iter().zip(&init.u) {
        let x = row.x1.unwrap();
        sxx += x * x;
        sxr += x * (row.y1 - init.delta[Equation::Y1.index()] * u);
    }
    let precision = sxx / sigma2 + 1.0 / (priors.beta_sd * priors.beta_sd);
    (mean, sd, sxr / sigma2 / precision, precision.powf(-0.5))
}
