//! Study-stratified partitioning and recentred pooling of subset posteriors.
//!
//! Each subset's draws are shifted by `mu_hat - mu_j`, where `mu_j` is that
//! subset's posterior mean and `mu_hat` the average of all `mu_j`, and then
//! pooled. The pooled column means therefore equal `mu_hat` up to rounding.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::{CombinedDataset, Study, Truth};
use crate::error::{Error, Result};
use crate::gibbs::{run_chain, DrawsMeta, McmcConfig, PosteriorDraws};
use crate::model::PriorSpec;
use crate::seed::{derive_seed, stream, SeedLabel};

/// Splits `data` into `j` subsets with equal study-A and study-B counts.
///
/// Rows of each study are shuffled, then dealt round-robin. Within a subset,
/// study-A rows precede study-B rows. `j = 1` returns the data unchanged.
pub fn partition(data: &CombinedDataset, j: usize, seed: u64) -> Result<Vec<CombinedDataset>> {
    if j == 0 {
        return Err(Error::Config("subset count J must be >= 1".into()));
    }
    let (n_a, n_b) = (data.count(Study::A), data.count(Study::B));
    for (name, n) in [("n_A", n_a), ("n_B", n_b)] {
        if n % j != 0 {
            return Err(Error::Config(format!("{name} = {n} is not divisible by J = {j}")));
        }
    }
    if j == 1 {
        return Ok(vec![data.clone()]);
    }
    let mut rng = stream(derive_seed(seed, &[SeedLabel::Role("partition")]));
    let mut members: Vec<Vec<usize>> = vec![Vec::with_capacity(data.len() / j); j];
    for study in [Study::A, Study::B] {
        let mut idx: Vec<usize> = (0..data.len()).filter(|&i| data.rows[i].study == study).collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            members[pos % j].push(i);
        }
    }
    Ok(members
        .into_iter()
        .map(|idx| CombinedDataset {
            ivs: data.ivs,
            rows: idx.iter().map(|&i| data.rows[i].clone()).collect(),
            truth: data.truth.as_ref().map(|t| Truth {
                config: t.config,
                random_effects: t.random_effects,
                latent: idx.iter().map(|&i| t.latent[i]).collect(),
            }),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsetPosterior {
    pub index: usize,
    pub draws: PosteriorDraws,
    pub mu: Vec<f64>,
}

impl SubsetPosterior {
    pub fn new(index: usize, draws: PosteriorDraws) -> Self {
        let mu = draws.means();
        SubsetPosterior { index, draws, mu }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedPosterior {
    pub draws: PosteriorDraws,
    pub mu_hat: Vec<f64>,
    pub j: usize,
}

/// Recentres every subset on the average subset mean and pools the draws.
pub fn aggregate_posteriors(subsets: &[SubsetPosterior]) -> Result<AggregatedPosterior> {
    let first = subsets
        .first()
        .ok_or_else(|| Error::Config("cannot aggregate zero subsets".into()))?;
    let names = first.draws.names();
    for s in &subsets[1..] {
        if s.draws.names() != names {
            let a: BTreeSet<&String> = names.iter().collect();
            let b: BTreeSet<&String> = s.draws.names().iter().collect();
            let only_first: Vec<&str> = a.difference(&b).map(|n| n.as_str()).collect();
            let only_other: Vec<&str> = b.difference(&a).map(|n| n.as_str()).collect();
            return Err(Error::Data(format!(
                "subset {} parameters differ from subset {}: missing [{}], extra [{}]{}",
                s.index,
                first.index,
                only_first.join(", "),
                only_other.join(", "),
                if only_first.is_empty() && only_other.is_empty() {
                    " (order differs)"
                } else {
                    ""
                }
            )));
        }
        if s.draws.n_draws() != first.draws.n_draws() {
            return Err(Error::Data(format!(
                "subset {} has {} draws, subset {} has {}",
                s.index,
                s.draws.n_draws(),
                first.index,
                first.draws.n_draws()
            )));
        }
    }
    let p = names.len();
    // Sorted before summing so mu_hat does not depend on subset order.
    let mu_hat: Vec<f64> = (0..p)
        .map(|k| {
            let mut col: Vec<f64> = subsets.iter().map(|s| s.mu[k]).collect();
            col.sort_by(f64::total_cmp);
            crate::stats::mean(col)
        })
        .collect();
    let mut values = Vec::with_capacity(subsets.len() * first.draws.values().len());
    for s in subsets {
        let shift: Vec<f64> = mu_hat.iter().zip(&s.mu).map(|(m, mj)| m - mj).collect();
        for row in s.draws.rows() {
            values.extend(row.iter().zip(&shift).map(|(v, d)| v + d));
        }
    }
    let meta = DrawsMeta {
        seed: first.draws.meta.seed,
        acceptance_rate: 1.0,
        config: first.draws.meta.config,
    };
    Ok(AggregatedPosterior {
        draws: PosteriorDraws::new(names.to_vec(), values, meta)?,
        mu_hat,
        j: subsets.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedFit {
    pub subsets: Vec<SubsetPosterior>,
    pub aggregated: AggregatedPosterior,
    /// Wall-clock seconds per subset chain.
    pub timings: Vec<f64>,
}

/// JSON summary of a partitioned fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub j: usize,
    pub master_seed: u64,
    pub names: Vec<String>,
    pub mu_subsets: Vec<Vec<f64>>,
    pub mu_hat: Vec<f64>,
    pub chain_seeds: Vec<u64>,
    pub timings_sec: Vec<f64>,
}

impl PartitionedFit {
    pub fn manifest(&self, master_seed: u64) -> PartitionManifest {
        PartitionManifest {
            j: self.aggregated.j,
            master_seed,
            names: self.aggregated.draws.names().to_vec(),
            mu_subsets: self.subsets.iter().map(|s| s.mu.clone()).collect(),
            mu_hat: self.aggregated.mu_hat.clone(),
            chain_seeds: self.subsets.iter().map(|s| s.draws.meta.seed).collect(),
            timings_sec: self.timings.clone(),
        }
    }
}

/// Seed of subset `j`'s chain under master seed `master`.
pub fn subset_chain_seed(master: u64, j: usize) -> u64 {
    derive_seed(master, &[SeedLabel::Subset(j as u64), SeedLabel::Role("chain")])
}

/// Partitions with `mcmc.seed` as master seed, runs one chain per subset on at
/// most `workers` threads, and aggregates.
pub fn fit_partitioned(
    data: &CombinedDataset,
    j: usize,
    priors: &PriorSpec,
    mcmc: &McmcConfig,
    workers: usize,
) -> Result<PartitionedFit> {
    let parts = partition(data, j, mcmc.seed)?;
    let results = crate::parallel::map_indexed(workers, parts.len(), |k| -> Result<(SubsetPosterior, f64)> {
        let start = Instant::now();
        let cfg = mcmc.with_seed(subset_chain_seed(mcmc.seed, k));
        let draws = run_chain(&parts[k], priors, &cfg).map_err(|e| Error::Subset {
            index: k,
            source: Box::new(e),
        })?;
        Ok((SubsetPosterior::new(k, draws), start.elapsed().as_secs_f64()))
    })?;
    let mut subsets = Vec::with_capacity(j);
    let mut timings = Vec::with_capacity(j);
    for r in results {
        let (s, t) = r?;
        subsets.push(s);
        timings.push(t);
    }
    let aggregated = aggregate_posteriors(&subsets)?;
    Ok(PartitionedFit {
        subsets,
        aggregated,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{simulate_dataset, SimConfig};
    use proptest::prelude::*;

    fn subset(index: usize, names: &[&str], cols: &[Vec<f64>]) -> SubsetPosterior {
        let n = cols[0].len();
        let values = (0..n).flat_map(|i| cols.iter().map(move |c| c[i])).collect();
        let draws = PosteriorDraws::new(
            names.iter().map(|s| s.to_string()).collect(),
            values,
            DrawsMeta::default(),
        )
        .unwrap();
        SubsetPosterior::new(index, draws)
    }

    fn small(n_total: usize, missing_rate: f64) -> CombinedDataset {
        simulate_dataset(&SimConfig {
            n_total,
            missing_rate,
            seed: 5,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn forced_arithmetic() {
        let s1 = subset(0, &["b"], &[vec![1.0, 2.0, 3.0]]);
        let s2 = subset(1, &["b"], &[vec![3.0, 4.0, 5.0]]);
        let agg = aggregate_posteriors(&[s1, s2]).unwrap();
        assert_eq!(agg.mu_hat, vec![3.0]);
        assert_eq!(agg.draws.column("b").unwrap(), vec![2.0, 3.0, 4.0, 2.0, 3.0, 4.0]);
        assert_eq!(agg.draws.mean("b").unwrap(), 3.0);
    }

    #[test]
    fn single_subset_is_identity() {
        let s = subset(0, &["a", "b"], &[vec![0.1, 0.7, -0.2], vec![5.0, 5.5, 4.25]]);
        let agg = aggregate_posteriors(std::slice::from_ref(&s)).unwrap();
        assert_eq!(agg.draws.values(), s.draws.values());
    }

    #[test]
    fn equal_means_average_variances() {
        let s1 = subset(0, &["a"], &[vec![-1.0, 1.0, -1.0, 1.0]]);
        let s2 = subset(1, &["a"], &[vec![-3.0, 3.0, -3.0, 3.0]]);
        let agg = aggregate_posteriors(&[s1.clone(), s2.clone()]).unwrap();
        let var = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64;
        let pooled = var(&agg.draws.column("a").unwrap());
        let avg = 0.5 * (var(&s1.draws.column("a").unwrap()) + var(&s2.draws.column("a").unwrap()));
        assert!((pooled - avg).abs() < 1e-12);
    }

    #[test]
    fn mismatched_names_listed() {
        let s1 = subset(0, &["a", "b"], &[vec![1.0], vec![2.0]]);
        let s2 = subset(1, &["a", "c"], &[vec![1.0], vec![2.0]]);
        let err = aggregate_posteriors(&[s1, s2]).unwrap_err().to_string();
        assert!(err.contains("missing [b]") && err.contains("extra [c]"), "{err}");
    }

    #[test]
    fn partition_counts_and_multiset() {
        let data = small(20, 0.5);
        let parts = partition(&data, 5, 9).unwrap();
        assert_eq!(parts.len(), 5);
        for p in &parts {
            assert_eq!(p.count(Study::A), 2);
            assert_eq!(p.count(Study::B), 2);
            let t = p.truth.as_ref().unwrap();
            assert_eq!(t.latent.len(), p.len());
        }
        let key = |r: &crate::data::Row| format!("{r:?}");
        let mut all: Vec<String> = parts.iter().flat_map(|p| p.rows.iter().map(key)).collect();
        let mut orig: Vec<String> = data.rows.iter().map(key).collect();
        all.sort();
        orig.sort();
        assert_eq!(all, orig);
        assert_eq!(partition(&data, 1, 9).unwrap(), vec![data.clone()]);
    }

    #[test]
    fn indivisible_split_names_study() {
        let data = small(19, 9.0 / 19.0);
        let err = partition(&data, 5, 0).unwrap_err().to_string();
        assert!(err.contains("n_B = 9"), "{err}");
        assert!(partition(&data, 0, 0).is_err());
    }

    proptest! {
        #[test]
        fn pooled_means_equal_mu_hat(
            cols in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 8), 1..6),
            shift in -1e3f64..1e3,
        ) {
            let subsets: Vec<SubsetPosterior> = cols
                .iter()
                .enumerate()
                .map(|(j, c)| subset(j, &["p"], &[c.iter().map(|v| v + shift * j as f64).collect()]))
                .collect();
            let agg = aggregate_posteriors(&subsets).unwrap();
            let m = agg.draws.mean("p").unwrap();
            prop_assert!((m - agg.mu_hat[0]).abs() <= 1e-10 * agg.mu_hat[0].abs().max(1.0));

            let mut reversed = subsets.clone();
            reversed.reverse();
            let back = aggregate_posteriors(&reversed).unwrap();
            let mut x = agg.draws.column("p").unwrap();
            let mut y = back.draws.column("p").unwrap();
            x.sort_by(f64::total_cmp);
            y.sort_by(f64::total_cmp);
            prop_assert_eq!(x, y);
        }
    }
}
