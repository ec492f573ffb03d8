//! Two-sample inverse-variance weighted estimator.
//!
//! Exposure-side associations come from study A, which is the only study with
//! observed exposures. Outcome-side associations come from study B. `beta1`
//! uses the instruments of `z1` and `z3`, and `beta2` uses those of `z2` and
//! `z3`.

use serde::{Deserialize, Serialize};

use crate::data::{CombinedDataset, Study};
use crate::error::{Error, Result};

/// Lower bound applied to every per-instrument standard error.
pub const SE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssocSource {
    Exposure,
    Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvEntry {
    pub label: String,
    pub estimate: f64,
    pub se: f64,
}

/// Marginal instrument-trait regressions, one entry per usable instrument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvAssoc {
    pub source: AssocSource,
    pub entries: Vec<IvEntry>,
    /// Labels dropped because their genotype column was constant.
    pub excluded: Vec<String>,
}

impl IvAssoc {
    pub fn get(&self, label: &str) -> Option<&IvEntry> {
        self.entries.iter().find(|e| e.label == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaldRatio {
    pub label: String,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvwResult {
    pub estimate: f64,
    pub se: f64,
    pub ci95: [f64; 2],
    pub ratios: Vec<WaldRatio>,
}

/// IVW estimates for both causal effects of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvwFit {
    pub beta1: IvwResult,
    pub beta2: IvwResult,
}

impl IvwFit {
    pub fn get(&self, target: usize) -> &IvwResult {
        if target == 0 {
            &self.beta1
        } else {
            &self.beta2
        }
    }
}

/// Simple linear regression of `trait_values` on each genotype column.
pub fn per_iv_associations(
    source: AssocSource,
    columns: &[(String, Vec<f64>)],
    trait_values: &[f64],
) -> Result<IvAssoc> {
    let n = trait_values.len();
    if n < 3 {
        return Err(Error::Data(format!(
            "per-instrument regression needs at least 3 individuals, got {n}"
        )));
    }
    let t_mean = crate::stats::mean(trait_values.iter().copied());
    let mut entries = Vec::with_capacity(columns.len());
    let mut excluded = Vec::new();
    for (label, z) in columns {
        if z.len() != n {
            return Err(Error::Data(format!(
                "instrument {label} has {} values for {n} individuals",
                z.len()
            )));
        }
        let z_mean = crate::stats::mean(z.iter().copied());
        let sxx = crate::stats::sum(z.iter().map(|v| (v - z_mean) * (v - z_mean)));
        if sxx <= 0.0 {
            log::warn!("instrument {label} is constant in the {source:?} sample; excluded");
            excluded.push(label.clone());
            continue;
        }
        let sxy = crate::stats::sum(z.iter().zip(trait_values).map(|(v, t)| (v - z_mean) * (t - t_mean)));
        let slope = sxy / sxx;
        let intercept = t_mean - slope * z_mean;
        let ssr = crate::stats::sum(z.iter().zip(trait_values).map(|(v, t)| {
            let r = t - intercept - slope * v;
            r * r
        }));
        let se = (ssr / (n - 2) as f64 / sxx).sqrt().max(SE_FLOOR);
        entries.push(IvEntry {
            label: label.clone(),
            estimate: slope,
            se,
        });
    }
    Ok(IvAssoc {
        source,
        entries,
        excluded,
    })
}

/// Fixed-effect IVW over the instruments usable on both sides.
///
/// Every non-excluded exposure-side label must appear on the outcome side,
/// either as an entry or as an exclusion, and vice versa.
pub fn ivw_estimate(exposure: &IvAssoc, outcome: &IvAssoc) -> Result<IvwResult> {
    let known = |side: &IvAssoc, label: &str| side.get(label).is_some() || side.excluded.iter().any(|l| l == label);
    let unmatched: Vec<&str> = exposure
        .entries
        .iter()
        .filter(|e| !known(outcome, &e.label))
        .chain(outcome.entries.iter().filter(|e| !known(exposure, &e.label)))
        .map(|e| e.label.as_str())
        .collect();
    if !unmatched.is_empty() {
        return Err(Error::Estimation(format!(
            "instrument labels differ between sides: {}",
            unmatched.join(", ")
        )));
    }
    let pairs: Vec<(&IvEntry, &IvEntry)> = exposure
        .entries
        .iter()
        .filter_map(|a| outcome.get(&a.label).map(|g| (a, g)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::Estimation("no instruments left after exclusions".into()));
    }
    let num = crate::stats::sum(pairs.iter().map(|(a, g)| a.estimate * g.estimate / (g.se * g.se)));
    let den = crate::stats::sum(pairs.iter().map(|(a, g)| a.estimate * a.estimate / (g.se * g.se)));
    if !(den > 0.0 && den.is_finite()) {
        return Err(Error::Estimation(format!(
            "IVW weight sum is {den}; exposure associations are all zero"
        )));
    }
    let estimate = num / den;
    let se = den.sqrt().recip();
    let ratios = pairs
        .iter()
        .map(|(a, g)| WaldRatio {
            label: a.label.clone(),
            ratio: g.estimate / a.estimate,
        })
        .collect();
    Ok(IvwResult {
        estimate,
        se,
        ci95: [estimate - 1.96 * se, estimate + 1.96 * se],
        ratios,
    })
}

/// Genotype columns `z{group}_{j}` of one study for the instruments of `exposure`.
fn instrument_columns(data: &CombinedDataset, study: Study, exposure: usize) -> Vec<(String, Vec<f64>)> {
    let rows: Vec<_> = data.rows.iter().filter(|r| r.study == study).collect();
    let (own, own_count) = if exposure == 0 {
        ("z1", data.ivs.l)
    } else {
        ("z2", data.ivs.k)
    };
    let mut cols = Vec::with_capacity(own_count + data.ivs.m);
    for j in 0..own_count {
        let values = rows
            .iter()
            .map(|r| f64::from(if exposure == 0 { r.z1[j] } else { r.z2[j] }))
            .collect();
        cols.push((format!("{own}_{}", j + 1), values));
    }
    for j in 0..data.ivs.m {
        let values = rows.iter().map(|r| f64::from(r.z3[j])).collect();
        cols.push((format!("z3_{}", j + 1), values));
    }
    cols
}

/// Both IVW estimates of a combined dataset.
pub fn ivw_fit(data: &CombinedDataset) -> Result<IvwFit> {
    data.require_both_studies()?;
    let fit = |e: usize| -> Result<IvwResult> {
        let x: Vec<f64> = data
            .rows
            .iter()
            .filter(|r| r.study == Study::A)
            .map(|r| {
                let x = if e == 0 { r.x1 } else { r.x2 };
                x.ok_or_else(|| Error::Data("study-A row without an observed exposure".into()))
            })
            .collect::<Result<_>>()?;
        let y: Vec<f64> = data
            .rows
            .iter()
            .filter(|r| r.study == Study::B)
            .map(|r| if e == 0 { r.y1 } else { r.y2 })
            .collect();
        let exposure = per_iv_associations(AssocSource::Exposure, &instrument_columns(data, Study::A, e), &x)?;
        let outcome = per_iv_associations(AssocSource::Outcome, &instrument_columns(data, Study::B, e), &y)?;
        ivw_estimate(&exposure, &outcome)
    };
    Ok(IvwFit {
        beta1: fit(0)?,
        beta2: fit(1)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(label: &str, estimate: f64, se: f64) -> IvEntry {
        IvEntry {
            label: label.into(),
            estimate,
            se,
        }
    }

    fn assoc(source: AssocSource, entries: Vec<IvEntry>) -> IvAssoc {
        IvAssoc {
            source,
            entries,
            excluded: vec![],
        }
    }

    #[test]
    fn hand_regression() {
        let cols = vec![("g".to_string(), vec![0.0, 1.0, 2.0, 1.0])];
        let out = per_iv_associations(AssocSource::Exposure, &cols, &[0.1, 0.9, 2.1, 1.1]).unwrap();
        let e = &out.entries[0];
        // z mean 1, Sxx 2, Sxy 2, residuals (0.05, -0.15, 0.05, 0.05), SSR 0.03.
        assert!((e.estimate - 1.0).abs() < 1e-12);
        assert!((e.se - 0.0075f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn perfect_fit_hits_floor() {
        let z = vec![0.0, 1.0, 2.0, 1.0, 0.0];
        let t: Vec<f64> = z.iter().map(|v| 2.0 * v).collect();
        let out = per_iv_associations(AssocSource::Outcome, &[("g".into(), z)], &t).unwrap();
        assert!((out.entries[0].estimate - 2.0).abs() < 1e-12);
        assert_eq!(out.entries[0].se, SE_FLOOR);
    }

    #[test]
    fn constant_column_is_excluded() {
        let cols = vec![
            ("flat".to_string(), vec![1.0; 4]),
            ("ok".to_string(), vec![0.0, 1.0, 2.0, 1.0]),
        ];
        let out = per_iv_associations(AssocSource::Exposure, &cols, &[0.0, 1.0, 2.0, 1.5]).unwrap();
        assert_eq!(out.excluded, vec!["flat".to_string()]);
        assert_eq!(out.entries.len(), 1);
        assert!(per_iv_associations(AssocSource::Exposure, &cols, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn single_instrument_is_wald_ratio() {
        let r = ivw_estimate(
            &assoc(AssocSource::Exposure, vec![entry("g", 0.5, 0.01)]),
            &assoc(AssocSource::Outcome, vec![entry("g", 0.15, 0.05)]),
        )
        .unwrap();
        assert!((r.estimate - 0.3).abs() < 1e-12);
        assert!((r.se - 0.1).abs() < 1e-12);
        assert!((r.ci95[0] - (0.3 - 0.196)).abs() < 1e-12);
        assert!((r.ratios[0].ratio - 0.3).abs() < 1e-12);
    }

    #[test]
    fn two_equal_weight_instruments_average() {
        let r = ivw_estimate(
            &assoc(AssocSource::Exposure, vec![entry("a", 0.5, 0.1), entry("b", 0.5, 0.1)]),
            &assoc(AssocSource::Outcome, vec![entry("a", 0.1, 0.05), entry("b", 0.2, 0.05)]),
        )
        .unwrap();
        assert!((r.estimate - 0.3).abs() < 1e-12);
    }

    #[test]
    fn label_mismatch_and_empty_set() {
        let exp = assoc(AssocSource::Exposure, vec![entry("a", 0.5, 0.1)]);
        let out = assoc(AssocSource::Outcome, vec![entry("b", 0.1, 0.05)]);
        let err = ivw_estimate(&exp, &out).unwrap_err().to_string();
        assert!(err.contains('a') && err.contains('b'), "{err}");
        let mut out = assoc(AssocSource::Outcome, vec![]);
        out.excluded.push("a".into());
        assert!(matches!(ivw_estimate(&exp, &out), Err(Error::Estimation(_))));
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((0.05f64..1.0, -1.0f64..1.0, 0.01f64..0.5), 1..12)
    }

    fn build(pairs: &[(f64, f64, f64)], scale: f64) -> (IvAssoc, IvAssoc) {
        let exp = pairs
            .iter()
            .enumerate()
            .map(|(i, p)| entry(&format!("g{i}"), p.0, 0.1))
            .collect();
        let out = pairs
            .iter()
            .enumerate()
            .map(|(i, p)| entry(&format!("g{i}"), p.1, p.2 * scale))
            .collect();
        (assoc(AssocSource::Exposure, exp), assoc(AssocSource::Outcome, out))
    }

    proptest! {
        #[test]
        fn permutation_invariant(pairs in arb_pairs(), rot in 0usize..12) {
            let (e, o) = build(&pairs, 1.0);
            let base = ivw_estimate(&e, &o).unwrap();
            let mut e2 = e.clone();
            let mut o2 = o.clone();
            let k = rot % pairs.len();
            e2.entries.rotate_left(k);
            o2.entries.reverse();
            let other = ivw_estimate(&e2, &o2).unwrap();
            prop_assert!((base.estimate - other.estimate).abs() <= 1e-12 * (1.0 + base.estimate.abs()));
            prop_assert!((base.se - other.se).abs() <= 1e-12 * base.se);
        }

        #[test]
        fn outcome_se_scaling(pairs in arb_pairs(), c in 0.1f64..10.0) {
            let (e, o) = build(&pairs, 1.0);
            let (e2, o2) = build(&pairs, c);
            let a = ivw_estimate(&e, &o).unwrap();
            let b = ivw_estimate(&e2, &o2).unwrap();
            prop_assert!((a.estimate - b.estimate).abs() <= 1e-10 * (1.0 + a.estimate.abs()));
            prop_assert!((b.se - c * a.se).abs() <= 1e-10 * b.se);
        }
    }
}
