//! Simulated two-study datasets.
//!
//! Study A is fully observed. Study B is generated from the same structural
//! equations shifted by one draw of study-level offsets, and its exposures are
//! then masked (kept only in [`Truth`](crate::data::Truth)).

use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CombinedDataset, IvCounts, LatentRow, Row, Study, Truth};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream, SeedLabel};

/// Support of the study-B offsets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VRange {
    /// Independent U(lo, hi) draws; requires `lo < hi`.
    Uniform { lo: f64, hi: f64 },
    /// Every offset set to the given constant.
    Fixed(f64),
}

impl Default for VRange {
    fn default() -> Self {
        VRange::Uniform { lo: -0.5, hi: 0.5 }
    }
}

impl VRange {
    pub fn validate(&self) -> Result<()> {
        match *self {
            VRange::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite()) => Err(Error::Config(format!(
                "v_range bounds must be finite, got [{lo}, {hi}]"
            ))),
            VRange::Uniform { lo, hi } if lo >= hi => Err(Error::Config(format!(
                "v_range [{lo}, {hi}] is empty or degenerate; use a fixed offset instead"
            ))),
            VRange::Fixed(v) if !v.is_finite() => Err(Error::Config(format!("fixed v offset must be finite, got {v}"))),
            _ => Ok(()),
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        match *self {
            VRange::Uniform { lo, hi } => (lo..=hi).contains(&v),
            VRange::Fixed(c) => v == c,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n_total: usize,
    /// Fraction of rows belonging to study B.
    pub missing_rate: f64,
    /// Common value of every instrument-exposure coefficient.
    pub iv_strength: f64,
    pub beta_true: [f64; 2],
    pub n_iv: IvCounts,
    /// Allele frequency: genotypes are Binomial(2, maf_param).
    pub maf_param: f64,
    /// Common confounder effect on all four equations.
    pub delta_true: f64,
    /// Common noise standard deviation.
    pub sigma_true: f64,
    pub v_range: VRange,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_total: 400,
            missing_rate: 0.5,
            iv_strength: 0.3,
            beta_true: [0.3, 0.3],
            n_iv: IvCounts::default(),
            maf_param: 0.3,
            delta_true: 1.0,
            sigma_true: 0.1,
            v_range: VRange::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    /// `(n_A, n_B)`; fails unless `n_total * missing_rate` is integral.
    pub fn split(&self) -> Result<(usize, usize)> {
        if !(self.missing_rate > 0.0 && self.missing_rate < 1.0) {
            return Err(Error::Config(format!(
                "missing_rate must lie in (0, 1), got {}",
                self.missing_rate
            )));
        }
        let exact = self.n_total as f64 * self.missing_rate;
        let n_b = exact.round();
        if (exact - n_b).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "n_total ({}) x missing_rate ({}) = {exact} is not an integer",
                self.n_total, self.missing_rate
            )));
        }
        let n_b = n_b as usize;
        Ok((self.n_total - n_b, n_b))
    }

    pub fn validate(&self) -> Result<()> {
        let (n_a, n_b) = self.split()?;
        if n_a == 0 || n_b == 0 {
            return Err(Error::Config(format!(
                "n_total ({}) and missing_rate ({}) leave an empty study (n_A = {n_a}, n_B = {n_b})",
                self.n_total, self.missing_rate
            )));
        }
        let ivs = self.n_iv;
        if ivs.l == 0 || ivs.k == 0 || ivs.m == 0 {
            return Err(Error::Config(format!("n_iv counts must be >= 1, got {ivs:?}")));
        }
        if !(0.0..=1.0).contains(&self.maf_param) {
            return Err(Error::Config(format!(
                "maf_param must lie in [0, 1], got {}",
                self.maf_param
            )));
        }
        if !(self.sigma_true > 0.0 && self.sigma_true.is_finite()) {
            return Err(Error::Config(format!(
                "sigma_true must be positive, got {}",
                self.sigma_true
            )));
        }
        let reals = [self.iv_strength, self.beta_true[0], self.beta_true[1], self.delta_true];
        if reals.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite effect size".into()));
        }
        self.v_range.validate()
    }

    /// Short stable identifier, e.g. `m0.5_a0.3_b0.3`.
    pub fn id(&self) -> String {
        if self.beta_true[0] == self.beta_true[1] {
            format!("m{}_a{}_b{}", self.missing_rate, self.iv_strength, self.beta_true[0])
        } else {
            format!(
                "m{}_a{}_b{}-{}",
                self.missing_rate, self.iv_strength, self.beta_true[0], self.beta_true[1]
            )
        }
    }
}

/// Study-B offsets `(V_X1, V_X2, V_Y1, V_Y2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomEffects {
    pub v: [f64; 4],
}

/// One draw of the study-level offsets, from a stream derived from `cfg.seed`.
pub fn draw_random_effects(cfg: &SimConfig) -> Result<RandomEffects> {
    cfg.v_range.validate()?;
    let mut rng = stream(derive_seed(cfg.seed, &[SeedLabel::Role("random-effects")]));
    let v = match cfg.v_range {
        VRange::Uniform { lo, hi } => std::array::from_fn(|_| rng.random_range(lo..hi)),
        VRange::Fixed(c) => [c; 4],
    };
    Ok(RandomEffects { v })
}

pub fn simulate_dataset(cfg: &SimConfig) -> Result<CombinedDataset> {
    cfg.validate()?;
    let (n_a, n_b) = cfg.split()?;
    let effects = draw_random_effects(cfg)?;
    let geno = Binomial::new(2, cfg.maf_param).map_err(|e| Error::Config(format!("maf_param: {e}")))?;
    let mut rng = stream(derive_seed(cfg.seed, &[SeedLabel::Role("rows")]));
    let ivs = cfg.n_iv;
    let (alpha, delta, sigma) = (cfg.iv_strength, cfg.delta_true, cfg.sigma_true);
    let [b1, b2] = cfg.beta_true;

    let mut rows = Vec::with_capacity(cfg.n_total);
    let mut latent = Vec::with_capacity(cfg.n_total);
    for i in 0..cfg.n_total {
        let study = if i < n_a { Study::A } else { Study::B };
        let v = match study {
            Study::A => [0.0; 4],
            Study::B => effects.v,
        };
        let mut draw_z = |count: usize| -> Vec<u8> { (0..count).map(|_| geno.sample(&mut rng) as u8).collect() };
        let z1 = draw_z(ivs.l);
        let z2 = draw_z(ivs.k);
        let z3 = draw_z(ivs.m);
        let sum = |z: &[u8]| z.iter().map(|&g| f64::from(g)).sum::<f64>();
        let u: f64 = rng.sample(StandardNormal);
        let e: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
        let x1 = v[0] + alpha * (sum(&z1) + sum(&z3)) + delta * u + sigma * e[0];
        let x2 = v[1] + alpha * (sum(&z2) + sum(&z3)) + delta * u + sigma * e[1];
        let y1 = v[2] + b1 * x1 + delta * u + sigma * e[2];
        let y2 = v[3] + b2 * x2 + delta * u + sigma * e[3];
        let observed = study == Study::A;
        rows.push(Row {
            study,
            z1,
            z2,
            z3,
            x1: observed.then_some(x1),
            x2: observed.then_some(x2),
            y1,
            y2,
        });
        latent.push(LatentRow { u, x1, x2 });
    }
    debug_assert_eq!(rows.len(), n_a + n_b);
    let mut data = CombinedDataset::new(ivs, rows)?;
    data.truth = Some(Truth {
        config: *cfg,
        random_effects: effects,
        latent,
    });
    Ok(data)
}

/// JSON sidecar written next to a simulated dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config: SimConfig,
    pub seed: u64,
    pub n_a: usize,
    pub n_b: usize,
    pub random_effects: RandomEffects,
}

impl Provenance {
    pub fn of(data: &CombinedDataset) -> Option<Provenance> {
        let truth = data.truth.as_ref()?;
        Some(Provenance {
            config: truth.config,
            seed: truth.config.seed,
            n_a: data.count(Study::A),
            n_b: data.count(Study::B),
            random_effects: truth.random_effects,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}
