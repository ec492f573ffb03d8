//! Parameters, priors and the joint log-density of the two-study model.
//!
//! For a study-A row (study-B rows add the offsets `v`):
//!
//! ```text
//! u  ~ N(0, 1)
//! x1 ~ N(alpha1·z1 + alpha31·z3 + delta_x1·u, sigma2[x1, A])
//! x2 ~ N(alpha2·z2 + alpha32·z3 + delta_x2·u, sigma2[x2, A])
//! y1 ~ N(beta1·x1 + delta_y1·u,               sigma2[y1, A])
//! y2 ~ N(beta2·x2 + delta_y2·u,               sigma2[y2, A])
//! ```
//!
//! Study-B exposures are never observed; the imputed values in
//! [`ParamState::x_imputed`] stand in for them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::{CombinedDataset, IvCounts, Row, Study};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Equation {
    X1,
    X2,
    Y1,
    Y2,
}

impl Equation {
    pub const ALL: [Equation; 4] = [Equation::X1, Equation::X2, Equation::Y1, Equation::Y2];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        match self {
            Equation::X1 => "x1",
            Equation::X2 => "x2",
            Equation::Y1 => "y1",
            Equation::Y2 => "y2",
        }
    }
}

/// Which quantity the inverse-gamma prior is placed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IgTarget {
    /// Inv-Gamma on the noise variance (conjugate).
    Variance,
    /// Inv-Gamma on the noise standard deviation, updated by slice sampling
    /// on `ln sd`.
    #[default]
    Sd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    pub beta_sd: f64,
    pub alpha_sd: f64,
    pub delta_sd: f64,
    pub v_sd: f64,
    pub ig_shape: f64,
    pub ig_rate: f64,
    pub ig_target: IgTarget,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            beta_sd: 10.0,
            alpha_sd: 0.3,
            delta_sd: 1.0,
            v_sd: 1.0,
            ig_shape: 3.0,
            ig_rate: 2.0,
            ig_target: IgTarget::Sd,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        let sds = [
            ("beta_sd", self.beta_sd),
            ("alpha_sd", self.alpha_sd),
            ("delta_sd", self.delta_sd),
            ("v_sd", self.v_sd),
            ("ig_rate", self.ig_rate),
        ];
        for (name, value) in sds {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Config(format!("prior {name} must be positive, got {value}")));
            }
        }
        if !(self.ig_shape > 2.0 && self.ig_shape.is_finite()) {
            return Err(Error::Config(format!(
                "prior ig_shape must exceed 2, got {}",
                self.ig_shape
            )));
        }
        Ok(())
    }
}

/// Full state of one chain: parameters plus latent confounders and imputed
/// study-B exposures.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamState {
    pub beta: [f64; 2],
    pub alpha1: Vec<f64>,
    pub alpha2: Vec<f64>,
    pub alpha31: Vec<f64>,
    pub alpha32: Vec<f64>,
    /// Indexed by [`Equation`].
    pub delta: [f64; 4],
    /// Indexed by `2 * equation + study`; see [`ParamState::sigma2_index`].
    pub sigma2: [f64; 8],
    /// Study-B offsets, indexed by [`Equation`].
    pub v: [f64; 4],
    /// One latent confounder per dataset row.
    pub u: Vec<f64>,
    /// `(x1*, x2*)` for each study-B row, in row order.
    pub x_imputed: Vec<[f64; 2]>,
}

impl ParamState {
    /// All coefficients zero, unit variances, zero latents.
    pub fn zeros(ivs: &IvCounts, n_rows: usize, n_b: usize) -> Self {
        ParamState {
            beta: [0.0; 2],
            alpha1: vec![0.0; ivs.l],
            alpha2: vec![0.0; ivs.k],
            alpha31: vec![0.0; ivs.m],
            alpha32: vec![0.0; ivs.m],
            delta: [0.0; 4],
            sigma2: [1.0; 8],
            v: [0.0; 4],
            u: vec![0.0; n_rows],
            x_imputed: vec![[0.0; 2]; n_b],
        }
    }

    pub fn for_data(data: &CombinedDataset) -> Self {
        Self::zeros(&data.ivs, data.len(), data.count(Study::B))
    }

    pub const fn sigma2_index(eq: Equation, study: Study) -> usize {
        2 * (eq as usize)
            + match study {
                Study::A => 0,
                Study::B => 1,
            }
    }

    pub fn sigma2(&self, eq: Equation, study: Study) -> f64 {
        self.sigma2[Self::sigma2_index(eq, study)]
    }

    pub fn set_sigma2(&mut self, eq: Equation, study: Study, value: f64) {
        self.sigma2[Self::sigma2_index(eq, study)] = value;
    }

    pub fn check_dims(&self, data: &CombinedDataset) -> Result<()> {
        let ivs = &data.ivs;
        let dims = [
            ("alpha1", self.alpha1.len(), ivs.l),
            ("alpha2", self.alpha2.len(), ivs.k),
            ("alpha31", self.alpha31.len(), ivs.m),
            ("alpha32", self.alpha32.len(), ivs.m),
            ("u", self.u.len(), data.len()),
            ("x_imputed", self.x_imputed.len(), data.count(Study::B)),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(Error::Config(format!("state {name} has length {got}, expected {want}")));
            }
        }
        if let Some(bad) = self.sigma2.iter().find(|&&s| !(s > 0.0)) {
            return Err(Error::Config(format!("state sigma2 must be positive, got {bad}")));
        }
        Ok(())
    }

    /// Exposure-equation mean without the confounder term.
    pub fn exposure_mean(&self, row: &Row, eq: Equation) -> f64 {
        let (alpha, z, alpha3) = match eq {
            Equation::X1 => (&self.alpha1, &row.z1, &self.alpha31),
            Equation::X2 => (&self.alpha2, &row.z2, &self.alpha32),
            _ => panic!("exposure_mean called for outcome equation"),
        };
        let offset = if row.study == Study::B { self.v[eq.index()] } else { 0.0 };
        offset + dot_geno(alpha, z) + dot_geno(alpha3, &row.z3)
    }

    /// Parameter names in the column order of [`ParamState::parameter_vector`].
    pub fn parameter_names(ivs: &IvCounts) -> Vec<String> {
        let mut names = vec!["beta1".to_string(), "beta2".to_string()];
        for (prefix, count) in [
            ("alpha1", ivs.l),
            ("alpha2", ivs.k),
            ("alpha31", ivs.m),
            ("alpha32", ivs.m),
        ] {
            names.extend((1..=count).map(|j| format!("{prefix}_{j}")));
        }
        for eq in Equation::ALL {
            names.push(format!("delta_{}", eq.label()));
        }
        for eq in Equation::ALL {
            for study in ["a", "b"] {
                names.push(format!("sigma2_{}_{study}", eq.label()));
            }
        }
        for eq in Equation::ALL {
            names.push(format!("v_{}", eq.label()));
        }
        names
    }

    pub fn parameter_vector(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 + self.alpha1.len() + self.alpha2.len() + 2 * self.alpha31.len() + 16);
        out.extend(self.beta);
        out.extend(&self.alpha1);
        out.extend(&self.alpha2);
        out.extend(&self.alpha31);
        out.extend(&self.alpha32);
        out.extend(self.delta);
        out.extend(self.sigma2);
        out.extend(self.v);
        out
    }
}

pub(crate) fn dot_geno(coef: &[f64], genos: &[u8]) -> f64 {
    coef.iter().zip(genos).map(|(c, &g)| c * f64::from(g)).sum()
}

pub(crate) fn normal_logpdf(resid: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI).ln() + var.ln() + resid * resid / var)
}

pub(crate) fn inv_gamma_logpdf(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - rate / x
}

/// Joint log-density split by block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LogJoint {
    pub confounder: f64,
    pub x1: f64,
    pub x2: f64,
    pub y1: f64,
    pub y2: f64,
    pub priors: f64,
}

impl LogJoint {
    pub fn total(&self) -> f64 {
        self.confounder + self.x1 + self.x2 + self.y1 + self.y2 + self.priors
    }

    pub fn equation(&self, eq: Equation) -> f64 {
        match eq {
            Equation::X1 => self.x1,
            Equation::X2 => self.x2,
            Equation::Y1 => self.y1,
            Equation::Y2 => self.y2,
        }
    }

    fn check(self) -> Result<Self> {
        let blocks = [
            ("confounder", self.confounder),
            ("x1", self.x1),
            ("x2", self.x2),
            ("y1", self.y1),
            ("y2", self.y2),
            ("priors", self.priors),
        ];
        for (name, value) in blocks {
            if !value.is_finite() {
                return Err(Error::numerical(
                    format!("log_joint/{name}"),
                    format!("block evaluated to {value}"),
                ));
            }
        }
        Ok(self)
    }
}

/// Sum of every conditional log-density and log-prior, with imputed exposures
/// standing in for the missing study-B values.
pub fn log_joint(state: &ParamState, data: &CombinedDataset, priors: &PriorSpec) -> Result<LogJoint> {
    state.check_dims(data)?;
    let mut lj = LogJoint::default();
    let mut b_slot = 0;
    for (row, &u) in data.rows.iter().zip(&state.u) {
        let s = row.study;
        let (x1, x2) = match s {
            Study::A => (row.x1.unwrap_or(f64::NAN), row.x2.unwrap_or(f64::NAN)),
            Study::B => {
                let [a, b] = state.x_imputed[b_slot];
                b_slot += 1;
                (a, b)
            }
        };
        let offset = |eq: Equation| if s == Study::B { state.v[eq.index()] } else { 0.0 };
        lj.confounder += normal_logpdf(u, 1.0);
        lj.x1 += normal_logpdf(
            x1 - state.exposure_mean(row, Equation::X1) - state.delta[0] * u,
            state.sigma2(Equation::X1, s),
        );
        lj.x2 += normal_logpdf(
            x2 - state.exposure_mean(row, Equation::X2) - state.delta[1] * u,
            state.sigma2(Equation::X2, s),
        );
        lj.y1 += normal_logpdf(
            row.y1 - offset(Equation::Y1) - state.beta[0] * x1 - state.delta[2] * u,
            state.sigma2(Equation::Y1, s),
        );
        lj.y2 += normal_logpdf(
            row.y2 - offset(Equation::Y2) - state.beta[1] * x2 - state.delta[3] * u,
            state.sigma2(Equation::Y2, s),
        );
    }
    lj.priors = log_prior(state, priors);
    lj.check()
}

pub fn log_prior(state: &ParamState, priors: &PriorSpec) -> f64 {
    let gaussian = |values: &[f64], sd: f64| -> f64 { values.iter().map(|&v| normal_logpdf(v, sd * sd)).sum() };
    let mut lp = gaussian(&state.beta, priors.beta_sd)
        + gaussian(&state.alpha1, priors.alpha_sd)
        + gaussian(&state.alpha2, priors.alpha_sd)
        + gaussian(&state.alpha31, priors.alpha_sd)
        + gaussian(&state.alpha32, priors.alpha_sd)
        + gaussian(&state.delta, priors.delta_sd)
        + gaussian(&state.v, priors.v_sd);
    for &s2 in &state.sigma2 {
        lp += match priors.ig_target {
            IgTarget::Variance => inv_gamma_logpdf(s2, priors.ig_shape, priors.ig_rate),
            IgTarget::Sd => inv_gamma_logpdf(s2.sqrt(), priors.ig_shape, priors.ig_rate),
        };
    }
    lp
}
