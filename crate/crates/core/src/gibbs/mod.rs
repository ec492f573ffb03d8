//! Blocked Gibbs sampler with in-chain imputation of study-B exposures.
//!
//! One sweep runs, in order:
//!
//! 1. [`GibbsSampler::impute_missing_exposures`]: `x1*`, `x2*` for every
//!    study-B row from their Gaussian full conditionals.
//! 2. [`GibbsSampler::update_latent_confounder`]: each `u_i` given its row's
//!    four residuals.
//! 3. [`GibbsSampler::update_coefficients`]: conjugate Gaussian blocks
//!    `(alpha1, alpha31, delta_x1)`, `(alpha2, alpha32, delta_x2)`,
//!    `(beta1, delta_y1)`, `(beta2, delta_y2)`, then the four study-B offsets.
//! 4. [`GibbsSampler::update_variances`]: the eight noise variances.
//!
//! Every conditional is exact, so there is nothing to tune and every update
//! has a closed form to test against.

mod design;
pub mod draws;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{CombinedDataset, Study};
use crate::error::{Error, Result};
use crate::model::{Equation, IgTarget, ParamState, PriorSpec};
use crate::seed::{stream, StreamRng};
use design::Design;
pub use draws::{DrawsMeta, PosteriorDraws};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Per-equation least squares on study A; `delta = 0`, `v = 0`, `u ~ N(0, 1)`.
    #[default]
    LeastSquares,
    /// Every parameter drawn from its prior.
    PriorDraw,
}

/// How missing exposures are redrawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMode {
    /// Exposure equation times outcome likelihood (the true Gibbs conditional).
    #[default]
    FullConditional,
    /// Exposure equation only, ignoring the outcome.
    ExposureOnly,
}

/// Blocks held at their current value instead of being resampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Clamp {
    pub delta: bool,
    pub sigma2: bool,
    pub u: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: Init,
    pub imputation: ImputationMode,
    pub clamp: Clamp,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            n_iter: 5000,
            burn_in: 1000,
            thin: 1,
            seed: 0,
            init: Init::LeastSquares,
            imputation: ImputationMode::FullConditional,
            clamp: Clamp::default(),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::Config(format!(
                "burn_in ({}) must be less than n_iter ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        (self.n_iter - self.burn_in).div_ceil(self.thin)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Runs one chain from the configured initialization.
pub fn run_chain(data: &CombinedDataset, priors: &PriorSpec, cfg: &McmcConfig) -> Result<PosteriorDraws> {
    GibbsSampler::new(data, priors, cfg)?.run()
}

/// Runs one chain from an explicit starting state (required when clamping).
pub fn run_chain_from(
    data: &CombinedDataset,
    priors: &PriorSpec,
    cfg: &McmcConfig,
    initial: ParamState,
) -> Result<PosteriorDraws> {
    GibbsSampler::with_state(data, priors, cfg, initial)?.run()
}

pub struct GibbsSampler {
    design: Design,
    priors: PriorSpec,
    cfg: McmcConfig,
    rng: StreamRng,
    state: ParamState,
    /// Exposure columns: observed for study A, imputed for study B.
    x: [Vec<f64>; 2],
    /// `alpha·z` for each exposure equation, per row.
    zfit: [Vec<f64>; 2],
    iteration: Option<usize>,
}

impl GibbsSampler {
    pub fn new(data: &CombinedDataset, priors: &PriorSpec, cfg: &McmcConfig) -> Result<Self> {
        let mut sampler = Self::bare(data, priors, cfg)?;
        let state = match cfg.init {
            Init::LeastSquares => sampler.least_squares_state(),
            Init::PriorDraw => sampler.prior_draw_state(),
        };
        sampler.set_state(state)?;
        Ok(sampler)
    }

    pub fn with_state(data: &CombinedDataset, priors: &PriorSpec, cfg: &McmcConfig, state: ParamState) -> Result<Self> {
        let mut sampler = Self::bare(data, priors, cfg)?;
        sampler.set_state(state)?;
        Ok(sampler)
    }

    fn bare(data: &CombinedDataset, priors: &PriorSpec, cfg: &McmcConfig) -> Result<Self> {
        priors.validate()?;
        cfg.validate()?;
        data.validate()?;
        let design = Design::new(data);
        let n = design.n;
        let n_b = design.b_rows.len();
        Ok(GibbsSampler {
            state: ParamState::zeros(&design.ivs, n, n_b),
            x: [design.x_obs[0].clone(), design.x_obs[1].clone()],
            zfit: [vec![0.0; n], vec![0.0; n]],
            design,
            priors: *priors,
            cfg: *cfg,
            rng: stream(cfg.seed),
            iteration: None,
        })
    }

    pub fn state(&self) -> &ParamState {
        &self.state
    }

    pub fn set_state(&mut self, state: ParamState) -> Result<()> {
        let d = &self.design;
        let dims = [
            ("alpha1", state.alpha1.len(), d.ivs.l),
            ("alpha2", state.alpha2.len(), d.ivs.k),
            ("alpha31", state.alpha31.len(), d.ivs.m),
            ("alpha32", state.alpha32.len(), d.ivs.m),
            ("u", state.u.len(), d.n),
            ("x_imputed", state.x_imputed.len(), d.b_rows.len()),
        ];
        for (name, got, want) in dims {
            if got != want {
                return Err(Error::Config(format!("state {name} has length {got}, expected {want}")));
            }
        }
        if state.sigma2.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Config("state sigma2 must be positive and finite".into()));
        }
        for (slot, &i) in d.b_rows.iter().enumerate() {
            self.x[0][i] = state.x_imputed[slot][0];
            self.x[1][i] = state.x_imputed[slot][1];
        }
        self.state = state;
        self.refresh_zfit(0);
        self.refresh_zfit(1);
        Ok(())
    }

    pub fn into_state(self) -> ParamState {
        self.state
    }

    fn exposure_coef(&self, e: usize) -> Vec<f64> {
        let s = &self.state;
        let (a, a3) = if e == 0 {
            (&s.alpha1, &s.alpha31)
        } else {
            (&s.alpha2, &s.alpha32)
        };
        a.iter().chain(a3).copied().collect()
    }

    fn set_exposure_coef(&mut self, e: usize, coef: &[f64]) {
        let s = &mut self.state;
        let (a, a3) = if e == 0 {
            (&mut s.alpha1, &mut s.alpha31)
        } else {
            (&mut s.alpha2, &mut s.alpha32)
        };
        let split = a.len();
        a.copy_from_slice(&coef[..split]);
        a3.copy_from_slice(&coef[split..]);
    }

    fn refresh_zfit(&mut self, e: usize) {
        let coef = self.exposure_coef(e);
        let p = self.design.p[e];
        if p == 0 {
            self.zfit[e].iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        for (fit, zrow) in self.zfit[e].iter_mut().zip(self.design.z[e].chunks_exact(p)) {
            *fit = zrow.iter().zip(&coef).map(|(z, c)| z * c).sum();
        }
    }

    fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    fn fail(&self, block: &str, detail: impl Into<String>) -> Error {
        Error::Numerical {
            block: block.into(),
            iteration: self.iteration,
            detail: detail.into(),
        }
    }

    /// Step 2: redraw `(x1*, x2*)` for every study-B row.
    pub fn impute_missing_exposures(&mut self) -> Result<()> {
        let b_rows = std::mem::take(&mut self.design.b_rows);
        let s = &self.state;
        let sx = [s.sigma2(Equation::X1, Study::B), s.sigma2(Equation::X2, Study::B)];
        let sy = [s.sigma2(Equation::Y1, Study::B), s.sigma2(Equation::Y2, Study::B)];
        let (beta, delta, v) = (s.beta, s.delta, s.v);
        let mut finite = true;
        for (slot, &i) in b_rows.iter().enumerate() {
            let u = self.state.u[i];
            for e in 0..2 {
                let prior_mean = v[e] + self.zfit[e][i] + delta[e] * u;
                let (mean, var) = match self.cfg.imputation {
                    ImputationMode::ExposureOnly => (prior_mean, sx[e]),
                    ImputationMode::FullConditional => {
                        let b = beta[e];
                        let outcome = self.design.y[e][i] - v[2 + e] - delta[2 + e] * u;
                        let prec = 1.0 / sx[e] + b * b / sy[e];
                        ((prior_mean / sx[e] + b * outcome / sy[e]) / prec, 1.0 / prec)
                    }
                };
                let draw = mean + var.sqrt() * self.normal();
                finite &= draw.is_finite();
                self.x[e][i] = draw;
                self.state.x_imputed[slot][e] = draw;
            }
        }
        self.design.b_rows = b_rows;
        if finite {
            Ok(())
        } else {
            Err(self.fail("impute_missing_exposures", "non-finite imputed exposure"))
        }
    }

    /// Redraw every `u_i` from `N(0, 1)` times its four equation likelihoods.
    pub fn update_latent_confounder(&mut self) -> Result<()> {
        if self.cfg.clamp.u {
            return Ok(());
        }
        let s = &self.state;
        // Per study: residual weights and posterior sd.
        let mut weights = [[0.0; 4]; 2];
        let mut sds = [0.0; 2];
        for study in [Study::A, Study::B] {
            let k = study.index();
            let mut prec = 1.0;
            for eq in Equation::ALL {
                let d = s.delta[eq.index()];
                prec += d * d / s.sigma2(eq, study);
            }
            for eq in Equation::ALL {
                weights[k][eq.index()] = s.delta[eq.index()] / s.sigma2(eq, study) / prec;
            }
            sds[k] = prec.sqrt().recip();
        }
        let (beta, v) = (s.beta, s.v);
        let mut finite = true;
        for i in 0..self.design.n {
            let k = self.design.study[i].index();
            let off = if k == 1 { v } else { [0.0; 4] };
            let (x0, x1) = (self.x[0][i], self.x[1][i]);
            let r = [
                x0 - off[0] - self.zfit[0][i],
                x1 - off[1] - self.zfit[1][i],
                self.design.y[0][i] - off[2] - beta[0] * x0,
                self.design.y[1][i] - off[3] - beta[1] * x1,
            ];
            let w = &weights[k];
            let mean = w[0] * r[0] + w[1] * r[1] + w[2] * r[2] + w[3] * r[3];
            let draw = mean + sds[k] * self.normal();
            finite &= draw.is_finite();
            self.state.u[i] = draw;
        }
        if finite {
            Ok(())
        } else {
            Err(self.fail("update_latent_confounder", "non-finite confounder draw"))
        }
    }

    /// Conjugate Gaussian updates of all regression coefficients and offsets.
    pub fn update_coefficients(&mut self) -> Result<()> {
        self.exposure_block(0)?;
        self.exposure_block(1)?;
        self.outcome_block(0)?;
        self.outcome_block(1)?;
        self.offset_block()
    }

    fn exposure_block(&mut self, e: usize) -> Result<()> {
        let block = if e == 0 {
            "alpha1/alpha31/delta_x1"
        } else {
            "alpha2/alpha32/delta_x2"
        };
        let d = &self.design;
        let p = d.p[e];
        let free_delta = !self.cfg.clamp.delta;
        let dim = p + usize::from(free_delta);
        let delta = self.state.delta[e];
        let v = self.state.v[e];

        let mut zr = [vec![0.0; p], vec![0.0; p]];
        let mut zu = [vec![0.0; p], vec![0.0; p]];
        let mut uu = [0.0; 2];
        let mut ur = [0.0; 2];
        for i in 0..d.n {
            let zrow = &d.z[e][i * p..(i + 1) * p];
            let k = d.study[i].index();
            let u = self.state.u[i];
            let mut r = self.x[e][i];
            if k == 1 {
                r -= v;
            }
            if !free_delta {
                r -= delta * u;
            }
            for ((a, b), &z) in zr[k].iter_mut().zip(zu[k].iter_mut()).zip(zrow) {
                *a += z * r;
                *b += z * u;
            }
            uu[k] += u * u;
            ur[k] += u * r;
        }

        let eq = if e == 0 { Equation::X1 } else { Equation::X2 };
        let mut q = DMatrix::<f64>::zeros(dim, dim);
        let mut b = DVector::<f64>::zeros(dim);
        for study in [Study::A, Study::B] {
            let k = study.index();
            let w = 1.0 / self.state.sigma2(eq, study);
            let gram = &d.gram[e][k];
            for r in 0..p {
                for c in 0..p {
                    q[(r, c)] += w * gram[r * p + c];
                }
                b[r] += w * zr[k][r];
            }
            if free_delta {
                for j in 0..p {
                    q[(j, p)] += w * zu[k][j];
                    q[(p, j)] += w * zu[k][j];
                }
                q[(p, p)] += w * uu[k];
                b[p] += w * ur[k];
            }
        }
        let alpha_prec = self.priors.alpha_sd.powi(-2);
        for j in 0..p {
            q[(j, j)] += alpha_prec;
        }
        if free_delta {
            q[(p, p)] += self.priors.delta_sd.powi(-2);
        }
        let theta = self.draw_gaussian(q, b, block)?;
        self.set_exposure_coef(e, &theta.as_slice()[..p]);
        if free_delta {
            self.state.delta[e] = theta[p];
        }
        self.refresh_zfit(e);
        Ok(())
    }

    fn outcome_block(&mut self, e: usize) -> Result<()> {
        let block = if e == 0 { "beta1/delta_y1" } else { "beta2/delta_y2" };
        let eq = if e == 0 { Equation::Y1 } else { Equation::Y2 };
        let free_delta = !self.cfg.clamp.delta;
        let delta = self.state.delta[2 + e];
        let v = self.state.v[2 + e];
        let w = [
            1.0 / self.state.sigma2(eq, Study::A),
            1.0 / self.state.sigma2(eq, Study::B),
        ];
        let (mut xx, mut xu, mut uu, mut xr, mut ur) = (0.0, 0.0, 0.0, 0.0, 0.0);
        let d = &self.design;
        for i in 0..d.n {
            let k = d.study[i].index();
            let (x, u) = (self.x[e][i], self.state.u[i]);
            let mut r = d.y[e][i];
            if k == 1 {
                r -= v;
            }
            if !free_delta {
                r -= delta * u;
            }
            let wk = w[k];
            xx += wk * x * x;
            xu += wk * x * u;
            uu += wk * u * u;
            xr += wk * x * r;
            ur += wk * u * r;
        }
        let beta_prec = self.priors.beta_sd.powi(-2);
        let theta = if free_delta {
            let q = DMatrix::from_row_slice(2, 2, &[xx + beta_prec, xu, xu, uu + self.priors.delta_sd.powi(-2)]);
            self.draw_gaussian(q, DVector::from_vec(vec![xr, ur]), block)?
        } else {
            self.draw_gaussian(
                DMatrix::from_element(1, 1, xx + beta_prec),
                DVector::from_element(1, xr),
                block,
            )?
        };
        self.state.beta[e] = theta[0];
        if free_delta {
            self.state.delta[2 + e] = theta[1];
        }
        Ok(())
    }

    fn offset_block(&mut self) -> Result<()> {
        let d = &self.design;
        let s = &self.state;
        let mut sums = [0.0; 4];
        for &i in &d.b_rows {
            let u = s.u[i];
            for e in 0..2 {
                let x = self.x[e][i];
                sums[e] += x - self.zfit[e][i] - s.delta[e] * u;
                sums[2 + e] += d.y[e][i] - s.beta[e] * x - s.delta[2 + e] * u;
            }
        }
        let n_b = d.b_rows.len() as f64;
        let v_prec = self.priors.v_sd.powi(-2);
        for eq in Equation::ALL {
            let k = eq.index();
            let w = 1.0 / self.state.sigma2(eq, Study::B);
            let prec = v_prec + n_b * w;
            let mean = sums[k] * w / prec;
            let draw = mean + prec.sqrt().recip() * self.normal();
            if !draw.is_finite() {
                return Err(self.fail("v", format!("non-finite offset for {}", eq.label())));
            }
            self.state.v[k] = draw;
        }
        Ok(())
    }

    /// Draw from `N(Q^{-1} b, Q^{-1})` via the Cholesky factor of `Q`.
    fn draw_gaussian(&mut self, q: DMatrix<f64>, b: DVector<f64>, block: &str) -> Result<DVector<f64>> {
        let dim = b.len();
        if q.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(self.fail(block, "non-finite conditional precision or shift"));
        }
        let chol = q
            .cholesky()
            .ok_or_else(|| self.fail(block, "conditional precision is not positive definite"))?;
        let mean = chol.solve(&b);
        let xi = DVector::from_fn(dim, |_, _| self.normal());
        let noise = chol
            .l_dirty()
            .tr_solve_lower_triangular(&xi)
            .ok_or_else(|| self.fail(block, "singular Cholesky factor"))?;
        let draw = mean + noise;
        if draw.iter().any(|v| !v.is_finite()) {
            return Err(self.fail(block, "non-finite coefficient draw"));
        }
        Ok(draw)
    }

    /// Redraw the eight noise variances given current residuals.
    pub fn update_variances(&mut self) -> Result<()> {
        if self.cfg.clamp.sigma2 {
            return Ok(());
        }
        let d = &self.design;
        let s = &self.state;
        let mut ssr = [[0.0; 2]; 4];
        for i in 0..d.n {
            let k = d.study[i].index();
            let off = if k == 1 { s.v } else { [0.0; 4] };
            let u = s.u[i];
            for e in 0..2 {
                let x = self.x[e][i];
                let rx = x - off[e] - self.zfit[e][i] - s.delta[e] * u;
                let ry = d.y[e][i] - off[2 + e] - s.beta[e] * x - s.delta[2 + e] * u;
                ssr[e][k] += rx * rx;
                ssr[2 + e][k] += ry * ry;
            }
        }
        let counts = d.n_study;
        let (a, b) = (self.priors.ig_shape, self.priors.ig_rate);
        let gammas = [
            Gamma::new(a + 0.5 * counts[0] as f64, 1.0),
            Gamma::new(a + 0.5 * counts[1] as f64, 1.0),
        ];
        for eq in Equation::ALL {
            for study in [Study::A, Study::B] {
                let k = study.index();
                let n = counts[k] as f64;
                let rss = ssr[eq.index()][k];
                let value = match self.priors.ig_target {
                    IgTarget::Variance => {
                        let gamma = gammas[k].map_err(|e| self.fail("sigma2", e.to_string()))?;
                        let g: f64 = self.rng.sample(gamma);
                        (b + 0.5 * rss) / g
                    }
                    IgTarget::Sd => {
                        let current = self.state.sigma2(eq, study).sqrt().ln();
                        let t = slice_log_sd(&mut self.rng, current, a + n, b, 0.5 * rss);
                        (2.0 * t).exp()
                    }
                };
                if !(value > 0.0 && value.is_finite()) {
                    return Err(self.fail("sigma2", format!("draw {value} for {}/{study}", eq.label())));
                }
                self.state.set_sigma2(eq, study, value);
            }
        }
        Ok(())
    }

    /// One full sweep.
    pub fn sweep(&mut self) -> Result<()> {
        self.impute_missing_exposures()?;
        self.update_latent_confounder()?;
        self.update_coefficients()?;
        self.update_variances()
    }

    /// Runs the configured number of sweeps, keeping post-burn-in draws at the
    /// thinning interval.
    pub fn run(mut self) -> Result<PosteriorDraws> {
        let cfg = self.cfg;
        let names = ParamState::parameter_names(&self.design.ivs);
        let meta = DrawsMeta {
            seed: cfg.seed,
            acceptance_rate: 1.0,
            config: Some(cfg),
        };
        let mut draws = PosteriorDraws::with_capacity(names, cfg.kept(), meta);
        for t in 0..cfg.n_iter {
            self.iteration = Some(t);
            self.sweep()?;
            if t >= cfg.burn_in && (t - cfg.burn_in).is_multiple_of(cfg.thin) {
                draws.push_row(&self.state.parameter_vector());
            }
        }
        Ok(draws)
    }

    fn least_squares_state(&mut self) -> ParamState {
        let d = &self.design;
        let mut state = ParamState::zeros(&d.ivs, d.n, d.b_rows.len());
        let a_rows: Vec<usize> = (0..d.n).filter(|&i| d.study[i] == Study::A).collect();
        let n_a = a_rows.len();
        for e in 0..2 {
            let p = d.p[e];
            let mut coef = vec![0.0; p];
            if n_a > 0 && p > 0 {
                let gram = &d.gram[e][0];
                let scale = (0..p).map(|j| gram[j * p + j]).fold(0.0, f64::max).max(1.0);
                let mut q = DMatrix::from_row_slice(p, p, gram);
                for j in 0..p {
                    q[(j, j)] += 1e-8 * scale;
                }
                let mut rhs = DVector::zeros(p);
                for &i in &a_rows {
                    let x = d.x_obs[e][i];
                    for j in 0..p {
                        rhs[j] += d.z[e][i * p + j] * x;
                    }
                }
                if let Some(chol) = q.cholesky() {
                    coef = chol.solve(&rhs).as_slice().to_vec();
                }
            }
            let split = if e == 0 { d.ivs.l } else { d.ivs.k };
            let (a, a3) = coef.split_at(split);
            if e == 0 {
                state.alpha1.copy_from_slice(a);
                state.alpha31.copy_from_slice(a3);
            } else {
                state.alpha2.copy_from_slice(a);
                state.alpha32.copy_from_slice(a3);
            }
            if n_a == 0 {
                continue;
            }
            let fitted = |i: usize| -> f64 { (0..p).map(|j| d.z[e][i * p + j] * coef[j]).sum::<f64>() };
            let (mut sxy, mut sxx) = (0.0, 0.0);
            for &i in &a_rows {
                sxy += d.x_obs[e][i] * d.y[e][i];
                sxx += d.x_obs[e][i] * d.x_obs[e][i];
            }
            let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
            state.beta[e] = beta;
            let mut rx = 0.0;
            let mut ry = 0.0;
            for &i in &a_rows {
                let x = d.x_obs[e][i];
                rx += (x - fitted(i)).powi(2);
                ry += (d.y[e][i] - beta * x).powi(2);
            }
            let var_x = (rx / n_a as f64).max(1e-6);
            let var_y = (ry / n_a as f64).max(1e-6);
            let (ex, ey) = if e == 0 {
                (Equation::X1, Equation::Y1)
            } else {
                (Equation::X2, Equation::Y2)
            };
            for study in [Study::A, Study::B] {
                state.set_sigma2(ex, study, var_x);
                state.set_sigma2(ey, study, var_y);
            }
        }
        for u in state.u.iter_mut() {
            *u = self.rng.sample(StandardNormal);
        }
        self.fill_imputed(&mut state);
        state
    }

    fn prior_draw_state(&mut self) -> ParamState {
        let d = &self.design;
        let pr = self.priors;
        let mut state = ParamState::zeros(&d.ivs, d.n, d.b_rows.len());
        let rng = &mut self.rng;
        let mut gauss = |sd: f64| sd * rng.sample::<f64, _>(StandardNormal);
        for b in state.beta.iter_mut() {
            *b = gauss(pr.beta_sd);
        }
        for a in state
            .alpha1
            .iter_mut()
            .chain(state.alpha2.iter_mut())
            .chain(state.alpha31.iter_mut())
            .chain(state.alpha32.iter_mut())
        {
            *a = gauss(pr.alpha_sd);
        }
        for x in state.delta.iter_mut() {
            *x = gauss(pr.delta_sd);
        }
        for x in state.v.iter_mut() {
            *x = gauss(pr.v_sd);
        }
        for u in state.u.iter_mut() {
            *u = gauss(1.0);
        }
        let ig = Gamma::new(pr.ig_shape, 1.0).expect("validated prior shape");
        for s in state.sigma2.iter_mut() {
            let draw = pr.ig_rate / self.rng.sample(ig);
            *s = match pr.ig_target {
                IgTarget::Variance => draw,
                IgTarget::Sd => draw * draw,
            };
        }
        self.fill_imputed(&mut state);
        state
    }

    /// Prior-predictive means as a starting point for the imputed exposures.
    fn fill_imputed(&self, state: &mut ParamState) {
        let d = &self.design;
        for (slot, &i) in d.b_rows.iter().enumerate() {
            for e in 0..2 {
                let (a, a3) = if e == 0 {
                    (&state.alpha1, &state.alpha31)
                } else {
                    (&state.alpha2, &state.alpha32)
                };
                let p = d.p[e];
                let fit: f64 = a
                    .iter()
                    .chain(a3)
                    .zip(&d.z[e][i * p..(i + 1) * p])
                    .map(|(c, z)| c * z)
                    .sum();
                state.x_imputed[slot][e] = state.v[e] + fit + state.delta[e] * state.u[i];
            }
        }
    }
}

/// One slice-sampling update (stepping out, then shrinkage) of `t = ln(sd)`
/// under the log-concave density
/// `-(shape_n) t - rate e^{-t} - half_ssr e^{-2t}`, which is an Inv-Gamma
/// prior on the standard deviation times a Gaussian likelihood.
fn slice_log_sd<R: Rng>(rng: &mut R, t0: f64, shape_n: f64, rate: f64, half_ssr: f64) -> f64 {
    let logp = |t: f64| -shape_n * t - rate * (-t).exp() - half_ssr * (-2.0 * t).exp();
    let exp1: f64 = rng.sample(Exp1);
    let level = logp(t0) - exp1;
    let width = 1.0;
    let mut lo = t0 - width * rng.random::<f64>();
    let mut hi = lo + width;
    let mut budget = 200;
    while budget > 0 && logp(lo) > level {
        lo -= width;
        budget -= 1;
    }
    budget = 200;
    while budget > 0 && logp(hi) > level {
        hi += width;
        budget -= 1;
    }
    loop {
        let t = lo + (hi - lo) * rng.random::<f64>();
        if logp(t) > level {
            return t;
        }
        if t < t0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo < 1e-14 {
            return t0;
        }
    }
}
