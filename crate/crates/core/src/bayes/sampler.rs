//! Adaptive random-walk Metropolis over the squared bandwidths.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::{BandwidthModel, ModelState};
use super::prior::{log_unit_uniform, Priors};
use crate::density::{loo_log_likelihood, ErrorBandwidth};
use crate::error::{FplmError, Result};

pub const TUNING_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthMode {
    #[default]
    Global,
    Localized,
}

impl std::str::FromStr for BandwidthMode {
    type Err = FplmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "global" => Ok(Self::Global),
            "localized" | "localised" | "local" => Ok(Self::Localized),
            other => Err(FplmError::InvalidArgument(format!("unknown bandwidth mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for BandwidthMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Global => "global",
            Self::Localized => "localized",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    pub burn_in: usize,
    pub iterations: usize,
    pub target_acceptance: f64,
    pub initial_tuning: f64,
    pub seed: u64,
    /// RNG stream, so independent chains can share a seed.
    pub stream: u64,
    pub bandwidth_mode: BandwidthMode,
    /// Keep every `store_every`-th retained `β̂`/`m̂` draw (0 keeps none).
    pub store_every: usize,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            burn_in: 1000,
            iterations: 10_000,
            target_acceptance: 0.44,
            initial_tuning: 0.1,
            seed: 1,
            stream: 0,
            bandwidth_mode: BandwidthMode::Global,
            store_every: 10,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(FplmError::InvalidArgument("iterations must be at least 1".into()));
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return Err(FplmError::InvalidArgument("target acceptance must lie in (0, 1)".into()));
        }
        if !(self.initial_tuning > 0.0 && self.initial_tuning.is_finite()) {
            return Err(FplmError::InvalidArgument("initial tuning must be positive".into()));
        }
        Ok(())
    }
}

/// Robbins–Monro step for the proposal scale: up by `c(1-ξ)/k` after an
/// acceptance, down by `cξ/k` after a rejection, with `c = τ/(ξ-ξ²)`.
pub fn adapt_tuning(tau_prev: f64, k: usize, accepted: bool, xi: f64) -> f64 {
    let c = tau_prev / (xi - xi * xi);
    let k = k.max(1) as f64;
    let next = if accepted {
        tau_prev + c * (1.0 - xi) / k
    } else {
        tau_prev - c * xi / k
    };
    next.max(TUNING_FLOOR)
}

/// Current parameter values (squared bandwidths, plus `τ_ε` when localized).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub h2: f64,
    pub error_scale2: f64,
    pub tau_eps: Option<f64>,
}

impl ChainState {
    pub fn error_bandwidth(&self) -> ErrorBandwidth {
        match self.tau_eps {
            None => ErrorBandwidth::Global { b: self.error_scale2.sqrt() },
            Some(te) => ErrorBandwidth::Localized {
                tau: self.error_scale2.sqrt(),
                tau_eps: te,
            },
        }
    }
}

/// Log prior of a parameter vector on the squared scale.
pub fn log_prior(state: &ChainState, priors: &Priors) -> f64 {
    priors.h2.log_pdf(state.h2)
        + priors.error_scale2.log_pdf(state.error_scale2)
        + state.tau_eps.map_or(0.0, log_unit_uniform)
}

/// Refit at `h = √h²` and return kernel log-likelihood plus log prior;
/// `-∞` whenever a parameter leaves its support or the refit fails.
pub fn log_posterior<M: BandwidthModel + ?Sized>(model: &M, state: &ChainState, priors: &Priors) -> f64 {
    let lp = log_prior(state, priors);
    if !lp.is_finite() {
        return f64::NEG_INFINITY;
    }
    match model.refit(state.h2.sqrt()) {
        Ok(s) => lp + loo_log_likelihood(&s.residuals, &state.error_bandwidth()),
        Err(_) => f64::NEG_INFINITY,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningStep {
    pub h2: f64,
    pub error_scale2: f64,
    pub tau_eps: Option<f64>,
}

/// Retained draws of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McmcChain {
    pub mode: BandwidthMode,
    pub config: McmcConfig,
    pub h2: Vec<f64>,
    /// `b²` (global) or `τ²` (localized).
    pub error_scale2: Vec<f64>,
    pub tau_eps: Option<Vec<f64>>,
    pub accepted_h: Vec<bool>,
    pub accepted_error: Vec<bool>,
    pub accepted_tau_eps: Option<Vec<bool>>,
    pub log_post: Vec<f64>,
    /// Proposal scales after every iteration, burn-in included.
    pub tuning: Vec<TuningStep>,
    /// Ergodic averages over all retained draws.
    pub beta_mean: Option<Vec<f64>>,
    pub m_hat_mean: Vec<f64>,
    /// Thinned `(iteration, β̂)` and `(iteration, m̂)` draws.
    pub beta_draws: Vec<(usize, Vec<f64>)>,
    pub m_hat_draws: Vec<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRates {
    pub h: f64,
    pub error_scale: f64,
    pub tau_eps: Option<f64>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn rate(v: &[bool]) -> f64 {
    v.iter().filter(|&&a| a).count() as f64 / v.len() as f64
}

impl McmcChain {
    pub fn len(&self) -> usize {
        self.h2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h2.is_empty()
    }

    /// Ergodic averages of the squared parameters (and `τ_ε`).
    pub fn posterior_mean(&self) -> ChainState {
        ChainState {
            h2: mean(&self.h2),
            error_scale2: mean(&self.error_scale2),
            tau_eps: self.tau_eps.as_deref().map(mean),
        }
    }

    /// `ĥ = √(mean h²)`.
    pub fn h_hat(&self) -> f64 {
        mean(&self.h2).sqrt()
    }

    pub fn error_bandwidth_hat(&self) -> ErrorBandwidth {
        self.posterior_mean().error_bandwidth()
    }

    pub fn acceptance_rates(&self) -> AcceptanceRates {
        AcceptanceRates {
            h: rate(&self.accepted_h),
            error_scale: rate(&self.accepted_error),
            tau_eps: self.accepted_tau_eps.as_deref().map(rate),
        }
    }

    /// Columns `iter, h2, b2_or_tau2[, tau_eps], accepted_h, accepted_b[,
    /// accepted_tau_eps], log_post`; `iter` counts from the first retained draw.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let local = self.tau_eps.is_some();
        let mut header = vec!["iter", "h2", "b2_or_tau2"];
        if local {
            header.push("tau_eps");
        }
        header.extend(["accepted_h", "accepted_b"]);
        if local {
            header.push("accepted_tau_eps");
        }
        header.push("log_post");
        w.write_record(&header)?;
        let flag = |b: bool| if b { "1".to_string() } else { "0".to_string() };
        for i in 0..self.len() {
            let mut rec = vec![(i + 1).to_string(), format!("{:?}", self.h2[i]), format!("{:?}", self.error_scale2[i])];
            if let Some(te) = &self.tau_eps {
                rec.push(format!("{:?}", te[i]));
            }
            rec.push(flag(self.accepted_h[i]));
            rec.push(flag(self.accepted_error[i]));
            if let Some(a) = &self.accepted_tau_eps {
                rec.push(flag(a[i]));
            }
            rec.push(format!("{:?}", self.log_post[i]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Run the sampler with the kernel leave-one-out likelihood.
pub fn run_sampler<M: BandwidthModel + ?Sized>(model: &M, config: &McmcConfig, priors: &Priors) -> Result<McmcChain> {
    run_sampler_with(model, config, priors, loo_log_likelihood)
}

/// Run the sampler with a caller-supplied log-likelihood of the residuals.
///
/// Each sweep updates `h²` (which refits the model), then the error scale,
/// then `τ_ε` in localized mode; every update is a Gaussian random walk whose
/// scale adapts towards the target acceptance rate.
pub fn run_sampler_with<M, L>(model: &M, config: &McmcConfig, priors: &Priors, loglik: L) -> Result<McmcChain>
where
    M: BandwidthModel + ?Sized,
    L: Fn(&[f64], &ErrorBandwidth) -> f64,
{
    config.validate()?;
    let local = config.bandwidth_mode == BandwidthMode::Localized;
    let xi = config.target_acceptance;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(config.stream);

    let mut state = ChainState {
        h2: rng.random::<f64>(),
        error_scale2: rng.random::<f64>(),
        tau_eps: if local { Some(rng.random::<f64>()) } else { None },
    };
    // U(0,1) can return exactly 0
    if state.h2 == 0.0 {
        state.h2 = f64::MIN_POSITIVE;
    }
    if state.error_scale2 == 0.0 {
        state.error_scale2 = f64::MIN_POSITIVE;
    }
    let mut fit: Option<ModelState> = model.refit(state.h2.sqrt()).ok();
    let ll_of = |fit: &Option<ModelState>, s: &ChainState| -> f64 {
        match fit {
            Some(f) => {
                let v = loglik(&f.residuals, &s.error_bandwidth());
                if v.is_nan() {
                    f64::NEG_INFINITY
                } else {
                    v
                }
            }
            None => f64::NEG_INFINITY,
        }
    };
    let mut ll = ll_of(&fit, &state);
    let mut lp = log_prior(&state, priors);

    let mut tune = TuningStep {
        h2: config.initial_tuning,
        error_scale2: config.initial_tuning,
        tau_eps: if local { Some(config.initial_tuning) } else { None },
    };

    let total = config.burn_in + config.iterations;
    let n_keep = config.iterations;
    let mut chain = McmcChain {
        mode: config.bandwidth_mode,
        config: *config,
        h2: Vec::with_capacity(n_keep),
        error_scale2: Vec::with_capacity(n_keep),
        tau_eps: if local { Some(Vec::with_capacity(n_keep)) } else { None },
        accepted_h: Vec::with_capacity(n_keep),
        accepted_error: Vec::with_capacity(n_keep),
        accepted_tau_eps: if local { Some(Vec::with_capacity(n_keep)) } else { None },
        log_post: Vec::with_capacity(n_keep),
        tuning: Vec::with_capacity(total),
        beta_mean: None,
        m_hat_mean: Vec::new(),
        beta_draws: Vec::new(),
        m_hat_draws: Vec::new(),
    };
    let mut beta_sum: Option<Vec<f64>> = None;
    let mut m_sum: Vec<f64> = Vec::new();

    let accept = |rng: &mut ChaCha8Rng, log_ratio: f64| -> bool {
        let u: f64 = rng.random();
        // log(0) = -∞ never rejects a finite improvement; NaN ratios reject
        log_ratio.is_finite() && u.ln() < log_ratio || log_ratio == f64::INFINITY
    };

    for k in 1..=total {
        // h² update: refit at the proposed bandwidth
        let z: f64 = rng.sample(StandardNormal);
        let prop = ChainState { h2: state.h2 + tune.h2 * z, ..state };
        let lp_new = log_prior(&prop, priors);
        let (fit_new, ll_new) = if lp_new.is_finite() {
            let f = model.refit(prop.h2.sqrt()).ok();
            let l = ll_of(&f, &prop);
            (f, l)
        } else {
            (None, f64::NEG_INFINITY)
        };
        let acc_h = accept(&mut rng, (ll_new + lp_new) - (ll + lp));
        if acc_h {
            state = prop;
            fit = fit_new;
            ll = ll_new;
            lp = lp_new;
        }
        tune.h2 = adapt_tuning(tune.h2, k, acc_h, xi);

        // error scale update with residuals held at the current h
        let z: f64 = rng.sample(StandardNormal);
        let prop = ChainState {
            error_scale2: state.error_scale2 + tune.error_scale2 * z,
            ..state
        };
        let lp_new = log_prior(&prop, priors);
        let ll_new = if lp_new.is_finite() { ll_of(&fit, &prop) } else { f64::NEG_INFINITY };
        let acc_e = accept(&mut rng, (ll_new + lp_new) - (ll + lp));
        if acc_e {
            state = prop;
            ll = ll_new;
            lp = lp_new;
        }
        tune.error_scale2 = adapt_tuning(tune.error_scale2, k, acc_e, xi);

        let mut acc_t = false;
        if let (Some(te), Some(step)) = (state.tau_eps, tune.tau_eps) {
            let z: f64 = rng.sample(StandardNormal);
            let prop = ChainState {
                tau_eps: Some(reflect_unit(te + step * z)),
                ..state
            };
            let lp_new = log_prior(&prop, priors);
            let ll_new = ll_of(&fit, &prop);
            acc_t = accept(&mut rng, (ll_new + lp_new) - (ll + lp));
            if acc_t {
                state = prop;
                ll = ll_new;
                lp = lp_new;
            }
            tune.tau_eps = Some(adapt_tuning(step, k, acc_t, xi));
        }
        chain.tuning.push(tune);

        if k > config.burn_in {
            let idx = k - config.burn_in;
            chain.h2.push(state.h2);
            chain.error_scale2.push(state.error_scale2);
            if let Some(v) = chain.tau_eps.as_mut() {
                v.push(state.tau_eps.unwrap_or(0.0));
            }
            chain.accepted_h.push(acc_h);
            chain.accepted_error.push(acc_e);
            if let Some(v) = chain.accepted_tau_eps.as_mut() {
                v.push(acc_t);
            }
            chain.log_post.push(ll + lp);
            if let Some(f) = &fit {
                accumulate(&mut m_sum, &f.m_hat);
                if let Some(b) = &f.beta {
                    accumulate(beta_sum.get_or_insert_with(|| vec![0.0; b.len()]), b);
                }
                if config.store_every > 0 && idx % config.store_every == 0 {
                    chain.m_hat_draws.push((idx, f.m_hat.clone()));
                    if let Some(b) = &f.beta {
                        chain.beta_draws.push((idx, b.clone()));
                    }
                }
            }
        }
    }

    let denom = n_keep as f64;
    if !m_sum.is_empty() {
        chain.m_hat_mean = m_sum.into_iter().map(|v| v / denom).collect();
    }
    chain.beta_mean = beta_sum.map(|b| b.into_iter().map(|v| v / denom).collect());
    if !chain.log_post.iter().any(|v| v.is_finite()) {
        return Err(FplmError::Sampler(
            "posterior was -inf at every retained draw; the model could not be fitted".into(),
        ));
    }
    let rates = chain.acceptance_rates();
    let dead = [
        ("h^2", Some(rates.h)),
        ("error scale", Some(rates.error_scale)),
        ("tau_eps", rates.tau_eps),
    ];
    for (name, r) in dead {
        if r == Some(0.0) {
            return Err(FplmError::Sampler(format!(
                "no {name} proposal accepted after burn-in; try a different initial tuning (currently {})",
                config.initial_tuning
            )));
        }
    }
    Ok(chain)
}

fn accumulate(sum: &mut Vec<f64>, v: &[f64]) {
    if sum.is_empty() {
        sum.resize(v.len(), 0.0);
    }
    for (s, x) in sum.iter_mut().zip(v) {
        *s += x;
    }
}

/// Fold a proposal back into `[0, 1]`.
fn reflect_unit(mut x: f64) -> f64 {
    if !x.is_finite() {
        return 0.5;
    }
    x = x.rem_euclid(2.0);
    if x > 1.0 {
        2.0 - x
    } else {
        x
    }
}
