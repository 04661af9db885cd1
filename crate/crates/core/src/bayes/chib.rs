use serde::{Deserialize, Serialize};

use super::model::BandwidthModel;
use super::prior::Priors;
use super::sampler::{log_prior, McmcChain};
use crate::density::loo_log_likelihood;
use crate::error::{FplmError, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Terms of `log L(y) = log L(y|θ̂) + log π(θ̂) - log π(θ̂|y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalLikelihood {
    pub log_marginal: f64,
    pub log_likelihood: f64,
    pub log_prior: f64,
    pub log_posterior_density: f64,
}

/// Chib's identity at the posterior mean of the squared parameters, with the
/// posterior ordinate from a product-Gaussian kernel density estimate over the
/// retained draws using normal-reference bandwidths.
pub fn chib_marginal_likelihood<M: BandwidthModel + ?Sized>(
    chain: &McmcChain,
    model: &M,
    priors: &Priors,
) -> Result<MarginalLikelihood> {
    if chain.is_empty() {
        return Err(FplmError::MarginalLikelihood("empty chain".into()));
    }
    let theta = chain.posterior_mean();
    let fit = model
        .refit(theta.h2.sqrt())
        .map_err(|e| FplmError::MarginalLikelihood(format!("refit at posterior mean failed: {e}")))?;
    let log_likelihood = loo_log_likelihood(&fit.residuals, &theta.error_bandwidth());
    let lp = log_prior(&theta, priors);

    let mut columns: Vec<(&[f64], f64)> = vec![(&chain.h2, theta.h2), (&chain.error_scale2, theta.error_scale2)];
    if let (Some(te), Some(t)) = (&chain.tau_eps, theta.tau_eps) {
        columns.push((te, t));
    }
    let log_post = kde_log_density(&columns)?;
    let log_marginal = log_likelihood + lp - log_post;
    if !log_marginal.is_finite() {
        return Err(FplmError::MarginalLikelihood(format!(
            "non-finite estimate (likelihood {log_likelihood}, prior {lp}, posterior ordinate {log_post})"
        )));
    }
    Ok(MarginalLikelihood {
        log_marginal,
        log_likelihood,
        log_prior: lp,
        log_posterior_density: log_post,
    })
}

/// Log of a product-Gaussian KDE with bandwidths `σ_j (4/((d+2)N))^{1/(d+4)}`
/// evaluated at one point; each column pairs draws with the evaluation value.
pub fn kde_log_density(columns: &[(&[f64], f64)]) -> Result<f64> {
    let d = columns.len();
    let n = columns.first().map_or(0, |c| c.0.len());
    if n < 2 || columns.iter().any(|c| c.0.len() != n) {
        return Err(FplmError::MarginalLikelihood("need at least two draws per parameter".into()));
    }
    let factor = (4.0 / ((d as f64 + 2.0) * n as f64)).powf(1.0 / (d as f64 + 4.0));
    let mut bws = Vec::with_capacity(d);
    for (draws, _) in columns {
        let m = draws.iter().sum::<f64>() / n as f64;
        let sd = (draws.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(FplmError::MarginalLikelihood("a parameter never moved".into()));
        }
        bws.push(sd * factor);
    }
    let log_norm: f64 = bws.iter().map(|b| b.ln() + LN_SQRT_2PI).sum();
    let terms: Vec<f64> = (0..n)
        .map(|k| {
            columns
                .iter()
                .zip(&bws)
                .map(|((draws, at), b)| {
                    let u = (at - draws[k]) / b;
                    -0.5 * u * u
                })
                .sum::<f64>()
        })
        .collect();
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = terms.iter().map(|t| (t - max).exp()).sum();
    let v = max + s.ln() - (n as f64).ln() - log_norm;
    // a density below the smallest positive double counts as zero
    if v.is_finite() && v > f64::MIN_POSITIVE.ln() {
        Ok(v)
    } else {
        Err(FplmError::MarginalLikelihood("posterior density estimate is zero at the posterior mean".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::model::ModelState;
    use crate::bayes::prior::InverseGammaPrior;
    use crate::bayes::sampler::{run_sampler, ChainState, McmcConfig};
    use crate::bayes::log_posterior;

    /// Residual scale depends on `h`, minimised at `h² = 0.3`.
    struct Toy(Vec<f64>);

    impl BandwidthModel for Toy {
        fn n_obs(&self) -> usize {
            self.0.len()
        }

        fn refit(&self, h: f64) -> Result<ModelState> {
            let s = 1.0 + 4.0 * (h * h - 0.3).powi(2);
            Ok(ModelState {
                residuals: self.0.iter().map(|e| e * s).collect(),
                m_hat: vec![0.0; self.0.len()],
                beta: None,
            })
        }
    }

    fn toy() -> Toy {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(30);
        Toy((0..30).map(|_| StandardNormal.sample(&mut rng)).collect())
    }

    #[test]
    fn kde_of_standard_normal_draws() {
        let draws: Vec<f64> = (1..2000).map(|i| {
            let p = i as f64 / 2000.0;
            statrs::distribution::ContinuousCDF::inverse_cdf(&statrs::distribution::Normal::standard(), p)
        }).collect();
        let v = kde_log_density(&[(&draws, 0.0)]).unwrap();
        assert!((v - (-LN_SQRT_2PI)).abs() < 0.05, "{v}");
        assert!(kde_log_density(&[(&draws, 1e6)]).is_err());
    }

    #[test]
    fn matches_grid_quadrature() {
        let model = toy();
        let priors = Priors::both(InverseGammaPrior::new(2.0, 0.5).unwrap());
        // quadrature over (h², b²) ∈ (0, 4]² on a 400 × 400 midpoint grid
        let steps = 400;
        let du = 4.0 / steps as f64;
        let mut logs = Vec::with_capacity(steps * steps);
        for i in 0..steps {
            let h2 = (i as f64 + 0.5) * du;
            for j in 0..steps {
                let b2 = (j as f64 + 0.5) * du;
                let s = ChainState { h2, error_scale2: b2, tau_eps: None };
                logs.push(log_posterior(&model, &s, &priors));
            }
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let quad = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln() + 2.0 * du.ln();

        let cfg = McmcConfig { burn_in: 2000, iterations: 30_000, seed: 9, ..Default::default() };
        let chain = run_sampler(&model, &cfg, &priors).unwrap();
        let chib = chib_marginal_likelihood(&chain, &model, &priors).unwrap();
        assert!((chib.log_marginal - quad).abs() < 0.5, "chib {} vs quadrature {quad}", chib.log_marginal);

        let again = chib_marginal_likelihood(&run_sampler(&model, &cfg, &priors).unwrap(), &model, &priors).unwrap();
        assert_eq!(chib, again);
    }
}
