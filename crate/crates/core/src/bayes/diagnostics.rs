use serde::{Deserialize, Serialize};

use super::sampler::McmcChain;
use crate::error::{FplmError, Result};

pub const MIN_CHAIN_LENGTH: usize = 100;
pub const MAX_ACF_LAG: usize = 50;

/// Posterior summary of one scalar parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub se: f64,
    pub batch_se: f64,
    pub sif: f64,
    pub acf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
}

impl PosteriorSummary {
    pub fn get(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (m, v)
}

/// Linear-interpolation percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `sd / √N`.
pub fn naive_se(x: &[f64]) -> f64 {
    mean_var(x).1.sqrt() / (x.len() as f64).sqrt()
}

/// Batch-means standard error with `⌊√N⌋` equal batches; trailing draws
/// that do not fill a batch are dropped.
pub fn batch_mean_se(x: &[f64]) -> f64 {
    let n_batches = (x.len() as f64).sqrt().floor() as usize;
    let size = x.len() / n_batches;
    let means: Vec<f64> = (0..n_batches)
        .map(|b| x[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    mean_var(&means).1.sqrt() / (n_batches as f64).sqrt()
}

/// Simulation inefficiency factor `(batch SE / naive SE)²`.
pub fn sif_from_se(se: f64, batch_se: f64) -> f64 {
    if se > 0.0 {
        (batch_se / se).powi(2)
    } else {
        0.0
    }
}

/// Sample autocorrelations at lags `1..=max_lag`.
pub fn autocorrelation(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (1..=max_lag.min(n - 1))
        .map(|lag| {
            if c0 == 0.0 {
                return 0.0;
            }
            (0..n - lag).map(|i| (x[i] - m) * (x[i + lag] - m)).sum::<f64>() / c0
        })
        .collect()
}

pub fn summarize(name: &str, draws: &[f64]) -> Result<ParameterSummary> {
    if draws.len() < MIN_CHAIN_LENGTH {
        return Err(FplmError::ChainTooShort {
            needed: MIN_CHAIN_LENGTH,
            got: draws.len(),
        });
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let se = naive_se(draws);
    let batch_se = batch_mean_se(draws);
    Ok(ParameterSummary {
        name: name.to_string(),
        mean: mean_var(draws).0,
        ci_lower: percentile(&sorted, 0.025),
        ci_upper: percentile(&sorted, 0.975),
        se,
        batch_se,
        sif: sif_from_se(se, batch_se),
        acf: autocorrelation(draws, MAX_ACF_LAG),
    })
}

/// Summaries on the bandwidth scale: `h`, then `b` or `τ` and `τ_ε`.
pub fn diagnostics(chain: &McmcChain) -> Result<PosteriorSummary> {
    let sqrt = |v: &[f64]| v.iter().map(|x| x.sqrt()).collect::<Vec<_>>();
    let mut parameters = vec![summarize("h", &sqrt(&chain.h2))?];
    match &chain.tau_eps {
        None => parameters.push(summarize("b", &sqrt(&chain.error_scale2))?),
        Some(te) => {
            parameters.push(summarize("tau", &sqrt(&chain.error_scale2))?);
            parameters.push(summarize("tau_eps", te)?);
        }
    }
    Ok(PosteriorSummary { parameters })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn reference_standard_error_pairs() {
        assert!((sif_from_se(0.1217, 0.3175) - 6.80).abs() < 0.01);
        assert!((sif_from_se(0.0967, 0.2300) - 5.65).abs() < 0.01);
    }

    #[test]
    fn iid_chain_has_unit_sif() {
        let mut hits = 0;
        for seed in 0..40 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
            let s = summarize("x", &x).unwrap();
            if (0.5..=2.0).contains(&s.sif) {
                hits += 1;
            }
            if seed == 0 {
                assert!((s.sif - 1.0).abs() < 0.3);
                assert!(s.acf.iter().all(|a| a.abs() < 0.05));
                assert_eq!(s.acf.len(), 50);
            }
        }
        assert!(hits >= 38, "{hits}/40 within [0.5, 2]");
    }

    #[test]
    fn ar1_chain_is_inefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut x = vec![0.0; 20_000];
        for i in 1..x.len() {
            let e: f64 = rng.sample(StandardNormal);
            x[i] = 0.8 * x[i - 1] + e;
        }
        let s = summarize("x", &x).unwrap();
        // (1 + ρ) / (1 - ρ) = 9
        assert!(s.sif > 5.0 && s.sif < 13.0, "{}", s.sif);
        assert!((s.acf[0] - 0.8).abs() < 0.03);
    }

    #[test]
    fn percentiles_and_short_chains() {
        let x: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        let s = summarize("x", &x).unwrap();
        assert!((s.ci_lower - 2.5).abs() < 1e-12);
        assert!((s.ci_upper - 97.5).abs() < 1e-12);
        assert!(matches!(summarize("x", &x[..50]), Err(FplmError::ChainTooShort { .. })));
    }
}
