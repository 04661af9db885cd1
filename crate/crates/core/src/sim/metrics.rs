use crate::density::evaluation_grid;
use crate::error::{FplmError, Result};

/// Floor applied to the estimated density inside the logarithm.
pub const LOG_FLOOR: f64 = 1e-300;

/// `(1/n) Σ (truth - estimate)²`.
pub fn mean_squared_error(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    if truth.is_empty() {
        return Err(FplmError::InvalidArgument("empty input".into()));
    }
    if truth.len() != estimate.len() {
        return Err(FplmError::DimensionMismatch(format!(
            "{} true values, {} estimates",
            truth.len(),
            estimate.len()
        )));
    }
    Ok(truth.iter().zip(estimate).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / truth.len() as f64)
}

/// Averaged squared error over replications, each a `(truth, estimate)`
/// pair: `(1/(nB)) ΣΣ (g - ĝ)²`.
pub fn averaged_mse(replications: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
    if replications.is_empty() {
        return Err(FplmError::InvalidArgument("no replications".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (t, e) in replications {
        total += mean_squared_error(t, e)? * t.len() as f64;
        count += t.len();
    }
    Ok(total / count as f64)
}

/// AMSE over training pairs and AMSPE over holdout pairs.
pub fn amse_amspe(train: &[(Vec<f64>, Vec<f64>)], holdout: &[(Vec<f64>, Vec<f64>)]) -> Result<(f64, f64)> {
    Ok((averaged_mse(train)?, averaged_mse(holdout)?))
}

/// In-sample RMSE and out-of-sample RMSPE.
pub fn rmse_rmspe(y_train: &[f64], fitted: &[f64], y_test: &[f64], predicted: &[f64]) -> Result<(f64, f64)> {
    Ok((
        mean_squared_error(y_train, fitted)?.sqrt(),
        mean_squared_error(y_test, predicted)?.sqrt(),
    ))
}

/// Squared-error and Kullback–Leibler criteria on the 1,001-point grid of
/// `[-10, 10]`: `MISE = (1/50) Σ (f - f̂)²` and `KL = -(1/50) Σ f log f̂`.
pub fn mise_kl<F, G>(truth: F, estimate: G) -> (f64, f64)
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let mut ise = 0.0;
    let mut kl = 0.0;
    for e in evaluation_grid() {
        let f = truth(e);
        let fh = estimate(e);
        ise += (f - fh).powi(2);
        kl -= f * fh.max(LOG_FLOOR).ln();
    }
    (ise / 50.0, kl / 50.0)
}
