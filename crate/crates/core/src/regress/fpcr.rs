//! Functional principal component regression: OLS of `y` on an intercept and
//! the first K principal component scores of `X`.

use serde::{Deserialize, Serialize};

use crate::error::{FplmError, Result};
use crate::fda::{fpca, FpcaResult, FunctionalSample};

/// Components used when no count is given.
pub const DEFAULT_FPCR_COMPONENTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcrFit {
    pub basis: FpcaResult,
    pub intercept: f64,
    pub slopes: Vec<f64>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl FpcrFit {
    pub fn n_components(&self) -> usize {
        self.slopes.len()
    }

    /// Coefficient function `β(t) = Σ slope_k φ_k(t)`.
    pub fn beta(&self) -> Vec<f64> {
        let m = self.basis.eigenfunctions.ncols();
        (0..m)
            .map(|j| {
                self.slopes
                    .iter()
                    .enumerate()
                    .map(|(k, s)| s * self.basis.eigenfunctions[(k, j)])
                    .sum()
            })
            .collect()
    }

    pub fn predict(&self, x_new: &FunctionalSample) -> Result<Vec<f64>> {
        let scores = self.basis.project(x_new)?;
        Ok(scores
            .row_iter()
            .map(|r| self.intercept + r.iter().zip(&self.slopes).map(|(s, b)| s * b).sum::<f64>())
            .collect())
    }
}

pub fn fit_fpcr(x: &FunctionalSample, y: &[f64], k: usize) -> Result<FpcrFit> {
    let n = x.n_curves();
    if y.len() != n {
        return Err(FplmError::DimensionMismatch(format!("{n} curves, {} responses", y.len())));
    }
    let basis = fpca(x, k)?;
    let lead = basis.eigenvalues[0];
    let ybar = y.iter().sum::<f64>() / n as f64;
    // centered scores are mutually orthogonal, so the normal equations are diagonal
    let mut slopes = Vec::with_capacity(k);
    for c in 0..k {
        let score = basis.scores.column(c);
        let ss: f64 = score.iter().map(|s| s * s).sum();
        if !(basis.eigenvalues[c] > 1e-10 * lead) || ss <= 0.0 {
            return Err(FplmError::RankDeficient(format!(
                "principal component {} has (near) zero variance",
                c + 1
            )));
        }
        slopes.push(score.iter().zip(y).map(|(s, v)| s * (v - ybar)).sum::<f64>() / ss);
    }
    let fitted: Vec<f64> = basis
        .scores
        .row_iter()
        .map(|r| ybar + r.iter().zip(&slopes).map(|(s, b)| s * b).sum::<f64>())
        .collect();
    let residuals = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    Ok(FpcrFit {
        basis,
        intercept: ybar,
        slopes,
        fitted,
        residuals,
    })
}
