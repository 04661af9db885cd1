//! Functional partial linear model: a least-squares coefficient function on
//! the partial residuals `(I - W)X`, `(I - W)y`, and a Nadaraya–Watson
//! smoother of `y - ⟨X, β̂⟩` on the second functional covariate.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::nw::{prediction_weights, SmootherPair};
use super::scale::DistanceScale;
use crate::error::{FplmError, Result};
use crate::fda::{FpcaResult, FunctionalSample, Grid, RowSpaceBasis};
use crate::semimetric::{DistanceMatrix, SemiMetricSpec, TrainedSemiMetric};

/// Share of partial-residual variance the automatic component count must reach.
pub const BETA_VARIANCE_FRACTION: f64 = 0.99;
/// Upper bound on the automatic component count.
pub const MAX_BETA_COMPONENTS: usize = 10;

/// How many principal components of `(I - W)X` carry `β̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum ComponentRule {
    /// Smallest count whose share of partial-residual variance reaches
    /// `fraction`, at most 10.
    VarianceFraction { fraction: f64 },
    Fixed { k: usize },
    /// Count in `1..=10` with the smallest leave-one-out squared error,
    /// each count at its own best bandwidth on a log-spaced grid.
    CrossValidation,
}

impl Default for ComponentRule {
    fn default() -> Self {
        ComponentRule::CrossValidation
    }
}

impl std::str::FromStr for ComponentRule {
    type Err = FplmError;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        if t == "cv" || t == "cross_validation" {
            return Ok(ComponentRule::CrossValidation);
        }
        if let Some(f) = t.strip_prefix("var:") {
            let fraction: f64 = f
                .parse()
                .map_err(|_| FplmError::InvalidArgument(format!("bad variance fraction `{f}`")))?;
            if !(fraction > 0.0 && fraction <= 1.0) {
                return Err(FplmError::InvalidArgument("variance fraction must lie in (0, 1]".into()));
            }
            return Ok(ComponentRule::VarianceFraction { fraction });
        }
        match t.parse::<usize>() {
            Ok(k) if k >= 1 => Ok(ComponentRule::Fixed { k }),
            _ => Err(FplmError::InvalidArgument(format!(
                "component rule `{s}`: expected a count, `var:<fraction>` or `cv`"
            ))),
        }
    }
}

impl std::fmt::Display for ComponentRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ComponentRule::VarianceFraction { fraction } => write!(f, "var:{fraction}"),
            ComponentRule::Fixed { k } => write!(f, "{k}"),
            ComponentRule::CrossValidation => f.write_str("cv"),
        }
    }
}

/// Bandwidth multipliers (of the median scaled distance) scanned by the
/// cross-validated component rule: `10^-2 … 10^0.5` in steps of 0.1.
fn cv_bandwidth_grid(median: f64) -> Vec<f64> {
    (0..=25).map(|k| median * 10f64.powf(-2.0 + 0.1 * k as f64)).collect()
}

/// Training triplets with the semi-metric on `Z` frozen and its pairwise
/// distances cached, ready to be refitted at any bandwidth.
#[derive(Debug, Clone)]
pub struct FplmData {
    x: FunctionalSample,
    y: Vec<f64>,
    metric: TrainedSemiMetric,
    /// Pairwise distances divided by `distance_scale`.
    dist: DistanceMatrix,
    distance_scale: f64,
    /// `X` with each column scaled by its quadrature weight, so that
    /// `⟨X_i, β⟩ = (XW β)_i`.
    xw: DMatrix<f64>,
    /// Row space of `X`; partial residual curves `(I - W)X` stay inside it.
    rows: RowSpaceBasis,
}

/// Per-component pieces of the least-squares coefficient function.
struct BetaParts {
    /// `γ_k φ_k` on the grid.
    terms: Vec<Vec<f64>>,
    warnings: Vec<String>,
}

impl FplmData {
    /// Bandwidths in units of the median pairwise distance on `Z`.
    pub fn new(x: FunctionalSample, z: &FunctionalSample, y: Vec<f64>, spec: SemiMetricSpec) -> Result<Self> {
        Self::with_scale(x, z, y, spec, DistanceScale::default())
    }

    pub fn with_scale(
        x: FunctionalSample,
        z: &FunctionalSample,
        y: Vec<f64>,
        spec: SemiMetricSpec,
        scale: DistanceScale,
    ) -> Result<Self> {
        let n = x.n_curves();
        if z.n_curves() != n || y.len() != n {
            return Err(FplmError::DimensionMismatch(format!(
                "{} X curves, {} Z curves, {} responses",
                n,
                z.n_curves(),
                y.len()
            )));
        }
        if n < 3 {
            return Err(FplmError::InvalidArgument("need at least 3 observations".into()));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(FplmError::InvalidArgument("non-finite response".into()));
        }
        let metric = spec.train(z)?;
        let mut dist = metric.pairwise();
        let distance_scale = scale.divisor(&dist.values);
        dist.values /= distance_scale;
        let w = x.grid().weights();
        let xw = DMatrix::from_fn(n, x.n_points(), |i, j| x.values()[(i, j)] * w[j]);
        let rows = RowSpaceBasis::new(&x)?;
        Ok(Self {
            x,
            y,
            metric,
            dist,
            distance_scale,
            xw,
            rows,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x(&self) -> &FunctionalSample {
        &self.x
    }

    pub fn z(&self) -> &FunctionalSample {
        self.metric.training()
    }

    pub fn spec(&self) -> &SemiMetricSpec {
        self.metric.spec()
    }

    pub fn metric(&self) -> &TrainedSemiMetric {
        &self.metric
    }

    /// Scaled pairwise distances on `Z`.
    pub fn distances(&self) -> &DistanceMatrix {
        &self.dist
    }

    /// Raw distance corresponding to a unit bandwidth.
    pub fn distance_scale(&self) -> f64 {
        self.distance_scale
    }

    fn max_components(&self) -> usize {
        MAX_BETA_COMPONENTS.min(self.n() - 1).min(self.x.n_points())
    }

    /// Number of components carrying `β̂`: the smallest count explaining 99%
    /// of the partial-residual variance at bandwidth `h`, at most 10.
    pub fn auto_components(&self, h: f64) -> Result<usize> {
        self.variance_components(h, BETA_VARIANCE_FRACTION)
    }

    pub fn variance_components(&self, h: f64, fraction: f64) -> Result<usize> {
        let pair = SmootherPair::new(&self.dist.values, h)?;
        let cap = self.max_components();
        let basis = self.partial_residual_fpca(&pair, cap)?;
        Ok(basis.components_for_variance(fraction).clamp(1, cap))
    }

    /// Leave-one-out mean squared error for every component count
    /// `1..=max_k` at bandwidth `h`.
    pub fn loo_mse_by_components(&self, h: f64, max_k: usize) -> Result<Vec<f64>> {
        let pair = SmootherPair::new(&self.dist.values, h)?;
        let parts = self.beta_parts(&pair, max_k.min(self.max_components()))?;
        let n = self.n();
        let mut linear = vec![0.0; n];
        let mut out = Vec::with_capacity(parts.terms.len());
        for term in &parts.terms {
            for (i, l) in linear.iter_mut().enumerate() {
                *l += self.xw.row(i).iter().zip(term).map(|(a, b)| a * b).sum::<f64>();
            }
            let partial: Vec<f64> = self.y.iter().zip(&linear).map(|(y, l)| y - l).collect();
            let m_loo = pair.loo.apply(&partial);
            let mse = (0..n).map(|i| (partial[i] - m_loo[i]).powi(2)).sum::<f64>() / n as f64;
            out.push(mse);
        }
        Ok(out)
    }

    /// Resolve a component rule; variance fractions are evaluated at `h_ref`.
    pub fn resolve_components(&self, rule: ComponentRule, h_ref: f64) -> Result<usize> {
        let cap = self.max_components();
        match rule {
            ComponentRule::Fixed { k } => Ok(k.clamp(1, cap)),
            ComponentRule::VarianceFraction { fraction } => self.variance_components(h_ref, fraction),
            ComponentRule::CrossValidation => {
                let mut best = vec![f64::INFINITY; cap];
                for h in cv_bandwidth_grid(h_ref) {
                    let Ok(mse) = self.loo_mse_by_components(h, cap) else {
                        continue;
                    };
                    for (b, v) in best.iter_mut().zip(mse) {
                        if v < *b {
                            *b = v;
                        }
                    }
                }
                let k = (0..best.len())
                    .min_by(|&a, &b| best[a].total_cmp(&best[b]))
                    .map_or(1, |i| i + 1);
                Ok(k)
            }
        }
    }

    /// Principal components of `(I - W)X`.
    fn partial_residual_fpca(&self, pair: &SmootherPair, k: usize) -> Result<FpcaResult> {
        let a = self.rows.coords();
        let coords = a - &pair.full.values * a;
        self.rows.fpca(&coords, k)
    }

    fn beta_parts(&self, pair: &SmootherPair, k_req: usize) -> Result<BetaParts> {
        let n = self.n();
        let mut warnings = Vec::new();
        let yt: Vec<f64> = self
            .y
            .iter()
            .zip(pair.full.apply(&self.y))
            .map(|(a, b)| a - b)
            .collect();
        let basis = self.partial_residual_fpca(pair, k_req)?;
        let ybar = yt.iter().sum::<f64>() / n as f64;
        let lead = basis.eigenvalues.first().copied().unwrap_or(0.0);
        let mut terms = Vec::with_capacity(basis.n_components());
        for k in 0..basis.n_components() {
            let score = basis.scores.column(k);
            let ss: f64 = score.iter().map(|s| s * s).sum();
            if !(basis.eigenvalues[k] > 1e-10 * lead) || ss <= 0.0 {
                warnings.push(format!(
                    "singular score cross-product: n_pc_beta reduced from {k_req} to {}",
                    terms.len()
                ));
                break;
            }
            let gamma = score.iter().zip(&yt).map(|(s, v)| s * (v - ybar)).sum::<f64>() / ss;
            terms.push(basis.eigenfunctions.row(k).iter().map(|phi| gamma * phi).collect());
        }
        Ok(BetaParts { terms, warnings })
    }

    /// Fit at bandwidth `h` with `n_pc_beta` components for `β̂`.
    pub fn fit(&self, h: f64, n_pc_beta: usize) -> Result<FplmFit> {
        if n_pc_beta == 0 {
            return Err(FplmError::InvalidArgument("n_pc_beta must be at least 1".into()));
        }
        let pair = SmootherPair::new(&self.dist.values, h)?;
        let mut warnings = Vec::new();
        if pair.underflow_rows > 0 {
            warnings.push(format!(
                "{} rows fell back to nearest-neighbour weights at h = {h:e}",
                pair.underflow_rows
            ));
        }
        let k_req = n_pc_beta.min(self.max_components());
        if k_req < n_pc_beta {
            warnings.push(format!("n_pc_beta reduced from {n_pc_beta} to {k_req} (sample size)"));
        }
        let parts = self.beta_parts(&pair, k_req)?;
        warnings.extend(parts.warnings);
        let used = parts.terms.len();
        let mut beta = vec![0.0; self.x.n_points()];
        for term in &parts.terms {
            for (b, t) in beta.iter_mut().zip(term) {
                *b += t;
            }
        }
        Ok(self.assemble(h, beta, used, &pair, warnings))
    }

    /// Fit pieces for a given coefficient curve, e.g. an ergodic average.
    pub fn fit_with_beta(&self, h: f64, beta: Vec<f64>, n_pc_beta: usize) -> Result<FplmFit> {
        if beta.len() != self.x.n_points() {
            return Err(FplmError::DimensionMismatch("beta length differs from the grid".into()));
        }
        let pair = SmootherPair::new(&self.dist.values, h)?;
        Ok(self.assemble(h, beta, n_pc_beta, &pair, Vec::new()))
    }

    fn assemble(&self, h: f64, beta: Vec<f64>, used: usize, pair: &SmootherPair, warnings: Vec<String>) -> FplmFit {
        let linear: Vec<f64> = (0..self.n())
            .map(|i| self.xw.row(i).iter().zip(&beta).map(|(a, b)| a * b).sum())
            .collect();
        let partial: Vec<f64> = self.y.iter().zip(&linear).map(|(y, l)| y - l).collect();
        let m_full = pair.full.apply(&partial);
        let m_loo = pair.loo.apply(&partial);
        let fitted: Vec<f64> = linear.iter().zip(&m_full).map(|(l, m)| l + m).collect();
        let loo_fitted: Vec<f64> = linear.iter().zip(&m_loo).map(|(l, m)| l + m).collect();
        let residuals: Vec<f64> = self.y.iter().zip(&loo_fitted).map(|(y, f)| y - f).collect();
        FplmFit {
            grid: self.x.grid().clone(),
            spec: *self.spec(),
            h,
            distance_scale: self.distance_scale,
            n_pc_beta: used,
            beta_hat: beta,
            linear,
            partial_response: partial,
            m_hat: m_full,
            fitted,
            loo_fitted,
            residuals,
            warnings,
        }
    }
}

/// Fitted partial linear model at one bandwidth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FplmFit {
    pub grid: Grid,
    pub spec: SemiMetricSpec,
    pub h: f64,
    /// Raw distance per unit of `h`.
    pub distance_scale: f64,
    /// Components actually used for `β̂`.
    pub n_pc_beta: usize,
    pub beta_hat: Vec<f64>,
    /// `⟨X_i, β̂⟩`.
    pub linear: Vec<f64>,
    /// `y_i - ⟨X_i, β̂⟩`, the response of the smoothing stage.
    pub partial_response: Vec<f64>,
    /// `m̂(Z_i)` with the full weight matrix.
    pub m_hat: Vec<f64>,
    /// `⟨X_i, β̂⟩ + m̂(Z_i)`; equals `predict` on the training curves.
    pub fitted: Vec<f64>,
    /// Same with each unit's own weight removed from the smoother.
    pub loo_fitted: Vec<f64>,
    /// `y_i - loo_fitted_i`, feeding the kernel error density.
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FplmFit {
    /// `ŷ = ⟨X_new, β̂⟩ + Σ_i w_h(Z_new, Z_i)(y_i - ⟨X_i, β̂⟩)`.
    pub fn predict(
        &self,
        metric: &TrainedSemiMetric,
        x_new: &FunctionalSample,
        z_new: &FunctionalSample,
    ) -> Result<Vec<f64>> {
        if !x_new.grid().is_compatible(&self.grid) {
            return Err(FplmError::DimensionMismatch("X grid differs from training".into()));
        }
        if x_new.n_curves() != z_new.n_curves() {
            return Err(FplmError::DimensionMismatch("X and Z have different curve counts".into()));
        }
        if metric.n_training() != self.partial_response.len() {
            return Err(FplmError::DimensionMismatch("semi-metric trained on a different sample".into()));
        }
        let d = metric.distances_to(z_new)? / self.distance_scale;
        let w = prediction_weights(&d, self.h)?;
        let smooth = &w * nalgebra::DVector::from_column_slice(&self.partial_response);
        let wq = self.grid.weights();
        Ok((0..x_new.n_curves())
            .map(|i| {
                let lin: f64 = x_new
                    .values()
                    .row(i)
                    .iter()
                    .zip(&self.beta_hat)
                    .zip(wq)
                    .map(|((x, b), q)| x * b * q)
                    .sum();
                lin + smooth[i]
            })
            .collect())
    }
}

/// One-shot fit: train the semi-metric on `Z`, then fit at `h`.
pub fn fit_fplm(
    x: &FunctionalSample,
    z: &FunctionalSample,
    y: &[f64],
    h: f64,
    spec: SemiMetricSpec,
    n_pc_beta: usize,
) -> Result<(FplmData, FplmFit)> {
    let data = FplmData::new(x.clone(), z, y.to_vec(), spec)?;
    let fit = data.fit(h, n_pc_beta)?;
    Ok((data, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fda::{fpca, Grid};
    use std::f64::consts::PI;

    fn curves(n: usize, seed: f64) -> FunctionalSample {
        let grid = Grid::equispaced(0.0, PI, 40).unwrap();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let a = ((i as f64 + seed) * 1.3).sin();
                let b = ((i as f64 + seed) * 0.7).cos();
                let c = ((i as f64 + seed) * 2.9).sin();
                grid.points().iter().map(|&t| a * (2.0 * t).cos() + b * (4.0 * t).sin() + c * t).collect()
            })
            .collect();
        FunctionalSample::from_rows(grid, &rows).unwrap()
    }

    #[test]
    fn constant_response_is_absorbed() {
        let x = curves(12, 0.0);
        let z = curves(12, 5.0);
        let y = vec![3.25; 12];
        let (_, fit) = fit_fplm(&x, &z, &y, 0.7, SemiMetricSpec::derivative(1), 3).unwrap();
        assert!(fit.beta_hat.iter().all(|b| b.abs() < 1e-12));
        for i in 0..12 {
            assert!((fit.m_hat[i] - 3.25).abs() < 1e-12);
            assert!(fit.residuals[i].abs() < 1e-12);
            assert_eq!(fit.loo_fitted[i] + fit.residuals[i], y[i]);
        }
    }

    #[test]
    fn recovers_linear_response_with_flat_weights() {
        let x = curves(4, 1.0);
        let z = curves(4, 9.0);
        let basis = fpca(&x, 1).unwrap();
        // y exactly linear in the first score; W → uniform at huge h
        let y: Vec<f64> = (0..4).map(|i| 1.5 + 2.0 * basis.scores[(i, 0)]).collect();
        let (_, fit) = fit_fplm(&x, &z, &y, 1e9, SemiMetricSpec::derivative(1), 1).unwrap();
        // hand solution: β = 2 φ₁
        for (b, phi) in fit.beta_hat.iter().zip(basis.eigenfunctions.row(0).iter()) {
            assert!((b - 2.0 * phi).abs() < 1e-6);
        }
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-6));
    }

    #[test]
    fn prediction_reproduces_in_sample_fit() {
        let x = curves(15, 0.3);
        let z = curves(15, 2.2);
        let y: Vec<f64> = (0..15).map(|i| (i as f64).sin() * 2.0 + 0.1 * i as f64).collect();
        let (data, fit) = fit_fplm(&x, &z, &y, 0.5, SemiMetricSpec::derivative(2), 2).unwrap();
        let pred = fit.predict(data.metric(), &x, &z).unwrap();
        for (p, f) in pred.iter().zip(&fit.fitted) {
            assert!((p - f).abs() < 1e-10);
        }
        let dup = fit.predict(data.metric(), &x.select(&[7]), &z.select(&[7])).unwrap();
        assert!((dup[0] - fit.fitted[7]).abs() < 1e-10);
    }

    #[test]
    fn tiny_bandwidth_predicts_through_nearest_neighbour() {
        let x = curves(10, 0.0);
        let z = curves(10, 3.0);
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let (data, fit) = fit_fplm(&x, &z, &y, 1e-6, SemiMetricSpec::derivative(1), 2).unwrap();
        let x_new = curves(1, 100.0);
        let pred = fit.predict(data.metric(), &x_new, &z.select(&[4])).unwrap();
        let lin_new: f64 = crate::fda::inner_product(&x_new.curve(0), &fit.beta_hat, x.grid()).unwrap();
        assert!((pred[0] - (lin_new + fit.partial_response[4])).abs() < 1e-9);
    }

    #[test]
    fn mismatched_sizes() {
        let x = curves(6, 0.0);
        let z = curves(5, 0.0);
        assert!(FplmData::new(x, &z, vec![0.0; 6], SemiMetricSpec::derivative(1)).is_err());
    }

    #[test]
    fn component_rules() {
        let x = curves(30, 0.4);
        let z = curves(30, 7.1);
        let basis = fpca(&x, 3).unwrap();
        let y: Vec<f64> = (0..30)
            .map(|i| basis.scores[(i, 0)] - 2.0 * basis.scores[(i, 2)] + (i as f64 * 0.37).sin() * 0.01)
            .collect();
        let data = FplmData::new(x, &z, y, SemiMetricSpec::derivative(1)).unwrap();
        assert_eq!(data.resolve_components(ComponentRule::Fixed { k: 50 }, 1.0).unwrap(), 10);
        let mse = data.loo_mse_by_components(0.5, 4).unwrap();
        // curves span three functions
        assert_eq!(mse.len(), 3);
        // the cumulative fits agree with refitting at each count
        for (k, m) in mse.iter().enumerate() {
            let fit = data.fit(0.5, k + 1).unwrap();
            let direct = fit.residuals.iter().map(|r| r * r).sum::<f64>() / 30.0;
            assert!((direct - m).abs() < 1e-10 * (1.0 + m));
        }
        let k = data.resolve_components(ComponentRule::CrossValidation, 1.0).unwrap();
        assert!((1..=10).contains(&k));
        assert_eq!("cv".parse::<ComponentRule>().unwrap(), ComponentRule::CrossValidation);
        assert_eq!("4".parse::<ComponentRule>().unwrap(), ComponentRule::Fixed { k: 4 });
        assert!("var:1.5".parse::<ComponentRule>().is_err());
    }

    #[test]
    fn scaled_bandwidth_matches_raw() {
        let x = curves(12, 0.2);
        let z = curves(12, 4.0);
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.8).cos()).collect();
        let spec = SemiMetricSpec::derivative(1);
        let scaled = FplmData::new(x.clone(), &z, y.clone(), spec).unwrap();
        let raw = FplmData::with_scale(x.clone(), &z, y, spec, DistanceScale::Raw).unwrap();
        let s = scaled.distance_scale();
        let a = scaled.fit(0.6, 2).unwrap();
        let b = raw.fit(0.6 * s, 2).unwrap();
        for (p, q) in a.fitted.iter().zip(&b.fitted) {
            assert!((p - q).abs() < 1e-9);
        }
        let pa = a.predict(scaled.metric(), &x, &z).unwrap();
        let pb = b.predict(raw.metric(), &x, &z).unwrap();
        for (p, q) in pa.iter().zip(&pb) {
            assert!((p - q).abs() < 1e-9);
        }
    }

    #[test]
    fn beta_matches_dense_partial_residual_fpca() {
        let x = curves(20, 0.9);
        let z = curves(20, 3.3);
        let y: Vec<f64> = (0..20).map(|i| (i as f64 * 0.45).sin() * 3.0 + 0.2 * i as f64).collect();
        let data = FplmData::new(x.clone(), &z, y.clone(), SemiMetricSpec::derivative(1)).unwrap();
        let h = 0.4;
        let fit = data.fit(h, 2).unwrap();
        // reference: decompose (I - W)X on the full grid and regress (I - W)y on its scores
        let pair = SmootherPair::new(&data.distances().values, h).unwrap();
        let xt = FunctionalSample::new(x.grid().clone(), x.values() - &pair.full.values * x.values()).unwrap();
        let wy = pair.full.apply(&y);
        let yt: Vec<f64> = y.iter().zip(&wy).map(|(a, b)| a - b).collect();
        let ybar = yt.iter().sum::<f64>() / 20.0;
        let basis = fpca(&xt, 2).unwrap();
        let mut beta = vec![0.0; x.n_points()];
        for k in 0..2 {
            let sc = basis.scores.column(k);
            let gamma = sc.iter().zip(&yt).map(|(s, v)| s * (v - ybar)).sum::<f64>() / sc.norm_squared();
            for (b, phi) in beta.iter_mut().zip(basis.eigenfunctions.row(k).iter()) {
                *b += gamma * phi;
            }
        }
        for (a, b) in fit.beta_hat.iter().zip(&beta) {
            assert!((a - b).abs() < 1e-8 * (1.0 + b.abs()));
        }
    }
}
