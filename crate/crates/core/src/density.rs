//! Gaussian location-mixture error density centred on model residuals, with
//! a global bandwidth `b` or localized bandwidths `τ(1 + τ_ε|ε̂_j|)`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{FplmError, Result};

/// Evaluation grid shared by quantile inversion and the density criteria.
pub const GRID_LO: f64 = -10.0;
pub const GRID_HI: f64 = 10.0;
pub const GRID_POINTS: usize = 1001;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density.
#[inline]
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal distribution function.
#[inline]
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// The 1,001 equispaced points of `[-10, 10]`.
pub fn evaluation_grid() -> Vec<f64> {
    let step = (GRID_HI - GRID_LO) / (GRID_POINTS - 1) as f64;
    (0..GRID_POINTS).map(|i| GRID_LO + step * i as f64).collect()
}

/// How each mixture component's standard deviation is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ErrorBandwidth {
    Global { b: f64 },
    Localized { tau: f64, tau_eps: f64 },
}

impl ErrorBandwidth {
    /// Standard deviation of the component centred at residual `e`.
    #[inline]
    pub fn at(&self, e: f64) -> f64 {
        match *self {
            ErrorBandwidth::Global { b } => b,
            ErrorBandwidth::Localized { tau, tau_eps } => tau * (1.0 + tau_eps * e.abs()),
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            ErrorBandwidth::Global { b } => b > 0.0 && b.is_finite(),
            ErrorBandwidth::Localized { tau, tau_eps } => {
                tau > 0.0 && tau.is_finite() && (0.0..=1.0).contains(&tau_eps)
            }
        }
    }
}

/// Kernel estimate of the error density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelErrorDensity {
    residuals: Vec<f64>,
    bandwidth: ErrorBandwidth,
    #[serde(skip)]
    component_sd: Vec<f64>,
}

/// Lower and upper end of a pointwise prediction interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
}

impl PredictionInterval {
    pub fn contains(&self, y: f64) -> bool {
        self.lower <= y && y <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

impl KernelErrorDensity {
    pub fn new(residuals: Vec<f64>, bandwidth: ErrorBandwidth) -> Result<Self> {
        if residuals.is_empty() {
            return Err(FplmError::InvalidArgument("no residuals".into()));
        }
        if residuals.iter().any(|r| !r.is_finite()) {
            return Err(FplmError::InvalidArgument("non-finite residual".into()));
        }
        if !bandwidth.is_valid() {
            return Err(FplmError::InvalidArgument(format!("invalid bandwidth {bandwidth:?}")));
        }
        let component_sd = residuals.iter().map(|&e| bandwidth.at(e)).collect();
        Ok(Self {
            residuals,
            bandwidth,
            component_sd,
        })
    }

    pub fn global(residuals: Vec<f64>, b: f64) -> Result<Self> {
        Self::new(residuals, ErrorBandwidth::Global { b })
    }

    pub fn localized(residuals: Vec<f64>, tau: f64, tau_eps: f64) -> Result<Self> {
        Self::new(residuals, ErrorBandwidth::Localized { tau, tau_eps })
    }

    pub fn residuals(&self) -> &[f64] {
        &self.residuals
    }

    pub fn bandwidth(&self) -> ErrorBandwidth {
        self.bandwidth
    }

    fn sds(&self) -> std::borrow::Cow<'_, [f64]> {
        if self.component_sd.len() == self.residuals.len() {
            std::borrow::Cow::Borrowed(&self.component_sd)
        } else {
            std::borrow::Cow::Owned(self.residuals.iter().map(|&e| self.bandwidth.at(e)).collect())
        }
    }

    /// `(1/n) Σ_j φ((ε - ε̂_j)/b_j)/b_j`.
    pub fn density_at(&self, eps: f64) -> f64 {
        let sds = self.sds();
        let n = self.residuals.len() as f64;
        self.residuals
            .iter()
            .zip(sds.iter())
            .map(|(e, s)| std_normal_pdf((eps - e) / s) / s)
            .sum::<f64>()
            / n
    }

    /// Mixture distribution function, summed analytically over components.
    pub fn cdf_at(&self, eps: f64) -> f64 {
        let sds = self.sds();
        let n = self.residuals.len() as f64;
        let v = self
            .residuals
            .iter()
            .zip(sds.iter())
            .map(|(e, s)| std_normal_cdf((eps - e) / s))
            .sum::<f64>()
            / n;
        v.clamp(0.0, 1.0)
    }

    /// Inverse distribution function on the `[-10, 10]` grid, linearly
    /// interpolated between the two bracketing grid points.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(FplmError::InvalidArgument(format!("probability {p} outside (0, 1)")));
        }
        let grid = evaluation_grid();
        let cdf: Vec<f64> = grid.iter().map(|&x| self.cdf_at(x)).collect();
        let idx = cdf.partition_point(|&c| c < p);
        if idx == 0 {
            return Ok(grid[0]);
        }
        if idx == grid.len() {
            return Ok(grid[grid.len() - 1]);
        }
        let (c0, c1) = (cdf[idx - 1], cdf[idx]);
        let (x0, x1) = (grid[idx - 1], grid[idx]);
        if c1 > c0 {
            Ok(x0 + (p - c0) / (c1 - c0) * (x1 - x0))
        } else {
            Ok(x1)
        }
    }

    /// `[ŷ + q((1 - level)/2), ŷ + q((1 + level)/2)]`.
    pub fn prediction_interval(&self, point_forecast: f64, level: f64) -> Result<PredictionInterval> {
        if !(level > 0.0 && level < 1.0) {
            return Err(FplmError::InvalidArgument(format!("level {level} outside (0, 1)")));
        }
        let lo = self.quantile((1.0 - level) / 2.0)?;
        let hi = self.quantile((1.0 + level) / 2.0)?;
        Ok(PredictionInterval {
            lower: point_forecast + lo,
            upper: point_forecast + hi,
            level,
        })
    }

    /// Two-column CSV `(epsilon, density)` on the evaluation grid.
    pub fn write_curve_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["epsilon", "density"])?;
        for x in evaluation_grid() {
            w.write_record([format!("{x:?}"), format!("{:?}", self.density_at(x))])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Leave-one-out kernel log-likelihood
/// `Σ_i log[(1/(n-1)) Σ_{j≠i} φ((ε̂_i - ε̂_j)/b_j)/b_j]`, accumulated with a
/// per-observation log-sum-exp. Returns `-∞` for fewer than two residuals,
/// an invalid bandwidth or a non-finite result.
pub fn loo_log_likelihood(residuals: &[f64], bandwidth: &ErrorBandwidth) -> f64 {
    let n = residuals.len();
    if n < 2 || !bandwidth.is_valid() {
        return f64::NEG_INFINITY;
    }
    let sds: Vec<f64> = residuals.iter().map(|&e| bandwidth.at(e)).collect();
    let log_sds: Vec<f64> = sds.iter().map(|s| s.ln()).collect();
    let ln_n1 = ((n - 1) as f64).ln();
    let mut total = 0.0;
    let mut terms = vec![0.0; n];
    for i in 0..n {
        let ei = residuals[i];
        let mut max = f64::NEG_INFINITY;
        for j in 0..n {
            if j == i {
                continue;
            }
            let u = (ei - residuals[j]) / sds[j];
            let a = -0.5 * u * u - log_sds[j];
            terms[j] = a;
            if a > max {
                max = a;
            }
        }
        if !max.is_finite() {
            return f64::NEG_INFINITY;
        }
        let mut s = 0.0;
        for j in 0..n {
            if j != i {
                s += (terms[j] - max).exp();
            }
        }
        total += max + s.ln() - ln_n1 - LN_SQRT_2PI;
    }
    if total.is_finite() {
        total
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_point_mixture_at_zero() {
        let d = KernelErrorDensity::global(vec![-1.0, 1.0], 1.0).unwrap();
        assert!((d.density_at(0.0) - 0.24197).abs() < 1e-5);
        assert!(d.density_at(1e4) < 1e-300);
    }

    #[test]
    fn loo_likelihood_hand_values() {
        let g = ErrorBandwidth::Global { b: 1.0 };
        let v = loo_log_likelihood(&[-1.0, 0.0, 1.0], &g);
        let phi1 = std_normal_pdf(1.0);
        let phi2 = std_normal_pdf(2.0);
        let hand = 2.0 * ((phi1 + phi2) / 2.0).ln() + phi1.ln();
        assert!((v - hand).abs() < 1e-12);
        assert!((v - (-5.240)).abs() < 1e-3);
        let v2 = loo_log_likelihood(&[0.0, 0.0], &g);
        assert!((v2 - 2.0 * std_normal_pdf(0.0).ln()).abs() < 1e-12);
        assert!((v2 - (-1.8379)).abs() < 1e-4);
    }

    #[test]
    fn loo_likelihood_edge_cases() {
        let g = ErrorBandwidth::Global { b: 1.0 };
        assert_eq!(loo_log_likelihood(&[1.0], &g), f64::NEG_INFINITY);
        assert_eq!(loo_log_likelihood(&[1.0, 2.0], &ErrorBandwidth::Global { b: 0.0 }), f64::NEG_INFINITY);
        // widely separated residuals with a tiny bandwidth stay finite
        let v = loo_log_likelihood(&[0.0, 100.0], &ErrorBandwidth::Global { b: 1e-3 });
        assert!(v.is_finite());
    }

    #[test]
    fn localized_reduces_to_global() {
        let res = vec![-2.0, -0.3, 0.1, 0.4, 1.7, 3.0];
        let g = KernelErrorDensity::global(res.clone(), 0.7).unwrap();
        let l = KernelErrorDensity::localized(res.clone(), 0.7, 0.0).unwrap();
        for k in 0..100 {
            let x = -5.0 + 0.1 * k as f64;
            assert_eq!(g.density_at(x), l.density_at(x));
        }
        assert_eq!(
            loo_log_likelihood(&res, &ErrorBandwidth::Global { b: 0.7 }),
            loo_log_likelihood(&res, &ErrorBandwidth::Localized { tau: 0.7, tau_eps: 0.0 })
        );
    }

    #[test]
    fn quantiles() {
        let sym = KernelErrorDensity::global(vec![-1.0, 1.0], 0.6).unwrap();
        assert!((sym.cdf_at(0.0) - 0.5).abs() < 1e-15);
        assert!(sym.quantile(0.5).unwrap().abs() < 0.02);
        let unit = KernelErrorDensity::global(vec![0.0], 1.0).unwrap();
        assert!((unit.quantile(0.8413).unwrap() - 1.0).abs() < 0.02);
        assert!(unit.quantile(0.0).is_err());
        assert!(unit.quantile(1.0).is_err());
        let contained = KernelErrorDensity::global(vec![-3.0, 0.5, 3.0], 1.0).unwrap();
        assert!(contained.cdf_at(10.0) >= 0.999);
    }

    #[test]
    fn symmetric_interval() {
        let d = KernelErrorDensity::global(vec![-1.2, -0.4, 0.4, 1.2], 0.5).unwrap();
        let pi = d.prediction_interval(10.0, 0.8).unwrap();
        assert!(((pi.upper - 10.0) - (10.0 - pi.lower)).abs() < 0.02);
        assert!(pi.width() > 0.0);
        assert!(d.prediction_interval(0.0, 1.0).is_err());
    }

    #[test]
    fn curve_export() {
        let d = KernelErrorDensity::global(vec![0.0, 1.0], 0.5).unwrap();
        let mut buf = Vec::new();
        d.write_curve_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), GRID_POINTS + 1);
    }

    fn trapezoid(d: &KernelErrorDensity) -> f64 {
        let g = evaluation_grid();
        let step = g[1] - g[0];
        let f: Vec<f64> = g.iter().map(|&x| d.density_at(x)).collect();
        step * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[f.len() - 1]))
    }

    proptest! {
        #[test]
        fn normalised_on_grid(res in proptest::collection::vec(-5.0f64..5.0, 1..40), b in 0.05f64..1.0, te in 0.0f64..1.0) {
            let d = KernelErrorDensity::global(res.clone(), b).unwrap();
            prop_assert!((trapezoid(&d) - 1.0).abs() < 1e-3);
            // localized bandwidths capped at 1 for the normalisation bound
            let tau = b / (1.0 + te * 5.0);
            let l = KernelErrorDensity::localized(res, tau, te).unwrap();
            prop_assert!((trapezoid(&l) - 1.0).abs() < 1e-3);
        }

        #[test]
        fn translation_invariant_likelihood(res in proptest::collection::vec(-3.0f64..3.0, 2..30), b in 0.1f64..2.0, shift in -50.0f64..50.0) {
            let g = ErrorBandwidth::Global { b };
            let moved: Vec<f64> = res.iter().map(|r| r + shift).collect();
            let a = loo_log_likelihood(&res, &g);
            let c = loo_log_likelihood(&moved, &g);
            prop_assert!((a - c).abs() < 1e-8 * a.abs().max(1.0));
        }

        #[test]
        fn cdf_monotone_and_quantile_inverts(res in proptest::collection::vec(-2.0f64..2.0, 1..20), b in 0.2f64..1.0, x in -2.0f64..2.0) {
            let d = KernelErrorDensity::global(res, b).unwrap();
            prop_assert!(d.cdf_at(x) <= d.cdf_at(x + 0.01));
            let p = d.cdf_at(x);
            if p > 1e-6 && p < 1.0 - 1e-6 {
                prop_assert!((d.quantile(p).unwrap() - x).abs() < 0.02);
            }
        }

        #[test]
        fn likelihood_continuous_in_bandwidth(res in proptest::collection::vec(-3.0f64..3.0, 2..30), b in 0.1f64..2.0) {
            let f = |bb: f64| loo_log_likelihood(&res, &ErrorBandwidth::Global { b: bb });
            let step = 1e-6 * b;
            // each term moves at most (1/b + D²/b³) per unit of b, D the residual range
            let lo = res.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = res.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slope = 1.0 / b + (hi - lo).powi(2) / b.powi(3);
            prop_assert!((f(b + step) - f(b)).abs() <= 1.01 * step * slope * res.len() as f64 + 1e-9);
        }
    }
}
