use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{FplmError, Result};

/// Inverse-gamma prior in shape–scale form, density
/// `β^α / Γ(α) · x^{-(α+1)} · exp(-β/x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl Default for InverseGammaPrior {
    fn default() -> Self {
        Self { shape: 1.0, scale: 0.05 }
    }
}

impl InverseGammaPrior {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        if !(shape > 0.0 && scale > 0.0 && shape.is_finite() && scale.is_finite()) {
            return Err(FplmError::InvalidArgument(format!(
                "inverse-gamma parameters must be positive, got ({shape}, {scale})"
            )));
        }
        Ok(Self { shape, scale })
    }

    /// Vague prior `IG(0.001, 0.001)`.
    pub fn vague() -> Self {
        Self { shape: 1e-3, scale: 1e-3 }
    }

    /// Normalised log density; `-∞` for `x ≤ 0`.
    pub fn log_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) || !x.is_finite() {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.shape, self.scale);
        a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
    }

    pub fn mode(&self) -> f64 {
        self.scale / (self.shape + 1.0)
    }
}

/// Priors on the squared smoothing bandwidth and on the squared error-density
/// scale (`b²` or `τ²`). `τ_ε` always carries a `U(0, 1)` prior.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Priors {
    pub h2: InverseGammaPrior,
    pub error_scale2: InverseGammaPrior,
}

impl Priors {
    pub fn both(prior: InverseGammaPrior) -> Self {
        Self { h2: prior, error_scale2: prior }
    }
}

/// `U(0, 1)` log density.
pub fn log_unit_uniform(x: f64) -> f64 {
    if (0.0..=1.0).contains(&x) {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let p = InverseGammaPrior::default();
        assert!((p.log_pdf(1.0) - (0.05f64 * (-0.05f64).exp()).ln()).abs() < 1e-12);
        assert!((p.log_pdf(1.0) - (-3.0457)).abs() < 1e-4);
        assert_eq!(p.log_pdf(0.0), f64::NEG_INFINITY);
        assert_eq!(p.log_pdf(-1.0), f64::NEG_INFINITY);
        assert!(p.log_pdf(1e-300) < -1e10);
        assert!(p.log_pdf(p.mode()) > p.log_pdf(1.0));
        assert!((p.mode() - 0.025).abs() < 1e-15);
    }

    #[test]
    fn integrates_to_one() {
        // substitute x = e^u and integrate with the trapezoid rule
        let p = InverseGammaPrior::new(2.5, 0.7).unwrap();
        let (lo, hi, steps) = (-15.0f64, 15.0f64, 30_000);
        let du = (hi - lo) / steps as f64;
        let total: f64 = (0..=steps)
            .map(|i| {
                let u = lo + du * i as f64;
                let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
                w * (p.log_pdf(u.exp()) + u).exp()
            })
            .sum::<f64>()
            * du;
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(InverseGammaPrior::new(0.0, 1.0).is_err());
        assert!(InverseGammaPrior::new(1.0, -1.0).is_err());
        assert_eq!(log_unit_uniform(1.5), f64::NEG_INFINITY);
        assert_eq!(log_unit_uniform(0.5), 0.0);
    }
}
