use crate::error::Result;
use crate::regress::{median_pairwise_distance, ComponentRule, FnpData, FplmData};

/// Model quantities after refitting at one smoothing bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    /// Residuals entering the kernel likelihood.
    pub residuals: Vec<f64>,
    /// Nonparametric component at the training curves.
    pub m_hat: Vec<f64>,
    /// Coefficient curve, for partial linear models.
    pub beta: Option<Vec<f64>>,
}

/// A regression whose only tuning parameter is the kernel bandwidth `h`.
pub trait BandwidthModel: Sync {
    fn n_obs(&self) -> usize;
    fn refit(&self, h: f64) -> Result<ModelState>;
}

/// Partial linear model with the number of `β̂` components held fixed.
#[derive(Debug, Clone, Copy)]
pub struct FplmModel<'a> {
    pub data: &'a FplmData,
    pub n_pc_beta: usize,
}

impl<'a> FplmModel<'a> {
    /// Default component rule, resolved once at the median pairwise distance.
    pub fn new(data: &'a FplmData) -> Result<Self> {
        Self::with_rule(data, ComponentRule::default())
    }

    pub fn with_rule(data: &'a FplmData, rule: ComponentRule) -> Result<Self> {
        let h_ref = reference_bandwidth(&data.distances().values);
        let n_pc_beta = data.resolve_components(rule, h_ref)?;
        Ok(Self { data, n_pc_beta })
    }

    pub fn with_components(data: &'a FplmData, n_pc_beta: usize) -> Self {
        Self { data, n_pc_beta }
    }
}

impl BandwidthModel for FplmModel<'_> {
    fn n_obs(&self) -> usize {
        self.data.n()
    }

    fn refit(&self, h: f64) -> Result<ModelState> {
        let fit = self.data.fit(h, self.n_pc_beta)?;
        Ok(ModelState {
            residuals: fit.residuals,
            m_hat: fit.m_hat,
            beta: Some(fit.beta_hat),
        })
    }
}

impl BandwidthModel for FnpData {
    fn n_obs(&self) -> usize {
        self.n()
    }

    fn refit(&self, h: f64) -> Result<ModelState> {
        let fit = self.fit(h)?;
        Ok(ModelState {
            residuals: fit.residuals,
            m_hat: fit.fitted,
            beta: None,
        })
    }
}

/// Median of the off-diagonal pairwise distances, floored away from zero.
pub fn reference_bandwidth(dist: &nalgebra::DMatrix<f64>) -> f64 {
    median_pairwise_distance(dist)
}
