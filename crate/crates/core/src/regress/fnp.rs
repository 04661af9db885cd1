//! Functional Nadaraya–Watson regression of `y` on one curve.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::nw::{prediction_weights, SmootherPair};
use super::scale::DistanceScale;
use crate::error::{FplmError, Result};
use crate::fda::FunctionalSample;
use crate::semimetric::{DistanceMatrix, SemiMetricSpec, TrainedSemiMetric};

#[derive(Debug, Clone)]
pub struct FnpData {
    y: Vec<f64>,
    metric: TrainedSemiMetric,
    /// Pairwise distances divided by `distance_scale`.
    dist: DistanceMatrix,
    distance_scale: f64,
}

impl FnpData {
    /// Bandwidths in units of the median pairwise distance.
    pub fn new(x: &FunctionalSample, y: Vec<f64>, spec: SemiMetricSpec) -> Result<Self> {
        Self::with_scale(x, y, spec, DistanceScale::default())
    }

    pub fn with_scale(x: &FunctionalSample, y: Vec<f64>, spec: SemiMetricSpec, scale: DistanceScale) -> Result<Self> {
        if x.n_curves() != y.len() {
            return Err(FplmError::DimensionMismatch(format!(
                "{} curves, {} responses",
                x.n_curves(),
                y.len()
            )));
        }
        if y.len() < 2 {
            return Err(FplmError::InvalidArgument("need at least 2 observations".into()));
        }
        let metric = spec.train(x)?;
        let mut dist = metric.pairwise();
        let distance_scale = scale.divisor(&dist.values);
        dist.values /= distance_scale;
        Ok(Self {
            y,
            metric,
            dist,
            distance_scale,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn metric(&self) -> &TrainedSemiMetric {
        &self.metric
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.dist
    }

    /// Raw distance corresponding to a unit bandwidth.
    pub fn distance_scale(&self) -> f64 {
        self.distance_scale
    }

    pub fn fit(&self, h: f64) -> Result<FnpFit> {
        let pair = SmootherPair::new(&self.dist.values, h)?;
        let fitted = pair.full.apply(&self.y);
        let loo_fitted = pair.loo.apply(&self.y);
        let residuals = self.y.iter().zip(&loo_fitted).map(|(y, f)| y - f).collect();
        Ok(FnpFit {
            spec: *self.metric.spec(),
            h,
            distance_scale: self.distance_scale,
            y: self.y.clone(),
            fitted,
            loo_fitted,
            residuals,
        })
    }
}

/// Fitted conditional-mean smoother.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FnpFit {
    pub spec: SemiMetricSpec,
    pub h: f64,
    pub distance_scale: f64,
    pub y: Vec<f64>,
    /// `Σ_j w_h(X_i, X_j) y_j`, own weight included.
    pub fitted: Vec<f64>,
    pub loo_fitted: Vec<f64>,
    /// `y - loo_fitted`.
    pub residuals: Vec<f64>,
}

impl FnpFit {
    pub fn predict(&self, metric: &TrainedSemiMetric, x_new: &FunctionalSample) -> Result<Vec<f64>> {
        if metric.n_training() != self.y.len() {
            return Err(FplmError::DimensionMismatch("semi-metric trained on a different sample".into()));
        }
        let d = metric.distances_to(x_new)? / self.distance_scale;
        let w = prediction_weights(&d, self.h)?;
        Ok((w * DVector::from_column_slice(&self.y)).iter().copied().collect())
    }
}

pub fn fit_fnp(x: &FunctionalSample, y: &[f64], h: f64, spec: SemiMetricSpec) -> Result<(FnpData, FnpFit)> {
    let data = FnpData::new(x, y.to_vec(), spec)?;
    let fit = data.fit(h)?;
    Ok((data, fit))
}
