use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Unit in which bandwidths are expressed.
///
/// With `MedianPairwise` every distance is divided by the median pairwise
/// distance among the training curves, so `h` is unit-free and a prior on
/// `h²` is equally informative whatever the semi-metric or the measurement
/// units of the curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceScale {
    Raw,
    #[default]
    MedianPairwise,
}

impl DistanceScale {
    /// Divisor applied to raw distances.
    pub fn divisor(&self, dist: &DMatrix<f64>) -> f64 {
        match self {
            DistanceScale::Raw => 1.0,
            DistanceScale::MedianPairwise => median_pairwise_distance(dist),
        }
    }
}

impl std::str::FromStr for DistanceScale {
    type Err = crate::FplmError;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Self::Raw),
            "median" | "median_pairwise" => Ok(Self::MedianPairwise),
            other => Err(crate::FplmError::InvalidArgument(format!("unknown distance scale `{other}`"))),
        }
    }
}

/// Median of the off-diagonal entries of a symmetric distance matrix; falls
/// back to the smallest positive distance, then to 1.
pub fn median_pairwise_distance(dist: &DMatrix<f64>) -> f64 {
    let n = dist.nrows();
    let mut v: Vec<f64> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            v.push(dist[(i, j)]);
        }
    }
    if v.is_empty() {
        return 1.0;
    }
    v.sort_by(f64::total_cmp);
    let med = v[v.len() / 2];
    if med > 0.0 {
        med
    } else {
        v.iter().copied().find(|&d| d > 0.0).unwrap_or(1.0)
    }
}
