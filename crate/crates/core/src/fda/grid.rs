use serde::{Deserialize, Serialize};

use crate::error::{FplmError, Result};

/// Observation grid shared by every curve of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    points: Vec<f64>,
    support_lo: f64,
    support_hi: f64,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    points: Vec<f64>,
    support_lo: f64,
    support_hi: f64,
}

impl TryFrom<GridRepr> for Grid {
    type Error = FplmError;

    fn try_from(r: GridRepr) -> Result<Self> {
        Grid::with_support(r.points, r.support_lo, r.support_hi)
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            points: g.points,
            support_lo: g.support_lo,
            support_hi: g.support_hi,
        }
    }
}

impl Grid {
    /// Grid whose support is `[points[0], points[last]]`.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        let lo = points.first().copied().unwrap_or(f64::NAN);
        let hi = points.last().copied().unwrap_or(f64::NAN);
        Self::with_support(points, lo, hi)
    }

    pub fn with_support(points: Vec<f64>, support_lo: f64, support_hi: f64) -> Result<Self> {
        if points.len() < 4 {
            return Err(FplmError::InvalidGrid(format!(
                "need at least 4 points, got {}",
                points.len()
            )));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(FplmError::InvalidGrid("non-finite grid point".into()));
        }
        if let Some(i) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(FplmError::InvalidGrid(format!(
                "points not strictly increasing at index {}",
                i + 1
            )));
        }
        if !(support_lo <= points[0] && points[points.len() - 1] <= support_hi) {
            return Err(FplmError::InvalidGrid(format!(
                "support [{support_lo}, {support_hi}] does not contain the grid"
            )));
        }
        let weights = trapezoid_weights(&points);
        Ok(Self {
            points,
            support_lo,
            support_hi,
            weights,
        })
    }

    /// `m` equispaced points from `lo` to `hi` inclusive.
    pub fn equispaced(lo: f64, hi: f64, m: usize) -> Result<Self> {
        if m < 2 || !(hi > lo) {
            return Err(FplmError::InvalidGrid(format!(
                "cannot build {m} points on [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (m - 1) as f64;
        let mut points: Vec<f64> = (0..m).map(|j| lo + step * j as f64).collect();
        points[m - 1] = hi;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.support_lo, self.support_hi)
    }

    /// Trapezoidal quadrature weights on the grid points.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Trapezoidal approximation of the integral of sampled values.
    pub fn integrate(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.len() {
            return Err(FplmError::DimensionMismatch(format!(
                "{} values on a grid of {} points",
                values.len(),
                self.len()
            )));
        }
        Ok(values.iter().zip(&self.weights).map(|(v, w)| v * w).sum())
    }

    /// Same abscissae within a relative tolerance of 1e-12.
    pub fn is_compatible(&self, other: &Grid) -> bool {
        self.len() == other.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0))
    }
}

fn trapezoid_weights(points: &[f64]) -> Vec<f64> {
    let m = points.len();
    let mut w = vec![0.0; m];
    for j in 0..m - 1 {
        let half = 0.5 * (points[j + 1] - points[j]);
        w[j] += half;
        w[j + 1] += half;
    }
    w
}

/// Trapezoidal approximation of `∫ x(t) beta(t) dt`.
pub fn inner_product(x: &[f64], beta: &[f64], grid: &Grid) -> Result<f64> {
    if x.len() != grid.len() || beta.len() != grid.len() {
        return Err(FplmError::DimensionMismatch(format!(
            "curves of length {} and {} on a grid of {} points",
            x.len(),
            beta.len(),
            grid.len()
        )));
    }
    Ok(x.iter()
        .zip(beta)
        .zip(grid.weights())
        .map(|((a, b), w)| a * b * w)
        .sum())
}
