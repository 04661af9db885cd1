//! B-spline least-squares representation of discretized curves, with
//! derivatives obtained by differencing the coefficients onto the basis of
//! one order lower.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{FunctionalSample, Grid};
use crate::error::{FplmError, Result};

/// Cubic splines.
pub const DEFAULT_ORDER: usize = 4;

/// Interior knot count used when none is configured: `min(20, m / 4)`.
pub fn default_interior_knots(m: usize) -> usize {
    (m / 4).min(20)
}

/// Spline basis on a clamped knot vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineBasis {
    order: usize,
    knots: Vec<f64>,
}

impl BSplineBasis {
    /// Clamped basis on `[lo, hi]` with the given interior knots.
    pub fn clamped(order: usize, lo: f64, hi: f64, interior: &[f64]) -> Result<Self> {
        if order < 1 {
            return Err(FplmError::InvalidArgument("spline order must be >= 1".into()));
        }
        if !(hi > lo) || interior.iter().any(|&k| !(k > lo && k < hi)) {
            return Err(FplmError::InvalidArgument(
                "interior knots must lie strictly inside the support".into(),
            ));
        }
        if interior.windows(2).any(|w| w[1] < w[0]) {
            return Err(FplmError::InvalidArgument("interior knots must be sorted".into()));
        }
        let mut knots = Vec::with_capacity(2 * order + interior.len());
        knots.extend(std::iter::repeat_n(lo, order));
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat_n(hi, order));
        Ok(Self { order, knots })
    }

    /// Interior knots at evenly spaced quantiles of the grid points.
    pub fn at_grid_quantiles(grid: &Grid, order: usize, n_interior: usize) -> Result<Self> {
        let pts = grid.points();
        let m = pts.len();
        let interior: Vec<f64> = (1..=n_interior)
            .map(|j| {
                let pos = j as f64 / (n_interior + 1) as f64 * (m - 1) as f64;
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                if lo + 1 < m {
                    pts[lo] + frac * (pts[lo + 1] - pts[lo])
                } else {
                    pts[m - 1]
                }
            })
            .collect();
        Self::clamped(order, pts[0], pts[m - 1], &interior)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn n_basis(&self) -> usize {
        self.knots.len() - self.order
    }

    fn lo(&self) -> f64 {
        self.knots[self.order - 1]
    }

    fn hi(&self) -> f64 {
        self.knots[self.knots.len() - self.order]
    }

    /// Index `s` of the knot span `[t_s, t_{s+1})` holding `x`, clamped so the
    /// right end of the support belongs to the last non-empty span.
    fn span(&self, x: f64) -> usize {
        let k = self.order;
        let last = self.knots.len() - k - 1;
        if x >= self.hi() {
            return last;
        }
        if x <= self.lo() {
            return k - 1;
        }
        // largest s with t_s <= x
        let upper = self.knots.partition_point(|&t| t <= x);
        (upper - 1).clamp(k - 1, last)
    }

    /// The `order` basis functions that can be non-zero at `x`, and the index
    /// of the first one.
    fn local_values(&self, x: f64) -> (usize, Vec<f64>) {
        let k = self.order;
        let s = self.span(x);
        let t = &self.knots;
        let mut values = vec![0.0; k];
        let mut left = vec![0.0; k];
        let mut right = vec![0.0; k];
        values[0] = 1.0;
        for j in 1..k {
            left[j] = x - t[s + 1 - j];
            right[j] = t[s + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { values[r] / denom } else { 0.0 };
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        (s + 1 - k, values)
    }

    /// Dense `len(points) × n_basis` evaluation matrix.
    pub fn design(&self, points: &[f64]) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(points.len(), self.n_basis());
        for (row, &x) in points.iter().enumerate() {
            let (first, vals) = self.local_values(x);
            for (off, v) in vals.into_iter().enumerate() {
                b[(row, first + off)] = v;
            }
        }
        b
    }

    /// Basis of order `k - 1` on the inner knot vector, and the
    /// `(p - 1) × p` matrix taking coefficients to derivative coefficients.
    pub fn derivative_operator(&self) -> Result<(BSplineBasis, DMatrix<f64>)> {
        let k = self.order;
        if k < 2 {
            return Err(FplmError::InvalidArgument(
                "cannot differentiate an order-1 spline".into(),
            ));
        }
        let p = self.n_basis();
        let t = &self.knots;
        let mut d = DMatrix::zeros(p - 1, p);
        for i in 1..p {
            let denom = t[i + k - 1] - t[i];
            if denom > 0.0 {
                let f = (k - 1) as f64 / denom;
                d[(i - 1, i)] = f;
                d[(i - 1, i - 1)] = -f;
            }
        }
        let lower = BSplineBasis {
            order: k - 1,
            knots: t[1..t.len() - 1].to_vec(),
        };
        Ok((lower, d))
    }
}

/// Least-squares spline coefficients for every curve of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BSplineRep {
    basis: BSplineBasis,
    grid: Grid,
    /// `n × p` coefficient matrix, one row per curve.
    coefs: DMatrix<f64>,
}

impl BSplineRep {
    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn coefs(&self) -> &DMatrix<f64> {
        &self.coefs
    }

    pub fn order(&self) -> usize {
        self.basis.order
    }

    pub fn knots(&self) -> &[f64] {
        &self.basis.knots
    }

    /// Smoothed curves on the original grid.
    pub fn evaluate(&self) -> FunctionalSample {
        let b = self.basis.design(self.grid.points());
        let values = &self.coefs * b.transpose();
        FunctionalSample::new(self.grid.clone(), values).expect("finite spline evaluation")
    }
}

/// Linear map from raw curve values on a grid to the `q`-th derivative of
/// their least-squares spline fit, evaluated back on the same grid. Frozen
/// once per grid and reused for training and new curves alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineSmoother {
    basis: BSplineBasis,
    grid: Grid,
    /// `p × m` pseudo-inverse of the design matrix.
    projector: DMatrix<f64>,
}

impl SplineSmoother {
    pub fn new(grid: &Grid, order: usize, n_interior_knots: usize) -> Result<Self> {
        if order < 2 {
            return Err(FplmError::InvalidArgument(format!(
                "spline order must be >= 2, got {order}"
            )));
        }
        let m = grid.len();
        if m < order + n_interior_knots {
            return Err(FplmError::DegenerateDesign(format!(
                "{} basis functions for {m} grid points",
                order + n_interior_knots
            )));
        }
        let basis = BSplineBasis::at_grid_quantiles(grid, order, n_interior_knots)?;
        let b = basis.design(grid.points());
        let svd = b.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-10 * smax) {
            return Err(FplmError::DegenerateDesign(format!(
                "design is rank deficient (singular value ratio {:.3e}); \
                 too many knots for the grid",
                smin / smax
            )));
        }
        let u = svd.u.expect("requested U");
        let vt = svd.v_t.expect("requested V^T");
        let inv = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
        let projector = vt.transpose() * inv * u.transpose();
        Ok(Self {
            basis,
            grid: grid.clone(),
            projector,
        })
    }

    pub fn with_defaults(grid: &Grid) -> Result<Self> {
        Self::new(grid, DEFAULT_ORDER, default_interior_knots(grid.len()))
    }

    pub fn basis(&self) -> &BSplineBasis {
        &self.basis
    }

    pub fn fit(&self, sample: &FunctionalSample) -> Result<BSplineRep> {
        if !sample.grid().is_compatible(&self.grid) {
            return Err(FplmError::DimensionMismatch(
                "sample grid differs from the smoother grid".into(),
            ));
        }
        Ok(BSplineRep {
            basis: self.basis.clone(),
            grid: self.grid.clone(),
            coefs: sample.values() * self.projector.transpose(),
        })
    }

    /// `m × m` operator `L` with `deriv_curves = curves · Lᵀ`.
    pub fn derivative_matrix(&self, q: usize) -> Result<DMatrix<f64>> {
        let (basis, coef_map) = derivative_chain(&self.basis, q)?;
        Ok(basis.design(self.grid.points()) * coef_map * &self.projector)
    }
}

fn derivative_chain(basis: &BSplineBasis, q: usize) -> Result<(BSplineBasis, DMatrix<f64>)> {
    if q >= basis.order {
        return Err(FplmError::InvalidArgument(format!(
            "derivative order {q} must be below spline order {}",
            basis.order
        )));
    }
    let mut current = basis.clone();
    let mut map = DMatrix::identity(basis.n_basis(), basis.n_basis());
    for _ in 0..q {
        let (lower, d) = current.derivative_operator()?;
        map = d * map;
        current = lower;
    }
    Ok((current, map))
}

/// Least-squares spline fit of every curve, knots at grid quantiles.
pub fn fit_bsplines(
    sample: &FunctionalSample,
    order: usize,
    n_interior_knots: usize,
) -> Result<BSplineRep> {
    SplineSmoother::new(sample.grid(), order, n_interior_knots)?.fit(sample)
}

/// `q`-th derivative of the spline representation on the original grid.
pub fn derivative(rep: &BSplineRep, q: usize) -> Result<FunctionalSample> {
    let (basis, map) = derivative_chain(&rep.basis, q)?;
    let b = basis.design(rep.grid.points());
    let values = &rep.coefs * map.transpose() * b.transpose();
    FunctionalSample::new(rep.grid.clone(), values)
}
