//! Discretized functional data: grids, samples, splines and FPCA.

mod bspline;
mod fpca;
mod grid;
mod sample;

pub use bspline::{
    default_interior_knots, derivative, fit_bsplines, BSplineBasis, BSplineRep, SplineSmoother,
    DEFAULT_ORDER,
};
pub use fpca::{fpca, mean_curve, FpcaResult, RowSpaceBasis};
pub use grid::{inner_product, Grid};
pub use sample::FunctionalSample;
