//! Regression estimators: FPCR, functional NW (FNP) and the functional
//! partial linear model (FPLM).

mod fnp;
mod fplm;
mod fpcr;
mod nw;
mod scale;

pub use fnp::{fit_fnp, FnpData, FnpFit};
pub use fplm::{fit_fplm, ComponentRule, FplmData, FplmFit, BETA_VARIANCE_FRACTION, MAX_BETA_COMPONENTS};
pub use fpcr::{fit_fpcr, FpcrFit, DEFAULT_FPCR_COMPONENTS};
pub use nw::{gaussian_kernel, nw_weights, prediction_weights, NwWeights, SmootherPair, WeightMatrix};
pub use scale::{median_pairwise_distance, DistanceScale};
