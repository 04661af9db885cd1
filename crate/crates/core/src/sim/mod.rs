//! Simulation designs, accuracy criteria and the replication and bootstrap
//! harnesses.

mod dgp;
mod metrics;
mod study;

pub use dgp::{
    centered_true_density, draw_errors, draw_errors_rng, from_coefficients, simulate_rough, simulate_smooth,
    simulate_with_noise, simulation_grid, smooth_curve, true_density, ErrorDensityKind, SmoothDgpDraw, ROUGH_NOISE,
    SIM_POINTS,
};
pub use metrics::{amse_amspe, averaged_mse, mean_squared_error, mise_kl, rmse_rmspe, LOG_FLOOR};
pub use study::{
    arms, bootstrap_study, fit_arm, run_replication_study, Arm, ArmOutcome, BootstrapConfig, CurveDesign, FitSettings,
    MetricRecord, MetricReport, MetricSummary, ModelKind, StudyConfig, StudyFailure, Triplets,
};
