//! Monte Carlo replication and bootstrap harnesses.

use std::collections::HashMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dgp::{centered_true_density, draw_errors_rng, simulate_with_noise, ErrorDensityKind, ROUGH_NOISE};
use super::metrics::{mean_squared_error, mise_kl};
use crate::bayes::{run_sampler, BandwidthMode, FplmModel, McmcConfig, Priors};
use crate::density::KernelErrorDensity;
use crate::error::{FplmError, Result};
use crate::fda::FunctionalSample;
use crate::par;
use crate::regress::{fit_fpcr, ComponentRule, DistanceScale, FnpData, FplmData, DEFAULT_FPCR_COMPONENTS};
use crate::semimetric::SemiMetricSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "FPLM")]
    Fplm,
    #[serde(rename = "FNP")]
    Fnp,
    #[serde(rename = "FPCR")]
    Fpcr,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Fplm => "FPLM",
            Self::Fnp => "FNP",
            Self::Fpcr => "FPCR",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = FplmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fplm" => Ok(Self::Fplm),
            "fnp" => Ok(Self::Fnp),
            "fpcr" => Ok(Self::Fpcr),
            other => Err(FplmError::InvalidArgument(format!("unknown model `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveDesign {
    #[default]
    Smooth,
    Rough,
}

impl std::str::FromStr for CurveDesign {
    type Err = FplmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "smooth" => Ok(Self::Smooth),
            "rough" => Ok(Self::Rough),
            other => Err(FplmError::InvalidArgument(format!("unknown curve design `{other}`"))),
        }
    }
}

/// Settings shared by every fit inside a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitSettings {
    pub mcmc: McmcConfig,
    pub priors: Priors,
    pub components: ComponentRule,
    pub fpcr_components: usize,
    pub distance_scale: DistanceScale,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            mcmc: McmcConfig::default(),
            priors: Priors::default(),
            components: ComponentRule::default(),
            fpcr_components: DEFAULT_FPCR_COMPONENTS,
            distance_scale: DistanceScale::default(),
        }
    }
}

/// Scalar responses with a curve predictor `X` and the curve `Z` entering
/// the nonparametric part of the partial linear model.
#[derive(Debug, Clone)]
pub struct Triplets {
    pub x: FunctionalSample,
    pub z: FunctionalSample,
    pub y: Vec<f64>,
}

impl Triplets {
    pub fn new(x: FunctionalSample, z: FunctionalSample, y: Vec<f64>) -> Result<Self> {
        if x.n_curves() != y.len() || z.n_curves() != y.len() {
            return Err(FplmError::DimensionMismatch(format!(
                "{} X curves, {} Z curves, {} responses",
                x.n_curves(),
                z.n_curves(),
                y.len()
            )));
        }
        Ok(Self { x, z, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select(idx),
            z: self.z.select(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
        }
    }
}

/// One model configuration inside a study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    pub model: ModelKind,
    /// `None` for FPCR, which has no semi-metric.
    pub semimetric: Option<SemiMetricSpec>,
    /// `None` for FPCR, which has no error density.
    pub mode: Option<BandwidthMode>,
}

impl Arm {
    fn labels(&self) -> (String, String) {
        (
            self.semimetric.map_or_else(|| "-".to_string(), |s| s.to_string()),
            self.mode.map_or_else(|| "-".to_string(), |m| m.to_string()),
        )
    }
}

/// Every combination of the listed models, semi-metrics and modes; FPCR
/// appears once.
pub fn arms(models: &[ModelKind], semimetrics: &[SemiMetricSpec], modes: &[BandwidthMode]) -> Vec<Arm> {
    let mut out = Vec::new();
    for &model in models {
        if model == ModelKind::Fpcr {
            out.push(Arm {
                model,
                semimetric: None,
                mode: None,
            });
            continue;
        }
        for &s in semimetrics {
            for &m in modes {
                out.push(Arm {
                    model,
                    semimetric: Some(s),
                    mode: Some(m),
                });
            }
        }
    }
    out
}

/// In-sample and out-of-sample predictions of one fitted arm.
#[derive(Debug, Clone)]
pub struct ArmOutcome {
    pub fitted: Vec<f64>,
    pub predicted: Vec<f64>,
    pub density: Option<KernelErrorDensity>,
    pub h_hat: Option<f64>,
}

/// Fit one arm on `train` and predict `test`.
///
/// Kernel models estimate `h` and the error bandwidth by MCMC; the final
/// predictor uses the posterior mean bandwidth (and, for FPLM, the ergodic
/// mean of `β̂`), and the error density uses the residuals of that
/// predictor with the posterior mean error bandwidth.
pub fn fit_arm(arm: &Arm, train: &Triplets, test: &Triplets, settings: &FitSettings, stream: u64) -> Result<ArmOutcome> {
    let cfg = McmcConfig {
        stream,
        bandwidth_mode: arm.mode.unwrap_or_default(),
        ..settings.mcmc
    };
    match (arm.model, arm.semimetric) {
        (ModelKind::Fpcr, _) => {
            let fit = fit_fpcr(&train.x, &train.y, settings.fpcr_components)?;
            let predicted = fit.predict(&test.x)?;
            Ok(ArmOutcome {
                fitted: fit.fitted,
                predicted,
                density: None,
                h_hat: None,
            })
        }
        (ModelKind::Fplm, Some(spec)) => {
            let data = FplmData::with_scale(train.x.clone(), &train.z, train.y.clone(), spec, settings.distance_scale)?;
            let model = FplmModel::with_rule(&data, settings.components)?;
            let chain = run_sampler(&model, &cfg, &settings.priors)?;
            let beta = chain
                .beta_mean
                .clone()
                .ok_or_else(|| FplmError::Sampler("partial linear chain without a coefficient mean".into()))?;
            let fit = data.fit_with_beta(chain.h_hat(), beta, model.n_pc_beta)?;
            let predicted = fit.predict(data.metric(), &test.x, &test.z)?;
            let density = KernelErrorDensity::new(fit.residuals.clone(), chain.error_bandwidth_hat())?;
            Ok(ArmOutcome {
                fitted: fit.fitted,
                predicted,
                density: Some(density),
                h_hat: Some(chain.h_hat()),
            })
        }
        (ModelKind::Fnp, Some(spec)) => {
            let data = FnpData::with_scale(&train.x, train.y.clone(), spec, settings.distance_scale)?;
            let chain = run_sampler(&data, &cfg, &settings.priors)?;
            let fit = data.fit(chain.h_hat())?;
            let predicted = fit.predict(data.metric(), &test.x)?;
            let density = KernelErrorDensity::new(fit.residuals.clone(), chain.error_bandwidth_hat())?;
            Ok(ArmOutcome {
                fitted: fit.fitted,
                predicted,
                density: Some(density),
                h_hat: Some(chain.h_hat()),
            })
        }
        (model, None) => Err(FplmError::InvalidArgument(format!("{model} needs a semi-metric"))),
    }
}

/// One metric value from one replication, in plot-ready long format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub model: String,
    pub semimetric: String,
    pub density: String,
    pub mode: String,
    pub metric: String,
    pub value: f64,
    pub replication: usize,
}

/// Average of one metric over the successful replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub model: String,
    pub semimetric: String,
    pub density: String,
    pub mode: String,
    pub metric: String,
    pub mean: f64,
    pub replications: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyFailure {
    pub replication: usize,
    pub model: String,
    pub semimetric: String,
    pub density: String,
    pub mode: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub replications: usize,
    pub summary: Vec<MetricSummary>,
    pub failures: Vec<StudyFailure>,
    pub records: Vec<MetricRecord>,
}

impl MetricReport {
    fn from_records(replications: usize, records: Vec<MetricRecord>, failures: Vec<StudyFailure>) -> Self {
        let mut index: HashMap<(String, String, String, String, String), usize> = HashMap::new();
        let mut sums: Vec<(MetricSummary, f64)> = Vec::new();
        for r in &records {
            let key = (
                r.model.clone(),
                r.semimetric.clone(),
                r.density.clone(),
                r.mode.clone(),
                r.metric.clone(),
            );
            let slot = *index.entry(key).or_insert_with(|| {
                sums.push((
                    MetricSummary {
                        model: r.model.clone(),
                        semimetric: r.semimetric.clone(),
                        density: r.density.clone(),
                        mode: r.mode.clone(),
                        metric: averaged_name(&r.metric),
                        mean: 0.0,
                        replications: 0,
                    },
                    0.0,
                ));
                sums.len() - 1
            });
            sums[slot].1 += r.value;
            sums[slot].0.replications += 1;
        }
        let summary = sums
            .into_iter()
            .map(|(mut s, total)| {
                s.mean = total / s.replications as f64;
                s
            })
            .collect();
        Self {
            replications,
            summary,
            failures,
            records,
        }
    }

    /// Averaged metric (e.g. `AMSE`, `RMSPE`) for one arm; `density` is
    /// `-` for bootstrap reports.
    pub fn value(&self, model: ModelKind, semimetric: &str, density: &str, mode: &str, metric: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| {
                s.model == model.name()
                    && s.semimetric == semimetric
                    && s.density == density
                    && s.mode == mode
                    && s.metric == metric
            })
            .map(|s| s.mean)
    }

    /// Summary table: one row per arm, density and metric.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for s in &self.summary {
            w.serialize(s)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Long-format per-replication values.
    pub fn write_records_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["model", "semimetric", "density", "metric", "value", "replication", "mode"])?;
        for r in &self.records {
            w.write_record([
                r.model.as_str(),
                r.semimetric.as_str(),
                r.density.as_str(),
                r.metric.as_str(),
                &format!("{:e}", r.value),
                &r.replication.to_string(),
                r.mode.as_str(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<()> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn read_summary_csv<R: std::io::Read>(reader: R) -> Result<Vec<MetricSummary>> {
        let mut r = csv::Reader::from_reader(reader);
        r.deserialize().map(|row| row.map_err(FplmError::from)).collect()
    }
}

fn averaged_name(metric: &str) -> String {
    match metric {
        "mse" => "AMSE".into(),
        "mspe" => "AMSPE".into(),
        "mise" => "AMISE".into(),
        "kl" => "AKL".into(),
        "rmse" => "RMSE".into(),
        "rmspe" => "RMSPE".into(),
        "h" => "h".into(),
        other => other.to_ascii_uppercase(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub n: usize,
    /// Holdout curves per replication; `None` uses `n`.
    pub holdout: Option<usize>,
    pub replications: usize,
    pub seed: u64,
    pub design: CurveDesign,
    pub densities: Vec<ErrorDensityKind>,
    pub semimetrics: Vec<SemiMetricSpec>,
    pub models: Vec<ModelKind>,
    pub modes: Vec<BandwidthMode>,
    pub fit: FitSettings,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n: 100,
            holdout: None,
            replications: 100,
            seed: 1,
            design: CurveDesign::Smooth,
            densities: ErrorDensityKind::ALL.to_vec(),
            semimetrics: vec![SemiMetricSpec::derivative(2)],
            models: vec![ModelKind::Fplm, ModelKind::Fnp],
            modes: vec![BandwidthMode::Global],
            fit: FitSettings::default(),
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(FplmError::InvalidArgument("at least one replication is required".into()));
        }
        if self.n < 3 || self.holdout == Some(0) {
            return Err(FplmError::InvalidArgument("need n ≥ 3 and a nonempty holdout".into()));
        }
        if self.densities.is_empty() || self.models.is_empty() || self.modes.is_empty() {
            return Err(FplmError::InvalidArgument("densities, models and modes must be nonempty".into()));
        }
        if self.models.iter().any(|m| *m != ModelKind::Fpcr) && self.semimetrics.is_empty() {
            return Err(FplmError::InvalidArgument("kernel models need at least one semi-metric".into()));
        }
        self.fit.mcmc.validate()
    }
}

/// RNG for one replication; `tag` 0 drives the curves and `1 + d` the errors
/// under density `d`, so every density sees the same curves.
fn replication_rng(seed: u64, replication: usize, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((replication as u64) << 8) | tag);
    rng
}

/// Simulate, fit every arm and score it, `replications` times per density.
///
/// Replications run in parallel; records are gathered in (replication,
/// density, arm) order, so reports do not depend on scheduling.
pub fn run_replication_study(config: &StudyConfig) -> Result<MetricReport> {
    config.validate()?;
    let n = config.n;
    let eta = config.holdout.unwrap_or(n);
    let noise = match config.design {
        CurveDesign::Smooth => 0.0,
        CurveDesign::Rough => ROUGH_NOISE,
    };
    let arms = arms(&config.models, &config.semimetrics, &config.modes);
    let tasks: Vec<(usize, usize)> = (0..config.replications)
        .flat_map(|r| (0..config.densities.len()).map(move |d| (r, d)))
        .collect();
    let outputs = par::map_slice(&tasks, |&(r, d)| {
        let kind = config.densities[d];
        let mut records = Vec::new();
        let mut failures = Vec::new();
        let draw = simulate_with_noise(n + eta, noise, &mut replication_rng(config.seed, r, 0));
        let draw = match draw {
            Ok(v) => v,
            Err(e) => {
                failures.push(StudyFailure {
                    replication: r,
                    model: "-".into(),
                    semimetric: "-".into(),
                    density: kind.name().into(),
                    mode: "-".into(),
                    message: e.to_string(),
                });
                return (records, failures);
            }
        };
        let errors = draw_errors_rng(kind, n, &mut replication_rng(config.seed, r, 1 + d as u64));
        let train_idx: Vec<usize> = (0..n).collect();
        let test_idx: Vec<usize> = (n..n + eta).collect();
        let g_train: Vec<f64> = train_idx.iter().map(|&i| draw.g[i]).collect();
        let g_test: Vec<f64> = test_idx.iter().map(|&i| draw.g[i]).collect();
        let y_train: Vec<f64> = g_train.iter().zip(&errors).map(|(g, e)| g + e).collect();
        let train = Triplets {
            x: draw.x.select(&train_idx),
            z: draw.z.select(&train_idx),
            y: y_train,
        };
        let test = Triplets {
            x: draw.x.select(&test_idx),
            z: draw.z.select(&test_idx),
            y: g_test.clone(),
        };
        for (a, arm) in arms.iter().enumerate() {
            let (semimetric, mode) = arm.labels();
            let stream = ((((r * config.densities.len()) + d) * arms.len() + a) as u64) << 1;
            let scored = fit_arm(arm, &train, &test, &config.fit, stream).and_then(|out| {
                let mut vals = vec![
                    ("mse", mean_squared_error(&g_train, &out.fitted)?),
                    ("mspe", mean_squared_error(&g_test, &out.predicted)?),
                ];
                if let Some(dens) = &out.density {
                    let (mise, kl) = mise_kl(|e| centered_true_density(kind, e), |e| dens.density_at(e));
                    vals.push(("mise", mise));
                    vals.push(("kl", kl));
                }
                if let Some(h) = out.h_hat {
                    vals.push(("h", h));
                }
                Ok(vals)
            });
            match scored {
                Ok(vals) => records.extend(vals.into_iter().map(|(metric, value)| MetricRecord {
                    model: arm.model.name().into(),
                    semimetric: semimetric.clone(),
                    density: kind.name().into(),
                    mode: mode.clone(),
                    metric: metric.into(),
                    value,
                    replication: r,
                })),
                Err(e) => failures.push(StudyFailure {
                    replication: r,
                    model: arm.model.name().into(),
                    semimetric,
                    density: kind.name().into(),
                    mode,
                    message: e.to_string(),
                }),
            }
        }
        (records, failures)
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in outputs {
        records.extend(r);
        failures.extend(f);
    }
    Ok(MetricReport::from_records(config.replications, records, failures))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub resamples: usize,
    /// Leading units of each resample used for training; the rest are held out.
    pub n_train: usize,
    pub seed: u64,
    pub semimetrics: Vec<SemiMetricSpec>,
    pub models: Vec<ModelKind>,
    pub mode: BandwidthMode,
    pub fit: FitSettings,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 100,
            n_train: 160,
            seed: 1,
            semimetrics: vec![SemiMetricSpec::derivative(2)],
            models: vec![ModelKind::Fplm, ModelKind::Fnp, ModelKind::Fpcr],
            mode: BandwidthMode::Global,
            fit: FitSettings::default(),
        }
    }
}

/// Resample all units with replacement, train on the first `n_train`, test
/// on the rest, and average RMSE and RMSPE over the resamples.
pub fn bootstrap_study(data: &Triplets, config: &BootstrapConfig) -> Result<MetricReport> {
    let n = data.len();
    if n < 2 || config.n_train == 0 || config.n_train >= n {
        return Err(FplmError::InvalidArgument(format!(
            "bootstrap needs 0 < n_train < n, got n_train = {} with n = {n}",
            config.n_train
        )));
    }
    if config.resamples == 0 {
        return Err(FplmError::InvalidArgument("at least one resample is required".into()));
    }
    config.fit.mcmc.validate()?;
    let arms = arms(&config.models, &config.semimetrics, &[config.mode]);
    let outputs = par::map_range(config.resamples, |r| {
        let mut rng = replication_rng(config.seed, r, 0);
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let train = data.select(&idx[..config.n_train]);
        let test = data.select(&idx[config.n_train..]);
        let mut records = Vec::new();
        let mut failures = Vec::new();
        for (a, arm) in arms.iter().enumerate() {
            let (semimetric, mode) = arm.labels();
            let stream = ((r * arms.len() + a) as u64) << 1;
            let scored = fit_arm(arm, &train, &test, &config.fit, stream).and_then(|out| {
                let rmse = mean_squared_error(&train.y, &out.fitted)?.sqrt();
                let rmspe = mean_squared_error(&test.y, &out.predicted)?.sqrt();
                Ok([("rmse", rmse), ("rmspe", rmspe)])
            });
            match scored {
                Ok(vals) => records.extend(vals.into_iter().map(|(metric, value)| MetricRecord {
                    model: arm.model.name().into(),
                    semimetric: semimetric.clone(),
                    density: "-".into(),
                    mode: mode.clone(),
                    metric: metric.into(),
                    value,
                    replication: r,
                })),
                Err(e) => failures.push(StudyFailure {
                    replication: r,
                    model: arm.model.name().into(),
                    semimetric,
                    density: "-".into(),
                    mode,
                    message: e.to_string(),
                }),
            }
        }
        (records, failures)
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in outputs {
        records.extend(r);
        failures.extend(f);
    }
    Ok(MetricReport::from_records(config.resamples, records, failures))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> FitSettings {
        FitSettings {
            mcmc: McmcConfig {
                burn_in: 50,
                iterations: 150,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    fn small_study() -> StudyConfig {
        StudyConfig {
            n: 30,
            holdout: Some(10),
            replications: 1,
            seed: 11,
            densities: vec![ErrorDensityKind::T5],
            models: vec![ModelKind::Fplm, ModelKind::Fnp, ModelKind::Fpcr],
            fit: quick(),
            ..Default::default()
        }
    }

    #[test]
    fn arms_enumeration() {
        let a = arms(
            &[ModelKind::Fplm, ModelKind::Fpcr],
            &[SemiMetricSpec::derivative(1), SemiMetricSpec::derivative(2)],
            &[BandwidthMode::Global, BandwidthMode::Localized],
        );
        assert_eq!(a.len(), 5);
        assert_eq!(a[4].model, ModelKind::Fpcr);
        assert!(a[4].semimetric.is_none());
    }

    #[test]
    fn replication_study_is_deterministic() {
        let cfg = small_study();
        let a = run_replication_study(&cfg).unwrap();
        let b = run_replication_study(&cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.failures.is_empty(), "{:?}", a.failures);
        assert!(a.records.iter().all(|r| r.value >= 0.0 && r.value.is_finite()));
        assert!(a.value(ModelKind::Fplm, "deriv:2", "t5", "global", "AMISE").is_some());
        assert!(a.value(ModelKind::Fpcr, "-", "t5", "-", "AMSE").is_some());
        assert!(a.value(ModelKind::Fpcr, "-", "t5", "-", "AMISE").is_none());
        let mut out = Vec::new();
        a.write_summary_csv(&mut out).unwrap();
        let back = MetricReport::read_summary_csv(out.as_slice()).unwrap();
        assert_eq!(back.len(), a.summary.len());
        for (x, y) in back.iter().zip(&a.summary) {
            assert_eq!(x.metric, y.metric);
            assert!((x.mean - y.mean).abs() <= 1e-12 * y.mean.abs());
        }
    }

    #[test]
    fn summary_averages_records() {
        let rec = |rep, value| MetricRecord {
            model: "FNP".into(),
            semimetric: "deriv:2".into(),
            density: "t5".into(),
            mode: "global".into(),
            metric: "mse".into(),
            value,
            replication: rep,
        };
        let r = MetricReport::from_records(2, vec![rec(0, 1.0), rec(1, 3.0)], Vec::new());
        assert_eq!(r.summary.len(), 1);
        assert_eq!(r.summary[0].metric, "AMSE");
        assert_eq!(r.summary[0].mean, 2.0);
        assert_eq!(r.summary[0].replications, 2);
    }

    #[test]
    fn bootstrap_is_deterministic_and_counts_rows() {
        let draw = crate::sim::simulate_smooth(40, 5).unwrap();
        let data = Triplets::new(draw.x.clone(), draw.z.clone(), draw.g.clone()).unwrap();
        let cfg = BootstrapConfig {
            resamples: 2,
            n_train: 30,
            seed: 3,
            models: vec![ModelKind::Fnp, ModelKind::Fpcr],
            fit: quick(),
            ..Default::default()
        };
        let a = bootstrap_study(&data, &cfg).unwrap();
        assert_eq!(a, bootstrap_study(&data, &cfg).unwrap());
        assert_eq!(a.records.len(), 2 * 2 * 2);
        let rmspe: Vec<f64> = a
            .records
            .iter()
            .filter(|r| r.model == "FPCR" && r.metric == "rmspe")
            .map(|r| r.value)
            .collect();
        let avg = a.value(ModelKind::Fpcr, "-", "-", "-", "RMSPE").unwrap();
        assert!((avg - (rmspe[0] + rmspe[1]) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn failures_are_counted_not_fatal() {
        let mut cfg = small_study();
        cfg.models = vec![ModelKind::Fpcr];
        cfg.fit.fpcr_components = 500;
        let r = run_replication_study(&cfg).unwrap();
        assert_eq!(r.failures.len(), 1);
        assert!(r.records.is_empty());
    }
}
