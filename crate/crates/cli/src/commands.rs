use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use fplm::bayes::{
    chib_marginal_likelihood, diagnostics, run_sampler, select_semimetric, AcceptanceRates, BandwidthMode, FplmModel,
    MarginalLikelihood, McmcConfig, PosteriorSummary, Priors,
};
use fplm::dataset::{first_derivative, load_dataset, CurveDataset};
use fplm::density::{ErrorBandwidth, KernelErrorDensity};
use fplm::fda::{FunctionalSample, Grid};
use fplm::regress::{ComponentRule, DistanceScale, FnpData, FnpFit, FplmData, FplmFit};
use fplm::semimetric::SemiMetricSpec;
use fplm::sim::{
    bootstrap_study, draw_errors_rng, run_replication_study, simulate_with_noise, BootstrapConfig, CurveDesign,
    ErrorDensityKind, MetricReport, ModelKind, StudyConfig, ROUGH_NOISE,
};
use fplm::FplmError;

use crate::config::Resolved;
use crate::error::CliError;

const DEFAULT_LEVEL: f64 = 0.8;

fn create(out: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    std::fs::create_dir_all(out).map_err(CliError::io(format!("creating {}", out.display())))?;
    let path = out.join(name);
    let f = File::create(&path).map_err(CliError::io(format!("creating {}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(out, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(CliError::io(name))?;
    Ok(())
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub design: CurveDesign,
    pub n: usize,
    pub density: ErrorDensityKind,
    pub seed: u64,
    pub regression: Vec<f64>,
    pub errors: Vec<f64>,
}

pub fn simulate(r: &Resolved) -> Result<(), CliError> {
    let seed = r.seed.unwrap_or(1);
    let density = match r.densities.as_slice() {
        [] => ErrorDensityKind::T5,
        [d] => *d,
        _ => return Err(CliError::Usage("`simulate` takes a single --density".into())),
    };
    let noise = match r.design {
        CurveDesign::Smooth => 0.0,
        CurveDesign::Rough => ROUGH_NOISE,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = simulate_with_noise(r.n, noise, &mut rng)?;
    let errors = draw_errors_rng(density, r.n, &mut rng);
    let y = draw.responses(&errors)?;
    let data = CurveDataset::new(draw.x.clone(), y)?;
    data.write_csv(create(&r.out, "data.csv")?)?;
    write_json(
        &r.out,
        "summary.json",
        &SimulationSummary {
            design: r.design,
            n: r.n,
            density,
            seed,
            regression: draw.g,
            errors,
        },
    )?;
    info!("wrote {} simulated units to {}", r.n, r.out.display());
    Ok(())
}

/// Training sample stored with a fit, so `predict` needs nothing else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingData {
    pub grid: Vec<f64>,
    pub curves: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl TrainingData {
    fn from_dataset(d: &CurveDataset) -> Self {
        Self {
            grid: d.x.grid().points().to_vec(),
            curves: d.x.rows(),
            y: d.y.clone(),
        }
    }

    fn dataset(&self) -> Result<CurveDataset, CliError> {
        let grid = Grid::new(self.grid.clone())?;
        Ok(CurveDataset::new(FunctionalSample::from_rows(grid, &self.curves)?, self.y.clone())?)
    }
}

/// Contents of `summary.json` written by `fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitArtifact {
    pub model: ModelKind,
    pub semimetric: SemiMetricSpec,
    pub bandwidth_mode: BandwidthMode,
    pub priors: Priors,
    pub mcmc: McmcConfig,
    pub components: ComponentRule,
    pub distance_scale: DistanceScale,
    /// Posterior mean bandwidth, in units of the median training distance.
    pub h: f64,
    pub error_bandwidth: ErrorBandwidth,
    pub n_pc_beta: Option<usize>,
    pub acceptance: AcceptanceRates,
    pub posterior: Option<PosteriorSummary>,
    pub marginal_likelihood: Option<MarginalLikelihood>,
    pub n_train: usize,
    pub n_test: usize,
    /// In-sample RMSE of the fitted values (own weight included).
    pub rmse: f64,
    /// In-sample RMSE with each unit's own weight removed.
    pub rmse_loo: f64,
    pub rmspe: Option<f64>,
    pub level: f64,
    pub coverage: Option<f64>,
    pub beta_hat: Option<Vec<f64>>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub warnings: Vec<String>,
    pub training: TrainingData,
}

enum Fitted {
    Fplm { data: FplmData, fit: FplmFit },
    Fnp { data: FnpData, fit: FnpFit },
}

impl Fitted {
    fn fitted(&self) -> &[f64] {
        match self {
            Fitted::Fplm { fit, .. } => &fit.fitted,
            Fitted::Fnp { fit, .. } => &fit.fitted,
        }
    }

    fn residuals(&self) -> &[f64] {
        match self {
            Fitted::Fplm { fit, .. } => &fit.residuals,
            Fitted::Fnp { fit, .. } => &fit.residuals,
        }
    }

    fn predict(&self, x: &FunctionalSample) -> Result<Vec<f64>, CliError> {
        Ok(match self {
            Fitted::Fplm { data, fit } => fit.predict(data.metric(), x, &first_derivative(x)?)?,
            Fitted::Fnp { data, fit } => fit.predict(data.metric(), x)?,
        })
    }

    /// Refit from a stored artifact without sampling.
    fn rebuild(a: &FitArtifact) -> Result<Self, CliError> {
        let train = a.training.dataset()?;
        match a.model {
            ModelKind::Fplm => {
                let z = first_derivative(&train.x)?;
                let data = FplmData::with_scale(train.x, &z, train.y, a.semimetric, a.distance_scale)?;
                let beta = a
                    .beta_hat
                    .clone()
                    .ok_or_else(|| CliError::Usage("fit artifact lacks beta_hat".into()))?;
                let fit = data.fit_with_beta(a.h, beta, a.n_pc_beta.unwrap_or(0))?;
                Ok(Fitted::Fplm { data, fit })
            }
            ModelKind::Fnp => {
                let data = FnpData::with_scale(&train.x, train.y, a.semimetric, a.distance_scale)?;
                let fit = data.fit(a.h)?;
                Ok(Fitted::Fnp { data, fit })
            }
            ModelKind::Fpcr => Err(CliError::Usage("FPCR artifacts are not supported".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRow {
    pub unit: usize,
    pub y_hat: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub y: Option<f64>,
}

fn prediction_rows(
    y_hat: &[f64],
    y: Option<&[f64]>,
    density: &KernelErrorDensity,
    level: Option<f64>,
) -> Result<Vec<PredictionRow>, CliError> {
    y_hat
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let iv = level.map(|l| density.prediction_interval(p, l)).transpose()?;
            Ok(PredictionRow {
                unit: i,
                y_hat: p,
                lower: iv.map(|v| v.lower),
                upper: iv.map(|v| v.upper),
                y: y.map(|v| v[i]),
            })
        })
        .collect()
}

fn coverage(rows: &[PredictionRow]) -> Option<f64> {
    let hits: Vec<bool> = rows
        .iter()
        .filter_map(|r| Some(r.y? >= r.lower? && r.y? <= r.upper?))
        .collect();
    (!hits.is_empty()).then(|| hits.iter().filter(|h| **h).count() as f64 / hits.len() as f64)
}

fn write_predictions(out: &Path, rows: &[PredictionRow]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(out, "predictions.csv")?);
    for r in rows {
        w.serialize(r).map_err(FplmError::from)?;
    }
    w.flush().map_err(CliError::io("predictions.csv"))?;
    Ok(())
}

pub fn fit(r: &Resolved) -> Result<(), CliError> {
    r.require_seed("fit")?;
    let path = r.input_path()?;
    let model = r.single_model()?;
    let spec = r.single_semimetric(SemiMetricSpec::derivative(2))?;
    let mode = r.single_mode()?;
    let level = r.level.unwrap_or(DEFAULT_LEVEL);
    let data = load_dataset(&path)?;
    let (train, test) = match r.n_train {
        Some(k) => {
            let (a, b) = data.split(k).map_err(|e| CliError::Usage(e.to_string()))?;
            (a, Some(b))
        }
        None => (data, None),
    };
    let cfg = r.mcmc(mode);
    let priors = r.settings.priors;
    let mut warnings = Vec::new();
    info!("fitting {model} with {spec} on {} units", train.len());

    let (fitted, chain, marginal, n_pc) = match model {
        ModelKind::Fplm => {
            let z = first_derivative(&train.x)?;
            let data = FplmData::with_scale(train.x.clone(), &z, train.y.clone(), spec, r.settings.distance_scale)?;
            let fm = FplmModel::with_rule(&data, r.settings.components)?;
            let chain = run_sampler(&fm, &cfg, &priors)?;
            let marginal = chib_marginal_likelihood(&chain, &fm, &priors)
                .map_err(|e| warnings.push(format!("marginal likelihood: {e}")))
                .ok();
            let beta = chain.beta_mean.clone().unwrap_or_default();
            let n_pc = fm.n_pc_beta;
            let fit = data.fit_with_beta(chain.h_hat(), beta, n_pc)?;
            warnings.extend(fit.warnings.iter().cloned());
            (Fitted::Fplm { data, fit }, chain, marginal, Some(n_pc))
        }
        _ => {
            let data = FnpData::with_scale(&train.x, train.y.clone(), spec, r.settings.distance_scale)?;
            let chain = run_sampler(&data, &cfg, &priors)?;
            let marginal = chib_marginal_likelihood(&chain, &data, &priors)
                .map_err(|e| warnings.push(format!("marginal likelihood: {e}")))
                .ok();
            let fit = data.fit(chain.h_hat())?;
            (Fitted::Fnp { data, fit }, chain, marginal, None)
        }
    };
    let posterior = diagnostics(&chain)
        .map_err(|e| warnings.push(format!("diagnostics: {e}")))
        .ok();
    let density = KernelErrorDensity::new(fitted.residuals().to_vec(), chain.error_bandwidth_hat())?;

    chain.write_csv(create(&r.out, "chain.csv")?)?;
    density.write_curve_csv(create(&r.out, "density.csv")?)?;

    let (rmspe, cov) = match &test {
        Some(t) => {
            let y_hat = fitted.predict(&t.x)?;
            let rows = prediction_rows(&y_hat, Some(&t.y), &density, Some(level))?;
            write_predictions(&r.out, &rows)?;
            (Some(rmse(&t.y, &y_hat)), coverage(&rows))
        }
        None => (None, None),
    };
    let artifact = FitArtifact {
        model,
        semimetric: spec,
        bandwidth_mode: mode,
        priors,
        mcmc: cfg,
        components: r.settings.components,
        distance_scale: r.settings.distance_scale,
        h: chain.h_hat(),
        error_bandwidth: chain.error_bandwidth_hat(),
        n_pc_beta: n_pc,
        acceptance: chain.acceptance_rates(),
        posterior,
        marginal_likelihood: marginal,
        n_train: train.len(),
        n_test: test.as_ref().map_or(0, |t| t.len()),
        rmse: rmse(&train.y, fitted.fitted()),
        rmse_loo: rmse(fitted.residuals(), &vec![0.0; train.len()]),
        rmspe,
        level,
        coverage: cov,
        beta_hat: match &fitted {
            Fitted::Fplm { fit, .. } => Some(fit.beta_hat.clone()),
            Fitted::Fnp { .. } => None,
        },
        fitted: fitted.fitted().to_vec(),
        residuals: fitted.residuals().to_vec(),
        warnings,
        training: TrainingData::from_dataset(&train),
    };
    write_json(&r.out, "summary.json", &artifact)?;
    info!(
        "h = {:.4}, RMSE = {:.4}{}",
        artifact.h,
        artifact.rmse,
        rmspe.map_or(String::new(), |v| format!(", RMSPE = {v:.4}"))
    );
    Ok(())
}

pub fn read_artifact(path: &Path) -> Result<FitArtifact, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("fit artifact {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("fit artifact {}: {e}", path.display())))
}

pub fn predict(r: &Resolved) -> Result<(), CliError> {
    let fit_path: PathBuf = r
        .fit_path
        .clone()
        .ok_or_else(|| CliError::Usage("`predict` needs --fit <summary.json>".into()))?;
    let artifact = read_artifact(&fit_path)?;
    let path = r.input_path()?;
    let data = load_dataset(&path)?;
    if !data.x.grid().is_compatible(&Grid::new(artifact.training.grid.clone())?) {
        return Err(FplmError::DimensionMismatch(format!(
            "{} is not on the training grid of {}",
            path.display(),
            fit_path.display()
        ))
        .into());
    }
    let fitted = Fitted::rebuild(&artifact)?;
    let density = KernelErrorDensity::new(fitted.residuals().to_vec(), artifact.error_bandwidth)?;
    let y_hat = fitted.predict(&data.x)?;
    let rows = prediction_rows(&y_hat, Some(&data.y), &density, r.level)?;
    write_predictions(&r.out, &rows)?;
    if let Some(c) = coverage(&rows) {
        info!("empirical coverage {c:.3}");
    }
    Ok(())
}

pub fn select(r: &Resolved) -> Result<(), CliError> {
    r.require_seed("select-semimetric")?;
    let path = r.input_path()?;
    let model = r.single_model()?;
    let mode = r.single_mode()?;
    let candidates = if r.semimetrics.is_empty() {
        vec![
            SemiMetricSpec::derivative(1),
            SemiMetricSpec::derivative(2),
            SemiMetricSpec::fpca(3),
        ]
    } else {
        r.semimetrics.clone()
    };
    if candidates.len() < 2 {
        return Err(CliError::Usage("`select-semimetric` needs at least two --semimetric values".into()));
    }
    let mut data = load_dataset(&path)?;
    if let Some(k) = r.n_train {
        data = data.split(k).map_err(|e| CliError::Usage(e.to_string()))?.0;
    }
    let cfg = r.mcmc(mode);
    let priors = r.settings.priors;
    let scale = r.settings.distance_scale;
    let report = match model {
        ModelKind::Fplm => {
            let z = first_derivative(&data.x)?;
            let built: Vec<Result<FplmData, String>> = candidates
                .iter()
                .map(|s| FplmData::with_scale(data.x.clone(), &z, data.y.clone(), *s, scale).map_err(|e| e.to_string()))
                .collect();
            select_semimetric(
                &candidates,
                |s| {
                    let i = candidates.iter().position(|c| c == s).expect("candidate listed");
                    match &built[i] {
                        Ok(d) => FplmModel::with_rule(d, r.settings.components),
                        Err(m) => Err(FplmError::InvalidArgument(m.clone())),
                    }
                },
                &cfg,
                &priors,
            )?
        }
        _ => select_semimetric(
            &candidates,
            |s| FnpData::with_scale(&data.x, data.y.clone(), *s, scale),
            &cfg,
            &priors,
        )?,
    };
    report.write_csv(create(&r.out, "report.csv")?)?;
    write_json(&r.out, "summary.json", &report)?;
    if let Some(best) = report.best() {
        info!("best semi-metric: {}", best.spec);
    }
    for c in report.candidates.iter().filter(|c| c.error.is_some()) {
        log::warn!("{} failed: {}", c.spec, c.error.as_deref().unwrap_or(""));
    }
    Ok(())
}

fn write_report(out: &Path, report: &MetricReport) -> Result<(), CliError> {
    report.write_summary_csv(create(out, "report.csv")?)?;
    report.write_records_csv(create(out, "records.csv")?)?;
    write_json(out, "summary.json", report)?;
    if !report.failures.is_empty() {
        log::warn!("{} fits failed; see summary.json", report.failures.len());
    }
    Ok(())
}

pub fn bench(r: &Resolved, bootstrap: Option<usize>) -> Result<(), CliError> {
    let seed = r.require_seed("bench")?;
    let semimetrics = if r.semimetrics.is_empty() {
        vec![SemiMetricSpec::derivative(2)]
    } else {
        r.semimetrics.clone()
    };
    let report = if let Some(resamples) = bootstrap {
        if resamples == 0 {
            return Err(CliError::Usage("--bootstrap must be at least 1".into()));
        }
        let path = r.input_path()?;
        let data = load_dataset(&path)?.triplets()?;
        let n_train = r.n_train.unwrap_or(data.len() * 160 / 215);
        let models = if r.models.is_empty() {
            vec![ModelKind::Fplm, ModelKind::Fnp, ModelKind::Fpcr]
        } else {
            r.models.clone()
        };
        let cfg = BootstrapConfig {
            resamples,
            n_train,
            seed,
            semimetrics,
            models,
            mode: r.single_mode()?,
            fit: r.settings,
        };
        bootstrap_study(&data, &cfg)?
    } else {
        let cfg = StudyConfig {
            n: r.n,
            holdout: None,
            replications: r.replications,
            seed,
            design: r.design,
            densities: if r.densities.is_empty() {
                ErrorDensityKind::ALL.to_vec()
            } else {
                r.densities.clone()
            },
            semimetrics,
            models: if r.models.is_empty() {
                vec![ModelKind::Fplm, ModelKind::Fnp]
            } else {
                r.models.clone()
            },
            modes: if r.modes.is_empty() {
                vec![BandwidthMode::Global]
            } else {
                r.modes.clone()
            },
            fit: r.settings,
        };
        run_replication_study(&cfg)?
    };
    write_report(&r.out, &report)
}
