//! Run configuration: a TOML file overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

use fplm::bayes::{BandwidthMode, InverseGammaPrior, McmcConfig, Priors};
use fplm::regress::ComponentRule;
use fplm::semimetric::SemiMetricSpec;
use fplm::sim::{CurveDesign, ErrorDensityKind, FitSettings, ModelKind};

use crate::error::CliError;

/// Directory searched for `tecator.csv` when no input is given.
pub const DATA_DIR_ENV: &str = "FPLM_DATA_DIR";
pub const DEFAULT_DATASET: &str = "tecator.csv";

/// Keys accepted in the config file; every key has a flag of the same name
/// and the flag wins.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub semimetric: Option<Vec<String>>,
    pub bandwidth_mode: Option<Vec<String>>,
    pub prior: Option<String>,
    pub iters: Option<usize>,
    pub burnin: Option<usize>,
    pub level: Option<f64>,
    pub model: Option<Vec<String>>,
    pub components: Option<String>,
    pub n_train: Option<usize>,
    pub fit: Option<PathBuf>,
    pub dgp: Option<String>,
    pub n: Option<usize>,
    pub replications: Option<usize>,
    pub density: Option<Vec<String>>,
    pub bootstrap: Option<usize>,
    pub tecator: Option<bool>,
}

#[derive(Debug, Default, Clone, Args)]
pub struct CommonArgs {
    /// TOML file with any of the flag names as keys (dashes as underscores).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset: plain `y,<t_0>,…` CSV or a Tecator file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Semi-metric, e.g. `deriv:2` or `fpca:3`; repeatable.
    #[arg(long)]
    pub semimetric: Vec<String>,
    /// `global` or `localized`; repeatable for `bench`.
    #[arg(long = "bandwidth-mode")]
    pub bandwidth_mode: Vec<String>,
    /// Inverse-gamma prior `shape,scale` on the squared bandwidths.
    #[arg(long)]
    pub prior: Option<String>,
    /// Retained MCMC iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    /// Prediction-interval level in (0, 1).
    #[arg(long)]
    pub level: Option<f64>,
    /// `fplm`, `fnp` or `fpcr`; repeatable for `bench`.
    #[arg(long)]
    pub model: Vec<String>,
    /// Components of the coefficient curve: a count, `var:<fraction>` or `cv`.
    #[arg(long)]
    pub components: Option<String>,
    /// Train on the first units only and predict the rest.
    #[arg(long = "n-train")]
    pub n_train: Option<usize>,
}

/// Extra flags of `simulate` and `bench`.
#[derive(Debug, Default, Clone, Args)]
pub struct StudyArgs {
    /// `smooth` or `rough` curves.
    #[arg(long)]
    pub dgp: Option<String>,
    /// Training curves per replication.
    #[arg(long)]
    pub n: Option<usize>,
    /// Replications.
    #[arg(long = "B", alias = "replications")]
    pub replications: Option<usize>,
    /// `t5`, `skewunimodal` or `skewbimodal`; repeatable.
    #[arg(long)]
    pub density: Vec<String>,
}

fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

fn pick_list(flag: Vec<String>, file: Option<Vec<String>>) -> Vec<String> {
    if flag.is_empty() {
        file.unwrap_or_default()
    } else {
        flag
    }
}

fn usage<E: std::fmt::Display>(what: &str) -> impl Fn(E) -> CliError + '_ {
    move |e| CliError::Usage(format!("{what}: {e}"))
}

pub fn read_file_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Usage(format!("config file {}: {e}", path.display())))
}

pub fn parse_prior(s: &str) -> Result<InverseGammaPrior, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || CliError::Usage(format!("--prior expects `shape,scale`, got {s:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: f64 = parts[0].parse().map_err(|_| bad())?;
    let b: f64 = parts[1].parse().map_err(|_| bad())?;
    InverseGammaPrior::new(a, b).map_err(usage("--prior"))
}

/// Fully resolved settings shared by the commands.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub semimetrics: Vec<SemiMetricSpec>,
    pub modes: Vec<BandwidthMode>,
    pub models: Vec<ModelKind>,
    pub level: Option<f64>,
    pub n_train: Option<usize>,
    pub fit_path: Option<PathBuf>,
    pub settings: FitSettings,
    pub design: CurveDesign,
    pub n: usize,
    pub replications: usize,
    pub densities: Vec<ErrorDensityKind>,
    pub bootstrap: Option<usize>,
    pub tecator: bool,
}

impl Resolved {
    pub fn from_args(common: CommonArgs, study: StudyArgs, fit_flag: Option<PathBuf>) -> Result<Self, CliError> {
        let file = read_file_config(common.config.as_deref())?;
        let semimetrics = pick_list(common.semimetric, file.semimetric)
            .iter()
            .map(|s| s.parse::<SemiMetricSpec>().map_err(usage("--semimetric")))
            .collect::<Result<Vec<_>, _>>()?;
        let modes = pick_list(common.bandwidth_mode, file.bandwidth_mode)
            .iter()
            .map(|s| s.parse::<BandwidthMode>().map_err(usage("--bandwidth-mode")))
            .collect::<Result<Vec<_>, _>>()?;
        let models = pick_list(common.model, file.model)
            .iter()
            .map(|s| s.parse::<ModelKind>().map_err(usage("--model")))
            .collect::<Result<Vec<_>, _>>()?;
        let densities = pick_list(study.density, file.density)
            .iter()
            .map(|s| s.parse::<ErrorDensityKind>().map_err(usage("--density")))
            .collect::<Result<Vec<_>, _>>()?;
        let prior = match pick(common.prior, file.prior) {
            Some(s) => parse_prior(&s)?,
            None => InverseGammaPrior::default(),
        };
        let components = match pick(common.components, file.components) {
            Some(s) => s.parse::<ComponentRule>().map_err(usage("--components"))?,
            None => ComponentRule::default(),
        };
        let defaults = McmcConfig::default();
        let seed = pick(common.seed, file.seed);
        let mcmc = McmcConfig {
            iterations: pick(common.iters, file.iters).unwrap_or(defaults.iterations),
            burn_in: pick(common.burnin, file.burnin).unwrap_or(defaults.burn_in),
            seed: seed.unwrap_or(defaults.seed),
            ..defaults
        };
        mcmc.validate().map_err(usage("MCMC settings"))?;
        let level = pick(common.level, file.level);
        if let Some(l) = level {
            if !(l > 0.0 && l < 1.0) {
                return Err(CliError::Usage(format!("--level must lie in (0, 1), got {l}")));
            }
        }
        let design = match pick(study.dgp, file.dgp) {
            Some(s) => s.parse::<CurveDesign>().map_err(usage("--dgp"))?,
            None => CurveDesign::Smooth,
        };
        let replications = pick(study.replications, file.replications).unwrap_or(20);
        if replications == 0 {
            return Err(CliError::Usage("--B must be at least 1".into()));
        }
        let n = pick(study.n, file.n).unwrap_or(100);
        if n < 3 {
            return Err(CliError::Usage("--n must be at least 3".into()));
        }
        Ok(Self {
            input: pick(common.input, file.input),
            out: pick(common.out, file.out).unwrap_or_else(|| PathBuf::from("out")),
            seed,
            semimetrics,
            modes,
            models,
            level,
            n_train: pick(common.n_train, file.n_train),
            fit_path: pick(fit_flag, file.fit),
            settings: FitSettings {
                mcmc,
                priors: Priors::both(prior),
                components,
                ..FitSettings::default()
            },
            design,
            n,
            replications,
            densities,
            bootstrap: file.bootstrap,
            tecator: file.tecator.unwrap_or(false),
        })
    }

    pub fn require_seed(&self, command: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("`{command}` needs --seed (or `seed` in the config file)")))
    }

    /// The input path, falling back to `$FPLM_DATA_DIR/tecator.csv` and then
    /// `data/tecator.csv`; the file must exist.
    pub fn input_path(&self) -> Result<PathBuf, CliError> {
        let path = match &self.input {
            Some(p) => p.clone(),
            None => std::env::var_os(DATA_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("data"))
                .join(DEFAULT_DATASET),
        };
        if !path.is_file() {
            return Err(CliError::Usage(format!("input file {} does not exist", path.display())));
        }
        Ok(path)
    }

    pub fn single_semimetric(&self, default: SemiMetricSpec) -> Result<SemiMetricSpec, CliError> {
        match self.semimetrics.as_slice() {
            [] => Ok(default),
            [s] => Ok(*s),
            _ => Err(CliError::Usage("this command takes a single --semimetric".into())),
        }
    }

    pub fn single_mode(&self) -> Result<BandwidthMode, CliError> {
        match self.modes.as_slice() {
            [] => Ok(BandwidthMode::Global),
            [m] => Ok(*m),
            _ => Err(CliError::Usage("this command takes a single --bandwidth-mode".into())),
        }
    }

    pub fn single_model(&self) -> Result<ModelKind, CliError> {
        match self.models.as_slice() {
            [] => Ok(ModelKind::Fplm),
            [ModelKind::Fpcr] => Err(CliError::Usage("FPCR has no bandwidth to estimate; use fplm or fnp".into())),
            [m] => Ok(*m),
            _ => Err(CliError::Usage("this command takes a single --model".into())),
        }
    }

    pub fn mcmc(&self, mode: BandwidthMode) -> McmcConfig {
        McmcConfig {
            bandwidth_mode: mode,
            ..self.settings.mcmc
        }
    }
}
