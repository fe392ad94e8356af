//! TOML run configuration. Every section is optional; unknown keys are
//! rejected. Relative paths are resolved against the config file's directory.

use std::path::{Path, PathBuf};

use fnar::forecastlab::{BvarConfig, DmConfig, LassoConfig, ModelKind};
use fnar::model::{DofDivisor, EffectsMode, Estimator, FitOptions};
use fnar::netweights::FillPolicy;
use fnar::Exec;
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub exec: Exec,
    pub data: DataConfig,
    pub ingest: IngestConfig,
    pub factors: FactorsConfig,
    pub estimate: EstimateConfig,
    pub bootstrap: BootstrapSection,
    pub forecast: ForecastSection,
    pub simulate: SimulateSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Flow records, `period,layer,reporter,partner,value`.
    pub flows: Option<PathBuf>,
    /// Panel bundle directory written by `ingest`.
    pub panel: Option<PathBuf>,
    /// Endogenous series, `period,node,value`.
    pub series: Option<PathBuf>,
    /// Label orders; inferred (sorted) from the flows when absent.
    pub nodes: Option<Vec<String>>,
    pub layers: Option<Vec<String>>,
    pub periods: Option<Vec<String>>,
    pub frequency: Frequency,
}

/// How series periods find their panel period.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frequency {
    /// Series and panel share period labels.
    #[default]
    Identity,
    /// Sub-annual series on an annual panel.
    Annual,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub fill: FillPolicy,
    pub mirror: Vec<MirrorRule>,
    pub smoothing: Vec<SmoothingRule>,
}

/// Non-reporting nodes of one layer: their own records are replaced by
/// counterparty reports and flows among them are set to zero.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorRule {
    pub layer: String,
    pub non_reporters: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothingRule {
    pub layer: String,
    pub window: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum RankChoice {
    Fixed(usize),
    Auto(AutoRank),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoRank {
    Auto,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorsConfig {
    pub r: RankChoice,
    pub r_max: usize,
    pub top_links: usize,
}

impl Default for FactorsConfig {
    fn default() -> Self {
        Self {
            r: RankChoice::Auto(AutoRank::Auto),
            r_max: 8,
            top_links: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorName {
    #[default]
    Ols,
    Sur,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    pub estimator: EstimatorName,
    /// Covariance refreshes for SUR; 1 is the one-step estimator.
    pub sur_max_iter: usize,
    pub heterogeneous: bool,
    pub dof: DofDivisor,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        Self {
            estimator: EstimatorName::Ols,
            sur_max_iter: 1,
            heterogeneous: false,
            dof: DofDivisor::default(),
        }
    }
}

impl EstimateConfig {
    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            estimator: match self.estimator {
                EstimatorName::Ols => Estimator::Ols,
                EstimatorName::Sur => Estimator::Sur {
                    max_iter: self.sur_max_iter,
                },
            },
            mode: if self.heterogeneous {
                EffectsMode::Heterogeneous
            } else {
                EffectsMode::Homogeneous
            },
            dof: self.dof,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapSection {
    pub iterations: usize,
    pub level: f64,
    pub max_failure_rate: f64,
    /// Also write every draw to `draws.csv`.
    pub write_draws: bool,
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            iterations: 1000,
            level: 0.95,
            max_failure_rate: 0.01,
            write_draws: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSection {
    /// Number of trailing one-step forecasts; ignored when both training
    /// ends are given.
    pub windows: usize,
    pub first_train_end: Option<usize>,
    pub last_train_end: Option<usize>,
    pub models: Vec<ModelKind>,
    pub pc_components: usize,
    pub lasso: LassoConfig,
    pub bvar: BvarConfig,
    pub dm: DmConfig,
}

impl Default for ForecastSection {
    fn default() -> Self {
        Self {
            windows: 60,
            first_train_end: None,
            last_train_end: None,
            models: ModelKind::ALL.to_vec(),
            pc_components: 4,
            lasso: LassoConfig::default(),
            bvar: BvarConfig::default(),
            dm: DmConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// Loading and factor errors over an `m x T` grid.
    #[default]
    FactorRates,
    /// FNAR coefficient errors along an `(m, T)` path.
    ThetaRates,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub experiment: Experiment,
    pub n: usize,
    pub r: usize,
    pub noise_sd: f64,
    pub layer_corr: f64,
    pub shock_sd: f64,
    pub shock_corr: f64,
    pub ms: Vec<usize>,
    pub ts: Vec<usize>,
    pub path: Vec<(usize, usize)>,
    pub reps: usize,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            experiment: Experiment::FactorRates,
            n: 5,
            r: 2,
            noise_sd: 0.01,
            layer_corr: 0.0,
            shock_sd: 1.0,
            shock_corr: 0.3,
            ms: vec![20, 40, 80],
            ts: vec![100, 400, 1600],
            path: vec![(20, 200), (40, 800), (80, 3200)],
            reps: 50,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data.flows, &mut cfg.data.panel, &mut cfg.data.series]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that need no input data.
    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.factors.r == RankChoice::Fixed(0) {
            return bad("factors.r must be at least 1".into());
        }
        if self.factors.r_max == 0 {
            return bad("factors.r_max must be at least 1".into());
        }
        if self.estimate.sur_max_iter == 0 {
            return bad("estimate.sur_max_iter must be at least 1".into());
        }
        if self.bootstrap.iterations == 0 {
            return bad("bootstrap.iterations must be at least 1".into());
        }
        if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return bad(format!("bootstrap.level {} outside (0, 1)", self.bootstrap.level));
        }
        if self.ingest.smoothing.iter().any(|s| s.window == 0) {
            return bad("smoothing windows must be at least 1".into());
        }
        if self.forecast.first_train_end.is_some() != self.forecast.last_train_end.is_some() {
            return bad("give both forecast.first_train_end and forecast.last_train_end, or neither".into());
        }
        if self.simulate.reps == 0 {
            return bad("simulate.reps must be at least 1".into());
        }
        Ok(())
    }
}

pub fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> CliResult<&'a Path> {
    path.as_deref()
        .ok_or_else(|| CliError::Config(format!("data.{key} is required for this command")))
}
