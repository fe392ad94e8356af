//! Residual bootstrap of the two-stage estimator.
//!
//! Each iteration `b`:
//! 1. resamples the idiosyncratic tensors `E_t` over time, with replacement;
//! 2. rebuilds `W^b_t = W_hat_t + E^b_t` on the common component;
//! 3. re-extracts factors and flips loading signs so `diag(U^b' U_hat) > 0`;
//! 4. draws `nu^b_t ~ N(0, Sigma_nu)`;
//! 5. simulates `y^b` from the fitted coefficients and the new factors,
//!    starting from the observed first row;
//! 6. refits the FNAR and records `theta^b`.
//!
//! Iteration `b` draws from its own ChaCha stream `(seed, b)`, so results are
//! independent of scheduling and identical under both execution policies.

use nalgebra::{Cholesky, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, EffectsMode, FitOptions, FnarFit, PanelSeries};
use crate::netfactors::{estimate_factors_with, FactorModel};
use crate::netweights::WeightPanel;
use crate::par::Exec;
use crate::tensor3::{Matrix, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub seed: u64,
    /// Coverage of the percentile intervals.
    pub level: f64,
    /// Largest tolerated share of failed iterations.
    pub max_failure_rate: f64,
    /// Panel period used for row `t` of `y`; identity when `None`.
    pub period_map: Option<Vec<usize>>,
    pub exec: Exec,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            seed: 0,
            level: 0.95,
            max_failure_rate: 0.01,
            period_map: None,
            exec: Exec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult {
    pub seed: u64,
    pub level: f64,
    /// Requested iterations.
    pub iterations: usize,
    /// Successful draws, one row per iteration in index order.
    pub draws: Matrix,
    pub column_names: Vec<String>,
    pub means: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub failed_iterations: Vec<usize>,
}

impl BootstrapResult {
    pub fn n_draws(&self) -> usize {
        self.draws.nrows()
    }

    /// Index of a named coefficient (`beta_1`, `rho_3`, ...).
    pub fn column(&self, name: &str) -> Option<usize> {
        self.column_names.iter().position(|c| c == name)
    }
}

/// Lower/upper order-statistic indices of a two-sided percentile interval.
pub fn percentile_indices(n: usize, level: f64) -> (usize, usize) {
    let tail = (1.0 - level) / 2.0;
    // the small offset keeps e.g. 1000 * 0.025 from rounding up to 26
    let idx = |q: f64| ((n as f64 * q - 1e-9).ceil() as usize).clamp(1, n) - 1;
    (idx(tail), idx(1.0 - tail))
}

/// Square root `L` with `L L' = sigma`: Cholesky, or a symmetric eigen root
/// with negative eigenvalues clamped when sigma is only semidefinite.
pub fn covariance_root(sigma: &Matrix) -> Matrix {
    if let Some(ch) = Cholesky::new(sigma.clone()) {
        return ch.l();
    }
    let eig = SymmetricEigen::new(sigma.clone());
    let mut v = eig.eigenvectors.clone();
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        v.column_mut(k).scale_mut(mu.max(0.0).sqrt());
    }
    v
}

fn period_index(config: &BootstrapConfig, t: usize) -> usize {
    config.period_map.as_ref().map_or(t, |m| m[t])
}

/// One bootstrap replication; returns the stacked coefficient vector.
#[allow(clippy::too_many_arguments)]
fn replicate(
    b: usize,
    config: &BootstrapConfig,
    common: &[Tensor3],
    residuals: &[Tensor3],
    y: &PanelSeries,
    model: &FactorModel,
    fit: &FnarFit,
    root: &Matrix,
) -> Result<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(b as u64);
    let t_panel = common.len();
    let resampled: Vec<Tensor3> = (0..t_panel)
        .map(|t| {
            let s = rng.random_range(0..t_panel);
            common[t].add(&residuals[s])
        })
        .collect::<Result<_>>()?;
    let (boot_model, _) = estimate_factors_with(&resampled, model.r(), Exec::Sequential)?;
    let boot_model = boot_model.aligned_to(model.loadings())?;
    let factors: Vec<Tensor3> = (0..y.n_periods())
        .map(|t| boot_model.factors()[period_index(config, t)].clone())
        .collect();

    let n = y.n_nodes();
    let mut values = Matrix::zeros(y.n_periods(), n);
    let mut state = y.row(0);
    values.row_mut(0).copy_from(&state.transpose());
    for t in 1..y.n_periods() {
        let z = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
        state = fit.coefficients.step(&state, &factors[t - 1])? + root * z;
        if state.iter().any(|v| !v.is_finite()) {
            return Err(Error::Unstable(format!("bootstrap path diverged at period {t}")));
        }
        values.row_mut(t).copy_from(&state.transpose());
    }
    let y_boot = PanelSeries::new(y.periods().to_vec(), y.nodes().to_vec(), values)?;
    let refit = model::fit(
        &y_boot,
        &factors,
        &FitOptions {
            estimator: fit.estimator,
            mode: fit.mode,
            dof: Default::default(),
        },
    )?;
    Ok(refit.theta)
}

/// Bootstraps a homogeneous fit obtained from `(panel, y, model)`.
pub fn run_bootstrap(
    panel: &WeightPanel,
    y: &PanelSeries,
    model: &FactorModel,
    fit: &FnarFit,
    config: &BootstrapConfig,
) -> Result<BootstrapResult> {
    if config.iterations == 0 {
        return Err(Error::InvalidArgument(
            "bootstrap needs at least one iteration".into(),
        ));
    }
    if !(config.level > 0.0 && config.level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "interval level {} outside (0, 1)",
            config.level
        )));
    }
    if fit.mode != EffectsMode::Homogeneous {
        return Err(Error::InvalidArgument(
            "bootstrap supports homogeneous fits only".into(),
        ));
    }
    if panel.n_periods() != model.n_periods() {
        return Err(Error::DimensionMismatch(format!(
            "panel of {} periods for a model of {}",
            panel.n_periods(),
            model.n_periods()
        )));
    }
    match &config.period_map {
        Some(map) if map.len() != y.n_periods() || map.iter().any(|&p| p >= panel.n_periods()) => {
            return Err(Error::DimensionMismatch(
                "period map does not match series and panel".into(),
            ));
        }
        None if y.n_periods() > panel.n_periods() => {
            return Err(Error::DimensionMismatch(format!(
                "series of {} periods with a panel of {} and no period map",
                y.n_periods(),
                panel.n_periods()
            )));
        }
        _ => {}
    }

    let common: Vec<Tensor3> = (0..model.n_periods()).map(|t| model.reconstruct(t)).collect();
    let residuals: Vec<Tensor3> = panel
        .tensors()
        .iter()
        .zip(&common)
        .map(|(w, c)| w.sub(c))
        .collect::<Result<_>>()?;
    let root = covariance_root(&fit.sigma_nu);

    let outcomes = config.exec.map(config.iterations, |b| {
        replicate(b, config, &common, &residuals, y, model, fit, &root)
    });
    let p = fit.theta.len();
    let mut rows = Vec::new();
    let mut failed = Vec::new();
    let mut last_error = None;
    for (b, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(theta) => rows.push(theta),
            Err(e) => {
                log::warn!("bootstrap iteration {b} failed: {e}");
                failed.push(b);
                last_error = Some(e);
            }
        }
    }
    if failed.len() as f64 > config.max_failure_rate * config.iterations as f64 || rows.is_empty() {
        return Err(Error::BootstrapFailures {
            failed: failed.len(),
            total: config.iterations,
            last: last_error.map(|e| e.to_string()).unwrap_or_default(),
        });
    }

    let draws = Matrix::from_fn(rows.len(), p, |b, j| rows[b][j]);
    let means = DVector::from_fn(p, |j, _| draws.column(j).mean());
    let (lo, hi) = percentile_indices(rows.len(), config.level);
    let mut lower = DVector::zeros(p);
    let mut upper = DVector::zeros(p);
    for j in 0..p {
        let mut col: Vec<f64> = draws.column(j).iter().copied().collect();
        col.sort_by(f64::total_cmp);
        lower[j] = col[lo];
        upper[j] = col[hi];
    }
    Ok(BootstrapResult {
        seed: config.seed,
        level: config.level,
        iterations: config.iterations,
        draws,
        column_names: fit.column_names.clone(),
        means,
        lower,
        upper,
        failed_iterations: failed,
    })
}
