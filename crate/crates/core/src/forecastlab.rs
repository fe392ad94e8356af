//! Recursive pseudo-out-of-sample comparison.
//!
//! For every training end `e` in the plan each model is refitted on rows
//! `0..=e` of `y` (and factor periods `0..=e`) and forecasts row `e + 1`.
//! Factors come from a single full-sample extraction and are merely truncated
//! per window. Squared errors are accumulated per node; MSEs are reported
//! relative to the per-node AR(1) benchmark, and every model is compared with
//! the FNAR by a Diebold–Mariano test.

use nalgebra::{Cholesky, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{self, FitOptions, PanelSeries};
use crate::netfactors::sorted_eigen;
use crate::par::Exec;
use crate::tensor3::{Matrix, Tensor3};

/// Expanding windows with training ends `first..=last` (row indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub first_train_end: usize,
    pub last_train_end: usize,
}

impl WindowPlan {
    pub fn new(first_train_end: usize, last_train_end: usize) -> Result<Self> {
        if first_train_end > last_train_end {
            return Err(Error::InvalidArgument(format!(
                "first training end {first_train_end} after last {last_train_end}"
            )));
        }
        Ok(Self {
            first_train_end,
            last_train_end,
        })
    }

    /// The last `windows` one-step forecasts of a series of `periods` rows.
    pub fn trailing(periods: usize, windows: usize) -> Result<Self> {
        if windows == 0 || windows + 1 > periods {
            return Err(Error::InvalidArgument(format!(
                "{windows} windows do not fit in {periods} periods"
            )));
        }
        Self::new(periods - 1 - windows, periods - 2)
    }

    pub fn len(&self) -> usize {
        self.last_train_end - self.first_train_end + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn train_ends(&self) -> impl Iterator<Item = usize> {
        self.first_train_end..=self.last_train_end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fnar,
    Ar1,
    PcAr,
    LassoVar,
    MinnesotaBvar,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::Fnar,
        ModelKind::Ar1,
        ModelKind::PcAr,
        ModelKind::LassoVar,
        ModelKind::MinnesotaBvar,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fnar => "fnar",
            ModelKind::Ar1 => "ar1",
            ModelKind::PcAr => "pc_ar",
            ModelKind::LassoVar => "lasso_var",
            ModelKind::MinnesotaBvar => "minnesota_bvar",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LassoConfig {
    pub folds: usize,
    pub grid_size: usize,
    /// Smallest grid value as a fraction of `lambda_max`.
    pub min_ratio: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LassoConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            grid_size: 50,
            min_ratio: 1e-3,
            tol: 1e-7,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BvarConfig {
    pub tightness: f64,
    pub cross_weight: f64,
    pub prior_own_mean: f64,
}

impl Default for BvarConfig {
    fn default() -> Self {
        Self {
            tightness: 0.1,
            cross_weight: 1.0,
            prior_own_mean: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DmConfig {
    /// Bartlett truncation lag; `None` uses the lag-0 variance.
    pub bartlett_lags: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub fnar: FitOptions,
    pub pc_components: usize,
    pub lasso: LassoConfig,
    pub bvar: BvarConfig,
    pub dm: DmConfig,
    pub exec: Exec,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            fnar: FitOptions::default(),
            pc_components: 4,
            lasso: LassoConfig::default(),
            bvar: BvarConfig::default(),
            dm: DmConfig::default(),
            exec: Exec::default(),
        }
    }
}

// ---------------------------------------------------------------- AR(1)

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Fit {
    pub rho: f64,
    pub alpha: f64,
    /// Residual variance (divisor `n - 2`).
    pub sigma2: f64,
    /// Constant lagged series: `rho` set to 0 and the mean forecast used.
    pub mean_fallback: bool,
}

impl Ar1Fit {
    pub fn forecast(&self, last: f64) -> f64 {
        self.alpha + self.rho * last
    }
}

/// OLS of `y_t` on `(1, y_{t-1})`.
pub fn fit_ar1(series: &[f64]) -> Result<Ar1Fit> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "AR(1) needs at least 3 observations, got {}",
            series.len()
        )));
    }
    let x = &series[..series.len() - 1];
    let y = &series[1..];
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if !(sxx > 1e-14 * (1.0 + mx * mx) * n) {
        log::warn!("constant series: AR(1) falls back to the mean forecast");
        let mean = series.iter().sum::<f64>() / series.len() as f64;
        return Ok(Ar1Fit {
            rho: 0.0,
            alpha: mean,
            sigma2: 0.0,
            mean_fallback: true,
        });
    }
    let rho = sxy / sxx;
    let alpha = my - rho * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - alpha - rho * a).powi(2)).sum();
    Ok(Ar1Fit {
        rho,
        alpha,
        sigma2: if n > 2.0 { ssr / (n - 2.0) } else { 0.0 },
        mean_fallback: false,
    })
}

// ---------------------------------------------------------------- shared OLS

/// Least squares via Cholesky of the Gram matrix.
fn least_squares(x: &Matrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = Cholesky::new(x.tr_mul(x))
        .ok_or_else(|| Error::Singular("regressor Gram matrix is singular".into()))?;
    Ok(chol.solve(&x.tr_mul(y)))
}

/// `(1, y_{t-1})` rows for `t = 1..T`.
fn lag_design(y: &Matrix) -> Matrix {
    let (t, n) = y.shape();
    Matrix::from_fn(t - 1, n + 1, |s, j| if j == 0 { 1.0 } else { y[(s, j - 1)] })
}

// ---------------------------------------------------------------- PC-AR

/// Per-node regressions on `(1, own lag, lagged principal components)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcArFit {
    pub mean: DVector<f64>,
    /// `N x k` principal directions of the training covariance.
    pub directions: Matrix,
    /// `N x (k + 2)`: intercept, own lag, PC coefficients.
    pub coefficients: Matrix,
    pub explained: Vec<f64>,
}

impl PcArFit {
    pub fn forecast(&self, last: &DVector<f64>) -> DVector<f64> {
        let pcs = self.directions.tr_mul(&(last - &self.mean));
        let k = pcs.len();
        DVector::from_fn(last.len(), |i, _| {
            let c = self.coefficients.row(i);
            c[0] + c[1] * last[i] + (0..k).map(|j| c[2 + j] * pcs[j]).sum::<f64>()
        })
    }
}

pub fn fit_pc_ar(y: &Matrix, n_components: usize) -> Result<PcArFit> {
    let (t, n) = y.shape();
    if t < n_components + 3 {
        return Err(Error::InsufficientData(format!(
            "{t} periods for a PC-AR with {n_components} components"
        )));
    }
    let mean = DVector::from_fn(n, |j, _| y.column(j).mean());
    let centered = Matrix::from_fn(t, n, |s, j| y[(s, j)] - mean[j]);
    let cov = centered.tr_mul(&centered) / t as f64;
    let (values, vectors) = sorted_eigen(&cov);
    let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
    let rank = values.iter().filter(|&&v| v > 1e-12 * values[0].max(0.0)).count();
    if n_components > rank {
        return Err(Error::RankExceeded {
            requested: n_components,
            available: rank,
        });
    }
    let directions = vectors.columns(0, n_components).into_owned();
    let pcs = &centered * &directions;
    let mut coefficients = Matrix::zeros(n, n_components + 2);
    for i in 0..n {
        let x = Matrix::from_fn(t - 1, n_components + 2, |s, j| match j {
            0 => 1.0,
            1 => y[(s, i)],
            _ => pcs[(s, j - 2)],
        });
        let target = DVector::from_fn(t - 1, |s, _| y[(s + 1, i)]);
        let b = least_squares(&x, &target)?;
        coefficients.row_mut(i).copy_from(&b.transpose());
    }
    Ok(PcArFit {
        mean,
        directions,
        coefficients,
        explained: values[..n_components]
            .iter()
            .map(|v| if total > 0.0 { v / total } else { 0.0 })
            .collect(),
    })
}

// ---------------------------------------------------------------- LASSO

/// Soft-thresholding operator.
fn soft(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Penalized regression `(1/2n)||y - a - X b||^2 + lambda ||b||_1` with
/// predictors standardized internally. Returns `(a, b)` on the original scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub intercept: f64,
    pub slopes: DVector<f64>,
    pub lambda: f64,
}

impl LassoFit {
    pub fn predict(&self, x: &DVector<f64>) -> f64 {
        self.intercept + self.slopes.dot(x)
    }
}

struct Standardized {
    z: Matrix,
    yc: DVector<f64>,
    x_mean: DVector<f64>,
    x_sd: DVector<f64>,
    y_mean: f64,
}

fn standardize(x: &Matrix, y: &DVector<f64>) -> Standardized {
    let (n, p) = x.shape();
    let x_mean = DVector::from_fn(p, |j, _| x.column(j).mean());
    let x_sd = DVector::from_fn(p, |j, _| {
        (x.column(j).iter().map(|v| (v - x_mean[j]).powi(2)).sum::<f64>() / n as f64).sqrt()
    });
    let z = Matrix::from_fn(n, p, |s, j| {
        if x_sd[j] > 0.0 {
            (x[(s, j)] - x_mean[j]) / x_sd[j]
        } else {
            0.0
        }
    });
    let y_mean = y.mean();
    Standardized {
        z,
        yc: y.map(|v| v - y_mean),
        x_mean,
        x_sd,
        y_mean,
    }
}

fn lambda_max(s: &Standardized) -> f64 {
    let n = s.z.nrows() as f64;
    s.z.tr_mul(&s.yc).amax() / n
}

/// Coordinate descent on standardized data, warm-started from `b`.
fn coordinate_descent(s: &Standardized, lambda: f64, b: &mut DVector<f64>, tol: f64, max_iter: usize) {
    let (n, p) = s.z.shape();
    let nf = n as f64;
    let mut resid = &s.yc - &s.z * &*b;
    let col_sq: Vec<f64> = (0..p).map(|j| s.z.column(j).norm_squared() / nf).collect();
    for _ in 0..max_iter {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if col_sq[j] == 0.0 {
                b[j] = 0.0;
                continue;
            }
            let old = b[j];
            let rho = s.z.column(j).dot(&resid) / nf + col_sq[j] * old;
            let new = soft(rho, lambda) / col_sq[j];
            if new != old {
                resid.axpy(old - new, &s.z.column(j), 1.0);
                b[j] = new;
                max_change = max_change.max((new - old).abs() * col_sq[j].sqrt());
            }
        }
        if max_change < tol {
            break;
        }
    }
}

fn unstandardize(s: &Standardized, b: &DVector<f64>, lambda: f64) -> LassoFit {
    let slopes = DVector::from_fn(
        b.len(),
        |j, _| if s.x_sd[j] > 0.0 { b[j] / s.x_sd[j] } else { 0.0 },
    );
    LassoFit {
        intercept: s.y_mean - slopes.dot(&s.x_mean),
        slopes,
        lambda,
    }
}

/// LASSO at a fixed penalty.
pub fn fit_lasso(x: &Matrix, y: &DVector<f64>, lambda: f64, config: &LassoConfig) -> Result<LassoFit> {
    if x.nrows() != y.len() || x.nrows() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "{} design rows for {} observations",
            x.nrows(),
            y.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty {lambda} must be nonnegative"
        )));
    }
    let s = standardize(x, y);
    let mut b = DVector::zeros(x.ncols());
    coordinate_descent(&s, lambda, &mut b, config.tol, config.max_iter);
    Ok(unstandardize(&s, &b, lambda))
}

/// Log-spaced grid from `lambda_max` down to `min_ratio * lambda_max`.
fn lambda_grid(lmax: f64, config: &LassoConfig) -> Vec<f64> {
    let k = config.grid_size.max(1);
    if k == 1 || lmax <= 0.0 {
        return vec![lmax.max(0.0)];
    }
    (0..k)
        .map(|i| lmax * config.min_ratio.powf(i as f64 / (k - 1) as f64))
        .collect()
}

fn lasso_path(x: &Matrix, y: &DVector<f64>, grid: &[f64], config: &LassoConfig) -> Vec<LassoFit> {
    let s = standardize(x, y);
    let mut b = DVector::zeros(x.ncols());
    grid.iter()
        .map(|&lambda| {
            coordinate_descent(&s, lambda, &mut b, config.tol, config.max_iter);
            unstandardize(&s, &b, lambda)
        })
        .collect()
}

/// LASSO with the penalty chosen by K-fold cross validation over contiguous
/// blocks of observations.
pub fn fit_lasso_cv(x: &Matrix, y: &DVector<f64>, config: &LassoConfig) -> Result<LassoFit> {
    let n = x.nrows();
    if config.folds < 2 || n < config.folds + 2 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {}-fold cross validation",
            config.folds
        )));
    }
    let grid = lambda_grid(lambda_max(&standardize(x, y)), config);
    let mut cv_loss = vec![0.0; grid.len()];
    for f in 0..config.folds {
        let (lo, hi) = (f * n / config.folds, (f + 1) * n / config.folds);
        if hi == lo {
            return Err(Error::InsufficientData("empty cross-validation fold".into()));
        }
        let train: Vec<usize> = (0..n).filter(|&s| s < lo || s >= hi).collect();
        let xt = Matrix::from_fn(train.len(), x.ncols(), |s, j| x[(train[s], j)]);
        let yt = DVector::from_fn(train.len(), |s, _| y[train[s]]);
        for (g, fit) in lasso_path(&xt, &yt, &grid, config).iter().enumerate() {
            for s in lo..hi {
                let pred = fit.intercept + x.row(s).transpose().dot(&fit.slopes);
                cv_loss[g] += (y[s] - pred).powi(2);
            }
        }
    }
    let best = cv_loss
        .iter()
        .enumerate()
        .fold(0, |best, (g, &l)| if l < cv_loss[best] { g } else { best });
    fit_lasso(x, y, grid[best], config)
}

/// Equation-by-equation LASSO VAR(1): `N x (N + 1)` coefficients
/// (intercept first).
pub fn fit_lasso_var(y: &Matrix, config: &LassoConfig) -> Result<Matrix> {
    let (t, n) = y.shape();
    if t < config.folds + 3 {
        return Err(Error::InsufficientData(format!(
            "{t} periods for {}-fold cross validation",
            config.folds
        )));
    }
    let x = y.rows(0, t - 1).into_owned();
    let mut coef = Matrix::zeros(n, n + 1);
    for i in 0..n {
        let target = DVector::from_fn(t - 1, |s, _| y[(s + 1, i)]);
        let fit = fit_lasso_cv(&x, &target, config)?;
        coef[(i, 0)] = fit.intercept;
        for j in 0..n {
            coef[(i, j + 1)] = fit.slopes[j];
        }
    }
    Ok(coef)
}

// ---------------------------------------------------------------- Minnesota BVAR

/// Posterior-mean VAR(1) under a Minnesota prior: `N x (N + 1)` coefficients
/// (intercept first). The intercept prior is flat; slopes have prior mean
/// `prior_own_mean` (own lag) or 0, and prior standard deviations
/// `tightness` (own lag) and `tightness * cross_weight * sigma_i / sigma_j`.
pub fn fit_minnesota_bvar(y: &Matrix, config: &BvarConfig) -> Result<Matrix> {
    let (t, n) = y.shape();
    if t < n + 3 {
        return Err(Error::InsufficientData(format!(
            "{t} periods for a {n}-variable BVAR"
        )));
    }
    if !(config.tightness >= 0.0 && config.cross_weight >= 0.0) {
        return Err(Error::InvalidArgument(
            "prior hyperparameters must be nonnegative".into(),
        ));
    }
    let sigma: Vec<f64> = (0..n)
        .map(|j| {
            let col: Vec<f64> = y.column(j).iter().copied().collect();
            fit_ar1(&col).map(|f| f.sigma2.sqrt())
        })
        .collect::<Result<_>>()?;
    if let Some(j) = sigma.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::Singular(format!(
            "node {j} has zero AR(1) residual variance"
        )));
    }
    let x = lag_design(y);
    let gram = x.tr_mul(&x);
    let mut coef = Matrix::zeros(n, n + 1);
    for i in 0..n {
        let target = DVector::from_fn(t - 1, |s, _| y[(s + 1, i)]);
        let prior_mean = DVector::from_fn(n + 1, |j, _| if j == i + 1 { config.prior_own_mean } else { 0.0 });
        if config.tightness == 0.0 {
            // dogmatic prior: slopes fixed, intercept by least squares
            let resid = &target - &x * &prior_mean;
            coef.row_mut(i).copy_from(&prior_mean.transpose());
            coef[(i, 0)] = resid.mean();
            continue;
        }
        let s2 = sigma[i] * sigma[i];
        let mut precision = &gram / s2;
        let mut rhs = x.tr_mul(&target) / s2;
        for j in 0..n {
            let sd = if j == i {
                config.tightness
            } else {
                config.tightness * config.cross_weight * sigma[i] / sigma[j]
            };
            if sd.is_finite() && sd > 0.0 {
                let p = 1.0 / (sd * sd);
                precision[(j + 1, j + 1)] += p;
                rhs[j + 1] += p * prior_mean[j + 1];
            } else if sd == 0.0 {
                return Err(Error::InvalidArgument(
                    "zero prior variance on a cross term".into(),
                ));
            }
        }
        let b = Cholesky::new(precision)
            .ok_or_else(|| Error::Singular("posterior precision is singular".into()))?
            .solve(&rhs);
        coef.row_mut(i).copy_from(&b.transpose());
    }
    Ok(coef)
}

/// Unrestricted equation-by-equation OLS VAR(1), same layout as the BVAR.
pub fn fit_ols_var(y: &Matrix) -> Result<Matrix> {
    let (t, n) = y.shape();
    let x = lag_design(y);
    let mut coef = Matrix::zeros(n, n + 1);
    for i in 0..n {
        let target = DVector::from_fn(t - 1, |s, _| y[(s + 1, i)]);
        coef.row_mut(i)
            .copy_from(&least_squares(&x, &target)?.transpose());
    }
    Ok(coef)
}

fn var_forecast(coef: &Matrix, last: &DVector<f64>) -> DVector<f64> {
    let n = last.len();
    DVector::from_fn(n, |i, _| {
        coef[(i, 0)] + (0..n).map(|j| coef[(i, j + 1)] * last[j]).sum::<f64>()
    })
}

// ---------------------------------------------------------------- Diebold–Mariano

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DmStatus {
    Computed,
    /// Identical losses: statistic 0, p-value 1.
    Equal,
    /// Constant nonzero loss differential: no variance to scale by.
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DmResult {
    pub status: DmStatus,
    /// Mean of `e_a^2 - e_b^2`; negative favors `a`.
    pub mean_differential: f64,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
}

/// Test of equal squared-error accuracy of two forecast-error series.
pub fn diebold_mariano(errors_a: &[f64], errors_b: &[f64], config: &DmConfig) -> Result<DmResult> {
    if errors_a.len() != errors_b.len() {
        return Err(Error::DimensionMismatch(format!(
            "error series of lengths {} and {}",
            errors_a.len(),
            errors_b.len()
        )));
    }
    let n = errors_a.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!(
            "{n} forecast errors, need at least 10"
        )));
    }
    let d: Vec<f64> = errors_a
        .iter()
        .zip(errors_b)
        .map(|(a, b)| a * a - b * b)
        .collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let autocov = |lag: usize| (lag..n).map(|t| (d[t] - mean) * (d[t - lag] - mean)).sum::<f64>() / nf;
    let mut var = autocov(0);
    if let Some(lags) = config.bartlett_lags {
        for l in 1..=lags.min(n - 1) {
            var += 2.0 * (1.0 - l as f64 / (lags as f64 + 1.0)) * autocov(l);
        }
    }
    let scale = d.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(var > 1e-28 * scale * scale) {
        return Ok(if d.iter().all(|&v| v == 0.0) {
            DmResult {
                status: DmStatus::Equal,
                mean_differential: 0.0,
                statistic: Some(0.0),
                p_value: Some(1.0),
            }
        } else {
            DmResult {
                status: DmStatus::Undefined,
                mean_differential: mean,
                statistic: None,
                p_value: None,
            }
        });
    }
    let stat = mean / (var / nf).sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(DmResult {
        status: DmStatus::Computed,
        mean_differential: mean,
        statistic: Some(stat),
        p_value: Some(2.0 * (1.0 - normal.cdf(stat.abs()))),
    })
}

// ---------------------------------------------------------------- comparison

#[derive(Debug, Clone, PartialEq)]
pub struct ModelErrors {
    pub model: ModelKind,
    /// `windows x N` forecast errors `y - y_hat`.
    pub errors: Matrix,
    pub mse: Vec<f64>,
    /// MSE relative to AR(1), per node.
    pub ratio: Vec<f64>,
    /// Diebold–Mariano against the FNAR per node (empty without the FNAR).
    pub dm_vs_fnar: Vec<DmResult>,
}

impl ModelErrors {
    pub fn median_ratio(&self) -> f64 {
        crate::montecarlo::median(&mut self.ratio.clone())
    }

    pub fn mean_ratio(&self) -> f64 {
        self.ratio.iter().sum::<f64>() / self.ratio.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastReport {
    pub plan: WindowPlan,
    pub nodes: Vec<String>,
    /// Period label of every forecast target.
    pub targets: Vec<String>,
    /// In canonical model order, AR(1) always included.
    pub models: Vec<ModelErrors>,
    /// Largest row index seen by any fit, per window.
    pub last_index_used: Vec<usize>,
}

impl ForecastReport {
    pub fn get(&self, model: ModelKind) -> Option<&ModelErrors> {
        self.models.iter().find(|m| m.model == model)
    }
}

fn forecast_with(
    kind: ModelKind,
    train: &PanelSeries,
    factors: &[Tensor3],
    config: &LabConfig,
) -> Result<DVector<f64>> {
    let end = train.n_periods() - 1;
    let last = train.row(end);
    let y = train.values();
    match kind {
        ModelKind::Fnar => {
            let fit = model::fit(train, factors, &config.fnar)?;
            model::forecast_one_step(&fit, &last, &factors[end])
        }
        ModelKind::Ar1 => (0..train.n_nodes())
            .map(|i| {
                let col: Vec<f64> = y.column(i).iter().copied().collect();
                fit_ar1(&col).map(|f| f.forecast(last[i]))
            })
            .collect::<Result<Vec<_>>>()
            .map(DVector::from_vec),
        ModelKind::PcAr => Ok(fit_pc_ar(y, config.pc_components)?.forecast(&last)),
        ModelKind::LassoVar => Ok(var_forecast(&fit_lasso_var(y, &config.lasso)?, &last)),
        ModelKind::MinnesotaBvar => Ok(var_forecast(&fit_minnesota_bvar(y, &config.bvar)?, &last)),
    }
}

/// Runs the comparison. `factors[t]` must be the factor tensor of row `t` of
/// `y`; only periods up to each training end are passed to the FNAR.
pub fn run_comparison(
    y: &PanelSeries,
    factors: &[Tensor3],
    plan: &WindowPlan,
    models: &[ModelKind],
    config: &LabConfig,
) -> Result<ForecastReport> {
    if plan.last_train_end + 1 >= y.n_periods() {
        return Err(Error::InvalidArgument(format!(
            "last training end {} leaves no target in {} periods",
            plan.last_train_end,
            y.n_periods()
        )));
    }
    let mut kinds: Vec<ModelKind> = models.to_vec();
    kinds.push(ModelKind::Ar1);
    kinds.sort();
    kinds.dedup();
    if kinds.contains(&ModelKind::Fnar) && factors.len() <= plan.last_train_end {
        return Err(Error::DimensionMismatch(format!(
            "{} factor periods for training ends up to {}",
            factors.len(),
            plan.last_train_end
        )));
    }
    let ends: Vec<usize> = plan.train_ends().collect();
    let per_window = config
        .exec
        .map(ends.len(), |w| -> Result<(Vec<DVector<f64>>, usize)> {
            let end = ends[w];
            let train = y.head(end + 1);
            let visible = if factors.is_empty() {
                &factors[..0]
            } else {
                &factors[..=end]
            };
            // no-lookahead audit: everything handed to the models ends at `end`
            assert_eq!(train.n_periods(), end + 1);
            assert!(visible.is_empty() || visible.len() == end + 1);
            let actual = y.row(end + 1);
            let errs = kinds
                .iter()
                .map(|&k| forecast_with(k, &train, visible, config).map(|f| &actual - f))
                .collect::<Result<Vec<_>>>()?;
            Ok((errs, end))
        });
    let per_window = per_window.into_iter().collect::<Result<Vec<_>>>()?;

    let n = y.n_nodes();
    let nw = ends.len();
    let mut errors: Vec<Matrix> = kinds.iter().map(|_| Matrix::zeros(nw, n)).collect();
    for (w, (errs, _)) in per_window.iter().enumerate() {
        for (m, e) in errs.iter().enumerate() {
            errors[m].row_mut(w).copy_from(&e.transpose());
        }
    }
    let mse: Vec<Vec<f64>> = errors
        .iter()
        .map(|e| (0..n).map(|i| e.column(i).norm_squared() / nw as f64).collect())
        .collect();
    let ar1 = kinds
        .iter()
        .position(|&k| k == ModelKind::Ar1)
        .expect("AR(1) included");
    let fnar = kinds.iter().position(|&k| k == ModelKind::Fnar);
    let mut out = Vec::with_capacity(kinds.len());
    for (m, &kind) in kinds.iter().enumerate() {
        let ratio = (0..n).map(|i| mse[m][i] / mse[ar1][i]).collect();
        let dm_vs_fnar = match fnar {
            Some(f) if nw >= 10 => (0..n)
                .map(|i| {
                    let a: Vec<f64> = errors[f].column(i).iter().copied().collect();
                    let b: Vec<f64> = errors[m].column(i).iter().copied().collect();
                    diebold_mariano(&a, &b, &config.dm)
                })
                .collect::<Result<_>>()?,
            _ => Vec::new(),
        };
        out.push(ModelErrors {
            model: kind,
            errors: errors[m].clone(),
            mse: mse[m].clone(),
            ratio,
            dm_vs_fnar,
        });
    }
    Ok(ForecastReport {
        plan: *plan,
        nodes: y.nodes().to_vec(),
        targets: ends.iter().map(|&e| y.periods()[e + 1].clone()).collect(),
        models: out,
        last_index_used: per_window.iter().map(|(_, e)| *e).collect(),
    })
}
