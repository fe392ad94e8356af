//! Factor network autoregression
//!
//! ```text
//! y_t = sum_k beta_k F_{k,t-1} y_{t-1} + P y_{t-1} + alpha + nu_t
//! ```
//!
//! with `P = diag(rho)`. Stacking, `y_t = X_t theta + nu_t` where
//! `X_t = (mat_1(F_{t-1} x_2 y_{t-1}'), diag(y_{t-1}), I_N)` and
//! `theta = (beta_1..beta_r, rho_1..rho_N, alpha_1..alpha_N)`.
//!
//! Factors are passed as a slice aligned with the rows of the series: row `t`
//! of `y` is regressed on `F_{t-1}` and row `t - 1`, so a series of `T + 1`
//! rows yields `T` regression periods.

use nalgebra::{Cholesky, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netfactors::FactorModel;
use crate::tensor3::{Matrix, Tensor3};

/// Node-level time series, one row per period.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelSeries {
    periods: Vec<String>,
    nodes: Vec<String>,
    values: Matrix,
}

impl PanelSeries {
    pub fn new(periods: Vec<String>, nodes: Vec<String>, values: Matrix) -> Result<Self> {
        if values.shape() != (periods.len(), nodes.len()) {
            return Err(Error::DimensionMismatch(format!(
                "values {:?} for {} periods x {} nodes",
                values.shape(),
                periods.len(),
                nodes.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "series contains missing or non-finite values".into(),
            ));
        }
        Ok(Self {
            periods,
            nodes,
            values,
        })
    }

    /// Series with labels `t0..`, `n0..`.
    pub fn from_matrix(values: Matrix) -> Result<Self> {
        let periods = (0..values.nrows()).map(|t| format!("t{t}")).collect();
        let nodes = (0..values.ncols()).map(|i| format!("n{i}")).collect();
        Self::new(periods, nodes, values)
    }

    pub fn periods(&self) -> &[String] {
        &self.periods
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    /// `T x N` values.
    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn n_periods(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.values.ncols()
    }

    pub fn row(&self, t: usize) -> DVector<f64> {
        self.values.row(t).transpose()
    }

    /// First `rows` periods.
    pub fn head(&self, rows: usize) -> Self {
        Self {
            periods: self.periods[..rows].to_vec(),
            nodes: self.nodes.clone(),
            values: self.values.rows(0, rows).into_owned(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Ols,
    /// Feasible GLS, `max_iter` covariance refreshes (1 = one-step).
    Sur {
        max_iter: usize,
    },
}

impl Estimator {
    pub fn sur() -> Self {
        Estimator::Sur { max_iter: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectsMode {
    /// One `beta_k` shared by all nodes.
    #[default]
    Homogeneous,
    /// `beta_{k,i}` per node, estimated equation by equation.
    Heterogeneous,
}

/// Divisor for the residual covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DofDivisor {
    /// `T - p / N` with `p` the total number of coefficients
    /// (`T - r/N - 2` for the homogeneous model). May be non-integer.
    #[default]
    PerEquationParameters,
    /// Plain `T`.
    Periods,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FitOptions {
    pub estimator: Estimator,
    pub mode: EffectsMode,
    pub dof: DofDivisor,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            estimator: Estimator::Ols,
            mode: EffectsMode::Homogeneous,
            dof: DofDivisor::default(),
        }
    }
}

/// Coefficients of an FNAR, enough to simulate or forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    /// `1 x r` (homogeneous) or `N x r` (heterogeneous).
    pub beta: Matrix,
    pub rho: DVector<f64>,
    pub alpha: DVector<f64>,
}

impl Coefficients {
    pub fn homogeneous(beta: &[f64], rho: &[f64], alpha: &[f64]) -> Self {
        Self {
            beta: Matrix::from_row_slice(1, beta.len(), beta),
            rho: DVector::from_column_slice(rho),
            alpha: DVector::from_column_slice(alpha),
        }
    }

    pub fn r(&self) -> usize {
        self.beta.ncols()
    }

    pub fn n_nodes(&self) -> usize {
        self.rho.len()
    }

    pub fn is_homogeneous(&self) -> bool {
        self.beta.nrows() == 1
    }

    fn beta_at(&self, i: usize, k: usize) -> f64 {
        if self.is_homogeneous() {
            self.beta[(0, k)]
        } else {
            self.beta[(i, k)]
        }
    }

    /// Network transition `sum_k beta_k F_k + P` for one factor tensor.
    pub fn transition(&self, factors: &Tensor3) -> Result<Matrix> {
        let n = self.n_nodes();
        check_factor_dims(factors, n, self.r())?;
        let mut b = Matrix::from_diagonal(&self.rho);
        for k in 0..self.r() {
            let fk = factors.frontal_slice(k);
            for i in 0..n {
                let beta = self.beta_at(i, k);
                for j in 0..n {
                    b[(i, j)] += beta * fk[(i, j)];
                }
            }
        }
        Ok(b)
    }

    /// `sum_k beta_k F_k y + P y + alpha`.
    pub fn step(&self, y_prev: &DVector<f64>, factors_prev: &Tensor3) -> Result<DVector<f64>> {
        let n = self.n_nodes();
        if y_prev.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "state of length {} for {n} nodes",
                y_prev.len()
            )));
        }
        check_factor_dims(factors_prev, n, self.r())?;
        let mut out = self.alpha.clone() + self.rho.component_mul(y_prev);
        for k in 0..self.r() {
            let fy = factors_prev.frontal_slice(k) * y_prev;
            for i in 0..n {
                out[i] += self.beta_at(i, k) * fy[i];
            }
        }
        Ok(out)
    }
}

fn check_factor_dims(f: &Tensor3, n: usize, r: usize) -> Result<()> {
    if f.dims() != [n, n, r] {
        return Err(Error::DimensionMismatch(format!(
            "factor tensor of dims {:?}, expected {:?}",
            f.dims(),
            [n, n, r]
        )));
    }
    Ok(())
}

/// Estimated FNAR.
#[derive(Debug, Clone, PartialEq)]
pub struct FnarFit {
    pub mode: EffectsMode,
    pub estimator: Estimator,
    pub coefficients: Coefficients,
    /// Same shapes as the coefficients; NaN for dropped columns.
    pub beta_se: Matrix,
    pub rho_se: DVector<f64>,
    pub alpha_se: DVector<f64>,
    /// Stacked parameter vector in design-column order.
    pub theta: DVector<f64>,
    pub theta_cov: Matrix,
    pub column_names: Vec<String>,
    /// Columns that were identically zero and fixed at 0.
    pub dropped_columns: Vec<String>,
    pub sigma_nu: Matrix,
    /// `T x N`, one row per regression period.
    pub residuals: Matrix,
    pub fitted: Matrix,
    /// Residual covariance divisor actually used.
    pub dof_divisor: f64,
}

impl FnarFit {
    pub fn r(&self) -> usize {
        self.coefficients.r()
    }

    pub fn n_nodes(&self) -> usize {
        self.coefficients.n_nodes()
    }

    pub fn n_obs(&self) -> usize {
        self.residuals.nrows()
    }

    /// Homogeneous `beta` as a vector.
    pub fn beta(&self) -> Option<DVector<f64>> {
        self.coefficients
            .is_homogeneous()
            .then(|| self.coefficients.beta.row(0).transpose())
    }
}

/// `X_t` for one period: `N x (r + 2N)`.
pub fn build_design(y_lag: &DVector<f64>, factors_lag: &Tensor3) -> Result<Matrix> {
    let [n, n2, r] = factors_lag.dims();
    if n != n2 || y_lag.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "state of length {} with factor tensor {:?}",
            y_lag.len(),
            factors_lag.dims()
        )));
    }
    let mut x = Matrix::zeros(n, r + 2 * n);
    for k in 0..r {
        let fy = factors_lag.frontal_slice(k) * y_lag;
        x.column_mut(k).copy_from(&fy);
    }
    for i in 0..n {
        x[(i, r + i)] = y_lag[i];
        x[(i, r + n + i)] = 1.0;
    }
    Ok(x)
}

/// Block-diagonal design for node-specific network effects:
/// equation `i` owns columns `i(r+2) .. (i+1)(r+2)` holding
/// `(f_{1,i}'y, .., f_{r,i}'y, y_i, 1)`.
pub fn build_heterogeneous_design(y_lag: &DVector<f64>, factors_lag: &Tensor3) -> Result<Matrix> {
    let hom = build_design(y_lag, factors_lag)?;
    let [n, _, r] = factors_lag.dims();
    let w = r + 2;
    let mut x = Matrix::zeros(n, n * w);
    for i in 0..n {
        for k in 0..r {
            x[(i, i * w + k)] = hom[(i, k)];
        }
        x[(i, i * w + r)] = y_lag[i];
        x[(i, i * w + r + 1)] = 1.0;
    }
    Ok(x)
}

fn column_names(mode: EffectsMode, n: usize, r: usize) -> Vec<String> {
    match mode {
        EffectsMode::Homogeneous => (1..=r)
            .map(|k| format!("beta_{k}"))
            .chain((1..=n).map(|i| format!("rho_{i}")))
            .chain((1..=n).map(|i| format!("alpha_{i}")))
            .collect(),
        EffectsMode::Heterogeneous => (1..=n)
            .flat_map(|i| {
                (1..=r)
                    .map(move |k| format!("beta_{k}_{i}"))
                    .chain([format!("rho_{i}"), format!("alpha_{i}")])
            })
            .collect(),
    }
}

struct System {
    designs: Vec<Matrix>,
    targets: Vec<DVector<f64>>,
    names: Vec<String>,
    /// Columns allowed to be dropped when identically zero.
    droppable: Vec<bool>,
}

fn assemble(y: &PanelSeries, factors: &[Tensor3], mode: EffectsMode) -> Result<System> {
    let (t_total, n) = (y.n_periods(), y.n_nodes());
    if t_total < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 periods, got {t_total}"
        )));
    }
    if factors.len() + 1 < t_total {
        return Err(Error::DimensionMismatch(format!(
            "{} factor periods for a series of {t_total} periods",
            factors.len()
        )));
    }
    let r = factors[0].dims()[2];
    let mut designs = Vec::with_capacity(t_total - 1);
    let mut targets = Vec::with_capacity(t_total - 1);
    for t in 1..t_total {
        let lag = y.row(t - 1);
        check_factor_dims(&factors[t - 1], n, r)?;
        designs.push(match mode {
            EffectsMode::Homogeneous => build_design(&lag, &factors[t - 1])?,
            EffectsMode::Heterogeneous => build_heterogeneous_design(&lag, &factors[t - 1])?,
        });
        targets.push(y.row(t));
    }
    let names = column_names(mode, n, r);
    let droppable = match mode {
        EffectsMode::Homogeneous => vec![false; names.len()],
        EffectsMode::Heterogeneous => (0..n).flat_map(|_| (0..r + 2).map(|c| c < r)).collect(),
    };
    Ok(System {
        designs,
        targets,
        names,
        droppable,
    })
}

fn select_columns(x: &Matrix, keep: &[usize]) -> Matrix {
    Matrix::from_fn(x.nrows(), keep.len(), |i, j| x[(i, keep[j])])
}

/// Inverse of a symmetric positive definite matrix after a rank check that
/// names the columns spanning any near-null direction.
fn checked_inverse(gram: &Matrix, names: &[String]) -> Result<Matrix> {
    let p = gram.nrows();
    let zero: Vec<String> = (0..p)
        .filter(|&i| !(gram[(i, i)] > 0.0))
        .map(|i| names[i].clone())
        .collect();
    if !zero.is_empty() {
        return Err(Error::RankDeficient { columns: zero });
    }
    let scale: Vec<f64> = (0..p).map(|i| gram[(i, i)].sqrt()).collect();
    let scaled = Matrix::from_fn(p, p, |i, j| gram[(i, j)] / (scale[i] * scale[j]));
    let eig = SymmetricEigen::new(scaled.clone());
    let max = eig.eigenvalues.max();
    let mut involved = vec![false; p];
    let mut deficient = false;
    for (c, &mu) in eig.eigenvalues.iter().enumerate() {
        if mu < 1e-12 * max {
            deficient = true;
            for (i, flag) in involved.iter_mut().enumerate() {
                if eig.eigenvectors[(i, c)].abs() > 0.1 {
                    *flag = true;
                }
            }
        }
    }
    if deficient {
        return Err(Error::RankDeficient {
            columns: (0..p)
                .filter(|&i| involved[i])
                .map(|i| names[i].clone())
                .collect(),
        });
    }
    let chol = Cholesky::new(scaled)
        .ok_or_else(|| Error::Singular("regressor Gram matrix is not positive definite".into()))?;
    let inv = chol.inverse();
    Ok(Matrix::from_fn(p, p, |i, j| inv[(i, j)] / (scale[i] * scale[j])))
}

/// Weighted normal equations `sum X' W X theta = sum X' W y` on kept columns.
/// `weight = None` is ordinary least squares.
fn solve_normal_equations(
    sys: &System,
    keep: &[usize],
    weight: Option<&Matrix>,
) -> Result<(DVector<f64>, Matrix)> {
    let p = keep.len();
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = DVector::zeros(p);
    for (x_full, y) in sys.designs.iter().zip(&sys.targets) {
        let x = select_columns(x_full, keep);
        let (wx, wy) = match weight {
            Some(w) => (w * &x, w * y),
            None => (x.clone(), y.clone()),
        };
        gram += x.tr_mul(&wx);
        rhs += x.tr_mul(&wy);
    }
    let names: Vec<String> = keep.iter().map(|&c| sys.names[c].clone()).collect();
    let inv = checked_inverse(&gram, &names)?;
    Ok((&inv * rhs, inv))
}

fn residuals_for(sys: &System, theta_full: &DVector<f64>) -> (Matrix, Matrix) {
    let n = sys.targets[0].len();
    let t = sys.targets.len();
    let mut resid = Matrix::zeros(t, n);
    let mut fitted = Matrix::zeros(t, n);
    for (s, (x, y)) in sys.designs.iter().zip(&sys.targets).enumerate() {
        let f = x * theta_full;
        fitted.row_mut(s).copy_from(&f.transpose());
        resid.row_mut(s).copy_from(&(y - f).transpose());
    }
    (resid, fitted)
}

fn residual_covariance(resid: &Matrix, divisor: f64) -> Matrix {
    let mut s = resid.tr_mul(resid) / divisor;
    let n = s.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Inverse of a residual covariance for GLS, returned with the scale `s`
/// such that the true inverse is `inv / s`. A small ridge is added when the
/// matrix is near singular.
pub(crate) fn gls_weight(sigma: &Matrix) -> Result<(Matrix, f64)> {
    let n = sigma.nrows();
    let s = (0..n).map(|i| sigma[(i, i)]).fold(0.0, f64::max);
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Singular("residual covariance is zero".into()));
    }
    let mut scaled = sigma / s;
    let condition = |m: &Matrix| {
        let e = SymmetricEigen::new(m.clone()).eigenvalues;
        let (lo, hi) = (e.min(), e.max());
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    };
    if condition(&scaled) > 1e12 {
        let lambda = 1e-8 * scaled.trace() / n as f64;
        for i in 0..n {
            scaled[(i, i)] += lambda;
        }
        if condition(&scaled) > 1e12 {
            return Err(Error::Singular(
                "residual covariance remains ill-conditioned after regularization".into(),
            ));
        }
    }
    let chol = Cholesky::new(scaled)
        .ok_or_else(|| Error::Singular("residual covariance is not positive definite".into()))?;
    Ok((chol.inverse(), s))
}

fn divisor(dof: DofDivisor, t: usize, n: usize, p: usize) -> Result<f64> {
    let d = match dof {
        DofDivisor::PerEquationParameters => t as f64 - p as f64 / n as f64,
        DofDivisor::Periods => t as f64,
    };
    if !(d > 0.0) {
        return Err(Error::InsufficientData(format!(
            "{t} periods leave no degrees of freedom for {p} coefficients"
        )));
    }
    Ok(d)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    sys: &System,
    y_n: usize,
    r: usize,
    options: &FitOptions,
    keep: &[usize],
    theta_kept: DVector<f64>,
    cov_kept: Matrix,
    sigma_div: f64,
) -> FnarFit {
    let p = sys.names.len();
    let mut theta = DVector::zeros(p);
    let mut cov = Matrix::from_element(p, p, f64::NAN);
    for (a, &ca) in keep.iter().enumerate() {
        theta[ca] = theta_kept[a];
        for (b, &cb) in keep.iter().enumerate() {
            cov[(ca, cb)] = cov_kept[(a, b)];
        }
    }
    let (residuals, fitted) = residuals_for(sys, &theta);
    let sigma_nu = residual_covariance(&residuals, sigma_div);
    let se = |c: usize| cov[(c, c)].sqrt();
    let n = y_n;
    let (beta, beta_se, rho, rho_se, alpha, alpha_se) = match options.mode {
        EffectsMode::Homogeneous => (
            Matrix::from_fn(1, r, |_, k| theta[k]),
            Matrix::from_fn(1, r, |_, k| se(k)),
            DVector::from_fn(n, |i, _| theta[r + i]),
            DVector::from_fn(n, |i, _| se(r + i)),
            DVector::from_fn(n, |i, _| theta[r + n + i]),
            DVector::from_fn(n, |i, _| se(r + n + i)),
        ),
        EffectsMode::Heterogeneous => {
            let w = r + 2;
            (
                Matrix::from_fn(n, r, |i, k| theta[i * w + k]),
                Matrix::from_fn(n, r, |i, k| se(i * w + k)),
                DVector::from_fn(n, |i, _| theta[i * w + r]),
                DVector::from_fn(n, |i, _| se(i * w + r)),
                DVector::from_fn(n, |i, _| theta[i * w + r + 1]),
                DVector::from_fn(n, |i, _| se(i * w + r + 1)),
            )
        }
    };
    let dropped_columns = (0..p)
        .filter(|c| !keep.contains(c))
        .map(|c| sys.names[c].clone())
        .collect();
    FnarFit {
        mode: options.mode,
        estimator: options.estimator,
        coefficients: Coefficients { beta, rho, alpha },
        beta_se,
        rho_se,
        alpha_se,
        theta,
        theta_cov: cov,
        column_names: sys.names.clone(),
        dropped_columns,
        sigma_nu,
        residuals,
        fitted,
        dof_divisor: sigma_div,
    }
}

fn kept_columns(sys: &System) -> Vec<usize> {
    let p = sys.names.len();
    (0..p)
        .filter(|&c| !sys.droppable[c] || sys.designs.iter().any(|x| x.column(c).iter().any(|&v| v != 0.0)))
        .collect()
}

/// Sandwich `G^{-1} (sum X' S X) G^{-1}` for OLS with residual covariance `S`.
fn ols_covariance(sys: &System, keep: &[usize], gram_inv: &Matrix, sigma: &Matrix) -> Matrix {
    let p = keep.len();
    let mut meat = Matrix::zeros(p, p);
    for x_full in &sys.designs {
        let x = select_columns(x_full, keep);
        meat += x.tr_mul(&(sigma * &x));
    }
    gram_inv * meat * gram_inv
}

/// General entry point.
pub fn fit(y: &PanelSeries, factors: &[Tensor3], options: &FitOptions) -> Result<FnarFit> {
    let sys = assemble(y, factors, options.mode)?;
    let n = y.n_nodes();
    let r = factors[0].dims()[2];
    let keep = kept_columns(&sys);
    let t = sys.targets.len();
    let sigma_div = divisor(options.dof, t, n, keep.len())?;
    let (mut theta, gram_inv) = solve_normal_equations(&sys, &keep, None)?;
    let mut theta_full = DVector::zeros(sys.names.len());
    let scatter = |theta_kept: &DVector<f64>, full: &mut DVector<f64>| {
        for (a, &c) in keep.iter().enumerate() {
            full[c] = theta_kept[a];
        }
    };
    scatter(&theta, &mut theta_full);
    let (resid, _) = residuals_for(&sys, &theta_full);
    let mut sigma = residual_covariance(&resid, sigma_div);
    let cov = match options.estimator {
        Estimator::Ols => match options.mode {
            // pooled: sigma^2 (sum X'X)^{-1} with sigma^2 the average residual variance
            EffectsMode::Homogeneous => &gram_inv * (sigma.trace() / n as f64),
            // block-diagonal design: per-equation sigma_ii (X_i'X_i)^{-1}
            EffectsMode::Heterogeneous => ols_covariance(&sys, &keep, &gram_inv, &sigma),
        },
        Estimator::Sur { max_iter } => {
            let mut cov = Matrix::zeros(0, 0);
            for _ in 0..max_iter.max(1) {
                let (winv, s) = gls_weight(&sigma)?;
                let (th, inv) = solve_normal_equations(&sys, &keep, Some(&winv))?;
                theta = th;
                cov = inv * s;
                scatter(&theta, &mut theta_full);
                let (resid, _) = residuals_for(&sys, &theta_full);
                sigma = residual_covariance(&resid, sigma_div);
            }
            cov
        }
    };
    Ok(finish(&sys, n, r, options, &keep, theta, cov, sigma_div))
}

/// GLS with a fixed, caller-supplied residual covariance.
pub fn fit_with_covariance(
    y: &PanelSeries,
    factors: &[Tensor3],
    mode: EffectsMode,
    sigma: &Matrix,
) -> Result<FnarFit> {
    let options = FitOptions {
        estimator: Estimator::sur(),
        mode,
        dof: DofDivisor::default(),
    };
    let sys = assemble(y, factors, mode)?;
    let n = y.n_nodes();
    if sigma.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "covariance {:?} for {n} nodes",
            sigma.shape()
        )));
    }
    let keep = kept_columns(&sys);
    let sigma_div = divisor(options.dof, sys.targets.len(), n, keep.len())?;
    let (winv, s) = gls_weight(sigma)?;
    let (theta, inv) = solve_normal_equations(&sys, &keep, Some(&winv))?;
    Ok(finish(
        &sys,
        n,
        factors[0].dims()[2],
        &options,
        &keep,
        theta,
        inv * s,
        sigma_div,
    ))
}

pub fn fit_ols(y: &PanelSeries, factors: &[Tensor3]) -> Result<FnarFit> {
    fit(y, factors, &FitOptions::default())
}

pub fn fit_sur(y: &PanelSeries, factors: &[Tensor3], max_iter: usize) -> Result<FnarFit> {
    fit(
        y,
        factors,
        &FitOptions {
            estimator: Estimator::Sur { max_iter },
            ..FitOptions::default()
        },
    )
}

/// Node-specific network effects. Network columns that are identically zero
/// (e.g. a single node, whose factor rows are all diagonal) are fixed at 0.
pub fn fit_heterogeneous(y: &PanelSeries, factors: &[Tensor3], estimator: Estimator) -> Result<FnarFit> {
    fit(
        y,
        factors,
        &FitOptions {
            estimator,
            mode: EffectsMode::Heterogeneous,
            dof: DofDivisor::default(),
        },
    )
}

/// Layer-level effects `b = U M^{-1} beta`, so that
/// `W_hat x_2 y' x_3 b' = F x_2 y' x_3 beta'`.
pub fn rescale_to_layers(fit: &FnarFit, model: &FactorModel) -> Result<DVector<f64>> {
    let beta = fit
        .beta()
        .ok_or_else(|| Error::InvalidArgument("layer rescaling needs a homogeneous fit".into()))?;
    if beta.len() != model.r() {
        return Err(Error::DimensionMismatch(format!(
            "{} coefficients for {} factors",
            beta.len(),
            model.r()
        )));
    }
    let scaled = DVector::from_fn(beta.len(), |k, _| beta[k] / model.eigenvalues()[k]);
    Ok(model.loadings() * scaled)
}

/// One-step-ahead forecast `y_{T+1}` from `y_T` and `F_T`.
pub fn forecast_one_step(
    fit: &FnarFit,
    y_last: &DVector<f64>,
    factors_last: &Tensor3,
) -> Result<DVector<f64>> {
    fit.coefficients.step(y_last, factors_last)
}
