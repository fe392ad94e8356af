//! Synthetic panels and the convergence-rate experiments.
//!
//! Data-generating process:
//! - factor slices have i.i.d. Gaussian off-diagonal entries and are then
//!   orthonormalized in sample, `(1/T) sum_t F_(3)t F_(3)t' = I_r`;
//! - loadings are orthogonal columns with `U'U = m diag(r, r-1, .., 1)`, so
//!   the eigenvalues of the population Gram are distinct and grow with `m`;
//! - idiosyncratic noise is Gaussian on off-diagonals, optionally AR(1)
//!   correlated along the layer index;
//! - `y` follows the FNAR with equicorrelated Gaussian shocks.
//!
//! Generated weights are *not* row-normalized: the factor structure, not the
//! share normalization, is what the experiments exercise.

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bootstrap::covariance_root;
use crate::error::{Error, Result};
use crate::model::{self, Coefficients, FitOptions, PanelSeries};
use crate::netfactors::{alignment_signs, estimate_factors_with, FactorModel};
use crate::netweights::{PanelLabels, WeightPanel};
use crate::par::Exec;
use crate::tensor3::{Matrix, Tensor3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub r: usize,
    pub t: usize,
    /// Standard deviation of the idiosyncratic weight noise.
    pub noise_sd: f64,
    /// AR(1) correlation of the noise along the layer index, `|phi| < 1`.
    pub layer_corr: f64,
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    pub alpha: Vec<f64>,
    pub shock_sd: f64,
    /// Common correlation of the FNAR shocks across nodes.
    pub shock_corr: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    /// A stable default FNAR: `beta_k = 0.5 / k`, `rho_i` spread over
    /// `[0.2, 0.5]`, small positive intercepts.
    pub fn new(n: usize, m: usize, r: usize, t: usize) -> Self {
        let spread = |i: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        Self {
            n,
            m,
            r,
            t,
            noise_sd: 0.01,
            layer_corr: 0.0,
            beta: (1..=r).map(|k| 0.5 / k as f64).collect(),
            rho: (0..n).map(|i| 0.2 + 0.3 * spread(i)).collect(),
            alpha: (0..n).map(|i| 0.1 + 0.1 * spread(i)).collect(),
            shock_sd: 1.0,
            shock_corr: 0.3,
            seed: 0,
        }
    }

    pub fn coefficients(&self) -> Coefficients {
        Coefficients::homogeneous(&self.beta, &self.rho, &self.alpha)
    }

    /// Equicorrelated shock covariance.
    pub fn shock_covariance(&self) -> Matrix {
        let v = self.shock_sd * self.shock_sd;
        Matrix::from_fn(
            self.n,
            self.n,
            |i, j| if i == j { v } else { v * self.shock_corr },
        )
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.r == 0 || self.r > self.m || self.t < 2 {
            return Err(Error::InvalidArgument(format!(
                "need n, m >= 1, 1 <= r <= m and t >= 2 (n={}, m={}, r={}, t={})",
                self.n, self.m, self.r, self.t
            )));
        }
        if self.beta.len() != self.r || self.rho.len() != self.n || self.alpha.len() != self.n {
            return Err(Error::DimensionMismatch(
                "coefficient lengths do not match (n, r)".into(),
            ));
        }
        if self.layer_corr.abs() >= 1.0 || self.noise_sd < 0.0 || self.shock_sd < 0.0 {
            return Err(Error::InvalidArgument("noise parameters out of range".into()));
        }
        let lower = if self.n > 1 {
            -1.0 / (self.n - 1) as f64
        } else {
            -1.0
        };
        if !(self.shock_corr > lower && self.shock_corr < 1.0) && self.shock_sd > 0.0 {
            return Err(Error::InvalidArgument(format!(
                "shock correlation {} not positive definite",
                self.shock_corr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub panel: WeightPanel,
    pub y: PanelSeries,
    pub truth: FactorModel,
    pub theta: Coefficients,
    pub sigma_nu: Matrix,
}

/// Spectral radius of a square matrix.
pub fn spectral_radius(b: &Matrix) -> f64 {
    b.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Factor series with `(1/T) sum F_(3) F_(3)' = I_r` exactly.
fn sample_factors(rng: &mut ChaCha8Rng, n: usize, r: usize, t: usize) -> Result<Vec<Tensor3>> {
    let raw: Vec<Tensor3> = (0..t)
        .map(|_| Tensor3::from_fn([n, n, r], |i, j, _| if i == j { 0.0 } else { gaussian(rng) }))
        .collect();
    let mut g = Matrix::zeros(r, r);
    for f in &raw {
        let flat = f.mat(3)?;
        g += &flat * flat.transpose();
    }
    g /= t as f64;
    let eig = SymmetricEigen::new(g);
    if eig.eigenvalues.min() <= 0.0 {
        return Err(Error::Singular("factor sample Gram is singular".into()));
    }
    let mut inv_root = eig.eigenvectors.clone();
    for (k, &mu) in eig.eigenvalues.iter().enumerate() {
        inv_root.column_mut(k).scale_mut(1.0 / mu.sqrt());
    }
    let inv_root = &inv_root * eig.eigenvectors.transpose();
    raw.iter().map(|f| f.mode_mul(3, &inv_root)).collect()
}

/// Orthogonal loadings, column `k` of squared norm `m (r - k)`.
fn sample_loadings(rng: &mut ChaCha8Rng, m: usize, r: usize) -> (Matrix, Vec<f64>) {
    let z = Matrix::from_fn(m, r, |_, _| gaussian(rng));
    let mut q = z.qr().q();
    let mut eigenvalues = Vec::with_capacity(r);
    for k in 0..r {
        let mu = (m * (r - k)) as f64;
        q.column_mut(k).scale_mut(mu.sqrt());
        eigenvalues.push(mu);
    }
    (q, eigenvalues)
}

fn sample_noise(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> Tensor3 {
    let (n, m) = (spec.n, spec.m);
    let phi = spec.layer_corr;
    let innov = (1.0 - phi * phi).sqrt();
    let mut data = vec![0.0; n * n * m];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut e = gaussian(rng);
            for l in 0..m {
                if l > 0 {
                    e = phi * e + innov * gaussian(rng);
                }
                data[i + n * (j + n * l)] = spec.noise_sd * e;
            }
        }
    }
    Tensor3::new([n, n, m], data).expect("dims match data")
}

/// Draws a synthetic panel and FNAR series. Deterministic in `spec.seed`.
pub fn generate(spec: &SyntheticSpec) -> Result<Synthetic> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, m, r, t) = (spec.n, spec.m, spec.r, spec.t);
    let theta = spec.coefficients();
    if spectral_radius(&Matrix::from_diagonal(&theta.rho)) >= 1.0 {
        return Err(Error::Unstable("mean transition has spectral radius >= 1".into()));
    }
    let factors = sample_factors(&mut rng, n, r, t)?;
    let (loadings, eigenvalues) = sample_loadings(&mut rng, m, r);
    let tensors: Vec<Tensor3> = factors
        .iter()
        .map(|f| {
            let common = f.mode_mul(3, &loadings)?;
            if spec.noise_sd > 0.0 {
                common.add(&sample_noise(&mut rng, spec))
            } else {
                Ok(common)
            }
        })
        .collect::<Result<_>>()?;
    let truth = FactorModel::new(loadings, eigenvalues, factors)?;

    let sigma_nu = spec.shock_covariance();
    let root = covariance_root(&sigma_nu);
    let mut values = Matrix::zeros(t, n);
    let mut state = DVector::from_fn(n, |i, _| theta.alpha[i] / (1.0 - theta.rho[i]));
    values.row_mut(0).copy_from(&state.transpose());
    for s in 1..t {
        let z = DVector::from_fn(n, |_, _| gaussian(&mut rng));
        state = theta.step(&state, &truth.factors()[s - 1])? + &root * z;
        if state.iter().any(|v| !v.is_finite() || v.abs() > 1e6) {
            return Err(Error::Unstable(format!("simulated path diverged at period {s}")));
        }
        values.row_mut(s).copy_from(&state.transpose());
    }
    let labels = PanelLabels::synthetic(n, m, t);
    let y = PanelSeries::new(labels.periods.clone(), labels.nodes.clone(), values)?;
    let panel = WeightPanel::new(labels, tensors)?;
    Ok(Synthetic {
        panel,
        y,
        truth,
        theta,
        sigma_nu,
    })
}

/// Seed of replication `(cell, rep)` derived from a master seed.
pub fn derive_seed(seed: u64, cell: usize, rep: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((cell as u64) << 32) | rep as u64);
    rng.next_u64()
}

/// Sign-aligned loading error `(1/sqrt(m)) ||U_hat - U J||_F`.
pub fn loading_error(estimated: &FactorModel, truth: &FactorModel) -> Result<f64> {
    let signs = alignment_signs(estimated.loadings(), truth.loadings())?;
    let mut diff = estimated.loadings().clone();
    for (k, s) in signs.iter().enumerate() {
        diff.column_mut(k).axpy(-s, &truth.loadings().column(k), 1.0);
    }
    Ok(diff.norm() / (truth.n_layers() as f64).sqrt())
}

/// Sign-aligned factor error `sqrt((1/T) sum_t ||F_hat_(3)t - J F_(3)t||^2)`.
pub fn factor_error(estimated: &FactorModel, truth: &FactorModel) -> Result<f64> {
    let signs = alignment_signs(estimated.loadings(), truth.loadings())?;
    let mut total = 0.0;
    for (fe, ft) in estimated.factors().iter().zip(truth.factors()) {
        let [_, _, r] = ft.dims();
        let aligned = Tensor3::from_fn(ft.dims(), |i, j, k| signs[k] * ft.get(i, j, k));
        debug_assert_eq!(r, signs.len());
        total += fe.sub(&aligned)?.squared_norm();
    }
    Ok((total / truth.n_periods() as f64).sqrt())
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorErrorCell {
    pub m: usize,
    pub t: usize,
    pub median_loading_error: f64,
    pub median_factor_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRateTable {
    pub cells: Vec<FactorErrorCell>,
    /// Slope of median loading error on `T` at the largest `m`.
    pub loading_slope_t: f64,
    /// Slope of median factor error on `T` at the largest `m`.
    pub factor_slope_t: f64,
    /// Slope of median factor error on `m` at the largest `T`.
    pub factor_slope_m: f64,
}

impl FactorRateTable {
    pub fn cell(&self, m: usize, t: usize) -> Option<&FactorErrorCell> {
        self.cells.iter().find(|c| c.m == m && c.t == t)
    }
}

fn check_grid(values: &[usize], what: &str) -> Result<()> {
    if values.is_empty() || values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "{what} grid must be strictly increasing"
        )));
    }
    Ok(())
}

/// Factor and loading errors over an `m x T` grid. Replications are drawn
/// from `base` with seeds derived from `seed`.
pub fn rate_experiment_factors(
    base: &SyntheticSpec,
    ms: &[usize],
    ts: &[usize],
    reps: usize,
    seed: u64,
    exec: Exec,
) -> Result<FactorRateTable> {
    check_grid(ms, "m")?;
    check_grid(ts, "T")?;
    let grid: Vec<(usize, usize)> = ms.iter().flat_map(|&m| ts.iter().map(move |&t| (m, t))).collect();
    let jobs = grid.len() * reps;
    let errors = exec.map(jobs, |job| -> Result<(f64, f64)> {
        let (cell, rep) = (job / reps, job % reps);
        let (m, t) = grid[cell];
        let spec = SyntheticSpec {
            m,
            t,
            seed: derive_seed(seed, cell, rep),
            ..base.clone()
        };
        let data = generate(&spec)?;
        let (est, _) = estimate_factors_with(data.panel.tensors(), spec.r, Exec::Sequential)?;
        Ok((
            loading_error(&est, &data.truth)?,
            factor_error(&est, &data.truth)?,
        ))
    });
    let errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
    let cells: Vec<FactorErrorCell> = grid
        .iter()
        .enumerate()
        .map(|(c, &(m, t))| {
            let block = &errors[c * reps..(c + 1) * reps];
            let mut le: Vec<f64> = block.iter().map(|e| e.0).collect();
            let mut fe: Vec<f64> = block.iter().map(|e| e.1).collect();
            FactorErrorCell {
                m,
                t,
                median_loading_error: median(&mut le),
                median_factor_error: median(&mut fe),
            }
        })
        .collect();
    let (m_max, t_max) = (*ms.last().unwrap(), *ts.last().unwrap());
    let along_t: Vec<&FactorErrorCell> = cells.iter().filter(|c| c.m == m_max).collect();
    let along_m: Vec<&FactorErrorCell> = cells.iter().filter(|c| c.t == t_max).collect();
    let tx: Vec<f64> = along_t.iter().map(|c| c.t as f64).collect();
    let mx: Vec<f64> = along_m.iter().map(|c| c.m as f64).collect();
    Ok(FactorRateTable {
        loading_slope_t: loglog_slope(
            &tx,
            &along_t.iter().map(|c| c.median_loading_error).collect::<Vec<_>>(),
        ),
        factor_slope_t: loglog_slope(
            &tx,
            &along_t.iter().map(|c| c.median_factor_error).collect::<Vec<_>>(),
        ),
        factor_slope_m: loglog_slope(
            &mx,
            &along_m.iter().map(|c| c.median_factor_error).collect::<Vec<_>>(),
        ),
        cells,
    })
}

/// `theta* = (J beta, rho, alpha)` for the sign matrix `J` of an estimate.
pub fn aligned_truth(theta: &Coefficients, signs: &[f64]) -> DVector<f64> {
    let r = theta.r();
    let n = theta.n_nodes();
    DVector::from_fn(r + 2 * n, |j, _| {
        if j < r {
            signs[j] * theta.beta[(0, j)]
        } else if j < r + n {
            theta.rho[j - r]
        } else {
            theta.alpha[j - r - n]
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaErrorCell {
    pub m: usize,
    pub t: usize,
    /// Median `||theta_hat - theta*||` with estimated factors.
    pub median_error: f64,
    /// Same, fitting on the true factors.
    pub median_error_true_factors: f64,
}

/// FNAR coefficient error along a path of `(m, T)` pairs.
pub fn rate_experiment_theta(
    base: &SyntheticSpec,
    path: &[(usize, usize)],
    reps: usize,
    options: &FitOptions,
    seed: u64,
    exec: Exec,
) -> Result<Vec<ThetaErrorCell>> {
    if path.is_empty() {
        return Err(Error::InvalidArgument("empty (m, T) path".into()));
    }
    let jobs = path.len() * reps;
    let errors = exec.map(jobs, |job| -> Result<(f64, f64)> {
        let (cell, rep) = (job / reps, job % reps);
        let (m, t) = path[cell];
        let spec = SyntheticSpec {
            m,
            t,
            seed: derive_seed(seed, cell, rep),
            ..base.clone()
        };
        let data = generate(&spec)?;
        let (est, _) = estimate_factors_with(data.panel.tensors(), spec.r, Exec::Sequential)?;
        let signs = alignment_signs(est.loadings(), data.truth.loadings())?;
        let fit = model::fit(&data.y, est.factors(), options)?;
        let err = (&fit.theta - aligned_truth(&data.theta, &signs)).norm();
        let fit_true = model::fit(&data.y, data.truth.factors(), options)?;
        let err_true = (&fit_true.theta - aligned_truth(&data.theta, &vec![1.0; spec.r])).norm();
        Ok((err, err_true))
    });
    let errors = errors.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(path
        .iter()
        .enumerate()
        .map(|(c, &(m, t))| {
            let block = &errors[c * reps..(c + 1) * reps];
            let mut e: Vec<f64> = block.iter().map(|e| e.0).collect();
            let mut et: Vec<f64> = block.iter().map(|e| e.1).collect();
            ThetaErrorCell {
                m,
                t,
                median_error: median(&mut e),
                median_error_true_factors: median(&mut et),
            }
        })
        .collect())
}
