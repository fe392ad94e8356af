//! Network factors by principal components along the layer mode.
//!
//! Given weight tensors `W_t` (`N x N x m`), the estimator
//!
//! 1. forms the cross-layer Gram matrix `G = (1/T) sum_t mat_3(W_t) mat_3(W_t)'`,
//! 2. takes its `r` leading eigenpairs `(mu_j, v_j)` and sets the loadings
//!    `U = V diag(mu)^{1/2}`,
//! 3. projects every period onto them, `F_t = W_t x_3 (diag(mu)^{-1/2} V')`.
//!
//! `W_t` is neither demeaned nor standardized over time. The factors satisfy
//! `(1/T) sum_t mat_3(F_t) mat_3(F_t)' = I_r` in sample, keep the zero
//! diagonals of `W_t` and, when every layer is row-normalized, have rows that
//! all sum to the same constant. Factors and loadings are identified up to a
//! column sign; here each loading column is flipped so that its entry of
//! largest magnitude is positive.

use nalgebra::{DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::netweights::{PanelLabels, WeightPanel};
use crate::par::Exec;
use crate::tensor3::{Matrix, Tensor3};

/// Eigenvalues below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// How loading column signs were fixed.
#[derive(Debug, Clone, PartialEq)]
pub enum SignConvention {
    /// Largest-magnitude entry of each loading column is positive.
    LargestEntryPositive,
    /// Flipped so that `diag(U' U_ref)` is positive for a reference `U_ref`.
    AlignedToReference,
    /// Supplied from outside (e.g. a simulated truth).
    External,
}

/// Estimated (or simulated) network-factor model.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    loadings: Matrix,
    eigenvalues: Vec<f64>,
    spectrum: Vec<f64>,
    factors: Vec<Tensor3>,
    labels: Option<PanelLabels>,
    sign_convention: SignConvention,
}

/// Idiosyncratic part `E_t = W_t - F_t x_3 U` of each period.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualPanel {
    pub tensors: Vec<Tensor3>,
}

impl FactorModel {
    /// Builds a model from given loadings (`m x r`), the diagonal of `M`
    /// and the factor series. Used for simulated ground truth.
    pub fn new(loadings: Matrix, eigenvalues: Vec<f64>, factors: Vec<Tensor3>) -> Result<Self> {
        let r = loadings.ncols();
        if eigenvalues.len() != r || r == 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} eigenvalues for {r} loading columns",
                eigenvalues.len()
            )));
        }
        if eigenvalues.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidArgument("eigenvalues must be positive".into()));
        }
        let n = factors
            .first()
            .ok_or_else(|| Error::InsufficientData("no factor periods".into()))?
            .dims()[0];
        if let Some(f) = factors.iter().find(|f| f.dims() != [n, n, r]) {
            return Err(Error::DimensionMismatch(format!(
                "factor tensor of dims {:?}, expected {:?}",
                f.dims(),
                [n, n, r]
            )));
        }
        Ok(Self {
            loadings,
            spectrum: eigenvalues.clone(),
            eigenvalues,
            factors,
            labels: None,
            sign_convention: SignConvention::External,
        })
    }

    pub fn r(&self) -> usize {
        self.loadings.ncols()
    }

    pub fn n_layers(&self) -> usize {
        self.loadings.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.factors[0].dims()[0]
    }

    pub fn n_periods(&self) -> usize {
        self.factors.len()
    }

    /// `U`, `m x r`.
    pub fn loadings(&self) -> &Matrix {
        &self.loadings
    }

    /// Leading `r` eigenvalues, nonincreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// All eigenvalues of the layer Gram matrix, nonincreasing.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn factors(&self) -> &[Tensor3] {
        &self.factors
    }

    pub fn labels(&self) -> Option<&PanelLabels> {
        self.labels.as_ref()
    }

    pub fn sign_convention(&self) -> &SignConvention {
        &self.sign_convention
    }

    /// Unit-norm eigenvectors `V = U diag(mu)^{-1/2}`.
    pub fn eigenvectors(&self) -> Matrix {
        let mut v = self.loadings.clone();
        for (k, &mu) in self.eigenvalues.iter().enumerate() {
            v.column_mut(k).scale_mut(1.0 / mu.sqrt());
        }
        v
    }

    /// `M^{-1} U'`, the `r x m` map from layers to factors.
    pub fn projection(&self) -> Matrix {
        let mut p = self.loadings.transpose();
        for (k, &mu) in self.eigenvalues.iter().enumerate() {
            p.row_mut(k).scale_mut(1.0 / mu);
        }
        p
    }

    /// Factor tensor of an arbitrary weight tensor, `W x_3 (M^{-1} U')`.
    pub fn project(&self, w: &Tensor3) -> Result<Tensor3> {
        w.mode_mul(3, &self.projection())
    }

    /// Common component `F_t x_3 U` of period `t`.
    pub fn reconstruct(&self, t: usize) -> Tensor3 {
        self.factors[t]
            .mode_mul(3, &self.loadings)
            .expect("loadings match factor count")
    }

    /// Same model with loading columns and factor slices flipped where
    /// `flip[k]` is set. Reconstructions are unchanged.
    pub fn with_flipped(&self, flip: &[bool]) -> Self {
        assert_eq!(flip.len(), self.r());
        let signs: Vec<f64> = flip.iter().map(|&f| if f { -1.0 } else { 1.0 }).collect();
        let mut loadings = self.loadings.clone();
        for (k, &s) in signs.iter().enumerate() {
            loadings.column_mut(k).scale_mut(s);
        }
        let factors = self
            .factors
            .iter()
            .map(|f| Tensor3::from_fn(f.dims(), |i, j, k| signs[k] * f.get(i, j, k)))
            .collect();
        Self {
            loadings,
            factors,
            ..self.clone()
        }
    }

    /// Flips columns so that `diag(U' reference)` is nonnegative.
    pub fn aligned_to(&self, reference: &Matrix) -> Result<Self> {
        let signs = alignment_signs(&self.loadings, reference)?;
        let flip: Vec<bool> = signs.iter().map(|&s| s < 0.0).collect();
        Ok(Self {
            sign_convention: SignConvention::AlignedToReference,
            ..self.with_flipped(&flip)
        })
    }

    pub fn with_labels(mut self, labels: PanelLabels) -> Self {
        self.labels = Some(labels);
        self
    }
}

/// Signs `s_k = sign((estimated' reference)_kk)` (+1 on ties), i.e. the
/// diagonal of the sign matrix `J` with `estimated ~ reference J`.
pub fn alignment_signs(estimated: &Matrix, reference: &Matrix) -> Result<Vec<f64>> {
    if estimated.shape() != reference.shape() {
        return Err(Error::DimensionMismatch(format!(
            "loadings {:?} vs reference {:?}",
            estimated.shape(),
            reference.shape()
        )));
    }
    Ok((0..estimated.ncols())
        .map(|k| {
            if estimated.column(k).dot(&reference.column(k)) < 0.0 {
                -1.0
            } else {
                1.0
            }
        })
        .collect())
}

fn check_panel(tensors: &[Tensor3]) -> Result<[usize; 3]> {
    let dims = tensors
        .first()
        .ok_or_else(|| Error::InsufficientData("no periods".into()))?
        .dims();
    if let Some(w) = tensors.iter().find(|w| w.dims() != dims) {
        return Err(Error::DimensionMismatch(format!(
            "tensor of dims {:?} in a panel of {dims:?}",
            w.dims()
        )));
    }
    Ok(dims)
}

/// `(1/T) sum_t mat_3(W_t) mat_3(W_t)'`.
pub fn gram_mode3(tensors: &[Tensor3]) -> Result<Matrix> {
    gram_mode3_with(tensors, Exec::default())
}

const GRAM_CHUNK: usize = 16;

pub fn gram_mode3_with(tensors: &[Tensor3], exec: Exec) -> Result<Matrix> {
    let [d1, d2, m] = check_panel(tensors)?;
    let chunks: Vec<&[Tensor3]> = tensors.chunks(GRAM_CHUNK).collect();
    let partial = exec.map(chunks.len(), |c| {
        let mut g = Matrix::zeros(m, m);
        for w in chunks[c] {
            let flat = Matrix::from_column_slice(d1 * d2, m, w.as_slice());
            g += flat.tr_mul(&flat);
        }
        g
    });
    let mut gram = partial.into_iter().fold(Matrix::zeros(m, m), |acc, g| acc + g);
    gram /= tensors.len() as f64;
    // exact symmetry
    for i in 0..m {
        for j in 0..i {
            let v = 0.5 * (gram[(i, j)] + gram[(j, i)]);
            gram[(i, j)] = v;
            gram[(j, i)] = v;
        }
    }
    Ok(gram)
}

/// Eigenpairs sorted by descending eigenvalue, ties kept in original order.
pub fn sorted_eigen(sym: &Matrix) -> (Vec<f64>, Matrix) {
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Matrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<DVector<f64>>>(),
    );
    (values, vectors)
}

fn numerical_rank(spectrum: &[f64]) -> usize {
    match spectrum.first() {
        Some(&top) if top > 0.0 => spectrum.iter().filter(|&&v| v >= RANK_TOLERANCE * top).count(),
        _ => 0,
    }
}

/// Estimates an `r`-factor model on raw tensors (synthetic labels).
pub fn estimate_factors(tensors: &[Tensor3], r: usize) -> Result<(FactorModel, ResidualPanel)> {
    estimate_factors_with(tensors, r, Exec::default())
}

pub fn estimate_factors_with(
    tensors: &[Tensor3],
    r: usize,
    exec: Exec,
) -> Result<(FactorModel, ResidualPanel)> {
    let [_, _, m] = check_panel(tensors)?;
    if r == 0 || r > m {
        return Err(Error::InvalidArgument(format!(
            "number of factors must be in 1..={m}, got {r}"
        )));
    }
    let gram = gram_mode3_with(tensors, exec)?;
    let (spectrum, vectors) = sorted_eigen(&gram);
    let rank = numerical_rank(&spectrum);
    if r > rank {
        return Err(Error::RankExceeded {
            requested: r,
            available: rank,
        });
    }
    let mut v = vectors.columns(0, r).into_owned();
    for k in 0..r {
        let col = v.column(k);
        let lead = col
            .iter()
            .enumerate()
            .fold(
                (0, 0.0f64),
                |best, (i, &x)| if x.abs() > best.1.abs() { (i, x) } else { best },
            )
            .0;
        if col[lead] < 0.0 {
            v.column_mut(k).neg_mut();
        }
    }
    let eigenvalues: Vec<f64> = spectrum[..r].to_vec();
    let mut loadings = v.clone();
    let mut projection = v.transpose();
    for (k, &mu) in eigenvalues.iter().enumerate() {
        loadings.column_mut(k).scale_mut(mu.sqrt());
        projection.row_mut(k).scale_mut(1.0 / mu.sqrt());
    }
    let pairs = exec.map(tensors.len(), |t| -> Result<(Tensor3, Tensor3)> {
        let f = tensors[t].mode_mul(3, &projection)?;
        let e = tensors[t].sub(&f.mode_mul(3, &loadings)?)?;
        Ok((f, e))
    });
    let (factors, residuals): (Vec<_>, Vec<_>) =
        pairs.into_iter().collect::<Result<Vec<_>>>()?.into_iter().unzip();
    Ok((
        FactorModel {
            loadings,
            eigenvalues,
            spectrum,
            factors,
            labels: None,
            sign_convention: SignConvention::LargestEntryPositive,
        },
        ResidualPanel { tensors: residuals },
    ))
}

/// Estimates an `r`-factor model on a labelled panel.
pub fn estimate_factor_model(panel: &WeightPanel, r: usize) -> Result<(FactorModel, ResidualPanel)> {
    let (model, resid) = estimate_factors(panel.tensors(), r)?;
    Ok((model.with_labels(panel.labels().clone()), resid))
}

/// Outcome of the eigenvalue-ratio rank selection.
#[derive(Debug, Clone, PartialEq)]
pub struct RankSelection {
    pub rank: usize,
    /// `mu_j / mu_{j+1}` for `j = 1..=r_max` (eigenvalues floored at the
    /// rank tolerance).
    pub ratios: Vec<f64>,
    /// All eigenvalues equal; rank 1 returned by convention.
    pub degenerate: bool,
}

/// Picks `argmax_{j <= r_max} mu_j / mu_{j+1}` on a nonincreasing spectrum.
/// Ties go to the smaller `j`.
pub fn eigenvalue_ratio_rank(spectrum: &[f64], r_max: usize) -> Result<RankSelection> {
    if r_max == 0 || r_max >= spectrum.len() {
        return Err(Error::InvalidArgument(format!(
            "r_max must be in 1..{}, got {r_max}",
            spectrum.len()
        )));
    }
    let top = spectrum[0];
    if !(top > 0.0) {
        return Ok(RankSelection {
            rank: 1,
            ratios: vec![1.0; r_max],
            degenerate: true,
        });
    }
    let floor = RANK_TOLERANCE * top;
    let ratios: Vec<f64> = (0..r_max)
        .map(|j| spectrum[j].max(floor) / spectrum[j + 1].max(floor))
        .collect();
    let degenerate = spectrum.iter().all(|&v| (v - top).abs() <= RANK_TOLERANCE * top);
    if degenerate {
        log::warn!("degenerate layer spectrum; rank selection defaults to 1");
        return Ok(RankSelection {
            rank: 1,
            ratios,
            degenerate,
        });
    }
    let mut best = 0;
    for j in 1..r_max {
        if ratios[j] > ratios[best] {
            best = j;
        }
    }
    Ok(RankSelection {
        rank: best + 1,
        ratios,
        degenerate,
    })
}

/// Eigenvalue-ratio rank selection on the panel's layer Gram matrix.
pub fn select_rank(panel: &WeightPanel, r_max: usize) -> Result<RankSelection> {
    if r_max >= panel.n_layers() {
        return Err(Error::InvalidArgument(format!(
            "r_max must be below the number of layers ({}), got {r_max}",
            panel.n_layers()
        )));
    }
    let (spectrum, _) = sorted_eigen(&gram_mode3(panel.tensors())?);
    eigenvalue_ratio_rank(&spectrum, r_max)
}

/// Shares of `||W||^2` (stacked over layers and periods) explained by the
/// common component and by each factor.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceShares {
    pub total: f64,
    pub per_factor: Vec<f64>,
}

fn check_model_fits(tensors: &[Tensor3], model: &FactorModel) -> Result<()> {
    let dims = check_panel(tensors)?;
    let expected = [model.n_nodes(), model.n_nodes(), model.n_layers()];
    if dims != expected || tensors.len() != model.n_periods() {
        return Err(Error::DimensionMismatch(format!(
            "panel of {} x {dims:?} vs model of {} x {expected:?}",
            tensors.len(),
            model.n_periods()
        )));
    }
    Ok(())
}

pub fn variance_explained(panel: &WeightPanel, model: &FactorModel) -> Result<VarianceShares> {
    let tensors = panel.tensors();
    check_model_fits(tensors, model)?;
    let total_ss: f64 = tensors.iter().map(Tensor3::squared_norm).sum();
    if total_ss == 0.0 {
        return Err(Error::InvalidArgument("panel is identically zero".into()));
    }
    let fitted_ss: f64 = (0..model.n_periods())
        .map(|t| model.reconstruct(t).squared_norm())
        .sum();
    let [n, _, r] = model.factors[0].dims();
    // ||F_kt outer U_k||^2 = ||F_kt||^2 ||U_k||^2
    let per_factor = (0..r)
        .map(|k| {
            let uk = model.loadings.column(k).norm_squared();
            let fk: f64 = model
                .factors
                .iter()
                .map(|f| {
                    f.as_slice()[k * n * n..(k + 1) * n * n]
                        .iter()
                        .map(|v| v * v)
                        .sum::<f64>()
                })
                .sum();
            uk * fk / total_ss
        })
        .collect();
    Ok(VarianceShares {
        total: fitted_ss / total_ss,
        per_factor,
    })
}

/// Share of the variance of link `(i, j)` (0-based, over layers and
/// periods) explained by each factor. `Ok(None)` when the link is
/// identically zero.
pub fn variance_explained_link(
    panel: &WeightPanel,
    model: &FactorModel,
    i: usize,
    j: usize,
) -> Result<Option<Vec<f64>>> {
    let tensors = panel.tensors();
    check_model_fits(tensors, model)?;
    let n = model.n_nodes();
    if i >= n || j >= n {
        return Err(Error::InvalidArgument(format!("link ({i}, {j}) out of range")));
    }
    if i == j {
        return Err(Error::InvalidArgument(format!("link ({i}, {i}) is a self-loop")));
    }
    let m = model.n_layers();
    let denom: f64 = tensors
        .iter()
        .map(|w| (0..m).map(|l| w.get(i, j, l).powi(2)).sum::<f64>())
        .sum();
    if denom == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        (0..model.r())
            .map(|k| {
                let uk = model.loadings.column(k).norm_squared();
                let fk: f64 = model.factors.iter().map(|f| f.get(i, j, k).powi(2)).sum();
                uk * fk / denom
            })
            .collect(),
    ))
}

/// A node pair and the share of its variance explained by one factor.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkShare {
    pub from: usize,
    pub to: usize,
    pub share: f64,
}

/// For every factor, the `count` links with the largest explained share.
pub fn top_links(panel: &WeightPanel, model: &FactorModel, count: usize) -> Result<Vec<Vec<LinkShare>>> {
    let n = model.n_nodes();
    let mut per_factor: Vec<Vec<LinkShare>> = vec![Vec::new(); model.r()];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            if let Some(shares) = variance_explained_link(panel, model, i, j)? {
                for (k, share) in shares.into_iter().enumerate() {
                    per_factor[k].push(LinkShare {
                        from: i,
                        to: j,
                        share,
                    });
                }
            }
        }
    }
    for links in &mut per_factor {
        links.sort_by(|a, b| b.share.partial_cmp(&a.share).unwrap_or(std::cmp::Ordering::Equal));
        links.truncate(count);
    }
    Ok(per_factor)
}

/// Row-sum statistics of one factor over all rows and periods.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorRowSums {
    /// Mean row sum (the common value when rows agree).
    pub row_sum: f64,
    /// Mean over rows and periods of the row sum of absolute values.
    pub avg_abs_row_sum: f64,
    /// Mean over rows and periods of the row sum of squares.
    pub avg_sq_row_sum: f64,
    /// Largest deviation of any single row sum from `row_sum`.
    pub max_deviation: f64,
}

impl FactorRowSums {
    pub fn is_common(&self, tol: f64) -> bool {
        self.max_deviation <= tol
    }
}

pub fn factor_row_sums(model: &FactorModel) -> Vec<FactorRowSums> {
    let n = model.n_nodes();
    let count = (n * model.n_periods()) as f64;
    (0..model.r())
        .map(|k| {
            let mut sums = Vec::with_capacity(n * model.n_periods());
            let (mut abs_total, mut sq_total) = (0.0, 0.0);
            for f in &model.factors {
                for i in 0..n {
                    let row: Vec<f64> = (0..n).map(|j| f.get(i, j, k)).collect();
                    sums.push(row.iter().sum::<f64>());
                    abs_total += row.iter().map(|v| v.abs()).sum::<f64>();
                    sq_total += row.iter().map(|v| v * v).sum::<f64>();
                }
            }
            let row_sum = sums.iter().sum::<f64>() / count;
            let max_deviation = sums.iter().map(|s| (s - row_sum).abs()).fold(0.0, f64::max);
            FactorRowSums {
                row_sum,
                avg_abs_row_sum: abs_total / count,
                avg_sq_row_sum: sq_total / count,
                max_deviation,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn appendix_tensor() -> Tensor3 {
        Tensor3::new([3, 4, 2], (1..=24).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn gram_of_worked_example() {
        let g = gram_mode3(&[appendix_tensor()]).unwrap();
        assert_eq!(g, Matrix::from_row_slice(2, 2, &[650.0, 1586.0, 1586.0, 4250.0]));
        let g2 = gram_mode3(&[appendix_tensor(), appendix_tensor()]).unwrap();
        assert_eq!(g, g2);
        assert_eq!(
            gram_mode3(&[Tensor3::zeros([2, 2, 3])]).unwrap(),
            Matrix::zeros(3, 3)
        );
    }

    #[test]
    fn gram_is_order_and_policy_independent() {
        let ts: Vec<Tensor3> = (0..40)
            .map(|t| Tensor3::from_fn([3, 3, 4], |i, j, k| ((i + 2 * j + 3 * k + t) % 7) as f64 * 0.1))
            .collect();
        assert_eq!(
            gram_mode3_with(&ts, Exec::Sequential).unwrap(),
            gram_mode3_with(&ts, Exec::Parallel).unwrap()
        );
    }

    #[test]
    fn rank_errors() {
        let w = Tensor3::from_fn([3, 3, 4], |i, j, _| if i == j { 0.0 } else { 1.0 });
        assert!(matches!(
            estimate_factors(std::slice::from_ref(&w), 2),
            Err(Error::RankExceeded {
                requested: 2,
                available: 1
            })
        ));
        assert!(estimate_factors(std::slice::from_ref(&w), 0).is_err());
        assert!(estimate_factors(&[w], 5).is_err());
        assert!(matches!(
            estimate_factors(&[Tensor3::zeros([2, 2, 2])], 1),
            Err(Error::RankExceeded { available: 0, .. })
        ));
    }

    #[test]
    fn spectrum_ratio_selection() {
        let s = eigenvalue_ratio_rank(&[4.0, 2.0, 1.0, 0.9, 0.8], 3).unwrap();
        assert_eq!(s.rank, 1);
        assert_eq!(s.ratios[0], 2.0);
        let s = eigenvalue_ratio_rank(&[10.0, 9.0, 8.0, 0.1, 0.09], 4).unwrap();
        assert_eq!(s.rank, 3);
        let s = eigenvalue_ratio_rank(&[2.0, 2.0, 2.0], 2).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.rank, 1);
        assert!(eigenvalue_ratio_rank(&[2.0, 1.0], 2).is_err());
    }

    #[test]
    fn sign_convention_puts_largest_entry_positive() {
        let ts: Vec<Tensor3> = (0..5)
            .map(|t| {
                Tensor3::from_fn([3, 3, 3], |i, j, k| {
                    if i == j {
                        0.0
                    } else {
                        -((1 + i + j * k + t) as f64) * [1.0, -2.0, 0.5][k]
                    }
                })
            })
            .collect();
        let (model, _) = estimate_factors(&ts, 2).unwrap();
        for k in 0..2 {
            let col = model.loadings().column(k);
            let max = col
                .iter()
                .fold(0.0f64, |a, &b| if b.abs() > a.abs() { b } else { a });
            assert!(max > 0.0);
        }
    }

    #[test]
    fn link_errors() {
        let ts: Vec<Tensor3> = (0..4)
            .map(|t| {
                Tensor3::from_fn([3, 3, 3], |i, j, k| {
                    if i == j || (i, j) == (2, 0) {
                        0.0
                    } else {
                        (1 + i + j + k * t) as f64
                    }
                })
            })
            .collect();
        let panel = WeightPanel::from_tensors(ts).unwrap();
        let (model, _) = estimate_factor_model(&panel, 2).unwrap();
        assert!(variance_explained_link(&panel, &model, 1, 1).is_err());
        assert_eq!(variance_explained_link(&panel, &model, 2, 0).unwrap(), None);
        assert!(variance_explained_link(&panel, &model, 0, 1).unwrap().is_some());
    }

    #[test]
    fn equal_off_diagonal_factor_row_sum() {
        let c = 0.25;
        let f = Tensor3::from_fn([4, 4, 1], |i, j, _| if i == j { 0.0 } else { c });
        let model = FactorModel::new(Matrix::from_element(3, 1, 1.0), vec![3.0], vec![f.clone(), f]).unwrap();
        let rs = &factor_row_sums(&model)[0];
        assert!((rs.row_sum - 3.0 * c).abs() < 1e-15);
        assert_eq!(rs.avg_abs_row_sum, rs.row_sum);
        assert!(rs.is_common(1e-12));
    }
}
