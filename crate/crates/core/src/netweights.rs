//! Multilayer weight tensors built from bilateral flow records.
//!
//! A [`FlowRecord`] is a directed value from `reporter` to `partner` in one
//! layer and period: exports from i to j, assets held by i and issued by j,
//! the absolute change in bank claims of i on j, the value of deals with an
//! acquiror in i and a target in j. The weight of node j for node i in layer k
//! is the bilateral total of both directions divided by the row total:
//!
//! ```text
//! W_t(i, j, k) = (x_ijk + x_jik) / sum_h (x_ihk + x_hik),   W_t(i, i, k) = 0
//! ```
//!
//! so imports of i from j enter as exports of j to i. Rows whose total is zero
//! stay zero and are listed in [`WeightPanel::isolated`].

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor3::{Matrix, Tensor3};

/// One directed bilateral value. A NaN `value` marks a missing observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub period: String,
    pub layer: String,
    pub reporter: String,
    pub partner: String,
    pub value: f64,
}

impl FlowRecord {
    pub fn new(period: &str, layer: &str, reporter: &str, partner: &str, value: f64) -> Self {
        Self {
            period: period.into(),
            layer: layer.into(),
            reporter: reporter.into(),
            partner: partner.into(),
            value,
        }
    }

    pub fn is_missing(&self) -> bool {
        self.value.is_nan()
    }
}

/// Ordered node, layer and period labels of a panel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanelLabels {
    pub nodes: Vec<String>,
    pub layers: Vec<String>,
    pub periods: Vec<String>,
}

impl PanelLabels {
    /// Labels `n0.., l0.., t0..` for synthetic panels.
    pub fn synthetic(n: usize, m: usize, t: usize) -> Self {
        Self {
            nodes: (0..n).map(|i| format!("n{i}")).collect(),
            layers: (0..m).map(|k| format!("l{k}")).collect(),
            periods: (0..t).map(|s| format!("t{s}")).collect(),
        }
    }
}

/// Row `node` of layer `layer` in period `period` has zero total flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsolatedRow {
    pub period: usize,
    pub layer: usize,
    pub node: usize,
}

/// Time series of `N x N x m` weight tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightPanel {
    labels: PanelLabels,
    tensors: Vec<Tensor3>,
    isolated: Vec<IsolatedRow>,
    /// Symmetric bilateral totals the weights were normalized from, when known.
    bilateral: Option<Vec<Tensor3>>,
}

impl WeightPanel {
    /// Wraps precomputed tensors. Checks shapes against the labels and that
    /// every frontal slice has a zero diagonal; row sums are not checked
    /// (see [`WeightPanel::row_sum_violations`]).
    pub fn new(labels: PanelLabels, tensors: Vec<Tensor3>) -> Result<Self> {
        let dims = [labels.nodes.len(), labels.nodes.len(), labels.layers.len()];
        if tensors.len() != labels.periods.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} tensors for {} periods",
                tensors.len(),
                labels.periods.len()
            )));
        }
        if tensors.is_empty() {
            return Err(Error::InsufficientData("panel has no periods".into()));
        }
        for (t, w) in tensors.iter().enumerate() {
            if w.dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "tensor {t} has dims {:?}, expected {dims:?}",
                    w.dims()
                )));
            }
            if !w.has_zero_diagonals() {
                return Err(Error::InvalidArgument(format!(
                    "tensor for period {} has a nonzero diagonal",
                    labels.periods[t]
                )));
            }
        }
        Ok(Self {
            labels,
            tensors,
            isolated: Vec::new(),
            bilateral: None,
        })
    }

    /// Panel with synthetic labels.
    pub fn from_tensors(tensors: Vec<Tensor3>) -> Result<Self> {
        let [n, _, m] = tensors
            .first()
            .ok_or_else(|| Error::InsufficientData("panel has no periods".into()))?
            .dims();
        Self::new(PanelLabels::synthetic(n, m, tensors.len()), tensors)
    }

    pub fn labels(&self) -> &PanelLabels {
        &self.labels
    }

    pub fn tensors(&self) -> &[Tensor3] {
        &self.tensors
    }

    pub fn isolated(&self) -> &[IsolatedRow] {
        &self.isolated
    }

    pub fn bilateral(&self) -> Option<&[Tensor3]> {
        self.bilateral.as_deref()
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.nodes.len()
    }

    pub fn n_layers(&self) -> usize {
        self.labels.layers.len()
    }

    pub fn n_periods(&self) -> usize {
        self.tensors.len()
    }

    /// Rows (period, layer, node) whose sum is off 1 by more than `tol`,
    /// ignoring rows flagged isolated, together with the offending sum.
    pub fn row_sum_violations(&self, tol: f64) -> Vec<(IsolatedRow, f64)> {
        let n = self.n_nodes();
        let mut out = Vec::new();
        for (t, w) in self.tensors.iter().enumerate() {
            for k in 0..self.n_layers() {
                for i in 0..n {
                    let row = IsolatedRow {
                        period: t,
                        layer: k,
                        node: i,
                    };
                    let s: f64 = (0..n).map(|j| w.get(i, j, k)).sum();
                    if (s - 1.0).abs() > tol && !self.isolated.contains(&row) {
                        out.push((row, s));
                    }
                }
            }
        }
        out
    }
}

fn index_of(labels: &[String]) -> HashMap<&str, usize> {
    labels.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
}

fn lookup(map: &HashMap<&str, usize>, kind: &'static str, name: &str) -> Result<usize> {
    map.get(name).copied().ok_or_else(|| Error::UnknownLabel {
        kind,
        name: name.to_string(),
    })
}

/// Builds the row-normalized share weights from directed flow records.
///
/// Duplicate records are summed; records with `reporter == partner` are
/// dropped. Missing values must be filled beforehand.
pub fn build_symmetric_share_weights(
    records: &[FlowRecord],
    nodes: &[String],
    layers: &[String],
    periods: &[String],
) -> Result<WeightPanel> {
    let (n, m, t_len) = (nodes.len(), layers.len(), periods.len());
    if n == 0 || m == 0 || t_len == 0 {
        return Err(Error::InvalidArgument(
            "node, layer and period lists must be nonempty".into(),
        ));
    }
    let (node_ix, layer_ix, period_ix) = (index_of(nodes), index_of(layers), index_of(periods));
    let mut flows = vec![vec![0.0; n * n * m]; t_len];
    for r in records {
        let t = lookup(&period_ix, "period", &r.period)?;
        let k = lookup(&layer_ix, "layer", &r.layer)?;
        let i = lookup(&node_ix, "node", &r.reporter)?;
        let j = lookup(&node_ix, "node", &r.partner)?;
        if r.value.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "missing value for {}->{} (layer {}, period {}); fill missing values first",
                r.reporter, r.partner, r.layer, r.period
            )));
        }
        if !r.value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "non-finite value for {}->{} (layer {}, period {})",
                r.reporter, r.partner, r.layer, r.period
            )));
        }
        if r.value < 0.0 {
            return Err(Error::NegativeFlow {
                period: r.period.clone(),
                layer: r.layer.clone(),
                reporter: r.reporter.clone(),
                partner: r.partner.clone(),
                value: r.value,
            });
        }
        if i == j {
            continue;
        }
        flows[t][i + n * (j + n * k)] += r.value;
    }
    let bilateral = flows
        .into_iter()
        .map(|f| {
            let directed = Tensor3::new([n, n, m], f)?;
            Ok(Tensor3::from_fn([n, n, m], |i, j, k| {
                if i == j {
                    0.0
                } else {
                    directed.get(i, j, k) + directed.get(j, i, k)
                }
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = PanelLabels {
        nodes: nodes.to_vec(),
        layers: layers.to_vec(),
        periods: periods.to_vec(),
    };
    Ok(normalize_bilateral(labels, bilateral))
}

fn normalize_bilateral(labels: PanelLabels, bilateral: Vec<Tensor3>) -> WeightPanel {
    let mut isolated = Vec::new();
    let tensors = bilateral
        .iter()
        .enumerate()
        .map(|(t, s)| {
            let [n, _, m] = s.dims();
            let mut totals = vec![0.0; n * m];
            for k in 0..m {
                for i in 0..n {
                    let total: f64 = (0..n).filter(|&j| j != i).map(|j| s.get(i, j, k)).sum();
                    if total == 0.0 {
                        isolated.push(IsolatedRow {
                            period: t,
                            layer: k,
                            node: i,
                        });
                    }
                    totals[i + n * k] = total;
                }
            }
            Tensor3::from_fn([n, n, m], |i, j, k| {
                let total = totals[i + n * k];
                if i == j || total == 0.0 {
                    0.0
                } else {
                    s.get(i, j, k) / total
                }
            })
        })
        .collect();
    WeightPanel {
        labels,
        tensors,
        isolated,
        bilateral: Some(bilateral),
    }
}

/// How [`fill_missing`] treats missing observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillPolicy {
    /// Last prior observed value, else the first later one, else zero.
    #[default]
    CarryForward,
    /// Every missing value becomes zero.
    Zero,
}

/// Fills a series of optional observations with the carry-forward rule.
pub fn fill_series(series: &[Option<f64>]) -> Vec<f64> {
    let first = series.iter().flatten().next().copied();
    let mut last = None;
    series
        .iter()
        .map(|v| match v {
            Some(x) => {
                last = Some(*x);
                *x
            }
            None => last.or(first).unwrap_or(0.0),
        })
        .collect()
}

/// Replaces missing (NaN) values cell by cell, a cell being one
/// (layer, reporter, partner) triple followed across `periods`.
///
/// A period without any record for a cell counts as an observed zero; only
/// explicit NaN records are missing. Output holds one record per
/// (period, cell) that had at least one input record, in order of first
/// appearance; duplicate records for the same (period, cell) are summed.
pub fn fill_missing(
    records: &[FlowRecord],
    periods: &[String],
    policy: FillPolicy,
) -> Result<Vec<FlowRecord>> {
    let period_ix = index_of(periods);
    type Cell<'a> = (&'a str, &'a str, &'a str);
    // per cell: per period (sum of finite values, any finite, any record)
    let mut cells: HashMap<Cell, Vec<(f64, bool, bool)>> = HashMap::new();
    let mut order: Vec<(usize, Cell)> = Vec::new();
    for r in records {
        let t = lookup(&period_ix, "period", &r.period)?;
        let cell = (r.layer.as_str(), r.reporter.as_str(), r.partner.as_str());
        let series = cells
            .entry(cell)
            .or_insert_with(|| vec![(0.0, false, false); periods.len()]);
        if !series[t].2 {
            order.push((t, cell));
        }
        series[t].2 = true;
        if !r.value.is_nan() {
            series[t].0 += r.value;
            series[t].1 = true;
        }
    }
    let filled: HashMap<Cell, Vec<f64>> = cells
        .into_iter()
        .map(|(cell, s)| {
            let obs: Vec<Option<f64>> = s
                .iter()
                .map(|&(sum, finite, any)| match (any, finite) {
                    (false, _) => Some(0.0),
                    (true, true) => Some(sum),
                    (true, false) => None,
                })
                .collect();
            let values = match policy {
                FillPolicy::CarryForward => fill_series(&obs),
                FillPolicy::Zero => obs.iter().map(|v| v.unwrap_or(0.0)).collect(),
            };
            (cell, values)
        })
        .collect();
    Ok(order
        .into_iter()
        .map(|(t, (layer, reporter, partner))| {
            FlowRecord::new(
                &periods[t],
                layer,
                reporter,
                partner,
                filled[&(layer, reporter, partner)][t],
            )
        })
        .collect())
}

/// Trailing moving average of the bilateral flows of the selected layers
/// (window truncated at the start of the sample), followed by
/// re-normalization. Layers not selected are left as they were.
pub fn moving_average_smooth(panel: &WeightPanel, layers: &[usize], window: usize) -> Result<WeightPanel> {
    if window < 1 {
        return Err(Error::InvalidArgument(
            "moving-average window must be >= 1".into(),
        ));
    }
    let bilateral = panel
        .bilateral
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("panel carries no underlying flows to smooth".into()))?;
    if let Some(&k) = layers.iter().find(|&&k| k >= panel.n_layers()) {
        return Err(Error::InvalidArgument(format!("layer index {k} out of range")));
    }
    let selected: Vec<bool> = (0..panel.n_layers()).map(|k| layers.contains(&k)).collect();
    let smoothed = (0..bilateral.len())
        .map(|t| {
            let start = (t + 1).saturating_sub(window);
            let span = (t - start + 1) as f64;
            Tensor3::from_fn(bilateral[t].dims(), |i, j, k| {
                if selected[k] {
                    bilateral[start..=t].iter().map(|s| s.get(i, j, k)).sum::<f64>() / span
                } else {
                    bilateral[t].get(i, j, k)
                }
            })
        })
        .collect();
    Ok(normalize_bilateral(panel.labels.clone(), smoothed))
}

/// Pairwise cosine similarity between layers, each layer vectorized over
/// all node pairs and periods. Pairs involving a zero-norm layer are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSimilarity {
    pub layers: Vec<String>,
    values: Vec<Option<f64>>,
}

impl LayerSimilarity {
    pub fn get(&self, h: usize, k: usize) -> Option<f64> {
        self.values[h * self.layers.len() + k]
    }

    pub fn size(&self) -> usize {
        self.layers.len()
    }

    /// Mean over distinct defined pairs.
    pub fn mean_off_diagonal(&self) -> Option<f64> {
        let m = self.size();
        let vals: Vec<f64> = (0..m)
            .flat_map(|h| (h + 1..m).map(move |k| (h, k)))
            .filter_map(|(h, k)| self.get(h, k))
            .collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

pub fn cosine_similarity_matrix(panel: &WeightPanel) -> LayerSimilarity {
    let m = panel.n_layers();
    let mut gram = Matrix::zeros(m, m);
    for w in panel.tensors() {
        let flat = Matrix::from_column_slice(w.dims()[0] * w.dims()[1], m, w.as_slice());
        gram += flat.tr_mul(&flat);
    }
    let mut values = vec![None; m * m];
    for h in 0..m {
        for k in 0..m {
            let denom = (gram[(h, h)] * gram[(k, k)]).sqrt();
            if denom > 0.0 {
                values[h * m + k] = Some(if h == k { 1.0 } else { gram[(h, k)] / denom });
            }
        }
    }
    LayerSimilarity {
        layers: panel.labels.layers.clone(),
        values,
    }
}

/// Re-indexes a panel on `targets`, each target taking the tensor of the
/// source period `mapping` assigns to it.
pub fn expand_to_frequency(
    panel: &WeightPanel,
    targets: &[String],
    mapping: &BTreeMap<String, String>,
) -> Result<WeightPanel> {
    let source_ix = index_of(&panel.labels.periods);
    let picks = targets
        .iter()
        .map(|target| {
            let src = mapping
                .get(target)
                .ok_or_else(|| Error::InvalidArgument(format!("target period `{target}` is not mapped")))?;
            lookup(&source_ix, "period", src)
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = PanelLabels {
        nodes: panel.labels.nodes.clone(),
        layers: panel.labels.layers.clone(),
        periods: targets.to_vec(),
    };
    let isolated = picks
        .iter()
        .enumerate()
        .flat_map(|(t, &s)| {
            panel
                .isolated
                .iter()
                .filter(move |row| row.period == s)
                .map(move |row| IsolatedRow { period: t, ..*row })
        })
        .collect();
    Ok(WeightPanel {
        labels,
        tensors: picks.iter().map(|&s| panel.tensors[s].clone()).collect(),
        isolated,
        bilateral: panel
            .bilateral
            .as_ref()
            .map(|b| picks.iter().map(|&s| b[s].clone()).collect()),
    })
}

fn leading_year(label: &str) -> Option<i32> {
    let digits: String = label.chars().take_while(|c| c.is_ascii_digit()).collect();
    (digits.len() == 4).then(|| digits.parse().ok()).flatten()
}

/// Maps sub-annual targets (`2005Q3`, `2005-03`, ...) to annual sources
/// (`2005`): each target takes its own year, the latest earlier source year
/// when its year is absent, or the earliest source year when it precedes the
/// whole source sample.
pub fn annual_mapping(targets: &[String], sources: &[String]) -> Result<BTreeMap<String, String>> {
    let mut years: Vec<(i32, &String)> = sources
        .iter()
        .map(|s| {
            leading_year(s)
                .map(|y| (y, s))
                .ok_or_else(|| Error::InvalidArgument(format!("source period `{s}` has no year")))
        })
        .collect::<Result<_>>()?;
    years.sort();
    let (first_year, first) = *years
        .first()
        .ok_or_else(|| Error::InvalidArgument("no source periods".into()))?;
    targets
        .iter()
        .map(|t| {
            let y = leading_year(t)
                .ok_or_else(|| Error::InvalidArgument(format!("target period `{t}` has no year")))?;
            let src = if y < first_year {
                first
            } else {
                years
                    .iter()
                    .rev()
                    .find(|(sy, _)| *sy <= y)
                    .map(|(_, s)| *s)
                    .unwrap_or(first)
            };
            Ok((t.clone(), src.clone()))
        })
        .collect()
}
