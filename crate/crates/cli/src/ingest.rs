//! Flow records to a weight panel bundle.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use fnar::netweights::{
    build_symmetric_share_weights, cosine_similarity_matrix, fill_missing, moving_average_smooth, FlowRecord,
    WeightPanel,
};
use serde::Serialize;

use crate::config::{required, MirrorRule, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{natural_cmp, read_flows, write_json, write_panel};
use crate::SCHEMA_VERSION;

/// Applies the non-reporter rule of one layer. Records *reported by* a
/// non-reporter are discarded; each record `j -> i` from a reporting `j` to a
/// non-reporting `i` also stands in for the missing `i -> j`; records between
/// two non-reporters are dropped, i.e. set to zero. Other layers pass through.
pub fn mirror_non_reporters(records: &[FlowRecord], rule: &MirrorRule) -> Vec<FlowRecord> {
    let silent: HashSet<&str> = rule.non_reporters.iter().map(String::as_str).collect();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        if r.layer != rule.layer {
            out.push(r.clone());
            continue;
        }
        if silent.contains(r.reporter.as_str()) {
            continue;
        }
        out.push(r.clone());
        if silent.contains(r.partner.as_str()) {
            out.push(FlowRecord {
                reporter: r.partner.clone(),
                partner: r.reporter.clone(),
                ..r.clone()
            });
        }
    }
    out
}

/// Number of records sharing (period, layer, reporter, partner) with an
/// earlier one.
pub fn count_duplicates(records: &[FlowRecord]) -> usize {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| !seen.insert((&r.period, &r.layer, &r.reporter, &r.partner)))
        .count()
}

fn sorted_unique<'a>(values: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut out: Vec<String> = values.collect::<BTreeSet<_>>().into_iter().cloned().collect();
    out.sort_by(|a, b| natural_cmp(a, b));
    out
}

#[derive(Debug, Serialize)]
struct RowFlag {
    period: String,
    layer: String,
    node: String,
}

#[derive(Debug, Serialize)]
struct RowViolation {
    period: String,
    layer: String,
    node: String,
    row_sum: f64,
}

#[derive(Debug, Serialize)]
struct ValidationReport {
    schema_version: u32,
    records: usize,
    duplicates_summed: usize,
    isolated_rows: Vec<RowFlag>,
    row_sum_tolerance: f64,
    row_sum_violations: Vec<RowViolation>,
    layers: Vec<String>,
    /// Cosine similarity between layers; `null` when a layer is all zero.
    similarity: Vec<Vec<Option<f64>>>,
    mean_similarity: Option<f64>,
}

const ROW_SUM_TOL: f64 = 1e-10;

/// Builds the panel from the configured flows.
pub fn build_panel(cfg: &RunConfig) -> CliResult<(WeightPanel, usize, usize)> {
    let path = required(&cfg.data.flows, "flows")?;
    let mut records = read_flows(path)?;
    let n_records = records.len();
    let duplicates = count_duplicates(&records);
    if duplicates > 0 {
        log::warn!("{duplicates} duplicate flow records summed");
    }
    for rule in &cfg.ingest.mirror {
        records = mirror_non_reporters(&records, rule);
    }
    let nodes = cfg
        .data
        .nodes
        .clone()
        .unwrap_or_else(|| sorted_unique(records.iter().flat_map(|r| [&r.reporter, &r.partner])));
    let layers = cfg
        .data
        .layers
        .clone()
        .unwrap_or_else(|| sorted_unique(records.iter().map(|r| &r.layer)));
    let periods = cfg
        .data
        .periods
        .clone()
        .unwrap_or_else(|| sorted_unique(records.iter().map(|r| &r.period)));
    let filled = fill_missing(&records, &periods, cfg.ingest.fill)?;
    let mut panel = build_symmetric_share_weights(&filled, &nodes, &layers, &periods)?;
    let layer_ix: HashMap<&str, usize> = layers.iter().enumerate().map(|(k, l)| (l.as_str(), k)).collect();
    for rule in &cfg.ingest.smoothing {
        let k = *layer_ix
            .get(rule.layer.as_str())
            .ok_or_else(|| CliError::Config(format!("smoothing refers to unknown layer `{}`", rule.layer)))?;
        panel = moving_average_smooth(&panel, &[k], rule.window)?;
    }
    Ok((panel, n_records, duplicates))
}

pub fn run(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    for rule in &cfg.ingest.mirror {
        if let Some(layers) = &cfg.data.layers {
            if !layers.contains(&rule.layer) {
                return Err(CliError::Config(format!(
                    "mirror rule refers to unknown layer `{}`",
                    rule.layer
                )));
            }
        }
    }
    let (panel, records, duplicates) = build_panel(cfg)?;
    write_panel(out, &panel)?;
    let labels = panel.labels();
    let flag = |period: usize, layer: usize, node: usize| RowFlag {
        period: labels.periods[period].clone(),
        layer: labels.layers[layer].clone(),
        node: labels.nodes[node].clone(),
    };
    for row in panel.isolated() {
        log::warn!(
            "node {} has no flows in layer {} in period {}",
            labels.nodes[row.node],
            labels.layers[row.layer],
            labels.periods[row.period]
        );
    }
    let similarity = cosine_similarity_matrix(&panel);
    let m = similarity.size();
    let report = ValidationReport {
        schema_version: SCHEMA_VERSION,
        records,
        duplicates_summed: duplicates,
        isolated_rows: panel
            .isolated()
            .iter()
            .map(|r| flag(r.period, r.layer, r.node))
            .collect(),
        row_sum_tolerance: ROW_SUM_TOL,
        row_sum_violations: panel
            .row_sum_violations(ROW_SUM_TOL)
            .into_iter()
            .map(|(r, s)| {
                let f = flag(r.period, r.layer, r.node);
                RowViolation {
                    period: f.period,
                    layer: f.layer,
                    node: f.node,
                    row_sum: s,
                }
            })
            .collect(),
        layers: similarity.layers.clone(),
        similarity: (0..m)
            .map(|h| (0..m).map(|k| similarity.get(h, k)).collect())
            .collect(),
        mean_similarity: similarity.mean_off_diagonal(),
    };
    write_json(&out.join("validation.json"), &report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirroring_replaces_silent_reports() {
        let recs = vec![
            FlowRecord::new("1", "bank", "a", "c", 4.0),
            FlowRecord::new("1", "bank", "c", "a", 9.0),
            FlowRecord::new("1", "bank", "c", "d", 2.0),
            FlowRecord::new("1", "trade", "c", "a", 1.0),
        ];
        let rule = MirrorRule {
            layer: "bank".into(),
            non_reporters: vec!["c".into(), "d".into()],
        };
        let out = mirror_non_reporters(&recs, &rule);
        assert_eq!(
            out,
            vec![
                FlowRecord::new("1", "bank", "a", "c", 4.0),
                FlowRecord::new("1", "bank", "c", "a", 4.0),
                FlowRecord::new("1", "trade", "c", "a", 1.0),
            ]
        );
    }

    #[test]
    fn duplicates_are_counted() {
        let recs = vec![
            FlowRecord::new("1", "x", "a", "b", 1.0),
            FlowRecord::new("1", "x", "a", "b", 2.0),
            FlowRecord::new("1", "x", "b", "a", 2.0),
        ];
        assert_eq!(count_duplicates(&recs), 1);
    }
}
