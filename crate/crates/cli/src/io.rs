//! File formats.
//!
//! A panel bundle is a directory with
//! - `panel_meta.json`: schema version and node, layer and period labels;
//! - `weights.csv`: `period,layer,from,to,weight`, one row per off-diagonal
//!   entry in period, layer, row, column order.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;

use fnar::model::PanelSeries;
use fnar::netweights::{FlowRecord, PanelLabels, WeightPanel};
use fnar::{Matrix, Tensor3};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::SCHEMA_VERSION;

const FLOW_HEADER: [&str; 5] = ["period", "layer", "reporter", "partner", "value"];
const SERIES_HEADER: [&str; 3] = ["period", "node", "value"];
const WEIGHTS_HEADER: [&str; 5] = ["period", "layer", "from", "to", "weight"];

fn open_csv(path: &Path, header: &[&str]) -> CliResult<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let found = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if found.iter().collect::<Vec<_>>() != header {
        return Err(CliError::Input(format!(
            "{}: line 1: expected header `{}`, found `{}`",
            path.display(),
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    Ok(reader)
}

fn rows(
    path: &Path,
    mut reader: csv::Reader<File>,
) -> impl Iterator<Item = CliResult<(u64, csv::StringRecord)>> + '_ {
    let mut record = csv::StringRecord::new();
    std::iter::from_fn(move || match reader.read_record(&mut record) {
        Ok(true) => {
            let line = record.position().map_or(0, |p| p.line());
            Some(Ok((line, record.clone())))
        }
        Ok(false) => None,
        Err(e) => Some(Err(CliError::Input(format!("{}: {e}", path.display())))),
    })
}

/// Empty cells and `NA`/`NaN` mark a missing value.
fn parse_value(path: &Path, line: u64, text: &str) -> CliResult<f64> {
    if text.is_empty() || text.eq_ignore_ascii_case("na") || text.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    text.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Input(format!("{}: line {line}: invalid value `{text}`", path.display())))
}

pub fn read_flows(path: &Path) -> CliResult<Vec<FlowRecord>> {
    let reader = open_csv(path, &FLOW_HEADER)?;
    let mut out = Vec::new();
    for row in rows(path, reader) {
        let (line, r) = row?;
        if r.iter().take(4).any(str::is_empty) {
            return Err(CliError::Input(format!(
                "{}: line {line}: empty label",
                path.display()
            )));
        }
        out.push(FlowRecord::new(
            &r[0],
            &r[1],
            &r[2],
            &r[3],
            parse_value(path, line, &r[4])?,
        ));
    }
    if out.is_empty() {
        return Err(CliError::Input(format!("{}: no flow records", path.display())));
    }
    Ok(out)
}

/// Orders labels with digit runs compared by value, so `t2 < t10` and
/// `2001Q4 < 2002Q1`.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    fn chunks(s: &str) -> Vec<(bool, &str)> {
        let mut out = Vec::new();
        let mut start = 0;
        let bytes = s.as_bytes();
        for i in 1..=bytes.len() {
            if i == bytes.len() || bytes[i].is_ascii_digit() != bytes[start].is_ascii_digit() {
                out.push((bytes[start].is_ascii_digit(), &s[start..i]));
                start = i;
            }
        }
        out
    }
    let (ca, cb) = (chunks(a), chunks(b));
    for ((da, xa), (db, xb)) in ca.iter().zip(&cb) {
        let ord = if *da && *db {
            let (ta, tb) = (xa.trim_start_matches('0'), xb.trim_start_matches('0'));
            ta.len().cmp(&tb.len()).then_with(|| ta.cmp(tb))
        } else {
            xa.cmp(xb)
        };
        if ord != Ordering::Equal {
            return ord;
        }
    }
    ca.len().cmp(&cb.len()).then_with(|| a.cmp(b))
}

/// Long-format series on the given node order; periods in natural order.
pub fn read_series(path: &Path, nodes: &[String]) -> CliResult<PanelSeries> {
    let reader = open_csv(path, &SERIES_HEADER)?;
    let node_ix: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut cells: HashMap<(String, usize), f64> = HashMap::new();
    let mut periods = BTreeSet::new();
    for row in rows(path, reader) {
        let (line, r) = row?;
        let i = *node_ix.get(&r[1]).ok_or_else(|| {
            CliError::Input(format!(
                "{}: line {line}: unknown node `{}`",
                path.display(),
                &r[1]
            ))
        })?;
        let v = parse_value(path, line, &r[2])?;
        if v.is_nan() {
            return Err(CliError::Input(format!(
                "{}: line {line}: missing series value",
                path.display()
            )));
        }
        if cells.insert((r[0].to_string(), i), v).is_some() {
            return Err(CliError::Input(format!(
                "{}: line {line}: duplicate value for ({}, {})",
                path.display(),
                &r[0],
                &r[1]
            )));
        }
        periods.insert(r[0].to_string());
    }
    let mut periods: Vec<String> = periods.into_iter().collect();
    periods.sort_by(|a, b| natural_cmp(a, b));
    let mut values = Matrix::zeros(periods.len(), nodes.len());
    for (t, p) in periods.iter().enumerate() {
        for (i, node) in nodes.iter().enumerate() {
            values[(t, i)] = *cells.get(&(p.clone(), i)).ok_or_else(|| {
                CliError::Input(format!(
                    "{}: no value for node `{node}` in period `{p}`",
                    path.display()
                ))
            })?;
        }
    }
    Ok(PanelSeries::new(periods, nodes.to_vec(), values)?)
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    let mut f = File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(path, &text)
}

/// CSV from a header and pre-formatted rows.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| CliError::io(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::io(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Shortest round-trip decimal form; empty for missing.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelMeta {
    pub schema_version: u32,
    pub nodes: Vec<String>,
    pub layers: Vec<String>,
    pub periods: Vec<String>,
}

pub fn write_panel(dir: &Path, panel: &WeightPanel) -> CliResult<()> {
    create_dir(dir)?;
    let labels = panel.labels();
    write_json(
        &dir.join("panel_meta.json"),
        &PanelMeta {
            schema_version: SCHEMA_VERSION,
            nodes: labels.nodes.clone(),
            layers: labels.layers.clone(),
            periods: labels.periods.clone(),
        },
    )?;
    let n = panel.n_nodes();
    let mut rows = Vec::new();
    for (t, w) in panel.tensors().iter().enumerate() {
        for k in 0..panel.n_layers() {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    rows.push(vec![
                        labels.periods[t].clone(),
                        labels.layers[k].clone(),
                        labels.nodes[i].clone(),
                        labels.nodes[j].clone(),
                        num(w.get(i, j, k)),
                    ]);
                }
            }
        }
    }
    write_csv(&dir.join("weights.csv"), &WEIGHTS_HEADER, rows)
}

pub fn read_panel(dir: &Path) -> CliResult<WeightPanel> {
    let meta_path = dir.join("panel_meta.json");
    let text = std::fs::read_to_string(&meta_path).map_err(|e| CliError::io(&meta_path, e))?;
    let meta: PanelMeta =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", meta_path.display())))?;
    if meta.schema_version != SCHEMA_VERSION {
        return Err(CliError::Input(format!(
            "{}: unsupported schema version {}",
            meta_path.display(),
            meta.schema_version
        )));
    }
    let index = |labels: &[String]| -> HashMap<String, usize> {
        labels.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect()
    };
    let (nix, lix, pix) = (index(&meta.nodes), index(&meta.layers), index(&meta.periods));
    let (n, m) = (meta.nodes.len(), meta.layers.len());
    let mut data = vec![vec![0.0; n * n * m]; meta.periods.len()];
    let path = dir.join("weights.csv");
    let reader = open_csv(&path, &WEIGHTS_HEADER)?;
    for row in rows(&path, reader) {
        let (line, r) = row?;
        let find = |map: &HashMap<String, usize>, kind: &str, s: &str| {
            map.get(s).copied().ok_or_else(|| {
                CliError::Input(format!("{}: line {line}: unknown {kind} `{s}`", path.display()))
            })
        };
        let t = find(&pix, "period", &r[0])?;
        let k = find(&lix, "layer", &r[1])?;
        let (i, j) = (find(&nix, "node", &r[2])?, find(&nix, "node", &r[3])?);
        let v = parse_value(&path, line, &r[4])?;
        if v.is_nan() || i == j {
            return Err(CliError::Input(format!(
                "{}: line {line}: invalid weight entry",
                path.display()
            )));
        }
        data[t][i + n * (j + n * k)] = v;
    }
    let tensors = data
        .into_iter()
        .map(|d| Tensor3::new([n, n, m], d))
        .collect::<fnar::Result<Vec<_>>>()?;
    let labels = PanelLabels {
        nodes: meta.nodes,
        layers: meta.layers,
        periods: meta.periods,
    };
    Ok(WeightPanel::new(labels, tensors)?)
}
