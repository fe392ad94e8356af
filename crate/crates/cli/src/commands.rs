//! Analysis commands on an ingested panel.

use std::path::Path;

use fnar::bootstrap::{run_bootstrap, BootstrapConfig};
use fnar::forecastlab::{run_comparison, DmResult, DmStatus, LabConfig, WindowPlan};
use fnar::model::{self, EffectsMode, FnarFit, PanelSeries};
use fnar::montecarlo::{rate_experiment_factors, rate_experiment_theta, SyntheticSpec};
use fnar::netfactors::{
    estimate_factor_model, factor_row_sums, select_rank, top_links, variance_explained, FactorModel,
};
use fnar::netweights::{annual_mapping, cosine_similarity_matrix, WeightPanel};
use fnar::Tensor3;
use serde::Serialize;

use crate::config::{required, Experiment, Frequency, RankChoice, RunConfig};
use crate::error::{CliError, CliResult};
use crate::io::{num, read_panel, read_series, write_csv, write_json};
use crate::SCHEMA_VERSION;

fn load_panel(cfg: &RunConfig) -> CliResult<WeightPanel> {
    read_panel(required(&cfg.data.panel, "panel")?)
}

/// Resolves the factor rank, checking a fixed `r` against the layer count
/// before any computation.
fn choose_rank(cfg: &RunConfig, panel: &WeightPanel) -> CliResult<(usize, Option<Vec<f64>>)> {
    let m = panel.n_layers();
    match cfg.factors.r {
        RankChoice::Fixed(r) if r > m => Err(CliError::Config(format!(
            "factors.r = {r} exceeds the number of layers ({m})"
        ))),
        RankChoice::Fixed(r) => Ok((r, None)),
        RankChoice::Auto(_) => {
            let sel = select_rank(panel, cfg.factors.r_max.min(m.saturating_sub(1)).max(1))?;
            log::info!("eigenvalue-ratio rank selection picked r = {}", sel.rank);
            Ok((sel.rank, Some(sel.ratios)))
        }
    }
}

#[derive(Serialize)]
struct LoadingsReport<'a> {
    schema_version: u32,
    r: usize,
    layers: &'a [String],
    /// One row per layer.
    loadings: Vec<Vec<f64>>,
    eigenvalues: &'a [f64],
    spectrum: &'a [f64],
    rank_ratios: Option<Vec<f64>>,
}

pub fn factors(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let panel = load_panel(cfg)?;
    let (r, ratios) = choose_rank(cfg, &panel)?;
    let (model, _) = estimate_factor_model(&panel, r)?;
    let labels = panel.labels();
    let u = model.loadings();
    write_json(
        &out.join("loadings.json"),
        &LoadingsReport {
            schema_version: SCHEMA_VERSION,
            r,
            layers: &labels.layers,
            loadings: (0..u.nrows())
                .map(|l| u.row(l).iter().copied().collect())
                .collect(),
            eigenvalues: model.eigenvalues(),
            spectrum: model.spectrum(),
            rank_ratios: ratios,
        },
    )?;

    let n = panel.n_nodes();
    let mut rows = Vec::new();
    for (t, f) in model.factors().iter().enumerate() {
        for k in 0..r {
            for i in 0..n {
                for j in (0..n).filter(|&j| j != i) {
                    rows.push(vec![
                        labels.periods[t].clone(),
                        (k + 1).to_string(),
                        labels.nodes[i].clone(),
                        labels.nodes[j].clone(),
                        num(f.get(i, j, k)),
                    ]);
                }
            }
        }
    }
    write_csv(
        &out.join("factors.csv"),
        &["period", "factor", "from", "to", "value"],
        rows,
    )?;

    let shares = variance_explained(&panel, &model)?;
    let mut rows: Vec<Vec<String>> = shares
        .per_factor
        .iter()
        .enumerate()
        .map(|(k, s)| vec![(k + 1).to_string(), num(*s)])
        .collect();
    rows.push(vec!["total".into(), num(shares.total)]);
    write_csv(&out.join("variance.csv"), &["factor", "share"], rows)?;

    let rows = factor_row_sums(&model).into_iter().enumerate().map(|(k, s)| {
        vec![
            (k + 1).to_string(),
            num(s.row_sum),
            num(s.avg_abs_row_sum),
            num(s.avg_sq_row_sum),
            num(s.max_deviation),
        ]
    });
    write_csv(
        &out.join("row_sums.csv"),
        &[
            "factor",
            "row_sum",
            "avg_abs_row_sum",
            "avg_sq_row_sum",
            "max_deviation",
        ],
        rows,
    )?;

    let mut rows = Vec::new();
    for (k, links) in top_links(&panel, &model, cfg.factors.top_links)?
        .into_iter()
        .enumerate()
    {
        for (rank, l) in links.into_iter().enumerate() {
            rows.push(vec![
                (k + 1).to_string(),
                (rank + 1).to_string(),
                labels.nodes[l.from].clone(),
                labels.nodes[l.to].clone(),
                num(l.share),
            ]);
        }
    }
    write_csv(
        &out.join("top_links.csv"),
        &["factor", "rank", "from", "to", "share"],
        rows,
    )?;

    let sim = cosine_similarity_matrix(&panel);
    let mut header = vec!["layer"];
    header.extend(sim.layers.iter().map(String::as_str));
    let rows = (0..sim.size()).map(|h| {
        let mut row = vec![sim.layers[h].clone()];
        row.extend((0..sim.size()).map(|k| sim.get(h, k).map_or(String::new(), num)));
        row
    });
    write_csv(&out.join("similarity.csv"), &header, rows)
}

/// Everything the estimation-based commands share.
struct Prepared {
    panel: WeightPanel,
    model: FactorModel,
    y: PanelSeries,
    /// Panel period of each series row.
    period_map: Vec<usize>,
    /// Factor tensor of each series row.
    factors: Vec<Tensor3>,
}

fn prepare(cfg: &RunConfig) -> CliResult<Prepared> {
    let panel = load_panel(cfg)?;
    let y = read_series(required(&cfg.data.series, "series")?, &panel.labels().nodes)?;
    let (r, _) = choose_rank(cfg, &panel)?;
    let sources = &panel.labels().periods;
    let position = |p: &str| sources.iter().position(|s| s == p);
    let period_map = match cfg.data.frequency {
        Frequency::Identity => y
            .periods()
            .iter()
            .map(|p| {
                position(p)
                    .ok_or_else(|| CliError::Input(format!("series period `{p}` is not a panel period")))
            })
            .collect::<CliResult<Vec<_>>>()?,
        Frequency::Annual => {
            let mapping = annual_mapping(y.periods(), sources)?;
            y.periods()
                .iter()
                .map(|p| position(&mapping[p]).expect("mapped to a source period"))
                .collect()
        }
    };
    let (model, _) = estimate_factor_model(&panel, r)?;
    let factors = period_map.iter().map(|&s| model.factors()[s].clone()).collect();
    Ok(Prepared {
        panel,
        model,
        y,
        period_map,
        factors,
    })
}

#[derive(Serialize)]
struct Coefficient {
    name: String,
    estimate: f64,
    std_error: f64,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    schema_version: u32,
    mode: EffectsMode,
    estimator: fnar::model::Estimator,
    nodes: &'a [String],
    r: usize,
    n_obs: usize,
    coefficients: Vec<Coefficient>,
    dropped_columns: &'a [String],
    /// `beta` as an `N x r` (or `1 x r`) row-major table.
    beta: Vec<Vec<f64>>,
    rho: Vec<f64>,
    alpha: Vec<f64>,
    sigma_nu: Vec<Vec<f64>>,
    dof_divisor: f64,
    /// Effect of each observed layer, homogeneous fits only.
    layer_effects: Option<Vec<f64>>,
}

fn rows_of(m: &fnar::Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn estimate_report<'a>(fit: &'a FnarFit, p: &'a Prepared) -> CliResult<EstimateReport<'a>> {
    Ok(EstimateReport {
        schema_version: SCHEMA_VERSION,
        mode: fit.mode,
        estimator: fit.estimator,
        nodes: p.y.nodes(),
        r: fit.r(),
        n_obs: fit.n_obs(),
        coefficients: fit
            .column_names
            .iter()
            .enumerate()
            .map(|(j, name)| Coefficient {
                name: name.clone(),
                estimate: fit.theta[j],
                std_error: fit.theta_cov[(j, j)].max(0.0).sqrt(),
            })
            .collect(),
        dropped_columns: &fit.dropped_columns,
        beta: rows_of(&fit.coefficients.beta),
        rho: fit.coefficients.rho.iter().copied().collect(),
        alpha: fit.coefficients.alpha.iter().copied().collect(),
        sigma_nu: rows_of(&fit.sigma_nu),
        dof_divisor: fit.dof_divisor,
        layer_effects: match fit.mode {
            EffectsMode::Homogeneous => {
                Some(model::rescale_to_layers(fit, &p.model)?.iter().copied().collect())
            }
            EffectsMode::Heterogeneous => None,
        },
    })
}

pub fn estimate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let p = prepare(cfg)?;
    let fit = model::fit(&p.y, &p.factors, &cfg.estimate.fit_options())?;
    write_json(&out.join("estimate.json"), &estimate_report(&fit, &p)?)?;
    let mut rows = Vec::new();
    for t in 0..fit.n_obs() {
        for (i, node) in p.y.nodes().iter().enumerate() {
            rows.push(vec![
                p.y.periods()[t + 1].clone(),
                node.clone(),
                num(fit.fitted[(t, i)]),
                num(fit.residuals[(t, i)]),
            ]);
        }
    }
    write_csv(
        &out.join("residuals.csv"),
        &["period", "node", "fitted", "residual"],
        rows,
    )
}

#[derive(Serialize)]
struct Interval {
    name: String,
    estimate: f64,
    mean: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize)]
struct BootstrapReport {
    schema_version: u32,
    seed: u64,
    level: f64,
    iterations: usize,
    successful: usize,
    failed_iterations: Vec<usize>,
    coefficients: Vec<Interval>,
}

pub fn bootstrap(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let p = prepare(cfg)?;
    let fit = model::fit(&p.y, &p.factors, &cfg.estimate.fit_options())?;
    if fit.mode != EffectsMode::Homogeneous {
        return Err(CliError::Config(
            "the bootstrap supports homogeneous fits only".into(),
        ));
    }
    let config = BootstrapConfig {
        iterations: cfg.bootstrap.iterations,
        seed: cfg.seed,
        level: cfg.bootstrap.level,
        max_failure_rate: cfg.bootstrap.max_failure_rate,
        period_map: Some(p.period_map.clone()),
        exec: cfg.exec,
    };
    let res = run_bootstrap(&p.panel, &p.y, &p.model, &fit, &config)?;
    write_json(
        &out.join("bootstrap.json"),
        &BootstrapReport {
            schema_version: SCHEMA_VERSION,
            seed: res.seed,
            level: res.level,
            iterations: res.iterations,
            successful: res.n_draws(),
            failed_iterations: res.failed_iterations.clone(),
            coefficients: res
                .column_names
                .iter()
                .enumerate()
                .map(|(j, name)| Interval {
                    name: name.clone(),
                    estimate: fit.theta[j],
                    mean: res.means[j],
                    lower: res.lower[j],
                    upper: res.upper[j],
                })
                .collect(),
        },
    )?;
    if cfg.bootstrap.write_draws {
        let mut header = vec!["draw"];
        header.extend(res.column_names.iter().map(String::as_str));
        let rows = (0..res.n_draws()).map(|b| {
            let mut row = vec![b.to_string()];
            row.extend(res.draws.row(b).iter().map(|v| num(*v)));
            row
        });
        write_csv(&out.join("draws.csv"), &header, rows)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct DmEntry<'a> {
    node: &'a str,
    status: DmStatus,
    mean_differential: f64,
    statistic: Option<f64>,
    p_value: Option<f64>,
}

#[derive(Serialize)]
struct ModelSummary<'a> {
    model: &'static str,
    mse: &'a [f64],
    ratio_to_ar1: &'a [f64],
    median_ratio: f64,
    mean_ratio: f64,
    /// Against the FNAR; negative mean differentials favor the FNAR.
    diebold_mariano: Vec<DmEntry<'a>>,
}

#[derive(Serialize)]
struct ForecastSummary<'a> {
    schema_version: u32,
    plan: WindowPlan,
    nodes: &'a [String],
    targets: &'a [String],
    models: Vec<ModelSummary<'a>>,
}

pub fn forecast(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let p = prepare(cfg)?;
    let f = &cfg.forecast;
    let plan = match (f.first_train_end, f.last_train_end) {
        (Some(a), Some(b)) => WindowPlan::new(a, b)?,
        _ => WindowPlan::trailing(p.y.n_periods(), f.windows)?,
    };
    let lab = LabConfig {
        fnar: cfg.estimate.fit_options(),
        pc_components: f.pc_components,
        lasso: f.lasso,
        bvar: f.bvar,
        dm: f.dm,
        exec: cfg.exec,
    };
    if f.models.is_empty() {
        return Err(CliError::Config("forecast.models is empty".into()));
    }
    let report = run_comparison(&p.y, &p.factors, &plan, &f.models, &lab)?;
    let nodes = p.y.nodes();

    let mut header = vec!["node".to_string()];
    header.extend(report.models.iter().map(|m| format!("{}_mse", m.model.name())));
    header.extend(report.models.iter().map(|m| format!("{}_ratio", m.model.name())));
    let rows = (0..nodes.len()).map(|i| {
        let mut row = vec![nodes[i].clone()];
        row.extend(report.models.iter().map(|m| num(m.mse[i])));
        row.extend(report.models.iter().map(|m| num(m.ratio[i])));
        row
    });
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(&out.join("forecast.csv"), &header, rows)?;

    let dm_entry = |i: usize, d: &DmResult| DmEntry {
        node: &nodes[i],
        status: d.status,
        mean_differential: d.mean_differential,
        statistic: d.statistic,
        p_value: d.p_value,
    };
    write_json(
        &out.join("forecast.json"),
        &ForecastSummary {
            schema_version: SCHEMA_VERSION,
            plan: report.plan,
            nodes,
            targets: &report.targets,
            models: report
                .models
                .iter()
                .map(|m| ModelSummary {
                    model: m.model.name(),
                    mse: &m.mse,
                    ratio_to_ar1: &m.ratio,
                    median_ratio: m.median_ratio(),
                    mean_ratio: m.mean_ratio(),
                    diebold_mariano: m
                        .dm_vs_fnar
                        .iter()
                        .enumerate()
                        .map(|(i, d)| dm_entry(i, d))
                        .collect(),
                })
                .collect(),
        },
    )
}

#[derive(Serialize)]
struct SimulateReport<T: Serialize> {
    schema_version: u32,
    experiment: &'static str,
    seed: u64,
    reps: usize,
    #[serde(flatten)]
    result: T,
}

pub fn simulate(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    let s = &cfg.simulate;
    let mut base = SyntheticSpec::new(s.n, s.r.max(1), s.r, 2);
    base.noise_sd = s.noise_sd;
    base.layer_corr = s.layer_corr;
    base.shock_sd = s.shock_sd;
    base.shock_corr = s.shock_corr;
    match s.experiment {
        Experiment::FactorRates => {
            let table = rate_experiment_factors(&base, &s.ms, &s.ts, s.reps, cfg.seed, cfg.exec)?;
            let rows = table.cells.iter().map(|c| {
                vec![
                    c.m.to_string(),
                    c.t.to_string(),
                    num(c.median_loading_error),
                    num(c.median_factor_error),
                ]
            });
            write_csv(
                &out.join("simulate.csv"),
                &["m", "t", "median_loading_error", "median_factor_error"],
                rows,
            )?;
            write_json(
                &out.join("simulate.json"),
                &SimulateReport {
                    schema_version: SCHEMA_VERSION,
                    experiment: "factor_rates",
                    seed: cfg.seed,
                    reps: s.reps,
                    result: table,
                },
            )
        }
        Experiment::ThetaRates => {
            let cells = rate_experiment_theta(
                &base,
                &s.path,
                s.reps,
                &cfg.estimate.fit_options(),
                cfg.seed,
                cfg.exec,
            )?;
            let rows = cells.iter().map(|c| {
                vec![
                    c.m.to_string(),
                    c.t.to_string(),
                    num(c.median_error),
                    num(c.median_error_true_factors),
                ]
            });
            write_csv(
                &out.join("simulate.csv"),
                &["m", "t", "median_error", "median_error_true_factors"],
                rows,
            )?;
            #[derive(Serialize)]
            struct Cells {
                cells: Vec<fnar::montecarlo::ThetaErrorCell>,
            }
            write_json(
                &out.join("simulate.json"),
                &SimulateReport {
                    schema_version: SCHEMA_VERSION,
                    experiment: "theta_rates",
                    seed: cfg.seed,
                    reps: s.reps,
                    result: Cells { cells },
                },
            )
        }
    }
}
