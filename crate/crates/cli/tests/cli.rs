use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fnar::model::{self, FitOptions};
use fnar::montecarlo::{generate, SyntheticSpec};
use fnar::netfactors::estimate_factor_model;
use fnar_cli::io::{num, read_panel, write_csv, write_panel};
use serde_json::Value;
use tempfile::TempDir;

fn fnar(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fnar"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_json(out: &Output) -> Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr
        .lines()
        .rev()
        .find(|l| l.starts_with('{'))
        .expect("error JSON on stderr");
    serde_json::from_str(line).unwrap()
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const GOLDEN_FLOWS: &str = "period,layer,reporter,partner,value
2001,trade,a,b,3
2001,trade,b,a,1
2001,trade,a,c,6
2001,trade,b,c,2
2001,trade,c,b,3
2001,fin,a,b,1
2001,fin,b,c,1
2001,fin,c,a,2
2002,trade,a,b,NA
2002,trade,b,a,1
2002,trade,a,c,2
2002,trade,b,c,2
2002,trade,c,b,3
2002,fin,a,b,5
";

fn golden_dir() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("flows.csv"), GOLDEN_FLOWS).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "[data]\nflows = \"flows.csv\"\nlayers = [\"trade\", \"fin\"]\n",
    )
    .unwrap();
    dir
}

#[test]
fn golden_fixture_is_byte_identical() {
    let dir = golden_dir();
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "panel", "ingest"],
    ));
    // bilateral totals over row totals, worked out by hand
    let rows: [(&str, &str, [(f64, f64); 6]); 4] = [
        (
            "2001",
            "trade",
            [(4., 10.), (6., 10.), (4., 9.), (5., 9.), (6., 11.), (5., 11.)],
        ),
        (
            "2001",
            "fin",
            [(1., 3.), (2., 3.), (1., 2.), (1., 2.), (2., 3.), (1., 3.)],
        ),
        // a->b missing in 2002: carried forward from 2001
        (
            "2002",
            "trade",
            [(4., 6.), (2., 6.), (4., 9.), (5., 9.), (2., 7.), (5., 7.)],
        ),
        (
            "2002",
            "fin",
            [(5., 5.), (0., 5.), (5., 5.), (0., 5.), (0., 1.), (0., 1.)],
        ),
    ];
    let pairs = [
        ("a", "b"),
        ("a", "c"),
        ("b", "a"),
        ("b", "c"),
        ("c", "a"),
        ("c", "b"),
    ];
    let mut expected = String::from("period,layer,from,to,weight\n");
    for (period, layer, shares) in rows {
        for ((from, to), (x, total)) in pairs.iter().zip(shares) {
            expected.push_str(&format!("{period},{layer},{from},{to},{}\n", x / total));
        }
    }
    let written = fs::read_to_string(dir.path().join("panel/weights.csv")).unwrap();
    assert_eq!(written, expected);

    let report = read_json(dir.path().join("panel/validation.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["isolated_rows"][0]["node"], "c");
    assert_eq!(report["row_sum_violations"].as_array().unwrap().len(), 0);
    let meta = read_json(dir.path().join("panel/panel_meta.json"));
    assert_eq!(meta["layers"], serde_json::json!(["trade", "fin"]));

    // the bundle reads back to the same tensors
    let panel = read_panel(&dir.path().join("panel")).unwrap();
    let out2 = dir.path().join("again");
    write_panel(&out2, &panel).unwrap();
    assert_eq!(fs::read_to_string(out2.join("weights.csv")).unwrap(), written);
}

#[test]
fn duplicate_records_are_summed() {
    let dir = golden_dir();
    let split = GOLDEN_FLOWS.replace("2001,trade,a,c,6\n", "2001,trade,a,c,2\n2001,trade,a,c,4\n");
    fs::write(dir.path().join("flows.csv"), split).unwrap();
    let out = fnar(dir.path(), &["--config", "run.toml", "--out", "dup", "ingest"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
    let base = golden_dir();
    ok(&fnar(
        base.path(),
        &["--config", "run.toml", "--out", "panel", "ingest"],
    ));
    assert_eq!(
        fs::read_to_string(dir.path().join("dup/weights.csv")).unwrap(),
        fs::read_to_string(base.path().join("panel/weights.csv")).unwrap()
    );
    assert_eq!(
        read_json(dir.path().join("dup/validation.json"))["duplicates_summed"],
        1
    );
}

#[test]
fn ingest_input_errors() {
    let dir = golden_dir();
    fs::write(
        dir.path().join("flows.csv"),
        "period,layer,reporter,partner,value\n",
    )
    .unwrap();
    let out = fnar(dir.path(), &["--config", "run.toml", "--out", "p", "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["schema_version"], 1);
    assert_eq!(err["error"]["kind"], "input");
    assert!(!dir.path().join("p/weights.csv").exists());

    fs::write(
        dir.path().join("flows.csv"),
        "period,layer,reporter,partner,value\n2001,trade,a,b,x\n",
    )
    .unwrap();
    let out = fnar(dir.path(), &["--config", "run.toml", "--out", "p", "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("line 2"));

    fs::write(
        dir.path().join("flows.csv"),
        "period,layer,from,to,value\n2001,trade,a,b,1\n",
    )
    .unwrap();
    assert_eq!(
        fnar(dir.path(), &["--config", "run.toml", "ingest"])
            .status
            .code(),
        Some(2)
    );

    fs::write(
        dir.path().join("flows.csv"),
        GOLDEN_FLOWS.replace("2002,fin,a,b,5", "2002,bank,a,b,5"),
    )
    .unwrap();
    let out = fnar(dir.path(), &["--config", "run.toml", "--out", "p", "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(error_json(&out)["error"]["message"]
        .as_str()
        .unwrap()
        .contains("bank"));
}

#[test]
fn config_errors_exit_with_code_two() {
    let dir = golden_dir();
    fs::write(dir.path().join("bad.toml"), "[data]\nflowz = \"flows.csv\"\n").unwrap();
    let out = fnar(dir.path(), &["--config", "bad.toml", "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");
    let out = fnar(dir.path(), &["--config", "missing.toml", "ingest"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "io");
    assert_eq!(fnar(dir.path(), &["frobnicate"]).status.code(), Some(2));
    // no flows configured
    assert_eq!(fnar(dir.path(), &["ingest"]).status.code(), Some(2));
}

/// Synthetic panel bundle and series in a fresh directory.
fn synthetic_dir(spec: &SyntheticSpec, extra: &str) -> (TempDir, fnar::montecarlo::Synthetic) {
    let dir = TempDir::new().unwrap();
    let d = generate(spec).unwrap();
    write_panel(&dir.path().join("panel"), &d.panel).unwrap();
    let mut rows = Vec::new();
    for (t, p) in d.y.periods().iter().enumerate() {
        for (i, node) in d.y.nodes().iter().enumerate() {
            rows.push(vec![p.clone(), node.clone(), num(d.y.values()[(t, i)])]);
        }
    }
    write_csv(&dir.path().join("y.csv"), &["period", "node", "value"], rows).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        format!("seed = 3\n[data]\npanel = \"panel\"\nseries = \"y.csv\"\n{extra}"),
    )
    .unwrap();
    (dir, d)
}

fn spec(n: usize, m: usize, r: usize, t: usize) -> SyntheticSpec {
    let mut s = SyntheticSpec::new(n, m, r, t);
    s.seed = 21;
    s
}

#[test]
fn factors_outputs_and_determinism() {
    let mut s = spec(4, 5, 2, 30);
    s.noise_sd = 0.0;
    let (dir, _) = synthetic_dir(&s, "[factors]\nr = 2\ntop_links = 3\n");
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "a", "factors"],
    ));
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "b", "factors"],
    ));
    for file in [
        "loadings.json",
        "factors.csv",
        "variance.csv",
        "row_sums.csv",
        "top_links.csv",
        "similarity.csv",
    ] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(file)).unwrap(), "{file}");
    }
    let variance = fs::read_to_string(dir.path().join("a/variance.csv")).unwrap();
    let total: f64 = variance
        .lines()
        .find_map(|l| l.strip_prefix("total,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!((total - 1.0).abs() < 1e-10);
    let loadings = read_json(dir.path().join("a/loadings.json"));
    assert_eq!(loadings["schema_version"], 1);
    assert_eq!(loadings["loadings"].as_array().unwrap().len(), 5);
    let top = fs::read_to_string(dir.path().join("a/top_links.csv")).unwrap();
    assert_eq!(top.lines().count(), 1 + 2 * 3);
}

#[test]
fn rank_above_layer_count_is_rejected_up_front() {
    let (dir, _) = synthetic_dir(&spec(3, 3, 1, 20), "[factors]\nr = 4\n");
    let out = fnar(dir.path(), &["--config", "run.toml", "--out", "o", "factors"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"]["kind"], "config");
    assert!(!dir.path().join("o/loadings.json").exists());
}

#[test]
fn automatic_rank_selection() {
    let mut s = spec(4, 6, 1, 30);
    s.noise_sd = 0.001;
    let (dir, _) = synthetic_dir(&s, "[factors]\nr = \"auto\"\nr_max = 4\n");
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "o", "factors"],
    ));
    let loadings = read_json(dir.path().join("o/loadings.json"));
    assert_eq!(loadings["r"], 1);
    assert_eq!(loadings["rank_ratios"].as_array().unwrap().len(), 4);
}

#[test]
fn estimate_matches_the_library_bit_for_bit() {
    let (dir, d) = synthetic_dir(
        &spec(4, 5, 2, 60),
        "[factors]\nr = 2\n[estimate]\nestimator = \"sur\"\n",
    );
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "o", "estimate"],
    ));
    let report = read_json(dir.path().join("o/estimate.json"));

    let panel = read_panel(&dir.path().join("panel")).unwrap();
    let (model, _) = estimate_factor_model(&panel, 2).unwrap();
    let fit = model::fit(
        &d.y,
        model.factors(),
        &FitOptions {
            estimator: fnar::model::Estimator::sur(),
            ..Default::default()
        },
    )
    .unwrap();
    let coefs = report["coefficients"].as_array().unwrap();
    assert_eq!(coefs.len(), fit.theta.len());
    for (j, c) in coefs.iter().enumerate() {
        assert_eq!(c["name"], fit.column_names[j].as_str());
        assert_eq!(c["estimate"].as_f64().unwrap().to_bits(), fit.theta[j].to_bits());
    }
    let b = model::rescale_to_layers(&fit, &model).unwrap();
    let effects: Vec<f64> = report["layer_effects"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert_eq!(effects, b.iter().copied().collect::<Vec<_>>());
    let resid = fs::read_to_string(dir.path().join("o/residuals.csv")).unwrap();
    assert_eq!(resid.lines().count(), 1 + 59 * 4);
}

#[test]
fn heterogeneous_estimate_has_no_layer_effects() {
    let (dir, _) = synthetic_dir(
        &spec(3, 4, 1, 80),
        "[factors]\nr = 1\n[estimate]\nheterogeneous = true\n",
    );
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "o", "estimate"],
    ));
    let report = read_json(dir.path().join("o/estimate.json"));
    assert_eq!(report["mode"], "heterogeneous");
    assert!(report["layer_effects"].is_null());
    assert_eq!(report["beta"].as_array().unwrap().len(), 3);
}

#[test]
fn numerical_failures_exit_with_code_three() {
    let mut s = spec(3, 4, 1, 20);
    s.shock_sd = 0.0;
    s.rho = vec![0.0; 3];
    s.beta = vec![0.0];
    let (dir, _) = synthetic_dir(&s, "[factors]\nr = 1\n");
    // a constant series makes the lag and intercept columns collinear
    let out = fnar(dir.path(), &["--config", "run.toml", "--out", "o", "estimate"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(error_json(&out)["error"]["kind"], "numerical");
}

#[test]
fn single_draw_bootstrap_is_deterministic() {
    let mut s = spec(4, 5, 1, 40);
    s.noise_sd = 0.05;
    let (dir, _) = synthetic_dir(
        &s,
        "[factors]\nr = 1\n[bootstrap]\niterations = 1\nwrite_draws = true\n",
    );
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "a", "bootstrap"],
    ));
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "b", "bootstrap"],
    ));
    let a = fs::read(dir.path().join("a/bootstrap.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("b/bootstrap.json")).unwrap());
    let draws = fs::read_to_string(dir.path().join("a/draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 2);
    let report = read_json(dir.path().join("a/bootstrap.json"));
    assert_eq!(report["seed"], 3);
    assert_eq!(report["successful"], 1);
    let c = &report["coefficients"][0];
    assert_eq!(c["lower"], c["upper"]);

    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--seed", "4", "--out", "c", "bootstrap"],
    ));
    assert_ne!(a, fs::read(dir.path().join("c/bootstrap.json")).unwrap());
}

#[test]
fn forecast_reports_every_model() {
    let (dir, _) = synthetic_dir(
        &spec(4, 4, 1, 60),
        "[factors]\nr = 1\n[forecast]\nwindows = 12\npc_components = 1\n[forecast.lasso]\nfolds = 5\ngrid_size = 10\n",
    );
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "o", "forecast"],
    ));
    let csv = fs::read_to_string(dir.path().join("o/forecast.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("node,fnar_mse,ar1_mse"));
    assert!(header.contains("minnesota_bvar_ratio"));
    assert_eq!(csv.lines().count(), 5);
    let json = read_json(dir.path().join("o/forecast.json"));
    assert_eq!(json["targets"].as_array().unwrap().len(), 12);
    let models = json["models"].as_array().unwrap();
    assert_eq!(models.len(), 5);
    assert_eq!(models[1]["model"], "ar1");
    assert!(models[1]["ratio_to_ar1"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r == 1.0));
    assert_eq!(models[0]["diebold_mariano"][0]["status"], "equal");
}

#[test]
fn simulate_factor_rates_default_grid() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("sim.toml"), "seed = 5\n[simulate]\nreps = 15\n").unwrap();
    ok(&fnar(
        dir.path(),
        &["--config", "sim.toml", "--out", "o", "simulate"],
    ));
    let json = read_json(dir.path().join("o/simulate.json"));
    assert_eq!(json["experiment"], "factor_rates");
    let slope = json["loading_slope_t"].as_f64().unwrap();
    assert!((-0.65..=-0.35).contains(&slope), "{slope}");
    let csv = fs::read_to_string(dir.path().join("o/simulate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 10);
}

#[test]
fn simulate_theta_path() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("sim.toml"),
        "[simulate]\nexperiment = \"theta_rates\"\nn = 4\nr = 1\npath = [[5, 50], [10, 200]]\nreps = 4\n",
    )
    .unwrap();
    ok(&fnar(
        dir.path(),
        &["--config", "sim.toml", "--out", "o", "simulate"],
    ));
    let json = read_json(dir.path().join("o/simulate.json"));
    assert_eq!(json["cells"].as_array().unwrap().len(), 2);
}

#[test]
fn quarterly_series_on_an_annual_panel() {
    let d = generate(&spec(3, 4, 1, 12)).unwrap();
    let years: Vec<String> = (2001..2013).map(|y| y.to_string()).collect();
    let labels = fnar::netweights::PanelLabels {
        periods: years,
        ..d.panel.labels().clone()
    };
    let panel = fnar::netweights::WeightPanel::new(labels, d.panel.tensors().to_vec()).unwrap();
    let dir = TempDir::new().unwrap();
    write_panel(&dir.path().join("panel"), &panel).unwrap();
    let long = generate(&spec(3, 4, 1, 48)).unwrap();
    let mut rows = Vec::new();
    for t in 0..48 {
        for i in 0..3 {
            let q = format!("{}Q{}", 2001 + t / 4, t % 4 + 1);
            rows.push(vec![q, format!("n{i}"), num(long.y.values()[(t, i)])]);
        }
    }
    write_csv(&dir.path().join("y.csv"), &["period", "node", "value"], rows).unwrap();
    fs::write(
        dir.path().join("run.toml"),
        "[data]\npanel = \"panel\"\nseries = \"y.csv\"\nfrequency = \"annual\"\n[factors]\nr = 1\n",
    )
    .unwrap();
    ok(&fnar(
        dir.path(),
        &["--config", "run.toml", "--out", "o", "estimate"],
    ));
    assert_eq!(read_json(dir.path().join("o/estimate.json"))["n_obs"], 47);
    let resid = fs::read_to_string(dir.path().join("o/residuals.csv")).unwrap();
    assert!(resid.lines().nth(1).unwrap().starts_with("2001Q2,"));

    fs::write(
        dir.path().join("run.toml"),
        "[data]\npanel = \"panel\"\nseries = \"y.csv\"\n[factors]\nr = 1\n",
    )
    .unwrap();
    let out = fnar(dir.path(), &["--config", "run.toml", "--out", "p", "estimate"]);
    assert_eq!(out.status.code(), Some(2));
}
