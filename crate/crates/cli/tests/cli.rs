use std::process::{Command, Output};

fn wanewave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wanewave"))
        .args(args)
        .env_remove("WANEWAVE_JOBS")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn header(csv: &str) -> &str {
    csv.lines().find(|l| !l.starts_with('#')).unwrap()
}

#[test]
fn no_arguments_prints_usage() {
    let out = wanewave(&[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn unknown_flag_is_an_input_error() {
    assert_eq!(wanewave(&["switches", "--bogus"]).status.code(), Some(2));
}

#[test]
fn subthreshold_r0_is_an_input_error() {
    let out = wanewave(&["equilibrium", "--r0", "0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(out.stdout.is_empty());
}

#[test]
fn switches_at_nu_one() {
    let out = wanewave(&["switches", "--nu", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("# wanewave switches: switches table\n# config: {"));
    assert_eq!(header(&text), "nu,tau_star,omega,branch,n,delta");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 10);
    let taus: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(taus.windows(2).all(|w| w[0] < w[1]));
    assert!((taus[9] - 13.395).abs() < 1e-3);
}

#[test]
fn equilibrium_matches_closed_form_without_boosting() {
    let out = wanewave(&["equilibrium", "--nu", "0", "--tau", "7"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let cols: Vec<&str> = header(&text).split(',').collect();
    let row = &data_rows(&text)[0];
    let get = |name: &str| -> f64 {
        row[cols.iter().position(|c| *c == name).unwrap()]
            .parse()
            .unwrap()
    };
    assert!((get("i") - get("i_closed_form")).abs() < 1e-12);
    assert!((get("s") - 1.0 / get("r0")).abs() < 1e-12);
}

#[test]
fn flags_override_params_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"r0": 12, "nu": 2, "tau": 3}"#).unwrap();
    let out = wanewave(&[
        "equilibrium",
        "--params",
        path.to_str().unwrap(),
        "--tau",
        "5",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains(r#""nu":2.0,"tau":5.0"#));
    let cols: Vec<&str> = header(&text).split(',').collect();
    let row = &data_rows(&text)[0];
    let r0: f64 = row[cols.iter().position(|c| *c == "r0").unwrap()]
        .parse()
        .unwrap();
    assert!((r0 - 12.0).abs() < 1e-9);
}

#[test]
fn malformed_params_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, "{not json").unwrap();
    let out = wanewave(&["equilibrium", "--params", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let missing = wanewave(&[
        "equilibrium",
        "--params",
        dir.path().join("none.json").to_str().unwrap(),
    ]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn out_directory_receives_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("run");
    let out = wanewave(&["switches", "--nu", "4.8", "--out", target.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let switches = std::fs::read_to_string(target.join("switches.csv")).unwrap();
    let intervals = std::fs::read_to_string(target.join("intervals.csv")).unwrap();
    assert_eq!(data_rows(&switches).len(), 4);
    let verdicts: Vec<String> = data_rows(&intervals)
        .into_iter()
        .map(|r| r[3].clone())
        .collect();
    assert_eq!(
        verdicts,
        ["stable", "unstable", "stable", "unstable", "stable"]
    );
}

#[test]
fn simulate_writes_samples_and_figure() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("orbit.svg");
    let out = wanewave(&[
        "simulate",
        "--nu",
        "3.2",
        "--tau",
        "4",
        "--tmax",
        "2",
        "--dt",
        "0.5",
        "--svg",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(header(&text), "t,S,I,Y");
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 5);
    for r in &rows {
        let (s, i): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(s > 0.0 && i > 0.0 && s + i < 1.0);
    }
    let figure = std::fs::read_to_string(svg).unwrap();
    assert!(figure.starts_with("<svg") && figure.contains("<polyline"));
}

#[test]
fn simulate_rejects_history_off_the_simplex() {
    let out = wanewave(&["simulate", "--s0", "0.9", "--i0", "0.2", "--tmax", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let args = [
        "attractors",
        "--nu",
        "3.2",
        "--tau",
        "4",
        "--grid",
        "2",
        "--random",
        "3",
        "--transient",
        "100",
        "--window",
        "40",
    ];
    let first = wanewave(&args);
    assert!(first.status.success());
    let second = Command::new(env!("CARGO_BIN_EXE_wanewave"))
        .args(args)
        .env("WANEWAVE_JOBS", "1")
        .output()
        .unwrap();
    assert!(second.status.success());
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(
        header(&stdout(&first)),
        "index,kind,i_min,i_max,period,peak_dispersion,peak_lag,basin_size,s0,i0"
    );
}

#[test]
fn zero_jobs_is_rejected() {
    assert_eq!(
        wanewave(&["equilibrium", "--jobs", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn region_rows_cover_the_nu_grid() {
    let out = wanewave(&[
        "region",
        "--nu-min",
        "1",
        "--nu-max",
        "2",
        "--nu-steps",
        "3",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let nus: std::collections::BTreeSet<String> =
        data_rows(&text).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(nus.len(), 3);
}
