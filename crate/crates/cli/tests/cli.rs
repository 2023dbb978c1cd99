use std::path::Path;
use std::process::{Command, Output};

use mfc_core::config::{apply_overrides, to_toml};
use mfc_core::scenarios;
use mfc_core::simloop::{self, CsvTable};

fn mfc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn library_csv(name: &str, overrides: &[&str]) -> Vec<u8> {
    let ov: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    let sc = apply_overrides(&scenarios::builtin(name).unwrap(), &ov).unwrap();
    let mut out = Vec::new();
    simloop::run(&sc).unwrap().write_csv(&mut out).unwrap();
    out
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let res = mfc(&[
        "run",
        "--scenario",
        "linear-2x2",
        "--seed",
        "7",
        "--set",
        "sim.duration=3.0",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let expected = library_csv("linear-2x2", &["sim.duration=3.0", "sim.seed=7"]);
    assert_eq!(std::fs::read(&out).unwrap(), expected);
    assert!(String::from_utf8_lossy(&res.stdout).contains("diverged  no"));
}

#[test]
fn run_to_stdout() {
    let res = mfc(&["run", "--scenario", "first-order"]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(res.stdout, library_csv("first-order", &[]));
}

#[test]
fn config_file_equals_builtin() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tank.toml");
    let sc = scenarios::builtin("first-order").unwrap();
    std::fs::write(&cfg, format!("# matched plant\n{}", to_toml(&sc).unwrap())).unwrap();
    let res = mfc(&["run", "--config", path_str(&cfg)]);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(res.stdout, library_csv("first-order", &[]));
}

#[test]
fn canned_scenarios_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for name in scenarios::names() {
        let out = dir.path().join(format!("{name}.csv"));
        let res = mfc(&["run", "--scenario", name, "--out", path_str(&out)]);
        assert_eq!(res.status.code(), Some(0), "{name}");
        let table = CsvTable::read_path(&out).unwrap();
        assert!(!table.rows.is_empty());
    }
}

#[test]
fn compare_writes_both_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let res = mfc(&[
        "compare",
        "--scenario",
        "linear-2x2",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    assert_eq!(
        std::fs::read(dir.path().join("model_free.csv")).unwrap(),
        library_csv("linear-2x2", &[])
    );
    assert_eq!(
        std::fs::read(dir.path().join("classic_pid.csv")).unwrap(),
        library_csv("linear-2x2", &["sim.mode=classic_pid"])
    );
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 4);
    for j in 0..2 {
        let mf: f64 = rows[j][3].parse().unwrap();
        let cl: f64 = rows[j + 2][3].parse().unwrap();
        assert_eq!(&rows[j][0], "model_free");
        assert_eq!(&rows[j + 2][0], "classic_pid");
        assert!(mf < cl, "output {}: {mf} vs {cl}", j + 1);
        assert_eq!(&rows[j][1], "1");
        assert_eq!(&rows[j + 2][1], "1");
    }
}

#[test]
fn compare_degenerate_plant_gives_equal_rmse() {
    let dir = tempfile::tempdir().unwrap();
    let res = mfc(&[
        "compare",
        "--scenario",
        "first-order",
        "--set",
        "plant.params.offset=[0.0]",
        "--seed",
        "5",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = csv::Reader::from_reader(text.as_bytes())
        .records()
        .map(Result::unwrap)
        .collect();
    assert_eq!(rows[0][3], rows[1][3]);
    assert!(rows.iter().all(|r| &r[1] == "5"));
}

#[test]
fn divergence_exits_two() {
    let res = mfc(&[
        "run",
        "--scenario",
        "linear-2x2",
        "--set",
        "estimator.window=0.5",
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("diverged  yes"));
}

#[test]
fn configuration_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad_cfg = dir.path().join("bad.toml");
    let mut text = to_toml(&scenarios::builtin("first-order").unwrap()).unwrap();
    text.push_str("\nunknown_key = 1\n");
    std::fs::write(&bad_cfg, text).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["run", "--config", "/nonexistent/scenario.toml"],
        vec!["run", "--config", path_str(&bad_cfg)],
        vec!["run", "--scenario", "nope"],
        vec!["run", "--scenario", "first-order", "--set", "sim.nope=1"],
        vec!["run", "--scenario", "first-order", "--set", "sim.period"],
        vec!["run"],
        vec!["compare", "--config", "/nonexistent/scenario.toml"],
        vec!["estimator", "--signal", "chirp:1"],
        vec![
            "estimator",
            "--signal",
            "sine:1,1",
            "--order",
            "2",
            "--nu",
            "2",
        ],
        vec!["bogus"],
    ];
    for args in cases {
        let res = mfc(&args);
        assert_eq!(res.status.code(), Some(1), "{args:?}");
    }
}

fn estimator_rows(dir: &Path) -> CsvTable {
    CsvTable::read_path(dir.join("trace.csv")).unwrap()
}

#[test]
fn estimator_polynomial_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let res = mfc(&[
        "estimator",
        "--order",
        "2",
        "--signal",
        "polynomial:1,-2,3",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    let errors: Vec<f64> = stdout
        .lines()
        .skip_while(|l| !l.starts_with("order"))
        .skip(1)
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(errors.len(), 3);
    assert!(errors.iter().all(|e| *e < 1e-4), "{stdout}");
    let kernel = CsvTable::read_path(dir.path().join("kernel.csv")).unwrap();
    assert_eq!(kernel.rows.len(), 3);
    assert_eq!(kernel.header.len(), 1 + 501);
}

#[test]
fn estimator_constant_has_zero_derivative() {
    let dir = tempfile::tempdir().unwrap();
    let res = mfc(&[
        "estimator",
        "--signal",
        "polynomial:2.5",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let est = estimator_rows(dir.path()).column("est_1").unwrap();
    assert!(est.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn estimator_noisy_sine_beats_raw_difference() {
    let dir = tempfile::tempdir().unwrap();
    let res = mfc(&[
        "estimator",
        "--signal",
        "sine:1,0.2",
        "--noise",
        "0.1",
        "--period",
        "0.01",
        "--duration",
        "20",
        "--seed",
        "3",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&res.stdout);
    for line in stdout
        .lines()
        .skip_while(|l| !l.starts_with("order"))
        .skip(1)
    {
        let cols: Vec<f64> = line
            .split_whitespace()
            .skip(1)
            .map(|v| v.parse().unwrap())
            .collect();
        assert!(cols[1] < cols[2], "{line}");
    }
}

#[test]
fn estimator_on_csv_signal() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("series.csv");
    let mut text = String::from("t,x\n");
    for k in 0..3001 {
        let t = k as f64 * 1e-3;
        text.push_str(&format!("{t},{}\n", 2.0 * t));
    }
    std::fs::write(&series, text).unwrap();
    let spec = format!("csv:{}#x", series.display());
    let res = mfc(&[
        "estimator",
        "--signal",
        &spec,
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&res.stdout).contains("no analytic derivatives"));
    let est = estimator_rows(dir.path()).column("est_1").unwrap();
    assert!(est.iter().all(|v| (v - 2.0).abs() < 1e-8));
}
