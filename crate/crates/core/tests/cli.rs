use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use weakborn::cli::{
    cmd_oracle_check, cmd_run, cmd_sweep, CliError, ExecOptions, ExperimentConfig,
};

const EXACT_UNIFORM: &str = r#"
grid_n = 4
x1 = 0
x2 = 1

[state]
kind = "uniform"
"#;

const SAMPLED: &str = r#"
grid_n = 4
x1 = 0
x2 = 1
mode = "sampled"
shots_per_setting = 100000
replications = 20
master_seed = 11

[state]
kind = "uniform"
"#;

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn number(v: &serde_json::Value) -> f64 {
    v.as_f64().unwrap()
}

#[test]
fn exact_uniform_run_reports_quarter_weights_and_zero_residual() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "exact.toml", EXACT_UNIFORM);
    let out = tmp.path().join("out");
    cmd_run(&cfg, &out, ExecOptions::default()).unwrap();

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    let t = &report["trials"][0];
    for (key, want) in [("w1", 0.25), ("w2", 0.25), ("w12", 0.5)] {
        assert!((number(&t[key]["w"]["re"]) - want).abs() < 1e-12, "{key}");
        assert!(number(&t[key]["w"]["im"]).abs() < 1e-12, "{key}");
    }
    assert!(number(&t["residual"]).abs() < 1e-12);
    assert_eq!(report["mode"], "exact");
    assert!(out.join("config.toml").exists());
    assert!(out.join("residuals.csv").exists());
    assert!(!out.join("counts_w1.csv").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sampled.toml", SAMPLED);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_run(&cfg, &a, ExecOptions::default()).unwrap();
    cmd_run(&cfg, &b, ExecOptions::default()).unwrap();
    for f in [
        "counts_w1.csv",
        "counts_w2.csv",
        "counts_w12.csv",
        "residuals.csv",
        "config.toml",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let strip = |dir: &Path| {
        let mut v: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("timing");
        v
    };
    assert_eq!(strip(&a), strip(&b));

    let counts = fs::read_to_string(a.join("counts_w12.csv")).unwrap();
    let mut lines = counts.lines();
    assert_eq!(lines.next(), Some("setting,shots,passed,plus,minus"));
    let settings: Vec<_> = lines
        .take(6)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    assert_eq!(settings, ["X", "Y", "Z", "X", "Y", "Z"]);
}

#[test]
fn replay_from_written_config_reproduces_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "sampled.toml", SAMPLED);
    let first = tmp.path().join("first");
    let exec = cmd_run(
        &cfg,
        &first,
        ExecOptions {
            workers: Some(2),
            seed: Some(99),
        },
    )
    .unwrap();
    assert_eq!(exec.config.master_seed, 99);
    let replay = tmp.path().join("replay");
    let again = cmd_run(
        &first.join("config.toml"),
        &replay,
        ExecOptions {
            workers: Some(1),
            seed: None,
        },
    )
    .unwrap();
    assert_eq!(exec.report.trials, again.report.trials);
    assert_eq!(
        fs::read(first.join("residuals.csv")).unwrap(),
        fs::read(replay.join("residuals.csv")).unwrap()
    );
}

#[test]
fn identical_marks_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "bad.toml",
        &EXACT_UNIFORM.replace("x2 = 1", "x2 = 0"),
    );
    let err = cmd_run(&cfg, &tmp.path().join("out"), ExecOptions::default()).unwrap_err();
    match &err {
        CliError::ConfigInvalid { field, .. } => {
            assert!(field.contains("x1") && field.contains("x2"), "{field}")
        }
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn unknown_field_names_its_path() {
    let err = ExperimentConfig::from_toml_str(&format!(
        "{EXACT_UNIFORM}\n[imperfections]\ndark_rat = 0.1\n"
    ))
    .unwrap_err();
    match err {
        CliError::ConfigInvalid { field, .. } => {
            assert!(field.starts_with("imperfections"), "{field}")
        }
        other => panic!("unexpected {other:?}"),
    }
}

fn sweep_table(tmp: &Path, parameter: &str, values: &[f64], config: &str) -> Vec<Vec<String>> {
    let cfg = write_config(tmp, &format!("{parameter}.toml"), config);
    let out = tmp.join(format!("sweep_{parameter}"));
    cmd_sweep(&cfg, parameter, values, &out, ExecOptions::default()).unwrap();
    fs::read_to_string(out.join(format!("sweep_{parameter}.csv")))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn column(table: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = table[0].iter().position(|h| h == name).unwrap();
    table[1..]
        .iter()
        .map(|row| row[i].parse().unwrap())
        .collect()
}

#[test]
fn shot_sweep_shrinks_standard_error() {
    let tmp = tempfile::tempdir().unwrap();
    let table = sweep_table(tmp.path(), "shots_per_setting", &[1e4, 1e5, 1e6], SAMPLED);
    assert_eq!(table.len(), 4);
    let se = column(&table, "median_se_re_w12");
    assert!(se[0] > se[1] && se[1] > se[2], "{se:?}");
    // roughly 1/sqrt(shots)
    assert!((se[0] / se[2] - 10.0).abs() < 2.0, "{se:?}");
}

#[test]
fn dark_rate_sweep_grows_bias() {
    let tmp = tempfile::tempdir().unwrap();
    let config = SAMPLED.replace("shots_per_setting = 100000", "shots_per_setting = 1000000");
    let table = sweep_table(tmp.path(), "dark_rate", &[0.0, 0.01, 0.05], &config);
    let bias = column(&table, "median_abs_residual");
    assert!(bias[0] <= bias[1] && bias[1] <= bias[2], "{bias:?}");
    assert!(bias[2] > 5.0 * bias[0], "{bias:?}");
}

#[test]
fn empty_sweep_writes_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let table = sweep_table(tmp.path(), "theta", &[], EXACT_UNIFORM);
    assert_eq!(table.len(), 1);
    assert_eq!(table[0][0], "theta");
}

#[test]
fn unknown_sweep_parameter_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", EXACT_UNIFORM);
    let err = cmd_sweep(
        &cfg,
        "grid_size",
        &[1.0],
        tmp.path(),
        ExecOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, CliError::UnknownParameter(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn oracle_check_passes_with_derived_and_fails_with_literal_prefactor() {
    let summary = cmd_oracle_check(None, ExecOptions::default()).unwrap();
    assert!(summary.passed(), "{}", summary.render());
    assert!((summary.prefactor_mismatch_factor - 4.0).abs() < 1e-12);

    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "literal.toml",
        &format!("prefactor_convention = \"paper_literal\"\n{EXACT_UNIFORM}"),
    );
    let summary = cmd_oracle_check(Some(&cfg), ExecOptions::default()).unwrap();
    assert!(!summary.passed());
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_weakborn"))
}

#[test]
fn binary_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let good = write_config(tmp.path(), "good.toml", EXACT_UNIFORM);
    let out = tmp.path().join("out");
    let status = binary()
        .args(["run", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(0));

    let bad = write_config(
        tmp.path(),
        "bad.toml",
        "grid_n = 4\nx1 = 0\nx2 = 1\nshots = 5\n[state]\nkind = \"uniform\"\n",
    );
    let output = binary()
        .args(["run", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("shots"));

    // amplitudes summing to zero leave nothing at the pinhole
    let degenerate = write_config(
        tmp.path(),
        "degenerate.toml",
        "grid_n = 2\nx1 = 0\nx2 = 1\n[state]\nkind = \"amplitudes\"\nvalues = [[1.0, 0.0], [-1.0, 0.0]]\n",
    );
    let output = binary()
        .args(["run", "--config"])
        .arg(&degenerate)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(3));

    let status = binary().arg("oracle-check").output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    let literal = write_config(
        tmp.path(),
        "literal.toml",
        &format!("prefactor_convention = \"paper_literal\"\n{EXACT_UNIFORM}"),
    );
    let status = binary()
        .args(["oracle-check", "--config"])
        .arg(&literal)
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(4));
}
