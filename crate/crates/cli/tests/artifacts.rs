use std::fs;
use std::path::Path;
use std::process::Command;

use mmab_cli::{
    emit_plot, read_aggregate_csv, read_runs_csv, write_aggregate_csv, write_runs_csv, OutputError,
    PlotError,
};
use mmab_core::{
    aggregate, run_experiment, AggregateCurve, ExperimentConfig, PolicyKind, RunRecord,
};

fn small_records(runs: usize, checkpoints: usize) -> Vec<RunRecord> {
    let mut c = ExperimentConfig::linear(4, 2, 3_000, 0.9, 0.1);
    c.policy = PolicyKind::Uniform;
    c.runs = runs;
    c.checkpoints = checkpoints;
    c.master_seed = 5;
    run_experiment(&c).unwrap()
}

#[test]
fn runs_csv_roundtrip_reaggregates_identically() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("runs.csv");
    let records = small_records(4, 25);
    write_runs_csv(&records, &path).unwrap();
    let back = read_runs_csv(&path).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in records.iter().zip(&back) {
        assert_eq!(a.run_id, b.run_id);
        assert_eq!(a.checkpoints, b.checkpoints);
    }
    assert_eq!(aggregate(&back).unwrap(), aggregate(&records).unwrap());
}

#[test]
fn aggregate_csv_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    for runs in [1, 3] {
        let path = dir.path().join(format!("agg{runs}.csv"));
        let curve = aggregate(&small_records(runs, 10)).unwrap();
        write_aggregate_csv(&curve, &path).unwrap();
        assert_eq!(read_aggregate_csv(&path, runs).unwrap(), curve);
    }
}

#[test]
fn three_checkpoints_give_header_and_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agg.csv");
    let curve = aggregate(&small_records(2, 3)).unwrap();
    write_aggregate_csv(&curve, &path).unwrap();
    let text = fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0], "slot,mean,lower95,upper95");
    // every float carries at least 10 significant digits
    for field in lines[1].split(',').skip(1) {
        let mantissa = field.split('e').next().unwrap().replace(['.', '-'], "");
        assert!(mantissa.len() >= 10, "{field}");
    }
}

#[test]
fn empty_inputs_error_without_creating_files() {
    let dir = tempfile::tempdir().unwrap();
    let empty = AggregateCurve {
        runs: 0,
        points: vec![],
    };
    let csv = dir.path().join("agg.csv");
    assert!(matches!(
        write_aggregate_csv(&empty, &csv),
        Err(OutputError::Empty(_))
    ));
    assert!(!csv.exists());
    let runs = dir.path().join("runs.csv");
    assert!(matches!(
        write_runs_csv(&[], &runs),
        Err(OutputError::Empty(_))
    ));
    assert!(!runs.exists());
    let svg = dir.path().join("p.svg");
    assert!(matches!(emit_plot(&empty, &svg), Err(PlotError::Empty(_))));
    assert!(!svg.exists());
}

#[test]
fn unwritable_path_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let curve = aggregate(&small_records(2, 3)).unwrap();
    let path = dir.path().join("missing").join("agg.csv");
    assert!(write_aggregate_csv(&curve, &path).is_err());
}

#[test]
fn plots_in_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let curve = aggregate(&small_records(3, 20)).unwrap();
    let svg = dir.path().join("r.svg");
    emit_plot(&curve, &svg).unwrap();
    let text = fs::read_to_string(&svg).unwrap();
    assert!(text.starts_with("<svg"));
    assert!(text.contains("cumulative regret"));
    assert!(text.contains("<polygon"));
    let png = dir.path().join("r.png");
    emit_plot(&curve, &png).unwrap();
    assert_eq!(&fs::read(&png).unwrap()[..4], b"\x89PNG");
    let single = aggregate(&small_records(1, 20)).unwrap();
    emit_plot(&single, &dir.path().join("one.svg")).unwrap();
    assert!(matches!(
        emit_plot(&curve, &dir.path().join("r.gif")),
        Err(PlotError::UnsupportedFormat(_))
    ));
}

fn mmab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_mmab"))
        .args(args)
        .output()
        .unwrap();
    let text =
        String::from_utf8_lossy(&out.stdout).to_string() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap(), text)
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("exp.conf");
    fs::write(&p, body).unwrap();
    p.display().to_string()
}

const SMALL: &str =
    "K = 4\nM = 2\nT = 4000\nmu_top = 0.9\nmu_bottom = 0.1\nruns = 2\ncheckpoints = 20\n";

#[test]
fn cli_success_writes_all_artifacts_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let (code, text) = mmab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0, "{text}");
    }
    for f in ["runs.csv", "aggregate.csv", "metadata.json", "regret.svg"] {
        assert!(a.join(f).exists(), "{f}");
    }
    assert_eq!(
        fs::read(a.join("runs.csv")).unwrap(),
        fs::read(b.join("runs.csv")).unwrap()
    );
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["ci_available"], true);
    assert!(meta["ci_method"].as_str().unwrap().contains("1.96"));
}

#[test]
fn cli_overrides_and_png_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let body = format!(
        "{SMALL}plot_path = {}\n",
        dir.path().join("plot.png").display()
    );
    let cfg = write_config(dir.path(), &body);
    let (code, text) = mmab(&[
        "simulate",
        "--config",
        &cfg,
        "--K",
        "5",
        "--M",
        "3",
        "--T",
        "500",
        "--runs",
        "1",
        "--seed",
        "3",
        "--policy",
        "oracle",
        "--mu-top",
        "0.8",
        "--mu-bottom",
        "0.2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{text}");
    assert!(dir.path().join("plot.png").exists());
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["arms"], 5);
    assert_eq!(meta["config"]["policy"], "oracle");
    assert_eq!(meta["ci_available"], false);
    assert_eq!(meta["final_mean_regret"], 0.0);
}

#[test]
fn cli_config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("none.conf");
    assert_eq!(
        mmab(&["simulate", "--config", missing.to_str().unwrap()]).0,
        1
    );
    for body in [
        "K = 4\nM = 4\nT = 10\nmu_top = 1\nmu_bottom = 0\n",
        "K = 4\nM = 2\nT = 10\nmu_top = 0.1\nmu_bottom = 0.5\n",
        "K = 4\nM = 2\nT = 10\nmeans = 1, 0.5\n",
        "K = 4\nM = 2\nT = ten\nmu_top = 1\nmu_bottom = 0\n",
        "colour = blue\n",
    ] {
        let cfg = write_config(dir.path(), body);
        let (code, text) = mmab(&["simulate", "--config", &cfg]);
        assert_eq!(code, 1, "{body}: {text}");
    }
    let cfg = write_config(dir.path(), SMALL);
    assert_eq!(
        mmab(&["simulate", "--config", &cfg, "--policy", "greedy"]).0,
        1
    );
    assert_eq!(mmab(&["simulate", "--config", &cfg, "--K", "x"]).0, 1);
    assert_eq!(mmab(&["launch"]).0, 1);
}

#[test]
fn cli_output_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = blocker.join("sub");
    let (code, text) = mmab(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{text}");
}
