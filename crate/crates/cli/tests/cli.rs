use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mdicorr_cli::commands::{APPLIED_TRUNCATED_GAUSSIAN, APPLIED_WORST_CASE, CSV_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mdicorr"))
}

fn repo() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL: &str = "[grid]\nstart = 0\nstop = 60\nstep = 2\n\
[scenario.baseline]\nmodel = none\n\
[scenario.wc]\nmodel = worst-case\ndelta_max = 1e-9\n\
[scenario.tg]\nmodel = truncated-gaussian\ndelta_max = 0.05\n";

/// Histograms where every group is a small shift of the reference.
fn near_dataset(spread: f64) -> String {
    let mut s = String::from("pattern,bin_center,count\n");
    for (g, shift) in [("VS", -spread), ("D1S", 0.0), ("D2S", spread), ("SS", 0.0)] {
        for k in -20i32..=20 {
            let x = 1.8e-4 * (1.0 + shift + 0.002 * k as f64);
            let n = (1000.0 * (-0.5 * (k as f64 / 6.0).powi(2)).exp()).round() as u64;
            if n > 0 {
                s += &format!("{g},{x:e},{n}\n");
            }
        }
    }
    s
}

#[test]
fn simulate_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", SMALL);
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let combined = fs::read_to_string(out.join("combined.csv")).unwrap();
    let mut lines = combined.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 3 * 31);
    let base = fs::read_to_string(out.join("baseline.csv")).unwrap();
    let rates: Vec<f64> = base
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            assert_eq!(
                f[1].parse::<f64>().unwrap(),
                2.0 * f[0].parse::<f64>().unwrap()
            );
            assert_eq!(f[3], "baseline");
            f[2].parse().unwrap()
        })
        .collect();
    assert!(rates[0] > 0.0);
    assert!(rates.windows(2).all(|w| w[1] <= w[0]));
    assert!(out.join("wc.csv").exists() && out.join("tg.csv").exists());
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "run.conf", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(
        run(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()])
            .status
            .success()
    );
    assert!(
        run(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap()])
            .status
            .success()
    );
    for f in [
        "combined.csv",
        "summary.csv",
        "baseline.csv",
        "wc.csv",
        "tg.csv",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn default_scenarios_from_empty_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "empty.conf", "[grid]\nstop = 4\n");
    let out = dir.path().join("out");
    assert!(
        run(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()])
            .status
            .success()
    );
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 8);
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.conf", "[protocol]\nmu = 0.01\nnu = 0.05\n");
    let o = run(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mu > nu"));
    let cfg = write(dir.path(), "typo.conf", "[channel]\n\nalhpa = 0.2\n");
    let o = run(&["boundary", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
    let o = run(&[
        "boundary",
        "--config",
        dir.path().join("missing.conf").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn boundary_reports_infeasible_baseline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "b.conf",
        "[boundary.far]\nmodel = worst-case\npredicate = positive_at 299\n\
         [boundary.near]\nmodel = worst-case\npredicate = positive_at 100\n",
    );
    let o = run(&["boundary", "--config", &cfg]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("far:") && lines[0].ends_with("no boundary: baseline infeasible"));
    assert!(lines[1].starts_with("near:") && lines[1].contains("delta*="));
}

#[test]
fn analyze_bundled_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "analyze",
        "--config",
        repo().join("configs/analyze.conf").to_str().unwrap(),
        "--data",
        repo().join("data/sample_histograms.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("delta_max 0.67"), "{report}");
    assert!(
        report.contains("max distance, worst case: 0.0 km"),
        "{report}"
    );
    let derived = fs::read_to_string(out.join("derived.conf")).unwrap();
    assert!(derived.contains(&format!("[scenario.{APPLIED_WORST_CASE}]")));
    assert!(derived.contains(&format!("[scenario.{APPLIED_TRUNCATED_GAUSSIAN}]")));
}

fn report_km(report: &str, label: &str) -> f64 {
    let line = report.lines().find(|l| l.starts_with(label)).unwrap();
    let rest = &line[label.len()..];
    rest.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn analyze_then_simulate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "near.csv", &near_dataset(0.004));
    let cfg = write(dir.path(), "a.conf", "[grid]\nstop = 10\n");
    let out = dir.path().join("an");
    let o = run(&[
        "analyze",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout).unwrap();
    let wc = report_km(&report, "max distance, worst case:");
    let tg = report_km(&report, "max distance, truncated Gaussian:");
    assert!(tg > 0.0, "{report}");

    let sim = dir.path().join("sim");
    let derived = out.join("derived.conf");
    let o = run(&[
        "simulate",
        "--config",
        derived.to_str().unwrap(),
        "--out",
        sim.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(sim.join("summary.csv")).unwrap();
    let km = |label: &str| -> f64 {
        let l = summary
            .lines()
            .find(|l| l.starts_with(&format!("{label},")))
            .unwrap();
        l.split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!((km(APPLIED_WORST_CASE) - wc).abs() <= 0.05);
    assert!((km(APPLIED_TRUNCATED_GAUSSIAN) - tg).abs() <= 0.05);
}

#[test]
fn identical_groups_give_zero_deviation() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "same.csv", &near_dataset(0.0));
    let cfg = write(dir.path(), "a.conf", "");
    let o = run(&[
        "analyze",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8(o.stdout).unwrap();
    assert!(report.contains("delta_max 0.0000"), "{report}");
}

#[test]
fn missing_reference_group_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let text: String = near_dataset(0.0)
        .lines()
        .filter(|l| !l.starts_with("SS,"))
        .map(|l| format!("{l}\n"))
        .collect();
    let data = write(dir.path(), "noss.csv", &text);
    let cfg = write(dir.path(), "a.conf", "");
    let o = run(&[
        "analyze",
        "--config",
        &cfg,
        "--data",
        &data,
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("`SS`"), "{err}");
}
