use std::fs;
use std::process::{Command, Output};

use qtlpower::report::{parse_csv, CSV_HEADER};

fn qtlpower(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtlpower"))
        .args(args)
        .env_remove("QTLPOWER_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn simulate_writes_one_row_per_subject() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ds.csv");
    let o = qtlpower(&[
        "simulate",
        "--p",
        "0.3",
        "--d",
        "15",
        "--seed",
        "4",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("subject,qtl_genotype,marker_genotype,underlying,observed,affected,treated")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 100);
    for row in rows {
        let f: Vec<&str> = row.split(',').collect();
        assert_eq!(f.len(), 7);
        let (under, obs): (f64, f64) = (f[3].parse().unwrap(), f[4].parse().unwrap());
        if f[6] == "0" {
            assert_eq!(under, obs);
        } else {
            assert_eq!(f[5], "1");
        }
    }
}

#[test]
fn selfcheck_passes() {
    let o = qtlpower(&["selfcheck"]);
    assert!(o.status.success());
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn unknown_method_is_a_usage_error() {
    let o = qtlpower(&["power", "--methods", "bogus", "--reps", "10"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        err.contains("levy") && err.contains("omit-affected"),
        "{err}"
    );
}

#[test]
fn covariate_with_lognormal_is_rejected() {
    let o = qtlpower(&[
        "power",
        "--family",
        "lognormal",
        "--methods",
        "covariate",
        "--reps",
        "10",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn verify_estimator_reports_keys() {
    let o = qtlpower(&["verify-estimator", "--reps", "10000", "--seed", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    for key in [
        "nu_hat_mean:",
        "nu_hat_variance:",
        "predicted_variance_truncated:",
        "discard_rate:",
    ] {
        assert!(text.contains(key), "{key} missing from {text}");
    }
    let too_few = qtlpower(&["verify-estimator", "--reps", "100"]);
    assert_eq!(too_few.status.code(), Some(1));
}

#[test]
fn power_csv_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &str| {
        vec![
            "power".to_string(),
            "--p=0.1,0.5".into(),
            "--d=10".into(),
            "--delta-prime=1,1/3".into(),
            "--reps=50".into(),
            "--seed=9".into(),
            format!("--out={out}"),
        ]
    };
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for (path, workers) in [(&a, "1"), (&b, "3")] {
        let mut v = args(path.to_str().unwrap());
        v.push(format!("--workers={workers}"));
        let o = Command::new(env!("CARGO_BIN_EXE_qtlpower"))
            .args(&v)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (ta, tb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with(CSV_HEADER));
    let table = parse_csv(&text).unwrap();
    assert_eq!(table.cells.len(), 2 * 2 * 7);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        "# small run\nfamily = lognormal\nreps = 20\np = 0.3\nd = 20\ndelta-prime = 1\nseed = 5\n",
    )
    .unwrap();
    let o = qtlpower(&[
        "power",
        "--config",
        cfg.to_str().unwrap(),
        "--reps",
        "30",
        "--format",
        "markdown",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let md = stdout(&o);
    assert!(md.contains("lognormal trait, Kruskal-Wallis"));
    assert!(!md.contains("Treatment covariate"));

    let o = qtlpower(&["power", "--config", cfg.to_str().unwrap(), "--reps", "30"]);
    let table = parse_csv(&stdout(&o)).unwrap();
    assert!(table.cells.iter().all(|c| c.replicates == 30));
    assert_eq!(table.cells.len(), 6);
}

#[test]
fn both_formats_write_two_files() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("grid");
    let o = qtlpower(&[
        "power",
        "--p=0.5",
        "--d=30",
        "--delta-prime=1",
        "--reps=20",
        "--format=both",
        &format!("--out={}", base.display()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("grid.csv").exists());
    assert!(dir.path().join("grid.md").exists());
}
