use std::path::Path;
use std::process::{Command, Output};

fn cgp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cgp")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

const SMALL: &[&str] = &["--n", "10", "--m", "30", "--replicates", "5", "--n-t", "50", "--n-an", "300", "--sigma2-grid", "40"];

#[test]
fn experiment_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "scenario = \"variance_known_rho\"\nconstraint = \"bounds\"\nlower = -3.0\nupper = 3.0\n").unwrap();
    for run in ["a", "b"] {
        let mut args = vec!["experiment", "--config", "cfg.toml", "--seed", "42", "--out", run];
        args.extend_from_slice(SMALL);
        ok(&cgp(&args, dir.path()));
    }
    for file in ["samples.csv", "surface.csv"] {
        let a = std::fs::read(dir.path().join("a").join(file)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file}");
    }
}

#[test]
fn vacuous_bounds_reproduce_unconstrained_estimates() {
    let dir = tempfile::tempdir().unwrap();
    ok(&cgp(&["simulate", "--n", "25", "--seed", "9", "--constraint", "none", "--out", "d.csv"], dir.path()));
    let grid = ["--sigma2-grid", "60", "--rho-grid", "7", "--n-t", "100", "--n-an", "500"];
    let mut none = vec!["estimate", "--data", "d.csv", "--constraint", "none"];
    none.extend_from_slice(&grid);
    let mut wide = vec!["estimate", "--data", "d.csv", "--constraint", "bounds", "--lower", "-1e9", "--upper", "1e9"];
    wide.extend_from_slice(&grid);
    let a: serde_json::Value = serde_json::from_str(&ok(&cgp(&none, dir.path()))).unwrap();
    let b: serde_json::Value = serde_json::from_str(&ok(&cgp(&wide, dir.path()))).unwrap();
    for key in ["sigma2_hat", "rho_hat", "microergodic_hat"] {
        assert_eq!(a["cmle"][key].as_f64().unwrap().to_bits(), b["cmle"][key].as_f64().unwrap().to_bits(), "{key}");
        assert_eq!(a["mle"][key], b["cmle"][key], "{key}");
    }
}

#[test]
fn report_draws_limit_and_estimator_curves_with_medians() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["experiment", "--seed", "3", "--out", "run"];
    args.extend_from_slice(SMALL);
    ok(&cgp(&args, dir.path()));
    ok(&cgp(&["report", "--samples", "run/samples.csv", "--out", "fig.svg"], dir.path()));
    let svg = std::fs::read_to_string(dir.path().join("fig.svg")).unwrap();
    assert!(svg.contains(r#"width="800""#) && svg.contains(r#"height="600""#));
    assert_eq!(svg.matches(r#"class="curve"#).count(), 3);
    assert_eq!(svg.matches(r#"class="median"#).count(), 3);
    assert!(svg.contains("mle") && svg.contains("cmle"));
}

#[test]
fn predict_writes_one_row_per_target() {
    let dir = tempfile::tempdir().unwrap();
    ok(&cgp(&["simulate", "--n", "8", "--seed", "1", "--out", "d.csv"], dir.path()));
    let csv = ok(&cgp(&["predict", "--data", "d.csv", "--targets", "0.1,0.45,0.9", "--draws", "300"], dir.path()));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "x0,mean,var,mean_c,var_c,mc_se");
    assert_eq!(lines.len(), 4);
    for line in &lines[1..] {
        let mean_c: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!((-3.0..=3.0).contains(&mean_c));
    }
}

#[test]
fn exit_codes_distinguish_usage_data_and_numerical_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cgp(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(cgp(&["estimate"], dir.path()).status.code(), Some(1));
    assert_eq!(cgp(&["estimate", "--data", "missing.csv"], dir.path()).status.code(), Some(2));
    assert_eq!(cgp(&["experiment", "--n", "1"], dir.path()).status.code(), Some(2));
    std::fs::write(dir.path().join("bad.csv"), "x,y\n0.2,1\n0.2,2\n").unwrap();
    assert_eq!(cgp(&["estimate", "--data", "bad.csv"], dir.path()).status.code(), Some(2));
    let infeasible = [
        "predict", "--data", "d.csv", "--targets", "0.5", "--sampler", "rejection", "--max-tries", "5", "--constraint",
        "bounds", "--lower", "10", "--upper", "10.001", "--draws", "10",
    ];
    std::fs::write(dir.path().join("d.csv"), "x,y\n0.0,0.0\n1.0,0.0\n").unwrap();
    assert_eq!(cgp(&infeasible, dir.path()).status.code(), Some(3));
    assert_eq!(cgp(&["--help"], dir.path()).status.code(), Some(0));
}
