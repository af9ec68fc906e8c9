use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adahuber::simlab::rng_from_seed;
use rand_distr::{Distribution, StandardNormal, StudentT};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_adahuber"))
}

fn run(args: &[&str]) -> Output {
    bin().env_remove("ADAHUBER_THREADS").args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn field(report: &str, key: &str) -> String {
    report
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("no {key} in\n{report}"))
        .to_owned()
}

fn write(dir: &Path, name: &str, contents: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

/// y = 2 x + small heavy-tailed noise.
fn linear_csv(dir: &Path, n: usize) -> PathBuf {
    let mut rng = rng_from_seed(7);
    let t = StudentT::new(2.5).unwrap();
    let mut s = String::from("y,x\n");
    for _ in 0..n {
        let x: f64 = StandardNormal.sample(&mut rng);
        let e: f64 = t.sample(&mut rng);
        s.push_str(&format!("{},{}\n", 2.0 * x + 0.1 * e, x));
    }
    write(dir, "lin.csv", &s)
}

/// Ten covariates, the first two active, t(3) noise.
fn sparse_csv(dir: &Path, n: usize) -> PathBuf {
    let mut rng = rng_from_seed(11);
    let t = StudentT::new(3.0).unwrap();
    let mut s = String::from("y");
    for j in 0..10 {
        s.push_str(&format!(",x{j}"));
    }
    s.push('\n');
    for _ in 0..n {
        let x: Vec<f64> = (0..10).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e: f64 = t.sample(&mut rng);
        s.push_str(&(3.0 * x[0] - 2.0 * x[1] + e).to_string());
        for v in x {
            s.push_str(&format!(",{v}"));
        }
        s.push('\n');
    }
    write(dir, "sparse.csv", &s)
}

#[test]
fn fit_recovers_slope() {
    let dir = tempfile::tempdir().unwrap();
    let input = linear_csv(dir.path(), 200);
    let o = run(&["fit", "--input", input.to_str().unwrap(), "--response", "y"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(field(&out, "solver"), "irls");
    assert_eq!(field(&out, "tau_source"), "plug_in");
    assert_eq!(field(&out, "converged"), "true");
    let b: f64 = field(&out, "coef:x").parse().unwrap();
    assert!((b - 2.0).abs() < 0.05, "{b}");
}

#[test]
fn given_tau_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let input = linear_csv(dir.path(), 50);
    let o = run(&["fit", "--input", input.to_str().unwrap(), "--response", "y", "--tau", "0.75"]);
    let out = stdout(&o);
    assert_eq!(field(&out, "tau").parse::<f64>().unwrap(), 0.75);
    assert_eq!(field(&out, "tau_source"), "given");
}

#[test]
fn intercept_adds_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let input = linear_csv(dir.path(), 50);
    let o = run(&["fit", "--input", input.to_str().unwrap(), "--response", "y", "--intercept"]);
    assert_eq!(o.status.code(), Some(0));
    let b: f64 = field(&stdout(&o), "coef:(intercept)").parse().unwrap();
    assert!(b.abs() < 0.1);
}

#[test]
fn iteration_cap_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = sparse_csv(dir.path(), 60);
    let o = run(&["fit-l1", "--input", input.to_str().unwrap(), "--response", "y", "--max-iter", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(field(&stdout(&o), "converged"), "false");
}

#[test]
fn penalized_fits_report_levels() {
    let dir = tempfile::tempdir().unwrap();
    let input = sparse_csv(dir.path(), 100);
    let path = input.to_str().unwrap();
    let o = run(&["fit-l1", "--input", path, "--response", "y", "--lambda", "0.05", "--tol", "1e-8"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(field(&out, "lambda").parse::<f64>().unwrap(), 0.05);
    assert!((field(&out, "coef:x0").parse::<f64>().unwrap() - 3.0).abs() < 0.5);

    let o = run(&["fit-truncated", "--input", path, "--response", "y", "--varpi", "2.5"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(field(&out, "solver"), "lamm_truncated");
    assert_eq!(field(&out, "varpi").parse::<f64>().unwrap(), 2.5);
}

#[test]
fn missing_response_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = linear_csv(dir.path(), 10);
    let o = run(&["fit", "--input", input.to_str().unwrap(), "--response", "z"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("\"z\"") && err.contains("y, x"), "{err}");
}

#[test]
fn unparsable_cell_is_located() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "bad.csv", "y,x\n1,2\n2,oops\n");
    let o = run(&["fit", "--input", input.to_str().unwrap(), "--response", "y"]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("row 2") && err.contains("oops"), "{err}");
}

#[test]
fn cv_reports_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let input = sparse_csv(dir.path(), 90);
    let out_path = dir.path().join("cv.csv");
    let o = run(&[
        "tune",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(
        header,
        [
            "c_tau", "c_lambda", "tau", "lambda", "fold_1_mae", "fold_2_mae", "fold_3_mae", "mean_mae", "status",
            "selected", "forced"
        ]
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 9);
    assert_eq!(rows.iter().filter(|r| r[9] == "true").count(), 1);
    assert!(rows.iter().all(|r| r[10] == "false"));
}

#[test]
fn singleton_grid_is_forced() {
    let dir = tempfile::tempdir().unwrap();
    let input = sparse_csv(dir.path(), 60);
    let o = run(&["tune", "--input", input.to_str().unwrap(), "--response", "y", "--grid", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().nth(1).unwrap().ends_with("true,true"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("forced"));
}

#[test]
fn lepski_reports_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = linear_csv(dir.path(), 200);
    let o = run(&[
        "tune",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--method",
        "lepski",
        "--format",
        "jsonl",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows.iter().filter(|r| r["selected"] == true).count(), 1);
    for w in rows.windows(2) {
        assert!(w[1]["tau"].as_f64().unwrap() > w[0]["tau"].as_f64().unwrap());
    }
}

fn lines_of(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn simulate_table1_writes_replications() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t1");
    let o = run(&["simulate", "--experiment", "table1", "--reps", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reps = lines_of(&out.join("table1_replications.csv"));
    assert_eq!(reps.len(), 1 + 3 * 2 * 2);
    let summary = lines_of(&out.join("table1_summary.csv"));
    assert_eq!(summary.len(), 1 + 3 * 2);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("table1_metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["replications"], 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("finished in"));
}

#[test]
fn simulate_phase_covers_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ph");
    let o = run(&[
        "simulate",
        "--experiment",
        "phase",
        "--reps",
        "3",
        "--df-grid",
        "1.5,3",
        "--n-grid",
        "100,200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = lines_of(&out.join("phase_summary.csv"));
    assert_eq!(summary.len(), 1 + 4);
    assert!(summary[0].starts_with("df,delta,n,d,n_eff"));
}

#[test]
fn simulate_is_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("n{threads}"));
        let o = run(&[
            "--threads",
            threads,
            "simulate",
            "--experiment",
            "neff",
            "--reps",
            "3",
            "--d-grid",
            "20,40",
            "--neff-grid",
            "20,40",
            "--format",
            "jsonl",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        texts.push(std::fs::read(out.join("neff_summary.jsonl")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn diagnose_flags_columns() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng_from_seed(5);
    let t3 = StudentT::new(3.0).unwrap();
    let mut s = String::from("uniform,heavy,constant\n");
    for i in 0..20_000 {
        let u = i as f64 / 20_000.0;
        let h: f64 = t3.sample(&mut rng);
        s.push_str(&format!("{u},{h},4\n"));
    }
    let input = write(dir.path(), "diag.csv", &s);
    let o = run(&["diagnose", "--input", input.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let rows: Vec<Vec<&str>> = out.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][0], "uniform");
    assert_eq!(rows[0][2], "false");
    assert_eq!(rows[1][2], "true");
    assert_eq!(rows[1][3], "true");
    assert_eq!(rows[2][4], "degenerate");
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 degenerate"));
}

#[test]
fn bad_delimiter_is_rejected() {
    let o = run(&["diagnose", "--input", "x.csv", "--delimiter", "ab"]);
    assert_eq!(o.status.code(), Some(1));
}
