use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn spinfeed(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinfeed")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = spinfeed(args, cwd);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    (header, lines.map(|l| l.split(',').map(String::from).collect()).collect())
}

#[test]
fn gen_family_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--n", "12", "--k", "2", "--alpha", "1.2", "--count", "100", "--seed", "7", "--out", "a"], d);
    ok(&["gen", "--n", "12", "--k", "2", "--alpha", "1.2", "--count", "100", "--seed", "7", "--out", "b"], d);
    let cnfs: Vec<_> = fs::read_dir(d.join("a")).unwrap().filter_map(|e| e.ok()).filter(|e| e.path().extension().unwrap() == "cnf").collect();
    assert_eq!(cnfs.len(), 100);
    for e in cnfs {
        let a = fs::read(e.path()).unwrap();
        let b = fs::read(d.join("b").join(e.file_name())).unwrap();
        assert_eq!(a, b);
        let f = spinfeed::problem::parse_dimacs(std::str::from_utf8(&a).unwrap()).unwrap();
        assert_eq!(f.num_clauses(), 14);
    }
    let meta: Value = serde_json::from_str(&fs::read_to_string(d.join("a/inst_0003.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 10);

    ok(&["gen", "--n", "10", "--k", "3", "--alpha", "4.2", "--out", "c"], d);
    let f = spinfeed::problem::parse_dimacs(&fs::read_to_string(d.join("c/inst_0000.cnf")).unwrap()).unwrap();
    assert_eq!(f.num_clauses(), 42);

    assert!(!spinfeed(&["gen", "--n", "10", "--k", "3", "--out", "x"], d).status.success());
    assert!(!spinfeed(&["gen", "--n", "2", "--k", "3", "--m", "4", "--out", "x"], d).status.success());
}

#[test]
fn solve_writes_record_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.cnf"), "p cnf 5 0\n").unwrap();
    let rec: Value = serde_json::from_str(&ok(&["solve", "--algorithm", "cacao", "--problem", "empty.cnf", "--T", "1", "--out", "run"], d)).unwrap();
    assert_eq!(rec["final_energy"].as_f64(), Some(0.0));
    assert_eq!(rec["convergence_time"].as_f64(), Some(0.0));
    let saved: Value = serde_json::from_str(&fs::read_to_string(d.join("run/record.json")).unwrap()).unwrap();
    assert_eq!(saved, rec);
    let (header, rows) = csv_rows(&d.join("run/trajectory.csv"));
    assert_eq!(header, ["t", "energy", "energy_density", "norm_beta_x", "norm_beta_y", "norm_beta_pair"]);
    assert_eq!(rows.len(), 1001);

    ok(&["gen", "--n", "8", "--k", "2", "--m", "10", "--out", "fam"], d);
    let rec: Value = serde_json::from_str(&ok(
        &["solve", "--algorithm", "hot-cacao", "--problem", "fam/inst_0000.cnf", "--T", "1", "--init", "random", "--seed", "4", "--out", "r2", "--format", "gnuplot"],
        d,
    ))
    .unwrap();
    assert_eq!(rec["init_seed"], 4);
    assert_eq!(rec["pair_scope"], "graph");
    assert!(fs::read_to_string(d.join("r2/trajectory.dat")).unwrap().starts_with("# t energy"));

    let mut big = String::from("p cnf 30 2\n");
    big.push_str("1 2 0\n29 -30 0\n");
    fs::write(d.join("big.cnf"), big).unwrap();
    let out = spinfeed(&["solve", "--algorithm", "falqon", "--problem", "big.cnf", "--T", "1"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("quantum engine cap exceeded"));
}

fn bench_config(out: &str) -> String {
    format!(
        r#"{{
  "name": "tiny",
  "problem": {{ "n": 10, "k": 2, "alpha": 1.2, "instances": 3, "seed_base": 11 }},
  "algorithms": [
    {{ "name": "cacao" }},
    {{ "name": "hot-cacao-plus", "init": "random", "init_seeds": 2, "init_seed_base": 5 }},
    {{ "name": "ifalqon" }}
  ],
  "sweep": {{ "time": [0.5, 1.0, 2.0] }},
  "integrator": {{ "dt": 0.001 }},
  "output_dir": "{out}",
  "trace_stride": 50
}}"#
    )
}

fn strip_timing(line: &str) -> Value {
    let mut v: Value = serde_json::from_str(line).unwrap();
    v.as_object_mut().unwrap().remove("wall_seconds");
    v
}

#[test]
fn bench_layout_aggregates_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), bench_config("exp")).unwrap();
    ok(&["bench", "cfg.json"], d);
    ok(&["bench", "cfg.json", "--out", "exp2"], d);
    for f in ["config.json", "records.jsonl", "aggregates.csv", "series/cacao.csv", "series/ifalqon.csv"] {
        assert!(d.join("exp").join(f).exists(), "{f}");
    }
    assert_eq!(fs::read_dir(d.join("exp/traces")).unwrap().count(), 3 * 4);

    let a = fs::read_to_string(d.join("exp/records.jsonl")).unwrap();
    let b = fs::read_to_string(d.join("exp2/records.jsonl")).unwrap();
    let ra: Vec<Value> = a.lines().map(strip_timing).collect();
    let rb: Vec<Value> = b.lines().map(strip_timing).collect();
    assert_eq!(ra.len(), 3 * 4 * 3);
    assert_eq!(ra, rb);

    let (header, rows) = csv_rows(&d.join("exp/aggregates.csv"));
    assert_eq!(rows.len(), 3 * 3);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in rows {
        let alg = &row[col("algorithm")];
        let t: f64 = row[col("t_total")].parse().unwrap();
        let dens: Vec<f64> = ra
            .iter()
            .filter(|r| r["algorithm"] == alg.as_str() && r["t_total"].as_f64() == Some(t))
            .map(|r| r["final_energy_density"].as_f64().unwrap())
            .collect();
        let n = dens.len() as f64;
        let mean = dens.iter().sum::<f64>() / n;
        let std = (dens.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert_eq!(row[col("runs")].parse::<f64>().unwrap(), n);
        assert!((row[col("mean_density")].parse::<f64>().unwrap() - mean).abs() < 1e-12);
        assert!((row[col("std_density")].parse::<f64>().unwrap() - std).abs() < 1e-12);
    }
}

#[test]
fn bench_rejects_unsorted_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), bench_config("exp").replace("[0.5, 1.0, 2.0]", "[1.0, 0.5]")).unwrap();
    let out = spinfeed(&["bench", "cfg.json"], d);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ascending"));
}

#[test]
fn compare_empty_formula_is_origin() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("fam")).unwrap();
    fs::write(d.join("fam/empty.cnf"), "p cnf 4 0\n").unwrap();
    let stdout = ok(&["compare", "--dir", "fam", "--t-max", "1", "--out", "cmp"], d);
    assert!(stdout.contains("ties 1"));
    let (header, rows) = csv_rows(&d.join("cmp/compare.csv"));
    assert_eq!(rows.len(), 2);
    let q = header.iter().position(|h| h == "quantum_density").unwrap();
    for row in rows {
        assert_eq!(row[q].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[q + 1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[q + 2].parse::<f64>().unwrap(), 0.0);
    }
    let summary: Value = serde_json::from_str(&fs::read_to_string(d.join("cmp/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summaries"][0]["ties"], 1);
}

#[test]
fn dynamics_traces() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["gen", "--n", "10", "--k", "3", "--alpha", "4.2", "--seed", "3", "--out", "fam"], d);
    ok(&["dynamics", "--problem", "fam/inst_0000.cnf", "--algorithms", "cacao,hot-cacao-plus", "--seeds", "0,1", "--T", "2", "--out", "dyn"], d);
    let (header, rows) = csv_rows(&d.join("dyn/cacao_seed0.csv"));
    assert!(rows.len() <= 21 && rows.len() >= 19);
    let bx = header.iter().position(|h| h == "norm_beta_x").unwrap();
    let bp = header.iter().position(|h| h == "norm_beta_pair").unwrap();
    for row in &rows {
        assert_eq!(row[bx].parse::<f64>().unwrap(), 0.0);
        assert_eq!(row[bp].parse::<f64>().unwrap(), 0.0);
    }
    assert!(d.join("dyn/hot-cacao-plus_seed1.csv").exists());
}

#[test]
fn selftest_passes() {
    let out = ok(&["selftest"], Path::new("."));
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 8);
}
