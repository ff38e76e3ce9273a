use serde_json::Value;
use spinfeed_web::{compare_json, inspect_dimacs_json, solve_random_json};

#[test]
fn solve_returns_descending_trace() {
    let v: Value = serde_json::from_str(&solve_random_json("hot-cacao", 20, 3, 4.2, 2, 2.0, true).unwrap()).unwrap();
    let s = &v["series"][0];
    let e: Vec<f64> = s["energy"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!(e.len() > 10 && e.len() <= 121);
    assert!(e.windows(2).all(|w| w[1] <= w[0] + 1e-8));
    assert_eq!(s["assignment"].as_array().unwrap().len(), 20);
    assert_eq!(v["m"], 84);
}

#[test]
fn solve_rejects_bad_input() {
    assert!(solve_random_json("nope", 10, 3, 4.2, 1, 1.0, false).is_err());
    assert!(solve_random_json("falqon", 30, 2, 1.2, 1, 1.0, false).unwrap_err().contains("qubits"));
    assert!(solve_random_json("cacao", 10, 3, 4.2, 1, 1e6, false).is_err());
}

#[test]
fn compare_has_four_series() {
    let v: Value = serde_json::from_str(&compare_json(6, 1.2, 1, 1.0).unwrap()).unwrap();
    let names: Vec<&str> = v["series"].as_array().unwrap().iter().map(|s| s["algorithm"].as_str().unwrap()).collect();
    assert_eq!(names, ["falqon", "cc-falqon", "ifalqon", "cc-ifalqon"]);
    assert!(v["ground_energy"].as_f64().is_some());
    assert!(compare_json(20, 1.2, 1, 1.0).is_err());
}

#[test]
fn inspect_reports_optimum() {
    let v: Value = serde_json::from_str(&inspect_dimacs_json("p cnf 2 2\n1 0\n-1 0\n").unwrap()).unwrap();
    assert_eq!(v["n"], 2);
    assert_eq!(v["ground_energy"].as_f64(), Some(1.0));
    assert!(inspect_dimacs_json("garbage").is_err());
}
