//! Browser bindings. Each exported function takes plain numbers or text and
//! returns a JSON string; the `*_json` functions hold the logic and run natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use spinfeed::classical::{ConvergenceCriterion, PairScope};
use spinfeed::harness::{execute, Algorithm, InitMode, RunSettings};
use spinfeed::problem::{brute_force_ground, clauses_for_density, cnf_to_hubo, generate_random_ksat, parse_dimacs};
use spinfeed::quantum::{QuantumAlgorithm, DEFAULT_QUBIT_CAP};

/// Largest instance the page will run through the statevector engine.
pub const DEMO_QUBIT_CAP: usize = 12;
const TRACE_POINTS: usize = 120;
const MAX_STEPS: f64 = 2e5;

#[derive(Debug, Serialize)]
pub struct Series {
    pub algorithm: String,
    pub t: Vec<f64>,
    pub energy: Vec<f64>,
    pub final_energy: f64,
    pub convergence_time: Option<f64>,
    pub assignment: Vec<i8>,
}

#[derive(Debug, Serialize)]
pub struct SolveResult {
    pub n: usize,
    pub m: usize,
    pub ground_energy: Option<f64>,
    pub series: Vec<Series>,
}

#[derive(Debug, Serialize)]
pub struct InstanceInfo {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub hubo_terms: usize,
    pub ground_energy: Option<f64>,
    pub ground_assignment: Option<Vec<i8>>,
}

fn series(alg: Algorithm, hubo: &spinfeed::problem::HuboPolynomial, s: &RunSettings) -> Result<Series, String> {
    let out = execute(alg, hubo, s).map_err(|e| e.to_string())?;
    let tr = out.trajectory.downsample(TRACE_POINTS, false);
    Ok(Series {
        algorithm: alg.to_string(),
        t: tr.times,
        energy: tr.energies,
        final_energy: out.final_energy,
        convergence_time: out.converged.map(|c| c.time),
        assignment: out.solution.values().to_vec(),
    })
}

fn check_budget(t_total: f64, dt: f64) -> Result<(), String> {
    if !(dt > 0.0) || !(t_total >= 0.0) || t_total / dt > MAX_STEPS {
        return Err(format!("need dt > 0, T >= 0 and at most {MAX_STEPS} steps"));
    }
    Ok(())
}

fn ground(formula: &spinfeed::problem::CnfFormula) -> Option<(f64, Vec<i8>)> {
    (formula.n_vars() <= 16)
        .then(|| brute_force_ground(formula).ok())
        .flatten()
        .map(|(e, a)| (e, a.values().to_vec()))
}

/// Random instance, then one solver run. `algorithm` is any solver name.
pub fn solve_random_json(
    algorithm: &str,
    n: usize,
    k: usize,
    alpha: f64,
    seed: u64,
    t_total: f64,
    init_random: bool,
) -> Result<String, String> {
    check_budget(t_total, 1e-3)?;
    let alg: Algorithm = algorithm.parse().map_err(|e: spinfeed::Error| e.to_string())?;
    if alg.is_quantum() && n > DEMO_QUBIT_CAP {
        return Err(format!("quantum demo limited to {DEMO_QUBIT_CAP} qubits"));
    }
    let formula = generate_random_ksat(n, k, clauses_for_density(n, alpha), seed).map_err(|e| e.to_string())?;
    let hubo = cnf_to_hubo(&formula);
    let settings = RunSettings {
        dt: 1e-3,
        t_total,
        pairs: PairScope::Graph,
        init: if init_random { InitMode::Random } else { InitMode::Fixed },
        init_seed: seed,
        abort_on_drift: false,
        convergence: Some(ConvergenceCriterion::default()),
        ..RunSettings::default()
    };
    let result = SolveResult {
        n,
        m: formula.num_clauses(),
        ground_energy: ground(&formula).map(|g| g.0),
        series: vec![series(alg, &hubo, &settings)?],
    };
    serde_json::to_string(&result).map_err(|e| e.to_string())
}

/// FALQON, iFALQON and their classical counterparts on one small instance.
pub fn compare_json(n: usize, alpha: f64, seed: u64, t_total: f64) -> Result<String, String> {
    check_budget(t_total, 1e-3)?;
    if n > DEMO_QUBIT_CAP {
        return Err(format!("comparison limited to {DEMO_QUBIT_CAP} variables"));
    }
    let formula = generate_random_ksat(n, 2, clauses_for_density(n, alpha), seed).map_err(|e| e.to_string())?;
    let hubo = cnf_to_hubo(&formula);
    let settings = RunSettings {
        dt: 1e-3,
        t_total,
        qubit_cap: DEFAULT_QUBIT_CAP,
        convergence: Some(ConvergenceCriterion::default()),
        ..RunSettings::default()
    };
    let algs = [
        Algorithm::Quantum(QuantumAlgorithm::Falqon),
        Algorithm::Classical(spinfeed::classical::AlgorithmKind::CcFalqon),
        Algorithm::Quantum(QuantumAlgorithm::Ifalqon),
        Algorithm::Classical(spinfeed::classical::AlgorithmKind::CcIfalqon),
    ];
    let series = algs.iter().map(|&a| series(a, &hubo, &settings)).collect::<Result<Vec<_>, _>>()?;
    let result = SolveResult {
        n,
        m: formula.num_clauses(),
        ground_energy: ground(&formula).map(|g| g.0),
        series,
    };
    serde_json::to_string(&result).map_err(|e| e.to_string())
}

/// Parses DIMACS text and reports its size and, for small instances, the optimum.
pub fn inspect_dimacs_json(text: &str) -> Result<String, String> {
    let formula = parse_dimacs(text).map_err(|e| e.to_string())?;
    let g = ground(&formula);
    let info = InstanceInfo {
        n: formula.n_vars(),
        k: formula.k(),
        m: formula.num_clauses(),
        hubo_terms: cnf_to_hubo(&formula).num_terms(),
        ground_energy: g.as_ref().map(|g| g.0),
        ground_assignment: g.map(|g| g.1),
    };
    serde_json::to_string(&info).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn solve_random(
    algorithm: &str,
    n: usize,
    k: usize,
    alpha: f64,
    seed: u32,
    t_total: f64,
    init_random: bool,
) -> Result<String, JsValue> {
    solve_random_json(algorithm, n, k, alpha, seed.into(), t_total, init_random).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn compare(n: usize, alpha: f64, seed: u32, t_total: f64) -> Result<String, JsValue> {
    compare_json(n, alpha, seed.into(), t_total).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn inspect_dimacs(text: &str) -> Result<String, JsValue> {
    inspect_dimacs_json(text).map_err(|e| JsValue::from_str(&e))
}
