use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{init_fixed, run, AlgorithmKind, IntegratorConfig, PairScope, RunOptions};
use crate::error::Result;
use crate::oracles::{finite_diff_gradient, hamilton_chart_integrate, poisson_bracket_residuals, ChartState};
use crate::problem::{
    cnf_to_hubo, count_unsatisfied, emit_dimacs, generate_random_ksat, parse_dimacs, HuboPolynomial,
    HuboTerm, SpinAssignment,
};
use crate::quantum::{bloch_vector, run_feedback, PropagationMethod, QuantumAlgorithm, QuantumRunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTestResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Check = fn() -> Result<(bool, String)>;

/// Fast oracle checks of every engine; each returns a pass flag and the
/// measured deviation.
pub fn run_selftest() -> Vec<SelfTestResult> {
    let checks: [(&str, Check); 8] = [
        ("gradient-finite-difference", gradient_fd),
        ("energy-counts-unsatisfied", energy_unsat),
        ("dimacs-round-trip", dimacs_round_trip),
        ("classical-descent", classical_descent),
        ("chart-equivalence", chart_equivalence),
        ("quantum-splitting-vs-taylor", splitting_vs_taylor),
        ("quantum-beta-sum", beta_sum),
        ("mean-field-product-state", mean_field),
    ];
    checks
        .iter()
        .map(|(name, f)| {
            let start = Instant::now();
            let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
            SelfTestResult { name: name.to_string(), passed, detail, seconds: start.elapsed().as_secs_f64() }
        })
        .collect()
}

fn gradient_fd() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let hubo = cnf_to_hubo(&generate_random_ksat(20, 3, 84, seed)?);
        let z: Vec<f64> = (0..20).map(|i| ((i * 7 + seed as usize) % 11) as f64 / 5.5 - 1.0).collect();
        let g = hubo.gradient_z(&z)?;
        let fd = finite_diff_gradient(&hubo, &z, 1e-5)?;
        worst = g.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok((worst < 1e-6, format!("max deviation {worst:.3e}")))
}

fn energy_unsat() -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for seed in 0..6 {
        let k = 1 + (seed as usize % 3);
        let f = generate_random_ksat(8, k, 12, seed)?;
        let hubo = cnf_to_hubo(&f);
        for bits in 0..1u64 << 8 {
            let a = SpinAssignment::from_bits(8, bits);
            let e = hubo.energy(&a.to_reals())?;
            worst = worst.max((e - count_unsatisfied(&f, &a)? as f64).abs());
        }
    }
    Ok((worst <= 1e-12 * 12.0, format!("max deviation {worst:.3e}")))
}

fn dimacs_round_trip() -> Result<(bool, String)> {
    let f = generate_random_ksat(30, 3, 126, 9)?;
    let back = parse_dimacs(&emit_dimacs(&f))?;
    Ok((back == f, format!("{} clauses", f.num_clauses())))
}

fn classical_descent() -> Result<(bool, String)> {
    let hubo = cnf_to_hubo(&generate_random_ksat(12, 2, 14, 3)?);
    let init = init_fixed(12)?;
    let mut worst = f64::NEG_INFINITY;
    for kind in AlgorithmKind::ALL {
        let r = run(kind, &hubo, &init, &IntegratorConfig::new(1e-3, 4.0), &RunOptions::default())?;
        worst = worst.max(r.max_energy_increase);
    }
    Ok((worst <= 1e-8, format!("largest step increase {worst:.3e}")))
}

fn chart_equivalence() -> Result<(bool, String)> {
    let hubo = cnf_to_hubo(&generate_random_ksat(3, 2, 3, 5)?);
    let init = init_fixed(3)?;
    let cfg = IntegratorConfig::new(1e-3, 1.0);
    let mut dev = 0.0f64;
    let mut bracket = 0.0f64;
    for kind in [AlgorithmKind::Cacao, AlgorithmKind::CcIfalqon] {
        let opts = RunOptions { snapshot_stride: Some(1), ..Default::default() };
        let spin = run(kind, &hubo, &init, &cfg, &opts)?;
        let chart = hamilton_chart_integrate(&hubo, kind, &ChartState::from_spins(&init)?, &cfg, PairScope::Graph)?;
        for (a, b) in chart.spins()?.iter().zip(&spin.trajectory.snapshots) {
            for (x, y) in a.spins().iter().zip(&b.spins) {
                dev = (0..3).map(|c| (x[c] - y[c]).abs()).fold(dev, f64::max);
            }
        }
        bracket = bracket.max(poisson_bracket_residuals(&chart.charts));
    }
    Ok((dev < 1e-8 && bracket < 1e-10, format!("trajectory deviation {dev:.3e}, bracket residual {bracket:.3e}")))
}

fn splitting_vs_taylor() -> Result<(bool, String)> {
    let hubo = cnf_to_hubo(&generate_random_ksat(6, 2, 7, 2)?);
    let base = QuantumRunConfig { z_stride: 0, ..QuantumRunConfig::new(1e-2, 1.0) };
    let a = run_feedback(QuantumAlgorithm::Ifalqon, &hubo, &base)?;
    let b = run_feedback(
        QuantumAlgorithm::Ifalqon,
        &hubo,
        &QuantumRunConfig { method: PropagationMethod::Taylor, ..base },
    )?;
    let dev = a.final_state.distance(&b.final_state);
    Ok((dev < 1e-8, format!("final state distance {dev:.3e}")))
}

fn beta_sum() -> Result<(bool, String)> {
    let hubo = cnf_to_hubo(&generate_random_ksat(8, 2, 10, 4)?);
    let cfg = QuantumRunConfig { z_stride: 0, audit_beta_sum: true, ..QuantumRunConfig::new(1e-2, 2.0) };
    let r = run_feedback(QuantumAlgorithm::Falqon, &hubo, &cfg)?;
    let res = r.max_beta_sum_residual;
    Ok((res < 1e-12, format!("largest |sum_i beta_i - beta| {res:.3e}")))
}

fn mean_field() -> Result<(bool, String)> {
    let h = [0.7, -0.3, 0.45, -0.9];
    let hubo = HuboPolynomial::from_terms(
        4,
        h.iter().enumerate().map(|(i, &c)| HuboTerm { coefficient: c, variables: vec![i] }),
    )?;
    let q = run_feedback(QuantumAlgorithm::Falqon, &hubo, &QuantumRunConfig { z_stride: 0, ..QuantumRunConfig::new(1e-3, 2.0) })?;
    let c = run(AlgorithmKind::CcFalqon, &hubo, &init_fixed(4)?, &IntegratorConfig::new(1e-3, 2.0), &RunOptions::default())?;
    let mut dev = 0.0f64;
    for (i, m) in c.final_state.spins().iter().enumerate() {
        let b = bloch_vector(&q.final_state, i)?;
        dev = (0..3).map(|k| (b[k] - m[k]).abs()).fold(dev, f64::max);
    }
    Ok((dev < 1e-4, format!("Bloch vs spin deviation {dev:.3e}")))
}
