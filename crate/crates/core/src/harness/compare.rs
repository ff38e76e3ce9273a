use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{execute, parallel_map, Algorithm, InitMode, RunSettings};
use crate::classical::{AlgorithmKind, ConvergenceCriterion, PairScope};
use crate::error::Result;
use crate::problem::{cnf_to_hubo, CnfFormula};
use crate::quantum::{QuantumAlgorithm, DEFAULT_QUBIT_CAP};
use crate::trajectory::{fmt_f64, TableFormat};

pub const DEFAULT_T_MAX: f64 = 1e3;
pub const LONG_T_MAX: f64 = 1e4;

/// Energies closer than this count as a tie.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub pairs: Vec<(QuantumAlgorithm, AlgorithmKind)>,
    pub t_max: f64,
    pub dt: f64,
    pub criterion: ConvergenceCriterion,
    pub qubit_cap: usize,
    pub workers: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            pairs: vec![
                (QuantumAlgorithm::Falqon, AlgorithmKind::CcFalqon),
                (QuantumAlgorithm::Ifalqon, AlgorithmKind::CcIfalqon),
            ],
            t_max: DEFAULT_T_MAX,
            dt: 1e-3,
            criterion: ConvergenceCriterion::default(),
            qubit_cap: DEFAULT_QUBIT_CAP,
            workers: 1,
        }
    }
}

/// One instance under one quantum/classical pair. Energies are taken at the
/// convergence time, or at `t_max` for censored runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub instance: String,
    pub n: usize,
    pub quantum: QuantumAlgorithm,
    pub classical: AlgorithmKind,
    pub quantum_density: f64,
    pub classical_density: f64,
    pub quantum_time: f64,
    pub classical_time: f64,
    pub quantum_censored: bool,
    pub classical_censored: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub quantum: QuantumAlgorithm,
    pub classical: AlgorithmKind,
    pub instances: usize,
    pub quantum_better: usize,
    pub classical_better: usize,
    pub ties: usize,
    pub quantum_censored: usize,
    pub classical_censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub t_max: f64,
    pub rows: Vec<CompareRow>,
    pub summaries: Vec<CompareSummary>,
}

impl CompareReport {
    pub fn rows_for(&self, q: QuantumAlgorithm) -> impl Iterator<Item = &CompareRow> {
        self.rows.iter().filter(move |r| r.quantum == q)
    }

    pub fn summary_for(&self, q: QuantumAlgorithm) -> Option<&CompareSummary> {
        self.summaries.iter().find(|s| s.quantum == q)
    }
}

struct Point {
    density: f64,
    time: f64,
    censored: bool,
}

fn settle(algorithm: Algorithm, formula: &CnfFormula, cfg: &CompareConfig) -> Result<Point> {
    let hubo = cnf_to_hubo(formula);
    let settings = RunSettings {
        dt: cfg.dt,
        t_total: cfg.t_max,
        pairs: PairScope::Graph,
        init: InitMode::Fixed,
        init_seed: 0,
        qubit_cap: cfg.qubit_cap,
        convergence: Some(cfg.criterion),
        trace_stride: usize::MAX,
        ..RunSettings::default()
    };
    let out = execute(algorithm, &hubo, &settings)?;
    let n = formula.n_vars().max(1) as f64;
    Ok(match out.converged {
        Some(p) => Point { density: p.energy / n, time: p.time, censored: false },
        None => Point { density: out.final_energy / n, time: cfg.t_max, censored: true },
    })
}

/// Runs every pair on every instance. Classical counterparts start from the
/// fixed state, the image of the quantum `|+>^N`.
pub fn run_compare(instances: &[(String, CnfFormula)], cfg: &CompareConfig) -> Result<CompareReport> {
    let mut jobs: Vec<(usize, Algorithm)> = Vec::new();
    for i in 0..instances.len() {
        for &(q, c) in &cfg.pairs {
            jobs.push((i, Algorithm::Quantum(q)));
            jobs.push((i, Algorithm::Classical(c)));
        }
    }
    let points = parallel_map(&jobs, cfg.workers, |&(i, alg)| settle(alg, &instances[i].1, cfg))?;
    let mut points = points.into_iter();
    let mut rows = Vec::new();
    for (label, formula) in instances {
        for &(q, c) in &cfg.pairs {
            let qp = points.next().expect("one point per job")?;
            let cp = points.next().expect("one point per job")?;
            rows.push(CompareRow {
                instance: label.clone(),
                n: formula.n_vars(),
                quantum: q,
                classical: c,
                quantum_density: qp.density,
                classical_density: cp.density,
                quantum_time: qp.time,
                classical_time: cp.time,
                quantum_censored: qp.censored,
                classical_censored: cp.censored,
            });
        }
    }
    let summaries = cfg
        .pairs
        .iter()
        .map(|&(q, c)| {
            let mine: Vec<&CompareRow> = rows.iter().filter(|r| r.quantum == q && r.classical == c).collect();
            let tol = |r: &CompareRow| TIE_TOLERANCE / r.n.max(1) as f64;
            CompareSummary {
                quantum: q,
                classical: c,
                instances: mine.len(),
                quantum_better: mine.iter().filter(|r| r.quantum_density < r.classical_density - tol(r)).count(),
                classical_better: mine.iter().filter(|r| r.classical_density < r.quantum_density - tol(r)).count(),
                ties: mine.iter().filter(|r| (r.quantum_density - r.classical_density).abs() <= tol(r)).count(),
                quantum_censored: mine.iter().filter(|r| r.quantum_censored).count(),
                classical_censored: mine.iter().filter(|r| r.classical_censored).count(),
            }
        })
        .collect();
    Ok(CompareReport { t_max: cfg.t_max, rows, summaries })
}

pub const COMPARE_COLUMNS: [&str; 10] = [
    "instance",
    "n",
    "quantum",
    "classical",
    "quantum_density",
    "classical_density",
    "quantum_time",
    "classical_time",
    "quantum_censored",
    "classical_censored",
];

/// `compare.<ext>` with one row per instance and pair, plus `summary.json`
/// holding the counts.
pub fn write_compare(report: &CompareReport, dir: &Path, format: TableFormat) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("compare.{}", format.extension()));
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", format.header(&COMPARE_COLUMNS))?;
    for r in &report.rows {
        let fields = [
            r.instance.clone(),
            r.n.to_string(),
            r.quantum.to_string(),
            r.classical.to_string(),
            fmt_f64(r.quantum_density),
            fmt_f64(r.classical_density),
            fmt_f64(r.quantum_time),
            fmt_f64(r.classical_time),
            u8::from(r.quantum_censored).to_string(),
            u8::from(r.classical_censored).to_string(),
        ];
        writeln!(f, "{}", fields.join(format.separator()))?;
    }
    f.flush()?;
    let summary = serde_json::json!({ "t_max": report.t_max, "summaries": report.summaries });
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(())
}
