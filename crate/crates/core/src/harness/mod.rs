//! Experiment orchestration behind the command-line tool: instance families,
//! single runs, parameter sweeps, quantum/classical comparisons and traces.

mod bench;
mod compare;
mod config;
mod dynamics;
mod family;
mod selftest;
mod solve;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::classical::{
    init_fixed, init_random, run, AlgorithmKind, ConvergenceCriterion, ConvergencePoint,
    IntegratorConfig, PairScope, RunOptions,
};
use crate::error::{Error, Result};
use crate::problem::{round_solution, HuboPolynomial, SpinAssignment};
use crate::quantum::{run_feedback, QuantumAlgorithm, QuantumRunConfig, DEFAULT_QUBIT_CAP};
use crate::trajectory::Trajectory;

pub use bench::{aggregate, run_bench, Aggregate, BenchReport};
pub use compare::{
    run_compare, write_compare, CompareConfig, CompareReport, CompareRow, CompareSummary,
    DEFAULT_T_MAX, LONG_T_MAX,
};
pub use config::{AlgorithmSpec, ExperimentConfig, IntegratorSettings, ProblemSpec, Sweep};
pub use dynamics::{run_dynamics, write_dynamics, DynamicsConfig, DynamicsSeries};
pub use family::{generate_family, load_family, GenArgs, InstanceMeta};
pub use selftest::{run_selftest, SelfTestResult};
pub use solve::{solve, SolveArgs};

/// Any of the seven solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    Quantum(QuantumAlgorithm),
    Classical(AlgorithmKind),
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Quantum(QuantumAlgorithm::Falqon),
        Algorithm::Quantum(QuantumAlgorithm::Ifalqon),
        Algorithm::Classical(AlgorithmKind::CcFalqon),
        Algorithm::Classical(AlgorithmKind::CcIfalqon),
        Algorithm::Classical(AlgorithmKind::Cacao),
        Algorithm::Classical(AlgorithmKind::HotCacao),
        Algorithm::Classical(AlgorithmKind::HotCacaoPlus),
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Quantum(q) => q.name(),
            Algorithm::Classical(c) => c.name(),
        }
    }

    pub fn is_quantum(self) -> bool {
        matches!(self, Algorithm::Quantum(_))
    }

    fn uses_pairs(self) -> bool {
        matches!(self, Algorithm::Classical(c) if c.has_pairs())
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Ok(q) = s.parse::<QuantumAlgorithm>() {
            return Ok(Algorithm::Quantum(q));
        }
        s.parse::<AlgorithmKind>().map(Algorithm::Classical).map_err(|_| {
            let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
            Error::InvalidArgument(format!("unknown algorithm `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.name().to_string()
    }
}

/// Classical starting state. Quantum runs always start from `|+>^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    /// Every spin along +X.
    #[default]
    Fixed,
    /// Uniform on the sphere (on the X–Z circle for CACAO and HOT-CACAO).
    Random,
}

impl fmt::Display for InitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitMode::Fixed => "fixed",
            InitMode::Random => "random",
        })
    }
}

impl FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(InitMode::Fixed),
            "random" => Ok(InitMode::Random),
            _ => Err(Error::InvalidArgument(format!("unknown init mode `{s}`"))),
        }
    }
}

/// Everything a single run needs besides the algorithm and the problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSettings {
    pub dt: f64,
    pub t_total: f64,
    pub pairs: PairScope,
    pub init: InitMode,
    pub init_seed: u64,
    pub qubit_cap: usize,
    pub abort_on_drift: bool,
    pub drift_tolerance: f64,
    pub convergence: Option<ConvergenceCriterion>,
    pub trace_stride: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        let integ = IntegratorConfig::default();
        Self {
            dt: integ.dt,
            t_total: integ.t_total,
            pairs: PairScope::Graph,
            init: InitMode::Fixed,
            init_seed: 0,
            qubit_cap: DEFAULT_QUBIT_CAP,
            abort_on_drift: integ.abort_on_drift,
            drift_tolerance: integ.drift_tolerance,
            convergence: Some(ConvergenceCriterion::default()),
            trace_stride: 1,
        }
    }
}

impl RunSettings {
    /// Convergence tracking only when `dt` resolves the check window.
    fn effective_convergence(&self) -> Option<ConvergenceCriterion> {
        self.convergence.filter(|c| self.dt <= c.dt_check * (1.0 + 1e-9))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trajectory: Trajectory,
    pub final_energy: f64,
    pub solution: SpinAssignment,
    pub converged: Option<ConvergencePoint>,
    pub max_drift: f64,
    pub max_energy_increase: f64,
    pub steps: usize,
    pub wall_seconds: f64,
}

/// Runs one algorithm on one problem.
pub fn execute(algorithm: Algorithm, hubo: &HuboPolynomial, s: &RunSettings) -> Result<RunOutcome> {
    let start = stopwatch();
    let convergence = s.effective_convergence();
    let mut out = match algorithm {
        Algorithm::Classical(kind) => {
            let n = hubo.n_vars();
            let init = match s.init {
                InitMode::Fixed => init_fixed(n)?,
                InitMode::Random => init_random(n, s.init_seed, kind.requires_planar_init())?,
            };
            let cfg = IntegratorConfig {
                dt: s.dt,
                t_total: s.t_total,
                abort_on_drift: s.abort_on_drift,
                drift_tolerance: s.drift_tolerance,
                ..IntegratorConfig::default()
            };
            let opts = RunOptions {
                pair_scope: s.pairs,
                trace_stride: s.trace_stride,
                snapshot_stride: None,
                convergence,
            };
            let r = run(kind, hubo, &init, &cfg, &opts)?;
            RunOutcome {
                solution: round_solution(&r.final_state),
                trajectory: r.trajectory,
                final_energy: r.final_energy,
                converged: r.converged,
                max_drift: r.max_drift,
                max_energy_increase: r.max_energy_increase,
                steps: r.steps,
                wall_seconds: 0.0,
            }
        }
        Algorithm::Quantum(q) => {
            let cfg = QuantumRunConfig {
                qubit_cap: s.qubit_cap,
                z_stride: 0,
                trace_stride: s.trace_stride,
                convergence,
                ..QuantumRunConfig::new(s.dt, s.t_total)
            };
            let r = run_feedback(q, hubo, &cfg)?;
            RunOutcome {
                solution: r.solution,
                trajectory: r.trajectory,
                final_energy: r.final_energy,
                converged: r.converged,
                max_drift: r.max_norm_deviation,
                max_energy_increase: r.max_energy_increase,
                steps: r.steps,
                wall_seconds: 0.0,
            }
        }
    };
    out.wall_seconds = start.map_or(0.0, |s| s.elapsed().as_secs_f64());
    Ok(out)
}

/// `None` where the platform has no monotonic clock (browser wasm).
fn stopwatch() -> Option<Instant> {
    if cfg!(all(target_arch = "wasm32", target_os = "unknown")) {
        None
    } else {
        Some(Instant::now())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// One line of `records.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub instance: usize,
    pub instance_seed: Option<u64>,
    pub source: Option<String>,
    pub algorithm: Algorithm,
    pub pair_scope: Option<PairScope>,
    pub init: String,
    pub init_seed: Option<u64>,
    pub n: usize,
    pub m: usize,
    pub t_total: f64,
    pub dt: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub final_energy: Option<f64>,
    pub final_energy_density: Option<f64>,
    /// Absent when the run did not settle by `t_total` (censored).
    pub convergence_time: Option<f64>,
    pub max_drift: Option<f64>,
    pub wall_seconds: f64,
    pub trajectory_file: Option<String>,
}

impl RunRecord {
    /// Record skeleton for `algorithm` on an instance; outcome fields empty.
    pub fn new(algorithm: Algorithm, n: usize, m: usize, s: &RunSettings) -> Self {
        let (init, init_seed) = match (algorithm.is_quantum(), s.init) {
            (true, _) => ("uniform".to_string(), None),
            (false, InitMode::Fixed) => ("fixed".to_string(), None),
            (false, InitMode::Random) => ("random".to_string(), Some(s.init_seed)),
        };
        Self {
            instance: 0,
            instance_seed: None,
            source: None,
            algorithm,
            pair_scope: algorithm.uses_pairs().then_some(s.pairs),
            init,
            init_seed,
            n,
            m,
            t_total: s.t_total,
            dt: s.dt,
            status: RunStatus::Ok,
            error: None,
            final_energy: None,
            final_energy_density: None,
            convergence_time: None,
            max_drift: None,
            wall_seconds: 0.0,
            trajectory_file: None,
        }
    }

    pub fn fill(&mut self, out: &RunOutcome) {
        self.status = RunStatus::Ok;
        self.final_energy = Some(out.final_energy);
        self.final_energy_density = Some(out.final_energy / self.n.max(1) as f64);
        self.convergence_time = out.converged.map(|c| c.time);
        self.max_drift = Some(out.max_drift);
        self.wall_seconds = out.wall_seconds;
    }

    pub fn fail(&mut self, err: &Error) {
        self.status = RunStatus::Failed;
        self.error = Some(err.to_string());
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// Copy with timing fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self { wall_seconds: 0.0, ..self.clone() }
    }
}

/// Sample mean and standard deviation (`n - 1` denominator; 0 for one value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs `f` over `items` on at most `workers` threads, keeping input order.
pub(crate) fn parallel_map<T, R, F>(items: &[T], workers: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            return Ok(pool.install(|| items.par_iter().map(&f).collect()));
        }
    }
    let _ = workers;
    Ok(items.iter().map(f).collect())
}
