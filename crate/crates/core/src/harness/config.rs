use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::family::resolve_clauses;
use super::{Algorithm, InitMode, RunSettings};
use crate::classical::{ConvergenceCriterion, PairScope};
use crate::error::{Error, Result};
use crate::problem::{generate_random_ksat, CnfFormula};
use crate::quantum::DEFAULT_QUBIT_CAP;
use crate::trajectory::TableFormat;

/// Random k-SAT family; instance `i` uses seed `seed_base + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub k: usize,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub m: Option<usize>,
    pub instances: usize,
    #[serde(default)]
    pub seed_base: u64,
}

impl ProblemSpec {
    pub fn clauses_for(&self, n: usize) -> Result<usize> {
        resolve_clauses(n, self.alpha, self.m)
    }

    pub fn instance(&self, n: usize, index: usize) -> Result<(u64, CnfFormula)> {
        let seed = self.seed_base + index as u64;
        Ok((seed, generate_random_ksat(n, self.k, self.clauses_for(n)?, seed)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub name: Algorithm,
    #[serde(default)]
    pub pairs: PairScope,
    #[serde(default)]
    pub init: InitMode,
    /// Random initial states per instance; init seed `r` is `init_seed_base + r`.
    #[serde(default = "one")]
    pub init_seeds: usize,
    #[serde(default)]
    pub init_seed_base: u64,
}

impl AlgorithmSpec {
    pub fn new(name: Algorithm) -> Self {
        Self { name, pairs: PairScope::Graph, init: InitMode::Fixed, init_seeds: 1, init_seed_base: 0 }
    }

    /// Init seeds actually run: one for quantum or fixed-init runs.
    pub fn seeds(&self) -> Vec<u64> {
        if self.name.is_quantum() || self.init == InitMode::Fixed {
            vec![self.init_seed_base]
        } else {
            (0..self.init_seeds as u64).map(|r| self.init_seed_base + r).collect()
        }
    }
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sweep {
    None,
    /// Operation times `T`.
    Time(Vec<f64>),
    /// System sizes `N` at fixed `T`.
    Size(Vec<usize>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorSettings {
    pub dt: f64,
    pub t_total: f64,
    pub abort_on_drift: bool,
    pub drift_tolerance: f64,
    pub qubit_cap: usize,
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        let r = RunSettings::default();
        Self {
            dt: r.dt,
            t_total: r.t_total,
            abort_on_drift: r.abort_on_drift,
            drift_tolerance: r.drift_tolerance,
            qubit_cap: DEFAULT_QUBIT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSpec,
    pub algorithms: Vec<AlgorithmSpec>,
    #[serde(default = "no_sweep")]
    pub sweep: Sweep,
    #[serde(default)]
    pub integrator: IntegratorSettings,
    #[serde(default = "default_convergence")]
    pub convergence: Option<ConvergenceCriterion>,
    pub output_dir: PathBuf,
    #[serde(default = "one")]
    pub workers: usize,
    /// Steps between rows of the per-run trace files; 0 disables traces.
    #[serde(default = "default_trace_stride")]
    pub trace_stride: usize,
    #[serde(default)]
    pub format: TableFormat,
}

fn no_sweep() -> Sweep {
    Sweep::None
}

fn default_convergence() -> Option<ConvergenceCriterion> {
    Some(ConvergenceCriterion::default())
}

fn default_trace_stride() -> usize {
    100
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        let p = &self.problem;
        if p.instances == 0 {
            return bad("problem.instances must be at least 1".into());
        }
        if p.k == 0 {
            return bad("problem.k must be at least 1".into());
        }
        p.clauses_for(p.n)?;
        if self.algorithms.is_empty() {
            return bad("at least one algorithm is required".into());
        }
        for a in &self.algorithms {
            if a.init_seeds == 0 {
                return bad(format!("{}: init_seeds must be at least 1", a.name));
            }
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        let i = &self.integrator;
        if !(i.dt > 0.0 && i.dt.is_finite()) || !(i.t_total >= 0.0 && i.t_total.is_finite()) {
            return bad("integrator needs dt > 0 and T >= 0".into());
        }
        match &self.sweep {
            Sweep::None => {}
            Sweep::Time(ts) => {
                if ts.is_empty() || ts.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
                    return bad("time sweep needs non-negative values".into());
                }
                if ts.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("time sweep must be sorted ascending".into());
                }
            }
            Sweep::Size(ns) => {
                if ns.is_empty() || ns.contains(&0) {
                    return bad("size sweep needs positive sizes".into());
                }
                if ns.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("size sweep must be sorted ascending".into());
                }
                if p.m.is_some() && p.alpha.is_none() {
                    return bad("size sweep needs alpha, not a fixed clause count".into());
                }
            }
        }
        Ok(())
    }

    /// Run settings for one algorithm spec, without the init seed.
    pub(crate) fn settings(&self, spec: &AlgorithmSpec, t_total: f64) -> RunSettings {
        RunSettings {
            dt: self.integrator.dt,
            t_total,
            pairs: spec.pairs,
            init: spec.init,
            init_seed: spec.init_seed_base,
            qubit_cap: self.integrator.qubit_cap,
            abort_on_drift: self.integrator.abort_on_drift,
            drift_tolerance: self.integrator.drift_tolerance,
            convergence: self.convergence,
            trace_stride: 1,
        }
    }
}
