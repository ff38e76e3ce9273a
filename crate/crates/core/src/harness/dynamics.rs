use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{execute, Algorithm, InitMode, RunSettings};
use crate::classical::PairScope;
use crate::error::{Error, Result};
use crate::problem::{cnf_to_hubo, CnfFormula};
use crate::trajectory::{TableFormat, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsConfig {
    pub algorithms: Vec<Algorithm>,
    pub init: InitMode,
    pub seeds: Vec<u64>,
    pub dt: f64,
    pub t_total: f64,
    pub pairs: PairScope,
    /// Downsample each series to about this many points.
    pub points: Option<usize>,
    pub log_spaced: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            algorithms: vec![],
            init: InitMode::Random,
            seeds: vec![0],
            dt: 1e-3,
            t_total: 64.0,
            pairs: PairScope::Graph,
            points: Some(20),
            log_spaced: false,
        }
    }
}

/// Energy density and control strengths of one run over time.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSeries {
    pub algorithm: Algorithm,
    pub init_seed: Option<u64>,
    pub final_energy: f64,
    pub trajectory: Trajectory,
}

pub fn run_dynamics(formula: &CnfFormula, cfg: &DynamicsConfig) -> Result<Vec<DynamicsSeries>> {
    if cfg.algorithms.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument("need at least one algorithm and one seed".into()));
    }
    let hubo = cnf_to_hubo(formula);
    let mut out = Vec::new();
    for &alg in &cfg.algorithms {
        let seeds: Vec<Option<u64>> = if alg.is_quantum() || cfg.init == InitMode::Fixed {
            vec![None]
        } else {
            cfg.seeds.iter().copied().map(Some).collect()
        };
        for seed in seeds {
            let settings = RunSettings {
                dt: cfg.dt,
                t_total: cfg.t_total,
                pairs: cfg.pairs,
                init: cfg.init,
                init_seed: seed.unwrap_or(0),
                convergence: None,
                trace_stride: 1,
                ..RunSettings::default()
            };
            let run = execute(alg, &hubo, &settings)?;
            let trajectory = match cfg.points {
                Some(p) => run.trajectory.downsample(p, cfg.log_spaced),
                None => run.trajectory,
            };
            out.push(DynamicsSeries { algorithm: alg, init_seed: seed, final_energy: run.final_energy, trajectory });
        }
    }
    Ok(out)
}

/// One table per run, named `<algorithm>[_seed<s>].<ext>`.
pub fn write_dynamics(series: &[DynamicsSeries], dir: &Path, format: TableFormat) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    series
        .iter()
        .map(|s| {
            let stem = match s.init_seed {
                Some(seed) => format!("{}_seed{seed}", s.algorithm),
                None => s.algorithm.to_string(),
            };
            let path = dir.join(format!("{stem}.{}", format.extension()));
            s.trajectory.write_table(std::io::BufWriter::new(fs::File::create(&path)?), format)?;
            Ok(path)
        })
        .collect()
}
