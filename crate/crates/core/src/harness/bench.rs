use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{AlgorithmSpec, ExperimentConfig, Sweep};
use super::{execute, mean_std, parallel_map, Algorithm, RunRecord};
use crate::classical::detect_convergence;
use crate::error::Result;
use crate::problem::{cnf_to_hubo, HuboPolynomial};
use crate::trajectory::{fmt_f64, TableFormat};

/// Mean and spread of one `(algorithm, sweep point)` cell over successful runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub algorithm: Algorithm,
    pub n: usize,
    pub t_total: f64,
    pub runs: usize,
    pub failures: usize,
    pub mean_density: f64,
    pub std_density: f64,
    pub mean_energy: f64,
    pub std_energy: f64,
    pub converged: usize,
    /// Over converged runs only; censored runs are counted, never averaged.
    pub mean_convergence_time: Option<f64>,
}

pub const AGGREGATE_COLUMNS: [&str; 11] = [
    "algorithm",
    "n",
    "t_total",
    "runs",
    "failures",
    "mean_density",
    "std_density",
    "mean_energy",
    "std_energy",
    "converged",
    "mean_convergence_time",
];

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<Aggregate>,
    pub output_dir: PathBuf,
}

struct Instance {
    n: usize,
    index: usize,
    seed: u64,
    m: usize,
    hubo: HuboPolynomial,
}

struct Job<'a> {
    instance: &'a Instance,
    spec: &'a AlgorithmSpec,
    init_seed: u64,
}

/// Runs every (instance, algorithm, init seed, sweep point) of `cfg`, writes
/// the experiment directory and returns the records and aggregates.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let sizes = match &cfg.sweep {
        Sweep::Size(ns) => ns.clone(),
        _ => vec![cfg.problem.n],
    };
    let times = match &cfg.sweep {
        Sweep::Time(ts) => ts.clone(),
        _ => vec![cfg.integrator.t_total],
    };
    let mut instances = Vec::new();
    for &n in &sizes {
        for index in 0..cfg.problem.instances {
            let (seed, formula) = cfg.problem.instance(n, index)?;
            instances.push(Instance { n, index, seed, m: formula.num_clauses(), hubo: cnf_to_hubo(&formula) });
        }
    }
    let mut jobs = Vec::new();
    for inst in &instances {
        for spec in &cfg.algorithms {
            for init_seed in spec.seeds() {
                jobs.push(Job { instance: inst, spec, init_seed });
            }
        }
    }

    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    if cfg.trace_stride > 0 {
        fs::create_dir_all(out.join("traces"))?;
    }
    fs::write(out.join("config.json"), cfg.to_json() + "\n")?;

    let results = parallel_map(&jobs, cfg.workers, |job| run_job(cfg, job, &times))?;
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }

    let mut f = fs::File::create(out.join("records.jsonl"))?;
    for r in &records {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    let aggregates = aggregate(&records);
    write_aggregates(&aggregates, &out.join("aggregates.csv"), TableFormat::Csv)?;
    write_series(&aggregates, &cfg.sweep, &out.join("series"), cfg.format)?;
    Ok(BenchReport { records, aggregates, output_dir: out.clone() })
}

fn is_grid_point(t: f64, dt: f64) -> bool {
    let r = t / dt;
    (r - r.round()).abs() < 1e-9 * r.max(1.0)
}

/// One run to the largest `T`; shorter operation times are read off its
/// prefix, which is exactly the shorter run because the feedback has no
/// explicit time dependence. Off-grid times get their own run.
fn run_job(cfg: &ExperimentConfig, job: &Job<'_>, times: &[f64]) -> Result<Vec<RunRecord>> {
    let inst = job.instance;
    let dt = cfg.integrator.dt;
    let t_max = *times.last().expect("at least one operation time");
    let mut settings = cfg.settings(job.spec, t_max);
    settings.init_seed = job.init_seed;
    settings.convergence = None;

    let label = format!("{}_n{}_i{:04}_s{}", job.spec.name, inst.n, inst.index, job.init_seed);
    let mut records = Vec::with_capacity(times.len());
    let base = |t_total: f64| {
        let mut s = settings;
        s.t_total = t_total;
        let mut r = RunRecord::new(job.spec.name, inst.n, inst.m, &s);
        r.instance = inst.index;
        r.instance_seed = Some(inst.seed);
        r
    };

    let shared = if times.iter().all(|&t| is_grid_point(t, dt)) {
        Some(execute(job.spec.name, &inst.hubo, &settings))
    } else {
        None
    };
    let trace_name = match &shared {
        Some(Ok(out)) if cfg.trace_stride > 0 => {
            let name = format!("traces/{label}.{}", cfg.format.extension());
            let file = fs::File::create(cfg.output_dir.join(&name))?;
            out.trajectory.thin(cfg.trace_stride).write_table(std::io::BufWriter::new(file), cfg.format)?;
            Some(name)
        }
        _ => None,
    };

    for &t in times {
        let mut rec = base(t);
        match &shared {
            Some(Ok(out)) => {
                let steps = (t / dt).round() as usize;
                let traj = out.trajectory.prefix(steps + 1);
                rec.final_energy = traj.final_energy();
                rec.final_energy_density = traj.final_density();
                rec.max_drift = Some(out.max_drift);
                rec.wall_seconds = out.wall_seconds * steps as f64 / out.steps.max(1) as f64;
                if let Some(c) = cfg.convergence {
                    rec.convergence_time = detect_convergence(&traj, c.threshold, c.dt_check).ok().flatten();
                }
                rec.trajectory_file = trace_name.clone();
            }
            Some(Err(e)) => rec.fail(e),
            None => {
                let mut s = settings;
                s.t_total = t;
                s.convergence = cfg.convergence;
                match execute(job.spec.name, &inst.hubo, &s) {
                    Ok(out) => {
                        rec.fill(&out);
                        if cfg.trace_stride > 0 {
                            let name = format!("traces/{label}_T{t}.{}", cfg.format.extension());
                            let file = fs::File::create(cfg.output_dir.join(&name))?;
                            out.trajectory
                                .thin(cfg.trace_stride)
                                .write_table(std::io::BufWriter::new(file), cfg.format)?;
                            rec.trajectory_file = Some(name);
                        }
                    }
                    Err(e) => rec.fail(&e),
                }
            }
        }
        records.push(rec);
    }
    Ok(records)
}

/// Groups records by `(algorithm, n, T)` in first-seen order.
pub fn aggregate(records: &[RunRecord]) -> Vec<Aggregate> {
    let mut order: Vec<(Algorithm, usize, u64)> = Vec::new();
    let mut groups: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        let key = (r.algorithm, r.n, r.t_total.to_bits());
        let pos = match order.iter().position(|k| *k == key) {
            Some(p) => p,
            None => {
                order.push(key);
                order.len() - 1
            }
        };
        groups.entry(pos).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(pos, rs)| {
            let (algorithm, n, t_bits) = order[pos];
            let ok: Vec<&RunRecord> = rs.iter().copied().filter(|r| r.is_ok()).collect();
            let dens: Vec<f64> = ok.iter().filter_map(|r| r.final_energy_density).collect();
            let ens: Vec<f64> = ok.iter().filter_map(|r| r.final_energy).collect();
            let conv: Vec<f64> = ok.iter().filter_map(|r| r.convergence_time).collect();
            let (mean_density, std_density) = mean_std(&dens);
            let (mean_energy, std_energy) = mean_std(&ens);
            Aggregate {
                algorithm,
                n,
                t_total: f64::from_bits(t_bits),
                runs: ok.len(),
                failures: rs.len() - ok.len(),
                mean_density,
                std_density,
                mean_energy,
                std_energy,
                converged: conv.len(),
                mean_convergence_time: (!conv.is_empty()).then(|| mean_std(&conv).0),
            }
        })
        .collect()
}

pub fn write_aggregates(aggs: &[Aggregate], path: &Path, format: TableFormat) -> Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(f, "{}", format.header(&AGGREGATE_COLUMNS))?;
    for a in aggs {
        let fields = [
            a.algorithm.to_string(),
            a.n.to_string(),
            fmt_f64(a.t_total),
            a.runs.to_string(),
            a.failures.to_string(),
            fmt_f64(a.mean_density),
            fmt_f64(a.std_density),
            fmt_f64(a.mean_energy),
            fmt_f64(a.std_energy),
            a.converged.to_string(),
            a.mean_convergence_time.map_or("nan".to_string(), fmt_f64),
        ];
        writeln!(f, "{}", fields.join(format.separator()))?;
    }
    f.flush()?;
    Ok(())
}

/// One plot-ready file per algorithm: sweep value, mean and std of the density.
fn write_series(aggs: &[Aggregate], sweep: &Sweep, dir: &Path, format: TableFormat) -> Result<()> {
    fs::create_dir_all(dir)?;
    let x_name = match sweep {
        Sweep::Size(_) => "n",
        _ => "t_total",
    };
    let mut by_alg: Vec<(Algorithm, Vec<&Aggregate>)> = Vec::new();
    for a in aggs {
        match by_alg.iter_mut().find(|(alg, _)| *alg == a.algorithm) {
            Some((_, v)) => v.push(a),
            None => by_alg.push((a.algorithm, vec![a])),
        }
    }
    for (alg, rows) in by_alg {
        let path = dir.join(format!("{alg}.{}", format.extension()));
        let mut f = std::io::BufWriter::new(fs::File::create(path)?);
        writeln!(f, "{}", format.header(&[x_name, "mean_density", "std_density", "runs"]))?;
        for a in rows {
            let x = match sweep {
                Sweep::Size(_) => a.n.to_string(),
                _ => fmt_f64(a.t_total),
            };
            let fields = [x, fmt_f64(a.mean_density), fmt_f64(a.std_density), a.runs.to_string()];
            writeln!(f, "{}", fields.join(format.separator()))?;
        }
        f.flush()?;
    }
    Ok(())
}

impl BenchReport {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| !r.is_ok()).count()
    }
}
