use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use spinfeed::classical::{ConvergenceCriterion, PairScope};
use spinfeed::harness::{
    generate_family, load_family, run_bench, run_compare, run_dynamics, run_selftest, solve,
    write_compare, write_dynamics, Algorithm, CompareConfig, DynamicsConfig, ExperimentConfig,
    GenArgs, InitMode, RunSettings, SolveArgs, DEFAULT_T_MAX, LONG_T_MAX,
};
use spinfeed::problem::{generate_random_ksat, parse_dimacs};
use spinfeed::quantum::{QuantumAlgorithm, DEFAULT_QUBIT_CAP};
use spinfeed::trajectory::TableFormat;

#[derive(Parser)]
#[command(name = "spinfeed", version, about = "Feedback-based quantum and classical spin solvers for k-SAT")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a family of random k-SAT instances (DIMACS plus JSON sidecars).
    Gen(GenCmd),
    /// Run one solver on one instance.
    Solve(SolveCmd),
    /// Run an experiment described by a JSON config file.
    Bench(BenchCmd),
    /// Quantum vs classical counterparts at their convergence times.
    Compare(CompareCmd),
    /// Energy and control-strength traces for plotting.
    Dynamics(DynamicsCmd),
    /// Run the built-in oracle checks.
    Selftest,
}

#[derive(Args)]
struct GenCmd {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    /// Clause density; the clause count is floor(alpha * n).
    #[arg(long, conflicts_with = "m", required_unless_present = "m")]
    alpha: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunFlags {
    #[arg(long = "T", default_value_t = 64.0)]
    t_total: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value = "fixed")]
    init: InitMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "graph")]
    pairs: PairScope,
    #[arg(long, default_value_t = DEFAULT_QUBIT_CAP)]
    qubit_cap: usize,
    /// Keep going when a step's norm drift exceeds the tolerance.
    #[arg(long)]
    allow_drift: bool,
}

impl RunFlags {
    fn settings(&self) -> RunSettings {
        RunSettings {
            dt: self.dt,
            t_total: self.t_total,
            pairs: self.pairs,
            init: self.init,
            init_seed: self.seed,
            qubit_cap: self.qubit_cap,
            abort_on_drift: !self.allow_drift,
            ..RunSettings::default()
        }
    }
}

#[derive(Args)]
struct SolveCmd {
    #[arg(long)]
    algorithm: Algorithm,
    #[arg(long)]
    problem: PathBuf,
    #[command(flatten)]
    run: RunFlags,
    /// Directory for record.json and the trajectory table.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: TableFormat,
}

#[derive(Args)]
struct BenchCmd {
    config: PathBuf,
    /// Overrides the config's worker count.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FamilyFlags {
    /// Directory of .cnf files; otherwise a family is generated from the flags below.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long, default_value_t = 12)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 1.2)]
    alpha: f64,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 20)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl FamilyFlags {
    fn load(&self) -> Result<Vec<(String, spinfeed::problem::CnfFormula)>> {
        if let Some(dir) = &self.dir {
            return Ok(load_family(dir)?);
        }
        let m = self.m.unwrap_or_else(|| spinfeed::problem::clauses_for_density(self.n, self.alpha));
        (0..self.count)
            .map(|i| {
                let seed = self.seed + i as u64;
                Ok((format!("inst_{i:04}"), generate_random_ksat(self.n, self.k, m, seed)?))
            })
            .collect()
    }
}

#[derive(Args)]
struct CompareCmd {
    #[command(flatten)]
    family: FamilyFlags,
    /// Convergence ceiling.
    #[arg(long, default_value_t = DEFAULT_T_MAX)]
    t_max: f64,
    /// Use the long ceiling instead.
    #[arg(long)]
    long: bool,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value_t = 1e-2)]
    threshold: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt_check: f64,
    /// Restrict to one quantum algorithm (falqon or ifalqon).
    #[arg(long)]
    only: Option<QuantumAlgorithm>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: TableFormat,
}

#[derive(Args)]
struct DynamicsCmd {
    #[arg(long)]
    problem: PathBuf,
    /// Comma-separated algorithm names.
    #[arg(long, value_delimiter = ',', required = true)]
    algorithms: Vec<Algorithm>,
    /// Comma-separated init seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value = "random")]
    init: InitMode,
    #[arg(long = "T", default_value_t = 64.0)]
    t_total: f64,
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    #[arg(long, default_value = "graph")]
    pairs: PairScope,
    /// Points per series; 0 keeps every step.
    #[arg(long, default_value_t = 20)]
    points: usize,
    /// Space the kept points geometrically in t.
    #[arg(long)]
    log: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "csv")]
    format: TableFormat,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Gen(c) => {
            let args = GenArgs { n: c.n, k: c.k, alpha: c.alpha, m: c.m, count: c.count, seed: c.seed, out: c.out };
            let paths = generate_family(&args)?;
            println!("wrote {} instances to {}", paths.len(), args.out.display());
        }
        Command::Solve(c) => {
            let args = SolveArgs {
                algorithm: c.algorithm,
                problem: c.problem,
                settings: c.run.settings(),
                out: c.out,
                format: c.format,
            };
            let (record, _) = solve(&args)?;
            println!("{}", serde_json::to_string_pretty(&record)?);
        }
        Command::Bench(c) => {
            let mut cfg = ExperimentConfig::load(&c.config)
                .with_context(|| format!("reading {}", c.config.display()))?;
            if let Some(w) = c.workers {
                cfg.workers = w;
            }
            if let Some(out) = c.out {
                cfg.output_dir = out;
            }
            let report = run_bench(&cfg)?;
            println!(
                "{} records ({} failed), {} aggregate rows in {}",
                report.records.len(),
                report.failures(),
                report.aggregates.len(),
                report.output_dir.display()
            );
        }
        Command::Compare(c) => {
            let instances = c.family.load()?;
            let mut cfg = CompareConfig {
                t_max: if c.long { LONG_T_MAX } else { c.t_max },
                dt: c.dt,
                criterion: ConvergenceCriterion { threshold: c.threshold, dt_check: c.dt_check },
                workers: c.workers,
                ..CompareConfig::default()
            };
            if let Some(q) = c.only {
                cfg.pairs.retain(|(p, _)| *p == q);
            }
            let report = run_compare(&instances, &cfg)?;
            if let Some(out) = &c.out {
                write_compare(&report, out, c.format)?;
            }
            for s in &report.summaries {
                println!(
                    "{} vs {}: {} instances, quantum lower {}, classical lower {}, ties {}, censored {}/{}",
                    s.quantum,
                    s.classical,
                    s.instances,
                    s.quantum_better,
                    s.classical_better,
                    s.ties,
                    s.quantum_censored,
                    s.classical_censored
                );
            }
        }
        Command::Dynamics(c) => {
            let text = std::fs::read_to_string(&c.problem).with_context(|| format!("reading {}", c.problem.display()))?;
            let formula = parse_dimacs(&text)?;
            let cfg = DynamicsConfig {
                algorithms: c.algorithms,
                init: c.init,
                seeds: c.seeds,
                dt: c.dt,
                t_total: c.t_total,
                pairs: c.pairs,
                points: (c.points > 0).then_some(c.points),
                log_spaced: c.log,
            };
            let series = run_dynamics(&formula, &cfg)?;
            let paths = write_dynamics(&series, &c.out, c.format)?;
            for (s, p) in series.iter().zip(&paths) {
                println!("{} final energy {:.6} -> {}", s.algorithm, s.final_energy, p.display());
            }
        }
        Command::Selftest => {
            let results = run_selftest();
            let mut failed = 0;
            for r in &results {
                println!("{} {:<30} {} ({:.2}s)", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail, r.seconds);
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", results.len());
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
