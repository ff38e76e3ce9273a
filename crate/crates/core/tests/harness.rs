use spinfeed::classical::{AlgorithmKind, ConvergenceCriterion};
use spinfeed::harness::{
    run_bench, Algorithm, AlgorithmSpec, ExperimentConfig, InitMode, IntegratorSettings, ProblemSpec, Sweep,
};
use spinfeed::quantum::QuantumAlgorithm;
use spinfeed::trajectory::TableFormat;

fn config(dir: &std::path::Path, sweep: Sweep, t_total: f64) -> ExperimentConfig {
    ExperimentConfig {
        name: "sweep".into(),
        problem: ProblemSpec { n: 8, k: 2, alpha: Some(1.2), m: None, instances: 2, seed_base: 40 },
        algorithms: vec![
            AlgorithmSpec::new(Algorithm::Quantum(QuantumAlgorithm::Ifalqon)),
            AlgorithmSpec {
                init: InitMode::Random,
                init_seeds: 2,
                ..AlgorithmSpec::new(Algorithm::Classical(AlgorithmKind::HotCacao))
            },
            AlgorithmSpec::new(Algorithm::Classical(AlgorithmKind::CcFalqon)),
        ],
        sweep,
        integrator: IntegratorSettings { dt: 1e-3, t_total, ..IntegratorSettings::default() },
        convergence: Some(ConvergenceCriterion::default()),
        output_dir: dir.to_path_buf(),
        workers: 1,
        trace_stride: 0,
        format: TableFormat::Csv,
    }
}

#[test]
fn time_sweep_matches_separate_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let times = [0.5, 1.0, 3.0];
    let swept = run_bench(&config(&tmp.path().join("sweep"), Sweep::Time(times.to_vec()), 3.0)).unwrap();
    for (i, &t) in times.iter().enumerate() {
        let single = run_bench(&config(&tmp.path().join(format!("t{i}")), Sweep::None, t)).unwrap();
        let from_sweep: Vec<_> = swept.records.iter().filter(|r| r.t_total == t).collect();
        assert_eq!(from_sweep.len(), single.records.len());
        for (a, b) in from_sweep.iter().zip(&single.records) {
            assert_eq!((a.algorithm, a.instance, a.init_seed), (b.algorithm, b.instance, b.init_seed));
            let (ea, eb) = (a.final_energy.unwrap(), b.final_energy.unwrap());
            assert!((ea - eb).abs() < 1e-12, "{} T={t}: {ea} vs {eb}", a.algorithm);
            match (a.convergence_time, b.convergence_time) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-9, "{} T={t}: {x} vs {y}", a.algorithm),
                (x, y) => assert_eq!(x, y),
            }
        }
    }
}

#[test]
fn off_grid_times_fall_back_to_separate_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_bench(&config(tmp.path(), Sweep::Time(vec![0.25, 0.5005]), 1.0)).unwrap();
    assert_eq!(report.failures(), 0);
    assert!(report.records.iter().all(|r| r.final_energy.unwrap().is_finite()));
}
