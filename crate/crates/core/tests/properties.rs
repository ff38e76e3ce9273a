use proptest::prelude::*;

use spinfeed::classical::{init_random, run, AlgorithmKind, IntegratorConfig, RunOptions};
use spinfeed::problem::{cnf_to_hubo, emit_dimacs, generate_random_ksat, parse_dimacs};

fn formula() -> impl Strategy<Value = spinfeed::problem::CnfFormula> {
    (1usize..12, 1usize..4, 0usize..30, any::<u64>())
        .prop_filter_map("k <= n", |(n, k, m, seed)| generate_random_ksat(n, k, m, seed).ok())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn dimacs_round_trip(f in formula()) {
        let back = parse_dimacs(&emit_dimacs(&f)).unwrap();
        prop_assert_eq!(back.n_vars(), f.n_vars());
        prop_assert_eq!(back.clauses(), f.clauses());
    }

    #[test]
    fn polynomial_matches_clause_form(f in formula(), raw in prop::collection::vec(-1.0f64..1.0, 12)) {
        let z = &raw[..f.n_vars()];
        let hubo = cnf_to_hubo(&f);
        let e = hubo.energy(z).unwrap();
        prop_assert!((e - f.clause_form_energy(z)).abs() <= 1e-12 * (1 + f.num_clauses()) as f64);
    }

    #[test]
    fn fused_energy_gradient_agrees(f in formula(), raw in prop::collection::vec(-1.0f64..1.0, 12)) {
        let z = &raw[..f.n_vars()];
        let hubo = cnf_to_hubo(&f);
        let mut g = vec![0.0; z.len()];
        let e = hubo.energy_gradient_into(z, &mut g);
        prop_assert!((e - hubo.energy(z).unwrap()).abs() < 1e-12);
        for (a, b) in g.iter().zip(hubo.gradient_z(z).unwrap()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn short_runs_descend_and_stay_on_sphere(f in formula(), seed in any::<u64>(), which in 0usize..5) {
        let kind = AlgorithmKind::ALL[which];
        let hubo = cnf_to_hubo(&f);
        let init = init_random(f.n_vars(), seed, kind.requires_planar_init()).unwrap();
        let r = run(kind, &hubo, &init, &IntegratorConfig::new(1e-3, 1.0), &RunOptions::default()).unwrap();
        prop_assert!(r.max_energy_increase <= 1e-8 * (1 + f.num_clauses()) as f64, "{kind}: increase {:e}, final energy {}", r.max_energy_increase, r.final_energy);
        prop_assert!(r.max_drift < 1e-9);
        prop_assert!(r.final_state.max_norm_deviation() < 1e-12);
    }
}
