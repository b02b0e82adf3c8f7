use netcert::analysis::{hinf_bound_structured, hinf_bound_unstructured, AnalysisOptions, CertStatus, VertexOutput};
use netcert::datadriven::energy_bound;
use netcert::matrixcore::Mat;
use netcert::synthesis::{min_gamma_synthesis, AlphaGrid, PerformanceSpec, SynthesisData, SynthesisOptions};
use netcert::truthoracle::{
    example1_structured, generate_experiment, hinf_norm, random_cycle_system, ExperimentConfig, NoiseModel,
};
use proptest::prelude::*;

fn outputs() -> Vec<VertexOutput> {
    (0..3)
        .map(|_| VertexOutput {
            c: Mat::identity(1, 1),
            d: Mat::zeros(1, 1),
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn certified_bounds_are_sound_and_replay(seed in 0u64..10_000, sigma in 0.01f64..0.3) {
        let sys = example1_structured();
        let g0 = hinf_norm(&sys).unwrap();
        let e = generate_experiment(&sys, &ExperimentConfig::new(50, sigma, NoiseModel::Ball, seed)).unwrap();
        let opts = AnalysisOptions::default();
        let l = hinf_bound_unstructured(&e.simulation.data, &e.lumped_bound, &sys.c, &sys.d, &opts).unwrap();
        let g = sys.structure.as_ref().unwrap().graph.clone();
        let s = hinf_bound_structured(&e.subsystems, &e.subsystem_bounds, &g, &outputs(), &opts).unwrap();
        for r in [l, s] {
            if r.status == CertStatus::Certified {
                prop_assert!(r.gamma.unwrap() >= g0 - 1e-6);
                prop_assert!(r.witness.as_ref().unwrap().replay(1e-7));
            }
        }
    }

    #[test]
    fn larger_assumed_noise_never_tightens(seed in 0u64..10_000, factor in 1.0f64..4.0) {
        let sys = example1_structured();
        let e = generate_experiment(&sys, &ExperimentConfig::new(50, 0.05, NoiseModel::Ball, seed)).unwrap();
        let opts = AnalysisOptions::default();
        let bound = |s: f64| {
            let r = hinf_bound_unstructured(&e.simulation.data, &energy_bound(s, 50, 3).unwrap(), &sys.c, &sys.d, &opts).unwrap();
            if r.status == CertStatus::Certified { r.gamma.unwrap() } else { f64::INFINITY }
        };
        let (a, b) = (bound(0.05), bound(0.05 * factor));
        prop_assert!(b >= a - 1e-6, "{} then {}", a, b);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn enlarging_alpha_grid_never_hurts(seed in 0u64..1000) {
        let sys = random_cycle_system(3, (0.0, 1.0), (0.0, 0.1), seed).unwrap();
        let e = generate_experiment(&sys, &ExperimentConfig::new(40, 0.05, NoiseModel::Interval, seed + 1)).unwrap();
        let d = SynthesisData::from_subsystems(&e.subsystems, &e.subsystem_bounds).unwrap();
        let g = sys.structure.as_ref().unwrap().graph.clone();
        let spec = PerformanceSpec::state(&g, &[1, 1, 1], &[1, 1, 1]);
        let run = |grid: AlphaGrid| {
            let opts = SynthesisOptions { grid, ..SynthesisOptions::default() };
            min_gamma_synthesis(&d, &g, &spec, (0.1, 100.0), &opts).map(|r| r.gamma).unwrap_or(f64::INFINITY)
        };
        let coarse = run(AlphaGrid::Default);
        let fine = run(AlphaGrid::Custom(vec![0.5, 1.0, 2.0]));
        prop_assert!(fine <= coarse * (1.0 + 2e-3), "{} vs {}", fine, coarse);
    }
}
