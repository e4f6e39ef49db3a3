use std::sync::Arc;

use proptest::prelude::*;

use mfsde_core::approx::{
    check_monotone, check_subset_infimum, dyadic_partition, reconstruction_matches, run_hierarchy, DriftMode,
};
use mfsde_core::coeffs::{preset_example21, DriftSpec, Example21Params, ExampleDrift, SystemSpec};
use mfsde_core::noise::{NoiseBundle, SeedLineage, TimeGrid};
use mfsde_core::solver::SchemeConfig;

fn flat(a: &[f64], initial: &[f64], drift: ExampleDrift) -> SystemSpec {
    let n = a.len();
    preset_example21(&Example21Params {
        a: a.to_vec(),
        sigma: vec![0.0; n],
        sigma0: 0.0,
        sigma_z: vec![0.0; n],
        sigma_z0: 0.0,
        alpha: vec![1.5; n],
        alpha0: 1.5,
        initial: initial.to_vec(),
        drift,
    })
    .unwrap()
}

fn noise_for(spec: &SystemSpec, steps: usize) -> NoiseBundle {
    let grid = Arc::new(TimeGrid::uniform(1.0, steps).unwrap());
    NoiseBundle::generate(&spec.layout, grid, SeedLineage::new(1, 0)).unwrap()
}

#[test]
fn partitions_are_nested() {
    for n in 1..8 {
        let coarse = dyadic_partition(n, 2.0).unwrap();
        let fine = dyadic_partition(n + 1, 2.0).unwrap();
        assert_eq!(fine.len(), 2 * coarse.len() - 1);
        for (k, &t) in coarse.points().iter().enumerate() {
            assert_eq!(fine.points()[2 * k], t);
        }
    }
}

#[test]
fn time_only_levels_match_piecewise_exponentials() {
    let (a, x0) = (1.5, 0.4);
    let mut spec = flat(&[a], &[x0], ExampleDrift::Constant { value: 0.0 });
    spec.components[0].drift = DriftSpec::TimeLinear { intercept: 2.0, slope: -1.0 };
    let steps = 64;
    let noise = noise_for(&spec, steps);
    let cfg = SchemeConfig::implicit(1.0 / steps as f64);
    let h = run_hierarchy(&spec, &noise, &cfg, 4, DriftMode::Deterministic).unwrap();
    for w in h.levels.windows(2) {
        let intervals = 1usize << (w[0].n - 1);
        let per = steps / intervals;
        let values = w[1].paths[0].values();
        let mut y = x0;
        for k in 0..intervals {
            let right = (k + 1) as f64 / intervals as f64;
            let c = 2.0 - right;
            assert!((w[0].infimum_drifts[0][k] - c).abs() < 1e-15);
            let start = y;
            for s in 0..=per {
                let expect = c + (start - c) * (-a * s as f64 / steps as f64).exp();
                let got = values[k * per + s];
                assert!((got - expect).abs() < 1e-12, "level {} at step {}: {got} vs {expect}", w[1].n, k * per + s);
            }
            y = values[(k + 1) * per];
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn deterministic_mean_field_levels_are_ordered(
        a in prop::collection::vec(0.1f64..8.0, 1..4),
        x in prop::collection::vec(0.0f64..3.0, 3),
    ) {
        let n = a.len();
        let spec = flat(&a, &x[..n], ExampleDrift::MeanFieldAverage);
        let noise = noise_for(&spec, 64);
        let cfg = SchemeConfig::explicit(1.0 / 64.0);
        let h = run_hierarchy(&spec, &noise, &cfg, 5, DriftMode::Realized).unwrap();
        for o in check_monotone(&h.levels).unwrap() {
            prop_assert_eq!(o.max_violation(), 0.0);
        }
        let r = check_subset_infimum(&h.levels);
        prop_assert_eq!(r.violations, 0);
        prop_assert_eq!(r.skipped_unordered, 0);
        for w in h.levels.windows(2) {
            prop_assert!(reconstruction_matches(&spec, &w[1], &w[0].partition_steps, &noise, &cfg).unwrap());
        }
    }

    #[test]
    fn diffusive_subset_infimum_holds_where_ordered(seed in 0u64..500) {
        let spec = preset_example21(&Example21Params::symmetric(2, 1.0, 0.6, 0.3, 0.2, 0.1, 1.5, 1.7, 0.3)).unwrap();
        let grid = Arc::new(TimeGrid::uniform(1.0, 64).unwrap());
        let noise = NoiseBundle::generate(&spec.layout, grid, SeedLineage::new(seed, 0)).unwrap();
        let h = run_hierarchy(&spec, &noise, &SchemeConfig::explicit(1.0 / 64.0), 4, DriftMode::Realized).unwrap();
        prop_assert_eq!(check_subset_infimum(&h.levels).violations, 0);
    }
}
