use std::sync::Arc;

use proptest::prelude::*;

use mfsde_core::noise::TimeGrid;
use mfsde_core::paths::{CadlagPath, RecordedJump};
use mfsde_core::staircase::{envelopes, lower_staircase, sample_points, staircase_diagnostics, upper_staircase};

fn path_strategy() -> impl Strategy<Value = CadlagPath> {
    (
        1usize..40,
        prop::collection::vec(0.0f64..5.0, 41),
        prop::collection::vec((0usize..40, 0.01f64..0.99, 0.0f64..5.0), 0..6),
    )
        .prop_map(|(steps, raw, jump_specs)| {
            let grid = Arc::new(TimeGrid::uniform(1.0, steps).unwrap());
            let values = raw[..=steps].to_vec();
            let mut jumps: Vec<RecordedJump> = Vec::new();
            let mut used = Vec::new();
            for (j, frac, size) in jump_specs {
                let j = j % steps;
                if used.contains(&j) {
                    continue;
                }
                used.push(j);
                let time = grid.time(j) + frac * grid.dt(j);
                jumps.push(RecordedJump {
                    time,
                    left_limit: values[j],
                    right_value: size,
                });
            }
            CadlagPath::new(grid, values, jumps).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn staircases_bracket_the_path(b in path_strategy(), n in 1usize..12) {
        let lower = lower_staircase(&b, n).unwrap();
        let upper = upper_staircase(&b).unwrap();
        for (t, v) in sample_points(&b) {
            prop_assert!(lower.evaluate(t).unwrap() <= v, "lower above path at {}", t);
            prop_assert!(upper.evaluate(t).unwrap() >= v, "upper below path at {}", t);
        }
    }

    #[test]
    fn envelopes_increase_and_stay_below(b in path_strategy()) {
        let envs = envelopes(&b, 8).unwrap();
        for (t, v) in sample_points(&b) {
            let mut prev = 0.0;
            for e in &envs {
                let x = e.evaluate(t).unwrap();
                prop_assert!(x >= prev);
                prop_assert!(x <= v);
                prev = x;
            }
        }
        let report = staircase_diagnostics(&b, 8).unwrap();
        prop_assert!(report.envelope_monotone && report.upper_dominates);
        prop_assert!(report.levels.iter().all(|l| l.max_excess <= 0.0 && l.gap_within_bound));
    }
}

#[test]
fn drop_at_the_horizon_restarts_the_level() {
    let grid = Arc::new(TimeGrid::uniform(1.0, 4).unwrap());
    let b = CadlagPath::new(grid, vec![2.0, 2.0, 2.0, 2.0, 0.5], Vec::new()).unwrap();
    let lower = lower_staircase(&b, 4).unwrap();
    assert_eq!(lower.evaluate(0.9).unwrap(), 1.75);
    assert_eq!(lower.evaluate(1.0).unwrap(), 0.25);
    let upper = upper_staircase(&b).unwrap();
    assert_eq!(upper.evaluate(1.0).unwrap(), 1.5);
}

