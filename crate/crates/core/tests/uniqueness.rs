use proptest::prelude::*;

use mfsde_core::coeffs::{preset_eq11, Eq11Params, Modulus};
use mfsde_core::solver::SchemeConfig;
use mfsde_core::uniqueness::{uniqueness_trial, yw_sequence, TestFunctionFamily, TrialConfig};

fn power_integral(coeff: f64, gamma: f64, lo: f64, hi: f64) -> f64 {
    if gamma == 0.5 {
        (hi / lo).ln() / (coeff * coeff)
    } else {
        let e = 1.0 - 2.0 * gamma;
        (hi.powf(e) - lo.powf(e)) / (e * coeff * coeff)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn power_sequences_hit_integer_integrals(coeff in 0.5f64..3.0, gamma in 0.5f64..1.0, xm in 0.1f64..2.0) {
        let seq = yw_sequence(&Modulus::power(coeff, gamma), xm, 3).unwrap();
        prop_assert_eq!(seq[0], xm);
        for k in 1..seq.len() {
            prop_assert!(seq[k] > 0.0 && seq[k] < seq[k - 1]);
            let got = power_integral(coeff, gamma, seq[k], seq[k - 1]);
            prop_assert!((got - k as f64).abs() <= 1e-9 * k as f64, "k={} integral {}", k, got);
        }
    }

    #[test]
    fn test_functions_have_the_required_shape(gamma in 0.5f64..1.0, k in 1usize..6, u in -1.0f64..1.0) {
        let family = TestFunctionFamily::new(Modulus::power(1.0, gamma), 1.0, 6).unwrap();
        let phi = family.phi(k).unwrap();
        let prev = family.a_seq[k - 1];
        let x = u * 2.0 * prev;
        let (v, d, dd) = phi.eval(x);
        prop_assert_eq!(phi.value(0.0), 0.0);
        prop_assert!(d.abs() <= 1.0 && d * x >= 0.0);
        prop_assert!(dd >= 0.0);
        prop_assert!(v <= x.abs() && v >= x.abs() - prev);
        prop_assert_eq!(v, phi.value(-x));
    }
}

fn cir_trial(ladder: Vec<f64>) -> mfsde_core::uniqueness::UniquenessReport {
    let spec = preset_eq11(&Eq11Params { a: 1.0, b: 2.0, sigma: 0.5, sigma_z: 0.0, alpha: 1.5, initial: 1.0 }).unwrap();
    let family = TestFunctionFamily::new(Modulus::power(0.5, 0.5), 1.0, 10).unwrap();
    let cfg = TrialConfig {
        horizon: 1.0,
        ladder: ladder.clone(),
        template: SchemeConfig::explicit(ladder[0]),
        seed: 3,
        paths: 200,
        ceiling: None,
        family: Some(family),
        ks: vec![1, 4],
    };
    uniqueness_trial(&spec, &cfg).unwrap()
}

#[test]
fn single_step_ladder_has_zero_divergence() {
    let r = cir_trial(vec![1.0 / 64.0]);
    assert_eq!(r.rows.len(), 1);
    assert_eq!(r.rows[0].max_sup_diff_mean, 0.0);
    assert!(r.phi_dominated);
}

#[test]
fn divergence_shrinks_towards_the_reference() {
    let r = cir_trial(vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]);
    let d: Vec<f64> = r.rows.iter().map(|row| row.max_sup_diff_mean).collect();
    assert!(d[0] > d[1] && d[1] > d[2] && d[2] == 0.0, "{d:?}");
    assert_eq!(r.paths_used, 200);
    assert!(r.phi_dominated);
}
