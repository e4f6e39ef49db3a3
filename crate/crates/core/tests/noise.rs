use std::sync::Arc;

use mfsde_core::noise::{gen_brownian, gen_stable_increments, NoiseBundle, NoiseLayout, SeedLineage, StreamSeed, TimeGrid};
use mfsde_core::system::mean_and_se;

#[test]
fn brownian_increments_have_step_variance() {
    let grid = TimeGrid::uniform(2.0, 200_000).unwrap();
    let dw = gen_brownian(&grid, 1, SeedLineage::new(8, 0)).unwrap().remove(0);
    let scaled: Vec<f64> = dw.iter().map(|x| x * x / grid.dt(0)).collect();
    let (m, se) = mean_and_se(&scaled);
    assert!((m - 1.0).abs() < 4.0 * se, "{m} ± {se}");
}

#[test]
fn gaussian_stable_increments_have_twice_the_step_variance() {
    let grid = TimeGrid::uniform(1.0, 200_000).unwrap();
    let dz = gen_stable_increments(&grid, 2.0, StreamSeed::stable(SeedLineage::new(9, 0), 0)).unwrap();
    let scaled: Vec<f64> = dz.iter().map(|x| x * x / grid.dt(0)).collect();
    let (m, se) = mean_and_se(&scaled);
    assert!((m - 2.0).abs() < 4.0 * se, "{m} ± {se}");
}

#[test]
fn stable_increments_follow_the_scaled_characteristic_function() {
    let steps = 100_000;
    let grid = TimeGrid::uniform(100.0, steps).unwrap();
    let alpha: f64 = 1.5;
    let dz = gen_stable_increments(&grid, alpha, StreamSeed::stable(SeedLineage::new(10, 0), 0)).unwrap();
    let dt = grid.dt(0);
    for theta in [-1.0f64, 0.5, 2.0] {
        let (mut re, mut im) = (0.0, 0.0);
        for x in &dz {
            re += (theta * x).cos();
            im += (theta * x).sin();
        }
        re /= steps as f64;
        im /= steps as f64;
        let scale = theta.abs().powf(alpha) * dt;
        let mag = (-scale).exp();
        let arg = scale * (std::f64::consts::PI * alpha / 2.0).tan() * theta.signum();
        let err = ((re - mag * arg.cos()).powi(2) + (im - mag * arg.sin()).powi(2)).sqrt();
        assert!(err < 2e-2, "θ={theta}: error {err}");
    }
}

#[test]
fn bundles_are_reproducible_and_path_specific() {
    let layout = NoiseLayout { brownian_factors: 2, stable_alphas: vec![1.3], finite_measures: Vec::new() };
    let grid = Arc::new(TimeGrid::uniform(1.0, 32).unwrap());
    let a = NoiseBundle::generate(&layout, Arc::clone(&grid), SeedLineage::new(4, 1)).unwrap();
    let b = NoiseBundle::generate(&layout, Arc::clone(&grid), SeedLineage::new(4, 1)).unwrap();
    let c = NoiseBundle::generate(&layout, grid, SeedLineage::new(4, 2)).unwrap();
    assert_eq!(a.brownian, b.brownian);
    assert_eq!(a.stable, b.stable);
    assert_ne!(a.brownian, c.brownian);
    let coarse = a.coarsen(4).unwrap();
    for (f, c) in a.brownian.iter().zip(&coarse.brownian) {
        for (k, v) in c.iter().enumerate() {
            let s: f64 = f[4 * k..4 * k + 4].iter().sum();
            assert!((s - v).abs() < 1e-15);
        }
    }
}
