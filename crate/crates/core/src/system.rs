//! Direct simulation of the coupled N-component system and ensemble moment
//! estimation.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::SystemSpec;
use crate::error::{invalid, Result};
use crate::noise::{NoiseBundle, SeedLineage, TimeGrid};
use crate::paths::{CadlagPath, RecordedJump};
use crate::solver::{align_noise, RunReport, SchemeConfig, Stepper};

/// One trajectory of every component.
#[derive(Debug, Clone)]
pub struct SystemSolution {
    pub paths: Vec<CadlagPath>,
    pub report: RunReport,
}

/// Jacobi-style Euler stepping: every drift is evaluated at the pre-step
/// state vector, then all components advance with their own noise slices.
pub fn solve_system(spec: &SystemSpec, noise: &NoiseBundle, cfg: &SchemeConfig) -> Result<SystemSolution> {
    spec.validate()?;
    if *noise.layout != spec.layout {
        return invalid("noise bundle was generated for a different layout");
    }
    let noise = align_noise(noise, cfg)?;
    let n = spec.len();
    let steps = noise.steps();
    let mut report = RunReport::default();
    for (i, c) in spec.components.iter().enumerate() {
        report.warnings.extend(cfg.monotonicity_warning(c.coeffs.a, i));
    }
    let mut steppers: Vec<Stepper<'_>> = spec
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| Stepper::new(&c.coeffs, &noise, *cfg, 0, i))
        .collect();
    let mut state = spec.initials();
    let mut values: Vec<Vec<f64>> = state
        .iter()
        .map(|&x| {
            let mut v = Vec::with_capacity(steps + 1);
            v.push(x);
            v
        })
        .collect();
    let mut jumps: Vec<Vec<RecordedJump>> = vec![Vec::new(); n];
    let mut forcing = vec![0.0; n];
    for j in 0..steps {
        let t = noise.grid.time(j);
        for (f, c) in forcing.iter_mut().zip(&spec.components) {
            *f = c.drift.eval(t, &state);
        }
        for i in 0..n {
            state[i] = steppers[i].step(j, state[i], forcing[i], &mut jumps[i])?;
            values[i].push(state[i]);
        }
    }
    let paths = values
        .into_iter()
        .zip(jumps)
        .map(|(v, js)| CadlagPath::new(Arc::clone(&noise.grid), v, js))
        .collect::<Result<_>>()?;
    Ok(SystemSolution { paths, report })
}

/// Run `f` for path indices `0..count` in parallel on the current rayon
/// pool, returning results in index order.
pub fn run_ensemble<T, F>(count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    (0..count as u64).into_par_iter().map(f).collect()
}

/// Values of one trajectory at the report times plus its time integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    /// `values[t][i]`
    pub values: Vec<Vec<f64>>,
    /// `∫_0^T λ^i_t dt` per component.
    pub integrals: Vec<f64>,
}

impl PathSample {
    pub fn from_paths(paths: &[CadlagPath], times: &[f64]) -> Result<Self> {
        let values = times
            .iter()
            .map(|&t| paths.iter().map(|p| p.evaluate(t)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(Self {
            values,
            integrals: paths.iter().map(CadlagPath::integral).collect(),
        })
    }
}

/// Simulate `count` trajectories of `spec` on a uniform grid, sampling each
/// at `times`. Path `p` uses the seed lineage `(seed, p)`.
pub fn simulate_ensemble(
    spec: &SystemSpec,
    grid: Arc<TimeGrid>,
    cfg: &SchemeConfig,
    seed: u64,
    count: usize,
    times: &[f64],
) -> Result<(Vec<PathSample>, RunReport)> {
    spec.validate()?;
    let runs = run_ensemble(count, |p| {
        let noise = NoiseBundle::generate(&spec.layout, Arc::clone(&grid), SeedLineage::new(seed, p))?;
        let sol = solve_system(spec, &noise, cfg).map_err(|e| with_path(e, p))?;
        Ok((PathSample::from_paths(&sol.paths, times)?, sol.report))
    })?;
    let report = runs.first().map(|r| r.1.clone()).unwrap_or_default();
    Ok((runs.into_iter().map(|r| r.0).collect(), report))
}

/// Attach a path index to a numeric failure.
pub fn with_path(e: crate::Error, path: u64) -> crate::Error {
    match e {
        crate::Error::NonFinite { component, step, time } => crate::Error::Numerical(format!(
            "non-finite value in path {path}, component {component}, step {step} (t = {time})"
        )),
        other => other,
    }
}

/// Mean, standard error and quantiles of one series of samples per time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
    /// Estimate of `E[∫_0^T λ_t dt]` and its standard error.
    pub integral_mean: f64,
    pub integral_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub times: Vec<f64>,
    pub paths: usize,
    pub components: Vec<SeriesStats>,
    /// Statistics of `(1/N) Σ_i λ^i_t` per path.
    pub aggregate: SeriesStats,
}

/// Sample mean and standard error of the mean, with a fixed summation order.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn series(per_time: &[Vec<f64>], integrals: &[f64]) -> SeriesStats {
    let mut s = SeriesStats {
        mean: Vec::new(),
        std_error: Vec::new(),
        q05: Vec::new(),
        q50: Vec::new(),
        q95: Vec::new(),
        integral_mean: 0.0,
        integral_std_error: 0.0,
    };
    for xs in per_time {
        let (m, se) = mean_and_se(xs);
        let mut sorted = xs.clone();
        sorted.sort_by(f64::total_cmp);
        s.mean.push(m);
        s.std_error.push(se);
        s.q05.push(quantile(&sorted, 0.05));
        s.q50.push(quantile(&sorted, 0.5));
        s.q95.push(quantile(&sorted, 0.95));
    }
    (s.integral_mean, s.integral_std_error) = mean_and_se(integrals);
    s
}

/// Per-time statistics of every component and of the component average.
pub fn estimate_moments(samples: &[PathSample], times: &[f64]) -> Result<MomentSummary> {
    if samples.len() < 2 {
        return invalid("moment estimation needs at least two trajectories");
    }
    let n = samples[0].integrals.len();
    if samples
        .iter()
        .any(|s| s.integrals.len() != n || s.values.len() != times.len())
    {
        return invalid("trajectory samples disagree in shape");
    }
    let components = (0..n)
        .map(|i| {
            let per_time: Vec<Vec<f64>> = (0..times.len())
                .map(|t| samples.iter().map(|s| s.values[t][i]).collect())
                .collect();
            let integrals: Vec<f64> = samples.iter().map(|s| s.integrals[i]).collect();
            series(&per_time, &integrals)
        })
        .collect();
    let avg = |xs: &[f64]| xs.iter().sum::<f64>() / n as f64;
    let per_time: Vec<Vec<f64>> = (0..times.len())
        .map(|t| samples.iter().map(|s| avg(&s.values[t])).collect())
        .collect();
    let integrals: Vec<f64> = samples.iter().map(|s| avg(&s.integrals)).collect();
    Ok(MomentSummary {
        times: times.to_vec(),
        paths: samples.len(),
        components,
        aggregate: series(&per_time, &integrals),
    })
}

/// Convenience wrapper over already solved trajectories.
pub fn estimate_moments_from_paths(trajectories: &[Vec<CadlagPath>], times: &[f64]) -> Result<MomentSummary> {
    let samples = trajectories
        .iter()
        .map(|paths| PathSample::from_paths(paths, times))
        .collect::<Result<Vec<_>>>()?;
    estimate_moments(&samples, times)
}
