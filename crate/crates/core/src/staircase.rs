//! Lower and upper staircase approximations of a càdlàg drift, the lower
//! envelope and its convergence diagnostics.
//!
//! Infima in the stopping-time recursions run over the sample points of the
//! path (grid points and registered jump times). A sampled path is constant
//! between consecutive sample points, so the first sample point satisfying the
//! inequality is the infimum.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::paths::{pointwise_max, CadlagPath, StaircasePath};

/// Relative slack for the gap bound: the gap and the bound are equal in
/// exact arithmetic for some paths but are computed along different routes.
const ROUNDING_SLACK: f64 = 8.0 * f64::EPSILON;

/// Sorted sample points `(t, b(t))` of a path: grid points and jump times.
pub fn sample_points(b: &CadlagPath) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = b
        .grid()
        .points()
        .iter()
        .copied()
        .chain(b.jumps().iter().map(|j| j.time))
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
        .into_iter()
        .map(|t| (t, b.evaluate(t).expect("sample point inside horizon")))
        .collect()
}

/// Generic recursion: from `start`, stop at the first later sample point where
/// `crosses(level, b(t))` holds, or after `max_len`, or at `T`. The value at
/// `T` is the level restarted there.
fn staircase_by(
    samples: &[(f64, f64)],
    horizon: f64,
    max_len: f64,
    level_of: impl Fn(f64) -> f64,
    crosses: impl Fn(f64, f64) -> bool,
    value_at: impl Fn(f64) -> f64,
) -> StaircasePath {
    let mut breakpoints = vec![0.0];
    let mut levels = Vec::new();
    let mut t = 0.0;
    let mut idx = 0;
    while t < horizon {
        let level = level_of(value_at(t));
        while idx < samples.len() && samples[idx].0 <= t {
            idx += 1;
        }
        let mut next = (t + max_len).min(horizon);
        if next <= t {
            next = horizon;
        }
        let mut k = idx;
        while k < samples.len() && samples[k].0 < next {
            if crosses(level, samples[k].1) {
                next = samples[k].0;
                break;
            }
            k += 1;
        }
        levels.push(level);
        breakpoints.push(next);
        t = next;
    }
    StaircasePath::new(breakpoints, levels)
        .expect("recursion yields increasing breakpoints")
        .with_terminal(level_of(value_at(horizon)))
}

/// `t_{k+1} = inf{t > t_k : b(t_k) - 1/n > b(t)} ∧ (t_k + 1/n) ∧ T`, level
/// `b(t_k) - 1/n` on `[t_k, t_{k+1})`.
pub fn lower_staircase(b: &CadlagPath, n: usize) -> Result<StaircasePath> {
    if n == 0 {
        return invalid("staircase level must be >= 1");
    }
    let samples = sample_points(b);
    let inv = 1.0 / n as f64;
    Ok(staircase_by(
        &samples,
        b.horizon(),
        inv,
        |v| v - inv,
        |level, v| level > v,
        |t| b.evaluate(t).expect("inside horizon"),
    ))
}

/// `s_{k+1} = inf{t > s_k : b(s_k) + 1 < b(t)} ∧ (s_k + 1) ∧ T`, level
/// `b(s_k) + 1` on `[s_k, s_{k+1})`.
pub fn upper_staircase(b: &CadlagPath) -> Result<StaircasePath> {
    let samples = sample_points(b);
    Ok(staircase_by(
        &samples,
        b.horizon(),
        1.0,
        |v| v + 1.0,
        |level, v| level < v,
        |t| b.evaluate(t).expect("inside horizon"),
    ))
}

/// `max(0, lower_staircase(b, 1), ..., lower_staircase(b, n))`.
pub fn envelope(b: &CadlagPath, n: usize) -> Result<StaircasePath> {
    if n == 0 {
        return invalid("envelope level must be >= 1");
    }
    let mut parts = vec![StaircasePath::constant(b.horizon(), 0.0)];
    for m in 1..=n {
        parts.push(lower_staircase(b, m)?);
    }
    pointwise_max(&parts)
}

/// Envelopes for every level `1..=n_max`, built incrementally.
pub fn envelopes(b: &CadlagPath, n_max: usize) -> Result<Vec<StaircasePath>> {
    let mut out: Vec<StaircasePath> = Vec::with_capacity(n_max);
    let mut current = StaircasePath::constant(b.horizon(), 0.0);
    for m in 1..=n_max {
        current = pointwise_max(&[current, lower_staircase(b, m)?])?;
        out.push(current.clone());
    }
    Ok(out)
}

/// `sup |b(s) - b(r)|` over real pairs `r <= s` with `s - r < delta`, for the
/// piecewise-constant reading of the samples.
pub fn oscillation(samples: &[(f64, f64)], horizon: f64, delta: f64) -> f64 {
    let mut osc = 0.0f64;
    for r in 0..samples.len() {
        let next_r = samples.get(r + 1).map_or(horizon, |p| p.0);
        for s in r + 1..samples.len() {
            if !(next_r > samples[s].0 - delta) {
                break;
            }
            osc = osc.max((samples[s].1 - samples[r].1).abs());
        }
    }
    osc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub n: usize,
    /// Breakpoints of the level-n lower staircase, endpoints included.
    pub lower_breakpoints: usize,
    pub envelope_breakpoints: usize,
    /// `max (envelope - b)⁺` over sample points; zero when the envelope stays below `b`.
    pub max_excess: f64,
    /// `max (b - envelope)` over continuity points.
    pub sup_gap: f64,
    /// `1/n + osc(b, 1/n)`
    pub gap_bound: f64,
    pub gap_within_bound: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseReport {
    pub levels: Vec<LevelDiagnostics>,
    /// `upper_staircase(b) >= b` at every sample point.
    pub upper_dominates: bool,
    pub upper_breakpoints: usize,
    /// Envelope values never decrease from one level to the next.
    pub envelope_monotone: bool,
}

/// Per-level breakpoint counts, excess and gap statistics.
pub fn staircase_diagnostics(b: &CadlagPath, n_max: usize) -> Result<StaircaseReport> {
    if n_max == 0 {
        return invalid("n_max must be >= 1");
    }
    let samples = sample_points(b);
    let horizon = b.horizon();
    let envs = envelopes(b, n_max)?;
    let mut levels = Vec::with_capacity(n_max);
    for (idx, env) in envs.iter().enumerate() {
        let n = idx + 1;
        let inv = 1.0 / n as f64;
        let lower = lower_staircase(b, n)?;
        let mut max_excess = 0.0f64;
        let mut sup_gap = f64::NEG_INFINITY;
        for &(t, v) in &samples {
            let e = env.evaluate(t)?;
            max_excess = max_excess.max(e - v);
            let continuous = !b.jumps().iter().any(|j| j.time >= t - inv && j.time <= t);
            if continuous {
                sup_gap = sup_gap.max(v - e);
            }
        }
        let gap_bound = inv + oscillation(&samples, horizon, inv);
        levels.push(LevelDiagnostics {
            n,
            lower_breakpoints: lower.breakpoints().len(),
            envelope_breakpoints: env.breakpoints().len(),
            max_excess,
            sup_gap,
            gap_bound,
            gap_within_bound: sup_gap <= gap_bound + ROUNDING_SLACK * gap_bound.abs().max(1.0),
        });
    }
    let upper = upper_staircase(b)?;
    let upper_dominates = samples
        .iter()
        .all(|&(t, v)| upper.evaluate(t).expect("inside horizon") >= v);
    let envelope_monotone = envs.windows(2).all(|w| {
        samples
            .iter()
            .all(|&(t, _)| w[1].evaluate(t).expect("inside horizon") >= w[0].evaluate(t).expect("inside horizon"))
    });
    Ok(StaircaseReport {
        levels,
        upper_dominates,
        upper_breakpoints: upper.breakpoints().len(),
        envelope_monotone,
    })
}
