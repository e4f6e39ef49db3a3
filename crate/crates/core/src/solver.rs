//! Euler-type solver for the one-dimensional equation
//! `dY = a(b_t - Y)dt + σ(Y)dW + ∫g0(Y_-, u)Ñ0 + ∫g1(Y_-, u)N1` driven by an
//! arbitrary càdlàg forcing `b`, and the comparison harness built on it.
//!
//! One step from `t_j` to `t_{j+1}` applies the continuous part
//! `decay * Y + gain * b(t_j) + σ(Y)ΔW + Σ c (Y⁺)^{1/α} ΔZ - compensator * Δt`,
//! clips at zero, then applies the events in `(t_j, t_{j+1}]` in time order,
//! each evaluated at the running value and followed by another clip.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coeffs::{pos, CoefficientSet, CompensatedJump, DriftSpec, RawJump};
use crate::error::{invalid, Error, Result};
use crate::noise::{JumpEvent, Mark, NoiseBundle, TimeGrid};
use crate::paths::{CadlagPath, RecordedJump, StaircasePath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// `Y + aΔ(b - Y)`; monotone in `(Y, b)` while `aΔ <= 1`.
    ExplicitEulerClipped,
    /// Exact integration of the linear mean reversion over each step.
    DriftImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub step_size: f64,
    #[serde(default = "default_clip")]
    pub clip_at_zero: bool,
}

fn default_clip() -> bool {
    true
}

impl SchemeConfig {
    pub fn explicit(step_size: f64) -> Self {
        Self {
            scheme: Scheme::ExplicitEulerClipped,
            step_size,
            clip_at_zero: true,
        }
    }

    pub fn implicit(step_size: f64) -> Self {
        Self {
            scheme: Scheme::DriftImplicit,
            step_size,
            clip_at_zero: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size.is_finite() && self.step_size > 0.0) {
            return invalid(format!("step size must be positive, got {}", self.step_size));
        }
        Ok(())
    }

    /// Warning for an explicit step that breaks the monotonicity condition.
    pub fn monotonicity_warning(&self, a: f64, component: usize) -> Option<String> {
        (self.scheme == Scheme::ExplicitEulerClipped && a * self.step_size > 1.0).then(|| {
            format!(
                "component {component}: a Δt = {} > 1, the explicit scheme is not monotone",
                a * self.step_size
            )
        })
    }
}

/// Non-fatal findings of a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub warnings: Vec<String>,
}

/// A solved path with its run report.
#[derive(Debug, Clone)]
pub struct Solution {
    pub path: CadlagPath,
    pub report: RunReport,
}

/// Drift forcing of the one-dimensional equation.
#[derive(Debug, Clone, Copy)]
pub enum Forcing<'a> {
    /// `b(t, [Y])`, evaluated at the pre-step time and state.
    Spec(&'a DriftSpec),
    /// A realised path, evaluated right-continuously at the pre-step time.
    Path(&'a CadlagPath),
    Staircase(&'a StaircasePath),
    /// One value per step of the solver grid.
    PerStep(&'a [f64]),
}

impl Forcing<'_> {
    #[inline]
    pub fn value(&self, step: usize, t: f64, y: f64) -> f64 {
        match self {
            Forcing::Spec(d) => d.eval(t, std::slice::from_ref(&y)),
            Forcing::Path(p) => p.evaluate(t.min(p.horizon())).expect("time inside horizon"),
            Forcing::Staircase(s) => s.evaluate(t.min(s.horizon())).expect("time inside horizon"),
            Forcing::PerStep(v) => v[step],
        }
    }

    fn check(&self, grid: &TimeGrid) -> Result<()> {
        let horizon = grid.horizon();
        let other = match self {
            Forcing::Spec(_) => return Ok(()),
            Forcing::Path(p) => p.horizon(),
            Forcing::Staircase(s) => s.horizon(),
            Forcing::PerStep(v) => {
                if v.len() != grid.steps() {
                    return Err(Error::IncompatibleGrid(format!(
                        "{} forcing values for {} steps",
                        v.len(),
                        grid.steps()
                    )));
                }
                return Ok(());
            }
        };
        if other != horizon {
            return Err(Error::IncompatibleGrid(format!(
                "forcing horizon {other} differs from noise horizon {horizon}"
            )));
        }
        Ok(())
    }
}

/// Bring a noise bundle onto the solver step, merging increments when the
/// step is a multiple of the noise step.
pub fn align_noise(noise: &NoiseBundle, cfg: &SchemeConfig) -> Result<NoiseBundle> {
    cfg.validate()?;
    let native = noise.grid.mesh();
    if (native - cfg.step_size).abs() <= 1e-12 * cfg.step_size {
        return Ok(noise.clone());
    }
    noise.coarsen_to_step(cfg.step_size)
}

struct StableTerm {
    factor: usize,
    coeff: f64,
    inv_alpha: f64,
}

/// Per-component stepping kernel over a fixed noise bundle.
pub(crate) struct Stepper<'a> {
    coeffs: &'a CoefficientSet,
    noise: &'a NoiseBundle,
    cfg: SchemeConfig,
    stable: Vec<StableTerm>,
    /// `(mass * E[ζ], V)` of thinned terms.
    compensators: Vec<(f64, f64)>,
    /// Measures whose events move this component, with one cursor each.
    measures: Vec<usize>,
    cursors: Vec<usize>,
    buffer: Vec<JumpEvent>,
    pub(crate) component: usize,
}

impl<'a> Stepper<'a> {
    /// Kernel positioned to take step `start` next.
    pub(crate) fn new(
        coeffs: &'a CoefficientSet,
        noise: &'a NoiseBundle,
        cfg: SchemeConfig,
        start: usize,
        component: usize,
    ) -> Self {
        let layout = &noise.layout;
        let mut stable = Vec::new();
        let mut compensators = Vec::new();
        let mut measures = Vec::new();
        for term in &coeffs.g0 {
            match *term {
                CompensatedJump::Stable { factor, coeff } => stable.push(StableTerm {
                    factor,
                    coeff,
                    inv_alpha: 1.0 / layout.stable_alphas[factor],
                }),
                CompensatedJump::Thinned { measure } => {
                    let m = &layout.finite_measures[measure];
                    compensators.push((m.mass * m.sizes.mean(), m.thinning_bound.unwrap_or(f64::INFINITY)));
                    measures.push(measure);
                }
            }
        }
        measures.extend(coeffs.g1.iter().map(RawJump::measure));
        measures.sort_unstable();
        measures.dedup();
        let t0 = noise.grid.time(start);
        let cursors = measures
            .iter()
            .map(|&m| noise.events[m].partition_point(|e| e.time <= t0))
            .collect();
        Self {
            coeffs,
            noise,
            cfg,
            stable,
            compensators,
            measures,
            cursors,
            buffer: Vec::new(),
            component,
        }
    }

    /// Continuous part of step `j` from `y` under forcing `b`, before clipping.
    #[inline]
    fn continuous(&self, j: usize, y: f64, b: f64) -> f64 {
        let dt = self.noise.grid.dt(j);
        let a = self.coeffs.a;
        let (decay, gain) = match self.cfg.scheme {
            Scheme::ExplicitEulerClipped => (1.0 - a * dt, a * dt),
            Scheme::DriftImplicit => {
                let g = -(-a * dt).exp_m1();
                (1.0 - g, g)
            }
        };
        let mut next = decay * y + gain * b;
        let sigma = self.coeffs.sigma.eval(y);
        if sigma != 0.0 {
            next += sigma * self.coeffs.driving_increment(self.noise, j);
        }
        if !self.stable.is_empty() {
            let yp = pos(y);
            for s in &self.stable {
                next += s.coeff * yp.powf(s.inv_alpha) * self.noise.stable[s.factor][j];
            }
        }
        for &(rate, bound) in &self.compensators {
            next -= rate * pos(y).min(bound) * dt;
        }
        next
    }

    fn clip(&self, y: f64) -> f64 {
        if self.cfg.clip_at_zero {
            y.max(0.0)
        } else {
            y
        }
    }

    fn jump_size(&self, event: &JumpEvent, y: f64) -> f64 {
        let mut inc = 0.0;
        for term in &self.coeffs.g0 {
            if let CompensatedJump::Thinned { measure } = *term {
                if measure == event.measure {
                    if let Mark::Thinned { v, size } = event.mark {
                        if v < y {
                            inc += size;
                        }
                    }
                }
            }
        }
        for term in &self.coeffs.g1 {
            if term.measure() == event.measure {
                inc += term.eval(y, event.mark.size());
            }
        }
        inc
    }

    /// Take step `j` from `y` with forcing `b`; jumps are appended to `jumps`.
    pub(crate) fn step(&mut self, j: usize, y: f64, b: f64, jumps: &mut Vec<RecordedJump>) -> Result<f64> {
        let raw = self.continuous(j, y, b);
        if !raw.is_finite() {
            return Err(Error::NonFinite {
                component: self.component,
                step: j,
                time: self.noise.grid.time(j + 1),
            });
        }
        let mut next = self.clip(raw);
        if self.measures.is_empty() {
            return Ok(next);
        }
        self.buffer.clear();
        for (k, &m) in self.measures.iter().enumerate() {
            let range = self.noise.events_in_step(m, j, &mut self.cursors[k]);
            self.buffer.extend_from_slice(&self.noise.events[m][range]);
        }
        if self.buffer.is_empty() {
            return Ok(next);
        }
        self.buffer
            .sort_by(|a, b| a.time.total_cmp(&b.time).then(a.measure.cmp(&b.measure)));
        let mut shown = y;
        for idx in 0..self.buffer.len() {
            let e = self.buffer[idx];
            let inc = self.jump_size(&e, next);
            if inc != 0.0 {
                if !(next + inc).is_finite() {
                    return Err(Error::NonFinite {
                        component: self.component,
                        step: j,
                        time: e.time,
                    });
                }
                let after = self.clip(next + inc);
                let actual = after - next;
                next = after;
                if actual != 0.0 {
                    jumps.push(RecordedJump {
                        time: e.time,
                        left_limit: shown,
                        right_value: shown + actual,
                    });
                    shown += actual;
                }
            }
        }
        Ok(next)
    }
}

/// Integrate steps `range` from `y0`, appending values (excluding the start
/// value) and jumps. Returns the final value.
pub(crate) fn integrate_range(
    stepper: &mut Stepper<'_>,
    range: std::ops::Range<usize>,
    y0: f64,
    forcing: &Forcing<'_>,
    values: &mut Vec<f64>,
    jumps: &mut Vec<RecordedJump>,
) -> Result<f64> {
    let grid = Arc::clone(&stepper.noise.grid);
    let mut y = y0;
    for j in range {
        let b = forcing.value(j, grid.time(j), y);
        y = stepper.step(j, y, b, jumps)?;
        values.push(y);
    }
    Ok(y)
}

/// Solve the one-dimensional equation from `initial` on the noise grid
/// (coarsened to `cfg.step_size` when needed).
pub fn solve_onedim(
    coeffs: &CoefficientSet,
    initial: f64,
    forcing: Forcing<'_>,
    noise: &NoiseBundle,
    cfg: &SchemeConfig,
) -> Result<Solution> {
    if !(initial.is_finite() && initial >= 0.0) {
        return invalid(format!("initial value must be >= 0, got {initial}"));
    }
    coeffs.check_against(&noise.layout)?;
    let noise = align_noise(noise, cfg)?;
    forcing.check(&noise.grid)?;
    let mut report = RunReport::default();
    report.warnings.extend(cfg.monotonicity_warning(coeffs.a, 0));
    let steps = noise.steps();
    let mut values = Vec::with_capacity(steps + 1);
    values.push(initial);
    let mut jumps = Vec::new();
    let mut stepper = Stepper::new(coeffs, &noise, *cfg, 0, 0);
    integrate_range(&mut stepper, 0..steps, initial, &forcing, &mut values, &mut jumps)?;
    Ok(Solution {
        path: CadlagPath::new(Arc::clone(&noise.grid), values, jumps)?,
        report,
    })
}

/// Ordering statistics of two paths on a shared grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    /// `max_t (low_t - high_t)⁺`
    pub max_violation: f64,
    /// Fraction of grid points with `low_t - high_t > tolerance`.
    pub violating_fraction: f64,
    pub points: usize,
    pub tolerance: f64,
}

impl OrderingReport {
    pub fn between(low: &[f64], high: &[f64], tolerance: f64) -> Result<Self> {
        if low.len() != high.len() {
            return Err(Error::IncompatibleGrid(format!(
                "paths of lengths {} and {}",
                low.len(),
                high.len()
            )));
        }
        let mut max_violation = 0.0f64;
        let mut count = 0usize;
        for (l, h) in low.iter().zip(high) {
            let d = l - h;
            max_violation = max_violation.max(d);
            if d > tolerance {
                count += 1;
            }
        }
        Ok(Self {
            max_violation,
            violating_fraction: count as f64 / low.len().max(1) as f64,
            points: low.len(),
            tolerance,
        })
    }
}

/// Solve with both drifts on the same noise and report how far the lower
/// solution rises above the upper one.
#[allow(clippy::too_many_arguments)]
pub fn compare_ordered(
    coeffs: &CoefficientSet,
    low: Forcing<'_>,
    high: Forcing<'_>,
    initial_low: f64,
    initial_high: f64,
    noise: &NoiseBundle,
    cfg: &SchemeConfig,
    tolerance: f64,
) -> Result<(OrderingReport, Solution, Solution)> {
    if initial_low > initial_high {
        return invalid("initial values must be ordered");
    }
    let aligned = align_noise(noise, cfg)?;
    low.check(&aligned.grid)?;
    high.check(&aligned.grid)?;
    for (j, &t) in aligned.grid.points()[..aligned.steps()].iter().enumerate() {
        if low.value(j, t, 0.0) > high.value(j, t, 0.0) {
            return invalid(format!("drifts are not ordered at t = {t}"));
        }
    }
    let lo = solve_onedim(coeffs, initial_low, low, &aligned, cfg)?;
    let hi = solve_onedim(coeffs, initial_high, high, &aligned, cfg)?;
    let report = OrderingReport::between(lo.path.values(), hi.path.values(), tolerance)?;
    Ok((report, lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::{Diffusion, LevelModulus, Loading, Modulus};
    use crate::noise::{FiniteMeasure, MarkSampler, NoiseLayout, SeedLineage};

    fn plain(a: f64) -> CoefficientSet {
        CoefficientSet {
            a,
            sigma: Diffusion::Zero,
            loadings: Vec::new(),
            g0: Vec::new(),
            g1: Vec::new(),
            rho: Modulus::Zero,
            rho_m: LevelModulus::zero(),
            r_m: LevelModulus::zero(),
            growth_k: 0.0,
        }
    }

    fn bundle(layout: &NoiseLayout, steps: usize, seed: u64) -> NoiseBundle {
        let grid = Arc::new(TimeGrid::uniform(1.0, steps).unwrap());
        NoiseBundle::generate(layout, grid, SeedLineage::new(seed, 0)).unwrap()
    }

    fn empty_layout() -> NoiseLayout {
        NoiseLayout {
            brownian_factors: 1,
            ..NoiseLayout::default()
        }
    }

    #[test]
    fn linear_ode_first_order_convergence() {
        let exact = 2.0 * (1.0 - (-1.0f64).exp());
        let drift = DriftSpec::Constant { value: 2.0 };
        let mut errs = Vec::new();
        for steps in [64, 128, 256, 512] {
            let noise = bundle(&empty_layout(), steps, 1);
            let sol = solve_onedim(&plain(1.0), 0.0, Forcing::Spec(&drift), &noise, &SchemeConfig::explicit(1.0 / steps as f64)).unwrap();
            errs.push((sol.path.values()[steps] - exact).abs());
        }
        for w in errs.windows(2) {
            let ratio = w[0] / w[1];
            assert!((1.8..2.2).contains(&ratio), "ratio {ratio}");
        }
        let noise = bundle(&empty_layout(), 64, 1);
        let sol = solve_onedim(&plain(1.0), 0.0, Forcing::Spec(&drift), &noise, &SchemeConfig::implicit(1.0 / 64.0)).unwrap();
        assert!((sol.path.values()[64] - exact).abs() < 1e-12);
    }

    #[test]
    fn single_raw_jump_is_booked_at_its_time() {
        let layout = NoiseLayout {
            brownian_factors: 1,
            stable_alphas: Vec::new(),
            finite_measures: vec![FiniteMeasure {
                mass: 1.0,
                sizes: MarkSampler::PointMass { size: 0.75 },
                thinning_bound: None,
            }],
        };
        let mut noise = bundle(&layout, 100, 3);
        noise.events[0] = vec![JumpEvent {
            time: 0.4037,
            mark: Mark::Size(0.75),
            measure: 0,
        }];
        let mut c = plain(0.0);
        c.g1.push(RawJump::Additive { measure: 0 });
        let zero = DriftSpec::Constant { value: 0.0 };
        let sol = solve_onedim(&c, 1.5, Forcing::Spec(&zero), &noise, &SchemeConfig::explicit(0.01)).unwrap();
        let p = &sol.path;
        assert_eq!(p.evaluate(0.4).unwrap(), 1.5);
        assert_eq!(p.evaluate(0.4036).unwrap(), 1.5);
        assert_eq!(p.evaluate(0.4037).unwrap(), 2.25);
        assert_eq!(p.left_limit(0.4037).unwrap(), 1.5);
        assert_eq!(p.evaluate(1.0).unwrap(), 2.25);
    }

    #[test]
    fn explicit_step_too_large_warns() {
        let noise = bundle(&empty_layout(), 4, 1);
        let drift = DriftSpec::Constant { value: 1.0 };
        let sol = solve_onedim(&plain(8.0), 0.0, Forcing::Spec(&drift), &noise, &SchemeConfig::explicit(0.25)).unwrap();
        assert_eq!(sol.report.warnings.len(), 1);
        assert!(sol.path.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn coarse_step_merges_noise_and_bad_step_rejected() {
        let mut c = plain(1.0);
        c.sigma = Diffusion::Sqrt { scale: 1.0 };
        c.loadings.push(Loading { factor: 0, weight: 1.0 });
        let noise = bundle(&empty_layout(), 64, 9);
        let drift = DriftSpec::Constant { value: 1.0 };
        let sol = solve_onedim(&c, 1.0, Forcing::Spec(&drift), &noise, &SchemeConfig::explicit(1.0 / 16.0)).unwrap();
        assert_eq!(sol.path.values().len(), 17);
        let err = solve_onedim(&c, 1.0, Forcing::Spec(&drift), &noise, &SchemeConfig::explicit(0.3)).unwrap_err();
        assert!(matches!(err, Error::IncompatibleGrid(_)));
    }

    #[test]
    fn nan_is_reported_with_step() {
        let mut c = plain(1.0);
        c.sigma = Diffusion::Sqrt { scale: 1.0 };
        c.loadings.push(Loading { factor: 0, weight: 1.0 });
        let mut noise = bundle(&empty_layout(), 8, 1);
        noise.brownian[0][5] = f64::NAN;
        let drift = DriftSpec::Constant { value: 1.0 };
        let err = solve_onedim(&c, 1.0, Forcing::Spec(&drift), &noise, &SchemeConfig::explicit(0.125)).unwrap_err();
        assert!(matches!(err, Error::NonFinite { step: 5, .. }));
    }

    #[test]
    fn deterministic_comparison_is_exact() {
        let noise = bundle(&empty_layout(), 256, 2);
        let lo = DriftSpec::TimeLinear {
            intercept: 0.5,
            slope: 1.0,
        };
        let hi = DriftSpec::TimeLinear {
            intercept: 1.5,
            slope: 1.0,
        };
        let (r, _, _) = compare_ordered(&plain(2.0), Forcing::Spec(&lo), Forcing::Spec(&hi), 0.3, 0.3, &noise, &SchemeConfig::explicit(1.0 / 256.0), 0.0).unwrap();
        assert_eq!(r.max_violation, 0.0);
        assert_eq!(r.violating_fraction, 0.0);
        assert!(compare_ordered(&plain(2.0), Forcing::Spec(&hi), Forcing::Spec(&lo), 0.3, 0.3, &noise, &SchemeConfig::explicit(1.0 / 256.0), 0.0).is_err());
    }
}
