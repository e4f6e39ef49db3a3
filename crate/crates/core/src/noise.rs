//! Driving randomness: time grids, Brownian increments, spectrally positive
//! stable increments and finite-activity marked point processes.
//!
//! Every random stream is produced by a ChaCha8 generator whose 256-bit key is
//! the seed lineage `(master, path, branch, domain)` and whose stream id names
//! the factor. Two bundles built from the same lineage are bit-identical no
//! matter which thread builds them or in which order.

use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quad;

/// Ordered sample times `0 = t_0 < t_1 < ... < t_n = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("a time grid needs at least two points");
        }
        if points[0] != 0.0 {
            return invalid("a time grid must start at 0");
        }
        if points.iter().any(|t| !t.is_finite()) {
            return invalid("time grid contains a non-finite point");
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("time grid points must be strictly increasing");
        }
        Ok(Self { points })
    }

    /// `steps` equal steps over `[0, horizon]`; the last point is exactly `horizon`.
    pub fn uniform(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return invalid(format!("horizon must be positive and finite, got {horizon}"));
        }
        if steps == 0 {
            return invalid("a uniform grid needs at least one step");
        }
        let mut points: Vec<f64> = (0..=steps)
            .map(|k| horizon * (k as f64 / steps as f64))
            .collect();
        points[steps] = horizon;
        Self::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.points.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn time(&self, index: usize) -> f64 {
        self.points[index]
    }

    pub fn dt(&self, step: usize) -> f64 {
        self.points[step + 1] - self.points[step]
    }

    /// Largest step length.
    pub fn mesh(&self) -> f64 {
        self.points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max)
    }

    /// Index of the largest grid point `<= t`, or `None` outside `[0, T]`.
    pub fn locate(&self, t: f64) -> Option<usize> {
        if !(t >= 0.0 && t <= self.horizon()) {
            return None;
        }
        Some(self.points.partition_point(|&p| p <= t) - 1)
    }

    /// Exact index of `t` if it is a grid point.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.points
            .binary_search_by(|p| p.partial_cmp(&t).expect("grid points are finite"))
            .ok()
    }

    /// Keep every `factor`-th point.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.steps() % factor != 0 {
            return Err(Error::IncompatibleGrid(format!(
                "cannot coarsen {} steps by a factor of {factor}",
                self.steps()
            )));
        }
        Ok(Self {
            points: self.points.iter().step_by(factor).copied().collect(),
        })
    }

    /// True when every point of `coarse` is a point of `self`.
    pub fn refines(&self, coarse: &TimeGrid) -> bool {
        coarse.points.iter().all(|&t| self.index_of(t).is_some())
    }
}

/// Identifies one trajectory's randomness: the experiment seed, the path
/// index within the ensemble, and a branch index for nested continuations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master: u64,
    pub path: u64,
    pub branch: u64,
}

impl SeedLineage {
    pub fn new(master: u64, path: u64) -> Self {
        Self {
            master,
            path,
            branch: 0,
        }
    }

    pub fn with_branch(self, branch: u64) -> Self {
        Self { branch, ..self }
    }

    pub fn stream(self, stream: u64) -> StreamSeed {
        StreamSeed {
            lineage: self,
            stream,
        }
    }
}

/// A lineage plus the id of one independent stream inside it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub lineage: SeedLineage,
    pub stream: u64,
}

const KEY_DOMAIN: u64 = 0x6d66_7364_652d_6e7a;
const STABLE_STREAM_BASE: u64 = 1 << 20;
const EVENT_STREAM_BASE: u64 = 2 << 20;

impl StreamSeed {
    pub fn rng(self) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.lineage.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.lineage.path.to_le_bytes());
        key[16..24].copy_from_slice(&self.lineage.branch.to_le_bytes());
        key[24..32].copy_from_slice(&KEY_DOMAIN.to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.stream);
        rng
    }

    pub fn brownian(lineage: SeedLineage, factor: usize) -> Self {
        lineage.stream(factor as u64)
    }

    pub fn stable(lineage: SeedLineage, factor: usize) -> Self {
        lineage.stream(STABLE_STREAM_BASE + factor as u64)
    }

    pub fn events(lineage: SeedLineage, measure: usize) -> Self {
        lineage.stream(EVENT_STREAM_BASE + measure as u64)
    }
}

/// Gaussian increments `N(0, dt_j)` for `n_factors` independent Brownian motions.
pub fn gen_brownian(grid: &TimeGrid, n_factors: usize, lineage: SeedLineage) -> Result<Vec<Vec<f64>>> {
    gen_brownian_window(grid, n_factors, lineage, 0..grid.steps())
}

fn gen_brownian_window(
    grid: &TimeGrid,
    n_factors: usize,
    lineage: SeedLineage,
    window: std::ops::Range<usize>,
) -> Result<Vec<Vec<f64>>> {
    if n_factors == 0 {
        return invalid("at least one Brownian factor is required");
    }
    Ok((0..n_factors)
        .map(|f| {
            let mut rng = StreamSeed::brownian(lineage, f).rng();
            let mut out = vec![0.0; grid.steps()];
            for j in window.clone() {
                let z: f64 = StandardNormal.sample(&mut rng);
                out[j] = z * grid.dt(j).sqrt();
            }
            out
        })
        .collect())
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha > 1.0 && alpha <= 2.0 {
        Ok(())
    } else {
        invalid(format!(
            "stability index must lie in (1, 2] for a compensated driver, got {alpha}"
        ))
    }
}

/// One draw of the totally skewed stable law `S_alpha(1, 1, 0)` by the
/// Chambers-Mallows-Stuck transformation. Characteristic function
/// `exp(-|θ|^α (1 - i tan(πα/2) sign θ))`; mean zero for `α > 1`.
pub fn sample_stable_unit<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = PI * (rng.random::<f64>() - 0.5);
    let w: f64 = Exp1.sample(rng);
    if alpha == 2.0 {
        // tan(π) is not exactly zero in floating point; use the closed form.
        return 2.0 * v.sin() * w.sqrt();
    }
    let tan = (FRAC_PI_2 * alpha).tan();
    let b = tan.atan() / alpha;
    let s = (1.0 + tan * tan).powf(1.0 / (2.0 * alpha));
    let shifted = alpha * (v + b);
    s * shifted.sin() / v.cos().powf(1.0 / alpha)
        * ((v - shifted).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Stable increments with per-step scale `dt^(1/alpha)`.
pub fn gen_stable_increments(grid: &TimeGrid, alpha: f64, seed: StreamSeed) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    Ok(stable_window(grid, alpha, seed, 0..grid.steps()))
}

fn stable_window(
    grid: &TimeGrid,
    alpha: f64,
    seed: StreamSeed,
    window: std::ops::Range<usize>,
) -> Vec<f64> {
    let mut rng = seed.rng();
    let mut out = vec![0.0; grid.steps()];
    for j in window {
        out[j] = grid.dt(j).powf(1.0 / alpha) * sample_stable_unit(alpha, &mut rng);
    }
    out
}

/// Distribution of jump sizes attached to a finite-activity measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MarkSampler {
    PointMass { size: f64 },
    Exponential { mean: f64 },
    Uniform { low: f64, high: f64 },
}

impl MarkSampler {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            MarkSampler::PointMass { size } => size.is_finite() && size >= 0.0,
            MarkSampler::Exponential { mean } => mean.is_finite() && mean > 0.0,
            MarkSampler::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && 0.0 <= low && low < high
            }
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("invalid mark distribution {self:?}"))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarkSampler::PointMass { size } => size,
            MarkSampler::Exponential { mean } => {
                let e: f64 = Exp1.sample(rng);
                mean * e
            }
            MarkSampler::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }

    /// `E[f(size)]`, by quadrature against the density for continuous laws.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        match *self {
            MarkSampler::PointMass { size } => f(size),
            MarkSampler::Uniform { low, high } => {
                quad::gauss_legendre(|z| f(z), low, high, 64) / (high - low)
            }
            MarkSampler::Exponential { mean } => {
                quad::gauss_legendre(|z| f(z) * (-z / mean).exp() / mean, 0.0, 60.0 * mean, 256)
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarkSampler::PointMass { size } => size,
            MarkSampler::Exponential { mean } => mean,
            MarkSampler::Uniform { low, high } => 0.5 * (low + high),
        }
    }

    pub fn second_moment(&self) -> f64 {
        match *self {
            MarkSampler::PointMass { size } => size * size,
            MarkSampler::Exponential { mean } => 2.0 * mean * mean,
            MarkSampler::Uniform { low, high } => (low * low + low * high + high * high) / 3.0,
        }
    }
}

/// A finite Lévy measure `mass * law(sizes)`; with `thinning_bound = Some(V)`
/// the marks become pairs `(v, size)` with `v ~ Uniform(0, V)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteMeasure {
    pub mass: f64,
    pub sizes: MarkSampler,
    #[serde(default)]
    pub thinning_bound: Option<f64>,
}

impl FiniteMeasure {
    /// Intensity of candidate events per unit time.
    pub fn rate(&self) -> f64 {
        self.mass * self.thinning_bound.unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            return invalid(format!(
                "finite-activity measure needs finite non-negative mass, got {}",
                self.mass
            ));
        }
        if let Some(v) = self.thinning_bound {
            if !(v.is_finite() && v > 0.0) {
                return invalid(format!("thinning bound must be positive, got {v}"));
            }
        }
        self.sizes.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mark {
    Size(f64),
    Thinned { v: f64, size: f64 },
}

impl Mark {
    pub fn size(&self) -> f64 {
        match *self {
            Mark::Size(z) | Mark::Thinned { size: z, .. } => z,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: Mark,
    pub measure: usize,
}

/// Events on `(0, T]` of a Poisson random measure with the given intensity,
/// sorted by time.
pub fn gen_finite_activity_events(
    measure: &FiniteMeasure,
    measure_id: usize,
    grid: &TimeGrid,
    seed: StreamSeed,
) -> Result<Vec<JumpEvent>> {
    measure.validate()?;
    Ok(events_window(measure, measure_id, seed, 0.0, grid.horizon()))
}

fn events_window(
    measure: &FiniteMeasure,
    measure_id: usize,
    seed: StreamSeed,
    from: f64,
    to: f64,
) -> Vec<JumpEvent> {
    let mean = measure.rate() * (to - from);
    if mean <= 0.0 {
        return Vec::new();
    }
    let mut rng = seed.rng();
    let count = Poisson::new(mean)
        .expect("positive finite Poisson mean")
        .sample(&mut rng) as usize;
    let mut events: Vec<JumpEvent> = (0..count)
        .map(|_| {
            // Uniform on (from, to]: 1 - U lies in (0, 1].
            let time = from + (to - from) * (1.0 - rng.random::<f64>());
            let size = measure.sizes.sample(&mut rng);
            let mark = match measure.thinning_bound {
                Some(bound) => Mark::Thinned {
                    v: bound * rng.random::<f64>(),
                    size,
                },
                None => Mark::Size(size),
            };
            JumpEvent {
                time,
                mark,
                measure: measure_id,
            }
        })
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    events
}

/// Which random sources a system needs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseLayout {
    pub brownian_factors: usize,
    #[serde(default)]
    pub stable_alphas: Vec<f64>,
    #[serde(default)]
    pub finite_measures: Vec<FiniteMeasure>,
}

impl NoiseLayout {
    pub fn validate(&self) -> Result<()> {
        for &alpha in &self.stable_alphas {
            check_alpha(alpha)?;
        }
        for m in &self.finite_measures {
            m.validate()?;
        }
        Ok(())
    }
}

/// All driving randomness of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseBundle {
    pub grid: Arc<TimeGrid>,
    pub brownian: Vec<Vec<f64>>,
    pub stable: Vec<Vec<f64>>,
    pub layout: Arc<NoiseLayout>,
    pub events: Vec<Vec<JumpEvent>>,
    pub lineage: SeedLineage,
    /// Number of native steps merged into each step of `grid`.
    pub aggregation: usize,
}

impl NoiseBundle {
    pub fn generate(layout: &NoiseLayout, grid: Arc<TimeGrid>, lineage: SeedLineage) -> Result<Self> {
        let steps = grid.steps();
        Self::generate_window(layout, grid, lineage, 0..steps)
    }

    /// Randomness restricted to steps in `window`; increments outside it are
    /// zero and events fall in `(t_start, t_end]`.
    pub fn generate_window(
        layout: &NoiseLayout,
        grid: Arc<TimeGrid>,
        lineage: SeedLineage,
        window: std::ops::Range<usize>,
    ) -> Result<Self> {
        layout.validate()?;
        if window.start > window.end || window.end > grid.steps() {
            return invalid(format!("noise window {window:?} exceeds the grid"));
        }
        let brownian = if layout.brownian_factors == 0 {
            Vec::new()
        } else {
            gen_brownian_window(&grid, layout.brownian_factors, lineage, window.clone())?
        };
        let stable = layout
            .stable_alphas
            .iter()
            .enumerate()
            .map(|(f, &alpha)| stable_window(&grid, alpha, StreamSeed::stable(lineage, f), window.clone()))
            .collect();
        let (from, to) = (grid.time(window.start), grid.time(window.end));
        let events = layout
            .finite_measures
            .iter()
            .enumerate()
            .map(|(m, measure)| events_window(measure, m, StreamSeed::events(lineage, m), from, to))
            .collect();
        Ok(Self {
            grid,
            brownian,
            stable,
            layout: Arc::new(layout.clone()),
            events,
            lineage,
            aggregation: 1,
        })
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    /// Merge every `factor` consecutive steps. Sums of Brownian increments are
    /// Brownian increments and sums of stable increments are stable increments
    /// of the merged step, so the coarse bundle drives the same realisation.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        let grid = Arc::new(self.grid.coarsen(factor)?);
        let merge = |xs: &Vec<f64>| -> Vec<f64> {
            xs.chunks(factor).map(|c| c.iter().sum()).collect()
        };
        Ok(Self {
            grid,
            brownian: self.brownian.iter().map(merge).collect(),
            stable: self.stable.iter().map(merge).collect(),
            layout: Arc::clone(&self.layout),
            events: self.events.clone(),
            lineage: self.lineage,
            aggregation: self.aggregation * factor,
        })
    }

    /// Coarsen onto a uniform step `dt` when it is an integer multiple of this
    /// bundle's (uniform) step.
    pub fn coarsen_to_step(&self, dt: f64) -> Result<Self> {
        let native = self.grid.dt(0);
        let ratio = dt / native;
        let factor = ratio.round();
        if !(factor >= 1.0) || (ratio - factor).abs() > 1e-9 * factor {
            return Err(Error::IncompatibleGrid(format!(
                "step {dt} is not a multiple of the noise step {native}"
            )));
        }
        if factor == 1.0 {
            return Ok(self.clone());
        }
        self.coarsen(factor as usize)
    }

    /// Index range of events of `measure` with time in `(t_step, t_{step+1}]`.
    pub(crate) fn events_in_step(&self, measure: usize, step: usize, cursor: &mut usize) -> std::ops::Range<usize> {
        let events = &self.events[measure];
        let end_time = self.grid.time(step + 1);
        let start = *cursor;
        let mut end = start;
        while end < events.len() && events[end].time <= end_time {
            end += 1;
        }
        *cursor = end;
        start..end
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(steps: usize) -> TimeGrid {
        TimeGrid::uniform(1.0, steps).unwrap()
    }

    #[test]
    fn grid_rejects_bad_points() {
        assert!(TimeGrid::new(vec![0.0]).is_err());
        assert!(TimeGrid::new(vec![0.1, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 0.5, 0.5]).is_err());
        assert!(TimeGrid::uniform(1.0, 0).is_err());
        assert!(TimeGrid::uniform(-1.0, 4).is_err());
    }

    #[test]
    fn grid_locate_and_coarsen() {
        let g = grid(8);
        assert_eq!(g.locate(0.0), Some(0));
        assert_eq!(g.locate(0.3), Some(2));
        assert_eq!(g.locate(1.0), Some(8));
        assert_eq!(g.locate(1.5), None);
        let c = g.coarsen(4).unwrap();
        assert_eq!(c.points(), &[0.0, 0.5, 1.0]);
        assert!(g.refines(&c));
        assert!(g.coarsen(3).is_err());
        assert_eq!(g.mesh(), 0.125);
    }

    #[test]
    fn brownian_is_deterministic() {
        let g = grid(16);
        let a = gen_brownian(&g, 2, SeedLineage::new(7, 3)).unwrap();
        let b = gen_brownian(&g, 2, SeedLineage::new(7, 3)).unwrap();
        assert_eq!(a, b);
        let c = gen_brownian(&g, 2, SeedLineage::new(7, 4)).unwrap();
        assert_ne!(a, c);
        assert_ne!(a[0], a[1]);
        assert!(gen_brownian(&g, 0, SeedLineage::new(7, 3)).is_err());
    }

    #[test]
    fn stable_alpha_domain() {
        let g = grid(4);
        let seed = SeedLineage::new(1, 1).stream(0);
        assert!(gen_stable_increments(&g, 1.0, seed).is_err());
        assert!(gen_stable_increments(&g, 2.1, seed).is_err());
        assert!(gen_stable_increments(&g, f64::NAN, seed).is_err());
        assert!(gen_stable_increments(&g, 2.0, seed).is_ok());
        assert!(gen_stable_increments(&g, 1.01, seed).is_ok());
    }

    #[test]
    fn zero_rate_gives_no_events() {
        let m = FiniteMeasure {
            mass: 0.0,
            sizes: MarkSampler::PointMass { size: 1.0 },
            thinning_bound: None,
        };
        let ev = gen_finite_activity_events(&m, 0, &grid(4), SeedLineage::new(1, 1).stream(5)).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn bad_rates_rejected() {
        for mass in [f64::NAN, f64::INFINITY, -1.0] {
            let m = FiniteMeasure {
                mass,
                sizes: MarkSampler::PointMass { size: 1.0 },
                thinning_bound: None,
            };
            assert!(gen_finite_activity_events(&m, 0, &grid(4), SeedLineage::new(1, 1).stream(5)).is_err());
        }
    }

    #[test]
    fn events_sorted_and_in_horizon() {
        let m = FiniteMeasure {
            mass: 50.0,
            sizes: MarkSampler::Exponential { mean: 2.0 },
            thinning_bound: Some(3.0),
        };
        let seed = SeedLineage::new(9, 0).stream(77);
        let ev = gen_finite_activity_events(&m, 2, &grid(10), seed).unwrap();
        assert!(!ev.is_empty());
        assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
        for e in &ev {
            assert!(e.time > 0.0 && e.time <= 1.0);
            assert_eq!(e.measure, 2);
            match e.mark {
                Mark::Thinned { v, size } => assert!((0.0..3.0).contains(&v) && size >= 0.0),
                Mark::Size(_) => panic!("expected thinned marks"),
            }
        }
        assert_eq!(ev, gen_finite_activity_events(&m, 2, &grid(10), seed).unwrap());
    }

    #[test]
    fn coarsen_sums_increments() {
        let layout = NoiseLayout {
            brownian_factors: 1,
            stable_alphas: vec![1.5],
            finite_measures: vec![],
        };
        let b = NoiseBundle::generate(&layout, Arc::new(grid(8)), SeedLineage::new(3, 0)).unwrap();
        let c = b.coarsen(4).unwrap();
        assert_eq!(c.steps(), 2);
        assert_eq!(c.aggregation, 4);
        let s: f64 = b.brownian[0][..4].iter().sum();
        assert_eq!(c.brownian[0][0], s);
        let c2 = b.coarsen_to_step(0.5).unwrap();
        assert_eq!(c, c2);
        assert!(b.coarsen_to_step(0.3).is_err());
    }

    #[test]
    fn mark_expectations_match_closed_forms() {
        for s in [
            MarkSampler::PointMass { size: 1.5 },
            MarkSampler::Exponential { mean: 0.7 },
            MarkSampler::Uniform { low: 0.5, high: 2.0 },
        ] {
            assert!((s.expect(|z| z) - s.mean()).abs() < 1e-6, "{s:?}");
            assert!((s.expect(|z| z * z) - s.second_moment()).abs() < 1e-5, "{s:?}");
        }
    }
}
