//! Monotone approximation hierarchy: dyadic partitions, interval-infimum
//! drifts, the level recursion with a configurable realisation of the
//! conditional expectation of the infimum drift, ordering checks and the
//! exponential moment bound.
//!
//! Level 1 solves every component with zero drift forcing. Level `n + 1`
//! solves every component on each interval of partition `n` with the forcing
//! derived from `b^{i,n}_k`, chaining the initial value at partition points.
//! All levels share one noise bundle.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::SystemSpec;
use crate::error::{invalid, Error, Result};
use crate::noise::{NoiseBundle, TimeGrid};
use crate::paths::{CadlagPath, RecordedJump};
use crate::solver::{align_noise, Forcing, OrderingReport, SchemeConfig, Stepper};

/// How `E[b^{i,n}_k | F_s]` is realised along a path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftMode {
    /// The realised interval infimum, constant on each interval.
    Realized,
    /// Average of the interval infimum over `inner` fresh continuations of
    /// the previous level branched at each grid time.
    NestedMc { inner: usize },
    /// Exact interval infimum of a drift that depends on time only.
    Deterministic,
}

impl DriftMode {
    pub fn name(&self) -> &'static str {
        match self {
            DriftMode::Realized => "realized",
            DriftMode::NestedMc { .. } => "nested-mc",
            DriftMode::Deterministic => "deterministic",
        }
    }

    /// The explicit choice, or `deterministic` for time-only drifts and
    /// `realized` otherwise.
    pub fn resolve(requested: Option<DriftMode>, spec: &SystemSpec) -> DriftMode {
        requested.unwrap_or(if spec.all_time_only() {
            DriftMode::Deterministic
        } else {
            DriftMode::Realized
        })
    }
}

/// `t^1 = {0, T}`, `t^{n+1}_{2j} = t^n_j`, `t^{n+1}_{2j+1} = (t^n_j + t^n_{j+1}) / 2`.
pub fn dyadic_partition(n: usize, horizon: f64) -> Result<TimeGrid> {
    if n < 1 {
        return invalid("partition level must be >= 1");
    }
    let mut points = vec![0.0, horizon];
    for _ in 1..n {
        let mut next = Vec::with_capacity(2 * points.len() - 1);
        for w in points.windows(2) {
            next.push(w[0]);
            next.push((w[0] + w[1]) / 2.0);
        }
        next.push(horizon);
        points = next;
    }
    TimeGrid::new(points)
}

/// Grid indices of the level-`n` partition points on a uniform grid.
pub fn partition_indices(n: usize, steps: usize) -> Result<Vec<usize>> {
    if n < 1 {
        return invalid("partition level must be >= 1");
    }
    let intervals = 1usize << (n - 1);
    if steps % intervals != 0 {
        return Err(Error::IncompatibleGrid(format!(
            "{steps} grid steps cannot host the level-{n} partition of {intervals} intervals"
        )));
    }
    let stride = steps / intervals;
    Ok((0..=intervals).map(|k| k * stride).collect())
}

/// `b^{i,n}_k = min_{s in [t_k, t_{k+1}] ∩ grid} b_i(s, λ^1_s, ..., λ^N_s)`.
pub fn infimum_drift(paths: &[CadlagPath], spec: &SystemSpec, partition: &[usize]) -> Vec<Vec<f64>> {
    let grid = paths[0].grid();
    let n = spec.len();
    let mut out = vec![Vec::with_capacity(partition.len() - 1); n];
    let mut state = vec![0.0; n];
    for w in partition.windows(2) {
        let mut inf = vec![f64::INFINITY; n];
        for j in w[0]..=w[1] {
            for (x, p) in state.iter_mut().zip(paths) {
                *x = p.values()[j];
            }
            let t = grid.time(j);
            for (i, c) in spec.components.iter().enumerate() {
                inf[i] = inf[i].min(c.drift.eval(t, &state));
            }
        }
        for (o, v) in out.iter_mut().zip(inf) {
            o.push(v);
        }
    }
    out
}

/// Infimum drifts computed from a partition given by times rather than
/// grid indices; every partition point must be a grid point.
pub fn infimum_drift_on(paths: &[CadlagPath], spec: &SystemSpec, partition: &TimeGrid) -> Result<Vec<Vec<f64>>> {
    let grid = paths
        .first()
        .ok_or_else(|| Error::InvalidInput("no level paths".into()))?
        .grid();
    let idx = partition
        .points()
        .iter()
        .map(|&t| {
            grid.index_of(t)
                .ok_or_else(|| Error::IncompatibleGrid(format!("partition point {t} is not a grid point")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(infimum_drift(paths, spec, &idx))
}

/// Exact interval infima of time-only drifts.
fn deterministic_infima(spec: &SystemSpec, grid: &TimeGrid, partition: &[usize]) -> Result<Vec<Vec<f64>>> {
    spec.components
        .iter()
        .map(|c| {
            partition
                .windows(2)
                .map(|w| {
                    c.drift
                        .time_infimum(grid.time(w[0]), grid.time(w[1]))
                        .ok_or_else(|| Error::InvalidInput("deterministic mode needs drifts that depend on time only".into()))
                })
                .collect()
        })
        .collect()
}

/// One level of the hierarchy.
#[derive(Debug, Clone)]
pub struct ApproxLevel {
    pub n: usize,
    pub partition: TimeGrid,
    /// Grid indices of the partition points.
    pub partition_steps: Vec<usize>,
    /// `b^{i,n}_k`, per component and interval of this level's partition.
    pub infimum_drifts: Vec<Vec<f64>>,
    /// Per-step drift forcing that produced this level's paths.
    pub forcing: Vec<Vec<f64>>,
    pub paths: Vec<CadlagPath>,
}

/// Solve every component with per-step forcing, interval by interval over
/// `chain` (grid indices), chaining the value at each chain point.
fn solve_chained(
    spec: &SystemSpec,
    noise: &NoiseBundle,
    cfg: &SchemeConfig,
    forcing: &[Vec<f64>],
    chain: &[usize],
) -> Result<Vec<CadlagPath>> {
    spec.components
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let mut values = Vec::with_capacity(noise.steps() + 1);
            values.push(c.initial);
            let mut jumps: Vec<RecordedJump> = Vec::new();
            let mut y = c.initial;
            for w in chain.windows(2) {
                let mut stepper = Stepper::new(&c.coeffs, noise, *cfg, w[0], i);
                let f = Forcing::PerStep(&forcing[i]);
                y = crate::solver::integrate_range(&mut stepper, w[0]..w[1], y, &f, &mut values, &mut jumps)?;
            }
            CadlagPath::new(Arc::clone(&noise.grid), values, jumps)
        })
        .collect()
}

/// Per-step forcing that is constant on each partition interval.
fn piecewise_forcing(values: &[Vec<f64>], partition: &[usize], steps: usize) -> Vec<Vec<f64>> {
    values
        .iter()
        .map(|per_interval| {
            let mut f = Vec::with_capacity(steps);
            for (k, w) in partition.windows(2).enumerate() {
                f.extend(std::iter::repeat_n(per_interval[k], w[1] - w[0]));
            }
            f
        })
        .collect()
}

fn level_infima(
    spec: &SystemSpec,
    paths: &[CadlagPath],
    partition: &[usize],
    mode: DriftMode,
) -> Result<Vec<Vec<f64>>> {
    match mode {
        DriftMode::Deterministic => deterministic_infima(spec, paths[0].grid(), partition),
        _ => Ok(infimum_drift(paths, spec, partition)),
    }
}

/// Level 1: zero drift forcing.
pub fn initial_level(spec: &SystemSpec, noise: &NoiseBundle, cfg: &SchemeConfig, mode: DriftMode) -> Result<ApproxLevel> {
    let steps = noise.steps();
    let partition_steps = partition_indices(1, steps)?;
    let forcing = vec![vec![0.0; steps]; spec.len()];
    let paths = solve_chained(spec, noise, cfg, &forcing, &partition_steps)?;
    Ok(ApproxLevel {
        n: 1,
        partition: dyadic_partition(1, noise.grid.horizon())?,
        infimum_drifts: level_infima(spec, &paths, &partition_steps, mode)?,
        partition_steps,
        forcing,
        paths,
    })
}

/// Interval infimum of `b_i` along one continuation of level `prev` from
/// grid index `s` to `end`, combined with the realised minimum on `[start, s]`.
#[allow(clippy::too_many_arguments)]
fn continuation_infima(
    spec: &SystemSpec,
    prev: &ApproxLevel,
    noise: &NoiseBundle,
    cfg: &SchemeConfig,
    s: usize,
    end: usize,
    realized_min: &[f64],
    branch: u64,
) -> Result<Vec<f64>> {
    let n = spec.len();
    let inner = NoiseBundle::generate_window(
        &noise.layout,
        Arc::clone(&noise.grid),
        noise.lineage.with_branch(branch),
        s..end,
    )?;
    let mut steppers: Vec<Stepper<'_>> = spec
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| Stepper::new(&c.coeffs, &inner, *cfg, s, i))
        .collect();
    let mut state: Vec<f64> = prev.paths.iter().map(|p| p.values()[s]).collect();
    let held: Vec<f64> = prev.forcing.iter().map(|f| f[s.min(f.len() - 1)]).collect();
    let mut inf = realized_min.to_vec();
    let mut scratch = Vec::new();
    for j in s..end {
        for i in 0..n {
            state[i] = steppers[i].step(j, state[i], held[i], &mut scratch)?;
        }
        scratch.clear();
        let t = noise.grid.time(j + 1);
        for (i, c) in spec.components.iter().enumerate() {
            inf[i] = inf[i].min(c.drift.eval(t, &state));
        }
    }
    Ok(inf)
}

/// Branch id of an inner continuation: unique per (level, step, sample).
fn branch_id(level: usize, step: usize, sample: usize) -> u64 {
    1 + ((level as u64) << 48) + ((step as u64) << 16) + sample as u64
}

/// Per-step forcing `E[b^{i,n}_k | F_s]` estimated by nested simulation.
fn nested_forcing(
    spec: &SystemSpec,
    prev: &ApproxLevel,
    noise: &NoiseBundle,
    cfg: &SchemeConfig,
    inner: usize,
) -> Result<Vec<Vec<f64>>> {
    let n = spec.len();
    let steps = noise.steps();
    let mut forcing = vec![vec![0.0; steps]; n];
    for w in prev.partition_steps.windows(2) {
        let (start, end) = (w[0], w[1]);
        let mut realized = vec![f64::INFINITY; n];
        let mut state = vec![0.0; n];
        for s in start..end {
            for (x, p) in state.iter_mut().zip(&prev.paths) {
                *x = p.values()[s];
            }
            let t = noise.grid.time(s);
            for (i, c) in spec.components.iter().enumerate() {
                realized[i] = realized[i].min(c.drift.eval(t, &state));
            }
            let samples: Vec<Vec<f64>> = (0..inner)
                .into_par_iter()
                .map(|m| continuation_infima(spec, prev, noise, cfg, s, end, &realized, branch_id(prev.n, s, m)))
                .collect::<Result<_>>()?;
            for i in 0..n {
                forcing[i][s] = samples.iter().map(|v| v[i]).sum::<f64>() / inner as f64;
            }
        }
    }
    Ok(forcing)
}

/// Level `n + 1` from level `n` on the same noise.
pub fn build_next_level(
    spec: &SystemSpec,
    prev: &ApproxLevel,
    noise: &NoiseBundle,
    cfg: &SchemeConfig,
    mode: DriftMode,
) -> Result<ApproxLevel> {
    let steps = noise.steps();
    if prev.paths.len() != spec.len() || prev.paths[0].values().len() != steps + 1 {
        return Err(Error::IncompatibleGrid("previous level does not match the noise grid".into()));
    }
    let forcing = match mode {
        DriftMode::Realized | DriftMode::Deterministic => {
            piecewise_forcing(&prev.infimum_drifts, &prev.partition_steps, steps)
        }
        DriftMode::NestedMc { inner } => {
            if inner < 1 {
                return invalid("nested-mc needs at least one inner continuation");
            }
            nested_forcing(spec, prev, noise, cfg, inner)?
        }
    };
    let paths = solve_chained(spec, noise, cfg, &forcing, &prev.partition_steps)?;
    let n = prev.n + 1;
    let partition_steps = partition_indices(n, steps)?;
    Ok(ApproxLevel {
        n,
        partition: dyadic_partition(n, noise.grid.horizon())?,
        infimum_drifts: level_infima(spec, &paths, &partition_steps, mode)?,
        partition_steps,
        forcing,
        paths,
    })
}

/// Levels `1..=n_max` on one noise bundle.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub mode: DriftMode,
    pub levels: Vec<ApproxLevel>,
}

impl Hierarchy {
    /// The limit estimate: the highest computed level.
    pub fn limit(&self) -> &[CadlagPath] {
        &self.levels[self.levels.len() - 1].paths
    }

    /// `sup_t |λ^{i,n+1}_t - λ^{i,n}_t|` per consecutive pair and component.
    pub fn level_gaps(&self) -> Vec<Vec<f64>> {
        self.levels
            .windows(2)
            .map(|w| {
                w[0].paths
                    .iter()
                    .zip(&w[1].paths)
                    .map(|(a, b)| sup_abs_diff(a.values(), b.values()))
                    .collect()
            })
            .collect()
    }

    /// `sup_t (λ^{i,n_max}_t - λ^{i,n}_t)` per level and component.
    pub fn cauchy_gaps(&self) -> Vec<Vec<f64>> {
        let top = self.limit();
        self.levels
            .iter()
            .map(|l| {
                l.paths
                    .iter()
                    .zip(top)
                    .map(|(a, b)| {
                        a.values()
                            .iter()
                            .zip(b.values())
                            .map(|(x, y)| y - x)
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect()
            })
            .collect()
    }
}

pub fn sup_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Build levels `1..=n_max` sharing the (aligned) noise bundle.
pub fn run_hierarchy(
    spec: &SystemSpec,
    noise: &NoiseBundle,
    cfg: &SchemeConfig,
    n_max: usize,
    mode: DriftMode,
) -> Result<Hierarchy> {
    if n_max < 2 {
        return invalid("a hierarchy needs n_max >= 2");
    }
    spec.validate()?;
    if *noise.layout != spec.layout {
        return invalid("noise bundle was generated for a different layout");
    }
    if mode == DriftMode::Deterministic && !spec.all_time_only() {
        return invalid("deterministic mode needs drifts that depend on time only");
    }
    let noise = align_noise(noise, cfg)?;
    partition_indices(n_max, noise.steps())?;
    let mut levels = vec![initial_level(spec, &noise, cfg, mode)?];
    for _ in 1..n_max {
        let next = build_next_level(spec, &levels[levels.len() - 1], &noise, cfg, mode)?;
        levels.push(next);
    }
    Ok(Hierarchy { mode, levels })
}

/// Ordering of one consecutive pair of levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelOrdering {
    /// Lower level `n` of the pair `(n, n + 1)`.
    pub n: usize,
    /// Per component: violation `(λ^{i,n} - λ^{i,n+1})⁺` statistics on the grid.
    pub components: Vec<OrderingReport>,
}

impl LevelOrdering {
    pub fn max_violation(&self) -> f64 {
        self.components.iter().map(|c| c.max_violation).fold(0.0, f64::max)
    }
}

pub fn check_monotone(levels: &[ApproxLevel]) -> Result<Vec<LevelOrdering>> {
    if levels.len() < 2 {
        return invalid("ordering needs at least two levels");
    }
    levels
        .windows(2)
        .map(|w| {
            let components = w[0]
                .paths
                .iter()
                .zip(&w[1].paths)
                .map(|(lo, hi)| OrderingReport::between(lo.values(), hi.values(), 0.0))
                .collect::<Result<_>>()?;
            Ok(LevelOrdering { n: w[0].n, components })
        })
        .collect()
}

/// Outcome of the subset-infimum inequalities `b^{i,n+1}_{2k}, b^{i,n+1}_{2k+1} >= b^{i,n}_k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubsetInfimumReport {
    /// Inequalities evaluated on intervals where the level paths are ordered.
    pub checked: usize,
    pub violations: usize,
    /// Intervals skipped because the level paths were not ordered there.
    pub skipped_unordered: usize,
}

impl SubsetInfimumReport {
    pub fn merge(&mut self, other: &SubsetInfimumReport) {
        self.checked += other.checked;
        self.violations += other.violations;
        self.skipped_unordered += other.skipped_unordered;
    }
}

pub fn check_subset_infimum(levels: &[ApproxLevel]) -> SubsetInfimumReport {
    let mut r = SubsetInfimumReport::default();
    for w in levels.windows(2) {
        let (lo, hi) = (&w[0], &w[1]);
        for (k, iv) in lo.partition_steps.windows(2).enumerate() {
            let ordered = lo.paths.iter().zip(&hi.paths).all(|(a, b)| {
                (iv[0]..=iv[1]).all(|j| b.values()[j] >= a.values()[j])
            });
            if !ordered {
                r.skipped_unordered += 1;
                continue;
            }
            for i in 0..lo.infimum_drifts.len() {
                for child in [2 * k, 2 * k + 1] {
                    r.checked += 1;
                    if hi.infimum_drifts[i][child] < lo.infimum_drifts[i][k] {
                        r.violations += 1;
                    }
                }
            }
        }
    }
    r
}

/// Concatenating the per-interval solves of a level reproduces a single
/// pass over `[0, T]` with the same piecewise forcing, bit for bit.
pub fn reconstruction_matches(spec: &SystemSpec, level: &ApproxLevel, prev_partition: &[usize], noise: &NoiseBundle, cfg: &SchemeConfig) -> Result<bool> {
    let noise = align_noise(noise, cfg)?;
    let single = solve_chained(spec, &noise, cfg, &level.forcing, &[0, noise.steps()])?;
    let chained = solve_chained(spec, &noise, cfg, &level.forcing, prev_partition)?;
    Ok(single == chained && chained == level.paths)
}

/// Per-level mean curves of an ensemble of hierarchies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMoments {
    pub n: usize,
    /// `mean[i][t]` over paths at every grid time.
    pub mean: Vec<Vec<f64>>,
    pub std_error: Vec<Vec<f64>>,
}

/// Running sums for ensemble level means, merged in a fixed order.
#[derive(Debug, Clone)]
pub struct LevelAccumulator {
    pub count: usize,
    /// `[level][component][time]`
    sum: Vec<Vec<Vec<f64>>>,
    sum_sq: Vec<Vec<Vec<f64>>>,
}

impl LevelAccumulator {
    pub fn new(levels: usize, components: usize, points: usize) -> Self {
        Self {
            count: 0,
            sum: vec![vec![vec![0.0; points]; components]; levels],
            sum_sq: vec![vec![vec![0.0; points]; components]; levels],
        }
    }

    pub fn add(&mut self, h: &Hierarchy) {
        self.count += 1;
        for (l, level) in h.levels.iter().enumerate() {
            for (i, p) in level.paths.iter().enumerate() {
                for (t, &v) in p.values().iter().enumerate() {
                    self.sum[l][i][t] += v;
                    self.sum_sq[l][i][t] += v * v;
                }
            }
        }
    }

    pub fn moments(&self) -> Vec<LevelMoments> {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .enumerate()
            .map(|(l, (s, q))| {
                let mean: Vec<Vec<f64>> = s.iter().map(|c| c.iter().map(|x| x / n).collect()).collect();
                let std_error = q
                    .iter()
                    .zip(&mean)
                    .map(|(cq, cm)| {
                        cq.iter()
                            .zip(cm)
                            .map(|(sq, m)| {
                                if self.count < 2 {
                                    0.0
                                } else {
                                    let var = ((sq - n * m * m) / (n - 1.0)).max(0.0);
                                    (var / n).sqrt()
                                }
                            })
                            .collect()
                    })
                    .collect();
                LevelMoments {
                    n: l + 1,
                    mean,
                    std_error,
                }
            })
            .collect()
    }
}

/// Constants of the exponential moment bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `ā = max_i a_i`
    pub a_bar: f64,
    pub b: f64,
    pub l: f64,
    /// Linear-growth constant of `x ↦ ∫|g1| μ1`.
    pub k: f64,
    /// Where `k` came from (declared by the user or derived from a preset).
    pub k_provenance: String,
    pub components: usize,
}

impl BoundConstants {
    pub fn from_spec(spec: &SystemSpec, horizon: f64) -> Self {
        let (b, l) = spec.lipschitz_bounds(horizon);
        let derived: f64 = spec
            .components
            .iter()
            .map(|c| c.coeffs.derived_growth_k(&spec.layout))
            .fold(0.0, f64::max);
        let declared = spec.growth_k();
        let (k, k_provenance) = if declared > 0.0 {
            (declared, "declared growth_k of the coefficient set".to_string())
        } else {
            (derived, "derived as Σ mass·E[ζ] over the g1 terms (0 when g1 ≡ 0)".to_string())
        };
        Self {
            a_bar: spec.max_mean_reversion(),
            b,
            l,
            k,
            k_provenance,
            components: spec.len(),
        }
    }

    pub fn b_prime(&self) -> f64 {
        self.a_bar * self.b + self.k
    }

    pub fn l_prime(&self) -> f64 {
        self.a_bar * self.l * self.components as f64 + self.k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelBound {
    pub n: usize,
    /// `max_t (sup_i mean - 3 se) / (M e^{L' t})`; at most 1 when the bound holds.
    pub max_ratio: f64,
    pub worst_time: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBoundReport {
    pub constants: BoundConstants,
    pub b_prime: f64,
    pub l_prime: f64,
    pub m: f64,
    pub margin: f64,
    /// Curve `M e^{L' t}` on the grid.
    pub envelope: Vec<f64>,
    pub levels: Vec<LevelBound>,
    pub holds: bool,
}

/// Check `sup_i E[λ^{i,n}_t] <= M e^{L' t}` for every level and grid time,
/// allowing three standard errors.
///
/// `M = max(sup_i λ^i_0, sup_{t,i} E[λ^{i,1}_t], sup_i λ^i_0 + B'T) + margin`.
pub fn moment_bound_check(
    levels: &[LevelMoments],
    grid: &TimeGrid,
    initial: &[f64],
    constants: &BoundConstants,
    margin: f64,
) -> Result<MomentBoundReport> {
    if levels.is_empty() {
        return invalid("moment bound needs at least one level");
    }
    let horizon = grid.horizon();
    let sup0 = initial.iter().copied().fold(0.0, f64::max);
    let level1 = levels[0]
        .mean
        .iter()
        .flat_map(|c| c.iter().copied())
        .fold(0.0, f64::max);
    let b_prime = constants.b_prime();
    let l_prime = constants.l_prime();
    let m = sup0.max(level1).max(sup0 + b_prime * horizon) + margin;
    let envelope: Vec<f64> = grid.points().iter().map(|&t| m * (l_prime * t).exp()).collect();
    let mut out = Vec::new();
    for lm in levels {
        let mut max_ratio = f64::NEG_INFINITY;
        let mut worst_time = 0.0;
        for (t, env) in envelope.iter().enumerate() {
            let lower = (0..lm.mean.len())
                .map(|i| lm.mean[i][t] - 3.0 * lm.std_error[i][t])
                .fold(f64::NEG_INFINITY, f64::max);
            let ratio = lower / env;
            if ratio > max_ratio {
                max_ratio = ratio;
                worst_time = grid.time(t);
            }
        }
        out.push(LevelBound {
            n: lm.n,
            max_ratio,
            worst_time,
            holds: max_ratio <= 1.0,
        });
    }
    let holds = out.iter().all(|l| l.holds);
    Ok(MomentBoundReport {
        constants: constants.clone(),
        b_prime,
        l_prime,
        m,
        margin,
        envelope,
        levels: out,
        holds,
    })
}
