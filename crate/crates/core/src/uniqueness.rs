//! Yamada-Watanabe test functions and an empirical pathwise-uniqueness
//! diagnostic based on refinement with shared noise.
//!
//! The bump `ψ_{m,k}` is built in the coordinate `F(x) = ∫_{a_k}^x dz/ρ²(z)`:
//! `ψ(x) = h(F(x)/k) / (k H ρ²(x))` with `H = ∫_0^1 h`. Then `∫ψ = 1` exactly
//! and `ψ ρ² <= 2/k` reduces to `max h <= 2H`, which holds for the bumps used.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::coeffs::{Divergence, Modulus, SystemSpec};
use crate::error::{invalid, Error, Result};
use crate::noise::{NoiseBundle, SeedLineage, TimeGrid};
use crate::quad;
use crate::solver::SchemeConfig;
use crate::system::{mean_and_se, run_ensemble, solve_system, with_path};

/// `∫_lo^hi dz / ρ²(z)` for `0 < lo <= hi`.
pub fn inverse_square_integral(rho: &Modulus, lo: f64, hi: f64) -> f64 {
    match *rho {
        Modulus::Power { coeff, exponent } => {
            let c2 = coeff * coeff;
            let e = 1.0 - 2.0 * exponent;
            if e == 0.0 {
                (hi / lo).ln() / c2
            } else {
                (hi.powf(e) - lo.powf(e)) / (c2 * e)
            }
        }
        _ => {
            let f = |u: f64| {
                let z = u.exp();
                let r = rho.eval(z);
                z / (r * r)
            };
            quad::adaptive_simpson(&f, lo.ln(), hi.ln(), 1e-13)
        }
    }
}

/// `a_0 = x_m` and `∫_{a_k}^{a_{k-1}} dz/ρ² = k` for `k = 1..=k_max`.
pub fn yw_sequence(rho: &Modulus, xm: f64, k_max: usize) -> Result<Vec<f64>> {
    rho.validate()?;
    if !(xm.is_finite() && xm > 0.0) {
        return invalid(format!("x_m must be positive, got {xm}"));
    }
    if matches!(rho, Modulus::Zero) {
        return invalid("a zero modulus has no test-function sequence");
    }
    if rho.diverges_inverse_square() == Divergence::Converges || rho.eval(0.0) > 0.0 {
        return invalid("∫ dz/ρ²(z) converges near 0; the construction needs divergence");
    }
    let mut seq = Vec::with_capacity(k_max + 1);
    seq.push(xm);
    for k in 1..=k_max {
        let prev = seq[k - 1];
        let kf = k as f64;
        let next = match *rho {
            Modulus::Power { coeff, exponent } => {
                let c2 = coeff * coeff;
                let e = 1.0 - 2.0 * exponent;
                if e == 0.0 {
                    prev * (-kf * c2).exp()
                } else {
                    (prev.powf(e) - kf * c2 * e).powf(1.0 / e)
                }
            }
            _ => numeric_step(rho, prev, kf)?,
        };
        if !(next > 0.0 && next < prev) {
            return Err(Error::Numerical(format!(
                "a_{k} underflows or fails to decrease (got {next:e})"
            )));
        }
        seq.push(next);
    }
    Ok(seq)
}

fn numeric_step(rho: &Modulus, prev: f64, k: f64) -> Result<f64> {
    let g = |ln_a: f64| inverse_square_integral(rho, ln_a.exp(), prev) - k;
    let hi = prev.ln();
    let mut lo = hi - std::f64::consts::LN_2;
    while g(lo) < 0.0 {
        lo -= 2.0 * (hi - lo).max(1.0);
        if lo < f64::MIN_POSITIVE.ln() {
            return Err(Error::Numerical(
                "∫ dz/ρ² stays below k down to the smallest float; the integral appears convergent".into(),
            ));
        }
    }
    quad::bisect(g, lo, hi, 200)
        .map(f64::exp)
        .ok_or_else(|| Error::Numerical("root bracketing failed".into()))
}

/// Smooth bump on `[0, 1]` with maximum 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bump {
    /// `exp(1 - 1/(1 - (2u-1)^2))`
    Standard,
    /// Equal to 1 on `[eps, 1 - eps]`, smooth transitions of width `eps`.
    Plateau { eps: f64 },
}

fn smooth_step(v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    if v >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / v).exp();
    let b = (-1.0 / (1.0 - v)).exp();
    a / (a + b)
}

impl Bump {
    pub fn eval(&self, u: f64) -> f64 {
        if u <= 0.0 || u >= 1.0 {
            return 0.0;
        }
        match *self {
            Bump::Standard => {
                let s = 2.0 * u - 1.0;
                (1.0 - 1.0 / (1.0 - s * s)).exp()
            }
            Bump::Plateau { eps } => smooth_step(u / eps) * smooth_step((1.0 - u) / eps),
        }
    }
}

const BUMP_NODES: usize = 8192;

/// Cumulative integral of a bump on a uniform grid of `[0, 1]`.
#[derive(Debug, Clone)]
struct BumpTable {
    bump: Bump,
    cumulative: Vec<f64>,
}

impl BumpTable {
    fn new(bump: Bump) -> Self {
        let h = 1.0 / BUMP_NODES as f64;
        let mut cumulative = Vec::with_capacity(BUMP_NODES + 1);
        cumulative.push(0.0);
        let mut prev = bump.eval(0.0);
        let mut acc = 0.0;
        for j in 1..=BUMP_NODES {
            let u0 = (j - 1) as f64 * h;
            let mid = bump.eval(u0 + 0.5 * h);
            let cur = bump.eval(j as f64 * h);
            acc += h * (prev + 4.0 * mid + cur) / 6.0;
            cumulative.push(acc);
            prev = cur;
        }
        Self { bump, cumulative }
    }

    fn total(&self) -> f64 {
        self.cumulative[BUMP_NODES]
    }

    /// `∫_0^u h / ∫_0^1 h`, nondecreasing in `u` and clamped to `[0, 1]`.
    fn normalized(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let pos = u * BUMP_NODES as f64;
        let j = (pos.floor() as usize).min(BUMP_NODES - 1);
        let w = pos - j as f64;
        let v = self.cumulative[j] + w * (self.cumulative[j + 1] - self.cumulative[j]);
        (v / self.total()).clamp(0.0, 1.0)
    }
}

fn bump_table(bump: Bump) -> &'static BumpTable {
    static TABLES: OnceLock<Vec<BumpTable>> = OnceLock::new();
    let tables = TABLES.get_or_init(|| BUMP_LADDER.iter().map(|&b| BumpTable::new(b)).collect());
    tables
        .iter()
        .find(|t| t.bump == bump)
        .expect("bump belongs to the retry ladder")
}

/// Bumps tried in order until the `ψ` bound verifies.
pub const BUMP_LADDER: [Bump; 4] = [
    Bump::Standard,
    Bump::Plateau { eps: 0.25 },
    Bump::Plateau { eps: 0.125 },
    Bump::Plateau { eps: 0.0625 },
];

/// The family `φ_{m,k}` attached to one modulus and threshold.
#[derive(Debug, Clone)]
pub struct TestFunctionFamily {
    pub rho: Modulus,
    pub xm: f64,
    pub a_seq: Vec<f64>,
}

impl TestFunctionFamily {
    pub fn new(rho: Modulus, xm: f64, k_max: usize) -> Result<Self> {
        let a_seq = yw_sequence(&rho, xm, k_max)?;
        Ok(Self { rho, xm, a_seq })
    }

    pub fn k_max(&self) -> usize {
        self.a_seq.len() - 1
    }

    pub fn phi(&self, k: usize) -> Result<Phi> {
        build_phi(self, k)
    }
}

const PHI_NODES: usize = 4096;
const BOUND_SAMPLES: usize = 1000;

/// `φ_{m,k}` with its first two derivatives.
#[derive(Debug, Clone)]
pub struct Phi {
    pub k: usize,
    pub bump: Bump,
    rho: Modulus,
    lo: f64,
    hi: f64,
    /// Log-spaced nodes on `[a_k, a_{k-1}]` with `F`, `φ'` and `φ` at each.
    nodes: Vec<f64>,
    f_vals: Vec<f64>,
    dphi: Vec<f64>,
    phi: Vec<f64>,
    /// `φ(x) = |x| - tail_offset` for `|x| >= a_{k-1}`.
    pub tail_offset: f64,
}

impl Phi {
    fn locate(&self, x: f64) -> usize {
        self.nodes.partition_point(|&n| n <= x).clamp(1, self.nodes.len() - 1) - 1
    }

    fn f_at(&self, x: f64, j: usize) -> f64 {
        match self.rho {
            Modulus::Power { .. } => inverse_square_integral(&self.rho, self.lo, x),
            _ => self.f_vals[j] + inverse_square_integral(&self.rho, self.nodes[j], x),
        }
    }

    fn bump(&self) -> &'static BumpTable {
        bump_table(self.bump)
    }

    /// `ψ(x) ρ²(x)` for `x` in the support.
    fn psi_rho2(&self, x: f64, j: usize) -> f64 {
        let t = self.bump();
        t.bump.eval(self.f_at(x, j) / self.k as f64) / (self.k as f64 * t.total())
    }

    /// `(φ(x), φ'(x), φ''(x))`.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let ax = x.abs();
        let sign = if x < 0.0 { -1.0 } else { 1.0 };
        if ax <= self.lo {
            return (0.0, 0.0, 0.0);
        }
        if ax >= self.hi {
            return (ax - self.tail_offset, sign, 0.0);
        }
        let j = self.locate(ax);
        let d = self.bump().normalized(self.f_at(ax, j) / self.k as f64);
        let v = self.phi[j] + 0.5 * (ax - self.nodes[j]) * (self.dphi[j] + d);
        let r = self.rho.eval(ax);
        let dd = self.psi_rho2(ax, j) / (r * r);
        (v.min(ax), sign * d, dd)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }
}

/// `φ_{m,k}(z) = ∫_0^{|z|} ∫_0^y ψ_{m,k}`, retrying flatter bumps if the
/// verified bound `ψ <= (2/k)/ρ²` fails.
pub fn build_phi(family: &TestFunctionFamily, k: usize) -> Result<Phi> {
    if k < 1 || k > family.k_max() {
        return invalid(format!("k must lie in 1..={}, got {k}", family.k_max()));
    }
    let lo = family.a_seq[k];
    let hi = family.a_seq[k - 1];
    let ratio = (hi / lo).ln();
    let nodes: Vec<f64> = (0..=PHI_NODES)
        .map(|j| {
            if j == PHI_NODES {
                hi
            } else {
                lo * (ratio * j as f64 / PHI_NODES as f64).exp()
            }
        })
        .collect();
    let mut f_vals = Vec::with_capacity(nodes.len());
    f_vals.push(0.0);
    for w in nodes.windows(2) {
        let last = f_vals[f_vals.len() - 1];
        f_vals.push(match family.rho {
            Modulus::Power { .. } => inverse_square_integral(&family.rho, lo, w[1]),
            _ => last + inverse_square_integral(&family.rho, w[0], w[1]),
        });
    }
    let kf = k as f64;
    for bump in BUMP_LADDER {
        let table = bump_table(bump);
        let dphi: Vec<f64> = f_vals.iter().map(|&f| table.normalized(f / kf)).collect();
        let mut phi = Vec::with_capacity(nodes.len());
        phi.push(0.0);
        for j in 1..nodes.len() {
            let step = 0.5 * (nodes[j] - nodes[j - 1]) * (dphi[j - 1] + dphi[j]);
            phi.push(phi[j - 1] + step);
        }
        let tail_offset = hi - phi[PHI_NODES];
        let candidate = Phi {
            k,
            bump,
            rho: family.rho.clone(),
            lo,
            hi,
            nodes: nodes.clone(),
            f_vals: f_vals.clone(),
            dphi,
            phi,
            tail_offset,
        };
        let bound_holds = (1..BOUND_SAMPLES).all(|s| {
            let x = lo * (ratio * s as f64 / BOUND_SAMPLES as f64).exp();
            candidate.psi_rho2(x, candidate.locate(x)) <= 2.0 / kf
        });
        if bound_holds {
            return Ok(candidate);
        }
    }
    Err(Error::Numerical(format!(
        "ψ bound (2/k)/ρ² fails for k = {k} with every bump in the retry ladder"
    )))
}

/// Divergence between the solution at one step size and the finest step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub dt: f64,
    /// `E[sup_t |Δ^i_t|]` per component, over the row's grid.
    pub sup_diff_mean: Vec<f64>,
    pub sup_diff_std_error: Vec<f64>,
    /// `E[max_i sup_t |Δ^i_t|]`
    pub max_sup_diff_mean: f64,
    pub max_sup_diff_std_error: f64,
}

/// `E[φ_{m,k}(Δ_t)]` and `E[|Δ_t|]` averaged over components, at the
/// coarsest ladder grid times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiCurve {
    pub dt: f64,
    pub k: usize,
    pub phi_mean: Vec<f64>,
    pub abs_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub label: String,
    pub ladder: Vec<f64>,
    pub reference_dt: f64,
    pub times: Vec<f64>,
    pub paths_requested: usize,
    pub paths_used: usize,
    /// Paths discarded because some solution exceeded the ceiling.
    pub exceedances: usize,
    pub ceiling: Option<f64>,
    pub rows: Vec<LadderRow>,
    pub phi_curves: Vec<PhiCurve>,
    /// `(k, a_k)` for the family used by the φ curves.
    pub a_table: Vec<(usize, f64)>,
    /// `L N` in `r̃(x) = r(x) + L N x`.
    pub gronwall_slope: f64,
    /// `E[φ(Δ)] <= E[|Δ|]` at every reported point.
    pub phi_dominated: bool,
}

/// Options for [`uniqueness_trial`].
#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub horizon: f64,
    /// Step sizes; all must be integer multiples of the smallest.
    pub ladder: Vec<f64>,
    pub template: SchemeConfig,
    pub seed: u64,
    pub paths: usize,
    pub ceiling: Option<f64>,
    pub family: Option<TestFunctionFamily>,
    pub ks: Vec<usize>,
}

/// Integer ratio `coarse / fine`, or an error when the grids are not nested.
pub fn nesting_factor(coarse: f64, fine: f64) -> Result<usize> {
    let r = coarse / fine;
    let n = r.round();
    if n < 1.0 || (r - n).abs() > 1e-9 * n {
        return Err(Error::IncompatibleGrid(format!(
            "step {coarse} is not an integer multiple of {fine}"
        )));
    }
    Ok(n as usize)
}

struct PathOutcome {
    exceeded: bool,
    /// `sup[row][i]`
    sup: Vec<Vec<f64>>,
    /// `diffs[row][t][i]` at the common times.
    diffs: Vec<Vec<Vec<f64>>>,
}

/// Solve the system at every ladder step on shared noise and compare each
/// solution with the finest one.
pub fn uniqueness_trial(spec: &SystemSpec, cfg: &TrialConfig) -> Result<UniquenessReport> {
    spec.validate()?;
    if cfg.ladder.is_empty() {
        return invalid("refinement ladder is empty");
    }
    if cfg.paths == 0 {
        return invalid("uniqueness trial needs at least one path");
    }
    let fine = cfg.ladder.iter().copied().fold(f64::INFINITY, f64::min);
    let coarse = cfg.ladder.iter().copied().fold(0.0, f64::max);
    let factors = cfg
        .ladder
        .iter()
        .map(|&dt| nesting_factor(dt, fine))
        .collect::<Result<Vec<_>>>()?;
    let steps = nesting_factor(cfg.horizon, fine)?;
    let coarse_factor = nesting_factor(coarse, fine)?;
    if factors.iter().any(|f| coarse_factor % f != 0) {
        return Err(Error::IncompatibleGrid("ladder steps are not nested".into()));
    }
    if steps % coarse_factor != 0 {
        return Err(Error::IncompatibleGrid("horizon is not a multiple of the coarsest step".into()));
    }
    let grid = Arc::new(TimeGrid::uniform(cfg.horizon, steps)?);
    let common: Vec<usize> = (0..=steps).step_by(coarse_factor).collect();
    let times: Vec<f64> = common.iter().map(|&j| grid.time(j)).collect();
    let mut phis = Vec::new();
    for &k in &cfg.ks {
        let family = cfg
            .family
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("φ curves need a test-function family".into()))?;
        phis.push(family.phi(k)?);
    }
    let n = spec.len();
    let outcomes = run_ensemble(cfg.paths, |p| {
        let noise = NoiseBundle::generate(&spec.layout, Arc::clone(&grid), SeedLineage::new(cfg.seed, p))?;
        let solve = |dt: f64| {
            let mut c = cfg.template;
            c.step_size = dt;
            solve_system(spec, &noise, &c).map_err(|e| with_path(e, p))
        };
        let reference = solve(fine)?;
        let mut exceeded = false;
        let mut sup = Vec::with_capacity(cfg.ladder.len());
        let mut diffs = Vec::with_capacity(cfg.ladder.len());
        for (&dt, &factor) in cfg.ladder.iter().zip(&factors) {
            let sol = if factor == 1 { reference.clone() } else { solve(dt)? };
            let mut s = vec![0.0f64; n];
            for i in 0..n {
                let v = sol.paths[i].values();
                let r = reference.paths[i].values();
                for (jc, &x) in v.iter().enumerate() {
                    s[i] = s[i].max((x - r[jc * factor]).abs());
                    if cfg.ceiling.is_some_and(|c| x > c || r[jc * factor] > c) {
                        exceeded = true;
                    }
                }
            }
            let d = common
                .iter()
                .map(|&j| {
                    (0..n)
                        .map(|i| sol.paths[i].values()[j / factor] - reference.paths[i].values()[j])
                        .collect()
                })
                .collect();
            sup.push(s);
            diffs.push(d);
        }
        Ok(PathOutcome { exceeded, sup, diffs })
    })?;
    let kept: Vec<&PathOutcome> = outcomes.iter().filter(|o| !o.exceeded).collect();
    let exceedances = outcomes.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::Numerical("every path exceeded the ceiling".into()));
    }
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    let mut phi_curves = Vec::new();
    let mut phi_dominated = true;
    for (r, &dt) in cfg.ladder.iter().enumerate() {
        let mut means = Vec::with_capacity(n);
        let mut ses = Vec::with_capacity(n);
        for i in 0..n {
            let xs: Vec<f64> = kept.iter().map(|o| o.sup[r][i]).collect();
            let (m, se) = mean_and_se(&xs);
            means.push(m);
            ses.push(se);
        }
        let maxes: Vec<f64> = kept
            .iter()
            .map(|o| o.sup[r].iter().copied().fold(0.0, f64::max))
            .collect();
        let (mm, mse) = mean_and_se(&maxes);
        rows.push(LadderRow {
            dt,
            sup_diff_mean: means,
            sup_diff_std_error: ses,
            max_sup_diff_mean: mm,
            max_sup_diff_std_error: mse,
        });
        let denom = (kept.len() * n) as f64;
        let abs_mean: Vec<f64> = (0..times.len())
            .map(|t| kept.iter().flat_map(|o| o.diffs[r][t].iter()).map(|d| d.abs()).sum::<f64>() / denom)
            .collect();
        for phi in &phis {
            let phi_mean: Vec<f64> = (0..times.len())
                .map(|t| kept.iter().flat_map(|o| o.diffs[r][t].iter()).map(|&d| phi.value(d)).sum::<f64>() / denom)
                .collect();
            phi_dominated &= phi_mean.iter().zip(&abs_mean).all(|(p, a)| p <= a);
            phi_curves.push(PhiCurve {
                dt,
                k: phi.k,
                phi_mean,
                abs_mean: abs_mean.clone(),
            });
        }
    }
    let (_, l) = spec.lipschitz_bounds(cfg.horizon);
    Ok(UniquenessReport {
        label: "diagnostic: refinement self-consistency with shared noise, not a proof".into(),
        ladder: cfg.ladder.clone(),
        reference_dt: fine,
        times,
        paths_requested: cfg.paths,
        paths_used: kept.len(),
        exceedances,
        ceiling: cfg.ceiling,
        rows,
        phi_curves,
        a_table: cfg
            .family
            .as_ref()
            .map(|f| f.a_seq.iter().copied().enumerate().collect())
            .unwrap_or_default(),
        gronwall_slope: l * n as f64,
        phi_dominated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_sequence_closed_form() {
        let a = yw_sequence(&Modulus::power(1.0, 0.5), 1.0, 3).unwrap();
        assert!((a[1] - (-1f64).exp()).abs() < 1e-15);
        assert!((a[2] - (-3f64).exp()).abs() < 1e-15);
        assert!((a[3] - (-6f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn linear_sequence_closed_form() {
        let a = yw_sequence(&Modulus::power(1.0, 1.0), 1.0, 4).unwrap();
        let mut inv = 1.0;
        for (k, ak) in a.iter().enumerate().skip(1) {
            inv += k as f64;
            assert!((1.0 / ak - inv).abs() < 1e-9 * inv);
        }
    }

    #[test]
    fn convergent_moduli_rejected() {
        assert!(yw_sequence(&Modulus::power(1.0, 0.4), 1.0, 3).is_err());
        let shifted = Modulus::Piecewise {
            knots: vec![[0.0, 0.1], [1.0, 1.0]],
        };
        assert!(yw_sequence(&shifted, 1.0, 3).is_err());
        assert!(yw_sequence(&Modulus::Zero, 1.0, 3).is_err());
    }

    #[test]
    fn piecewise_sequence_round_trips() {
        let rho = Modulus::Piecewise {
            knots: vec![[0.0, 0.0], [0.5, 0.5], [2.0, 1.0]],
        };
        let a = yw_sequence(&rho, 1.0, 4).unwrap();
        for k in 1..=4 {
            let i = inverse_square_integral(&rho, a[k], a[k - 1]);
            assert!((i - k as f64).abs() < 1e-6 * k as f64, "{k}: {i}");
        }
    }

    #[test]
    fn plateau_bumps_satisfy_the_mass_ratio() {
        for b in BUMP_LADDER {
            let t = bump_table(b);
            assert!(t.total() >= 0.5, "{b:?}");
            assert!((t.normalized(1.0) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn phi_basic_shape() {
        let fam = TestFunctionFamily::new(Modulus::power(1.0, 0.5), 1.0, 5).unwrap();
        let phi = fam.phi(2).unwrap();
        assert_eq!(phi.eval(0.0), (0.0, 0.0, 0.0));
        let (v, d, dd) = phi.eval(2.0);
        assert_eq!(d, 1.0);
        assert_eq!(dd, 0.0);
        assert!(v <= 2.0 && v >= 2.0 - fam.a_seq[1]);
        assert_eq!(phi.eval(-0.5).0, phi.eval(0.5).0);
        assert!(fam.phi(0).is_err() && fam.phi(6).is_err());
    }
}
