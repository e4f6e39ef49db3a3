//! Sampled checks of the regularity and monotonicity assumptions.
//!
//! A check can only falsify: `Pass` means no sampled point violated the
//! condition. Divergence integrals are decided from the symbolic form of
//! power-law moduli and reported `Unchecked` otherwise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    pos, stable_levy_constant, CoefficientSet, CompensatedJump, DriftSpec, Divergence, Modulus,
    RawJump, SystemSpec,
};
use crate::error::{invalid, Result};
use crate::noise::{FiniteMeasure, Mark, NoiseLayout};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Unchecked,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub condition: String,
    pub status: Status,
    pub detail: String,
    /// Sample point exhibiting a failure, e.g. the pair `(x, y)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Vec<f64>>,
}

impl Check {
    fn new(condition: &str, status: Status, detail: impl Into<String>) -> Self {
        Self {
            condition: condition.to_string(),
            status,
            detail: detail.into(),
            witness: None,
        }
    }

    fn with_witness(mut self, w: Vec<f64>) -> Self {
        self.witness = Some(w);
        self
    }

    fn pass(condition: &str, detail: impl Into<String>) -> Self {
        Self::new(condition, Status::Pass, detail)
    }

    fn fail(condition: &str, detail: impl Into<String>, witness: Vec<f64>) -> Self {
        Self::new(condition, Status::Fail, detail).with_witness(witness)
    }

    fn from_divergence(condition: &str, d: Divergence) -> Self {
        match d {
            Divergence::Diverges => Self::pass(condition, "diverges (power-law exponent)"),
            Divergence::Converges => Self::new(condition, Status::Fail, "integral converges (power-law exponent)"),
            Divergence::Unknown => Self::new(condition, Status::Unchecked, "no symbolic form for this modulus"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub subject: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn find(&self, condition: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.condition == condition)
    }
}

/// Sample budget and range of the sampled checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub samples: usize,
    /// States are drawn from `[0, range]` (and `[-range, 0]` for sign checks).
    pub range: f64,
    pub seed: u64,
    /// Truncation levels `m` at which the level moduli are checked.
    pub levels: Vec<f64>,
    /// Relative slack for comparisons against analytic bounds.
    pub rel_tol: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            samples: 10_000,
            range: 10.0,
            seed: 0x5eed,
            levels: vec![1.0, 2.0, 4.0, 8.0],
            rel_tol: 1e-9,
        }
    }
}

impl Sampling {
    fn check(&self) -> Result<()> {
        if self.samples == 0 {
            return invalid("sample budget must be at least 1");
        }
        if !(self.range.is_finite() && self.range > 0.0) {
            return invalid("sample range must be positive");
        }
        Ok(())
    }

    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }

    /// `a <= b` up to the relative slack.
    fn le(&self, a: f64, b: f64) -> bool {
        a <= b + self.rel_tol * (1.0 + b.abs())
    }

    /// Pairs in `[0, hi]^2`: half independent, half close together on a
    /// logarithmic scale of separations.
    fn pairs(&self, rng: &mut ChaCha8Rng, hi: f64) -> Vec<(f64, f64)> {
        (0..self.samples)
            .map(|k| {
                let x = hi * rng.random::<f64>();
                let y = if k % 2 == 0 {
                    hi * rng.random::<f64>()
                } else {
                    let d = hi * 10f64.powf(-9.0 * rng.random::<f64>());
                    (x + d).min(hi)
                };
                (x, y)
            })
            .collect()
    }
}

/// A representative mark of a `g0` term.
fn sample_g0_mark(term: &CompensatedJump, layout: &NoiseLayout, rng: &mut ChaCha8Rng) -> Mark {
    match *term {
        CompensatedJump::Stable { .. } => Mark::Size(10f64.powf(6.0 * rng.random::<f64>() - 3.0)),
        CompensatedJump::Thinned { measure } => {
            let m = &layout.finite_measures[measure];
            Mark::Thinned {
                v: m.thinning_bound.unwrap_or(1.0) * rng.random::<f64>(),
                size: m.sizes.sample(rng),
            }
        }
    }
}

/// `∫ |g0(x,u) ∧ t - g0(y,u) ∧ t|^2 μ0(du)` in closed form.
fn g0_truncated_l2(term: &CompensatedJump, layout: &NoiseLayout, x: f64, y: f64, t: f64) -> f64 {
    match *term {
        CompensatedJump::Stable { factor, coeff } => {
            let alpha = layout.stable_alphas[factor];
            let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
            let p = coeff * pos(hi).powf(1.0 / alpha);
            let q = coeff * pos(lo).powf(1.0 / alpha);
            stable_truncated_l2(alpha, p, q, t)
        }
        CompensatedJump::Thinned { measure } => {
            let m = &layout.finite_measures[measure];
            let v = m.thinning_bound.unwrap_or(f64::INFINITY);
            let width = (pos(x).min(v) - pos(y).min(v)).abs();
            m.mass * width * m.sizes.expect(|z| z.min(t).powi(2))
        }
    }
}

/// `∫_0^∞ (pu ∧ t - qu ∧ t)^2 κ u^{-1-α} du` for `p >= q >= 0`.
fn stable_truncated_l2(alpha: f64, p: f64, q: f64, t: f64) -> f64 {
    if p <= q || alpha >= 2.0 {
        return 0.0;
    }
    let k = stable_levy_constant(alpha);
    let u1 = t / p;
    let inner = (p - q).powi(2) * u1.powf(2.0 - alpha) / (2.0 - alpha);
    // Antiderivative of (t - q u)^2 u^{-1-α}.
    let anti = |u: f64| {
        -t * t * u.powf(-alpha) / alpha - 2.0 * t * q * u.powf(1.0 - alpha) / (1.0 - alpha)
            + q * q * u.powf(2.0 - alpha) / (2.0 - alpha)
    };
    let outer = if q == 0.0 {
        t * t * u1.powf(-alpha) / alpha
    } else {
        anti(t / q) - anti(u1)
    };
    k * (inner + outer)
}

/// `∫ |g0(x,u)| ∧ |g0(x,u)|^2 μ0(du)` in closed form.
fn g0_local(term: &CompensatedJump, layout: &NoiseLayout, x: f64) -> f64 {
    match *term {
        CompensatedJump::Stable { factor, coeff } => {
            let alpha = layout.stable_alphas[factor];
            if alpha >= 2.0 {
                return 0.0;
            }
            let p = coeff * pos(x).powf(1.0 / alpha);
            stable_levy_constant(alpha) * p.powf(alpha) * (1.0 / (2.0 - alpha) + 1.0 / (alpha - 1.0))
        }
        CompensatedJump::Thinned { measure } => {
            let m = &layout.finite_measures[measure];
            let v = m.thinning_bound.unwrap_or(f64::INFINITY);
            m.mass * pos(x).min(v) * m.sizes.expect(|z| z.min(z * z))
        }
    }
}

fn g1_truncated_l1(term: &RawJump, measure: &FiniteMeasure, x: f64, y: f64, t: f64) -> f64 {
    measure.mass
        * measure
            .sizes
            .expect(|z| (term.eval(x, z).min(t) - term.eval(y, z).min(t)).abs())
}

/// Conditions of the first regularity assumption for one component.
pub fn validate_assum1(c: &CoefficientSet, layout: &NoiseLayout, s: &Sampling) -> Result<ValidationReport> {
    s.check()?;
    c.check_against(layout)?;
    let mut rng = s.rng();
    let mut checks = Vec::new();

    // σ vanishes on the non-positive half line.
    let mut bad = None;
    for k in 0..s.samples {
        let x = if k == 0 { 0.0 } else { -s.range * rng.random::<f64>() };
        if c.sigma.eval(x) != 0.0 {
            bad = Some(x);
            break;
        }
    }
    checks.push(match bad {
        None => Check::pass("sigma_vanishes_nonpositive", "σ(x) = 0 on sampled x <= 0"),
        Some(x) => Check::fail("sigma_vanishes_nonpositive", format!("σ({x}) = {}", c.sigma.eval(x)), vec![x]),
    });

    // |σ(x) - σ(y)| <= ρ(|x - y|).
    let mut worst: Option<(f64, f64, f64)> = None;
    for (x, y) in s.pairs(&mut rng, s.range) {
        let lhs = (c.sigma.eval(x) - c.sigma.eval(y)).abs();
        let rhs = c.rho.eval((x - y).abs());
        if !s.le(lhs, rhs) {
            let excess = lhs - rhs;
            if worst.is_none_or(|w| excess > w.2) {
                worst = Some((x, y, excess));
            }
        }
    }
    checks.push(match worst {
        None => Check::pass("sigma_modulus", format!("{} sampled pairs", s.samples)),
        Some((x, y, e)) => Check::fail(
            "sigma_modulus",
            format!("|σ(x) - σ(y)| exceeds ρ(|x - y|) by {e:.6e} at x = {x}, y = {y}"),
            vec![x, y],
        ),
    });
    checks.push(Check::from_divergence("rho_inverse_square_diverges", c.rho.diverges_inverse_square()));

    // g0 terms.
    if c.g0.is_empty() {
        checks.push(Check::new("g0_monotone_nonneg", Status::NotApplicable, "g0 ≡ 0"));
    } else {
        let mut fail = None;
        'outer: for term in &c.g0 {
            for _ in 0..s.samples {
                let mark = sample_g0_mark(term, layout, &mut rng);
                let x = s.range * (2.0 * rng.random::<f64>() - 1.0);
                let y = x + s.range * rng.random::<f64>();
                let gx = c.g0_value(term, layout, x, mark);
                let gy = c.g0_value(term, layout, y, mark);
                if x <= 0.0 && gx != 0.0 {
                    fail = Some(("g0 does not vanish at x <= 0", vec![x]));
                    break 'outer;
                }
                if gx + x < 0.0 && x >= 0.0 {
                    fail = Some(("g0(x, u) + x < 0", vec![x]));
                    break 'outer;
                }
                if gx > gy {
                    fail = Some(("g0 decreases in x", vec![x, y]));
                    break 'outer;
                }
            }
        }
        checks.push(match fail {
            None => Check::pass("g0_monotone_nonneg", "increasing, g0 + x >= 0 and g0 = 0 on x <= 0 at sampled points"),
            Some((msg, w)) => Check::fail("g0_monotone_nonneg", msg, w),
        });

        let gaussian_only = c.g0.iter().all(|t| match *t {
            CompensatedJump::Stable { factor, .. } => layout.stable_alphas[factor] >= 2.0,
            _ => false,
        });
        if gaussian_only {
            checks.push(Check::new(
                "g0_local_bound",
                Status::NotApplicable,
                "α = 2 terms are Gaussian; no Lévy measure",
            ));
            checks.push(Check::new("g0_level_modulus", Status::NotApplicable, "α = 2 terms have no Lévy measure"));
        } else {
            let sup = (0..=s.samples.min(1000))
                .map(|k| {
                    let x = s.range * k as f64 / s.samples.min(1000) as f64;
                    c.g0.iter().map(|t| g0_local(t, layout, x)).sum::<f64>()
                })
                .fold(0.0, f64::max);
            checks.push(if sup.is_finite() {
                Check::pass("g0_local_bound", format!("sup on [0, {}] of ∫|g0|∧|g0|² dμ0 = {sup:.6e}", s.range))
            } else {
                Check::new("g0_local_bound", Status::Fail, "integral is not finite")
            });

            let mut worst: Option<(f64, f64, f64, f64)> = None;
            let mut div = Check::pass("rho_m_inverse_square_diverges", "diverges at every level");
            for &m in &s.levels {
                let rho_m = c.rho_m.at_level(m);
                let d = Check::from_divergence("rho_m_inverse_square_diverges", rho_m.diverges_inverse_square());
                if d.status != Status::Pass {
                    div = d;
                }
                for (x, y) in s.pairs(&mut rng, m) {
                    let lhs: f64 = c.g0.iter().map(|t| g0_truncated_l2(t, layout, x, y, m)).sum();
                    let r = rho_m.eval((x - y).abs());
                    if !s.le(lhs, r * r) {
                        let excess = lhs - r * r;
                        if worst.is_none_or(|w| excess > w.3) {
                            worst = Some((m, x, y, excess));
                        }
                    }
                }
            }
            checks.push(match worst {
                None => Check::pass(
                    "g0_level_modulus",
                    format!("truncated L² increments within ρ_m² at levels {:?}", s.levels),
                ),
                Some((m, x, y, e)) => Check::fail(
                    "g0_level_modulus",
                    format!("truncated L² increment exceeds ρ_m² by {e:.6e} at m = {m}"),
                    vec![m, x, y],
                ),
            });
            checks.push(div);
        }
    }

    // g1 terms.
    if c.g1.is_empty() {
        checks.push(Check::pass("g1_plus_x_nonneg", "g1 ≡ 0; checked on x >= 0"));
        checks.push(Check::pass("g1_linear_growth", "g1 ≡ 0"));
        checks.push(Check::pass("g1_level_modulus", "g1 ≡ 0"));
    } else {
        let mut fail = None;
        'g1: for term in &c.g1 {
            let m = &layout.finite_measures[term.measure()];
            for _ in 0..s.samples {
                let x = s.range * rng.random::<f64>();
                let z = m.sizes.sample(&mut rng);
                if term.eval(x, z) + x < 0.0 {
                    fail = Some(vec![x, z]);
                    break 'g1;
                }
            }
        }
        checks.push(match fail {
            None => Check::pass("g1_plus_x_nonneg", "g1(x, u) + x >= 0 on sampled x >= 0"),
            Some(w) => Check::fail("g1_plus_x_nonneg", "g1(x, u) + x < 0", w),
        });

        let k = c.growth_k;
        let mut fail = None;
        for i in 0..=s.samples.min(1000) {
            let x = s.range * i as f64 / s.samples.min(1000) as f64;
            let rate = c.g1_mean_rate(layout, x);
            if !rate.is_finite() || !s.le(rate, k * (1.0 + x)) {
                fail = Some((x, rate));
                break;
            }
        }
        checks.push(match fail {
            None => Check::pass("g1_linear_growth", format!("∫|g1| dμ1 <= K (1 + x) with declared K = {k}")),
            Some((x, r)) => Check::fail(
                "g1_linear_growth",
                format!("∫|g1| dμ1 = {r} exceeds K (1 + x) = {} with declared K = {k}", k * (1.0 + x)),
                vec![x],
            ),
        });

        let r_declared = c.r_m.at_level(1.0) != Modulus::Zero;
        if !r_declared {
            checks.push(Check::pass(
                "g1_level_modulus",
                "μ1 has finite mass, so U2 = ∅ satisfies the condition for any r_m",
            ));
        } else {
            let mut worst: Option<(f64, f64, f64, f64)> = None;
            for &m in &s.levels {
                let r_m = c.r_m.at_level(m);
                for (x, y) in s.pairs(&mut rng, m).into_iter().take(s.samples.min(2000)) {
                    let lhs: f64 = c
                        .g1
                        .iter()
                        .map(|t| g1_truncated_l1(t, &layout.finite_measures[t.measure()], x, y, m))
                        .sum();
                    let rhs = r_m.eval((x - y).abs());
                    if !s.le(lhs, rhs) && worst.is_none_or(|w| lhs - rhs > w.3) {
                        worst = Some((m, x, y, lhs - rhs));
                    }
                }
            }
            checks.push(match worst {
                None => Check::pass("g1_level_modulus", "truncated L¹ increments within r_m (U2 = U1)"),
                Some((m, x, y, e)) => Check::fail(
                    "g1_level_modulus",
                    format!("truncated L¹ increment exceeds r_m by {e:.6e} at m = {m}"),
                    vec![m, x, y],
                ),
            });
            checks.push(Check::from_divergence("r_m_inverse_diverges", c.r_m.at_level(1.0).diverges_inverse()));
        }
    }

    Ok(ValidationReport {
        subject: "assum1".into(),
        checks,
    })
}

/// Conditions of the second (monotonicity and continuity) assumption.
pub fn validate_assum2(c: &CoefficientSet, layout: &NoiseLayout, s: &Sampling) -> Result<ValidationReport> {
    s.check()?;
    c.check_against(layout)?;
    let mut rng = s.rng();
    let mut checks = Vec::new();

    // σ bounded or increasing on R+.
    let bounded = c.sigma.bound();
    let n = s.samples.max(2);
    let mut decrease = None;
    let mut prev = c.sigma.eval(0.0);
    for k in 1..=n {
        let x = s.range * k as f64 / n as f64;
        let v = c.sigma.eval(x);
        if v < prev {
            decrease = Some(x);
            break;
        }
        prev = v;
    }
    let status = if bounded.is_some() || decrease.is_none() {
        Status::Pass
    } else {
        Status::Fail
    };
    let detail = format!(
        "bounded branch: {}; increasing branch: {}",
        bounded.map_or("no bound known".into(), |b| format!("|σ| <= {b}")),
        decrease.map_or("no sampled decrease".into(), |x| format!("decreases near x = {x}")),
    );
    let mut check = Check::new("sigma_bounded_or_increasing", status, detail);
    if status == Status::Fail {
        check = check.with_witness(vec![decrease.unwrap_or(0.0)]);
    }
    checks.push(check);

    // Left continuity of g0 and g1 in x.
    let h = 1e-12;
    let mut fail = None;
    'g0: for term in &c.g0 {
        for k in 0..s.samples.min(2000) {
            let mark = sample_g0_mark(term, layout, &mut rng);
            let x = match (k % 2, mark) {
                (0, Mark::Thinned { v, .. }) => v,
                _ => s.range * (2.0 * rng.random::<f64>() - 1.0),
            };
            let gx = c.g0_value(term, layout, x, mark);
            let gl = c.g0_value(term, layout, x - h * (1.0 + x.abs()), mark);
            if (gx - gl).abs() > 1e-4 * (1.0 + gx.abs()) {
                fail = Some(vec![x]);
                break 'g0;
            }
        }
    }
    'g1: for term in &c.g1 {
        let m = &layout.finite_measures[term.measure()];
        for k in 0..s.samples.min(2000) {
            let z = m.sizes.sample(&mut rng);
            let x = match (k % 2, term) {
                (0, RawJump::Capped { cap, .. }) => *cap,
                _ => s.range * (2.0 * rng.random::<f64>() - 1.0),
            };
            let gx = term.eval(x, z);
            let gl = term.eval(x - h * (1.0 + x.abs()), z);
            if (gx - gl).abs() > 1e-4 * (1.0 + gx.abs()) {
                fail = Some(vec![x, z]);
                break 'g1;
            }
        }
    }
    checks.push(match fail {
        None => Check::pass("jumps_left_continuous", "left limits match values at sampled points"),
        Some(w) => Check::fail("jumps_left_continuous", "left limit differs from value", w),
    });

    // g1 increasing or dominated by G with finite first and second moments.
    if c.g1.is_empty() {
        checks.push(Check::pass("g1_increasing_or_dominated", "g1 ≡ 0"));
    } else {
        let mut increasing = true;
        for term in &c.g1 {
            let m = &layout.finite_measures[term.measure()];
            for _ in 0..s.samples.min(2000) {
                let z = m.sizes.sample(&mut rng);
                let x = s.range * (2.0 * rng.random::<f64>() - 1.0);
                let y = x + s.range * rng.random::<f64>();
                if term.eval(x, z) > term.eval(y, z) {
                    increasing = false;
                }
            }
        }
        let dominated = c.g1.iter().all(|t| {
            let m = &layout.finite_measures[t.measure()];
            t.dominating_scale().is_some_and(|g| {
                let first = m.mass * g * m.sizes.expect(f64::abs);
                let second = m.mass * g * g * m.sizes.second_moment();
                first.is_finite() && second.is_finite()
            })
        });
        let status = if increasing || dominated {
            Status::Pass
        } else {
            Status::Fail
        };
        checks.push(Check::new(
            "g1_increasing_or_dominated",
            status,
            format!("increasing branch: {increasing}; dominated branch: {dominated}"),
        ));
    }

    Ok(ValidationReport {
        subject: "assum2".into(),
        checks,
    })
}

/// `ρ_m(x) <= ρ(x)` on a dense sample of `(0, x_m]`, compared exactly.
pub fn validate_assum_uniq(rho: &Modulus, rho_m: &Modulus, xm: f64) -> Result<ValidationReport> {
    if !(xm.is_finite() && xm > 0.0) {
        return invalid(format!("x_m must be positive, got {xm}"));
    }
    const DENSE: usize = 10_000;
    let mut witness = None;
    for k in 1..=DENSE {
        let lin = xm * k as f64 / DENSE as f64;
        let log = xm * 10f64.powf(-12.0 * (1.0 - k as f64 / DENSE as f64));
        for x in [lin, log] {
            if rho_m.eval(x) > rho.eval(x) {
                witness = Some(x);
                break;
            }
        }
        if witness.is_some() {
            break;
        }
    }
    let check = match witness {
        None => Check::pass("rho_m_below_rho", format!("ρ_m <= ρ on {} points of (0, {xm}]", 2 * DENSE)),
        Some(x) => Check::fail(
            "rho_m_below_rho",
            format!("ρ_m({x}) = {} > ρ({x}) = {}", rho_m.eval(x), rho.eval(x)),
            vec![x],
        ),
    };
    Ok(ValidationReport {
        subject: "assum_uniq".into(),
        checks: vec![check],
    })
}

/// Non-negativity, monotonicity and the linear surrogate bound `B + L Σ x_j`.
pub fn validate_drift(drift: &DriftSpec, n: usize, horizon: f64, s: &Sampling) -> Result<ValidationReport> {
    s.check()?;
    drift.check(n)?;
    let mut rng = s.rng();
    let (b, l) = drift.lipschitz_bounds(n, horizon);
    let mut neg = None;
    let mut dec = None;
    let mut lip = None;
    for _ in 0..s.samples {
        let t = horizon * rng.random::<f64>();
        let x: Vec<f64> = (0..n).map(|_| s.range * rng.random::<f64>()).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&xi| if rng.random::<bool>() { xi + s.range * rng.random::<f64>() } else { xi })
            .collect();
        let bx = drift.eval(t, &x);
        let by = drift.eval(t, &y);
        if bx < 0.0 && neg.is_none() {
            neg = Some(t);
        }
        if bx > by && dec.is_none() {
            dec = Some(t);
        }
        if !s.le(bx, b + l * x.iter().sum::<f64>()) && lip.is_none() {
            lip = Some(t);
        }
    }
    let mk = |name: &str, bad: Option<f64>, ok: String| match bad {
        None => Check::pass(name, ok),
        Some(t) => Check::fail(name, format!("violated at sampled time {t}"), vec![t]),
    };
    Ok(ValidationReport {
        subject: "drift".into(),
        checks: vec![
            mk("drift_nonneg", neg, "b >= 0 on sampled tuples".into()),
            mk("drift_increasing", dec, "b(s, x) <= b(s, y) for sampled x <= y".into()),
            mk("drift_linear_bound", lip, format!("b <= B + L Σ x_j with B = {b}, L = {l}")),
        ],
    })
}

/// Every report for every component of a system.
pub fn validate_system(
    spec: &SystemSpec,
    horizon: f64,
    xm: f64,
    s: &Sampling,
) -> Result<Vec<(usize, ValidationReport)>> {
    spec.validate()?;
    let mut out = Vec::new();
    for (i, comp) in spec.components.iter().enumerate() {
        out.push((i, validate_assum1(&comp.coeffs, &spec.layout, s)?));
        out.push((i, validate_assum2(&comp.coeffs, &spec.layout, s)?));
        out.push((i, validate_drift(&comp.drift, spec.len(), horizon, s)?));
        for &m in &s.levels {
            let mut r = validate_assum_uniq(&comp.coeffs.rho, &comp.coeffs.rho_m.at_level(m), xm)?;
            r.subject = format!("assum_uniq (m = {m})");
            out.push((i, r));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::Diffusion;
    use crate::quad;

    fn bare(sigma: Diffusion, rho: Modulus) -> CoefficientSet {
        CoefficientSet {
            a: 1.0,
            sigma,
            loadings: vec![super::super::Loading { factor: 0, weight: 1.0 }],
            g0: Vec::new(),
            g1: Vec::new(),
            rho,
            rho_m: super::super::LevelModulus::zero(),
            r_m: super::super::LevelModulus::zero(),
            growth_k: 0.0,
        }
    }

    fn layout() -> NoiseLayout {
        NoiseLayout {
            brownian_factors: 1,
            stable_alphas: vec![1.5],
            finite_measures: Vec::new(),
        }
    }

    #[test]
    fn stable_truncated_integral_matches_quadrature() {
        let (alpha, p, q, t) = (1.5, 2.0, 0.7, 3.0);
        let k = stable_levy_constant(alpha);
        let f = |u: f64| ((p * u).min(t) - (q * u).min(t)).powi(2) * k * u.powf(-1.0 - alpha);
        let eps: f64 = 1e-12;
        let head = k * (p - q).powi(2) * eps.powf(2.0 - alpha) / (2.0 - alpha);
        let num = head + quad::integrate_log(f, eps, t / p, 64) + quad::integrate_log(f, t / p, t / q, 64);
        let exact = stable_truncated_l2(alpha, p, q, t);
        assert!((num - exact).abs() < 1e-8 * exact, "{num} vs {exact}");
    }

    #[test]
    fn sqrt_diffusion_passes_and_square_fails() {
        let s = Sampling::default();
        let ok = validate_assum1(&bare(Diffusion::Sqrt { scale: 1.0 }, Modulus::power(1.0, 0.5)), &layout(), &s).unwrap();
        assert_eq!(ok.find("sigma_modulus").unwrap().status, Status::Pass);
        let sq = bare(
            Diffusion::Power {
                scale: 1.0,
                exponent: 2.0,
            },
            Modulus::power(1.0, 0.5),
        );
        let bad = validate_assum1(&sq, &layout(), &s).unwrap();
        let c = bad.find("sigma_modulus").unwrap();
        assert_eq!(c.status, Status::Fail);
        let w = c.witness.as_ref().unwrap();
        assert!((w[0] * w[0] - w[1] * w[1]).abs() > (w[0] - w[1]).abs().sqrt());
    }

    #[test]
    fn uniq_threshold_examples() {
        let sq = Modulus::power(1.0, 0.5);
        let lin = Modulus::power(1.0, 1.0);
        assert!(validate_assum_uniq(&sq, &sq, 1.0).unwrap().passed());
        assert!(validate_assum_uniq(&sq, &lin, 1.0).unwrap().passed());
        let r = validate_assum_uniq(&lin, &sq, 1.0).unwrap();
        assert!(!r.passed());
        let x = r.checks[0].witness.as_ref().unwrap()[0];
        assert!(x.sqrt() > x);
    }

    #[test]
    fn clipped_sine_passes_bounded_branch() {
        let c = bare(
            Diffusion::ClippedSine {
                amplitude: 1.0,
                frequency: 3.0,
            },
            Modulus::power(3.0, 1.0),
        );
        let r = validate_assum2(&c, &layout(), &Sampling::default()).unwrap();
        assert!(r.passed());
        assert!(r.checks[0].detail.contains("decreases"));
    }

    #[test]
    fn zero_sample_budget_rejected() {
        let s = Sampling {
            samples: 0,
            ..Sampling::default()
        };
        assert!(validate_assum1(&bare(Diffusion::Zero, Modulus::Zero), &layout(), &s).is_err());
    }
}
