//! Coefficient descriptors for one component of the system, drift
//! specifications, whole-system specifications, presets and sampled
//! assumption validators.
//!
//! Descriptors are plain data so that scenarios can be loaded from JSON and
//! validators can reason about their symbolic form where one exists.

mod presets;
mod validate;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{invalid, Result};
use crate::noise::{Mark, NoiseBundle, NoiseLayout};
use crate::paths::CadlagPath;

pub use presets::{
    preset_cbi_thinning, preset_eq11, preset_example21, Eq11Params, Example21Params,
    ExampleDrift, ThinningParams,
};
pub use validate::{
    validate_assum1, validate_assum2, validate_assum_uniq, validate_drift, validate_system,
    Check, Sampling, Status, ValidationReport,
};

/// Positive part.
#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Diffusion coefficient `σ`. Every variant vanishes on `x <= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Diffusion {
    Zero,
    /// `scale * sqrt(x⁺)`
    Sqrt { scale: f64 },
    /// `scale * (x⁺)^exponent`
    Power { scale: f64, exponent: f64 },
    /// `amplitude * max(sin(frequency * x⁺), 0)`; bounded, not monotone.
    ClippedSine { amplitude: f64, frequency: f64 },
}

impl Diffusion {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Diffusion::Zero => 0.0,
            Diffusion::Sqrt { scale } => scale * pos(x).sqrt(),
            Diffusion::Power { scale, exponent } => {
                if x <= 0.0 {
                    0.0
                } else {
                    scale * x.powf(exponent)
                }
            }
            Diffusion::ClippedSine {
                amplitude,
                frequency,
            } => amplitude * (frequency * pos(x)).sin().max(0.0),
        }
    }

    /// A known uniform bound, when the descriptor has one.
    pub fn bound(&self) -> Option<f64> {
        match *self {
            Diffusion::Zero => Some(0.0),
            Diffusion::ClippedSine { amplitude, .. } => Some(amplitude.abs()),
            Diffusion::Power { scale, exponent } if exponent == 0.0 => Some(scale.abs()),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            Diffusion::Zero => true,
            Diffusion::Sqrt { scale } | Diffusion::Power { scale, .. } => scale == 0.0,
            Diffusion::ClippedSine { amplitude, .. } => amplitude == 0.0,
        }
    }
}

/// Whether `∫_0^x dz / f(z)` diverges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    Diverges,
    Converges,
    Unknown,
}

/// Modulus of continuity, non-negative and increasing on `R+`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Modulus {
    Zero,
    /// `coeff * z^exponent`
    Power { coeff: f64, exponent: f64 },
    /// Linear interpolation through `(z, value)` knots starting at `z = 0`,
    /// constant after the last knot. No symbolic form.
    Piecewise { knots: Vec<[f64; 2]> },
}

impl Modulus {
    pub fn power(coeff: f64, exponent: f64) -> Self {
        if coeff == 0.0 {
            Modulus::Zero
        } else {
            Modulus::Power { coeff, exponent }
        }
    }

    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Modulus::Zero => 0.0,
            Modulus::Power { coeff, exponent } => {
                if z <= 0.0 {
                    0.0
                } else {
                    coeff * z.powf(*exponent)
                }
            }
            Modulus::Piecewise { knots } => {
                let k = knots.partition_point(|p| p[0] <= z);
                if k == 0 {
                    knots.first().map_or(0.0, |p| p[1])
                } else if k == knots.len() {
                    knots[k - 1][1]
                } else {
                    let (a, b) = (knots[k - 1], knots[k]);
                    a[1] + (b[1] - a[1]) * (z - a[0]) / (b[0] - a[0])
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Modulus::Zero => Ok(()),
            Modulus::Power { coeff, exponent } => {
                if coeff.is_finite() && *coeff > 0.0 && exponent.is_finite() && *exponent > 0.0 {
                    Ok(())
                } else {
                    invalid(format!("power modulus needs positive coefficient and exponent, got {coeff}, {exponent}"))
                }
            }
            Modulus::Piecewise { knots } => {
                if knots.is_empty() || knots[0][0] != 0.0 {
                    return invalid("piecewise modulus must start with a knot at z = 0");
                }
                if knots.windows(2).any(|w| w[1][0] <= w[0][0] || w[1][1] < w[0][1]) {
                    return invalid("piecewise modulus knots must be increasing");
                }
                if knots.iter().any(|p| p[1] < 0.0 || !p[1].is_finite()) {
                    return invalid("piecewise modulus values must be finite and non-negative");
                }
                Ok(())
            }
        }
    }

    /// `∫_0^x dz / ρ(z)^2 = ∞`, decided symbolically for power laws.
    pub fn diverges_inverse_square(&self) -> Divergence {
        match self {
            Modulus::Zero => Divergence::Diverges,
            Modulus::Power { exponent, .. } => {
                if *exponent >= 0.5 {
                    Divergence::Diverges
                } else {
                    Divergence::Converges
                }
            }
            Modulus::Piecewise { .. } => Divergence::Unknown,
        }
    }

    /// `∫_0^x dz / r(z) = ∞`, decided symbolically for power laws.
    pub fn diverges_inverse(&self) -> Divergence {
        match self {
            Modulus::Zero => Divergence::Diverges,
            Modulus::Power { exponent, .. } => {
                if *exponent >= 1.0 {
                    Divergence::Diverges
                } else {
                    Divergence::Converges
                }
            }
            Modulus::Piecewise { .. } => Divergence::Unknown,
        }
    }
}

/// A family of moduli indexed by the truncation level `m >= 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LevelModulus {
    Fixed { modulus: Modulus },
    /// `coeff * m^level_exponent * z^exponent`
    PowerLaw {
        coeff: f64,
        level_exponent: f64,
        exponent: f64,
    },
}

impl LevelModulus {
    pub fn zero() -> Self {
        LevelModulus::Fixed {
            modulus: Modulus::Zero,
        }
    }

    pub fn at_level(&self, m: f64) -> Modulus {
        match self {
            LevelModulus::Fixed { modulus } => modulus.clone(),
            LevelModulus::PowerLaw {
                coeff,
                level_exponent,
                exponent,
            } => Modulus::power(coeff * m.max(1.0).powf(*level_exponent), *exponent),
        }
    }
}

/// Lévy density constant `κ` of `S_α(1, 1, 0)`: the jump measure is
/// `κ u^{-1-α} du` on `u > 0`.
pub fn stable_levy_constant(alpha: f64) -> f64 {
    alpha * (alpha - 1.0) / (gamma(2.0 - alpha) * (std::f64::consts::FRAC_PI_2 * alpha).cos().abs())
}

/// Term of the compensated jump coefficient `g0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CompensatedJump {
    /// `coeff * u * (x⁺)^{1/α}` against the compensated jumps of stable
    /// factor `factor`; simulated as `coeff * (x⁺)^{1/α} * ΔZ`.
    Stable { factor: usize, coeff: f64 },
    /// `1{v < x} * ζ` with marks `(v, ζ)` from a thinned finite measure.
    Thinned { measure: usize },
}

/// Term of the uncompensated jump coefficient `g1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RawJump {
    /// `u`
    Additive { measure: usize },
    /// `min(x⁺, cap) * u`
    Capped { measure: usize, cap: f64 },
    /// `x⁺ * u`
    Proportional { measure: usize },
}

impl RawJump {
    pub fn measure(&self) -> usize {
        match *self {
            RawJump::Additive { measure }
            | RawJump::Capped { measure, .. }
            | RawJump::Proportional { measure } => measure,
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, size: f64) -> f64 {
        match *self {
            RawJump::Additive { .. } => size,
            RawJump::Capped { cap, .. } => pos(x).min(cap) * size,
            RawJump::Proportional { .. } => pos(x) * size,
        }
    }

    /// Dominating function `G(u)` with `|g1(x, u)| <= G(u)`, when one exists.
    pub fn dominating_scale(&self) -> Option<f64> {
        match *self {
            RawJump::Additive { .. } => Some(1.0),
            RawJump::Capped { cap, .. } => Some(cap),
            RawJump::Proportional { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Loading {
    pub factor: usize,
    pub weight: f64,
}

/// Coefficients `(a, σ, g0, g1)` of one component together with the moduli
/// and the linear-growth constant used by the validators and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSet {
    pub a: f64,
    pub sigma: Diffusion,
    /// Brownian factor weights building this component's driving motion;
    /// the squared weights sum to one.
    #[serde(default)]
    pub loadings: Vec<Loading>,
    #[serde(default)]
    pub g0: Vec<CompensatedJump>,
    #[serde(default)]
    pub g1: Vec<RawJump>,
    pub rho: Modulus,
    #[serde(default = "LevelModulus::zero")]
    pub rho_m: LevelModulus,
    #[serde(default = "LevelModulus::zero")]
    pub r_m: LevelModulus,
    /// Linear-growth constant `K` of `x ↦ ∫|g1(x, u)| μ1(du)`.
    #[serde(default)]
    pub growth_k: f64,
}

impl CoefficientSet {
    /// Check indices and parameter ranges against a noise layout.
    pub fn check_against(&self, layout: &NoiseLayout) -> Result<()> {
        if !(self.a.is_finite() && self.a >= 0.0) {
            return invalid(format!("mean-reversion speed must be >= 0, got {}", self.a));
        }
        for l in &self.loadings {
            if l.factor >= layout.brownian_factors {
                return invalid(format!("loading references missing Brownian factor {}", l.factor));
            }
            if !(l.weight.is_finite() && l.weight >= 0.0) {
                return invalid(format!("loading weights must be >= 0, got {}", l.weight));
            }
        }
        if !self.sigma.is_zero() && self.loadings.is_empty() {
            return invalid("a non-zero diffusion needs at least one Brownian loading");
        }
        for term in &self.g0 {
            match *term {
                CompensatedJump::Stable { factor, coeff } => {
                    if factor >= layout.stable_alphas.len() {
                        return invalid(format!("g0 references missing stable factor {factor}"));
                    }
                    if !(coeff.is_finite() && coeff >= 0.0) {
                        return invalid(format!("stable jump coefficient must be >= 0, got {coeff}"));
                    }
                }
                CompensatedJump::Thinned { measure } => {
                    let m = layout
                        .finite_measures
                        .get(measure)
                        .ok_or_else(|| crate::Error::InvalidInput(format!("g0 references missing measure {measure}")))?;
                    if m.thinning_bound.is_none() {
                        return invalid(format!("thinned g0 needs measure {measure} to carry a thinning bound"));
                    }
                }
            }
        }
        for term in &self.g1 {
            if term.measure() >= layout.finite_measures.len() {
                return invalid(format!("g1 references missing measure {}", term.measure()));
            }
            if let RawJump::Capped { cap, .. } = term {
                if !(cap.is_finite() && *cap >= 0.0) {
                    return invalid(format!("g1 cap must be >= 0, got {cap}"));
                }
            }
        }
        self.rho.validate()?;
        Ok(())
    }

    /// Value of one `g0` term at state `x` and mark `u` (a jump size for
    /// stable terms, `(v, ζ)` for thinned ones).
    pub fn g0_value(&self, term: &CompensatedJump, layout: &NoiseLayout, x: f64, mark: Mark) -> f64 {
        match *term {
            CompensatedJump::Stable { factor, coeff } => {
                let alpha = layout.stable_alphas[factor];
                coeff * mark.size() * pos(x).powf(1.0 / alpha)
            }
            CompensatedJump::Thinned { .. } => match mark {
                Mark::Thinned { v, size } if v < x => size,
                _ => 0.0,
            },
        }
    }

    /// Intensity of accepted thinned jumps at state `x`.
    pub fn effective_jump_intensity(&self, layout: &NoiseLayout, x: f64) -> f64 {
        self.g0
            .iter()
            .filter_map(|t| match *t {
                CompensatedJump::Thinned { measure } => {
                    let m = &layout.finite_measures[measure];
                    Some(m.mass * pos(x).min(m.thinning_bound.unwrap_or(f64::INFINITY)))
                }
                _ => None,
            })
            .sum()
    }

    /// `∫ |g1(x, u)| μ1(du)` in closed form from the mark means.
    pub fn g1_mean_rate(&self, layout: &NoiseLayout, x: f64) -> f64 {
        self.g1
            .iter()
            .map(|t| {
                let m = &layout.finite_measures[t.measure()];
                m.mass * t.eval(x, m.sizes.mean()).abs()
            })
            .sum()
    }

    /// Smallest `K` with `∫|g1| μ1 <= K (1 + x)` for the built-in `g1` terms.
    pub fn derived_growth_k(&self, layout: &NoiseLayout) -> f64 {
        self.g1
            .iter()
            .map(|t| {
                let m = &layout.finite_measures[t.measure()];
                m.mass * m.sizes.mean()
            })
            .fold(0.0, |acc, k| acc + k)
    }

    /// Increment of this component's driving Brownian motion over `step`.
    #[inline]
    pub fn driving_increment(&self, noise: &NoiseBundle, step: usize) -> f64 {
        self.loadings
            .iter()
            .map(|l| l.weight * noise.brownian[l.factor][step])
            .sum()
    }
}

/// Drift forcing `b_i(s, x_1, ..., x_N)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    Constant { value: f64 },
    /// `intercept + slope * s`
    TimeLinear { intercept: f64, slope: f64 },
    /// `(1/N) Σ x_j`
    MeanFieldAverage,
    /// `offset + Σ w_j x_j`
    MeanFieldWeighted { offset: f64, weights: Vec<f64> },
    /// A realised càdlàg process, evaluated right-continuously.
    #[serde(skip)]
    External(Arc<CadlagPath>),
}

impl DriftSpec {
    #[inline]
    pub fn eval(&self, s: f64, state: &[f64]) -> f64 {
        match self {
            DriftSpec::Constant { value } => *value,
            DriftSpec::TimeLinear { intercept, slope } => intercept + slope * s,
            DriftSpec::MeanFieldAverage => state.iter().sum::<f64>() / state.len() as f64,
            DriftSpec::MeanFieldWeighted { offset, weights } => {
                offset + weights.iter().zip(state).map(|(w, x)| w * x).sum::<f64>()
            }
            DriftSpec::External(path) => path
                .evaluate(s.min(path.horizon()))
                .expect("time inside horizon"),
        }
    }

    /// True when the drift ignores the state vector.
    pub fn is_time_only(&self) -> bool {
        matches!(
            self,
            DriftSpec::Constant { .. } | DriftSpec::TimeLinear { .. } | DriftSpec::External(_)
        )
    }

    /// Constants `(B, L)` with `b(s, x) <= B + L Σ x_j` on `[0, horizon]`
    /// for non-negative states.
    pub fn lipschitz_bounds(&self, n: usize, horizon: f64) -> (f64, f64) {
        match self {
            DriftSpec::Constant { value } => (*value, 0.0),
            DriftSpec::TimeLinear { intercept, slope } => {
                (intercept.max(intercept + slope * horizon), 0.0)
            }
            DriftSpec::MeanFieldAverage => (0.0, 1.0 / n as f64),
            DriftSpec::MeanFieldWeighted { offset, weights } => {
                (*offset, weights.iter().copied().fold(0.0, f64::max))
            }
            DriftSpec::External(path) => {
                let sup = path
                    .values()
                    .iter()
                    .chain(path.jumps().iter().map(|j| &j.right_value))
                    .copied()
                    .fold(0.0, f64::max);
                (sup, 0.0)
            }
        }
    }

    /// Exact infimum over `[lo, hi]` of a time-only drift.
    pub fn time_infimum(&self, lo: f64, hi: f64) -> Option<f64> {
        match self {
            DriftSpec::Constant { value } => Some(*value),
            DriftSpec::TimeLinear { intercept, slope } => {
                Some((intercept + slope * lo).min(intercept + slope * hi))
            }
            DriftSpec::External(path) => {
                let grid = path.grid();
                let start = grid.locate(lo)?;
                let end = grid.locate(hi)?;
                let mut m = path.evaluate(lo).ok()?;
                for k in start + 1..=end {
                    m = m.min(path.values()[k]);
                }
                for j in path.jumps() {
                    if j.time > lo && j.time <= hi {
                        m = m.min(j.right_value);
                    }
                }
                Some(m)
            }
            _ => None,
        }
    }

    pub fn check(&self, n: usize) -> Result<()> {
        match self {
            DriftSpec::Constant { value } if !(value.is_finite() && *value >= 0.0) => {
                invalid(format!("constant drift must be finite and >= 0, got {value}"))
            }
            DriftSpec::TimeLinear { intercept, slope } if !(intercept.is_finite() && slope.is_finite()) => {
                invalid("time-linear drift needs finite coefficients")
            }
            DriftSpec::MeanFieldWeighted { offset, weights } => {
                if weights.len() != n {
                    return invalid(format!(
                        "weighted drift has {} weights for {n} components",
                        weights.len()
                    ));
                }
                if !(offset.is_finite() && *offset >= 0.0) || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return invalid("weighted drift needs a non-negative offset and weights");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentSpec {
    pub initial: f64,
    pub coeffs: CoefficientSet,
    pub drift: DriftSpec,
}

/// The full system: noise layout plus one component spec per equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub layout: NoiseLayout,
    pub components: Vec<ComponentSpec>,
}

impl SystemSpec {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return invalid("a system needs at least one component");
        }
        self.layout.validate()?;
        let n = self.components.len();
        for (i, c) in self.components.iter().enumerate() {
            if !(c.initial.is_finite() && c.initial >= 0.0) {
                return invalid(format!("component {i}: initial value must be >= 0, got {}", c.initial));
            }
            c.coeffs
                .check_against(&self.layout)
                .map_err(|e| crate::Error::InvalidInput(format!("component {i}: {e}")))?;
            c.drift
                .check(n)
                .map_err(|e| crate::Error::InvalidInput(format!("component {i}: {e}")))?;
        }
        Ok(())
    }

    pub fn initials(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.initial).collect()
    }

    pub fn all_time_only(&self) -> bool {
        self.components.iter().all(|c| c.drift.is_time_only())
    }

    /// `ā = max_i a_i`.
    pub fn max_mean_reversion(&self) -> f64 {
        self.components.iter().map(|c| c.coeffs.a).fold(0.0, f64::max)
    }

    /// System-wide `(B, L)` of the drift surrogate bound.
    pub fn lipschitz_bounds(&self, horizon: f64) -> (f64, f64) {
        let n = self.components.len();
        self.components
            .iter()
            .map(|c| c.drift.lipschitz_bounds(n, horizon))
            .fold((0.0, 0.0), |acc, b| (acc.0.max(b.0), acc.1.max(b.1)))
    }

    /// System-wide linear-growth constant `K`.
    pub fn growth_k(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.coeffs.growth_k)
            .fold(0.0, f64::max)
    }
}
