//! Built-in systems: the one-dimensional square-root equation with stable
//! jumps, the mean-field credit example and the thinned finite-activity
//! jump form.

use serde::{Deserialize, Serialize};

use super::{
    stable_levy_constant, CoefficientSet, CompensatedJump, ComponentSpec, Diffusion, DriftSpec,
    LevelModulus, Loading, Modulus, SystemSpec,
};
use crate::error::{invalid, Result};
use crate::noise::{check_alpha, FiniteMeasure, NoiseLayout};

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        invalid(format!("{name} must be finite and >= 0, got {v}"))
    }
}

/// `ρ_m` for a sum of stable terms `c_j u (x⁺)^{1/α_j}`.
///
/// The truncated squared increment against the stable Lévy measure is at most
/// `κ c^α m^{2-α} (1/(2-α) + 1/α) |x - y|`, summed over terms.
fn stable_rho_m(terms: &[(f64, f64)]) -> LevelModulus {
    let active: Vec<_> = terms
        .iter()
        .filter(|(c, alpha)| *c > 0.0 && *alpha < 2.0)
        .collect();
    if active.is_empty() {
        return LevelModulus::zero();
    }
    let sq: f64 = active
        .iter()
        .map(|&&(c, alpha)| stable_levy_constant(alpha) * c.powf(alpha) * (1.0 / (2.0 - alpha) + 1.0 / alpha))
        .sum();
    let alpha_min = active.iter().map(|t| t.1).fold(2.0, f64::min);
    LevelModulus::PowerLaw {
        coeff: sq.sqrt(),
        level_exponent: (2.0 - alpha_min) / 2.0,
        exponent: 0.5,
    }
}

/// Parameters of `dλ = a(b - λ)dt + σ √λ dB + σ_Z λ_{-}^{1/α} dZ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Eq11Params {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    #[serde(default)]
    pub sigma_z: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub initial: f64,
}

fn default_alpha() -> f64 {
    1.5
}

/// The one-dimensional equation as a single-component system with Brownian
/// factor 0 and stable factor 0.
pub fn preset_eq11(p: &Eq11Params) -> Result<SystemSpec> {
    for (name, v) in [("a", p.a), ("b", p.b), ("sigma", p.sigma), ("sigma_z", p.sigma_z), ("initial", p.initial)] {
        check_nonneg(name, v)?;
    }
    check_alpha(p.alpha)?;
    let mut coeffs = CoefficientSet {
        a: p.a,
        sigma: Diffusion::Zero,
        loadings: Vec::new(),
        g0: Vec::new(),
        g1: Vec::new(),
        rho: Modulus::Zero,
        rho_m: stable_rho_m(&[(p.sigma_z, p.alpha)]),
        r_m: LevelModulus::zero(),
        growth_k: 0.0,
    };
    if p.sigma > 0.0 {
        coeffs.sigma = Diffusion::Sqrt { scale: p.sigma };
        coeffs.loadings.push(Loading { factor: 0, weight: 1.0 });
        coeffs.rho = Modulus::power(p.sigma, 0.5);
    }
    if p.sigma_z > 0.0 {
        coeffs.g0.push(CompensatedJump::Stable {
            factor: 0,
            coeff: p.sigma_z,
        });
    }
    Ok(SystemSpec {
        layout: NoiseLayout {
            brownian_factors: 1,
            stable_alphas: vec![p.alpha],
            finite_measures: Vec::new(),
        },
        components: vec![ComponentSpec {
            initial: p.initial,
            coeffs,
            drift: DriftSpec::Constant { value: p.b },
        }],
    })
}

/// Drift used by the mean-field example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ExampleDrift {
    /// `(1/N) Σ x_j`, the example's own drift.
    MeanFieldAverage,
    /// A constant level `b` for every component.
    Constant { value: f64 },
}

/// Parameters of the mean-field example. Per-component vectors have length `N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example21Params {
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    pub sigma0: f64,
    pub sigma_z: Vec<f64>,
    pub sigma_z0: f64,
    pub alpha: Vec<f64>,
    pub alpha0: f64,
    pub initial: Vec<f64>,
    #[serde(default = "default_example_drift")]
    pub drift: ExampleDrift,
}

fn default_example_drift() -> ExampleDrift {
    ExampleDrift::MeanFieldAverage
}

impl Example21Params {
    /// All components share the same parameters.
    #[allow(clippy::too_many_arguments)]
    pub fn symmetric(
        n: usize,
        a: f64,
        sigma: f64,
        sigma0: f64,
        sigma_z: f64,
        sigma_z0: f64,
        alpha: f64,
        alpha0: f64,
        initial: f64,
    ) -> Self {
        Self {
            a: vec![a; n],
            sigma: vec![sigma; n],
            sigma0,
            sigma_z: vec![sigma_z; n],
            sigma_z0,
            alpha: vec![alpha; n],
            alpha0,
            initial: vec![initial; n],
            drift: ExampleDrift::MeanFieldAverage,
        }
    }
}

/// Brownian factor `i - 1` is `B^i` and factor `N` is the common `B^0`;
/// stable factor `i - 1` is `Z^i` and factor `N` is `Z^0`.
pub fn preset_example21(p: &Example21Params) -> Result<SystemSpec> {
    let n = p.initial.len();
    if n == 0 {
        return invalid("the example needs at least one component");
    }
    for (name, v) in [("a", &p.a), ("sigma", &p.sigma), ("sigma_z", &p.sigma_z), ("alpha", &p.alpha)] {
        if v.len() != n {
            return invalid(format!("{name} has {} entries for {n} components", v.len()));
        }
    }
    check_nonneg("sigma0", p.sigma0)?;
    check_nonneg("sigma_z0", p.sigma_z0)?;
    check_alpha(p.alpha0)?;
    for i in 0..n {
        check_nonneg("a", p.a[i])?;
        check_nonneg("sigma", p.sigma[i])?;
        check_nonneg("sigma_z", p.sigma_z[i])?;
        check_nonneg("initial", p.initial[i])?;
        check_alpha(p.alpha[i])?;
    }
    let drift = match p.drift {
        ExampleDrift::MeanFieldAverage => DriftSpec::MeanFieldAverage,
        ExampleDrift::Constant { value } => {
            check_nonneg("drift level", value)?;
            DriftSpec::Constant { value }
        }
    };

    let mut alphas = p.alpha.clone();
    alphas.push(p.alpha0);
    let components = (0..n)
        .map(|i| {
            let total = (p.sigma[i] * p.sigma[i] + p.sigma0 * p.sigma0).sqrt();
            let mut coeffs = CoefficientSet {
                a: p.a[i],
                sigma: Diffusion::Zero,
                loadings: Vec::new(),
                g0: Vec::new(),
                g1: Vec::new(),
                rho: Modulus::Zero,
                rho_m: stable_rho_m(&[(p.sigma_z[i], p.alpha[i]), (p.sigma_z0, p.alpha0)]),
                r_m: LevelModulus::zero(),
                growth_k: 0.0,
            };
            if total > 0.0 {
                coeffs.sigma = Diffusion::Sqrt { scale: total };
                coeffs.rho = Modulus::power(total, 0.5);
                for (factor, s) in [(i, p.sigma[i]), (n, p.sigma0)] {
                    if s > 0.0 {
                        coeffs.loadings.push(Loading {
                            factor,
                            weight: s / total,
                        });
                    }
                }
            }
            for (factor, c) in [(i, p.sigma_z[i]), (n, p.sigma_z0)] {
                if c > 0.0 {
                    coeffs.g0.push(CompensatedJump::Stable { factor, coeff: c });
                }
            }
            ComponentSpec {
                initial: p.initial[i],
                coeffs,
                drift: drift.clone(),
            }
        })
        .collect();
    Ok(SystemSpec {
        layout: NoiseLayout {
            brownian_factors: n + 1,
            stable_alphas: alphas,
            finite_measures: Vec::new(),
        },
        components,
    })
}

/// Parameters of the thinned form
/// `dλ = a(b - λ)dt + σ √λ dB + ∫ 1{v < λ_-} ζ Ñ(ds, dv, dζ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinningParams {
    /// Finite Lévy measure of the sizes `ζ`.
    pub levy: FiniteMeasure,
    /// Range `V` of the thinning coordinate; states above `V` are treated as `V`.
    pub thinning_bound: f64,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub sigma: f64,
    pub initial: f64,
}

pub fn preset_cbi_thinning(p: &ThinningParams) -> Result<SystemSpec> {
    if !p.levy.mass.is_finite() {
        return invalid("the thinned jump form needs a Lévy measure of finite total mass");
    }
    p.levy.validate()?;
    if !(p.thinning_bound.is_finite() && p.thinning_bound > 0.0) {
        return invalid(format!("thinning bound must be positive, got {}", p.thinning_bound));
    }
    for (name, v) in [("a", p.a), ("b", p.b), ("sigma", p.sigma), ("initial", p.initial)] {
        check_nonneg(name, v)?;
    }
    let measure = FiniteMeasure {
        thinning_bound: Some(p.thinning_bound),
        ..p.levy.clone()
    };
    let jump_l2 = (measure.mass * measure.sizes.second_moment()).sqrt();
    let mut coeffs = CoefficientSet {
        a: p.a,
        sigma: Diffusion::Zero,
        loadings: Vec::new(),
        g0: vec![CompensatedJump::Thinned { measure: 0 }],
        g1: Vec::new(),
        rho: Modulus::Zero,
        rho_m: if jump_l2 > 0.0 {
            LevelModulus::Fixed {
                modulus: Modulus::power(jump_l2, 0.5),
            }
        } else {
            LevelModulus::zero()
        },
        r_m: LevelModulus::zero(),
        growth_k: 0.0,
    };
    if p.sigma > 0.0 {
        coeffs.sigma = Diffusion::Sqrt { scale: p.sigma };
        coeffs.loadings.push(Loading { factor: 0, weight: 1.0 });
        coeffs.rho = Modulus::power(p.sigma, 0.5);
    }
    Ok(SystemSpec {
        layout: NoiseLayout {
            brownian_factors: 1,
            stable_alphas: Vec::new(),
            finite_measures: vec![measure],
        },
        components: vec![ComponentSpec {
            initial: p.initial,
            coeffs,
            drift: DriftSpec::Constant { value: p.b },
        }],
    })
}
