//! JSON scenario files: a system (preset or custom), a time grid, a scheme
//! and per-command settings. Unknown fields are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::approx::DriftMode;
use crate::coeffs::{
    preset_cbi_thinning, preset_eq11, preset_example21, Eq11Params, Example21Params, SystemSpec,
    ThinningParams,
};
use crate::error::{Error, Result};
use crate::noise::TimeGrid;
use crate::solver::{Scheme, SchemeConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemChoice {
    Eq11(Eq11Params),
    Example21(Example21Params),
    CbiThinning(ThinningParams),
    Custom(SystemSpec),
}

impl SystemChoice {
    pub fn build(&self) -> Result<SystemSpec> {
        let spec = match self {
            SystemChoice::Eq11(p) => preset_eq11(p)?,
            SystemChoice::Example21(p) => preset_example21(p)?,
            SystemChoice::CbiThinning(p) => preset_cbi_thinning(p)?,
            SystemChoice::Custom(s) => s.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Realized,
    NestedMc,
    Deterministic,
}

impl std::str::FromStr for ModeName {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "realized" => Ok(ModeName::Realized),
            "nested-mc" => Ok(ModeName::NestedMc),
            "deterministic" => Ok(ModeName::Deterministic),
            other => Err(format!("unknown mode `{other}` (expected realized, nested-mc or deterministic)")),
        }
    }
}

impl ModeName {
    pub fn with_inner(self, inner: usize) -> DriftMode {
        match self {
            ModeName::Realized => DriftMode::Realized,
            ModeName::NestedMc => DriftMode::NestedMc { inner },
            ModeName::Deterministic => DriftMode::Deterministic,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApproxSettings {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default)]
    pub mode: Option<ModeName>,
    /// Continuations per grid time in nested-mc mode.
    #[serde(default = "default_inner")]
    pub inner: usize,
    /// Added to `M` in the moment bound.
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_levels() -> usize {
    6
}

fn default_inner() -> usize {
    16
}

fn default_margin() -> f64 {
    1e-9
}

impl Default for ApproxSettings {
    fn default() -> Self {
        Self {
            levels: default_levels(),
            mode: None,
            inner: default_inner(),
            margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessSettings {
    /// Step sizes; defaults to the scenario step alone.
    #[serde(default)]
    pub ladder: Vec<f64>,
    #[serde(default)]
    pub ceiling: Option<f64>,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    /// Component whose `ρ` defines the test functions.
    #[serde(default)]
    pub component: usize,
}

fn default_ks() -> Vec<usize> {
    vec![1, 2, 4]
}

impl Default for UniquenessSettings {
    fn default() -> Self {
        Self {
            ladder: Vec::new(),
            ceiling: None,
            ks: default_ks(),
            component: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    #[serde(default)]
    pub name: Option<String>,
    pub horizon: f64,
    /// Noise grid steps; the scheme step defaults to `horizon / steps`.
    pub steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_true")]
    pub clip_at_zero: bool,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub paths: Option<usize>,
    /// Report times; defaults to at most 65 evenly spaced grid points.
    #[serde(default)]
    pub report_times: Option<Vec<f64>>,
    /// Threshold `x_m` of the test-function sequence.
    #[serde(default = "default_xm")]
    pub xm: f64,
    pub system: SystemChoice,
    #[serde(default)]
    pub approx: ApproxSettings,
    #[serde(default)]
    pub uniqueness: UniquenessSettings,
}

fn default_scheme() -> Scheme {
    Scheme::ExplicitEulerClipped
}

fn default_true() -> bool {
    true
}

fn default_xm() -> f64 {
    1.0
}

impl Scenario {
    /// Parse scenario text; `origin` names the source in error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| {
            Error::Scenario(format!("{origin}:{}:{}: {e}", e.line(), e.column()))
        })?;
        if s.schema_version != SCHEMA_VERSION {
            return Err(Error::Scenario(format!(
                "{origin}: unsupported schema_version {} (expected {SCHEMA_VERSION})",
                s.schema_version
            )));
        }
        if !(s.horizon.is_finite() && s.horizon > 0.0) {
            return Err(Error::Scenario(format!("{origin}: horizon must be positive")));
        }
        if s.steps == 0 {
            return Err(Error::Scenario(format!("{origin}: steps must be >= 1")));
        }
        if !(s.xm.is_finite() && s.xm > 0.0) {
            return Err(Error::Scenario(format!("{origin}: xm must be positive")));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn spec(&self) -> Result<SystemSpec> {
        self.system.build()
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::uniform(self.horizon, self.steps)
    }

    pub fn base_step(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn scheme_config(&self, dt: Option<f64>) -> SchemeConfig {
        SchemeConfig {
            scheme: self.scheme,
            step_size: dt.unwrap_or_else(|| self.base_step()),
            clip_at_zero: self.clip_at_zero,
        }
    }

    /// Report times: the declared list, or evenly spaced points of the
    /// scheme grid with `horizon` always included.
    pub fn times(&self, dt: f64) -> Result<Vec<f64>> {
        if let Some(t) = &self.report_times {
            if t.iter().any(|&x| !(0.0..=self.horizon).contains(&x)) {
                return Err(Error::Scenario("report_times must lie in [0, horizon]".into()));
            }
            return Ok(t.clone());
        }
        let steps = (self.horizon / dt).round() as usize;
        let grid = TimeGrid::uniform(self.horizon, steps.max(1))?;
        let stride = steps.div_ceil(64).max(1);
        let mut out: Vec<f64> = (0..=steps).step_by(stride).map(|j| grid.time(j)).collect();
        if out[out.len() - 1] != self.horizon {
            out.push(self.horizon);
        }
        Ok(out)
    }
}
