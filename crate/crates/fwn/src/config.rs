//! Run configuration: JSON with exact keys, plus the four named presets.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::oneparticle::{GaugeFunction, Momentum, Scenario};
use crate::{FwnError, Result, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub gamma: Vec<i32>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeConfig {
    pub coefficients: Vec<Coefficient>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FockConfig {
    pub max_particles: usize,
}

impl Default for FockConfig {
    fn default() -> Self {
        Self { max_particles: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub p_values: Vec<f64>,
    pub ladder: Vec<u32>,
    pub rel_tol: f64,
}

impl AnalysisConfig {
    pub fn default_for(dim: usize) -> Self {
        let ladder = if dim == 1 { vec![64, 128, 256, 512, 1024] } else { vec![4, 6, 8, 12, 16] };
        Self { p_values: vec![0.25, 0.5, 0.75, 1.0, 2.0], ladder, rel_tol: 1e-4 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default)]
    pub seed: u64,
    /// Overrides the per-suite default tolerance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Scenario,
    #[serde(default)]
    gauge: Option<GaugeConfig>,
    #[serde(default)]
    fock: Option<FockConfig>,
    #[serde(default)]
    analysis: Option<AnalysisConfig>,
    #[serde(default)]
    verify: Option<VerifyConfig>,
}

/// Validated configuration. Missing sections take the defaults of the torus dimension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub gauge: GaugeConfig,
    pub fock: FockConfig,
    pub analysis: AnalysisConfig,
    pub verify: VerifyConfig,
}

pub const PRESETS: [&str; 4] = ["massive1d", "massless1d", "massive3d", "massless3d"];

fn gauge_config(g: &GaugeFunction) -> GaugeConfig {
    GaugeConfig {
        coefficients: g
            .support()
            .map(|(m, c)| Coefficient { gamma: m.components(g.dim()), re: c.re, im: c.im })
            .collect(),
    }
}

impl RunConfig {
    pub fn from_scenario(scenario: Scenario) -> Self {
        let dim = scenario.dim();
        Self {
            gauge: gauge_config(&GaugeFunction::default_for(dim)),
            fock: FockConfig::default(),
            analysis: AnalysisConfig::default_for(dim),
            verify: VerifyConfig::default(),
            scenario,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let sc = match name {
            "massive1d" => Scenario::new(1, 2.0, 2.0, 8)?,
            "massless1d" => Scenario::new(1, 0.0, 2.0, 8)?,
            "massive3d" => Scenario::new(3, 2.0, 2.0, 3)?,
            "massless3d" => Scenario::new(3, 0.0, 2.0, 3)?,
            _ => return Err(FwnError::Config(format!("unknown preset {name:?}; expected one of {PRESETS:?}"))),
        };
        Ok(Self::from_scenario(sc))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig = serde_json::from_str(text).map_err(|e| FwnError::Config(e.to_string()))?;
        raw.scenario.validate()?;
        let dim = raw.scenario.dim();
        let cfg = Self {
            gauge: raw.gauge.unwrap_or_else(|| gauge_config(&GaugeFunction::default_for(dim))),
            fock: raw.fock.unwrap_or_default(),
            analysis: raw.analysis.unwrap_or_else(|| AnalysisConfig::default_for(dim)),
            verify: raw.verify.unwrap_or_default(),
            scenario: raw.scenario,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a JSON file, or a preset given as `preset:<name>`.
    pub fn load(path: &str) -> Result<Self> {
        if let Some(name) = path.strip_prefix("preset:") {
            return Self::preset(name);
        }
        let text = std::fs::read_to_string(Path::new(path))
            .map_err(|e| FwnError::Config(format!("cannot read {path}: {e}")))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.gauge_function()?;
        if self.fock.max_particles == 0 {
            return Err(FwnError::Config("fock.max_particles must be ≥ 1".into()));
        }
        let a = &self.analysis;
        if a.ladder.len() < 4 || a.ladder.windows(2).any(|w| w[1] <= w[0]) || a.ladder[0] == 0 {
            return Err(FwnError::Config("analysis.ladder needs ≥ 4 strictly increasing positive cutoffs".into()));
        }
        if a.p_values.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(FwnError::Config("analysis.p_values must be finite and ≥ 0".into()));
        }
        if !(a.rel_tol > 0.0 && a.rel_tol.is_finite()) {
            return Err(FwnError::Config("analysis.rel_tol must be > 0".into()));
        }
        if let Some(t) = self.verify.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(FwnError::Config("verify.tol must be > 0".into()));
            }
        }
        Ok(())
    }

    pub fn gauge_function(&self) -> Result<GaugeFunction> {
        let dim = self.scenario.dim();
        let mut coeffs = Vec::with_capacity(self.gauge.coefficients.len());
        for c in &self.gauge.coefficients {
            if c.gamma.len() != dim {
                return Err(FwnError::Config(format!(
                    "gauge coefficient gamma {:?} must have {dim} components",
                    c.gamma
                )));
            }
            coeffs.push((Momentum::from_slice(&c.gamma)?, C64::new(c.re, c.im)));
        }
        GaugeFunction::new(dim, coeffs).map_err(|e| FwnError::Config(e.to_string()))
    }
}
