//! Scenario files: the JSON configuration schema, invariant checks that
//! report every violation at once, shipped presets and the end-to-end
//! pipeline that writes result files.
//!
//! Units at this boundary are gauss, meters, radians, eV and GeV^-1; they
//! are converted to natural units once, in [`Scenario::from_config`].

mod presets;
mod run;

pub use presets::{preset, preset_names, preset_source};
pub use run::{run, RunSummary, OUTPUT_FILES};

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::Error as PhysicsError;
use crate::field_ray::{IndexModel, LinearFieldProfile};
use crate::mixing::MediumParams;
use crate::profile::GaussianBeam;
use crate::units;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario:\n{0}")]
    Invalid(ValidationReport),
    #[error("{context}: {source}")]
    Physics {
        context: &'static str,
        #[source]
        source: PhysicsError,
    },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

impl ScenarioError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub(crate) trait PhysicsContext<T> {
    fn context(self, context: &'static str) -> Result<T, ScenarioError>;
}

impl<T> PhysicsContext<T> for Result<T, PhysicsError> {
    fn context(self, context: &'static str) -> Result<T, ScenarioError> {
        self.map_err(|source| ScenarioError::Physics { context, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    LabCavity,
    Magnetar,
    Custom,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::LabCavity => "lab_cavity",
            ScenarioName::Magnetar => "magnetar",
            ScenarioName::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wavelength_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_ev: Option<f64>,
    pub g_a_gev_inv: f64,
    pub m_a_ev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub b0_gauss: f64,
    pub b1_gauss_per_m: f64,
    #[serde(default)]
    pub y0_m: f64,
    pub y_min_m: f64,
    pub y_max_m: f64,
}

fn default_samples() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RayConfig {
    /// Path length through the field per pass, m.
    pub length_m: f64,
    #[serde(default)]
    pub index_model: IndexModel,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedWeights {
    /// `(1/2, 1/2)`
    Equal,
    /// `(cos^2 phi, sin^2 phi)`
    Mixing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SplitWeights {
    Named(NamedWeights),
    Pair([f64; 2]),
}

impl Default for SplitWeights {
    fn default() -> Self {
        SplitWeights::Named(NamedWeights::Equal)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedLoss {
    /// `sin^2 phi` per bounce
    Mixing,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LossSetting {
    Named(NamedLoss),
    Fraction(f64),
}

impl Default for LossSetting {
    fn default() -> Self {
        LossSetting::Named(NamedLoss::Mixing)
    }
}

fn default_per_decade() -> usize {
    crate::cavity::DEFAULT_CHECKPOINTS_PER_DECADE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub passes: usize,
    #[serde(default)]
    pub split_weights: SplitWeights,
    #[serde(default)]
    pub axion_loss: LossSetting,
    #[serde(default = "default_per_decade")]
    pub checkpoints_per_decade: usize,
}

fn default_power() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    pub waist_sigma_m: f64,
    #[serde(default = "default_power")]
    pub total_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulationSection {
    pub gain: f64,
}

/// On-disk scenario document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub medium: MediumConfig,
    pub field: FieldConfig,
    pub ray: RayConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cavity: Option<CavitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam: Option<BeamSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modulation: Option<ModulationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<String>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every declared invariant and returns all violations.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::default();
        let m = &self.medium;
        match (m.wavelength_m, m.omega_ev) {
            (Some(_), Some(_)) | (None, None) => r.push(
                "medium",
                "MediumParams.omega",
                "give exactly one of wavelength_m or omega_ev",
            ),
            (Some(l), None) => r.positive("medium.wavelength_m", "MediumParams.omega", l),
            (None, Some(w)) => r.positive("medium.omega_ev", "MediumParams.omega", w),
        }
        r.non_negative("medium.g_a_gev_inv", "MediumParams.g_a", m.g_a_gev_inv);
        r.non_negative("medium.m_a_ev", "MediumParams.m_a", m.m_a_ev);

        let f = &self.field;
        r.non_negative("field.b0_gauss", "LinearFieldProfile.b0", f.b0_gauss);
        r.finite(
            "field.b1_gauss_per_m",
            "LinearFieldProfile.b1",
            f.b1_gauss_per_m,
        );
        let bounds_ok = [f.y0_m, f.y_min_m, f.y_max_m].iter().all(|v| v.is_finite());
        if !bounds_ok {
            r.push(
                "field",
                "LinearFieldProfile.domain",
                "y0_m, y_min_m, y_max_m must be finite",
            );
        } else if f.y_min_m > f.y_max_m {
            r.push(
                "field.y_min_m",
                "LinearFieldProfile.domain",
                "y_min_m must not exceed y_max_m",
            );
        } else {
            if !(f.y_min_m..=f.y_max_m).contains(&f.y0_m) {
                r.push(
                    "field.y0_m",
                    "LinearFieldProfile.y0",
                    "reference point must lie in [y_min_m, y_max_m]",
                );
            }
            if f.b0_gauss.is_finite() && f.b1_gauss_per_m.is_finite() {
                for (path, y) in [("field.y_min_m", f.y_min_m), ("field.y_max_m", f.y_max_m)] {
                    if f.b0_gauss + f.b1_gauss_per_m * (y - f.y0_m) < 0.0 {
                        r.push(
                            path,
                            "LinearFieldProfile.domain",
                            "field B(y) becomes negative inside the domain",
                        );
                    }
                }
            }
        }

        r.positive(
            "ray.length_m",
            "CavityConfig.pass_length",
            self.ray.length_m,
        );
        if self.ray.samples == 0 {
            r.push("ray.samples", "Trajectory.samples", "must be >= 1");
        }

        if let Some(c) = &self.cavity {
            if c.passes == 0 {
                r.push("cavity.passes", "CavityConfig.passes", "must be >= 1");
            }
            if c.checkpoints_per_decade == 0 {
                r.push(
                    "cavity.checkpoints_per_decade",
                    "SpreadReport.checkpoints",
                    "must be >= 1",
                );
            }
            if let SplitWeights::Pair([a, b]) = c.split_weights {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                    r.push(
                        "cavity.split_weights",
                        "CavityConfig.split_weights",
                        "weights must be >= 0",
                    );
                } else if ((a + b) - 1.0).abs() > 1e-12 {
                    r.push(
                        "cavity.split_weights",
                        "CavityConfig.split_weights",
                        "weights must sum to 1",
                    );
                }
            }
            if let LossSetting::Fraction(x) = c.axion_loss {
                if !(x.is_finite() && (0.0..1.0).contains(&x)) {
                    r.push(
                        "cavity.axion_loss",
                        "CavityConfig.axion_loss",
                        "must lie in [0, 1)",
                    );
                }
            }
        }
        if let Some(b) = &self.beam {
            r.positive(
                "beam.waist_sigma_m",
                "GaussianBeam.waist_sigma",
                b.waist_sigma_m,
            );
            r.positive(
                "beam.total_power",
                "GaussianBeam.total_power",
                b.total_power,
            );
        }
        if let Some(m) = &self.modulation {
            if !(m.gain.is_finite() && m.gain >= 1.0) {
                r.push("modulation.gain", "ModulationReport.gain", "must be >= 1");
            }
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    /// Location in the scenario document.
    pub path: String,
    /// Domain type and field whose invariant is violated.
    pub target: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    fn push(&mut self, path: &str, target: &str, message: &str) {
        self.findings.push(Finding {
            path: path.to_string(),
            target: target.to_string(),
            message: message.to_string(),
        });
    }

    fn positive(&mut self, path: &str, target: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.push(path, target, &format!("must be finite and > 0, got {v}"));
        }
    }

    fn non_negative(&mut self, path: &str, target: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.push(path, target, &format!("must be finite and >= 0, got {v}"));
        }
    }

    fn finite(&mut self, path: &str, target: &str, v: f64) {
        if !v.is_finite() {
            self.push(path, target, "must be finite");
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.findings.is_empty() {
            return writeln!(f, "valid (0 findings)");
        }
        for x in &self.findings {
            writeln!(f, "  {} [{}]: {}", x.path, x.target, x.message)?;
        }
        Ok(())
    }
}

/// Parses and checks a scenario file. Parse and I/O failures are errors;
/// invariant violations are returned in the report.
pub fn validate_file(path: &Path) -> Result<ValidationReport, ScenarioError> {
    Ok(ScenarioConfig::load(path)?.validate())
}

/// Cavity settings whose deflection is fixed later by the physics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityPlan {
    pub passes: usize,
    pub split_weights: SplitWeights,
    pub axion_loss: LossSetting,
    pub checkpoints_per_decade: usize,
}

/// A validated scenario in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: ScenarioName,
    pub config: ScenarioConfig,
    pub medium: MediumParams,
    pub field: LinearFieldProfile,
    pub length: f64,
    pub index_model: IndexModel,
    pub samples: usize,
    pub cavity: Option<CavityPlan>,
    pub beam: Option<GaussianBeam>,
    pub gain: Option<f64>,
}

impl Scenario {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self, ScenarioError> {
        let report = config.validate();
        if !report.is_valid() {
            return Err(ScenarioError::Invalid(report));
        }
        let m = &config.medium;
        let omega = match (m.wavelength_m, m.omega_ev) {
            (Some(l), _) => units::wavelength_to_omega(l).context("photon energy")?,
            (None, Some(w)) => w,
            (None, None) => unreachable!("validated"),
        };
        let b0 = units::gauss_to_natural(config.field.b0_gauss).context("field")?;
        let b1 =
            units::gradient_to_natural(config.field.b1_gauss_per_m).context("field gradient")?;
        let medium = MediumParams::new(
            omega,
            b0,
            units::coupling_to_natural(m.g_a_gev_inv).context("coupling")?,
            m.m_a_ev,
        )
        .context("medium")?;
        let f = &config.field;
        let field = LinearFieldProfile::new(b0, b1, f.y0_m, f.y_min_m, f.y_max_m)
            .context("field profile")?;
        Ok(Scenario {
            name: config.name,
            config: config.clone(),
            medium,
            field,
            length: config.ray.length_m,
            index_model: config.ray.index_model,
            samples: config.ray.samples,
            cavity: config.cavity.as_ref().map(|c| CavityPlan {
                passes: c.passes,
                split_weights: c.split_weights,
                axion_loss: c.axion_loss,
                checkpoints_per_decade: c.checkpoints_per_decade,
            }),
            beam: config
                .beam
                .as_ref()
                .map(|b| GaussianBeam::new(b.waist_sigma_m, b.total_power))
                .transpose()
                .context("beam")?,
            gain: config.modulation.as_ref().map(|m| m.gain),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lab() -> ScenarioConfig {
        preset("lab_cavity").unwrap()
    }

    #[test]
    fn presets_are_valid() {
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            assert!(cfg.validate().is_valid(), "{name}: {}", cfg.validate());
            assert_eq!(cfg.name.as_str(), name);
        }
    }

    #[test]
    fn negative_omega_single_finding() {
        let mut cfg = lab();
        cfg.medium.wavelength_m = None;
        cfg.medium.omega_ev = Some(-1.0);
        let r = cfg.validate();
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.findings[0].target, "MediumParams.omega");
    }

    #[test]
    fn weights_must_sum_to_one() {
        let mut cfg = lab();
        cfg.cavity.as_mut().unwrap().split_weights = SplitWeights::Pair([0.7, 0.7]);
        let r = cfg.validate();
        assert_eq!(r.findings.len(), 1);
        assert!(r.findings[0].message.contains("sum to 1"));
    }

    #[test]
    fn all_violations_are_reported() {
        let mut cfg = lab();
        cfg.medium.g_a_gev_inv = -1.0;
        cfg.ray.length_m = 0.0;
        cfg.beam.as_mut().unwrap().waist_sigma_m = 0.0;
        cfg.modulation.as_mut().unwrap().gain = 0.5;
        cfg.field.y_min_m = -10.0;
        let r = cfg.validate();
        let targets: Vec<_> = r.findings.iter().map(|f| f.target.as_str()).collect();
        assert_eq!(
            targets,
            [
                "MediumParams.g_a",
                "LinearFieldProfile.domain",
                "CavityConfig.pass_length",
                "GaussianBeam.waist_sigma",
                "ModulationReport.gain"
            ]
        );
    }

    #[test]
    fn parse_errors_are_distinct_from_findings() {
        assert!(matches!(
            ScenarioConfig::from_json("{\"name\": \"lab_cavity\"}"),
            Err(ScenarioError::Parse(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_json("not json"),
            Err(ScenarioError::Parse(_))
        ));
    }

    #[test]
    fn weight_and_loss_spellings() {
        let w: SplitWeights = serde_json::from_str("\"mixing\"").unwrap();
        assert_eq!(w, SplitWeights::Named(NamedWeights::Mixing));
        let w: SplitWeights = serde_json::from_str("[0.25, 0.75]").unwrap();
        assert_eq!(w, SplitWeights::Pair([0.25, 0.75]));
        let l: LossSetting = serde_json::from_str("\"none\"").unwrap();
        assert_eq!(l, LossSetting::Named(NamedLoss::None));
        let l: LossSetting = serde_json::from_str("0.01").unwrap();
        assert_eq!(l, LossSetting::Fraction(0.01));
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = lab();
        assert_eq!(ScenarioConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn scenario_converts_units_once() {
        let s = Scenario::from_config(&lab()).unwrap();
        assert!((s.medium.omega - 1.239_841_983_959_394).abs() < 1e-12);
        assert!((s.medium.g_a - 1e-19).abs() < 1e-30);
        assert!((s.field.b0 - 1_953.527_711_405_956).abs() < 1e-9);
    }
}
