use super::{ScenarioConfig, ScenarioError};

const PRESETS: &[(&str, &str)] = &[
    (
        "lab_cavity",
        include_str!("../../../../presets/lab_cavity.json"),
    ),
    (
        "magnetar",
        include_str!("../../../../presets/magnetar.json"),
    ),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// The shipped JSON text of a preset.
pub fn preset_source(name: &str) -> Result<&'static str, ScenarioError> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, s)| *s)
        .ok_or_else(|| ScenarioError::UnknownPreset(name.to_string()))
}

pub fn preset(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    ScenarioConfig::from_json(preset_source(name)?)
}
