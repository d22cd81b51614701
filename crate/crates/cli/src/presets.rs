//! Built-in experiment protocols.

use crate::config::ExperimentConfig;
use crate::error::RunError;

/// `(name, TOML source)` of every preset.
pub const PRESETS: [(&str, &str); 4] = [
    ("effect-of-m", include_str!("../presets/effect-of-m.toml")),
    ("optimal-subsample", include_str!("../presets/optimal-subsample.toml")),
    ("lambda-c-heatmap", include_str!("../presets/lambda-c-heatmap.toml")),
    ("huber-heatmap", include_str!("../presets/huber-heatmap.toml")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

pub fn source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

pub fn preset(name: &str) -> Result<ExperimentConfig, RunError> {
    let text = source(name).ok_or_else(|| RunError::Config {
        field: "preset".into(),
        message: format!("unknown preset {name:?}; expected one of {}", names().collect::<Vec<_>>().join(", ")),
    })?;
    ExperimentConfig::from_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::validate;

    #[test]
    fn presets_parse_and_validate() {
        for name in names() {
            let cfg = preset(name).unwrap();
            assert!(validate(&cfg).iter().all(|d| !d.is_error()), "{name}: {:?}", validate(&cfg));
        }
        assert!(preset("nope").is_err());
    }
}
