//! Bundled scenario presets, one per bound regime.

use crate::config::RunConfig;
use crate::CliError;

pub const PRESETS: [(&str, &str); 8] = [
    (
        "coercive-cooperative",
        include_str!("../presets/coercive-cooperative.json"),
    ),
    (
        "coercive-competitive",
        include_str!("../presets/coercive-competitive.json"),
    ),
    (
        "noncoercive-competitive",
        include_str!("../presets/noncoercive-competitive.json"),
    ),
    (
        "large-exponent",
        include_str!("../presets/large-exponent.json"),
    ),
    (
        "threshold-exponent",
        include_str!("../presets/threshold-exponent.json"),
    ),
    (
        "generalized-alpha",
        include_str!("../presets/generalized-alpha.json"),
    ),
    ("extinction", include_str!("../presets/extinction.json")),
    (
        "seasonal-cooperative",
        include_str!("../presets/seasonal-cooperative.json"),
    ),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn load(name: &str) -> Result<RunConfig, CliError> {
    let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
        CliError::Config(vec![format!(
            "unknown preset '{name}' (available: {})",
            names().collect::<Vec<_>>().join(", ")
        )])
    })?;
    RunConfig::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_loads() {
        for name in names() {
            let c = load(name).unwrap();
            assert!(c.problem.inline.is_some(), "{name}");
            c.spec().unwrap();
        }
    }
}
