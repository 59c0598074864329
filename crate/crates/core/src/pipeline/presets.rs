use super::PipelineConfig;
use crate::error::{Error, Result};

const PRESETS: &[(&str, &str)] = &[
    ("fig1b", include_str!("../../presets/fig1b.conf")),
    ("fig1c", include_str!("../../presets/fig1c.conf")),
    ("fig2b", include_str!("../../presets/fig2b.conf")),
    ("fig2c", include_str!("../../presets/fig2c.conf")),
    ("fig3", include_str!("../../presets/fig3.conf")),
    ("fig3d", include_str!("../../presets/fig3d.conf")),
    ("fig4b", include_str!("../../presets/fig4b.conf")),
    ("fig4c", include_str!("../../presets/fig4c.conf")),
];

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn preset(name: &str) -> Result<PipelineConfig> {
    let text = preset_text(name).ok_or_else(|| {
        Error::Config(format!(
            "unknown preset `{name}` (available: {})",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    PipelineConfig::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for name in preset_names() {
            preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
        assert!(preset("fig9").is_err());
    }
}
