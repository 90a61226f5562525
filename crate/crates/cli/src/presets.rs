//! Named experiment presets. Each file under `presets/` in the repository
//! is embedded here so `wavetank run <name>` works without a checkout path,
//! and `wavetank presets list` can describe what is available.

use crate::config::{parse_config, ExperimentConfig};
use anyhow::{Context, Result};

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

macro_rules! preset {
    ($name:literal, $summary:literal) => {
        Preset {
            name: $name,
            summary: $summary,
            text: include_str!(concat!("../../../presets/", $name, ".conf")),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("single-monolithic", "one 6x6 linear run over ten periods"),
    preset!("energy-monolithic-linear", "energy traces, monolithic, linear elements"),
    preset!("energy-segregated-linear", "energy traces, segregated, linear elements"),
    preset!("energy-monolithic-quadratic", "energy traces, monolithic, quadratic elements"),
    preset!("energy-segregated-quadratic", "energy traces, segregated, quadratic elements"),
    preset!("period-linear", "period accuracy under refinement, linear elements"),
    preset!("period-cubic-bspline", "period accuracy with six cubic B-spline dofs"),
    preset!("error-linear-fe", "error convergence, linear elements"),
    preset!("error-quadratic-bspline", "error convergence, quadratic B-splines"),
    preset!("error-cubic-bspline", "error convergence, cubic B-splines"),
    preset!("dispersion-cubic-bspline", "phase speed over a depth sweep, cubic B-splines"),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

/// Parse a preset's embedded text into a configuration.
pub fn load(name: &str) -> Result<ExperimentConfig> {
    let preset = find(name)
        .with_context(|| format!("no preset named `{name}`; try `wavetank presets list`"))?;
    parse_config(preset.text).with_context(|| format!("preset `{name}`"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for preset in PRESETS {
            let cfg = load(preset.name).unwrap_or_else(|e| panic!("{}: {e:#}", preset.name));
            assert!(!cfg.out_dir.is_empty());
        }
    }

    #[test]
    fn names_are_unique_and_match_their_out_dirs() {
        for (i, a) in PRESETS.iter().enumerate() {
            for b in &PRESETS[i + 1..] {
                assert_ne!(a.name, b.name);
            }
            let cfg = load(a.name).unwrap();
            assert_eq!(cfg.out_dir, format!("results/{}", a.name));
        }
        assert!(find("definitely-not-a-preset").is_none());
    }
}
