//! Experiment configuration: a flat `key = value` text format, fully
//! resolved into a serializable struct.
//!
//! Parsing fills every omitted key with its default, so the struct written
//! to the run manifest is the complete record of what was run; re-parsing
//! that manifest yields an identical configuration.

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use wavetank::basis::BasisKind;
use wavetank::formulation::FormulationKind;

/// What a configuration asks the driver to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    /// One simulation on one mesh: energy trace and probe signal.
    Single,
    /// Energy traces over a list of meshes.
    EnergyTrace,
    /// Measured wave period over a list of meshes.
    PeriodConvergence,
    /// Formulation-norm error against the analytic wave over meshes.
    ErrorConvergence,
    /// Phase speed against the dispersion relation over a depth sweep.
    Dispersion,
}

impl ExperimentKind {
    pub fn is_sweep(self) -> bool {
        !matches!(self, Self::Single)
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "single" => Self::Single,
            "energy-trace" => Self::EnergyTrace,
            "period-convergence" => Self::PeriodConvergence,
            "error-convergence" => Self::ErrorConvergence,
            "dispersion" => Self::Dispersion,
            other => bail!(
                "unknown experiment `{other}` (expected single, energy-trace, \
                 period-convergence, error-convergence or dispersion)"
            ),
        })
    }
}

/// Formulation names as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    Monolithic,
    Reduced,
    Segregated,
    SegregatedLm,
}

impl Formulation {
    pub fn to_core(self) -> FormulationKind {
        match self {
            Self::Monolithic => FormulationKind::Monolithic,
            Self::Reduced => FormulationKind::Reduced,
            Self::Segregated => FormulationKind::Segregated,
            Self::SegregatedLm => FormulationKind::SegregatedLm,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "monolithic" => Self::Monolithic,
            "reduced" => Self::Reduced,
            "segregated" => Self::Segregated,
            "segregated-lm" => Self::SegregatedLm,
            other => bail!(
                "unknown formulation `{other}` (expected monolithic, reduced, \
                 segregated or segregated-lm)"
            ),
        })
    }
}

/// Basis families as they appear in config files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Basis {
    Lagrange,
    Bspline,
}

impl Basis {
    pub fn to_core(self) -> BasisKind {
        match self {
            Self::Lagrange => BasisKind::Lagrange,
            Self::Bspline => BasisKind::BSpline,
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "lagrange" => Self::Lagrange,
            "bspline" => Self::Bspline,
            other => bail!("unknown basis `{other}` (expected lagrange or bspline)"),
        })
    }
}

/// How the time step (and possibly the run length) is chosen.
///
/// * `coupled` — mesh-coupled rule `h/lambda = 10 dt/T_ex`, with the step
///   halved once per basis degree above linear.
/// * `fixed:<seconds>` — explicit step size.
/// * `fixed:T/<n>` — the run duration divided into `n` equal steps.
/// * `periods-per-run:<n>` — coupled step rule, run length pinned to `n`
///   expected periods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TimestepPolicy {
    Coupled,
    FixedSeconds(f64),
    FixedFraction(u32),
    PeriodsPerRun(u32),
}

impl FromStr for TimestepPolicy {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "coupled" {
            return Ok(Self::Coupled);
        }
        if let Some(rest) = s.strip_prefix("periods-per-run:") {
            let n: u32 = rest.parse().context("periods-per-run wants an integer count")?;
            if n == 0 {
                bail!("periods-per-run needs at least one period");
            }
            return Ok(Self::PeriodsPerRun(n));
        }
        if let Some(rest) = s.strip_prefix("fixed:") {
            if let Some(den) = rest.strip_prefix("T/") {
                let n: u32 = den.parse().context("fixed:T/<n> wants an integer divisor")?;
                if n == 0 {
                    bail!("fixed:T/<n> needs a positive divisor");
                }
                return Ok(Self::FixedFraction(n));
            }
            let dt: f64 = rest.parse().context("fixed:<dt> wants a number of seconds")?;
            if !(dt > 0.0 && dt.is_finite()) {
                bail!("fixed time step must be positive, got {dt}");
            }
            return Ok(Self::FixedSeconds(dt));
        }
        bail!(
            "unknown timestep policy `{s}` (expected coupled, fixed:<dt>, fixed:T/<n> \
             or periods-per-run:<n>)"
        )
    }
}

impl fmt::Display for TimestepPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Coupled => write!(f, "coupled"),
            Self::FixedSeconds(dt) => write!(f, "fixed:{dt}"),
            Self::FixedFraction(n) => write!(f, "fixed:T/{n}"),
            Self::PeriodsPerRun(n) => write!(f, "periods-per-run:{n}"),
        }
    }
}

impl TryFrom<String> for TimestepPolicy {
    type Error = anyhow::Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TimestepPolicy> for String {
    fn from(p: TimestepPolicy) -> String {
        p.to_string()
    }
}

/// A fully resolved experiment description. Every field has a value; the
/// struct is what the manifest echoes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub formulation: Formulation,
    pub basis: Basis,
    pub degree: usize,
    /// Elements per direction, one entry per sweep point.
    pub meshes: Vec<usize>,
    pub gravity: f64,
    /// Domain length; the wave spans it with one wavelength.
    pub length: f64,
    /// Water depth (ignored by the dispersion sweep, which sets its own).
    pub depth: f64,
    pub amplitude: f64,
    /// Run length in expected periods (energy, period and dispersion runs).
    pub periods: f64,
    /// Run length as a fraction of the expected period (error runs).
    pub duration_fraction: f64,
    /// Depth sweep for the dispersion experiment, as `k H` values.
    pub kh_values: Vec<f64>,
    pub timestep: TimestepPolicy,
    /// Where the surface elevation is sampled each step.
    pub probe_x: f64,
    /// Linear-solver tolerance.
    pub tol: f64,
    pub out_dir: String,
}

fn default_meshes(kind: ExperimentKind) -> Vec<usize> {
    match kind {
        ExperimentKind::Single => vec![6],
        ExperimentKind::EnergyTrace | ExperimentKind::PeriodConvergence => vec![6, 12, 24],
        ExperimentKind::ErrorConvergence => vec![4, 8, 16, 32],
        ExperimentKind::Dispersion => vec![8],
    }
}

struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`, got `{line}`", idx + 1))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if value.is_empty() {
                bail!("line {}: key `{key}` has no value", idx + 1);
            }
            if let Some((first_line, _)) = entries.get(&key) {
                bail!("line {}: key `{key}` already set on line {first_line}", idx + 1);
            }
            entries.insert(key, (idx + 1, value));
        }
        Ok(Self { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key).map(|(_, v)| v)
    }

    fn take_parsed<T, F>(&mut self, key: &str, parse: F) -> Result<Option<T>>
    where
        F: FnOnce(&str) -> Result<T>,
    {
        match self.take(key) {
            Some(v) => Ok(Some(parse(&v).with_context(|| format!("key `{key}`"))?)),
            None => Ok(None),
        }
    }

    fn finish(self) -> Result<()> {
        if let Some((key, (line, _))) = self.entries.into_iter().next() {
            bail!("line {line}: unknown key `{key}`");
        }
        Ok(())
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s.parse().with_context(|| format!("`{s}` is not a number"))?;
    Ok(v)
}

fn parse_positive(s: &str) -> Result<f64> {
    let v = parse_f64(s)?;
    if !(v > 0.0 && v.is_finite()) {
        bail!("`{s}` must be positive and finite");
    }
    Ok(v)
}

fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|item| {
            let n: usize = item.trim().parse().with_context(|| format!("`{item}` in list"))?;
            if n == 0 {
                bail!("mesh sizes must be at least 1");
            }
            Ok(n)
        })
        .collect()
}

fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|item| parse_positive(item.trim()))
        .collect()
}

/// Parse the text form and fill in defaults. The default amplitude is one
/// hundredth of the wavelength; run lengths default to 10 periods (80 for
/// the dispersion sweep); the error study defaults to an eighth of a period
/// split into 1000 steps.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;
    let experiment = raw
        .take_parsed("experiment", ExperimentKind::parse)?
        .ok_or_else(|| anyhow!("missing required key `experiment`"))?;

    let formulation =
        raw.take_parsed("formulation", Formulation::parse)?.unwrap_or(Formulation::Monolithic);
    let basis = raw.take_parsed("basis", Basis::parse)?.unwrap_or(Basis::Lagrange);
    let degree = raw
        .take_parsed("degree", |s| {
            let d: usize = s.parse().context("degree must be an integer")?;
            if !(1..=wavetank::basis::MAX_DEGREE).contains(&d) {
                bail!("degree must lie in 1..={}", wavetank::basis::MAX_DEGREE);
            }
            Ok(d)
        })?
        .unwrap_or(1);
    let meshes = raw
        .take_parsed("meshes", |s| parse_usize_list(s))?
        .unwrap_or_else(|| default_meshes(experiment));
    if meshes.is_empty() {
        bail!("key `meshes`: at least one mesh size is required");
    }
    let gravity = raw.take_parsed("gravity", parse_positive)?.unwrap_or(9.81);
    let length = raw.take_parsed("length", parse_positive)?.unwrap_or(1.0);
    let depth = raw.take_parsed("depth", parse_positive)?.unwrap_or(1.0);
    let amplitude = raw.take_parsed("amplitude", parse_positive)?.unwrap_or(0.01 * length);
    let periods = raw.take_parsed("periods", parse_positive)?.unwrap_or(
        if experiment == ExperimentKind::Dispersion { 80.0 } else { 10.0 },
    );
    let duration_fraction =
        raw.take_parsed("duration-fraction", parse_positive)?.unwrap_or(0.125);
    let kh_values = raw
        .take_parsed("kh-values", |s| parse_f64_list(s))?
        .unwrap_or_else(|| vec![0.5, 1.0, 2.0, 4.0, 6.0]);
    let timestep = raw.take_parsed("timestep", |s| s.parse())?.unwrap_or(
        if experiment == ExperimentKind::ErrorConvergence {
            TimestepPolicy::FixedFraction(1000)
        } else {
            TimestepPolicy::Coupled
        },
    );
    let probe_x = raw.take_parsed("probe-x", parse_f64)?.unwrap_or(0.0);
    let tol = raw.take_parsed("tol", parse_positive)?.unwrap_or(1e-12);
    let out_dir = raw.take("out-dir").unwrap_or_else(|| "out".to_string());
    raw.finish()?;

    let config = ExperimentConfig {
        experiment,
        formulation,
        basis,
        degree,
        meshes,
        gravity,
        length,
        depth,
        amplitude,
        periods,
        duration_fraction,
        kh_values,
        timestep,
        probe_x,
        tol,
        out_dir,
    };
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ExperimentConfig) -> Result<()> {
    if config.probe_x < 0.0 || config.probe_x > config.length {
        bail!(
            "probe-x = {} lies outside the domain [0, {}]",
            config.probe_x,
            config.length
        );
    }
    if config.experiment == ExperimentKind::Dispersion && config.kh_values.is_empty() {
        bail!("dispersion sweep needs at least one kh value");
    }
    let needs_refinement = matches!(
        config.experiment,
        ExperimentKind::PeriodConvergence | ExperimentKind::ErrorConvergence
    );
    if needs_refinement && config.meshes.windows(2).any(|w| w[1] <= w[0]) {
        bail!("convergence experiments need strictly increasing mesh sizes, got {:?}", config.meshes);
    }
    for &n in &config.meshes {
        let enough = match config.basis {
            // A periodic spline of degree p needs p+1 elements.
            Basis::Bspline => n >= config.degree + 1,
            Basis::Lagrange => n >= 2,
        };
        if !enough {
            bail!(
                "mesh of {n} elements is too coarse for a periodic {:?} basis of degree {}",
                config.basis,
                config.degree
            );
        }
    }
    Ok(())
}
