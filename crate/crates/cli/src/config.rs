//! Scenario configuration documents and their merge with command-line flags.

use std::path::{Path, PathBuf};

use plc_capacity::scenario::{scenario_preset, ScenarioSpec};
use plc_capacity::spectra::DEFAULT_N_OMEGA;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MC_SAMPLES: usize = 200_000;
const MAX_SNR_POINTS: usize = 100_000;

/// Top-level configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema: u32,
    /// Built-in scenario or noise preset name; exclusive with `scenario`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub output: Output,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub snr_db: SnrSpec,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            snr_db: SnrSpec::Range {
                start: 0.0,
                step: 2.0,
                stop: 30.0,
            },
        }
    }
}

/// SNR grid in dB: a list, an inclusive range, or the `A:STEP:B` text form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSpec {
    List(Vec<f64>),
    Range { start: f64, step: f64, stop: f64 },
    Text(String),
}

impl SnrSpec {
    pub fn values(&self) -> Result<Vec<f64>, String> {
        let out = match self {
            SnrSpec::List(v) => v.clone(),
            SnrSpec::Range { start, step, stop } => range(*start, *step, *stop)?,
            SnrSpec::Text(t) => return parse_snr(t),
        };
        if out.is_empty() {
            return Err("empty SNR grid".into());
        }
        if let Some(v) = out.iter().find(|v| !v.is_finite()) {
            return Err(format!("SNR value {v} is not finite"));
        }
        Ok(out)
    }
}

fn range(start: f64, step: f64, stop: f64) -> Result<Vec<f64>, String> {
    if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
        return Err("SNR range bounds must be finite".into());
    }
    if start == stop {
        return Ok(vec![start]);
    }
    if !(step > 0.0) || stop < start {
        return Err(format!("SNR range {start}:{step}:{stop} needs step > 0 and stop >= start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > MAX_SNR_POINTS {
        return Err(format!("SNR range has {count} points, limit {MAX_SNR_POINTS}"));
    }
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}

/// Parses `A:STEP:B` or a comma-separated list.
pub fn parse_snr(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad SNR value `{}`", s.trim()))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let out = match parts.as_slice() {
        [a, step, b] => range(num(a)?, num(step)?, num(b)?)?,
        [_] => text.split(',').map(num).collect::<Result<_, _>>()?,
        _ => return Err(format!("SNR grid `{text}` is neither A:STEP:B nor a list")),
    };
    SnrSpec::List(out).values()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    #[serde(default = "default_n_omega")]
    pub n_omega: usize,
    /// Seed for validation inputs and Monte Carlo sampling.
    #[serde(default)]
    pub seed: u64,
    /// Forced lifting period.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per: Option<usize>,
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
}

fn default_n_omega() -> usize {
    DEFAULT_N_OMEGA
}

fn default_mc_samples() -> usize {
    DEFAULT_MC_SAMPLES
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            n_omega: DEFAULT_N_OMEGA,
            seed: 0,
            per: None,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Output {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
}

/// Command-line values that override the configuration document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub snr: Option<String>,
    pub n_omega: Option<usize>,
    pub seed: Option<u64>,
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub svg: Option<PathBuf>,
}

/// Everything a command needs after merging config and flags.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Preset name, or "config" for an inline scenario.
    pub name: String,
    pub scenario: ScenarioSpec,
    pub snr_db: Vec<f64>,
    pub numerics: Numerics,
    pub output: Output,
}

/// Parses a configuration document, reporting the failing field path and
/// position.
pub fn parse_config(text: &str, origin: &str) -> Result<Config, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let field = if path == "." { String::new() } else { format!(" field `{path}`:") };
        // serde_json appends "at line L column C".
        CliError::Config(format!("{origin}:{field} {inner}"))
    })?;
    if config.schema != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "{origin}: unsupported schema {} (expected {SCHEMA_VERSION})",
            config.schema
        )));
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<Config, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

pub fn resolve(config: Option<Config>, ov: Overrides) -> Result<Resolved, CliError> {
    let config = config.unwrap_or(Config {
        schema: SCHEMA_VERSION,
        preset: None,
        scenario: None,
        sweep: Sweep::default(),
        numerics: Numerics::default(),
        output: Output::default(),
    });
    if config.preset.is_some() && config.scenario.is_some() {
        return Err(CliError::Config(
            "give either `preset` or `scenario` in the config, not both".into(),
        ));
    }
    let (name, scenario) = match (ov.preset.or(config.preset), config.scenario) {
        (Some(p), _) => {
            let spec = scenario_preset(&p).ok_or_else(|| CliError::Config(format!("unknown preset `{p}`")))?;
            (p, spec)
        }
        (None, Some(s)) => ("config".to_string(), s),
        (None, None) => {
            return Err(CliError::Config(
                "no scenario: pass --preset or --config with `preset` or `scenario`".into(),
            ))
        }
    };
    let snr_db = match ov.snr {
        Some(text) => parse_snr(&text),
        None => config.sweep.snr_db.values(),
    }
    .map_err(CliError::Config)?;
    let mut numerics = config.numerics;
    if let Some(n) = ov.n_omega {
        numerics.n_omega = n;
    }
    if let Some(s) = ov.seed {
        numerics.seed = s;
    }
    if numerics.n_omega < 2 {
        return Err(CliError::Config(format!("n_omega = {} must be at least 2", numerics.n_omega)));
    }
    if numerics.mc_samples < 100 {
        return Err(CliError::Config("mc_samples must be at least 100".into()));
    }
    let mut output = config.output;
    output.csv = ov.csv.or(output.csv);
    output.json = ov.json.or(output.json);
    output.svg = ov.svg.or(output.svg);
    Ok(Resolved {
        name,
        scenario,
        snr_db,
        numerics,
        output,
    })
}
