//! `plc-capacity`: capacity bound sweeps, noise entropy reports and model
//! validation from named presets or JSON scenario documents.

mod config;
mod error;
mod report;
mod validate;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use plc_capacity::capacity::{snr_sweep, SweepOptions};
use plc_capacity::entropy::{mc_entropy_estimate, noise_entropy_rate, DEFAULT_KNN_K};
use plc_capacity::model::{lift, lift_with_period, InnovationPdf};
use plc_capacity::noisegen::{mca_raw_weights, sample_innovation, PresetId, MCA_A, MCA_COMPONENTS};
use plc_capacity::scenario::{scenario_preset, InnovationSpec, SCENARIO_NAMES};
use plc_capacity::CapacityError;

use config::{Config, Numerics, Output, Overrides, Resolved, Sweep, SCHEMA_VERSION};
use error::CliError;
use report::{failed_row, rows_from_sweep, Report};

const THREADS_ENV: &str = "PLC_CAPACITY_THREADS";

#[derive(Parser)]
#[command(name = "plc-capacity", version, about = "Capacity bounds for LPTV power-line channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON scenario document (schema 1).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in scenario or noise preset name.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// SNR grid in dB: `A:STEP:B` or a comma-separated list.
    #[arg(long, global = true, value_name = "GRID", allow_hyphen_values = true)]
    snr: Option<String>,
    /// Frequency grid size.
    #[arg(long, global = true, value_name = "N")]
    n_omega: Option<usize>,
    /// Seed for validation inputs and Monte Carlo sampling.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// CSV output path (stdout when absent).
    #[arg(long, global = true, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// JSON mirror of the CSV rows.
    #[arg(long, global = true, value_name = "PATH")]
    json: Option<PathBuf>,
    /// SVG chart of the bounds.
    #[arg(long, global = true, value_name = "PATH")]
    svg: Option<PathBuf>,
    /// Add the Monte Carlo entropy cross-check.
    #[arg(long, global = true)]
    mc: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Upper and lower capacity bounds over an SNR grid.
    Bounds,
    /// Noise entropy rate: innovation entropy, shaping gain and rates.
    Entropy,
    /// Run the invariant checks on the configured model.
    Validate,
    /// Built-in scenarios.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    /// Print a preset as a configuration document, or all of them keyed by name.
    Dump { name: Option<String> },
    /// List scenario and noise preset names.
    List,
}

impl Cli {
    fn resolved(&self) -> Result<Resolved, CliError> {
        let config = self.config.as_deref().map(config::load_config).transpose()?;
        config::resolve(
            config,
            Overrides {
                preset: self.preset.clone(),
                snr: self.snr.clone(),
                n_omega: self.n_omega,
                seed: self.seed,
                csv: self.csv.clone(),
                json: self.json.clone(),
                svg: self.svg.clone(),
            },
        )
    }
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn is_config_error(e: &CapacityError) -> bool {
    matches!(
        e,
        CapacityError::InvalidModel(_) | CapacityError::DimensionMismatch(_) | CapacityError::InvalidArgument(_)
    )
}

fn cmd_bounds(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.resolved()?;
    let (channel, noise) = cfg.scenario.build()?;
    let opts = SweepOptions {
        n_omega: cfg.numerics.n_omega,
        per: cfg.numerics.per,
    };
    let report = match snr_sweep(&channel, &noise, &cfg.snr_db, opts) {
        Ok(sweep) => Report {
            schema: SCHEMA_VERSION,
            scenario: cfg.name.clone(),
            units: cfg.scenario.units,
            per: Some(sweep.per),
            n_omega: sweep.n_omega,
            noise_power: Some(sweep.noise_power),
            rows: rows_from_sweep(&sweep, cfg.scenario.units),
        },
        Err(e) if is_config_error(&e) => return Err(e.into()),
        Err(e) => {
            log::warn!("sweep failed: {e}");
            Report {
                schema: SCHEMA_VERSION,
                scenario: cfg.name.clone(),
                units: cfg.scenario.units,
                per: None,
                n_omega: cfg.numerics.n_omega,
                noise_power: None,
                rows: cfg.snr_db.iter().map(|&s| failed_row(s, &e.to_string())).collect(),
            }
        }
    };
    for row in &report.rows {
        if let Some(f) = row.flags.iter().find(|f| f.starts_with("error:")) {
            log::warn!("{} dB: {f}", row.snr_db);
        }
    }
    match &cfg.output.csv {
        Some(path) => report::write_csv(create(path)?, &report.rows)?,
        None => report::write_csv(io::stdout().lock(), &report.rows)?,
    }
    if let Some(path) = &cfg.output.json {
        report::write_json(create(path)?, &report)?;
    }
    if let Some(path) = &cfg.output.svg {
        report::write_svg(create(path)?, &format!("Capacity bounds: {}", cfg.name), &report.rows)?;
    }
    Ok(())
}

fn fmt_interval(lo: f64, hi: f64, exact: bool) -> String {
    if exact {
        format!("{lo:.6} bits (exact)")
    } else {
        format!("[{lo:.6}, {hi:.6}] bits (width {:.6})", hi - lo)
    }
}

fn cmd_entropy(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.resolved()?;
    let (channel, noise) = cfg.scenario.build()?;
    let lifted = match cfg.numerics.per {
        Some(per) => lift_with_period(&channel, &noise, per)?,
        None => lift(&channel, &noise)?,
    };
    let rate = match noise_entropy_rate(&noise, &lifted, cfg.numerics.n_omega) {
        Ok(r) => r,
        Err(CapacityError::DivergentIntegral { omega }) => {
            return Err(CliError::Invariant(format!(
                "Szegő integral diverges: the lifted shaping filter is singular at omega = {omega:.6}"
            )))
        }
        Err(e) => return Err(e.into()),
    };
    let mut out = io::stdout().lock();
    let pdf = noise.innovation();
    let kind = match pdf {
        InnovationPdf::GaussianMixture(gm) => format!("Gaussian mixture, {} components", gm.n_components()),
        InnovationPdf::ComplexNakagami(p) => format!("complex Nakagami, m = {}, omega = {}", p.m(), p.omega()),
        InnovationPdf::Gaussian { .. } => "Gaussian".to_string(),
    };
    writeln!(out, "scenario: {}", cfg.name)?;
    writeln!(
        out,
        "innovation: {kind}, dimension {}, amplitude scale {:.6}",
        pdf.dimension(),
        noise.scale()
    )?;
    if let InnovationPdf::GaussianMixture(gm) = pdf {
        for (k, prior) in gm.priors().iter().enumerate() {
            let mean: Vec<String> = gm.means()[k].iter().map(|v| format!("{v:.6}")).collect();
            writeln!(
                out,
                "  component {k}: prior {prior:.6}, mean [{}], covariance trace {:.6}",
                mean.join(", "),
                gm.covariances()[k].trace()
            )?;
        }
    }
    if let InnovationSpec::Preset {
        preset: PresetId::Mca | PresetId::MimoMca,
    } = cfg.scenario.noise.innovation
    {
        let raw = mca_raw_weights(MCA_A, MCA_COMPONENTS);
        let total: f64 = raw.iter().sum();
        writeln!(out, "  Class A weights, A = {MCA_A}, Σ = {total:.10}:")?;
        for (n, w) in raw.iter().enumerate() {
            writeln!(out, "    n = {n}: {w:.4}/Σ = {:.6}", w / total)?;
        }
    }
    let iv = rate.innovation;
    writeln!(out, "innovation entropy: {}", fmt_interval(iv.lower, iv.upper, iv.exact))?;
    writeln!(out, "lifting period: {}", rate.per)?;
    writeln!(out, "Szegő gain: {:.6} bits per lifted sample", rate.gain)?;
    let l = rate.lifted;
    writeln!(out, "entropy rate per lifted sample: {}", fmt_interval(l.lower, l.upper, l.exact))?;
    let s = rate.per_sample;
    writeln!(out, "entropy rate per original sample: {}", fmt_interval(s.lower, s.upper, s.exact))?;
    if cli.mc {
        let xs = sample_innovation(pdf, cfg.numerics.mc_samples, cfg.numerics.seed)?;
        let est = mc_entropy_estimate(&xs, DEFAULT_KNN_K, cfg.numerics.seed)?;
        writeln!(
            out,
            "Monte Carlo innovation entropy: {:.6} ± {:.6} bits ({} samples, k = {DEFAULT_KNN_K})",
            est.bits, est.std_error, est.samples
        )?;
    }
    Ok(())
}

fn cmd_validate(cli: &Cli) -> Result<(), CliError> {
    let cfg = cli.resolved()?;
    let checks = validate::run_checks(&cfg, cli.mc)?;
    let mut out = io::stdout().lock();
    let mut failed = Vec::new();
    for c in &checks {
        match &c.outcome {
            Ok(detail) => writeln!(out, "PASS {}: {detail}", c.name)?,
            Err(detail) => {
                writeln!(out, "FAIL {}: {detail}", c.name)?;
                failed.push(c.name);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failed.join(", ")))
    }
}

fn preset_config(name: &str) -> Result<Config, CliError> {
    let spec = scenario_preset(name).ok_or_else(|| CliError::Config(format!("unknown preset `{name}`")))?;
    Ok(Config {
        schema: SCHEMA_VERSION,
        preset: None,
        scenario: Some(spec.expanded()),
        sweep: Sweep::default(),
        numerics: Numerics::default(),
        output: Output::default(),
    })
}

fn cmd_presets(action: &PresetAction) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match action {
        PresetAction::Dump { name: Some(name) } => {
            serde_json::to_writer_pretty(&mut out, &preset_config(name)?)?;
        }
        PresetAction::Dump { name: None } => {
            let all = SCENARIO_NAMES
                .iter()
                .map(|n| Ok((n.to_string(), preset_config(n)?)))
                .collect::<Result<BTreeMap<_, _>, CliError>>()?;
            serde_json::to_writer_pretty(&mut out, &all)?;
        }
        PresetAction::List => {
            writeln!(out, "scenarios: {}", SCENARIO_NAMES.join(", "))?;
            let ids: Vec<&str> = PresetId::ALL.iter().map(|p| p.name()).collect();
            write!(out, "noise presets (i.i.d., identity channel): {}", ids.join(", "))?;
        }
    }
    writeln!(out)?;
    Ok(())
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("{THREADS_ENV}: {e}")))
}

fn run(cli: &Cli) -> Result<(), CliError> {
    configure_threads()?;
    match &cli.command {
        Command::Bounds => cmd_bounds(cli),
        Command::Entropy => cmd_entropy(cli),
        Command::Validate => cmd_validate(cli),
        Command::Presets { action } => cmd_presets(action),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("plc-capacity: {e}");
        std::process::exit(e.exit_code());
    }
}
