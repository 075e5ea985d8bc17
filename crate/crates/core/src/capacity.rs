//! Water-filling capacity with Gaussian inputs and the upper and lower
//! capacity bounds, per original-channel sample.
//!
//! With lifting period `Per` and power `P̃` per original sample, the lifted
//! channel carries `P = Per·P̃` per block. For lifted Gaussian capacity
//! `C_G`, Gaussian noise entropy rate `h_G` and noise entropy rate interval
//! `[H_lo, H_up]` (all per lifted sample):
//!
//! ```text
//! lower1 = C_G / Per
//! upper  = (C_G + h_G - H_lo) / Per
//! lower2 = (n/2) log2((2πe P̃/n) 2^S + 2^{2 H_up/(Per n)}) - H_up/Per
//! ```
//!
//! where `S = (1/(2π Per n)) Σ_k ∫ log2 λN_k(ω) dω` and `lower2` needs a
//! square channel with an invertible transfer matrix at every node.

use std::f64::consts::{E, PI};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::{gaussian_entropy_rate, noise_entropy_rate, EntropyInterval, NoiseEntropyRate};
use crate::error::{CapacityError, Result};
use crate::linalg::{log2_abs_det, max_column_norm, rcond};
use crate::model::{lift, lift_with_period, lifted_noise_autocorrelation, LiftedChannel, LptvChannel, NoiseModel};
use crate::spectra::{build_grid, integrate_band, SpectralGrid};

const MAX_BISECTION: usize = 200;
const MAX_BRACKET_DOUBLINGS: usize = 200;

/// Relative determinant floor for the invertibility hypothesis of `lower2`.
pub const LOWER2_DET_TOL: f64 = 1e-12;

/// Result of water-filling over a spectral eigenvalue field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaterFill {
    /// Water level Δ.
    pub delta: f64,
    /// `(1/4π) Σ_k ∫ (log2 Δλ_k)⁺ dω`, bits per lifted channel use.
    pub capacity: f64,
    /// `(1/2π) Σ_k ∫ (Δ - 1/λ_k)⁺ dω` at the returned level.
    pub allocated: f64,
    /// `|allocated - p| / p`.
    pub residual: f64,
    pub iterations: usize,
    /// False when every eigenvalue is zero and nothing can be transmitted.
    pub usable: bool,
}

fn allocated_power(field: &[DVector<f64>], delta: f64) -> f64 {
    let n = field.len() as f64;
    let mut acc = 0.0;
    for node in field {
        for &l in node.iter() {
            if l > 0.0 {
                acc += (delta - 1.0 / l).max(0.0);
            }
        }
    }
    acc / n
}

/// Water-fills total power `p` over a per-node eigenvalue field on a uniform
/// grid, solving for Δ by bisection.
pub fn waterfill_field(field: &[DVector<f64>], p: f64) -> Result<WaterFill> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(CapacityError::InvalidArgument(format!("power {p} must be positive")));
    }
    if field.is_empty() {
        return Err(CapacityError::InvalidArgument("empty eigenvalue field".into()));
    }
    let lambda_min = field
        .iter()
        .flat_map(|v| v.iter().copied())
        .filter(|&l| l > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !lambda_min.is_finite() {
        log::warn!("all spectral eigenvalues are zero; capacity is zero");
        return Ok(WaterFill {
            delta: 0.0,
            capacity: 0.0,
            allocated: 0.0,
            residual: 1.0,
            iterations: 0,
            usable: false,
        });
    }

    let mut lo = 0.0;
    let mut hi = p + 1.0 / lambda_min;
    // The bracket covers the level whenever positive bands span a fair share
    // of the grid; widen it for sparse fields.
    for _ in 0..MAX_BRACKET_DOUBLINGS {
        if allocated_power(field, hi) >= p {
            break;
        }
        lo = hi;
        hi *= 2.0;
    }
    let mut iterations = 0;
    while iterations < MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if allocated_power(field, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        iterations += 1;
    }
    let alloc_lo = allocated_power(field, lo);
    let alloc_hi = allocated_power(field, hi);
    let (delta, allocated) = if (alloc_hi - p).abs() <= (p - alloc_lo).abs() {
        (hi, alloc_hi)
    } else {
        (lo, alloc_lo)
    };

    let n = field.len() as f64;
    let mut acc = 0.0;
    for node in field {
        for &l in node.iter() {
            if l > 0.0 {
                acc += (delta * l).log2().max(0.0);
            }
        }
    }
    Ok(WaterFill {
        delta,
        capacity: acc / (2.0 * n),
        allocated,
        residual: (allocated - p).abs() / p,
        iterations,
        usable: true,
    })
}

/// Water-filling on the grid's whitened eigenvalues `λ_k(ω)`.
pub fn waterfill(grid: &SpectralGrid, p: f64) -> Result<WaterFill> {
    waterfill_field(grid.lambda_snr(), p)
}

/// How bits per sample map to bps/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    /// One sample is one complex baseband symbol: bps/Hz equals bits/sample.
    ComplexBaseband,
    /// Real passband sampling at twice the bandwidth: bps/Hz is 2 × bits/sample.
    RealPassband,
}

impl Units {
    pub fn bps_per_hz(&self) -> f64 {
        match self {
            Units::ComplexBaseband => 1.0,
            Units::RealPassband => 2.0,
        }
    }
}

/// Bounds at one power level, in bits per original sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub p_tilde: f64,
    pub upper: f64,
    pub lower1: f64,
    pub lower2: Option<f64>,
    pub c_gauss: f64,
    pub delta: f64,
    /// Noise entropy rate per lifted sample used by the bounds.
    pub entropy_used: EntropyInterval,
    pub per: usize,
    pub n_omega: usize,
    pub power_residual: f64,
    pub flags: Vec<String>,
}

/// Quantities shared by every power level of one lifted model.
#[derive(Debug, Clone)]
pub struct BoundEngine<'a> {
    lifted: &'a LiftedChannel,
    grid: &'a SpectralGrid,
    entropy: EntropyInterval,
    h_gauss: f64,
    /// `S` for lower bound 2, or why that bound is unavailable.
    signal_log_mean: std::result::Result<f64, String>,
}

impl<'a> BoundEngine<'a> {
    /// `entropy` is the noise entropy rate per lifted sample.
    pub fn new(lifted: &'a LiftedChannel, grid: &'a SpectralGrid, entropy: EntropyInterval) -> Result<Self> {
        let h_gauss = gaussian_entropy_rate(grid)?;
        let signal_log_mean = lower2_signal_term(lifted, grid)?;
        Ok(Self {
            lifted,
            grid,
            entropy,
            h_gauss,
            signal_log_mean,
        })
    }

    /// Gaussian entropy rate of the noise PSD, per lifted sample.
    pub fn h_gauss(&self) -> f64 {
        self.h_gauss
    }

    pub fn lower2_available(&self) -> bool {
        self.signal_log_mean.is_ok()
    }

    pub fn at(&self, p_tilde: f64) -> Result<BoundsReport> {
        if !(p_tilde > 0.0) || !p_tilde.is_finite() {
            return Err(CapacityError::InvalidArgument(format!(
                "power per sample {p_tilde} must be positive"
            )));
        }
        let per = self.lifted.per as f64;
        let wf = waterfill(self.grid, per * p_tilde)?;
        let mut flags = Vec::new();
        if !wf.usable {
            flags.push("zero-capacity".to_string());
        }
        let c_lifted = wf.capacity;
        let lower1 = c_lifted / per;
        let upper = (c_lifted + self.h_gauss - self.entropy.lower) / per;
        let lower2 = match &self.signal_log_mean {
            Ok(s) => {
                let n = self.lifted.n_in as f64;
                let h_up = self.entropy.upper;
                let signal = 2.0 * PI * E * p_tilde / n * s.exp2();
                let noise = (2.0 * h_up / (per * self.lifted.n_out as f64)).exp2();
                Some(0.5 * n * (signal + noise).log2() - h_up / per)
            }
            Err(reason) => {
                flags.push(format!("lower2-omitted:{reason}"));
                None
            }
        };
        Ok(BoundsReport {
            p_tilde,
            upper,
            lower1,
            lower2,
            c_gauss: lower1,
            delta: wf.delta,
            entropy_used: self.entropy,
            per: self.lifted.per,
            n_omega: self.grid.n_omega(),
            power_residual: wf.residual,
            flags,
        })
    }
}

// S for lower bound 2, or the hypothesis that fails.
fn lower2_signal_term(
    lifted: &LiftedChannel,
    grid: &SpectralGrid,
) -> Result<std::result::Result<f64, String>> {
    if lifted.n_out != lifted.n_in {
        return Ok(Err("non-square".into()));
    }
    let (r, c) = (lifted.n_out, lifted.n_in);
    for p in 0..lifted.per {
        let block = lifted.h0.view((p * r, p * c), (r, c)).clone_owned();
        if !(rcond(&block) > LOWER2_DET_TOL) {
            return Ok(Err(format!("singular-leading-tap-phase-{p}")));
        }
    }
    let scale = grid.transfer().iter().map(max_column_norm).fold(0.0_f64, f64::max);
    let mut per_node = Vec::with_capacity(grid.n_omega());
    for (j, (h, lam)) in grid.transfer().iter().zip(grid.lambda_sig()).enumerate() {
        let omega = grid.omegas()[j];
        if lam.iter().any(|&l| !(l > 0.0)) || log2_abs_det(h, scale).is_none() {
            log::debug!("transfer matrix singular at omega = {omega}");
            return Ok(Err("singular-transfer".into()));
        }
        per_node.push(lam.iter().map(|l| l.log2()).sum::<f64>());
    }
    let total = integrate_band(&per_node)?;
    Ok(Ok(total / (2.0 * PI * lifted.per as f64 * lifted.n_in as f64)))
}

/// Bounds at a single power level.
pub fn bounds(
    lifted: &LiftedChannel,
    grid: &SpectralGrid,
    entropy: EntropyInterval,
    p_tilde: f64,
) -> Result<BoundsReport> {
    BoundEngine::new(lifted, grid, entropy)?.at(p_tilde)
}

/// Average noise power per original sample, `trace(C0)/Per`.
pub fn noise_power(lifted: &LiftedChannel) -> f64 {
    let (c0, _) = lifted_noise_autocorrelation(lifted);
    c0.trace() / lifted.per as f64
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One sweep point; failed points keep their error message.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub report: std::result::Result<BoundsReport, String>,
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub per: usize,
    pub n_omega: usize,
    pub noise_power: f64,
    pub entropy: NoiseEntropyRate,
    /// Gaussian entropy rate per lifted sample.
    pub h_gauss: f64,
    pub points: Vec<SweepPoint>,
}

impl Sweep {
    /// Reports of the points that succeeded, in grid order.
    pub fn reports(&self) -> impl Iterator<Item = (f64, &BoundsReport)> {
        self.points
            .iter()
            .filter_map(|p| p.report.as_ref().ok().map(|r| (p.snr_db, r)))
    }
}

/// Options for [`snr_sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub n_omega: usize,
    /// Forced lifting period; `None` picks the smallest admissible one.
    pub per: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            n_omega: crate::spectra::DEFAULT_N_OMEGA,
            per: None,
        }
    }
}

/// Bounds over an SNR grid, with SNR measured against the average noise
/// power per original sample.
pub fn snr_sweep(
    channel: &LptvChannel,
    noise: &NoiseModel,
    snr_db: &[f64],
    opts: SweepOptions,
) -> Result<Sweep> {
    if snr_db.is_empty() {
        return Err(CapacityError::InvalidArgument("empty SNR grid".into()));
    }
    let lifted = match opts.per {
        Some(per) => lift_with_period(channel, noise, per)?,
        None => lift(channel, noise)?,
    };
    let grid = build_grid(&lifted, opts.n_omega)?;
    let entropy = noise_entropy_rate(noise, &lifted, opts.n_omega)?;
    let engine = BoundEngine::new(&lifted, &grid, entropy.lifted)?;
    let power = noise_power(&lifted);
    let points = snr_db
        .par_iter()
        .map(|&snr| SweepPoint {
            snr_db: snr,
            report: engine
                .at(db_to_linear(snr) * power)
                .map_err(|e| e.to_string()),
        })
        .collect();
    Ok(Sweep {
        per: lifted.per,
        n_omega: opts.n_omega,
        noise_power: power,
        entropy,
        h_gauss: engine.h_gauss(),
        points,
    })
}
