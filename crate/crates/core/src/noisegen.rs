//! Preset noise laws, innovation samplers, PSD-profile filter synthesis and
//! lifted-noise block sampling.
//!
//! Every sampler takes an explicit seed. Output is split into fixed-size
//! chunks, each drawn from its own ChaCha stream, so results do not depend on
//! the number of worker threads.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CapacityError, Result};
use crate::linalg::{sqrtm_symmetric, Mat};
use crate::model::{
    stack_blocks, GmParams, InnovationPdf, LiftedChannel, LptvShapingFilter, NakagamiParams,
    NoiseModel,
};
use crate::spectra::grid_nodes;

const CHUNK: usize = 4096;

/// Built-in innovation laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetId {
    /// Scalar three-component mixture, priors {0.7, 0.2, 0.1}.
    Gm1,
    /// Scalar zero-mean mixture with variances {1, 100, 1000}.
    Gm2,
    /// Scalar Middleton Class A approximation, A = 0.1, Ω = 0.01.
    Mca,
    /// Two-dimensional version of `Gm1`.
    MimoGm,
    /// Two-dimensional version of `Mca`.
    MimoMca,
    /// Complex Nakagami with m = 0.8, Ω = 1.
    Nakagami08,
    /// Circular complex Gaussian with unit variance.
    GaussianRef,
}

impl PresetId {
    pub const ALL: [PresetId; 7] = [
        PresetId::Gm1,
        PresetId::Gm2,
        PresetId::Mca,
        PresetId::MimoGm,
        PresetId::MimoMca,
        PresetId::Nakagami08,
        PresetId::GaussianRef,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            PresetId::Gm1 => "gm1",
            PresetId::Gm2 => "gm2",
            PresetId::Mca => "mca",
            PresetId::MimoGm => "mimo-gm",
            PresetId::MimoMca => "mimo-mca",
            PresetId::Nakagami08 => "nakagami-08",
            PresetId::GaussianRef => "gaussian-ref",
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PresetId {
    type Err = CapacityError;

    fn from_str(s: &str) -> Result<Self> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| CapacityError::InvalidArgument(format!("unknown noise preset '{s}'")))
    }
}

pub const MCA_A: f64 = 0.1;
pub const MCA_OMEGA: f64 = 0.01;
pub const MCA_COMPONENTS: usize = 10;

/// `e^{-A} A^n / n!` for `n = 0..n_g`, before renormalization.
pub fn mca_raw_weights(a: f64, n_g: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(n_g);
    let mut term = (-a).exp();
    for n in 0..n_g {
        if n > 0 {
            term *= a / n as f64;
        }
        w.push(term);
    }
    w
}

/// Truncated Class A mixture in `dim` dimensions with renormalized priors
/// and component covariances `(n/A + Ω)/(1 + Ω) · I`.
pub fn mca_params(a: f64, omega: f64, n_g: usize, dim: usize) -> Result<GmParams> {
    let raw = mca_raw_weights(a, n_g);
    let total: f64 = raw.iter().sum();
    let priors: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let means = vec![DVector::zeros(dim); n_g];
    let covs = (0..n_g)
        .map(|n| Mat::identity(dim, dim) * ((n as f64 / a + omega) / (1.0 + omega)))
        .collect();
    GmParams::new(priors, means, covs)
}

/// Innovation law of a preset before power normalization.
pub fn preset_innovation(id: PresetId) -> InnovationPdf {
    let gm = match id {
        PresetId::Gm1 => GmParams::scalar(vec![0.7, 0.2, 0.1], &[5.0, -8.0, -19.0], &[5.0, 2.0, 1.0]),
        PresetId::Gm2 => GmParams::scalar(vec![0.9, 0.07, 0.03], &[0.0; 3], &[1.0, 100.0, 1000.0]),
        PresetId::Mca => mca_params(MCA_A, MCA_OMEGA, MCA_COMPONENTS, 1),
        PresetId::MimoGm => GmParams::new(
            vec![0.7, 0.2, 0.1],
            vec![
                DVector::from_vec(vec![5.0, 4.0]),
                DVector::from_vec(vec![-8.0, -16.0]),
                DVector::from_vec(vec![-19.0, 4.0]),
            ],
            [5.0, 2.0, 1.0].iter().map(|&c| Mat::identity(2, 2) * c).collect(),
        ),
        PresetId::MimoMca => mca_params(MCA_A, MCA_OMEGA, MCA_COMPONENTS, 2),
        PresetId::Nakagami08 => {
            return InnovationPdf::ComplexNakagami(
                NakagamiParams::new(0.8, 1.0).expect("valid preset"),
            )
        }
        PresetId::GaussianRef => {
            return InnovationPdf::Gaussian {
                covariance: Mat::identity(2, 2) * 0.5,
            }
        }
    };
    InnovationPdf::GaussianMixture(gm.expect("valid preset"))
}

/// i.i.d. noise model for a preset, normalized to unit total variance.
pub fn build_preset(id: PresetId) -> NoiseModel {
    NoiseModel::iid(preset_innovation(id)).expect("valid preset")
}

enum Sampler {
    Mixture {
        cumulative: Vec<f64>,
        means: Vec<DVector<f64>>,
        roots: Vec<Mat>,
    },
    Nakagami(Gamma<f64>),
    Gaussian(Mat),
}

impl Sampler {
    fn new(pdf: &InnovationPdf) -> Result<Self> {
        let root = |c: &Mat| {
            sqrtm_symmetric(c)
                .ok_or_else(|| CapacityError::InvalidModel("covariance is not PSD".into()))
        };
        Ok(match pdf {
            InnovationPdf::GaussianMixture(p) => {
                let mut acc = 0.0;
                let cumulative = p
                    .priors()
                    .iter()
                    .map(|a| {
                        acc += a;
                        acc
                    })
                    .collect();
                Sampler::Mixture {
                    cumulative,
                    means: p.means().to_vec(),
                    roots: p.covariances().iter().map(root).collect::<Result<_>>()?,
                }
            }
            InnovationPdf::ComplexNakagami(p) => Sampler::Nakagami(
                Gamma::new(p.m(), p.omega() / p.m())
                    .map_err(|e| CapacityError::InvalidModel(e.to_string()))?,
            ),
            InnovationPdf::Gaussian { covariance } => Sampler::Gaussian(root(covariance)?),
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let normal = |rng: &mut ChaCha8Rng, d: usize| {
            DVector::from_fn(d, |_, _| StandardNormal.sample(rng))
        };
        match self {
            Sampler::Mixture {
                cumulative,
                means,
                roots,
            } => {
                let u: f64 = rng.random();
                let n = cumulative
                    .iter()
                    .position(|&c| u < c)
                    .unwrap_or(cumulative.len() - 1);
                let z = normal(rng, means[n].len());
                &means[n] + &roots[n] * z
            }
            Sampler::Nakagami(gamma) => {
                let r = gamma.sample(rng).sqrt();
                let phase = 2.0 * PI * rng.random::<f64>();
                DVector::from_vec(vec![r * phase.cos(), r * phase.sin()])
            }
            Sampler::Gaussian(root) => root * normal(rng, root.nrows()),
        }
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// `n` i.i.d. draws from `pdf`. Nakagami draws are `(Re, Im)` pairs.
pub fn sample_innovation(pdf: &InnovationPdf, n: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let sampler = Sampler::new(pdf)?;
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<DVector<f64>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len).map(|_| sampler.draw(&mut rng)).collect()
        })
        .collect();
    Ok(parts.into_iter().flatten().collect())
}

/// `blocks` lifted noise vectors `W[k] = F0 U[k] + F1 U[k-1]`; one warm-up
/// block is drawn and discarded.
pub fn sample_lifted_noise(
    model: &NoiseModel,
    lifted: &LiftedChannel,
    blocks: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let per = lifted.per;
    let u = sample_innovation(model.innovation(), (blocks + 1) * per, seed)?;
    let u = stack_blocks(&u, per);
    Ok((1..=blocks)
        .into_par_iter()
        .map(|k| &lifted.f0 * &u[k] + &lifted.f1 * &u[k - 1])
        .collect())
}

/// Time-domain noise `W[i] = Σ_τ F[i, τ] U[i-τ]` of length `len`, with the
/// filter started `memory` samples early so no sample sees a zero state.
pub fn sample_noise(model: &NoiseModel, len: usize, seed: u64) -> Result<Vec<DVector<f64>>> {
    let f = model.shaping();
    let m = f.memory();
    let u = sample_innovation(model.innovation(), len + m, seed)?;
    Ok((0..len)
        .into_par_iter()
        .map(|i| {
            let mut w = DVector::zeros(f.n());
            for tau in 0..=m {
                w += f.tap(i, tau) * &u[i + m - tau];
            }
            w
        })
        .collect())
}

/// Spectral spatial correlation `ρ_W(ω)` between the two noise ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum RhoProfile {
    Constant { value: f64 },
    /// `at_zero - slope · |ω|/2π` on `|ω| < π`.
    Linear { at_zero: f64, slope: f64 },
}

impl Default for RhoProfile {
    fn default() -> Self {
        RhoProfile::Linear {
            at_zero: 0.7,
            slope: 1.0,
        }
    }
}

impl RhoProfile {
    pub fn at(&self, omega: f64) -> f64 {
        match *self {
            RhoProfile::Constant { value } => value,
            RhoProfile::Linear { at_zero, slope } => at_zero - slope * omega.abs() / (2.0 * PI),
        }
    }
}

/// Per-phase instantaneous PSD `s[i, ω]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum PsdProfile {
    /// Phases `i < round(duty_cycle · P)` sit at `disturbed`, the rest at
    /// `quiet`; each is multiplied by `1 + tilt · cos ω`.
    TwoLevel {
        quiet: f64,
        disturbed: f64,
        duty_cycle: f64,
        #[serde(default)]
        tilt: f64,
    },
    /// One row per phase (rows cycle if fewer than the period), sampled
    /// uniformly on `[0, π]` and linearly interpolated; symmetric in ω.
    Table { rows: Vec<Vec<f64>> },
}

impl PsdProfile {
    pub fn at(&self, phase: usize, period: usize, omega: f64) -> f64 {
        match self {
            PsdProfile::TwoLevel {
                quiet,
                disturbed,
                duty_cycle,
                tilt,
            } => {
                let cut = (duty_cycle * period as f64).round() as usize;
                let level = if phase < cut { *disturbed } else { *quiet };
                level * (1.0 + tilt * omega.cos())
            }
            PsdProfile::Table { rows } => {
                let row = &rows[phase % rows.len()];
                if row.len() == 1 {
                    return row[0];
                }
                let x = omega.abs().min(PI) / PI * (row.len() - 1) as f64;
                let lo = (x.floor() as usize).min(row.len() - 2);
                let t = x - lo as f64;
                row[lo] * (1.0 - t) + row[lo + 1] * t
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(CapacityError::InvalidModel(msg.into()));
        match self {
            PsdProfile::TwoLevel {
                quiet,
                disturbed,
                duty_cycle,
                tilt,
            } => {
                if !(*quiet > 0.0 && *disturbed > 0.0) {
                    return bad("PSD levels must be positive");
                }
                if !(0.0..=1.0).contains(duty_cycle) {
                    return bad("duty cycle must lie in [0, 1]");
                }
                if !(tilt.abs() < 1.0) {
                    return bad("PSD tilt must satisfy |tilt| < 1");
                }
            }
            PsdProfile::Table { rows } => {
                if rows.is_empty() || rows.iter().any(|r| r.is_empty()) {
                    return bad("PSD table needs at least one non-empty row");
                }
                if rows.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return bad("PSD table values must be finite and non-negative");
                }
            }
        }
        Ok(())
    }
}

/// Spatial and spectral description of the noise colouring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialProfile {
    #[serde(default)]
    pub rho_w: RhoProfile,
    pub psd: PsdProfile,
}

/// Synthesized filter and the fraction of impulse-response energy per phase
/// dropped by truncation to `memory + 1` taps.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapingSynthesis {
    pub filter: LptvShapingFilter,
    pub energy_loss: Vec<f64>,
}

/// Nodes of the internal grid used for the inverse transform.
pub const SYNTHESIS_NODES: usize = 1024;

/// Target per-phase frequency response
/// `[[1, ρ_W(ω)], [ρ_W(ω), 1]]^{1/2} · diag(s[i, ω])^{1/2}`.
pub fn target_response(
    profile: &SpatialProfile,
    phase: usize,
    period: usize,
    n: usize,
    omega: f64,
) -> Result<Mat> {
    let s = profile.psd.at(phase, period, omega);
    if !(s >= 0.0) {
        return Err(CapacityError::InvalidModel(format!("negative PSD at omega = {omega}")));
    }
    let spatial = if n == 1 {
        Mat::identity(1, 1)
    } else {
        let rho = profile.rho_w.at(omega);
        if !(rho.abs() < 1.0) {
            return Err(CapacityError::InvalidModel(format!(
                "spatial correlation {rho} at omega = {omega} is not in (-1, 1)"
            )));
        }
        let mut c = Mat::identity(n, n);
        for r in 0..n {
            for k in 0..n {
                if r != k {
                    c[(r, k)] = rho;
                }
            }
        }
        sqrtm_symmetric(&c).ok_or_else(|| {
            CapacityError::InvalidModel(format!("spatial matrix not PSD at omega = {omega}"))
        })?
    };
    Ok(spatial * s.sqrt())
}

/// Builds an LPTV shaping filter whose phase-`i` response approximates
/// [`target_response`], by inverse transform on a dense grid and truncation
/// to taps `0..=memory`.
pub fn profile_to_filter(
    profile: &SpatialProfile,
    period: usize,
    memory: usize,
    n: usize,
) -> Result<ShapingSynthesis> {
    profile.psd.validate()?;
    if period == 0 || n == 0 {
        return Err(CapacityError::InvalidModel("period and dimension must be positive".into()));
    }
    let omegas = grid_nodes(SYNTHESIS_NODES);
    let mut taps = Vec::with_capacity(period * (memory + 1));
    let mut energy_loss = Vec::with_capacity(period);
    for phase in 0..period {
        let responses = omegas
            .iter()
            .map(|&w| target_response(profile, phase, period, n, w))
            .collect::<Result<Vec<_>>>()?;
        let tap_at = |tau: isize| {
            let mut acc = Mat::zeros(n, n);
            for (resp, &w) in responses.iter().zip(&omegas) {
                let c = Complex64::from_polar(1.0, w * tau as f64).re;
                acc += resp * c;
            }
            acc / SYNTHESIS_NODES as f64
        };
        // Parseval: total energy is the mean squared norm of the response.
        let total: f64 =
            responses.iter().map(|r| r.norm_squared()).sum::<f64>() / SYNTHESIS_NODES as f64;
        let mut kept = 0.0;
        for tau in 0..=memory {
            let t = tap_at(tau as isize);
            kept += t.norm_squared();
            taps.push(t);
        }
        energy_loss.push(if total > 0.0 { 1.0 - kept / total } else { 0.0 });
    }
    let filter = LptvShapingFilter::new(n, period, memory, taps)?;
    Ok(ShapingSynthesis {
        filter,
        energy_loss,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn mca_first_weight_and_tail() {
        let raw = mca_raw_weights(MCA_A, MCA_COMPONENTS);
        assert_relative_eq!(raw[0], (-0.1_f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(raw[0], 0.9048, epsilon = 1e-4);
        let tail = 1.0 - raw.iter().sum::<f64>();
        assert!((0.0..1e-6).contains(&tail));
        let p = mca_params(MCA_A, MCA_OMEGA, MCA_COMPONENTS, 1).unwrap();
        assert_relative_eq!(p.priors().iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gm2_raw_variance() {
        let pdf = preset_innovation(PresetId::Gm2);
        assert_relative_eq!(pdf.total_second_moment(), 37.9, epsilon = 1e-12);
    }

    #[test]
    fn presets_have_unit_power() {
        for id in PresetId::ALL {
            let model = build_preset(id);
            assert_relative_eq!(model.innovation().total_second_moment(), 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn preset_names_roundtrip() {
        for id in PresetId::ALL {
            assert_eq!(id.name().parse::<PresetId>().unwrap(), id);
        }
        assert!("gm3".parse::<PresetId>().is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let pdf = preset_innovation(PresetId::Gm1);
        let a = sample_innovation(&pdf, 10_000, 42).unwrap();
        let b = sample_innovation(&pdf, 10_000, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_innovation(&pdf, 10_000, 43).unwrap();
        assert_ne!(a[0], c[0]);
        // A prefix does not depend on the total length requested.
        let short = sample_innovation(&pdf, 5, 42).unwrap();
        assert_eq!(short[..], a[..5]);
    }

    #[test]
    fn identity_shaping_passes_innovation() {
        let model = build_preset(PresetId::MimoGm);
        let ch = crate::model::LptvChannel::identity(2);
        let lifted = crate::model::lift_with_period(&ch, &model, 3).unwrap();
        let w = sample_lifted_noise(&model, &lifted, 4, 7).unwrap();
        let u = stack_blocks(&sample_innovation(model.innovation(), 15, 7).unwrap(), 3);
        assert_eq!(w[..], u[1..]);
    }

    #[test]
    fn white_profile_gives_identity_tap() {
        let profile = SpatialProfile {
            rho_w: RhoProfile::Constant { value: 0.0 },
            psd: PsdProfile::TwoLevel {
                quiet: 1.0,
                disturbed: 1.0,
                duty_cycle: 0.5,
                tilt: 0.0,
            },
        };
        let syn = profile_to_filter(&profile, 2, 3, 2).unwrap();
        for phase in 0..2 {
            assert!((syn.filter.tap(phase, 0) - Mat::identity(2, 2)).norm() < 1e-10);
            for tau in 1..=3 {
                assert!(syn.filter.tap(phase, tau).norm() < 1e-10);
            }
        }
        assert!(syn.energy_loss.iter().all(|l| l.abs() < 1e-10));
    }

    #[test]
    fn constant_rho_gives_spatial_root() {
        let profile = SpatialProfile {
            rho_w: RhoProfile::Constant { value: 0.5 },
            psd: PsdProfile::TwoLevel {
                quiet: 1.0,
                disturbed: 1.0,
                duty_cycle: 0.0,
                tilt: 0.0,
            },
        };
        let syn = profile_to_filter(&profile, 1, 2, 2).unwrap();
        let c = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let root = sqrtm_symmetric(&c).unwrap();
        assert!((syn.filter.tap(0, 0) - &root).norm() < 1e-10);
        assert!(syn.filter.tap(0, 1).norm() < 1e-10);
        let t = syn.filter.tap(0, 0);
        assert!((&t * &t - c).norm() < 1e-10);
    }

    #[test]
    fn default_rho_profile() {
        let rho = RhoProfile::default();
        assert_relative_eq!(rho.at(0.0), 0.7);
        assert_relative_eq!(rho.at(PI / 2.0), 0.45);
        assert_relative_eq!(rho.at(-PI / 2.0), 0.45);
    }

    #[test]
    fn singular_profile_rejected() {
        let profile = SpatialProfile {
            rho_w: RhoProfile::Constant { value: 0.0 },
            psd: PsdProfile::Table {
                rows: vec![vec![0.0, 0.0, 0.0]],
            },
        };
        assert!(matches!(
            profile_to_filter(&profile, 1, 2, 1),
            Err(CapacityError::SingularShapingTap { .. })
        ));
    }
}
