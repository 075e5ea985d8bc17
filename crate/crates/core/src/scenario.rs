//! Serializable scenario descriptions, the synthetic LPTV channel generator
//! and the built-in named scenarios.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::capacity::Units;
use crate::error::{CapacityError, Result};
use crate::linalg::{sqrtm_symmetric, CMat, Mat};
use crate::model::{
    ComplexLptvChannel, GmParams, InnovationPdf, LptvChannel, LptvShapingFilter, NakagamiParams,
    NoiseModel,
};
use crate::noisegen::{preset_innovation, profile_to_filter, PresetId, PsdProfile, RhoProfile, SpatialProfile};

/// Row-major matrix as nested arrays.
pub type Rows = Vec<Vec<f64>>;

fn mat_from_rows(rows: &Rows, what: &str) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, |row| row.len());
    if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CapacityError::InvalidModel(format!("{what}: ragged or empty matrix")));
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn mat_to_rows(m: &Mat) -> Rows {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Parameters of the synthetic LPTV channel generator.
///
/// Each scalar sub-channel has taps `g[i, τ] = b[τ] · (1 + depth · cos(2πi/P + φ))`
/// with `b[0] = 1`, `b[τ] ~ N(0, (spread · decay^τ)²)` and a random phase `φ`.
/// For `ports > 1` the sub-channels form a matrix `G` (off-diagonal entries
/// scaled by `crosstalk`) and the channel is `R^{1/2} G R^{1/2}` with
/// `R = (1 - ρ) I + ρ 11ᵀ`. Sub-channel 0 depends only on the seed, so the
/// scalar and MIMO channels built from one seed share it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticChannel {
    #[serde(default = "one")]
    pub ports: usize,
    pub period: usize,
    pub memory: usize,
    #[serde(default = "default_depth")]
    pub depth: f64,
    #[serde(default = "default_spread")]
    pub spread: f64,
    #[serde(default = "default_decay")]
    pub decay: f64,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    #[serde(default = "one_f")]
    pub crosstalk: f64,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn default_depth() -> f64 {
    0.3
}
fn default_spread() -> f64 {
    0.5
}
fn default_decay() -> f64 {
    0.6
}
fn default_coupling() -> f64 {
    0.9
}

impl SyntheticChannel {
    pub fn generate(&self) -> Result<LptvChannel> {
        let (n, p, m) = (self.ports, self.period, self.memory);
        if n == 0 || p == 0 {
            return Err(CapacityError::InvalidModel("ports and period must be positive".into()));
        }
        if !(self.depth.abs() < 1.0) || !(self.coupling.abs() < 1.0) {
            return Err(CapacityError::InvalidModel(
                "envelope depth and coupling must lie in (-1, 1)".into(),
            ));
        }
        let subs: Vec<Vec<f64>> = (0..n * n)
            .map(|k| self.sub_channel(k as u64))
            .collect();
        let mix = if n > 1 {
            let r = Mat::from_fn(n, n, |i, j| if i == j { 1.0 } else { self.coupling });
            sqrtm_symmetric(&r).expect("coupling matrix is positive definite")
        } else {
            Mat::identity(1, 1)
        };
        let mut taps = Vec::with_capacity(p * (m + 1));
        for i in 0..p {
            for tau in 0..=m {
                let g = Mat::from_fn(n, n, |r, c| {
                    let scale = if r == c { 1.0 } else { self.crosstalk };
                    scale * subs[r * n + c][i * (m + 1) + tau]
                });
                taps.push(&mix * g * &mix);
            }
        }
        LptvChannel::new(n, n, p, m, taps)
    }

    fn sub_channel(&self, k: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k);
        let base: Vec<f64> = (0..=self.memory)
            .map(|tau| {
                if tau == 0 {
                    1.0
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    z * self.spread * self.decay.powi(tau as i32)
                }
            })
            .collect();
        let u: f64 = StandardNormal.sample(&mut rng);
        let phase = u * std::f64::consts::PI;
        let mut out = Vec::with_capacity(self.period * (self.memory + 1));
        for i in 0..self.period {
            let env = 1.0
                + self.depth
                    * (2.0 * std::f64::consts::PI * i as f64 / self.period as f64 + phase).cos();
            out.extend(base.iter().map(|b| b * env));
        }
        out
    }
}

/// Channel description in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Memoryless `dim × dim` identity.
    Identity { dim: usize },
    Synthetic(SyntheticChannel),
    /// Real taps listed phase-major: `taps[i * (memory + 1) + τ]`.
    Inline {
        period: usize,
        memory: usize,
        taps: Vec<Rows>,
    },
    /// Complex taps as `[re, im]` pairs, converted to the real representation.
    Complex {
        period: usize,
        memory: usize,
        taps: Vec<Vec<Vec<[f64; 2]>>>,
    },
}

impl ChannelSpec {
    pub fn build(&self) -> Result<LptvChannel> {
        match self {
            ChannelSpec::Identity { dim } => {
                if *dim == 0 {
                    return Err(CapacityError::InvalidModel("identity dimension must be positive".into()));
                }
                Ok(LptvChannel::identity(*dim))
            }
            ChannelSpec::Synthetic(s) => s.generate(),
            ChannelSpec::Inline {
                period,
                memory,
                taps,
            } => {
                let taps = taps
                    .iter()
                    .map(|t| mat_from_rows(t, "channel tap"))
                    .collect::<Result<Vec<_>>>()?;
                let (r, c) = taps.first().map_or((0, 0), |t| t.shape());
                LptvChannel::new(r, c, *period, *memory, taps)
            }
            ChannelSpec::Complex {
                period,
                memory,
                taps,
            } => {
                let taps: Vec<CMat> = taps
                    .iter()
                    .map(|t| {
                        let r = t.len();
                        let c = t.first().map_or(0, |row| row.len());
                        if r == 0 || c == 0 || t.iter().any(|row| row.len() != c) {
                            return Err(CapacityError::InvalidModel(
                                "complex channel tap: ragged or empty matrix".into(),
                            ));
                        }
                        Ok(CMat::from_fn(r, c, |i, j| Complex64::new(t[i][j][0], t[i][j][1])))
                    })
                    .collect::<Result<_>>()?;
                let (n_out, n_in) = taps.first().map_or((0, 0), |t| t.shape());
                ComplexLptvChannel {
                    n_out,
                    n_in,
                    period: *period,
                    memory: *memory,
                    taps,
                }
                .to_real()
            }
        }
    }
}

/// Innovation law in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum InnovationSpec {
    Preset {
        preset: PresetId,
    },
    GaussianMixture {
        priors: Vec<f64>,
        means: Vec<Vec<f64>>,
        covariances: Vec<Rows>,
    },
    ComplexNakagami {
        m: f64,
        omega: f64,
    },
    Gaussian {
        covariance: Rows,
    },
}

impl InnovationSpec {
    /// Explicit description of an innovation law.
    pub fn from_pdf(pdf: &InnovationPdf) -> Self {
        match pdf {
            InnovationPdf::GaussianMixture(gm) => InnovationSpec::GaussianMixture {
                priors: gm.priors().to_vec(),
                means: gm.means().iter().map(|m| m.iter().copied().collect()).collect(),
                covariances: gm.covariances().iter().map(mat_to_rows).collect(),
            },
            InnovationPdf::ComplexNakagami(p) => InnovationSpec::ComplexNakagami {
                m: p.m(),
                omega: p.omega(),
            },
            InnovationPdf::Gaussian { covariance } => InnovationSpec::Gaussian {
                covariance: mat_to_rows(covariance),
            },
        }
    }

    /// Replaces a preset reference by its parameters.
    pub fn expanded(&self) -> Self {
        match self {
            InnovationSpec::Preset { preset } => Self::from_pdf(&preset_innovation(*preset)),
            other => other.clone(),
        }
    }

    pub fn build(&self) -> Result<InnovationPdf> {
        match self {
            InnovationSpec::Preset { preset } => Ok(preset_innovation(*preset)),
            InnovationSpec::GaussianMixture {
                priors,
                means,
                covariances,
            } => Ok(InnovationPdf::GaussianMixture(GmParams::new(
                priors.clone(),
                means.iter().map(|m| DVector::from_column_slice(m)).collect(),
                covariances
                    .iter()
                    .map(|c| mat_from_rows(c, "mixture covariance"))
                    .collect::<Result<_>>()?,
            )?)),
            InnovationSpec::ComplexNakagami { m, omega } => {
                Ok(InnovationPdf::ComplexNakagami(NakagamiParams::new(*m, *omega)?))
            }
            InnovationSpec::Gaussian { covariance } => {
                InnovationPdf::gaussian(mat_from_rows(covariance, "Gaussian covariance")?)
            }
        }
    }
}

/// Noise shaping filter in a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", deny_unknown_fields)]
pub enum ShapingSpec {
    Identity,
    Profile {
        period: usize,
        memory: usize,
        profile: SpatialProfile,
    },
    Inline {
        period: usize,
        memory: usize,
        taps: Vec<Rows>,
    },
}

impl ShapingSpec {
    pub fn build(&self, dim: usize) -> Result<LptvShapingFilter> {
        match self {
            ShapingSpec::Identity => Ok(LptvShapingFilter::identity(dim)),
            ShapingSpec::Profile {
                period,
                memory,
                profile,
            } => Ok(profile_to_filter(profile, *period, *memory, dim)?.filter),
            ShapingSpec::Inline {
                period,
                memory,
                taps,
            } => LptvShapingFilter::new(
                dim,
                *period,
                *memory,
                taps.iter()
                    .map(|t| mat_from_rows(t, "shaping tap"))
                    .collect::<Result<_>>()?,
            ),
        }
    }

    /// Builds the filter without the leading-tap regularity check.
    pub fn build_unchecked(&self, dim: usize) -> Result<LptvShapingFilter> {
        match self {
            ShapingSpec::Inline {
                period,
                memory,
                taps,
            } => LptvShapingFilter::new_unchecked(
                dim,
                *period,
                *memory,
                taps.iter()
                    .map(|t| mat_from_rows(t, "shaping tap"))
                    .collect::<Result<_>>()?,
            ),
            other => other.build(dim),
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub innovation: InnovationSpec,
    #[serde(default = "identity_shaping")]
    pub shaping: ShapingSpec,
    /// Rescale the innovation to unit total variance.
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn identity_shaping() -> ShapingSpec {
    ShapingSpec::Identity
}

impl NoiseSpec {
    pub fn build(&self) -> Result<NoiseModel> {
        let pdf = self.innovation.build()?;
        let shaping = self.shaping.build(pdf.dimension())?;
        if self.normalize {
            NoiseModel::new(pdf, shaping)
        } else {
            NoiseModel::unnormalized(pdf, shaping)
        }
    }

    /// Builds the model without the shaping filter's leading-tap check.
    pub fn build_unchecked(&self) -> Result<NoiseModel> {
        let pdf = self.innovation.build()?;
        let shaping = self.shaping.build_unchecked(pdf.dimension())?;
        if self.normalize {
            NoiseModel::new(pdf, shaping)
        } else {
            NoiseModel::unnormalized(pdf, shaping)
        }
    }
}

/// Channel, noise and reporting units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub channel: ChannelSpec,
    pub noise: NoiseSpec,
    pub units: Units,
}

impl ScenarioSpec {
    pub fn build(&self) -> Result<(LptvChannel, NoiseModel)> {
        Ok((self.channel.build()?, self.noise.build()?))
    }

    /// Same scenario with preset innovations written out as parameters.
    pub fn expanded(&self) -> Self {
        let mut out = self.clone();
        out.noise.innovation = self.noise.innovation.expanded();
        out
    }
}

/// Channel period of the built-in periodic scenarios.
pub const SCENARIO_CHANNEL_PERIOD: usize = 24;
/// Noise period of the built-in periodic scenarios.
pub const SCENARIO_NOISE_PERIOD: usize = 12;
pub const SCENARIO_MEMORY: usize = 4;
pub const SCENARIO_SEED: u64 = 7;

/// Synthetic stand-in for a mildly impulsive noise environment.
pub fn medium_disturbed() -> PsdProfile {
    PsdProfile::TwoLevel {
        quiet: 1.0,
        disturbed: 3.0,
        duty_cycle: 0.25,
        tilt: 0.3,
    }
}

/// Synthetic stand-in for a strongly impulsive noise environment.
pub fn heavily_disturbed() -> PsdProfile {
    PsdProfile::TwoLevel {
        quiet: 1.0,
        disturbed: 10.0,
        duty_cycle: 0.4,
        tilt: 0.5,
    }
}

pub fn synthetic_channel(ports: usize) -> SyntheticChannel {
    SyntheticChannel {
        ports,
        period: SCENARIO_CHANNEL_PERIOD,
        memory: SCENARIO_MEMORY,
        depth: default_depth(),
        spread: default_spread(),
        decay: default_decay(),
        coupling: default_coupling(),
        crosstalk: 1.0,
        seed: SCENARIO_SEED,
    }
}

fn periodic(preset: PresetId, ports: usize, psd: PsdProfile) -> ScenarioSpec {
    ScenarioSpec {
        channel: ChannelSpec::Synthetic(synthetic_channel(ports)),
        noise: NoiseSpec {
            innovation: InnovationSpec::Preset { preset },
            shaping: ShapingSpec::Profile {
                period: SCENARIO_NOISE_PERIOD,
                memory: SCENARIO_MEMORY,
                profile: SpatialProfile {
                    rho_w: RhoProfile::default(),
                    psd,
                },
            },
            normalize: true,
        },
        units: Units::RealPassband,
    }
}

fn iid_complex(preset: PresetId) -> ScenarioSpec {
    ScenarioSpec {
        channel: ChannelSpec::Identity { dim: 2 },
        noise: NoiseSpec {
            innovation: InnovationSpec::Preset { preset },
            shaping: ShapingSpec::Identity,
            normalize: true,
        },
        units: Units::ComplexBaseband,
    }
}

pub const SCENARIO_NAMES: [&str; 8] = [
    "nakagami-iid",
    "gm1-iid",
    "gaussian-iid",
    "gm1-scalar",
    "gm2-scalar",
    "mca-scalar",
    "mimo-gm",
    "mimo-mca",
];

/// i.i.d. noise from a preset on an identity channel of matching dimension.
/// Two-dimensional presets are read as one complex sample.
pub fn iid_scenario(preset: PresetId) -> ScenarioSpec {
    let dim = preset_innovation(preset).dimension();
    ScenarioSpec {
        channel: ChannelSpec::Identity { dim },
        noise: NoiseSpec {
            innovation: InnovationSpec::Preset { preset },
            shaping: ShapingSpec::Identity,
            normalize: true,
        },
        units: if dim == 2 {
            Units::ComplexBaseband
        } else {
            Units::RealPassband
        },
    }
}

/// Built-in scenario by name. Names that are not scenarios but noise preset
/// ids give [`iid_scenario`].
pub fn scenario_preset(name: &str) -> Option<ScenarioSpec> {
    Some(match name {
        "nakagami-iid" => iid_complex(PresetId::Nakagami08),
        "gm1-iid" => iid_complex(PresetId::MimoGm),
        "gaussian-iid" => iid_complex(PresetId::GaussianRef),
        "gm1-scalar" => periodic(PresetId::Gm1, 1, medium_disturbed()),
        "gm2-scalar" => periodic(PresetId::Gm2, 1, medium_disturbed()),
        "mca-scalar" => periodic(PresetId::Mca, 1, heavily_disturbed()),
        "mimo-gm" => periodic(PresetId::MimoGm, 2, heavily_disturbed()),
        "mimo-mca" => periodic(PresetId::MimoMca, 2, heavily_disturbed()),
        other => return other.parse().ok().map(iid_scenario),
    })
}
