//! Periodic channel and noise models, and the block lifting that turns them
//! into a two-tap time-invariant MIMO channel.
//!
//! A real `n_out × n_in` LPTV channel with period `P_H` and memory `m` maps
//! inputs to outputs as `y[i] = Σ_τ H[i mod P_H, τ] x[i-τ] + w[i]`. The noise
//! is produced by an `n_out × n_out` LPTV shaping filter of period `P_N`
//! driven by an i.i.d. innovation process. Stacking `Per` consecutive samples
//! (with `Per` a common multiple of both periods and `Per > m`) gives a
//! stationary channel `Y[k] = H0 X[k] + H1 X[k-1] + W[k]` with
//! `W[k] = F0 U[k] + F1 U[k-1]`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{CapacityError, Result};
use crate::linalg::{block_diagonal, rcond, sqrtm_symmetric, CMat, Mat};

/// Minimum reciprocal condition number accepted for `F[i,0]`.
pub const SHAPING_RCOND_MIN: f64 = 1e-10;

/// Real LPTV channel impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct LptvChannel {
    n_out: usize,
    n_in: usize,
    period: usize,
    memory: usize,
    // taps[i * (memory + 1) + tau]
    taps: Vec<Mat>,
}

impl LptvChannel {
    pub fn new(
        n_out: usize,
        n_in: usize,
        period: usize,
        memory: usize,
        taps: Vec<Mat>,
    ) -> Result<Self> {
        if n_out == 0 || n_in == 0 || period == 0 {
            return Err(CapacityError::InvalidModel(
                "channel dimensions and period must be positive".into(),
            ));
        }
        if taps.len() != period * (memory + 1) {
            return Err(CapacityError::InvalidModel(format!(
                "expected {} taps (period {period} x memory+1 {}), got {}",
                period * (memory + 1),
                memory + 1,
                taps.len()
            )));
        }
        if let Some(bad) = taps.iter().position(|t| t.shape() != (n_out, n_in)) {
            return Err(CapacityError::InvalidModel(format!(
                "tap {bad} has shape {:?}, expected ({n_out}, {n_in})",
                taps[bad].shape()
            )));
        }
        if taps.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(CapacityError::InvalidModel("non-finite channel tap".into()));
        }
        Ok(Self {
            n_out,
            n_in,
            period,
            memory,
            taps,
        })
    }

    /// Time-invariant channel from its taps `H[0..=m]`.
    pub fn lti(taps: Vec<Mat>) -> Result<Self> {
        let first = taps
            .first()
            .ok_or_else(|| CapacityError::InvalidModel("empty tap list".into()))?;
        let (r, c) = first.shape();
        let memory = taps.len() - 1;
        Self::new(r, c, 1, memory, taps)
    }

    /// `n × n` identity channel without memory.
    pub fn identity(n: usize) -> Self {
        Self::lti(vec![Mat::identity(n, n)]).expect("identity channel is valid")
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn taps(&self) -> &[Mat] {
        &self.taps
    }

    /// `H[i mod P_H, τ]`; taps beyond the memory are zero.
    pub fn tap(&self, i: usize, tau: usize) -> Mat {
        if tau > self.memory {
            return Mat::zeros(self.n_out, self.n_in);
        }
        self.taps[(i % self.period) * (self.memory + 1) + tau].clone()
    }

    /// Same channel with all taps multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            taps: self.taps.iter().map(|t| t * s).collect(),
            ..self.clone()
        }
    }

    /// Direct time-domain LPTV convolution with zero initial state.
    pub fn apply(&self, input: &[DVector<f64>]) -> Vec<DVector<f64>> {
        (0..input.len())
            .map(|i| {
                let mut y = DVector::zeros(self.n_out);
                for tau in 0..=self.memory.min(i) {
                    y += self.tap(i, tau) * &input[i - tau];
                }
                y
            })
            .collect()
    }
}

/// Complex baseband LPTV channel, convertible to its real equivalent.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexLptvChannel {
    pub n_out: usize,
    pub n_in: usize,
    pub period: usize,
    pub memory: usize,
    pub taps: Vec<CMat>,
}

impl ComplexLptvChannel {
    pub fn to_real(&self) -> Result<LptvChannel> {
        complex_to_real(self)
    }
}

/// Real representation of a complex channel: each tap becomes
/// `[[Re, -Im], [Im, Re]]` and vectors stack `[Re; Im]`.
pub fn complex_to_real(channel: &ComplexLptvChannel) -> Result<LptvChannel> {
    let (r, c) = (channel.n_out, channel.n_in);
    let taps = channel
        .taps
        .iter()
        .map(|t| {
            if t.shape() != (r, c) {
                return Err(CapacityError::InvalidModel(format!(
                    "complex tap has shape {:?}, expected ({r}, {c})",
                    t.shape()
                )));
            }
            let re = t.map(|z| z.re);
            let im = t.map(|z| z.im);
            let mut out = Mat::zeros(2 * r, 2 * c);
            out.view_mut((0, 0), (r, c)).copy_from(&re);
            out.view_mut((0, c), (r, c)).copy_from(&(-&im));
            out.view_mut((r, 0), (r, c)).copy_from(&im);
            out.view_mut((r, c), (r, c)).copy_from(&re);
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    LptvChannel::new(2 * r, 2 * c, channel.period, channel.memory, taps)
}

/// Stack a complex vector as `[Re; Im]`.
pub fn complex_vector_to_real(v: &DVector<Complex64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |k, _| if k < n { v[k].re } else { v[k - n].im })
}

/// Square LPTV filter that colours the i.i.d. innovation into the noise.
#[derive(Debug, Clone, PartialEq)]
pub struct LptvShapingFilter {
    n: usize,
    period: usize,
    memory: usize,
    taps: Vec<Mat>,
}

impl LptvShapingFilter {
    /// Builds the filter, rejecting any phase whose leading tap is singular.
    pub fn new(n: usize, period: usize, memory: usize, taps: Vec<Mat>) -> Result<Self> {
        let filter = Self::new_unchecked(n, period, memory, taps)?;
        filter.check_leading_taps()?;
        Ok(filter)
    }

    /// Builds the filter checking only shapes; leading-tap regularity is left to
    /// [`check_leading_taps`](Self::check_leading_taps).
    pub fn new_unchecked(n: usize, period: usize, memory: usize, taps: Vec<Mat>) -> Result<Self> {
        if n == 0 || period == 0 {
            return Err(CapacityError::InvalidModel(
                "shaping filter dimension and period must be positive".into(),
            ));
        }
        if taps.len() != period * (memory + 1) {
            return Err(CapacityError::InvalidModel(format!(
                "expected {} shaping taps, got {}",
                period * (memory + 1),
                taps.len()
            )));
        }
        if taps.iter().any(|t| t.shape() != (n, n)) {
            return Err(CapacityError::InvalidModel(format!(
                "shaping taps must be {n}x{n}"
            )));
        }
        if taps.iter().any(|t| t.iter().any(|v| !v.is_finite())) {
            return Err(CapacityError::InvalidModel("non-finite shaping tap".into()));
        }
        Ok(Self {
            n,
            period,
            memory,
            taps,
        })
    }

    /// Single-tap identity filter: the noise equals the innovation.
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            period: 1,
            memory: 0,
            taps: vec![Mat::identity(n, n)],
        }
    }

    pub fn check_leading_taps(&self) -> Result<()> {
        for phase in 0..self.period {
            let r = rcond(&self.tap(phase, 0));
            if !(r > SHAPING_RCOND_MIN) {
                return Err(CapacityError::SingularShapingTap { phase, rcond: r });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn taps(&self) -> &[Mat] {
        &self.taps
    }

    pub fn tap(&self, i: usize, tau: usize) -> Mat {
        if tau > self.memory {
            return Mat::zeros(self.n, self.n);
        }
        self.taps[(i % self.period) * (self.memory + 1) + tau].clone()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            taps: self.taps.iter().map(|t| t * s).collect(),
            ..self.clone()
        }
    }
}

/// Gaussian-mixture parameters: priors, mean vectors and covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct GmParams {
    priors: Vec<f64>,
    means: Vec<DVector<f64>>,
    covariances: Vec<Mat>,
}

impl GmParams {
    pub fn new(priors: Vec<f64>, means: Vec<DVector<f64>>, covariances: Vec<Mat>) -> Result<Self> {
        let n_g = priors.len();
        if n_g == 0 {
            return Err(CapacityError::InvalidModel("mixture needs at least one component".into()));
        }
        if means.len() != n_g || covariances.len() != n_g {
            return Err(CapacityError::InvalidModel(format!(
                "mixture has {n_g} priors, {} means, {} covariances",
                means.len(),
                covariances.len()
            )));
        }
        if priors.iter().any(|&a| !(a > 0.0)) {
            return Err(CapacityError::InvalidModel("mixture priors must be positive".into()));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(CapacityError::InvalidModel(format!(
                "mixture priors sum to {total}, expected 1"
            )));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(CapacityError::InvalidModel("mixture dimension must be positive".into()));
        }
        for (n, (m, c)) in means.iter().zip(&covariances).enumerate() {
            if m.len() != d || c.shape() != (d, d) {
                return Err(CapacityError::InvalidModel(format!(
                    "component {n} has inconsistent dimension"
                )));
            }
            let norm = c.norm();
            if (c - c.transpose()).norm() > 1e-12 * norm.max(1.0) {
                return Err(CapacityError::InvalidModel(format!(
                    "component {n} covariance is not symmetric"
                )));
            }
            let min_eig = c.clone().symmetric_eigen().eigenvalues.min();
            if min_eig < -1e-12 * norm {
                return Err(CapacityError::InvalidModel(format!(
                    "component {n} covariance is not positive semi-definite"
                )));
            }
        }
        Ok(Self {
            priors,
            means,
            covariances,
        })
    }

    /// Scalar mixture from per-component means and variances.
    pub fn scalar(priors: Vec<f64>, means: &[f64], variances: &[f64]) -> Result<Self> {
        Self::new(
            priors,
            means.iter().map(|&m| DVector::from_element(1, m)).collect(),
            variances.iter().map(|&v| Mat::from_element(1, 1, v)).collect(),
        )
    }

    pub fn n_components(&self) -> usize {
        self.priors.len()
    }

    pub fn dimension(&self) -> usize {
        self.means[0].len()
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Mat] {
        &self.covariances
    }

    pub fn mean(&self) -> DVector<f64> {
        self.priors
            .iter()
            .zip(&self.means)
            .fold(DVector::zeros(self.dimension()), |acc, (a, m)| acc + m * *a)
    }

    /// `Σ α_n (c_n + m_n m_nᵀ)`.
    pub fn second_moment(&self) -> Mat {
        let d = self.dimension();
        self.priors
            .iter()
            .zip(self.means.iter().zip(&self.covariances))
            .fold(Mat::zeros(d, d), |acc, (a, (m, c))| {
                acc + (c + m * m.transpose()) * *a
            })
    }

    pub fn covariance(&self) -> Mat {
        let mu = self.mean();
        self.second_moment() - &mu * mu.transpose()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            priors: self.priors.clone(),
            means: self.means.iter().map(|m| m * s).collect(),
            covariances: self.covariances.iter().map(|c| c * (s * s)).collect(),
        }
    }
}

/// Complex Nakagami-m: Nakagami(m, Ω) amplitude with uniform phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NakagamiParams {
    m: f64,
    omega: f64,
}

impl NakagamiParams {
    pub fn new(m: f64, omega: f64) -> Result<Self> {
        if !(m >= 0.5) || !m.is_finite() {
            return Err(CapacityError::InvalidModel(format!(
                "Nakagami shape m = {m} must be >= 0.5"
            )));
        }
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(CapacityError::InvalidModel(format!(
                "Nakagami second moment {omega} must be positive"
            )));
        }
        Ok(Self { m, omega })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }
}

/// Marginal law of one i.i.d. innovation vector.
#[derive(Debug, Clone, PartialEq)]
pub enum InnovationPdf {
    GaussianMixture(GmParams),
    /// Two real dimensions `(Re, Im)`.
    ComplexNakagami(NakagamiParams),
    Gaussian { covariance: Mat },
}

impl InnovationPdf {
    pub fn gaussian(covariance: Mat) -> Result<Self> {
        let d = covariance.nrows();
        if d == 0 || covariance.ncols() != d {
            return Err(CapacityError::InvalidModel("Gaussian covariance must be square".into()));
        }
        if sqrtm_symmetric(&covariance).is_none() {
            return Err(CapacityError::InvalidModel(
                "Gaussian covariance is not positive semi-definite".into(),
            ));
        }
        Ok(Self::Gaussian { covariance })
    }

    pub fn dimension(&self) -> usize {
        match self {
            Self::GaussianMixture(p) => p.dimension(),
            Self::ComplexNakagami(_) => 2,
            Self::Gaussian { covariance } => covariance.nrows(),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        match self {
            Self::GaussianMixture(p) => p.mean(),
            _ => DVector::zeros(self.dimension()),
        }
    }

    pub fn covariance(&self) -> Mat {
        match self {
            Self::GaussianMixture(p) => p.covariance(),
            Self::ComplexNakagami(p) => Mat::identity(2, 2) * (p.omega / 2.0),
            Self::Gaussian { covariance } => covariance.clone(),
        }
    }

    /// `E‖U‖²`.
    pub fn total_second_moment(&self) -> f64 {
        match self {
            Self::GaussianMixture(p) => p.second_moment().trace(),
            Self::ComplexNakagami(p) => p.omega,
            Self::Gaussian { covariance } => covariance.trace(),
        }
    }

    /// Law of `s·U`.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Self::GaussianMixture(p) => Self::GaussianMixture(p.scaled(s)),
            Self::ComplexNakagami(p) => Self::ComplexNakagami(NakagamiParams {
                m: p.m,
                omega: p.omega * s * s,
            }),
            Self::Gaussian { covariance } => Self::Gaussian {
                covariance: covariance * (s * s),
            },
        }
    }

    /// Rescales to unit total second moment; returns the law and the factor.
    pub fn normalized(&self) -> Result<(Self, f64)> {
        let power = self.total_second_moment();
        if !(power > 0.0) || !power.is_finite() {
            return Err(CapacityError::InvalidModel(format!(
                "innovation power {power} cannot be normalized"
            )));
        }
        let scale = power.sqrt().recip();
        Ok((self.scaled(scale), scale))
    }
}

/// Innovation law plus the LPTV shaping filter.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    innovation: InnovationPdf,
    shaping: LptvShapingFilter,
    scale: f64,
}

impl NoiseModel {
    /// Normalizes the innovation to unit total variance and records the factor.
    pub fn new(innovation: InnovationPdf, shaping: LptvShapingFilter) -> Result<Self> {
        let (innovation, scale) = innovation.normalized()?;
        Self::build(innovation, shaping, scale)
    }

    /// Keeps the innovation exactly as given.
    pub fn unnormalized(innovation: InnovationPdf, shaping: LptvShapingFilter) -> Result<Self> {
        Self::build(innovation, shaping, 1.0)
    }

    /// i.i.d. noise: identity shaping.
    pub fn iid(innovation: InnovationPdf) -> Result<Self> {
        let n = innovation.dimension();
        Self::new(innovation, LptvShapingFilter::identity(n))
    }

    fn build(innovation: InnovationPdf, shaping: LptvShapingFilter, scale: f64) -> Result<Self> {
        if innovation.dimension() != shaping.n() {
            return Err(CapacityError::DimensionMismatch(format!(
                "innovation dimension {} vs shaping filter dimension {}",
                innovation.dimension(),
                shaping.n()
            )));
        }
        Ok(Self {
            innovation,
            shaping,
            scale,
        })
    }

    pub fn innovation(&self) -> &InnovationPdf {
        &self.innovation
    }

    pub fn shaping(&self) -> &LptvShapingFilter {
        &self.shaping
    }

    /// Factor applied to the raw innovation at construction.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn with_shaping(&self, shaping: LptvShapingFilter) -> Result<Self> {
        Self::build(self.innovation.clone(), shaping, self.scale)
    }
}

/// Two-tap block channel and noise shaping obtained by lifting.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedChannel {
    pub per: usize,
    pub n_out: usize,
    pub n_in: usize,
    pub memory: usize,
    pub h0: Mat,
    pub h1: Mat,
    pub f0: Mat,
    pub f1: Mat,
    /// Covariance of one lifted innovation block, `I_Per ⊗ Cov(U)`.
    pub innovation_cov: Mat,
}

impl LiftedChannel {
    pub fn lifted_out(&self) -> usize {
        self.per * self.n_out
    }

    pub fn lifted_in(&self) -> usize {
        self.per * self.n_in
    }

    /// `Y[k] = H0 X[k] + H1 X[k-1]` with `X[-1] = 0`.
    pub fn apply(&self, blocks: &[DVector<f64>]) -> Vec<DVector<f64>> {
        blocks
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let mut y = &self.h0 * x;
                if k > 0 {
                    y += &self.h1 * &blocks[k - 1];
                }
                y
            })
            .collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// Smallest common multiple of both periods that exceeds the memory.
pub fn lifting_period(period_cir: usize, period_noise: usize, memory: usize) -> usize {
    let base = lcm(period_cir, period_noise);
    if base > memory {
        base
    } else {
        base * (memory + 1).div_ceil(base)
    }
}

/// Lifts with the smallest admissible period.
pub fn lift(channel: &LptvChannel, noise: &NoiseModel) -> Result<LiftedChannel> {
    let memory = channel.memory().max(noise.shaping().memory());
    let per = lifting_period(channel.period(), noise.shaping().period(), memory);
    lift_with_period(channel, noise, per)
}

/// Lifts with an explicit period, which must be a common multiple of both
/// periods and exceed the common memory.
pub fn lift_with_period(
    channel: &LptvChannel,
    noise: &NoiseModel,
    per: usize,
) -> Result<LiftedChannel> {
    let shaping = noise.shaping();
    if channel.n_out() != shaping.n() {
        return Err(CapacityError::DimensionMismatch(format!(
            "channel has {} outputs but noise has dimension {}",
            channel.n_out(),
            shaping.n()
        )));
    }
    let memory = channel.memory().max(shaping.memory());
    if per == 0 || per <= memory {
        return Err(CapacityError::InvalidArgument(format!(
            "lifting period {per} must exceed the memory {memory}"
        )));
    }
    if !per.is_multiple_of(channel.period()) || !per.is_multiple_of(shaping.period()) {
        return Err(CapacityError::InvalidArgument(format!(
            "lifting period {per} is not a multiple of the channel period {} and noise period {}",
            channel.period(),
            shaping.period()
        )));
    }
    let (h0, h1) = lift_taps(per, memory, channel.n_out(), channel.n_in(), |i, t| {
        channel.tap(i, t)
    });
    let n = shaping.n();
    let (f0, f1) = lift_taps(per, memory, n, n, |i, t| shaping.tap(i, t));
    let innovation_cov = block_diagonal(per, &noise.innovation().covariance());
    Ok(LiftedChannel {
        per,
        n_out: channel.n_out(),
        n_in: channel.n_in(),
        memory,
        h0,
        h1,
        f0,
        f1,
        innovation_cov,
    })
}

// Block (p, q) of the current-block matrix holds tap(p, p - q) for q <= p; the
// previous-block matrix holds tap(p, p + per - q) whenever that delay is at
// most the memory.
fn lift_taps(
    per: usize,
    memory: usize,
    rows: usize,
    cols: usize,
    tap: impl Fn(usize, usize) -> Mat,
) -> (Mat, Mat) {
    let mut cur = Mat::zeros(per * rows, per * cols);
    let mut prev = Mat::zeros(per * rows, per * cols);
    for p in 0..per {
        for tau in 0..=memory {
            let t = tap(p, tau);
            if tau <= p {
                let q = p - tau;
                cur.view_mut((p * rows, q * cols), (rows, cols)).copy_from(&t);
            } else {
                let q = p + per - tau;
                prev.view_mut((p * rows, q * cols), (rows, cols)).copy_from(&t);
            }
        }
    }
    (cur, prev)
}

/// Block autocorrelation `(C[0], C[1])` of the lifted noise; `C[-1] = C[1]ᵀ`.
pub fn lifted_noise_autocorrelation(lifted: &LiftedChannel) -> (Mat, Mat) {
    let s = &lifted.innovation_cov;
    let c0 = &lifted.f0 * s * lifted.f0.transpose() + &lifted.f1 * s * lifted.f1.transpose();
    let c1 = &lifted.f1 * s * lifted.f0.transpose();
    (c0, c1)
}

/// Split a flat sequence of per-sample vectors into lifted blocks.
pub fn stack_blocks(samples: &[DVector<f64>], per: usize) -> Vec<DVector<f64>> {
    samples
        .chunks(per)
        .map(|chunk| {
            let parts: Vec<f64> = chunk.iter().flat_map(|v| v.iter().copied()).collect();
            DVector::from_vec(parts)
        })
        .collect()
}

/// Inverse of [`stack_blocks`].
pub fn unstack_blocks(blocks: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    blocks
        .iter()
        .flat_map(|b| {
            b.as_slice()
                .chunks(dim)
                .map(DVector::from_column_slice)
                .collect::<Vec<_>>()
        })
        .collect()
}
