//! Differential entropies of the innovation laws and entropy rates of the
//! shaped noise process, in bits.

use std::f64::consts::{E, LN_2, PI};

use nalgebra::DVector;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{CapacityError, Result};
use crate::linalg::{two_tap_response, Mat};
use crate::model::{GmParams, InnovationPdf, LiftedChannel, NakagamiParams, NoiseModel};
use crate::spectra::{grid_nodes, integrate_band, szego_logdet, SpectralGrid};

/// Closed interval known to contain an entropy value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyInterval {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

impl EntropyInterval {
    pub fn exact(value: f64) -> Self {
        Self {
            lower: value,
            upper: value,
            exact: true,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }

    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            lower: self.lower + offset,
            upper: self.upper + offset,
            exact: self.exact,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            lower: self.lower * factor,
            upper: self.upper * factor,
            exact: self.exact,
        }
    }
}

/// Entropy of a complex Nakagami-m variable (amplitude Nakagami(m, Ω),
/// independent uniform phase), as a 2-D real vector:
///
/// `Ψ(m)/(2 ln 2) + log2((πΩ/m) Γ(m) e^{(2m - (2m-1)Ψ(m))/2})`
pub fn nakagami_complex_entropy(p: &NakagamiParams) -> f64 {
    let (m, omega) = (p.m(), p.omega());
    let psi = digamma(m);
    let nats = psi / 2.0
        + (PI * omega / m).ln()
        + ln_gamma(m)
        + (2.0 * m - (2.0 * m - 1.0) * psi) / 2.0;
    nats / LN_2
}

/// `½ log2 |2πe Σ|`, or an error if `Σ` is not positive definite.
pub fn gaussian_entropy(cov: &Mat) -> Result<f64> {
    let d = cov.nrows();
    let chol = cov.clone().cholesky().ok_or_else(|| {
        CapacityError::InvalidModel("Gaussian covariance is not positive definite".into())
    })?;
    let log2det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.log2()).sum();
    Ok(0.5 * (d as f64 * (2.0 * PI * E).log2() + log2det))
}

// Natural log of the Gaussian density N(x; mean, cov) via Cholesky.
fn log_gauss_pdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &Mat) -> Result<f64> {
    let d = x.len() as f64;
    let chol = cov.clone().cholesky().ok_or_else(|| {
        CapacityError::InvalidModel("mixture covariance is not positive definite".into())
    })?;
    let diff = x - mean;
    let z = chol
        .l()
        .solve_lower_triangular(&diff)
        .expect("Cholesky factor is nonsingular");
    let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    Ok(-0.5 * (d * (2.0 * PI).ln() + logdet + z.norm_squared()))
}

/// Lower and upper bounds on the entropy of a Gaussian mixture:
///
/// `lower = -Σ_n α_n log2(Σ_m α_m N(m_n; m_m, c_m + c_n))`
/// `upper = Σ_n α_n (½ log2|2πe c_n| - log2 α_n)`
pub fn gm_entropy_interval(p: &GmParams) -> Result<EntropyInterval> {
    let (priors, means, covs) = (p.priors(), p.means(), p.covariances());
    let n_g = priors.len();
    let mut upper = 0.0;
    for n in 0..n_g {
        upper += priors[n] * (gaussian_entropy(&covs[n])? - priors[n].log2());
    }
    let mut lower = 0.0;
    for n in 0..n_g {
        let logs = (0..n_g)
            .map(|m| Ok(priors[m].ln() + log_gauss_pdf(&means[n], &means[m], &(&covs[m] + &covs[n]))?))
            .collect::<Result<Vec<f64>>>()?;
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = top + logs.iter().map(|v| (v - top).exp()).sum::<f64>().ln();
        lower -= priors[n] * lse / LN_2;
    }
    if n_g == 1 {
        return Ok(EntropyInterval::exact(upper));
    }
    Ok(EntropyInterval {
        lower: lower.min(upper),
        upper,
        exact: false,
    })
}

/// Entropy of one innovation vector.
pub fn innovation_entropy(pdf: &InnovationPdf) -> Result<EntropyInterval> {
    match pdf {
        InnovationPdf::GaussianMixture(p) => gm_entropy_interval(p),
        InnovationPdf::ComplexNakagami(p) => Ok(EntropyInterval::exact(nakagami_complex_entropy(p))),
        InnovationPdf::Gaussian { covariance } => Ok(EntropyInterval::exact(gaussian_entropy(covariance)?)),
    }
}

/// Entropy rate of a Gaussian process with the grid's noise PSD, per lifted
/// sample: `(1/4π) ∫ log2|2πe C'_W(ω)| dω`.
pub fn gaussian_entropy_rate(grid: &SpectralGrid) -> Result<f64> {
    let dim = grid.noise_psd().first().map_or(0, |m| m.nrows()) as f64;
    let offset = dim * (2.0 * PI * E).log2();
    let values: Vec<f64> = grid.noise_log2det().iter().map(|v| v + offset).collect();
    Ok(integrate_band(&values)? / (4.0 * PI))
}

/// `(1/2π) ∫ log2|det F'(ω)| dω` for the lifted shaping filter.
pub fn entropy_gain(lifted: &LiftedChannel, n_omega: usize) -> Result<f64> {
    let field: Vec<_> = grid_nodes(n_omega)
        .iter()
        .map(|&w| two_tap_response(&lifted.f0, &lifted.f1, w))
        .collect();
    szego_logdet(&field)
}

/// Noise entropy rate split into its pieces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseEntropyRate {
    pub per: usize,
    /// Log-determinant gain of the lifted shaping filter, bits per lifted sample.
    pub gain: f64,
    /// Entropy of one innovation vector.
    pub innovation: EntropyInterval,
    /// Entropy rate per lifted sample.
    pub lifted: EntropyInterval,
    /// Time average per original sample.
    pub per_sample: EntropyInterval,
}

/// Entropy rate of the lifted noise `W[k] = F0 U[k] + F1 U[k-1]`:
/// the shaping gain plus `Per` innovation entropies.
pub fn noise_entropy_rate(
    model: &NoiseModel,
    lifted: &LiftedChannel,
    n_omega: usize,
) -> Result<NoiseEntropyRate> {
    let innovation = innovation_entropy(model.innovation())?;
    let gain = entropy_gain(lifted, n_omega)?;
    let per = lifted.per;
    let lifted_rate = innovation.scaled(per as f64).shifted(gain);
    Ok(NoiseEntropyRate {
        per,
        gain,
        innovation,
        lifted: lifted_rate,
        per_sample: lifted_rate.scaled(1.0 / per as f64),
    })
}

pub use crate::knn::{mc_entropy_estimate, McEstimate, DEFAULT_K as DEFAULT_KNN_K};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{lift, LptvShapingFilter};
    use approx::assert_relative_eq;

    #[test]
    fn nakagami_unit_shape_is_complex_gaussian() {
        let h = nakagami_complex_entropy(&NakagamiParams::new(1.0, 1.0).unwrap());
        assert_relative_eq!(h, (PI * E).log2(), epsilon = 1e-12);
        assert_relative_eq!(h, 3.0942, epsilon = 1e-4);
        let h4 = nakagami_complex_entropy(&NakagamiParams::new(1.0, 4.0).unwrap());
        assert_relative_eq!(h4, 2.0 + (PI * E).log2(), epsilon = 1e-12);
    }

    #[test]
    fn nakagami_entropy_below_gaussian_bound() {
        for m in [0.5, 0.6, 0.8, 2.0, 5.0, 50.0] {
            let h = nakagami_complex_entropy(&NakagamiParams::new(m, 1.0).unwrap());
            assert!(h <= (PI * E).log2() + 1e-12, "m={m} gives {h}");
        }
    }

    #[test]
    fn single_component_collapses() {
        let cov = Mat::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let gm = GmParams::new(vec![1.0], vec![DVector::from_vec(vec![1.0, -2.0])], vec![cov.clone()]).unwrap();
        let iv = gm_entropy_interval(&gm).unwrap();
        assert!(iv.exact);
        assert_eq!(iv.lower, iv.upper);
        assert_relative_eq!(iv.upper, gaussian_entropy(&cov).unwrap(), epsilon = 1e-14);
    }

    #[test]
    fn far_separated_pair() {
        let gm = GmParams::scalar(vec![0.5, 0.5], &[-100.0, 100.0], &[1.0, 1.0]).unwrap();
        let iv = gm_entropy_interval(&gm).unwrap();
        let expected = 0.5 * (2.0 * PI * E).log2() + 1.0;
        assert_relative_eq!(iv.upper, expected, epsilon = 1e-12);
        // Without overlap the pairwise bound sees each component against
        // itself at doubled variance, leaving a gap of ½ log2(e/2).
        assert_relative_eq!(iv.width(), 0.5 * (E / 2.0).log2(), epsilon = 1e-12);
    }

    #[test]
    fn interval_is_ordered_for_overlapping_mixture() {
        let gm = GmParams::scalar(vec![0.7, 0.2, 0.1], &[5.0, -8.0, -19.0], &[5.0, 2.0, 1.0]).unwrap();
        let iv = gm_entropy_interval(&gm).unwrap();
        assert!(iv.lower < iv.upper);
        let total = gaussian_entropy(&gm.covariance()).unwrap();
        assert!(iv.upper <= total + 1e-9);
    }

    #[test]
    fn gaussian_entropy_is_rejected_for_singular_cov() {
        assert!(gaussian_entropy(&Mat::zeros(2, 2)).is_err());
    }

    #[test]
    fn constant_gain_shaping_adds_bits() {
        let n = 2;
        let pdf = InnovationPdf::ComplexNakagami(NakagamiParams::new(1.0, 1.0).unwrap());
        let noise = NoiseModel::new(
            pdf.clone(),
            LptvShapingFilter::new(n, 1, 0, vec![Mat::identity(n, n) * 2.0]).unwrap(),
        )
        .unwrap();
        let ch = crate::model::LptvChannel::identity(n);
        let lifted = lift(&ch, &noise).unwrap();
        let rate = noise_entropy_rate(&noise, &lifted, 64).unwrap();
        assert_relative_eq!(rate.gain, n as f64, epsilon = 1e-12);
        assert_relative_eq!(rate.lifted.lower, rate.innovation.lower + 2.0, epsilon = 1e-12);
    }
}
