//! Frequency-domain view of a lifted channel on a uniform quadrature grid.
//!
//! Nodes are `ω_j = -π + 2πj/N`, `j = 0..N`, each with weight `2π/N`. For a
//! smooth periodic integrand this trapezoid rule converges spectrally.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CapacityError, Result};
use crate::linalg::{hermitian_eigenvalues, log2_abs_det, max_column_norm, to_complex, two_tap_response, CMat};
use crate::model::{lifted_noise_autocorrelation, LiftedChannel};

pub const DEFAULT_N_OMEGA: usize = 512;

/// Eigenvalues in `[-EIG_CLAMP, 0)` are treated as zero.
pub const EIG_CLAMP: f64 = 1e-10;

/// Relative eigenvalue floor below which the noise PSD counts as singular.
pub const NOISE_PD_TOL: f64 = 1e-12;

/// Uniform nodes on `[-π, π)`.
pub fn grid_nodes(n_omega: usize) -> Vec<f64> {
    let step = 2.0 * std::f64::consts::PI / n_omega as f64;
    (0..n_omega)
        .map(|j| -std::f64::consts::PI + step * j as f64)
        .collect()
}

/// Per-node transfer matrices, noise PSD matrices and eigenvalue fields.
#[derive(Debug, Clone)]
pub struct SpectralGrid {
    n_omega: usize,
    omegas: Vec<f64>,
    transfer: Vec<CMat>,
    noise_psd: Vec<CMat>,
    /// Eigenvalues of `H'H'ᴴ`, ascending.
    lambda_sig: Vec<DVector<f64>>,
    /// Eigenvalues of `H'ᴴ C'⁻¹ H'`, ascending.
    lambda_snr: Vec<DVector<f64>>,
    noise_log2det: Vec<f64>,
}

struct Node {
    transfer: CMat,
    noise_psd: CMat,
    lambda_sig: DVector<f64>,
    lambda_snr: DVector<f64>,
    noise_log2det: f64,
}

/// `C'(ω) = C0 + C1 e^{-jω} + C1ᵀ e^{jω}`.
pub fn noise_psd_at(c0: &CMat, c1: &CMat, omega: f64) -> CMat {
    let z = Complex64::from_polar(1.0, -omega);
    c0 + c1 * z + c1.transpose() * z.conj()
}

/// `F'(ω) Σ F'(ω)ᴴ` evaluated straight from the shaping taps.
pub fn noise_psd_from_shaping(lifted: &LiftedChannel, omega: f64) -> CMat {
    let f = two_tap_response(&lifted.f0, &lifted.f1, omega);
    let s = to_complex(&lifted.innovation_cov);
    &f * s * f.adjoint()
}

/// Eigenvalues with tiny negatives clamped to zero; anything more negative
/// is reported.
fn clamp_eigenvalues(mut v: DVector<f64>, omega: f64) -> Result<DVector<f64>> {
    for x in v.iter_mut() {
        if !x.is_finite() {
            return Err(CapacityError::NonFinite { index: 0 });
        }
        if *x < 0.0 {
            if *x < -EIG_CLAMP {
                return Err(CapacityError::NegativeEigenvalue { omega, value: *x });
            }
            *x = 0.0;
        }
    }
    let mut sorted: Vec<f64> = v.iter().copied().collect();
    sorted.sort_by(f64::total_cmp);
    Ok(DVector::from_vec(sorted))
}

fn evaluate_node(lifted: &LiftedChannel, c0: &CMat, c1: &CMat, omega: f64) -> Result<Node> {
    let h = two_tap_response(&lifted.h0, &lifted.h1, omega);
    let mut cw = noise_psd_at(c0, c1, omega);
    // Symmetrize to remove rounding asymmetry before the Hermitian solvers.
    cw = (&cw + cw.adjoint()) * Complex64::new(0.5, 0.0);

    let noise_eigs = hermitian_eigenvalues(&cw);
    let trace = cw.trace().re;
    let min_eig = noise_eigs.min();
    if !(min_eig > NOISE_PD_TOL * trace) {
        return Err(CapacityError::SingularNoise { omega, min_eig });
    }
    let noise_log2det = noise_eigs.iter().map(|v| v.log2()).sum();

    let chol = cw
        .clone()
        .cholesky()
        .ok_or(CapacityError::SingularNoise { omega, min_eig })?;
    let whitened = chol
        .l()
        .solve_lower_triangular(&h)
        .ok_or(CapacityError::SingularNoise { omega, min_eig })?;
    let gram_snr = whitened.adjoint() * &whitened;
    let lambda_snr = clamp_eigenvalues(hermitian_eigenvalues(&gram_snr), omega)?;
    let gram_sig = &h * h.adjoint();
    let lambda_sig = clamp_eigenvalues(hermitian_eigenvalues(&gram_sig), omega)?;

    Ok(Node {
        transfer: h,
        noise_psd: cw,
        lambda_sig,
        lambda_snr,
        noise_log2det,
    })
}

/// Evaluates the lifted channel on `n_omega` nodes (even, at least 16).
pub fn build_grid(lifted: &LiftedChannel, n_omega: usize) -> Result<SpectralGrid> {
    if n_omega < 16 || !n_omega.is_multiple_of(2) {
        return Err(CapacityError::InvalidArgument(format!(
            "n_omega = {n_omega} must be even and at least 16"
        )));
    }
    let (c0, c1) = lifted_noise_autocorrelation(lifted);
    let (c0, c1) = (to_complex(&c0), to_complex(&c1));
    let omegas = grid_nodes(n_omega);
    let nodes = omegas
        .par_iter()
        .map(|&w| evaluate_node(lifted, &c0, &c1, w))
        .collect::<Result<Vec<_>>>()?;

    let mut grid = SpectralGrid {
        n_omega,
        omegas,
        transfer: Vec::with_capacity(n_omega),
        noise_psd: Vec::with_capacity(n_omega),
        lambda_sig: Vec::with_capacity(n_omega),
        lambda_snr: Vec::with_capacity(n_omega),
        noise_log2det: Vec::with_capacity(n_omega),
    };
    for node in nodes {
        grid.transfer.push(node.transfer);
        grid.noise_psd.push(node.noise_psd);
        grid.lambda_sig.push(node.lambda_sig);
        grid.lambda_snr.push(node.lambda_snr);
        grid.noise_log2det.push(node.noise_log2det);
    }
    Ok(grid)
}

impl SpectralGrid {
    pub fn n_omega(&self) -> usize {
        self.n_omega
    }

    pub fn omegas(&self) -> &[f64] {
        &self.omegas
    }

    pub fn weight(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n_omega as f64
    }

    /// `H'(ω_j)`.
    pub fn transfer(&self) -> &[CMat] {
        &self.transfer
    }

    /// `C'_W(ω_j)`.
    pub fn noise_psd(&self) -> &[CMat] {
        &self.noise_psd
    }

    /// Per node, eigenvalues of `H'H'ᴴ`.
    pub fn lambda_sig(&self) -> &[DVector<f64>] {
        &self.lambda_sig
    }

    /// Per node, eigenvalues of `H'ᴴ C'⁻¹ H'`.
    pub fn lambda_snr(&self) -> &[DVector<f64>] {
        &self.lambda_snr
    }

    /// Per node, `log2 det C'_W(ω_j)`.
    pub fn noise_log2det(&self) -> &[f64] {
        &self.noise_log2det
    }
}

/// `(1/2π) Σ_j w_j log2|det M(ω_j)|` over a uniform grid.
pub fn szego_logdet(field: &[CMat]) -> Result<f64> {
    let omegas = grid_nodes(field.len());
    let scale = field.iter().map(max_column_norm).fold(0.0_f64, f64::max);
    let values = field
        .iter()
        .zip(&omegas)
        .map(|(m, &omega)| {
            if m.nrows() != m.ncols() {
                return Err(CapacityError::DimensionMismatch(
                    "log-determinant field needs square matrices".into(),
                ));
            }
            log2_abs_det(m, scale).ok_or(CapacityError::DivergentIntegral { omega })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(integrate_band(&values)? / (2.0 * std::f64::consts::PI))
}

/// `Σ_j w_j v_j` with `w_j = 2π/N`, summed in node order.
pub fn integrate_band(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(CapacityError::InvalidArgument("empty quadrature field".into()));
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(CapacityError::NonFinite { index });
    }
    let w = 2.0 * std::f64::consts::PI / values.len() as f64;
    Ok(values.iter().sum::<f64>() * w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::model::{lift_with_period, InnovationPdf, LptvChannel, LptvShapingFilter, NoiseModel};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn scalar(v: f64) -> Mat {
        Mat::from_element(1, 1, v)
    }

    fn lifted_scalar(h: Vec<f64>) -> LiftedChannel {
        let ch = LptvChannel::lti(h.into_iter().map(scalar).collect()).unwrap();
        let noise = NoiseModel::unnormalized(
            InnovationPdf::gaussian(scalar(1.0)).unwrap(),
            LptvShapingFilter::identity(1),
        )
        .unwrap();
        let per = ch.memory() + 1;
        lift_with_period(&ch, &noise, per).unwrap()
    }

    #[test]
    fn nodes_are_uniform_from_minus_pi() {
        let w = grid_nodes(16);
        assert_eq!(w[0], -PI);
        assert_relative_eq!(w[8], 0.0, epsilon = 1e-15);
        assert_relative_eq!(w[15], PI - PI / 8.0, epsilon = 1e-15);
    }

    #[test]
    fn flat_unit_channel() {
        let grid = build_grid(&lifted_scalar(vec![1.0]), 32).unwrap();
        for j in 0..32 {
            assert_relative_eq!(grid.lambda_sig()[j][0], 1.0, epsilon = 1e-14);
            assert_relative_eq!(grid.lambda_snr()[j][0], 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn two_tap_magnitude_response() {
        // Memory 1 with a single-sample block cannot come out of a lift, so the
        // two-tap system is written out directly.
        let lifted = LiftedChannel {
            per: 1,
            n_out: 1,
            n_in: 1,
            memory: 1,
            h0: scalar(1.0),
            h1: scalar(1.0),
            f0: scalar(1.0),
            f1: scalar(0.0),
            innovation_cov: scalar(1.0),
        };
        let grid = build_grid(&lifted, 64).unwrap();
        for (j, &w) in grid.omegas().iter().enumerate() {
            assert_relative_eq!(grid.lambda_sig()[j][0], 2.0 + 2.0 * w.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_grid_size() {
        let l = lifted_scalar(vec![1.0]);
        assert!(build_grid(&l, 15).is_err());
        assert!(build_grid(&l, 8).is_err());
        assert!(build_grid(&l, 17).is_err());
    }

    #[test]
    fn szego_examples() {
        let n = 256;
        let identity: Vec<CMat> = (0..n).map(|_| CMat::identity(2, 2)).collect();
        assert_relative_eq!(szego_logdet(&identity).unwrap(), 0.0, epsilon = 1e-15);

        let two: Vec<CMat> = (0..n)
            .map(|_| CMat::from_element(1, 1, Complex64::new(2.0, 0.0)))
            .collect();
        assert_relative_eq!(szego_logdet(&two).unwrap(), 1.0, epsilon = 1e-14);

        let ma: Vec<CMat> = grid_nodes(n)
            .iter()
            .map(|&w| {
                CMat::from_element(1, 1, Complex64::new(1.0, 0.0) + Complex64::from_polar(0.5, -w))
            })
            .collect();
        assert!(szego_logdet(&ma).unwrap().abs() < 1e-6);
    }

    #[test]
    fn szego_flags_zero_determinant() {
        let field: Vec<CMat> = grid_nodes(16)
            .iter()
            .map(|&w| {
                CMat::from_element(1, 1, Complex64::new(1.0, 0.0) + Complex64::from_polar(1.0, -w))
            })
            .collect();
        match szego_logdet(&field) {
            Err(CapacityError::DivergentIntegral { omega }) => assert_eq!(omega, -PI),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn integrate_band_examples() {
        let n = 64;
        let w = grid_nodes(n);
        assert_relative_eq!(integrate_band(&vec![3.0; n]).unwrap(), 6.0 * PI, epsilon = 1e-12);
        let cos: Vec<f64> = w.iter().map(|x| x.cos()).collect();
        assert!(integrate_band(&cos).unwrap().abs() < 1e-12);
        let lam: Vec<f64> = w.iter().map(|x| 2.0 + 2.0 * x.cos()).collect();
        assert_relative_eq!(integrate_band(&lam).unwrap(), 4.0 * PI, epsilon = 1e-10);
        assert!(matches!(
            integrate_band(&[1.0, f64::NAN]),
            Err(CapacityError::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn singular_noise_is_rejected() {
        let lifted = LiftedChannel {
            per: 1,
            n_out: 1,
            n_in: 1,
            memory: 1,
            h0: scalar(1.0),
            h1: scalar(0.0),
            f0: scalar(1.0),
            f1: scalar(1.0),
            innovation_cov: scalar(1.0),
        };
        assert!(matches!(
            build_grid(&lifted, 16),
            Err(CapacityError::SingularNoise { .. })
        ));
    }
}
