mod common;

use nalgebra::DVector;
use num_complex::Complex64;
use plc_capacity::capacity::{db_to_linear, noise_power, waterfill, BoundEngine};
use plc_capacity::entropy::{entropy_gain, gaussian_entropy_rate, noise_entropy_rate};
use plc_capacity::linalg::{CMat, Mat};
use plc_capacity::model::{lift, InnovationPdf, LiftedChannel, NoiseModel};
use plc_capacity::scenario::{scenario_preset, SCENARIO_NAMES};
use plc_capacity::spectra::{build_grid, integrate_band};

use common::*;

fn random_two_tap(seed: u64, n: usize) -> LiftedChannel {
    let mut r = rng(seed);
    let f0 = Mat::identity(n, n) + normal_mat(&mut r, n, n) * 0.3;
    let f1 = normal_mat(&mut r, n, n) * 0.3;
    let a = normal_mat(&mut r, n, n);
    LiftedChannel {
        per: 1,
        n_out: n,
        n_in: n,
        memory: 1,
        h0: normal_mat(&mut r, n, n),
        h1: normal_mat(&mut r, n, n),
        f0,
        f1,
        innovation_cov: &a * a.transpose() + Mat::identity(n, n),
    }
}

// Generic LU determinant, independent of the Hermitian path used by the grid.
fn det(m: &CMat) -> Complex64 {
    m.clone().lu().determinant()
}

#[test]
fn whitened_eigenvalues_match_determinant_product() {
    for seed in 0..5 {
        let lifted = random_two_tap(seed, 3);
        let grid = build_grid(&lifted, 64).unwrap();
        for j in 0..grid.n_omega() {
            let h = &grid.transfer()[j];
            let c = &grid.noise_psd()[j];
            let gram = h.adjoint() * c.clone().try_inverse().unwrap() * h;
            let d = det(&gram).re;
            let prod: f64 = grid.lambda_snr()[j].iter().product();
            assert!((d - prod).abs() <= 1e-8 * d.abs(), "node {j}: {d} vs {prod}");
            let dsig = det(&(h * h.adjoint())).re;
            let psig: f64 = grid.lambda_sig()[j].iter().product();
            assert!((dsig - psig).abs() <= 1e-8 * dsig.abs());
        }
    }
}

#[test]
fn conjugate_symmetry_of_transfer() {
    let lifted = random_two_tap(7, 2);
    let grid = build_grid(&lifted, 32).unwrap();
    let n = grid.n_omega();
    // Node j and node n - j are ±ω (node 0 is -π, its own mirror).
    for j in 1..n {
        let a = &grid.transfer()[j];
        let b = &grid.transfer()[n - j];
        assert!((a - b.conjugate()).camax() < 1e-12);
        let la = &grid.lambda_snr()[j];
        let lb = &grid.lambda_snr()[n - j];
        assert!((la - lb).amax() < 1e-9 * la.amax());
    }
}

#[test]
fn noise_psd_is_hermitian_and_positive() {
    let lifted = random_two_tap(8, 3);
    let grid = build_grid(&lifted, 32).unwrap();
    for c in grid.noise_psd() {
        assert!((c - c.adjoint()).camax() <= 1e-10 * c.camax());
        let eig = c.clone().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }
}

#[test]
fn log_integral_is_ordering_invariant() {
    let lifted = random_two_tap(9, 3);
    let grid = build_grid(&lifted, 64).unwrap();
    let sum_sorted: Vec<f64> = grid
        .lambda_snr()
        .iter()
        .map(|l| l.iter().map(|v| v.log2()).sum())
        .collect();
    let sum_reversed: Vec<f64> = grid
        .lambda_snr()
        .iter()
        .map(|l| {
            let rev: DVector<f64> = DVector::from_iterator(l.len(), l.iter().rev().copied());
            rev.iter().map(|v| v.log2()).sum()
        })
        .collect();
    let a = integrate_band(&sum_sorted).unwrap();
    let b = integrate_band(&sum_reversed).unwrap();
    assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
}

#[test]
fn singular_noise_grid_reports_frequency() {
    // W = U[k] - U[k-1] has a spectral zero at ω = 0, which is a grid node.
    let noise = NoiseModel::unnormalized(
        InnovationPdf::gaussian(Mat::identity(1, 1)).unwrap(),
        plc_capacity::model::LptvShapingFilter::new(
            1,
            1,
            1,
            vec![Mat::identity(1, 1), -Mat::identity(1, 1)],
        )
        .unwrap(),
    )
    .unwrap();
    let lifted = lift(&plc_capacity::model::LptvChannel::identity(1), &noise).unwrap();
    match build_grid(&lifted, 32) {
        Err(plc_capacity::CapacityError::SingularNoise { omega, .. }) => assert!(omega.abs() < 1e-12),
        other => panic!("expected singular noise, got {other:?}"),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn quadrature_converges_for_preset_scenarios() {
    for name in SCENARIO_NAMES {
        let spec = scenario_preset(name).unwrap();
        let (ch, noise) = spec.build().unwrap();
        let lifted = lift(&ch, &noise).unwrap();
        let g1 = build_grid(&lifted, 512).unwrap();
        let g2 = build_grid(&lifted, 1024).unwrap();
        let hg = (gaussian_entropy_rate(&g1).unwrap(), gaussian_entropy_rate(&g2).unwrap());
        assert!(rel(hg.0, hg.1) < 1e-6, "{name} h_G {hg:?}");
        let gain = (entropy_gain(&lifted, 512).unwrap(), entropy_gain(&lifted, 1024).unwrap());
        assert!((gain.0 - gain.1).abs() < 1e-6 * gain.0.abs().max(1.0), "{name} gain {gain:?}");
        let power = noise_power(&lifted);
        let ent = noise_entropy_rate(&noise, &lifted, 512).unwrap().lifted;
        let (e1, e2) = (
            BoundEngine::new(&lifted, &g1, ent).unwrap(),
            BoundEngine::new(&lifted, &g2, ent).unwrap(),
        );
        for snr in [0.0, 10.0, 20.0, 30.0] {
            let p = db_to_linear(snr) * power;
            let c1 = waterfill(&g1, p * lifted.per as f64).unwrap().capacity;
            let c2 = waterfill(&g2, p * lifted.per as f64).unwrap().capacity;
            assert!(rel(c1, c2) < 1e-6, "{name} C_G at {snr} dB: {c1} vs {c2}");
            let (b1, b2) = (e1.at(p).unwrap(), e2.at(p).unwrap());
            if let (Some(l1), Some(l2)) = (b1.lower2, b2.lower2) {
                assert!(rel(l1, l2) < 1e-6, "{name} lower2 at {snr} dB");
            }
        }
    }
}
