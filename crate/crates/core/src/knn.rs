//! Kozachenko–Leonenko k-nearest-neighbour entropy estimator.
//!
//! `ĥ = ψ(N) - ψ(k) + ln c_d + (d/N) Σ_i ln ε_i` nats, where `ε_i` is the
//! distance from sample `i` to its k-th neighbour and `c_d` the volume of the
//! unit d-ball. Used only to cross-check closed forms.

use std::f64::consts::{LN_2, PI};
use std::num::NonZeroUsize;

use kiddo::{ImmutableKdTree, SquaredEuclidean};
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{CapacityError, Result};

pub const DEFAULT_K: usize = 4;
const MAX_DIM: usize = 8;
const BATCHES: usize = 50;
const MIN_BATCH_PER_K: usize = 20;

/// Point estimate in bits with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub bits: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Estimates the differential entropy of `samples` (all of one dimension
/// `d ≤ 8`). Exact duplicates are separated by a seeded jitter.
pub fn mc_entropy_estimate(samples: &[DVector<f64>], k: usize, seed: u64) -> Result<McEstimate> {
    let n = samples.len();
    if k == 0 || n < 2 * (k + 2) {
        return Err(CapacityError::InvalidArgument(format!(
            "need at least 2(k + 2) = {} samples, got {n}",
            2 * (k + 2)
        )));
    }
    let d = samples[0].len();
    if d == 0 || d > MAX_DIM || samples.iter().any(|s| s.len() != d) {
        return Err(CapacityError::InvalidArgument(format!(
            "samples must share one dimension in 1..={MAX_DIM}"
        )));
    }
    if samples.iter().any(|s| s.iter().any(|v| !v.is_finite())) {
        return Err(CapacityError::InvalidArgument("non-finite sample".into()));
    }
    let flat: Vec<f64> = samples.iter().flat_map(|s| s.iter().copied()).collect();
    let bits = kl_bits(&flat, d, k, seed);

    // The per-point terms are correlated through shared neighbours, so the
    // spread comes from independent estimates on disjoint batches, scaled by
    // the batch size.
    let batches = BATCHES.min(n / (MIN_BATCH_PER_K * (k + 1))).max(2);
    let len = n / batches;
    let sub: Vec<f64> = (0..batches)
        .map(|b| kl_bits(&flat[b * len * d..(b + 1) * len * d], d, k, seed))
        .collect();
    let mean = sub.iter().sum::<f64>() / batches as f64;
    let var = sub.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(McEstimate {
        bits,
        std_error: (var * len as f64 / n as f64).sqrt(),
        samples: n,
    })
}

// Estimate in bits for `flat.len() / d` points of dimension `d`.
fn kl_bits(flat: &[f64], d: usize, k: usize, seed: u64) -> f64 {
    let log_eps = match d {
        1 => log_kth_distances::<1>(flat, k, seed),
        2 => log_kth_distances::<2>(flat, k, seed),
        3 => log_kth_distances::<3>(flat, k, seed),
        4 => log_kth_distances::<4>(flat, k, seed),
        5 => log_kth_distances::<5>(flat, k, seed),
        6 => log_kth_distances::<6>(flat, k, seed),
        7 => log_kth_distances::<7>(flat, k, seed),
        _ => log_kth_distances::<8>(flat, k, seed),
    };
    let n = log_eps.len() as f64;
    let df = d as f64;
    let ln_cd = 0.5 * df * PI.ln() - ln_gamma(0.5 * df + 1.0);
    let mean = log_eps.iter().sum::<f64>() / n;
    (digamma(n) - digamma(k as f64) + ln_cd + df * mean) / LN_2
}

fn log_kth_distances<const K: usize>(flat: &[f64], k: usize, seed: u64) -> Vec<f64> {
    let mut points: Vec<[f64; K]> = flat
        .chunks_exact(K)
        .map(|c| std::array::from_fn(|i| c[i]))
        .collect();
    let query_n = NonZeroUsize::new(k + 1).expect("k + 1 > 0");
    let mut jittered = false;
    loop {
        let tree = ImmutableKdTree::<f64, K>::new_from_slice(&points)
            .expect("finite points build a tree");
        let dist2: Vec<f64> = points
            .par_iter()
            .map(|p| {
                let hits = tree.query(p).nearest_n::<SquaredEuclidean<f64>>(query_n).execute();
                // The query point itself is among the hits at distance zero.
                hits.last().map_or(0.0, |h| h.distance)
            })
            .collect();
        if dist2.iter().all(|&r| r > 0.0) || jittered {
            return dist2
                .iter()
                .map(|&r| 0.5 * r.max(f64::MIN_POSITIVE).ln())
                .collect();
        }
        let dupes = dist2.iter().filter(|&&r| r <= 0.0).count();
        let scale = points
            .iter()
            .flat_map(|p| p.iter().map(|v| v.abs()))
            .fold(0.0_f64, f64::max)
            .max(1.0);
        log::warn!(
            "{dupes} samples have coincident k-th neighbours; jittering by {:.1e}",
            1e-9 * scale
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in points.iter_mut() {
            for v in p.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += 1e-9 * scale * z;
            }
        }
        jittered = true;
    }
}
