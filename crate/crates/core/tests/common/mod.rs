#![allow(dead_code)]

use nalgebra::DVector;
use plc_capacity::linalg::Mat;
use plc_capacity::model::{InnovationPdf, LptvChannel, LptvShapingFilter, NoiseModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Random LPTV channel with a well-conditioned leading tap.
pub fn random_channel(
    rng: &mut ChaCha8Rng,
    n_out: usize,
    n_in: usize,
    period: usize,
    memory: usize,
) -> LptvChannel {
    let mut taps = Vec::new();
    for _ in 0..period {
        for tau in 0..=memory {
            let mut t = normal_mat(rng, n_out, n_in) * 0.4f64.powi(tau as i32);
            if tau == 0 {
                for d in 0..n_out.min(n_in) {
                    t[(d, d)] += 2.0;
                }
            }
            taps.push(t);
        }
    }
    LptvChannel::new(n_out, n_in, period, memory, taps).unwrap()
}

/// Random shaping filter with identity-dominated leading taps.
pub fn random_shaping(rng: &mut ChaCha8Rng, n: usize, period: usize, memory: usize, echo: f64) -> LptvShapingFilter {
    let mut taps = Vec::new();
    for _ in 0..period {
        for tau in 0..=memory {
            let t = if tau == 0 {
                Mat::identity(n, n) + normal_mat(rng, n, n) * 0.2
            } else {
                normal_mat(rng, n, n) * echo
            };
            taps.push(t);
        }
    }
    LptvShapingFilter::new(n, period, memory, taps).unwrap()
}

pub fn white_gaussian(n: usize) -> NoiseModel {
    NoiseModel::unnormalized(
        InnovationPdf::gaussian(Mat::identity(n, n)).unwrap(),
        LptvShapingFilter::identity(n),
    )
    .unwrap()
}

/// Empirical lag-0 and lag-1 block covariances with batch-means standard
/// errors per entry (consecutive blocks are dependent).
pub struct BlockAutocov {
    pub c0: Mat,
    pub c1: Mat,
    pub se0: Mat,
    pub se1: Mat,
}

pub fn block_autocov(blocks: &[DVector<f64>]) -> BlockAutocov {
    const BATCHES: usize = 200;
    let d = blocks[0].len();
    let n = blocks.len() - 1;
    let per_batch = n / BATCHES;
    let mut m0 = Vec::with_capacity(BATCHES);
    let mut m1 = Vec::with_capacity(BATCHES);
    for b in 0..BATCHES {
        let mut c0 = Mat::zeros(d, d);
        let mut c1 = Mat::zeros(d, d);
        for k in (1 + b * per_batch)..(1 + (b + 1) * per_batch) {
            c0 += &blocks[k] * blocks[k].transpose();
            c1 += &blocks[k] * blocks[k - 1].transpose();
        }
        m0.push(c0 / per_batch as f64);
        m1.push(c1 / per_batch as f64);
    }
    let mean = |ms: &[Mat]| ms.iter().fold(Mat::zeros(d, d), |a, m| a + m) / ms.len() as f64;
    let se = |ms: &[Mat], mu: &Mat| {
        let var = ms
            .iter()
            .fold(Mat::zeros(d, d), |a, m| a + (m - mu).map(|v| v * v))
            / (ms.len() - 1) as f64;
        var.map(|v| (v / ms.len() as f64).sqrt())
    };
    let c0 = mean(&m0);
    let c1 = mean(&m1);
    let se0 = se(&m0, &c0);
    let se1 = se(&m1, &c1);
    BlockAutocov { c0, c1, se0, se1 }
}
