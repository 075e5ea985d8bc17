//! Invariant checks on a configured model.

use plc_capacity::capacity::{db_to_linear, noise_power, waterfill, BoundEngine};
use plc_capacity::entropy::{
    entropy_gain, gaussian_entropy_rate, innovation_entropy, mc_entropy_estimate,
    noise_entropy_rate, DEFAULT_KNN_K,
};
use plc_capacity::linalg::{to_complex, Mat};
use plc_capacity::model::{
    lift, lift_with_period, lifted_noise_autocorrelation, stack_blocks, unstack_blocks,
    InnovationPdf, LiftedChannel, LptvChannel, NoiseModel,
};
use plc_capacity::noisegen::sample_innovation;
use plc_capacity::spectra::{build_grid, grid_nodes, noise_psd_at, noise_psd_from_shaping};

use crate::config::Resolved;

pub const ROUND_TRIP_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const QUADRATURE_TOL: f64 = 1e-6;
pub const ORDER_TOL: f64 = 1e-9;
/// Monte Carlo estimates may sit this many standard errors outside the
/// interval.
pub const MC_SLACK_SE: f64 = 3.0;

pub struct Check {
    pub name: &'static str,
    pub outcome: Result<String, String>,
}

struct Model {
    channel: LptvChannel,
    noise: NoiseModel,
    lifted: LiftedChannel,
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn lifting_round_trip(m: &Model, seed: u64) -> Result<String, String> {
    let per = m.lifted.per;
    let n_in = m.channel.n_in();
    let xs = sample_innovation(
        &InnovationPdf::gaussian(Mat::identity(n_in, n_in)).map_err(|e| e.to_string())?,
        3 * per,
        seed,
    )
    .map_err(|e| e.to_string())?;
    let direct = m.channel.apply(&xs);
    let lifted = unstack_blocks(&m.lifted.apply(&stack_blocks(&xs, per)), m.channel.n_out());
    let scale = direct.iter().map(|v| v.amax()).fold(f64::MIN_POSITIVE, f64::max);
    let err = direct
        .iter()
        .zip(&lifted)
        .map(|(a, b)| (a - b).amax())
        .fold(0.0, f64::max)
        / scale;
    if err < ROUND_TRIP_TOL {
        Ok(format!("Per = {per}, relative error {err:.1e}"))
    } else {
        Err(format!("relative error {err:.3e} >= {ROUND_TRIP_TOL:e}"))
    }
}

fn psd_identity(m: &Model, n_omega: usize) -> Result<String, String> {
    let (c0, c1) = lifted_noise_autocorrelation(&m.lifted);
    let (c0, c1) = (to_complex(&c0), to_complex(&c1));
    let mut worst: f64 = 0.0;
    for w in grid_nodes(n_omega) {
        let a = noise_psd_at(&c0, &c1, w);
        let b = noise_psd_from_shaping(&m.lifted, w);
        worst = worst.max((&a - &b).norm() / a.norm().max(f64::MIN_POSITIVE));
    }
    if worst < PSD_TOL {
        Ok(format!("relative error {worst:.1e}"))
    } else {
        Err(format!("relative error {worst:.3e} >= {PSD_TOL:e}"))
    }
}

fn quadrature_convergence(m: &Model, n_omega: usize, snr_db: &[f64]) -> Result<String, String> {
    let e = |x: plc_capacity::CapacityError| x.to_string();
    let g1 = build_grid(&m.lifted, n_omega).map_err(e)?;
    let g2 = build_grid(&m.lifted, 2 * n_omega).map_err(e)?;
    let mut worst: f64 = 0.0;
    worst = worst.max(relative(
        gaussian_entropy_rate(&g1).map_err(e)?,
        gaussian_entropy_rate(&g2).map_err(e)?,
    ));
    worst = worst.max(relative(
        entropy_gain(&m.lifted, n_omega).map_err(e)?,
        entropy_gain(&m.lifted, 2 * n_omega).map_err(e)?,
    ));
    let per = m.lifted.per as f64;
    let power = noise_power(&m.lifted);
    let ent = noise_entropy_rate(&m.noise, &m.lifted, n_omega).map_err(e)?.lifted;
    let e1 = BoundEngine::new(&m.lifted, &g1, ent).map_err(e)?;
    let e2 = BoundEngine::new(&m.lifted, &g2, ent).map_err(e)?;
    for &db in snr_db {
        let p = db_to_linear(db) * power;
        let c1 = waterfill(&g1, per * p).map_err(e)?.capacity;
        let c2 = waterfill(&g2, per * p).map_err(e)?.capacity;
        worst = worst.max(relative(c1, c2));
        if let (Some(a), Some(b)) = (e1.at(p).map_err(e)?.lower2, e2.at(p).map_err(e)?.lower2) {
            worst = worst.max(relative(a, b));
        }
    }
    if worst < QUADRATURE_TOL {
        Ok(format!("{n_omega} vs {} nodes, relative change {worst:.1e}", 2 * n_omega))
    } else {
        Err(format!("relative change {worst:.3e} >= {QUADRATURE_TOL:e} between {n_omega} and {} nodes", 2 * n_omega))
    }
}

fn bound_ordering(m: &Model, n_omega: usize, snr_db: &[f64]) -> Result<String, String> {
    let e = |x: plc_capacity::CapacityError| x.to_string();
    let grid = build_grid(&m.lifted, n_omega).map_err(e)?;
    let ent = noise_entropy_rate(&m.noise, &m.lifted, n_omega).map_err(e)?;
    if !(ent.lifted.lower <= ent.lifted.upper) {
        return Err(format!("entropy interval {:?} is reversed", ent.lifted));
    }
    let engine = BoundEngine::new(&m.lifted, &grid, ent.lifted).map_err(e)?;
    if ent.lifted.upper > engine.h_gauss() + ORDER_TOL * engine.h_gauss().abs().max(1.0) {
        return Err("noise entropy rate exceeds the Gaussian entropy rate".into());
    }
    let power = noise_power(&m.lifted);
    for &db in snr_db {
        let r = engine.at(db_to_linear(db) * power).map_err(e)?;
        let tol = ORDER_TOL * r.upper.abs().max(1.0);
        if r.lower1 > r.upper + tol {
            return Err(format!("lower1 {} > upper {} at {db} dB", r.lower1, r.upper));
        }
        if let Some(l2) = r.lower2 {
            if l2 > r.upper + tol {
                return Err(format!("lower2 {l2} > upper {} at {db} dB", r.upper));
            }
        }
    }
    Ok(format!("{} SNR points", snr_db.len()))
}

fn entropy_mc(m: &Model, samples: usize, seed: u64) -> Result<String, String> {
    let e = |x: plc_capacity::CapacityError| x.to_string();
    let pdf = m.noise.innovation();
    let iv = innovation_entropy(pdf).map_err(e)?;
    let xs = sample_innovation(pdf, samples, seed).map_err(e)?;
    let est = mc_entropy_estimate(&xs, DEFAULT_KNN_K, seed).map_err(e)?;
    let slack = MC_SLACK_SE * est.std_error;
    let detail = format!(
        "MC {:.5} ± {:.5} bits ({} samples), interval [{:.5}, {:.5}]",
        est.bits, est.std_error, est.samples, iv.lower, iv.upper
    );
    if est.bits >= iv.lower - slack && est.bits <= iv.upper + slack {
        Ok(detail)
    } else {
        Err(detail)
    }
}

pub fn run_checks(cfg: &Resolved, mc: bool) -> Result<Vec<Check>, crate::error::CliError> {
    let channel = cfg.scenario.channel.build()?;
    let noise = cfg.scenario.noise.build_unchecked()?;
    let mut checks = Vec::new();
    checks.push(Check {
        name: "shaping_tap_nonsingular",
        outcome: noise
            .shaping()
            .check_leading_taps()
            .map(|_| format!("{} phases", noise.shaping().period()))
            .map_err(|e| e.to_string()),
    });
    let lifted = match cfg.numerics.per {
        Some(per) => lift_with_period(&channel, &noise, per)?,
        None => lift(&channel, &noise)?,
    };
    let m = Model {
        channel,
        noise,
        lifted,
    };
    let n = cfg.numerics.n_omega;
    checks.push(Check {
        name: "lifting_round_trip",
        outcome: lifting_round_trip(&m, cfg.numerics.seed),
    });
    checks.push(Check {
        name: "psd_identity",
        outcome: psd_identity(&m, n),
    });
    checks.push(Check {
        name: "quadrature_convergence",
        outcome: quadrature_convergence(&m, n, &cfg.snr_db),
    });
    checks.push(Check {
        name: "bound_ordering",
        outcome: bound_ordering(&m, n, &cfg.snr_db),
    });
    if mc {
        checks.push(Check {
            name: "entropy_mc",
            outcome: entropy_mc(&m, cfg.numerics.mc_samples, cfg.numerics.seed),
        });
    }
    Ok(checks)
}
