//! Reference implementations for the integration and acceptance tests.
//!
//! Written directly from the defining formulas, with no shared code paths
//! beyond the statistical tests whose p-values they consume.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use metabounds::bounds_reduction::ReductionConfig;
use metabounds::gp_surrogate::GpHyperParams;
use metabounds::memory::{IterationRecord, Phase};
use metabounds::param_space::ParameterSpace;
use metabounds::stats_tests::{dudewicz_vdm_test, wilcoxon_signed_rank};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- reduction

/// Per-parameter outcome: decision tag and reduced raw bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct RefBound {
    pub decision: &'static str,
    pub lower: f64,
    pub upper: f64,
}

fn type7(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Straight-line transcription of the reduction procedure.
pub fn reference_reduction(
    records: &[IterationRecord],
    space: &ParameterSpace,
    cfg: &ReductionConfig,
    seed: u64,
) -> Vec<RefBound> {
    let keep_all = |b: &metabounds::param_space::ParameterBound| RefBound {
        decision: "unchanged",
        lower: b.lower,
        upper: b.upper,
    };
    if records.len() < cfg.min_iterations.max(1) {
        return space.bounds().iter().map(keep_all).collect();
    }

    // best n% by score, ties broken by (run, iteration)
    let mut order: Vec<&IterationRecord> = records.iter().collect();
    order.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.run_id.cmp(&b.run_id))
            .then(a.iteration.cmp(&b.iteration))
    });
    let keep = ((cfg.best_fraction * records.len() as f64).ceil() as usize).clamp(1, records.len());
    let best = &order[..keep];

    let mut out = Vec::new();
    for (j, b) in space.bounds().iter().enumerate() {
        let width = b.upper - b.lower;
        let x: Vec<f64> = best
            .iter()
            .map(|r| ((r.params[j] - b.lower) / width).clamp(0.0, 1.0))
            .collect();
        let Ok(dm) = dudewicz_vdm_test(&x, seed) else {
            out.push(keep_all(b));
            continue;
        };
        if dm.p_value >= cfg.alpha_dm {
            out.push(keep_all(b));
            continue;
        }
        let pw = wilcoxon_signed_rank(&x, 0.5).unwrap().p_value;
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let med = type7(&sorted, 0.5);
        let (tag, lo, hi) = if pw < cfg.alpha_w && med > 0.5 {
            ("lower-raised", type7(&sorted, cfg.lo_percentile), 1.0)
        } else if pw < cfg.alpha_w && med < 0.5 {
            ("upper-lowered", 0.0, type7(&sorted, cfg.hi_percentile))
        } else {
            (
                "both",
                type7(&sorted, cfg.lo_percentile),
                type7(&sorted, cfg.hi_percentile),
            )
        };
        if lo >= hi {
            out.push(keep_all(b));
            continue;
        }
        out.push(RefBound {
            decision: tag,
            lower: (b.lower + lo * width).clamp(b.lower, b.upper),
            upper: (b.lower + hi * width).clamp(b.lower, b.upper),
        });
    }
    out
}

/// Synthetic episodic data: each parameter draws from a uniform, skewed,
/// centered or point-mass profile so that every decision branch occurs.
pub fn synthetic_records(space: &ParameterSpace, n: usize, seed: u64) -> Vec<IterationRecord> {
    let mut rng = rng(seed);
    let profiles: Vec<u8> = (0..space.dim()).map(|_| rng.random_range(0..6)).collect();
    let beta_hi = Beta::new(6.0, 2.0).unwrap();
    let beta_lo = Beta::new(2.0, 6.0).unwrap();
    let beta_mid = Beta::new(8.0, 8.0).unwrap();
    (0..n)
        .map(|i| {
            let params = space
                .bounds()
                .iter()
                .zip(&profiles)
                .map(|(b, p)| {
                    let u: f64 = match p {
                        0 => rng.random(),
                        1 => beta_hi.sample(&mut rng),
                        2 => beta_lo.sample(&mut rng),
                        3 => beta_mid.sample(&mut rng),
                        4 => (rng.random::<f64>() * 4.0).round() / 4.0,
                        _ => {
                            if rng.random::<f64>() < 0.5 {
                                0.5
                            } else {
                                rng.random()
                            }
                        }
                    };
                    b.lower + u * (b.upper - b.lower)
                })
                .collect();
            // quantized like real episode scores, so ties occur
            let score = (rng.random::<f64>() * 30.0).round() / 30.0;
            IterationRecord {
                task: "synthetic".into(),
                run_id: (i / 35) as u64 + 1,
                iteration: (i % 35) as u32,
                phase: Phase::InfillEqi,
                params,
                score,
            }
        })
        .collect()
}

// ----------------------------------------------------------------- wilcoxon

/// Two-sided p-value by enumerating all 2^n sign assignments.
pub fn wilcoxon_enumerated(samples: &[f64]) -> f64 {
    let d: Vec<f64> = samples.iter().copied().filter(|x| *x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return 1.0;
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as f64;
            let equal = abs.iter().filter(|b| *b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let total: f64 = ranks.iter().sum();
    let w_obs: f64 = ranks
        .iter()
        .zip(&d)
        .filter(|(_, x)| **x > 0.0)
        .map(|(r, _)| r)
        .sum();
    let dev_obs = (w_obs - total / 2.0).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| ranks[i])
            .sum();
        if (w - total / 2.0).abs() >= dev_obs - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

// ----------------------------------------------------------------------- gp

pub fn matern(x: &[f64], y: &[f64], h: &GpHyperParams) -> f64 {
    let r = x
        .iter()
        .zip(y)
        .zip(&h.lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum::<f64>()
        .sqrt();
    let a = 3f64.sqrt() * r;
    h.signal_variance * (1.0 + a) * (-a).exp()
}

/// Posterior mean and latent variance through an explicit LU inverse.
pub fn dense_posterior(
    inputs: &[Vec<f64>],
    targets: &[f64],
    h: &GpHyperParams,
    jitter: f64,
    x: &[f64],
) -> (f64, f64) {
    let n = inputs.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern(&inputs[i], &inputs[j], h)
            + if i == j {
                h.noise_variance + jitter
            } else {
                0.0
            }
    });
    let kinv = k.lu().try_inverse().expect("invertible kernel matrix");
    let ks = DVector::from_iterator(n, inputs.iter().map(|xi| matern(x, xi, h)));
    let resid = DVector::from_iterator(n, targets.iter().map(|y| y - h.prior_mean));
    let mean = h.prior_mean + (ks.transpose() * &kinv * resid)[(0, 0)];
    let var = h.signal_variance - (ks.transpose() * &kinv * &ks)[(0, 0)];
    (mean, var)
}

// ---------------------------------------------------------------------- eqi

/// Monte-Carlo EQI: simulate the next observation, update the posterior at
/// the point and measure the improvement of its quantile. Returns the mean
/// and its standard error.
pub fn eqi_monte_carlo(
    m: f64,
    s: f64,
    tau: f64,
    beta: f64,
    q_min: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let z_beta = Normal::new(0.0, 1.0).unwrap().inverse_cdf(beta);
    let mut rng = rng(seed);
    let (s2, t2) = (s * s, tau * tau);
    let post_var = s2 * t2 / (s2 + t2);
    let (mut sum, mut sum2) = (0.0, 0.0);
    for _ in 0..samples {
        let z: f64 = rng.sample(StandardNormal);
        let y = m + (s2 + t2).sqrt() * z;
        let m_new = m + s2 / (s2 + t2) * (y - m);
        let q = m_new + z_beta * post_var.sqrt();
        let imp = (q_min - q).max(0.0);
        sum += imp;
        sum2 += imp * imp;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = (sum2 / nf - mean * mean).max(0.0);
    (mean, (var / nf).sqrt())
}

// ------------------------------------------------------------------- design

/// Every column hits each of the `n` strata exactly once.
pub fn stratified(points: &[Vec<f64>]) -> bool {
    let n = points.len();
    let m = points.first().map_or(0, Vec::len);
    (0..m).all(|j| {
        let mut seen = vec![false; n];
        points.iter().all(|p| {
            let v = p[j];
            if !(0.0..1.0).contains(&v) {
                return false;
            }
            let k = ((v * n as f64).floor() as usize).min(n - 1);
            !std::mem::replace(&mut seen[k], true)
        })
    })
}

pub fn brute_min_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            let d = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            best = best.min(d);
        }
    }
    best
}

// ---------------------------------------------------------------- functions

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}
