//! Infill criteria over a GP posterior, in minimization orientation.
//!
//! Expected quantile improvement measures improvement of the beta-quantile of
//! the model after one more noisy observation at `x`, instead of improvement of
//! the noisy data itself. With `tau_future = 0` and `beta = 0.5` it reduces to
//! plain expected improvement.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::gp_surrogate::{GpModel, Posterior};
use crate::{Error, Result};

pub const DEFAULT_BETA: f64 = 0.65;

fn std_normal() -> Normal {
    Normal::standard()
}

pub fn normal_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

pub fn normal_pdf(z: f64) -> f64 {
    std_normal().pdf(z)
}

pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionConfig {
    /// Quantile level, in `[0.5, 1)`.
    pub beta: f64,
    /// Noise std anticipated for the next evaluation.
    pub tau_future: f64,
}

impl AcquisitionConfig {
    pub fn new(beta: f64, tau_future: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&beta) {
            return Err(Error::InvalidArgument(format!(
                "beta must lie in [0.5, 1), got {beta}"
            )));
        }
        if !(tau_future >= 0.0 && tau_future.is_finite()) {
            return Err(Error::InvalidArgument(
                "tau_future must be non-negative".into(),
            ));
        }
        Ok(AcquisitionConfig { beta, tau_future })
    }
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            beta: DEFAULT_BETA,
            tau_future: 0.0,
        }
    }
}

/// `m + Phi^-1(beta) s` for given posterior moments.
pub fn quantile_of(post: Posterior, beta: f64) -> f64 {
    let s = post.std();
    if s == 0.0 {
        return post.mean;
    }
    post.mean + normal_quantile(beta) * s
}

pub fn quantile(model: &GpModel, x: &[f64], beta: f64) -> f64 {
    quantile_of(model.posterior(x), beta)
}

/// Smallest model quantile over already evaluated points; the EQI incumbent.
pub fn q_min(model: &GpModel, evaluated: &[Vec<f64>], beta: f64) -> Result<f64> {
    if evaluated.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    Ok(evaluated
        .iter()
        .map(|x| quantile(model, x, beta))
        .fold(f64::INFINITY, f64::min))
}

/// Mean and std of the future quantile at a point with moments `post`.
pub fn future_quantile_moments(post: Posterior, config: &AcquisitionConfig) -> (f64, f64) {
    let s2 = post.variance;
    let tau2 = config.tau_future * config.tau_future;
    if s2 <= 0.0 {
        return (post.mean, 0.0);
    }
    let shrunk_std = (tau2 * s2 / (tau2 + s2)).sqrt();
    let m_q = if shrunk_std > 0.0 {
        post.mean + normal_quantile(config.beta) * shrunk_std
    } else {
        post.mean
    };
    let s_q = s2 / (tau2 + s2).sqrt();
    (m_q, s_q)
}

fn improvement(gap: f64, spread: f64) -> f64 {
    if spread > 0.0 {
        let z = gap / spread;
        (gap * normal_cdf(z) + spread * normal_pdf(z)).max(0.0)
    } else {
        gap.max(0.0)
    }
}

pub fn eqi_of(post: Posterior, config: &AcquisitionConfig, q_min: f64) -> f64 {
    let (m_q, s_q) = future_quantile_moments(post, config);
    improvement(q_min - m_q, s_q)
}

pub fn eqi(model: &GpModel, x: &[f64], config: &AcquisitionConfig, q_min: f64) -> f64 {
    eqi_of(model.posterior(x), config, q_min)
}

pub fn expected_improvement_of(post: Posterior, incumbent: f64) -> f64 {
    improvement(incumbent - post.mean, post.std())
}

pub fn expected_improvement(model: &GpModel, x: &[f64], incumbent: f64) -> f64 {
    expected_improvement_of(model.posterior(x), incumbent)
}
