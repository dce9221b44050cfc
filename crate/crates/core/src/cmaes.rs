//! Box-constrained CMA-ES.
//!
//! The search runs in normalized coordinates where the box is `[0, 1]^m`, so a
//! single step size serves boxes with very different side lengths. Samples that
//! leave the box are redrawn up to [`MAX_RESAMPLES`] times and then clipped.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::util;
use crate::{Error, Result};

pub const MAX_RESAMPLES: usize = 100;
const EIGEN_FLOOR: f64 = 1e-14;

/// Strategy parameters derived from the problem dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CmaParams {
    pub dim: usize,
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub chi_n: f64,
}

impl CmaParams {
    pub fn with_population(dim: usize, lambda: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument(
                "CMA-ES dimension must be >= 1".into(),
            ));
        }
        if lambda < 2 {
            return Err(Error::InvalidArgument(
                "CMA-ES population must be >= 2".into(),
            ));
        }
        let n = dim as f64;
        let mu = lambda / 2;
        let raw: Vec<f64> = (1..=mu)
            .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu =
            (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Ok(CmaParams {
            dim,
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        })
    }
}

/// Default strategy parameters: `lambda = 4 + floor(3 ln m)`.
pub fn default_config(dim: usize) -> Result<CmaParams> {
    let lambda = 4 + (3.0 * (dim.max(1) as f64).ln()).floor() as usize;
    CmaParams::with_population(dim, lambda)
}

#[derive(Debug, Clone)]
pub struct CmaConfig {
    /// Starting mean in raw box coordinates; box center when `None`.
    pub initial_mean: Option<Vec<f64>>,
    /// Initial step size as a fraction of the box width.
    pub initial_sigma: f64,
    pub max_evals: usize,
    /// Population size; the default formula when `None`.
    pub population: Option<usize>,
    /// Stop once the largest normalized search std falls below this.
    pub tol_x: f64,
}

impl Default for CmaConfig {
    fn default() -> Self {
        CmaConfig {
            initial_mean: None,
            initial_sigma: 0.3,
            max_evals: 1000,
            population: None,
            tol_x: 1e-12,
        }
    }
}

/// Mutable search state, in normalized box coordinates.
#[derive(Debug, Clone)]
pub struct CmaState {
    pub mean: DVector<f64>,
    pub sigma: f64,
    pub cov: DMatrix<f64>,
    pub p_sigma: DVector<f64>,
    pub p_c: DVector<f64>,
    pub generation: usize,
    basis: DMatrix<f64>,
    scales: DVector<f64>,
}

impl CmaState {
    pub fn new(mean: DVector<f64>, sigma: f64) -> Self {
        let n = mean.len();
        CmaState {
            mean,
            sigma,
            cov: DMatrix::identity(n, n),
            p_sigma: DVector::zeros(n),
            p_c: DVector::zeros(n),
            generation: 0,
            basis: DMatrix::identity(n, n),
            scales: DVector::from_element(n, 1.0),
        }
    }

    /// Symmetrizes `cov`, floors its eigenvalues and refreshes `B` and `D`.
    fn decompose(&mut self) {
        let sym = (&self.cov + self.cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let floored = eig.eigenvalues.map(|v| {
            if v.is_finite() {
                v.max(EIGEN_FLOOR)
            } else {
                EIGEN_FLOOR
            }
        });
        let basis = eig.eigenvectors;
        self.cov = &basis * DMatrix::from_diagonal(&floored) * basis.transpose();
        self.scales = floored.map(f64::sqrt);
        self.basis = basis;
    }

    /// Largest standard deviation of the search distribution along any axis.
    pub fn max_std(&self) -> f64 {
        self.sigma
            * self
                .cov
                .diagonal()
                .iter()
                .cloned()
                .fold(0.0, f64::max)
                .sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    pub generation: usize,
    pub evaluations: usize,
    pub best_value: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
pub struct CmaOutcome {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub history: Vec<GenerationSummary>,
}

/// Minimizes `objective` over the box `bounds` (pairs of raw lower/upper).
///
/// Non-finite objective values count as `+inf`.
pub fn minimize<F>(
    mut objective: F,
    bounds: &[(f64, f64)],
    config: &CmaConfig,
    seed: u64,
) -> Result<CmaOutcome>
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = bounds.len();
    if bounds
        .iter()
        .any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi))
    {
        return Err(Error::InvalidArgument(
            "CMA-ES box must be non-degenerate".into(),
        ));
    }
    let params = match config.population {
        Some(l) => CmaParams::with_population(dim, l)?,
        None => default_config(dim)?,
    };
    if config.max_evals < params.lambda {
        return Err(Error::InvalidArgument(format!(
            "CMA-ES budget {} is smaller than the population {}",
            config.max_evals, params.lambda
        )));
    }
    if !(config.initial_sigma > 0.0) {
        return Err(Error::InvalidArgument(
            "initial sigma must be positive".into(),
        ));
    }

    let to_raw = |z: &DVector<f64>| -> Vec<f64> {
        z.iter()
            .zip(bounds)
            .map(|(&u, &(lo, hi))| (lo + u * (hi - lo)).clamp(lo, hi))
            .collect()
    };
    let start = match &config.initial_mean {
        Some(m) => {
            if m.len() != dim {
                return Err(Error::InvalidArgument(
                    "initial mean has the wrong dimension".into(),
                ));
            }
            DVector::from_iterator(
                dim,
                m.iter()
                    .zip(bounds)
                    .map(|(&x, &(lo, hi))| ((x - lo) / (hi - lo)).clamp(0.0, 1.0)),
            )
        }
        None => DVector::from_element(dim, 0.5),
    };

    let mut rng = util::rng(seed);
    let mut state = CmaState::new(start, config.initial_sigma);
    let n = dim as f64;

    let mut best_point = to_raw(&state.mean);
    let mut best_value = f64::INFINITY;
    let mut evaluations = 0usize;
    let mut history = Vec::new();

    let mut population: Vec<DVector<f64>> = Vec::with_capacity(params.lambda);
    let mut values: Vec<f64> = Vec::with_capacity(params.lambda);

    while evaluations + params.lambda <= config.max_evals {
        state.decompose();
        population.clear();
        values.clear();
        for _ in 0..params.lambda {
            let mut candidate = None;
            for _ in 0..MAX_RESAMPLES {
                let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
                let y = &state.basis * z.component_mul(&state.scales);
                let x = &state.mean + y * state.sigma;
                if x.iter().all(|v| (0.0..=1.0).contains(v)) {
                    candidate = Some(x);
                    break;
                }
                candidate = Some(x);
            }
            let x = candidate
                .expect("at least one draw")
                .map(|v| v.clamp(0.0, 1.0));
            let raw = to_raw(&x);
            let mut f = objective(&raw);
            if !f.is_finite() {
                f = f64::INFINITY;
            }
            evaluations += 1;
            if f < best_value {
                best_value = f;
                best_point = raw;
            }
            population.push(x);
            values.push(f);
        }

        let mut order: Vec<usize> = (0..params.lambda).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

        let old_mean = state.mean.clone();
        let mut new_mean = DVector::zeros(dim);
        for (w, &i) in params.weights.iter().zip(&order) {
            new_mean += &population[i] * *w;
        }
        let y_w = (&new_mean - &old_mean) / state.sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_sqrt_y =
            &state.basis * (state.basis.transpose() * &y_w).component_div(&state.scales);
        state.p_sigma = &state.p_sigma * (1.0 - params.c_sigma)
            + inv_sqrt_y * (params.c_sigma * (2.0 - params.c_sigma) * params.mu_eff).sqrt();
        let ps_norm = state.p_sigma.norm();
        let denom = (1.0 - (1.0 - params.c_sigma).powi(2 * (state.generation as i32 + 1))).sqrt();
        let h_sigma = if ps_norm / denom < (1.4 + 2.0 / (n + 1.0)) * params.chi_n {
            1.0
        } else {
            0.0
        };
        state.p_c = &state.p_c * (1.0 - params.c_c)
            + &y_w * (h_sigma * (params.c_c * (2.0 - params.c_c) * params.mu_eff).sqrt());

        let mut rank_mu = DMatrix::zeros(dim, dim);
        for (w, &i) in params.weights.iter().zip(&order) {
            let y = (&population[i] - &old_mean) / state.sigma;
            rank_mu += (&y * y.transpose()) * *w;
        }
        let rank_one = &state.p_c * state.p_c.transpose();
        let correction = (1.0 - h_sigma) * params.c_c * (2.0 - params.c_c);
        state.cov = &state.cov * (1.0 - params.c_1 - params.c_mu)
            + (rank_one + &state.cov * correction) * params.c_1
            + rank_mu * params.c_mu;

        state.sigma *= ((params.c_sigma / params.d_sigma) * (ps_norm / params.chi_n - 1.0)).exp();
        state.sigma = state.sigma.min(1e3);
        state.mean = new_mean;
        state.generation += 1;

        history.push(GenerationSummary {
            generation: state.generation,
            evaluations,
            best_value,
            sigma: state.sigma,
        });

        if state.max_std() < config.tol_x || !state.sigma.is_finite() {
            break;
        }
    }

    Ok(CmaOutcome {
        best_point,
        best_value,
        evaluations,
        history,
    })
}
