//! Gaussian-process regression with a Matern 3/2 kernel and a fitted nugget.
//!
//! Hyperparameters are estimated by maximizing the log marginal likelihood with
//! multi-restart CMA-ES over a bounded log-space box. The likelihood search is
//! carried out on standardized targets; the returned model is expressed in the
//! units of the original targets.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::cmaes::{self, CmaConfig};
use crate::util;
use crate::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub const LENGTHSCALE_RANGE: (f64, f64) = (0.05, 10.0);
const SIGNAL_FLOOR: f64 = 1e-4;
const NOISE_FLOOR: f64 = 1e-6;
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GpHyperParams {
    pub signal_variance: f64,
    pub lengthscales: Vec<f64>,
    pub noise_variance: f64,
    pub prior_mean: f64,
}

impl GpHyperParams {
    pub fn isotropic(
        dim: usize,
        signal_variance: f64,
        lengthscale: f64,
        noise_variance: f64,
    ) -> Self {
        GpHyperParams {
            signal_variance,
            lengthscales: vec![lengthscale; dim],
            noise_variance,
            prior_mean: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::InvalidArgument(
                "signal variance must be positive".into(),
            ));
        }
        if self.lengthscales.is_empty()
            || self
                .lengthscales
                .iter()
                .any(|l| !(*l > 0.0 && l.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "lengthscales must be positive".into(),
            ));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(
                "noise variance must be non-negative".into(),
            ));
        }
        if !self.prior_mean.is_finite() {
            return Err(Error::InvalidArgument("prior mean must be finite".into()));
        }
        Ok(())
    }
}

#[inline]
fn matern_of_r(r: f64, signal_variance: f64) -> f64 {
    let a = SQRT3 * r;
    signal_variance * (1.0 + a) * (-a).exp()
}

/// `sigma^2 (1 + sqrt(3) r) exp(-sqrt(3) r)` with the lengthscale-weighted distance `r`.
pub fn matern32(x: &[f64], y: &[f64], hyper: &GpHyperParams) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    let r2: f64 = x
        .iter()
        .zip(y)
        .zip(&hyper.lengthscales)
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    matern_of_r(r2.sqrt(), hyper.signal_variance)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub variance: f64,
}

impl Posterior {
    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub restarts: usize,
    pub evals_per_restart: usize,
    /// Hyperparameters of a previous fit used as the first starting point.
    pub warm_start: Option<GpHyperParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            restarts: 2,
            evals_per_restart: 400,
            warm_start: None,
        }
    }
}

/// A GP conditioned on training data.
#[derive(Debug, Clone)]
pub struct GpModel {
    hyper: GpHyperParams,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    inv_lengthscales: Vec<f64>,
    /// Row-major lower Cholesky factor of `K + (tau^2 + jitter) I`.
    chol: Vec<f64>,
    alpha: Vec<f64>,
    jitter: f64,
    log_likelihood: f64,
    degenerate_targets: bool,
}

struct Factor {
    l: DMatrix<f64>,
    jitter: f64,
}

fn factorize(mut k: DMatrix<f64>, signal_variance: f64) -> Result<Factor> {
    let n = k.nrows();
    let mut jitter = JITTER_START;
    let mut applied = 0.0;
    loop {
        let step = (jitter - applied) * signal_variance;
        for i in 0..n {
            k[(i, i)] += step;
        }
        applied = jitter;
        if let Some(ch) = Cholesky::new(k.clone()) {
            return Ok(Factor {
                l: ch.unpack(),
                jitter,
            });
        }
        if jitter >= JITTER_MAX {
            return Err(Error::Numerical(
                "kernel matrix is not positive definite even with maximal jitter".into(),
            ));
        }
        jitter *= 10.0;
    }
}

fn forward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&b[..i]).map(|(a, x)| a * x).sum();
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on `(inputs, targets)`.
    pub fn new(hyper: GpHyperParams, inputs: Vec<Vec<f64>>, targets: Vec<f64>) -> Result<Self> {
        hyper.validate()?;
        let dim = hyper.lengthscales.len();
        if inputs.len() != targets.len() {
            return Err(Error::InvalidArgument(
                "inputs and targets differ in length".into(),
            ));
        }
        if inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::InvalidArgument(format!(
                "inputs must have dimension {dim}"
            )));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidArgument("targets must be finite".into()));
        }
        let n = inputs.len();
        let inv_lengthscales: Vec<f64> = hyper.lengthscales.iter().map(|l| 1.0 / l).collect();
        let mut model = GpModel {
            hyper,
            inputs,
            targets,
            inv_lengthscales,
            chol: Vec::new(),
            alpha: Vec::new(),
            jitter: 0.0,
            log_likelihood: 0.0,
            degenerate_targets: false,
        };
        if n == 0 {
            return Ok(model);
        }
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = model.kernel(&model.inputs[i], &model.inputs[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] += model.hyper.noise_variance;
        }
        let factor = factorize(k, model.hyper.signal_variance)?;
        let mut chol = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                chol[i * n + j] = factor.l[(i, j)];
            }
        }
        let mut v: Vec<f64> = model
            .targets
            .iter()
            .map(|y| y - model.hyper.prior_mean)
            .collect();
        forward_solve(&chol, n, &mut v);
        let quad: f64 = v.iter().map(|x| x * x).sum();
        let log_det: f64 = (0..n).map(|i| chol[i * n + i].ln()).sum();
        model.log_likelihood = -0.5 * quad - log_det - 0.5 * n as f64 * LN_2PI;
        // back substitution: alpha = L^-T v
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|k| chol[k * n + i] * v[k]).sum();
            v[i] = (v[i] - s) / chol[i * n + i];
        }
        model.alpha = v;
        model.chol = chol;
        model.jitter = factor.jitter;
        Ok(model)
    }

    /// Fits hyperparameters by maximum marginal likelihood and conditions on the data.
    pub fn fit(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        options: &FitOptions,
        seed: u64,
    ) -> Result<Self> {
        let n = inputs.len();
        if n < 2 {
            return Err(Error::InsufficientData { needed: 2, got: n });
        }
        if inputs.len() != targets.len() {
            return Err(Error::InvalidArgument(
                "inputs and targets differ in length".into(),
            ));
        }
        let dim = inputs[0].len();
        if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
            return Err(Error::InvalidArgument(
                "inputs need a common nonzero dimension".into(),
            ));
        }
        if inputs.iter().flatten().any(|u| !(0.0..=1.0).contains(u)) {
            return Err(Error::InvalidArgument(
                "GP inputs must lie in the unit cube".into(),
            ));
        }
        if targets.iter().any(|y| !y.is_finite()) {
            return Err(Error::InvalidArgument("targets must be finite".into()));
        }

        let mean = util::mean(&targets);
        let var = targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n as f64;
        let degenerate = !(var > 1e-300);

        if degenerate {
            let hyper = GpHyperParams {
                signal_variance: SIGNAL_FLOOR,
                lengthscales: vec![1.0; dim],
                noise_variance: NOISE_FLOOR,
                prior_mean: mean,
            };
            let mut model = GpModel::new(hyper, inputs, targets)?;
            model.degenerate_targets = true;
            return Ok(model);
        }

        let sd = var.sqrt();
        let standardized: Vec<f64> = targets.iter().map(|y| (y - mean) / sd).collect();
        let objective = LikelihoodSurface::new(&inputs, &standardized);

        let mut bounds = vec![(LENGTHSCALE_RANGE.0.ln(), LENGTHSCALE_RANGE.1.ln()); dim];
        bounds.push((SIGNAL_FLOOR.ln(), (25.0 + SIGNAL_FLOOR).ln()));
        bounds.push((NOISE_FLOOR.ln(), (1.0 + NOISE_FLOOR).ln()));

        let mut rng = util::rng(seed);
        let mut starts: Vec<(Vec<f64>, f64)> = Vec::new();
        if let Some(w) = &options.warm_start {
            if w.lengthscales.len() == dim {
                let mut theta: Vec<f64> = w.lengthscales.iter().map(|l| l.ln()).collect();
                theta.push((w.signal_variance / var).ln());
                theta.push((w.noise_variance / var).ln());
                let theta = theta
                    .iter()
                    .zip(&bounds)
                    .map(|(t, &(lo, hi))| {
                        if t.is_finite() {
                            t.clamp(lo, hi)
                        } else {
                            (lo + hi) / 2.0
                        }
                    })
                    .collect();
                starts.push((theta, 0.15));
            }
        }
        if starts.is_empty() {
            let mut center: Vec<f64> = vec![0.2f64.ln(); dim];
            center.push(0.0);
            center.push(0.1f64.ln());
            starts.push((center, 0.3));
        }
        while starts.len() < options.restarts.max(1) {
            let theta = bounds
                .iter()
                .map(|&(lo, hi)| rng.random_range(lo..hi))
                .collect();
            starts.push((theta, 0.3));
        }

        let mut best: Option<(Vec<f64>, f64)> = None;
        for (k, (start, sigma)) in starts.into_iter().enumerate() {
            let cfg = CmaConfig {
                initial_mean: Some(start),
                initial_sigma: sigma,
                max_evals: options.evals_per_restart.max(32),
                population: None,
                tol_x: 1e-6,
            };
            let out = cmaes::minimize(
                |t| objective.neg_log_likelihood(t),
                &bounds,
                &cfg,
                util::mix_seed(seed, k as u64),
            )?;
            if best.as_ref().is_none_or(|(_, v)| out.best_value < *v) {
                best = Some((out.best_point, out.best_value));
            }
        }
        let (theta, value) = best.expect("at least one restart");
        if !value.is_finite() {
            return Err(Error::Numerical(
                "no finite likelihood found while fitting the GP".into(),
            ));
        }
        let hyper = GpHyperParams {
            lengthscales: theta[..dim].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[dim].exp() * var,
            noise_variance: theta[dim + 1].exp() * var,
            prior_mean: mean,
        };
        GpModel::new(hyper, inputs, targets)
    }

    #[inline]
    fn kernel(&self, x: &[f64], y: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(y)
            .zip(&self.inv_lengthscales)
            .map(|((a, b), il)| ((a - b) * il).powi(2))
            .sum();
        matern_of_r(r2.sqrt(), self.hyper.signal_variance)
    }

    pub fn posterior(&self, x: &[f64]) -> Posterior {
        let n = self.inputs.len();
        if n == 0 {
            return Posterior {
                mean: self.hyper.prior_mean,
                variance: self.hyper.signal_variance,
            };
        }
        let mut k: Vec<f64> = self.inputs.iter().map(|xi| self.kernel(x, xi)).collect();
        let mean =
            self.hyper.prior_mean + k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum::<f64>();
        forward_solve(&self.chol, n, &mut k);
        let explained: f64 = k.iter().map(|v| v * v).sum();
        let variance = (self.hyper.signal_variance - explained).max(0.0);
        Posterior { mean, variance }
    }

    pub fn hyper(&self) -> &GpHyperParams {
        &self.hyper
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn dim(&self) -> usize {
        self.hyper.lengthscales.len()
    }

    pub fn noise_std(&self) -> f64 {
        self.hyper.noise_variance.sqrt()
    }

    /// Log marginal likelihood of the training targets under this model.
    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    /// Diagonal jitter (relative to the signal variance) needed for the factorization.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Set when all training targets were equal and the fit fell back to floors.
    pub fn degenerate_targets(&self) -> bool {
        self.degenerate_targets
    }
}

/// Log marginal likelihood of `targets` for fixed hyperparameters.
pub fn log_marginal_likelihood(
    inputs: &[Vec<f64>],
    targets: &[f64],
    hyper: &GpHyperParams,
) -> Result<f64> {
    Ok(GpModel::new(hyper.clone(), inputs.to_vec(), targets.to_vec())?.log_marginal_likelihood())
}

/// Negative log likelihood over log-hyperparameters, with cached squared differences.
struct LikelihoodSurface<'a> {
    n: usize,
    dim: usize,
    sq_diffs: Vec<f64>,
    targets: &'a [f64],
}

impl<'a> LikelihoodSurface<'a> {
    fn new(inputs: &[Vec<f64>], targets: &'a [f64]) -> Self {
        let n = inputs.len();
        let dim = inputs[0].len();
        let mut sq_diffs = Vec::with_capacity(n * (n - 1) / 2 * dim);
        for i in 0..n {
            for j in 0..i {
                sq_diffs.extend(
                    inputs[i]
                        .iter()
                        .zip(&inputs[j])
                        .map(|(a, b)| (a - b) * (a - b)),
                );
            }
        }
        LikelihoodSurface {
            n,
            dim,
            sq_diffs,
            targets,
        }
    }

    fn neg_log_likelihood(&self, theta: &[f64]) -> f64 {
        let (n, dim) = (self.n, self.dim);
        let inv_l2: Vec<f64> = theta[..dim].iter().map(|t| (-2.0 * t).exp()).collect();
        let s2 = theta[dim].exp();
        let tau2 = theta[dim + 1].exp();
        let mut k = DMatrix::zeros(n, n);
        let mut chunks = self.sq_diffs.chunks_exact(dim);
        for i in 0..n {
            for j in 0..i {
                let d = chunks.next().expect("cached pair");
                let r2: f64 = d.iter().zip(&inv_l2).map(|(a, b)| a * b).sum();
                let v = matern_of_r(r2.sqrt(), s2);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
            k[(i, i)] = s2 + tau2 + JITTER_START * s2;
        }
        let Some(ch) = Cholesky::new(k) else {
            return f64::INFINITY;
        };
        let y = DVector::from_column_slice(self.targets);
        let v = ch.l_dirty().solve_lower_triangular(&y);
        let Some(v) = v else { return f64::INFINITY };
        let quad = v.norm_squared();
        let log_det: f64 = (0..n).map(|i| ch.l_dirty()[(i, i)].ln()).sum();
        0.5 * quad + log_det + 0.5 * n as f64 * LN_2PI
    }
}
