//! Optimization runs: initial design, EQI infill and final evaluation, plus the
//! meta-learning variant that narrows the search space using the most similar
//! known task.

mod bench;

pub use bench::{
    paired_benchmark, synthetic_pairs, BenchConfig, BenchReport, ConditionStats, TaskPair, TaskRow,
    MIN_RELIABLE_PAIRS,
};

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::acquisition::{self, AcquisitionConfig, DEFAULT_BETA};
use crate::bounds_reduction::{self, ReductionConfig};
use crate::cmaes::{self, CmaConfig};
use crate::gp_surrogate::{FitOptions, GpModel};
use crate::lhs_design::{self, maximin_lhs};
use crate::memory::{
    IterationRecord, Memory, OptimizedParams, Phase, ProceduralEntry, ProceduralKind,
    ProceduralPayload,
};
use crate::param_space::ParameterSpace;
use crate::similarity::{self, DescriptorConfig};
use crate::util::{self, mix_seed};
use crate::{Error, Result};

/// A noisy black box returning a score in [0, 1] for raw parameters.
pub trait Evaluator {
    fn evaluate(&mut self, raw: &[f64]) -> Result<f64>;
}

impl<F> Evaluator for F
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    fn evaluate(&mut self, raw: &[f64]) -> Result<f64> {
        self(raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BudgetConfig {
    pub init: usize,
    pub infill: usize,
    pub final_reps: usize,
}

impl BudgetConfig {
    pub fn new(init: usize, infill: usize, final_reps: usize) -> Result<Self> {
        let b = BudgetConfig {
            init,
            infill,
            final_reps,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.init < 2 || self.infill == 0 || self.final_reps == 0 {
            return Err(Error::InvalidArgument(format!(
                "budget {self} needs init >= 2, infill >= 1 and final_reps >= 1"
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.init + self.infill + self.final_reps
    }
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            init: 10,
            infill: 20,
            final_reps: 5,
        }
    }
}

impl fmt::Display for BudgetConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.init, self.infill, self.final_reps)
    }
}

impl FromStr for BudgetConfig {
    type Err = Error;

    /// Parses `init,infill,final_reps`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad =
            || Error::InvalidArgument(format!("budget `{s}` is not of the form init,infill,final"));
        let [a, b, c] = parts.as_slice() else {
            return Err(bad());
        };
        let n = |v: &str| v.parse::<usize>().map_err(|_| bad());
        BudgetConfig::new(n(a)?, n(b)?, n(c)?)
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub budget: BudgetConfig,
    /// EQI quantile level.
    pub beta: f64,
    pub lhs_restarts: usize,
    /// Random points scored before the acquisition search; the best few seed CMA-ES.
    pub acq_probes: usize,
    pub acq_restarts: usize,
    /// Total CMA-ES evaluations spent on the acquisition per iteration.
    pub acq_evals: usize,
    /// CMA-ES evaluations for the posterior-mean search before the final phase.
    pub mean_evals: usize,
    pub fit: FitOptions,
    /// Hyperparameter search budget once a previous fit is available.
    pub refit: FitOptions,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            budget: BudgetConfig::default(),
            beta: DEFAULT_BETA,
            lhs_restarts: lhs_design::DEFAULT_RESTARTS,
            acq_probes: 200,
            acq_restarts: 3,
            acq_evals: 1500,
            mean_evals: 1000,
            fit: FitOptions::default(),
            refit: FitOptions {
                restarts: 1,
                evals_per_restart: 200,
                warm_start: None,
            },
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        AcquisitionConfig::new(self.beta, 0.0)?;
        if self.lhs_restarts == 0 || self.acq_restarts == 0 || self.acq_probes == 0 {
            return Err(Error::InvalidArgument(
                "optimizer restarts and probes must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Provenance of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    /// The space the run searched in.
    pub space: ParameterSpace,
    pub seed: u64,
    pub beta: f64,
    pub budget: BudgetConfig,
    /// Nearest known task and its descriptor distance, for meta-learning runs.
    pub similar_task: Option<(String, f64)>,
    pub warning: Option<String>,
    /// Posterior mean score at the chosen final point.
    pub predicted_score: f64,
    /// Whether the final point came from the posterior-mean search rather than the evaluated set.
    pub final_from_mean_search: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub task: String,
    pub run_id: u64,
    pub records: Vec<IterationRecord>,
    /// Best predicted parameters, raw units.
    pub best_params: Vec<f64>,
    pub final_scores: Vec<f64>,
    pub final_score: f64,
    pub metadata: RunMetadata,
}

impl RunResult {
    pub fn phase_scores(&self, phase: Phase) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.phase == phase)
            .map(|r| r.score)
            .collect()
    }

    pub fn initial_design_mean(&self) -> f64 {
        util::mean(&self.phase_scores(Phase::InitialDesign))
    }

    /// One log line per record, then a summary line.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for r in &self.records {
            let params: Vec<String> = r.params.iter().map(|p| format!("{p:.4}")).collect();
            let _ = writeln!(
                out,
                "{:>3} {:<14} {:.4}  [{}]",
                r.iteration,
                r.phase,
                r.score,
                params.join(", ")
            );
        }
        if let Some((label, d)) = &self.metadata.similar_task {
            let _ = writeln!(out, "similar task: {label} (distance {d:.6})");
        }
        if let Some(w) = &self.metadata.warning {
            let _ = writeln!(out, "warning: {w}");
        }
        let _ = writeln!(
            out,
            "task {} run {}: final score {:.4} (predicted {:.4}) over {} evaluations",
            self.task,
            self.run_id,
            self.final_score,
            self.metadata.predicted_score,
            self.final_scores.len()
        );
        out
    }
}

struct RunState<'a> {
    task: &'a str,
    run_id: u64,
    memory: Option<&'a Memory>,
    records: Vec<IterationRecord>,
}

impl RunState<'_> {
    fn evaluate(
        &mut self,
        evaluator: &mut dyn Evaluator,
        raw: &[f64],
        phase: Phase,
    ) -> Result<f64> {
        let aborted = |reason: String, completed: usize| Error::RunAborted {
            task: self.task.to_string(),
            run_id: self.run_id,
            completed,
            reason,
        };
        let score = match evaluator.evaluate(raw) {
            Ok(s) if (0.0..=1.0).contains(&s) => s,
            Ok(s) => {
                return Err(aborted(
                    format!("score {s} outside [0, 1]"),
                    self.records.len(),
                ))
            }
            Err(e) => return Err(aborted(e.to_string(), self.records.len())),
        };
        let record = IterationRecord {
            task: self.task.to_string(),
            run_id: self.run_id,
            iteration: self.records.len() as u32,
            phase,
            params: raw.to_vec(),
            score,
        };
        if let Some(mem) = self.memory {
            mem.record_iteration(&record)?;
        }
        self.records.push(record);
        Ok(score)
    }
}

/// Fits the surrogate to negated scores over scaled inputs.
fn fit_model(
    inputs: &[Vec<f64>],
    scores: &[f64],
    options: &FitOptions,
    seed: u64,
) -> Result<GpModel> {
    let targets: Vec<f64> = scores.iter().map(|s| -s).collect();
    GpModel::fit(inputs.to_vec(), targets, options, seed)
}

/// Maximizes EQI over the unit cube; returns the point and its EQI.
pub fn maximize_eqi(
    model: &GpModel,
    q_min: f64,
    config: &OptimizerConfig,
    tau_future: f64,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let acq = AcquisitionConfig::new(config.beta, tau_future)?;
    let dim = model.dim();
    let mut rng = util::rng(mix_seed(seed, 1));
    let mut probes: Vec<(f64, Vec<f64>)> = (0..config.acq_probes)
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            (acquisition::eqi(model, &u, &acq, q_min), u)
        })
        .collect();
    // evaluated points seed the search too: EQI is often largest next to them
    for x in model.inputs() {
        probes.push((acquisition::eqi(model, x, &acq, q_min), x.clone()));
    }
    probes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut best_val, mut best) = (probes[0].0, probes[0].1.clone());

    let unit = vec![(0.0, 1.0); dim];
    let per_restart = (config.acq_evals / config.acq_restarts).max(1);
    for (k, (_, start)) in probes.iter().take(config.acq_restarts).enumerate() {
        let cfg = CmaConfig {
            initial_mean: Some(start.clone()),
            initial_sigma: 0.15,
            max_evals: per_restart,
            tol_x: 1e-8,
            ..Default::default()
        };
        let out = cmaes::minimize(
            |u| -acquisition::eqi(model, u, &acq, q_min),
            &unit,
            &cfg,
            mix_seed(seed, 10 + k as u64),
        )?;
        if -out.best_value > best_val {
            best_val = -out.best_value;
            best = out.best_point;
        }
    }
    Ok((best, best_val))
}

/// The scaled initial design a run with `seed` starts from.
pub fn initial_design(
    dim: usize,
    n: usize,
    lhs_restarts: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    Ok(maximin_lhs(n, dim, mix_seed(seed, 1), lhs_restarts)?.into_points())
}

/// Runs initial design, EQI infill and final evaluation over `space`.
///
/// With a memory, every evaluation is appended to its episodic store as it
/// happens and the chosen parameters are saved as procedural knowledge. The run
/// id defaults to the next free id for `task` (or 0 without a memory).
pub fn run_optimization(
    task: &str,
    evaluator: &mut dyn Evaluator,
    space: &ParameterSpace,
    config: &OptimizerConfig,
    seed: u64,
    memory: Option<&Memory>,
    run_id: Option<u64>,
) -> Result<RunResult> {
    config.validate()?;
    crate::memory::validate_label(task)?;
    let run_id = match (run_id, memory) {
        (Some(id), _) => id,
        (None, Some(mem)) => mem.next_run_id(task)?,
        (None, None) => 0,
    };
    let budget = config.budget;
    let mut state = RunState {
        task,
        run_id,
        memory,
        records: Vec::with_capacity(budget.total()),
    };
    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(budget.init + budget.infill);
    let mut scores: Vec<f64> = Vec::with_capacity(budget.init + budget.infill);

    for u in initial_design(space.dim(), budget.init, config.lhs_restarts, seed)? {
        let raw = space.unscale(&u)?;
        scores.push(state.evaluate(evaluator, &raw, Phase::InitialDesign)?);
        inputs.push(u);
    }

    let mut warm = None;
    for it in 0..budget.infill {
        let it_seed = mix_seed(seed, 1000 + it as u64);
        let model = fit_with_warm_start(&inputs, &scores, config, warm.take(), it_seed)?;
        let beta = config.beta;
        let q = acquisition::q_min(&model, &inputs, beta)?;
        let (u, _) = maximize_eqi(&model, q, config, model.noise_std(), it_seed)?;
        warm = Some(model.hyper().clone());
        let raw = space.unscale(&u)?;
        scores.push(state.evaluate(evaluator, &raw, Phase::InfillEqi)?);
        inputs.push(u);
    }

    let model = fit_with_warm_start(&inputs, &scores, config, warm, mix_seed(seed, 2))?;
    let (best_u, predicted, from_search) =
        best_predicted(&model, &inputs, config, mix_seed(seed, 3))?;
    let best_params = space.unscale(&best_u)?;
    let mut final_scores = Vec::with_capacity(budget.final_reps);
    for _ in 0..budget.final_reps {
        final_scores.push(state.evaluate(evaluator, &best_params, Phase::FinalEval)?);
    }
    let final_score = util::mean(&final_scores);

    if let Some(mem) = memory {
        mem.store_procedural(&ProceduralEntry {
            task: task.to_string(),
            created_by_run: Some(run_id),
            payload: ProceduralPayload::OptimizedParams(OptimizedParams {
                names: space.names().map(str::to_string).collect(),
                values: best_params.clone(),
                predicted_score: predicted,
                final_score,
            }),
        })?;
    }

    Ok(RunResult {
        task: task.to_string(),
        run_id,
        records: state.records,
        best_params,
        final_scores,
        final_score,
        metadata: RunMetadata {
            space: space.clone(),
            seed,
            beta: config.beta,
            budget,
            similar_task: None,
            warning: None,
            predicted_score: predicted,
            final_from_mean_search: from_search,
        },
    })
}

fn fit_with_warm_start(
    inputs: &[Vec<f64>],
    scores: &[f64],
    config: &OptimizerConfig,
    warm: Option<crate::gp_surrogate::GpHyperParams>,
    seed: u64,
) -> Result<GpModel> {
    let options = match warm {
        Some(h) => FitOptions {
            warm_start: Some(h),
            ..config.refit.clone()
        },
        None => config.fit.clone(),
    };
    fit_model(inputs, scores, &options, seed)
}

/// Minimizes the posterior mean of the negated score over the evaluated points
/// and a CMA-ES search started at the best of them. Returns the point, its
/// predicted score and whether it came from the search.
fn best_predicted(
    model: &GpModel,
    inputs: &[Vec<f64>],
    config: &OptimizerConfig,
    seed: u64,
) -> Result<(Vec<f64>, f64, bool)> {
    let mut best = (inputs[0].clone(), f64::INFINITY);
    for x in inputs {
        let m = model.posterior(x).mean;
        if m < best.1 {
            best = (x.clone(), m);
        }
    }
    let mut from_search = false;
    if config.mean_evals > 0 {
        let cfg = CmaConfig {
            initial_mean: Some(best.0.clone()),
            initial_sigma: 0.1,
            max_evals: config.mean_evals,
            tol_x: 1e-8,
            ..Default::default()
        };
        let unit = vec![(0.0, 1.0); model.dim()];
        let out = cmaes::minimize(|u| model.posterior(u).mean, &unit, &cfg, seed)?;
        if out.best_value < best.1 {
            best = (out.best_point, out.best_value);
            from_search = true;
        }
    }
    Ok((best.0, -best.1, from_search))
}

/// Looks up the nearest known task by point cloud, restricts `default_space` to
/// its reduced bounds (computing and storing them if needed) and runs the
/// optimization there. An empty semantic memory falls back to `default_space`
/// with a warning in the metadata.
#[allow(clippy::too_many_arguments)]
pub fn run_with_meta_learning(
    task: &str,
    cloud: &[[f64; 3]],
    evaluator: &mut dyn Evaluator,
    default_space: &ParameterSpace,
    memory: &Memory,
    config: &OptimizerConfig,
    reduction: &ReductionConfig,
    descriptor: &DescriptorConfig,
    seed: u64,
    run_id: Option<u64>,
) -> Result<RunResult> {
    let (space, similar, warning) = match similarity::most_similar(cloud, memory, descriptor) {
        Ok((label, distance)) => {
            let reduced = match memory.load_reduced_bounds(&label) {
                Ok(r) => r,
                Err(Error::NotFound(_)) => {
                    let r = bounds_reduction::reduce_bounds(
                        &label,
                        memory,
                        default_space,
                        reduction,
                        seed,
                    )?;
                    memory.store_procedural(&ProceduralEntry {
                        task: label.clone(),
                        created_by_run: None,
                        payload: ProceduralPayload::ReducedBounds(r.clone()),
                    })?;
                    r
                }
                Err(e) => return Err(e),
            };
            (
                default_space.restrict(&reduced)?,
                Some((label, distance)),
                None,
            )
        }
        Err(Error::NotFound(msg)) => (
            default_space.clone(),
            None,
            Some(format!("{msg}; using default bounds")),
        ),
        Err(e) => return Err(e),
    };
    let mut result = run_optimization(task, evaluator, &space, config, seed, Some(memory), run_id)?;
    result.metadata.similar_task = similar;
    result.metadata.warning = warning;
    Ok(result)
}

/// Convenience: load stored reduced bounds for `task` if present.
pub fn stored_reduced_bounds(
    memory: &Memory,
    task: &str,
) -> Result<Option<bounds_reduction::ReducedBounds>> {
    match memory.load_procedural(task, ProceduralKind::ReducedBounds) {
        Ok(entry) => match entry.payload {
            ProceduralPayload::ReducedBounds(r) => Ok(Some(r)),
            ProceduralPayload::OptimizedParams(_) => Ok(None),
        },
        Err(Error::NotFound(_)) => Ok(None),
        Err(e) => Err(e),
    }
}
