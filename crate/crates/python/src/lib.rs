//! Python bindings for `metabounds`.

use std::path::PathBuf;

use pyo3::exceptions::{PyLookupError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use metabounds::acquisition::{self, AcquisitionConfig};
use metabounds::bounds_reduction::{self, ReductionConfig};
use metabounds::cmaes::{self, CmaConfig};
use metabounds::gp_surrogate::{FitOptions, GpHyperParams, GpModel};
use metabounds::lhs_design;
use metabounds::memory::{self, SemanticEntry};
use metabounds::orchestrator::{self, BenchConfig, BudgetConfig, Evaluator, OptimizerConfig};
use metabounds::param_space;
use metabounds::shapes::{self, ShapeKind};
use metabounds::sim_blackbox::{self, Difficulty};
use metabounds::similarity::{self, DescriptorConfig};
use metabounds::stats_tests;
use metabounds::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NotFound(_) => PyLookupError::new_err(e.to_string()),
        Error::InvalidArgument(_)
        | Error::InvalidSpace(_)
        | Error::BoundsViolation { .. }
        | Error::InsufficientData { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T> OrRaise<T> for metabounds::Result<T> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn budget(b: (usize, usize, usize)) -> PyResult<BudgetConfig> {
    BudgetConfig::new(b.0, b.1, b.2).or_raise()
}

fn parse_or_raise<T: std::str::FromStr<Err = Error>>(s: &str) -> PyResult<T> {
    s.parse().or_raise()
}

// ------------------------------------------------------------------- space

/// Box-bounded parameter space; defaults to the nine grasping parameters.
#[pyclass(module = "metabounds_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct ParameterSpace {
    inner: param_space::ParameterSpace,
}

#[pymethods]
impl ParameterSpace {
    #[new]
    #[pyo3(signature = (bounds=None, name="custom"))]
    fn new(bounds: Option<Vec<(String, f64, f64)>>, name: &str) -> PyResult<Self> {
        let inner = match bounds {
            None => param_space::ParameterSpace::default_grasping(),
            Some(b) => param_space::ParameterSpace::new(
                name,
                b.into_iter()
                    .map(|(n, lo, hi)| param_space::ParameterBound::new(n, lo, hi))
                    .collect(),
            )
            .or_raise()?,
        };
        Ok(ParameterSpace { inner })
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn bounds(&self) -> Vec<(String, f64, f64)> {
        self.inner
            .bounds()
            .iter()
            .map(|b| (b.name.clone(), b.lower, b.upper))
            .collect()
    }

    fn scale(&self, raw: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.scale(&raw).or_raise()
    }

    fn unscale(&self, unit: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.unscale(&unit).or_raise()
    }

    fn contains(&self, raw: Vec<f64>) -> bool {
        self.inner.contains(&raw)
    }

    fn restrict(&self, reduced: &ReducedBounds) -> PyResult<Self> {
        Ok(ParameterSpace {
            inner: self.inner.restrict(&reduced.inner).or_raise()?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __len__(&self) -> usize {
        self.inner.dim()
    }

    fn __repr__(&self) -> String {
        format!(
            "ParameterSpace({:?}, dim={})",
            self.inner.name(),
            self.inner.dim()
        )
    }
}

// ---------------------------------------------------------------------- gp

/// Matern 3/2 Gaussian process over the unit cube.
#[pyclass(module = "metabounds_py", frozen)]
struct GaussianProcess {
    inner: GpModel,
}

#[pymethods]
impl GaussianProcess {
    /// Conditions a GP with fixed hyperparameters.
    #[new]
    #[pyo3(signature = (inputs, targets, signal_variance, lengthscales, noise_variance, prior_mean=0.0))]
    fn new(
        inputs: Vec<Vec<f64>>,
        targets: Vec<f64>,
        signal_variance: f64,
        lengthscales: Vec<f64>,
        noise_variance: f64,
        prior_mean: f64,
    ) -> PyResult<Self> {
        let hyper = GpHyperParams {
            signal_variance,
            lengthscales,
            noise_variance,
            prior_mean,
        };
        Ok(GaussianProcess {
            inner: GpModel::new(hyper, inputs, targets).or_raise()?,
        })
    }

    /// Fits hyperparameters by maximum marginal likelihood.
    #[staticmethod]
    #[pyo3(signature = (inputs, targets, seed=0))]
    fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, seed: u64) -> PyResult<Self> {
        Ok(GaussianProcess {
            inner: GpModel::fit(inputs, targets, &FitOptions::default(), seed).or_raise()?,
        })
    }

    /// Posterior mean and latent variance at `x`.
    fn posterior(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected a point of dimension {}",
                self.inner.dim()
            )));
        }
        let p = self.inner.posterior(&x);
        Ok((p.mean, p.variance))
    }

    fn hyperparameters<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let h = self.inner.hyper();
        let d = PyDict::new(py);
        d.set_item("signal_variance", h.signal_variance)?;
        d.set_item("lengthscales", h.lengthscales.clone())?;
        d.set_item("noise_variance", h.noise_variance)?;
        d.set_item("prior_mean", h.prior_mean)?;
        Ok(d)
    }

    fn log_marginal_likelihood(&self) -> f64 {
        self.inner.log_marginal_likelihood()
    }

    /// Lowest `beta`-quantile over the training inputs.
    #[pyo3(signature = (beta=acquisition::DEFAULT_BETA))]
    fn q_min(&self, beta: f64) -> PyResult<f64> {
        acquisition::q_min(&self.inner, self.inner.inputs(), beta).or_raise()
    }

    /// Expected quantile improvement at `x`; `tau` defaults to the fitted noise.
    #[pyo3(signature = (x, q_min, beta=acquisition::DEFAULT_BETA, tau=None))]
    fn eqi(&self, x: Vec<f64>, q_min: f64, beta: f64, tau: Option<f64>) -> PyResult<f64> {
        let cfg = AcquisitionConfig::new(beta, tau.unwrap_or_else(|| self.inner.noise_std()))
            .or_raise()?;
        self.posterior(x.clone())?;
        Ok(acquisition::eqi(&self.inner, &x, &cfg, q_min))
    }

    fn expected_improvement(&self, x: Vec<f64>, incumbent: f64) -> PyResult<f64> {
        self.posterior(x.clone())?;
        Ok(acquisition::expected_improvement(
            &self.inner,
            &x,
            incumbent,
        ))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.inputs().len()
    }
}

// --------------------------------------------------------------- reduction

#[pyclass(module = "metabounds_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct ReducedBounds {
    inner: bounds_reduction::ReducedBounds,
}

#[pymethods]
impl ReducedBounds {
    #[getter]
    fn task(&self) -> &str {
        &self.inner.task
    }

    #[getter]
    fn insufficient_data(&self) -> bool {
        self.inner.provenance.insufficient_data
    }

    #[getter]
    fn ranges(&self) -> Vec<(f64, f64)> {
        self.inner.ranges()
    }

    /// One `(name, decision, lower, upper)` tuple per parameter.
    #[getter]
    fn params(&self) -> Vec<(String, String, f64, f64)> {
        self.inner
            .params
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    p.decision.as_str().to_string(),
                    p.reduced.0,
                    p.reduced.1,
                )
            })
            .collect()
    }

    fn report(&self) -> String {
        bounds_reduction::format_bounds_report(&self.inner)
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "ReducedBounds({:?}, {} params)",
            self.inner.task,
            self.inner.params.len()
        )
    }
}

fn reduction_config(
    best_fraction: f64,
    alpha_dm: f64,
    alpha_w: f64,
    percentiles: (f64, f64),
) -> PyResult<ReductionConfig> {
    let cfg = ReductionConfig {
        best_fraction,
        alpha_dm,
        alpha_w,
        lo_percentile: percentiles.0,
        hi_percentile: percentiles.1,
        ..Default::default()
    };
    cfg.validate().or_raise()?;
    Ok(cfg)
}

// ------------------------------------------------------------------ memory

type StoredIteration = (u64, u32, String, Vec<f64>, f64);

/// Episodic, procedural and semantic stores under one directory.
#[pyclass(module = "metabounds_py", frozen)]
struct Memory {
    inner: memory::Memory,
}

#[pymethods]
impl Memory {
    #[new]
    fn new(root: PathBuf) -> PyResult<Self> {
        Ok(Memory {
            inner: memory::Memory::open(root).or_raise()?,
        })
    }

    #[getter]
    fn root(&self) -> PathBuf {
        self.inner.root().to_path_buf()
    }

    /// Tasks with stored iterations.
    fn tasks(&self) -> PyResult<Vec<String>> {
        self.inner.episodic_tasks().or_raise()
    }

    /// Tasks with stored point clouds.
    fn clouds(&self) -> PyResult<Vec<String>> {
        self.inner.list_tasks().or_raise()
    }

    /// `(run_id, iteration, phase, params, score)` for every stored iteration.
    fn iterations(&self, task: &str) -> PyResult<Vec<StoredIteration>> {
        Ok(self
            .inner
            .query_iterations(task)
            .or_raise()?
            .into_iter()
            .map(|r| {
                (
                    r.run_id,
                    r.iteration,
                    r.phase.as_str().to_string(),
                    r.params,
                    r.score,
                )
            })
            .collect())
    }

    fn store_cloud(&self, task: String, cloud: Vec<[f64; 3]>) -> PyResult<()> {
        self.inner
            .store_cloud(&SemanticEntry {
                task,
                cloud,
                descriptor: None,
            })
            .or_raise()
    }

    /// Label and descriptor distance of the stored object closest to `cloud`.
    fn most_similar(&self, cloud: Vec<[f64; 3]>) -> PyResult<(String, f64)> {
        similarity::most_similar(&cloud, &self.inner, &DescriptorConfig::default()).or_raise()
    }

    /// Computes reduced bounds from the task's stored iterations and stores them.
    #[pyo3(signature = (task, seed=0, best_fraction=0.35, alpha_dm=0.15, alpha_w=0.15, percentiles=(0.05, 0.95)))]
    fn reduce_bounds(
        &self,
        task: &str,
        seed: u64,
        best_fraction: f64,
        alpha_dm: f64,
        alpha_w: f64,
        percentiles: (f64, f64),
    ) -> PyResult<ReducedBounds> {
        let cfg = reduction_config(best_fraction, alpha_dm, alpha_w, percentiles)?;
        let space = param_space::ParameterSpace::default_grasping();
        let rb =
            bounds_reduction::reduce_bounds(task, &self.inner, &space, &cfg, seed).or_raise()?;
        self.inner
            .store_procedural(&memory::ProceduralEntry {
                task: task.to_string(),
                created_by_run: None,
                payload: memory::ProceduralPayload::ReducedBounds(rb.clone()),
            })
            .or_raise()?;
        Ok(ReducedBounds { inner: rb })
    }

    fn load_reduced_bounds(&self, task: &str) -> PyResult<ReducedBounds> {
        Ok(ReducedBounds {
            inner: self.inner.load_reduced_bounds(task).or_raise()?,
        })
    }
}

// --------------------------------------------------------------- simulator

/// Synthetic bin-picking task with noisy 15-attempt episodes.
#[pyclass(module = "metabounds_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct SimTask {
    inner: sim_blackbox::SimTask,
}

#[pymethods]
impl SimTask {
    #[new]
    #[pyo3(signature = (label, seed, difficulty="medium", dim=9))]
    fn new(label: String, seed: u64, difficulty: &str, dim: usize) -> PyResult<Self> {
        let difficulty: Difficulty = parse_or_raise(difficulty)?;
        Ok(SimTask {
            inner: sim_blackbox::make_task(label, seed, difficulty, dim),
        })
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(SimTask {
            inner: sim_blackbox::SimTask::parse(text, std::path::Path::new("<string>"))
                .or_raise()?,
        })
    }

    /// A related task with bump centers and heights moved by `1 - similarity`.
    fn perturb(&self, similarity: f64, seed: u64, label: String) -> Self {
        SimTask {
            inner: sim_blackbox::perturb_task(&self.inner, similarity, seed, label),
        }
    }

    #[getter]
    fn label(&self) -> &str {
        &self.inner.label
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn peak_success(&self) -> f64 {
        self.inner.peak_success()
    }

    #[getter]
    fn optimum(&self) -> Option<Vec<f64>> {
        self.inner.optimum().map(<[f64]>::to_vec)
    }

    fn success_prob(&self, u: Vec<f64>) -> PyResult<f64> {
        self.check(&u)?;
        Ok(self.inner.success_prob(&u))
    }

    fn expected_score(&self, u: Vec<f64>) -> PyResult<f64> {
        self.check(&u)?;
        Ok(self.inner.expected_score(&u))
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "SimTask({:?}, {}, seed={})",
            self.inner.label, self.inner.difficulty, self.inner.seed
        )
    }
}

impl SimTask {
    fn check(&self, u: &[f64]) -> PyResult<()> {
        if u.len() != self.inner.dim {
            return Err(PyValueError::new_err(format!(
                "expected {} scaled coordinates",
                self.inner.dim
            )));
        }
        Ok(())
    }
}

/// Seeded episode stream of a task; calling it with raw parameters returns a score.
#[pyclass(module = "metabounds_py")]
struct SimEvaluator {
    inner: sim_blackbox::SimEvaluator,
}

#[pymethods]
impl SimEvaluator {
    #[new]
    #[pyo3(signature = (task, seed=0, space=None))]
    fn new(task: &SimTask, seed: u64, space: Option<&ParameterSpace>) -> Self {
        let space = space.map_or_else(param_space::ParameterSpace::default_grasping, |s| {
            s.inner.clone()
        });
        SimEvaluator {
            inner: sim_blackbox::SimEvaluator::new(task.inner.clone(), space, seed),
        }
    }

    fn __call__(&mut self, raw: Vec<f64>) -> PyResult<f64> {
        self.inner.evaluate(&raw).or_raise()
    }
}

// -------------------------------------------------------------- optimizer

#[pyclass(module = "metabounds_py", frozen)]
struct RunResult {
    inner: orchestrator::RunResult,
}

#[pymethods]
impl RunResult {
    #[getter]
    fn task(&self) -> &str {
        &self.inner.task
    }

    #[getter]
    fn run_id(&self) -> u64 {
        self.inner.run_id
    }

    #[getter]
    fn best_params(&self) -> Vec<f64> {
        self.inner.best_params.clone()
    }

    #[getter]
    fn final_score(&self) -> f64 {
        self.inner.final_score
    }

    #[getter]
    fn final_scores(&self) -> Vec<f64> {
        self.inner.final_scores.clone()
    }

    #[getter]
    fn initial_design_mean(&self) -> f64 {
        self.inner.initial_design_mean()
    }

    #[getter]
    fn predicted_score(&self) -> f64 {
        self.inner.metadata.predicted_score
    }

    #[getter]
    fn similar_task(&self) -> Option<(String, f64)> {
        self.inner.metadata.similar_task.clone()
    }

    #[getter]
    fn warning(&self) -> Option<String> {
        self.inner.metadata.warning.clone()
    }

    #[getter]
    fn space(&self) -> ParameterSpace {
        ParameterSpace {
            inner: self.inner.metadata.space.clone(),
        }
    }

    /// `(iteration, phase, params, score)` per evaluation.
    #[getter]
    fn records(&self) -> Vec<(u32, String, Vec<f64>, f64)> {
        self.inner
            .records
            .iter()
            .map(|r| {
                (
                    r.iteration,
                    r.phase.as_str().to_string(),
                    r.params.clone(),
                    r.score,
                )
            })
            .collect()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult({:?}, run {}, final {:.4})",
            self.inner.task, self.inner.run_id, self.inner.final_score
        )
    }
}

/// Evaluator backed by either a `SimEvaluator` or any Python callable.
struct PyEvaluator<'py> {
    target: Bound<'py, PyAny>,
}

impl Evaluator for PyEvaluator<'_> {
    fn evaluate(&mut self, raw: &[f64]) -> metabounds::Result<f64> {
        self.target
            .call1((raw.to_vec(),))
            .and_then(|v| v.extract::<f64>())
            .map_err(|e| Error::Evaluation(e.to_string()))
    }
}

fn optimizer_config(b: (usize, usize, usize), beta: f64) -> PyResult<OptimizerConfig> {
    let cfg = OptimizerConfig {
        budget: budget(b)?,
        beta,
        ..Default::default()
    };
    cfg.validate().or_raise()?;
    Ok(cfg)
}

/// Runs initial design, EQI infill and final evaluation against `evaluator`,
/// a callable taking raw parameters and returning a score in [0, 1].
#[pyfunction]
#[pyo3(signature = (task, evaluator, seed=0, budget=(10, 20, 5), beta=acquisition::DEFAULT_BETA, space=None, memory=None))]
fn optimize(
    task: &str,
    evaluator: Bound<'_, PyAny>,
    seed: u64,
    budget: (usize, usize, usize),
    beta: f64,
    space: Option<&ParameterSpace>,
    memory: Option<&Memory>,
) -> PyResult<RunResult> {
    let cfg = optimizer_config(budget, beta)?;
    let space = space.map_or_else(param_space::ParameterSpace::default_grasping, |s| {
        s.inner.clone()
    });
    let mut ev = PyEvaluator { target: evaluator };
    let inner = orchestrator::run_optimization(
        task,
        &mut ev,
        &space,
        &cfg,
        seed,
        memory.map(|m| &m.inner),
        None,
    )
    .or_raise()?;
    Ok(RunResult { inner })
}

/// Optimizes a new object inside the reduced bounds of its most similar stored task.
#[pyfunction]
#[pyo3(signature = (task, cloud, evaluator, memory, seed=0, budget=(10, 20, 5), beta=acquisition::DEFAULT_BETA))]
fn optimize_with_meta_learning(
    task: &str,
    cloud: Vec<[f64; 3]>,
    evaluator: Bound<'_, PyAny>,
    memory: &Memory,
    seed: u64,
    budget: (usize, usize, usize),
    beta: f64,
) -> PyResult<RunResult> {
    let cfg = optimizer_config(budget, beta)?;
    let space = param_space::ParameterSpace::default_grasping();
    let mut ev = PyEvaluator { target: evaluator };
    let inner = orchestrator::run_with_meta_learning(
        task,
        &cloud,
        &mut ev,
        &space,
        &memory.inner,
        &cfg,
        &ReductionConfig::default(),
        &DescriptorConfig::default(),
        seed,
        None,
    )
    .or_raise()?;
    Ok(RunResult { inner })
}

/// Paired plain vs meta-learning comparison on synthetic task pairs.
/// Returns a dict with the rendered table, the per-run CSV and the summary numbers.
#[pyfunction]
#[pyo3(signature = (pairs=7, runs=6, knowledge_runs=6, similarity=0.9, seed=0, budget=(10, 20, 5), jobs=1))]
#[allow(clippy::too_many_arguments)]
fn benchmark<'py>(
    py: Python<'py>,
    pairs: usize,
    runs: usize,
    knowledge_runs: usize,
    similarity: f64,
    seed: u64,
    budget: (usize, usize, usize),
    jobs: usize,
) -> PyResult<Bound<'py, PyDict>> {
    if pairs == 0 || runs == 0 {
        return Err(PyValueError::new_err("pairs and runs must be positive"));
    }
    let config = BenchConfig {
        runs_per_condition: runs,
        knowledge_runs,
        optimizer: optimizer_config(budget, acquisition::DEFAULT_BETA)?,
        jobs,
        ..Default::default()
    };
    let space = param_space::ParameterSpace::default_grasping();
    let report = py
        .detach(|| -> metabounds::Result<_> {
            let scratch = tempfile::tempdir()?;
            let mem = memory::Memory::open(scratch.path())?;
            let task_pairs = orchestrator::synthetic_pairs(pairs, similarity, seed, space.dim());
            orchestrator::paired_benchmark(&task_pairs, &mem, &space, &config, seed)
        })
        .or_raise()?;
    let d = PyDict::new(py);
    d.set_item("text", report.to_text())?;
    d.set_item("csv", report.to_csv())?;
    d.set_item("baseline", report.overall_baseline())?;
    d.set_item("meta", report.overall_meta())?;
    d.set_item("p_value", report.p_value())?;
    d.set_item("reliable", report.reliable())?;
    d.set_item("worst_run_wins", report.worst_run_wins())?;
    Ok(d)
}

// ------------------------------------------------------------------ tools

/// Maximin Latin hypercube of `n` points in `[0, 1)^m`.
#[pyfunction]
#[pyo3(signature = (n, m, seed=0, restarts=lhs_design::DEFAULT_RESTARTS))]
fn maximin_lhs(n: usize, m: usize, seed: u64, restarts: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(lhs_design::maximin_lhs(n, m, seed, restarts)
        .or_raise()?
        .into_points())
}

/// Minimizes `f` over a box. Returns `(x, f(x), evaluations)`.
#[pyfunction]
#[pyo3(signature = (f, bounds, x0=None, sigma=0.3, max_evals=1000, seed=0))]
fn cmaes_minimize(
    f: Bound<'_, PyAny>,
    bounds: Vec<(f64, f64)>,
    x0: Option<Vec<f64>>,
    sigma: f64,
    max_evals: usize,
    seed: u64,
) -> PyResult<(Vec<f64>, f64, usize)> {
    let cfg = CmaConfig {
        initial_mean: x0,
        initial_sigma: sigma,
        max_evals,
        ..Default::default()
    };
    let mut raised: Option<PyErr> = None;
    let out = cmaes::minimize(
        |x| {
            if raised.is_some() {
                return f64::INFINITY;
            }
            match f.call1((x.to_vec(),)).and_then(|v| v.extract::<f64>()) {
                Ok(v) => v,
                Err(e) => {
                    raised = Some(e);
                    f64::INFINITY
                }
            }
        },
        &bounds,
        &cfg,
        seed,
    )
    .or_raise()?;
    if let Some(e) = raised {
        return Err(e);
    }
    Ok((out.best_point, out.best_value, out.evaluations))
}

/// Two-sided signed-rank test of `samples` against `mu0`: `(statistic, p)`.
#[pyfunction]
#[pyo3(signature = (samples, mu0=0.0))]
fn wilcoxon(samples: Vec<f64>, mu0: f64) -> PyResult<(f64, f64)> {
    let t = stats_tests::wilcoxon_signed_rank(&samples, mu0).or_raise()?;
    Ok((t.statistic, t.p_value))
}

/// Entropy-based uniformity test on `[0, 1]` data: `(statistic, p)`.
#[pyfunction]
#[pyo3(signature = (samples, seed=0))]
fn uniformity_test(samples: Vec<f64>, seed: u64) -> PyResult<(f64, f64)> {
    let t = stats_tests::dudewicz_vdm_test(&samples, seed).or_raise()?;
    Ok((t.statistic, t.p_value))
}

#[pyfunction]
#[pyo3(signature = (samples, window=None))]
fn vasicek_entropy(samples: Vec<f64>, window: Option<usize>) -> PyResult<f64> {
    let w = window.unwrap_or_else(|| stats_tests::dvm_window(samples.len()));
    stats_tests::vasicek_entropy(&samples, w).or_raise()
}

#[pyfunction]
fn percentile(samples: Vec<f64>, q: f64) -> PyResult<f64> {
    stats_tests::percentile(&samples, q).or_raise()
}

/// Samples `n` surface points of a built-in shape.
#[pyfunction]
#[pyo3(signature = (kind, n=600, seed=0))]
fn shape(kind: &str, n: usize, seed: u64) -> PyResult<Vec<[f64; 3]>> {
    let kind: ShapeKind = parse_or_raise(kind)?;
    Ok(shapes::generate(kind, n, seed))
}

/// Distance between the shape descriptors of two point clouds.
#[pyfunction]
fn shape_distance(a: Vec<[f64; 3]>, b: Vec<[f64; 3]>) -> PyResult<f64> {
    let cfg = DescriptorConfig::default();
    let da = similarity::descriptor(&a, &cfg).or_raise()?;
    let db = similarity::descriptor(&b, &cfg).or_raise()?;
    similarity::descriptor_distance(&da, &db).or_raise()
}

#[pymodule]
fn metabounds_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<ParameterSpace>()?;
    m.add_class::<GaussianProcess>()?;
    m.add_class::<ReducedBounds>()?;
    m.add_class::<Memory>()?;
    m.add_class::<SimTask>()?;
    m.add_class::<SimEvaluator>()?;
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(optimize_with_meta_learning, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(maximin_lhs, m)?)?;
    m.add_function(wrap_pyfunction!(cmaes_minimize, m)?)?;
    m.add_function(wrap_pyfunction!(wilcoxon, m)?)?;
    m.add_function(wrap_pyfunction!(uniformity_test, m)?)?;
    m.add_function(wrap_pyfunction!(vasicek_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(percentile, m)?)?;
    m.add_function(wrap_pyfunction!(shape, m)?)?;
    m.add_function(wrap_pyfunction!(shape_distance, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
