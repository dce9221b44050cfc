use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use metabounds::bounds_reduction::{self, format_bounds_report, ReducedBounds, ReductionConfig};
use metabounds::memory::{
    self, Memory, Phase, ProceduralEntry, ProceduralPayload, SemanticEntry, MEMORY_ROOT_ENV,
};
use metabounds::orchestrator::{
    paired_benchmark, run_optimization, run_with_meta_learning, synthetic_pairs, BenchConfig,
    BenchReport, BudgetConfig, OptimizerConfig, RunResult,
};
use metabounds::param_space::ParameterSpace;
use metabounds::shapes::{self, ShapeKind};
use metabounds::sim_blackbox::{make_task, Difficulty, SimEvaluator, SimTask};
use metabounds::similarity::{most_similar, DescriptorConfig};
use metabounds::{mix_seed, Error};

#[derive(Parser, Debug)]
#[command(
    name = "metabounds",
    version,
    about = "Bayesian optimization of grasping parameters with bounds learned from similar tasks"
)]
struct Cli {
    /// Directory holding episodic, procedural and semantic memory.
    #[arg(long, global = true, env = MEMORY_ROOT_ENV)]
    memory_root: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize one task and store the run in memory.
    Optimize(OptimizeArgs),
    /// Compute and store reduced bounds from a task's stored iterations.
    ReduceBounds(ReduceArgs),
    /// Find the stored task whose object is most similar to a point cloud.
    Similar(CloudArgs),
    /// Paired comparison of plain and meta-learning runs on synthetic task pairs.
    Bench(BenchArgs),
    /// Summarize stored runs, or re-render a benchmark CSV.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone)]
struct ReductionArgs {
    #[arg(long, default_value_t = 0.35)]
    best_fraction: f64,
    #[arg(long, default_value_t = 0.15)]
    alpha_dm: f64,
    #[arg(long, default_value_t = 0.15)]
    alpha_w: f64,
    /// Lower and upper percentile, `x,X`.
    #[arg(long, default_value = "0.05,0.95", value_parser = parse_pair)]
    percentiles: (f64, f64),
}

impl ReductionArgs {
    fn config(&self) -> ReductionConfig {
        ReductionConfig {
            best_fraction: self.best_fraction,
            alpha_dm: self.alpha_dm,
            alpha_w: self.alpha_w,
            lo_percentile: self.percentiles.0,
            hi_percentile: self.percentiles.1,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
struct OptimizerArgs {
    /// `init,infill,final` evaluation counts.
    #[arg(long, default_value = "10,20,5", value_parser = parse_budget)]
    budget: BudgetConfig,
    /// EQI quantile level.
    #[arg(long, default_value_t = 0.65)]
    beta: f64,
}

impl OptimizerArgs {
    fn config(&self) -> OptimizerConfig {
        OptimizerConfig {
            budget: self.budget,
            beta: self.beta,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug, Clone)]
struct CloudArgs {
    /// Point cloud file with one `x y z` line per point.
    #[arg(long, conflicts_with = "shape")]
    cloud: Option<PathBuf>,
    /// Built-in shape to sample instead of a cloud file.
    #[arg(long)]
    shape: Option<ShapeKind>,
    #[arg(long, default_value_t = 0)]
    shape_seed: u64,
    #[arg(long, default_value_t = 600)]
    shape_points: usize,
}

impl CloudArgs {
    fn load(&self) -> Result<Option<Vec<[f64; 3]>>, Error> {
        if let Some(path) = &self.cloud {
            let text = std::fs::read_to_string(path)?;
            return Ok(Some(memory::parse_cloud(&text, path)?));
        }
        Ok(self
            .shape
            .map(|k| shapes::generate(k, self.shape_points, self.shape_seed)))
    }
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    /// Task label; derived from the synthetic task when omitted.
    #[arg(long)]
    task: Option<String>,
    /// Synthetic task file (see `SimTask::to_text`).
    #[arg(long, conflicts_with_all = ["task_seed", "difficulty"])]
    task_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    task_seed: u64,
    #[arg(long, default_value = "medium")]
    difficulty: Difficulty,
    /// Restrict the search with reduced bounds of the most similar stored task.
    #[arg(long)]
    meta: bool,
    #[command(flatten)]
    cloud: CloudArgs,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[command(flatten)]
    reduction: ReductionArgs,
}

#[derive(Args, Debug)]
struct ReduceArgs {
    #[arg(long)]
    task: String,
    #[command(flatten)]
    reduction: ReductionArgs,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, default_value_t = 7)]
    pairs: usize,
    #[arg(long, default_value_t = 6)]
    runs: usize,
    #[arg(long, default_value_t = 6)]
    knowledge_runs: usize,
    #[arg(long, default_value_t = 0.9)]
    similarity: f64,
    /// Keep default bounds in the meta condition (retrieval only).
    #[arg(long)]
    no_reduction: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Also write the per-run CSV here.
    #[arg(long)]
    csv_out: Option<PathBuf>,
    #[command(flatten)]
    optimizer: OptimizerArgs,
    #[command(flatten)]
    reduction: ReductionArgs,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Only this task.
    #[arg(long, conflicts_with = "csv")]
    task: Option<String>,
    /// Benchmark CSV to re-render instead of the memory store.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn parse_budget(s: &str) -> Result<BudgetConfig, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `x,X`, got `{s}`"))?;
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| format!("bad number `{v}`"))
    };
    Ok((num(a)?, num(b)?))
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::InvalidSpace(_) => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn failure(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

fn open_memory(root: &Option<PathBuf>) -> Result<Memory, Failure> {
    let root = root.as_ref().ok_or_else(|| {
        usage(format!(
            "no memory root: pass --memory-root or set {MEMORY_ROOT_ENV}"
        ))
    })?;
    Ok(Memory::open(root)?)
}

fn records_csv(result: &RunResult, space: &ParameterSpace) -> String {
    let mut out = String::from("task,run_id,iteration,phase");
    for n in space.names() {
        let _ = write!(out, ",{n}");
    }
    out.push_str(",score\n");
    for r in &result.records {
        let _ = write!(out, "{},{},{},{}", r.task, r.run_id, r.iteration, r.phase);
        for p in &r.params {
            let _ = write!(out, ",{p}");
        }
        let _ = writeln!(out, ",{}", r.score);
    }
    out
}

fn cmd_optimize(cli: &Cli, args: &OptimizeArgs) -> Result<String, Failure> {
    let mem = open_memory(&cli.memory_root)?;
    let space = ParameterSpace::default_grasping();
    let sim = match &args.task_file {
        Some(path) => SimTask::parse(&std::fs::read_to_string(path)?, path)?,
        None => make_task(
            format!("sim-{}-{}", args.difficulty, args.task_seed),
            args.task_seed,
            args.difficulty,
            space.dim(),
        ),
    };
    let label = args.task.clone().unwrap_or_else(|| sim.label.clone());
    memory::validate_label(&label)?;
    let optimizer = args.optimizer.config();
    let reduction = args.reduction.config();
    reduction.validate()?;
    let cloud = args.cloud.load()?;

    let mut evaluator = SimEvaluator::new(sim, space.clone(), mix_seed(cli.seed, 0xE7A1));
    let result = if args.meta {
        let cloud = cloud
            .as_ref()
            .ok_or_else(|| usage("--meta needs the new object's --cloud or --shape"))?;
        run_with_meta_learning(
            &label,
            cloud,
            &mut evaluator,
            &space,
            &mem,
            &optimizer,
            &reduction,
            &DescriptorConfig::default(),
            cli.seed,
            None,
        )?
    } else {
        run_optimization(
            &label,
            &mut evaluator,
            &space,
            &optimizer,
            cli.seed,
            Some(&mem),
            None,
        )?
    };
    if let Some(w) = &result.metadata.warning {
        eprintln!("warning: {w}");
    }
    if let Some(cloud) = cloud {
        mem.store_cloud(&SemanticEntry {
            task: label.clone(),
            cloud,
            descriptor: None,
        })?;
    }
    Ok(match cli.format {
        Format::Text => {
            let mut out = String::new();
            if result.metadata.similar_task.is_some() {
                let _ = writeln!(out, "search space:\n{}", result.metadata.space.to_text());
            }
            out + &result.to_text()
        }
        Format::Csv => records_csv(&result, &space),
    })
}

fn reduction_csv(rb: &ReducedBounds) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut out = String::from(
        "name,default_lower,default_upper,reduced_lower,reduced_upper,decision,p_dm,p_w,median\n",
    );
    for p in &rb.params {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            p.name,
            p.default.0,
            p.default.1,
            p.reduced.0,
            p.reduced.1,
            p.decision,
            opt(p.p_dm),
            opt(p.p_w),
            opt(p.median)
        );
    }
    out
}

fn cmd_reduce(cli: &Cli, args: &ReduceArgs) -> Result<String, Failure> {
    let mem = open_memory(&cli.memory_root)?;
    let config = args.reduction.config();
    config.validate()?;
    let records = mem.query_iterations(&args.task)?;
    if records.is_empty() {
        return Err(failure(format!(
            "no stored iterations for task `{}`",
            args.task
        )));
    }
    let space = ParameterSpace::default_grasping();
    let rb = bounds_reduction::reduce_bounds_from_records(
        &args.task, &records, &space, &config, cli.seed,
    )?;
    mem.store_procedural(&ProceduralEntry {
        task: args.task.clone(),
        created_by_run: None,
        payload: ProceduralPayload::ReducedBounds(rb.clone()),
    })?;
    Ok(match cli.format {
        Format::Csv => reduction_csv(&rb),
        Format::Text => {
            let pv = &rb.provenance;
            let mut out = format!(
                "reduced bounds for {} from {} runs, {} iterations ({} best used)\n",
                rb.task,
                pv.source_runs.len(),
                pv.iterations_total,
                pv.iterations_used
            );
            if pv.insufficient_data {
                let _ = writeln!(
                    out,
                    "insufficient data: fewer than {} iterations, bounds unchanged",
                    pv.config.min_iterations
                );
            }
            let _ = writeln!(
                out,
                "best fraction {}, alpha_dm {}, alpha_w {}, percentiles {},{}",
                pv.config.best_fraction,
                pv.config.alpha_dm,
                pv.config.alpha_w,
                pv.config.lo_percentile,
                pv.config.hi_percentile
            );
            out + &format_bounds_report(&rb)
        }
    })
}

fn cmd_similar(cli: &Cli, args: &CloudArgs) -> Result<String, Failure> {
    let mem = open_memory(&cli.memory_root)?;
    let cloud = args
        .load()?
        .ok_or_else(|| usage("pass --cloud or --shape"))?;
    let (label, distance) = most_similar(&cloud, &mem, &DescriptorConfig::default())?;
    Ok(match cli.format {
        Format::Text => format!("{label} {distance}\n"),
        Format::Csv => format!("task,distance\n{label},{distance}\n"),
    })
}

fn render_bench(report: &BenchReport, format: Format) -> String {
    match format {
        Format::Text => report.to_text(),
        Format::Csv => report.to_csv(),
    }
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<String, Failure> {
    if args.pairs == 0 || args.runs == 0 {
        return Err(usage("--pairs and --runs must be positive"));
    }
    if !(0.0..=1.0).contains(&args.similarity) {
        return Err(usage("--similarity must lie in [0, 1]"));
    }
    let config = BenchConfig {
        runs_per_condition: args.runs,
        knowledge_runs: args.knowledge_runs,
        optimizer: args.optimizer.config(),
        reduction: args.reduction.config(),
        descriptor: DescriptorConfig::default(),
        use_reduction: !args.no_reduction,
        jobs: args.jobs,
    };
    let space = ParameterSpace::default_grasping();
    let pairs = synthetic_pairs(args.pairs, args.similarity, cli.seed, space.dim());
    // every benchmark starts from an empty knowledge base
    let scratch = tempfile::tempdir()?;
    let mem = Memory::open(scratch.path())?;
    let report = paired_benchmark(&pairs, &mem, &space, &config, cli.seed)?;
    if let Some(path) = &args.csv_out {
        std::fs::write(path, report.to_csv())?;
    }
    Ok(render_bench(&report, cli.format))
}

fn cmd_report(cli: &Cli, args: &ReportArgs) -> Result<String, Failure> {
    if let Some(path) = &args.csv {
        let text = std::fs::read_to_string(path)?;
        return Ok(render_bench(
            &BenchReport::from_csv(&text, path)?,
            cli.format,
        ));
    }
    let mem = open_memory(&cli.memory_root)?;
    let tasks = match &args.task {
        Some(t) => vec![t.clone()],
        None => mem.episodic_tasks()?,
    };
    let mut out = match cli.format {
        Format::Text => format!(
            "{:<20} {:>4} {:>6} {:>8} {:>8} {:>8}\n",
            "task", "run", "evals", "init", "best", "final"
        ),
        Format::Csv => "task,run_id,evaluations,init_mean,best_observed,final_score\n".to_string(),
    };
    let mut rows = 0;
    for task in tasks {
        let records = mem.query_iterations(&task)?;
        let mut runs: Vec<u64> = records.iter().map(|r| r.run_id).collect();
        runs.dedup();
        for run in runs {
            let rs: Vec<_> = records.iter().filter(|r| r.run_id == run).collect();
            let by_phase = |p: Phase| {
                rs.iter()
                    .filter(|r| r.phase == p)
                    .map(|r| r.score)
                    .collect::<Vec<_>>()
            };
            let mean = |v: &[f64]| {
                if v.is_empty() {
                    f64::NAN
                } else {
                    v.iter().sum::<f64>() / v.len() as f64
                }
            };
            let init = mean(&by_phase(Phase::InitialDesign));
            let fin = mean(&by_phase(Phase::FinalEval));
            let best = rs
                .iter()
                .filter(|r| r.phase != Phase::FinalEval)
                .map(|r| r.score)
                .fold(f64::NAN, f64::max);
            match cli.format {
                Format::Text => {
                    let _ = writeln!(
                        out,
                        "{task:<20} {run:>4} {:>6} {init:>8.4} {best:>8.4} {fin:>8.4}",
                        rs.len()
                    );
                }
                Format::Csv => {
                    let _ = writeln!(out, "{task},{run},{},{init},{best},{fin}", rs.len());
                }
            }
            rows += 1;
        }
    }
    if rows == 0 {
        return Err(failure("memory holds no stored runs"));
    }
    Ok(out)
}

fn run(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Optimize(a) => cmd_optimize(cli, a),
        Command::ReduceBounds(a) => cmd_reduce(cli, a),
        Command::Similar(a) => cmd_similar(cli, a),
        Command::Bench(a) => cmd_bench(cli, a),
        Command::Report(a) => cmd_report(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
