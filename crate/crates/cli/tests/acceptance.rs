//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Beta, Distribution};

use metabounds::acquisition::{eqi, eqi_of, expected_improvement, AcquisitionConfig};
use metabounds::bounds_reduction::{reduce_bounds, reduce_bounds_from_records, ReductionConfig};
use metabounds::cmaes::{self, CmaConfig};
use metabounds::gp_surrogate::{FitOptions, GpHyperParams, GpModel, Posterior};
use metabounds::lhs_design::{maximin_lhs, min_pairwise_distance};
use metabounds::memory::{Memory, SemanticEntry};
use metabounds::mix_seed;
use metabounds::orchestrator::{
    initial_design, paired_benchmark, run_optimization, synthetic_pairs, BenchConfig, BenchReport,
    Evaluator, OptimizerConfig,
};
use metabounds::param_space::ParameterSpace;
use metabounds::sim_blackbox::SimEvaluator;
use metabounds::similarity::{most_similar, DescriptorConfig};
use metabounds::stats_tests::{dudewicz_vdm_test, wilcoxon_signed_rank};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed.as_secs_f64() < limit_secs as f64
}

// 1
fn reduction_oracle() -> Outcome {
    let start = Instant::now();
    let space = ParameterSpace::default_grasping();
    let cfg = ReductionConfig::default();
    let mut mismatches = 0;
    let mut compared = 0;
    let mut seen = std::collections::BTreeSet::new();
    for seed in 0..100u64 {
        let n = 30 + common::rng(seed ^ 0xACCE).random_range(0..=150);
        let records = common::synthetic_records(&space, n, seed);
        let got = reduce_bounds_from_records("synthetic", &records, &space, &cfg, seed).unwrap();
        let want = common::reference_reduction(&records, &space, &cfg, seed);
        for (g, w) in got.params.iter().zip(&want) {
            compared += 1;
            seen.insert(w.decision);
            if g.decision.as_str() != w.decision || g.reduced != (w.lower, w.upper) {
                mismatches += 1;
            }
        }
    }
    let t = start.elapsed();
    outcome(
        mismatches == 0 && within(t, 30),
        format!("{mismatches}/{compared} mismatches, decisions seen {seen:?}, {t:.1?}"),
    )
}

// 2
fn wilcoxon_exactness() -> Outcome {
    let mut rng = common::rng(2);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(1..=12);
        let xs: Vec<f64> = if rng.random::<bool>() {
            (0..n)
                .map(|_| rng.random_range(-4i32..=6) as f64 / 4.0)
                .collect()
        } else {
            (0..n).map(|_| rng.random_range(-1.0..1.5)).collect()
        };
        let got = wilcoxon_signed_rank(&xs, 0.0).unwrap().p_value;
        worst = worst.max((got - common::wilcoxon_enumerated(&xs)).abs());
    }
    let example = wilcoxon_signed_rank(&[0.6, 0.7, 0.8, 0.9, 0.95, 0.99], 0.5)
        .unwrap()
        .p_value;
    outcome(
        worst < 1e-12 && example == 2.0 / 64.0,
        format!("max deviation {worst:.2e}, example p = {example}"),
    )
}

// 3
fn dvm_calibration() -> Outcome {
    let start = Instant::now();
    let alpha = 0.15;
    let mut rng = common::rng(3);
    let trials = 2000;
    let rejected = (0..trials)
        .filter(|_| {
            let xs: Vec<f64> = (0..30).map(|_| rng.random()).collect();
            dudewicz_vdm_test(&xs, 17).unwrap().p_value < alpha
        })
        .count();
    let rate = rejected as f64 / trials as f64;
    let beta = Beta::new(8.0, 2.0).unwrap();
    let power_trials = 200;
    let detected = (0..power_trials)
        .filter(|_| {
            let xs: Vec<f64> = (0..200).map(|_| beta.sample(&mut rng)).collect();
            dudewicz_vdm_test(&xs, 17).unwrap().p_value < alpha
        })
        .count();
    let power = detected as f64 / power_trials as f64;
    let t = start.elapsed();
    outcome(
        (0.12..=0.18).contains(&rate) && power >= 0.95 && within(t, 120),
        format!("null rejection {rate:.4}, power {power:.3}, {t:.1?}"),
    )
}

// 4
fn gp_correctness() -> Outcome {
    let mut rng = common::rng(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let dim = rng.random_range(1..=5);
        let n = rng.random_range(1..=15);
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..dim).map(|_| rng.random()).collect())
            .collect();
        let targets: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let hyper = GpHyperParams {
            signal_variance: rng.random_range(0.2..3.0),
            lengthscales: (0..dim).map(|_| rng.random_range(0.1..2.0)).collect(),
            noise_variance: rng.random_range(1e-4..0.3),
            prior_mean: rng.random_range(-1.0..1.0),
        };
        let model = GpModel::new(hyper.clone(), inputs.clone(), targets.clone()).unwrap();
        for _ in 0..10 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random()).collect();
            let p = model.posterior(&x);
            let (m, v) = common::dense_posterior(&inputs, &targets, &hyper, model.jitter(), &x);
            worst = worst
                .max((p.mean - m).abs())
                .max((p.variance - v.max(0.0)).abs());
        }
    }
    let inputs: Vec<Vec<f64>> = (0..10)
        .map(|_| vec![rng.random(), rng.random(), rng.random()])
        .collect();
    let targets: Vec<f64> = inputs
        .iter()
        .map(|x| (4.0 * x[0]).sin() * x[1] + x[2])
        .collect();
    let exact = GpModel::new(
        GpHyperParams::isotropic(3, 1.0, 0.5, 0.0),
        inputs.clone(),
        targets.clone(),
    )
    .unwrap();
    let interp = inputs.iter().zip(&targets).all(|(x, y)| {
        let p = exact.posterior(x);
        (p.mean - y).abs() < 1e-6 && p.variance < 1e-6
    });
    outcome(
        worst < 1e-8 && interp,
        format!("max deviation from dense oracle {worst:.2e}, interpolation {interp}"),
    )
}

// 5
fn eqi_correctness() -> Outcome {
    let mut cases = Vec::new();
    for (s, tau) in [(0.05, 0.0), (0.3, 0.1), (1.0, 0.5), (0.5, 1.0), (2.0, 0.2)] {
        for beta in [0.5, 0.65] {
            for dq in [-0.5, 0.4] {
                let m = 0.3 * cases.len() as f64 / 20.0 - 0.1;
                cases.push((
                    m,
                    s,
                    tau,
                    beta + if dq > 0.0 { 0.25 } else { 0.0 },
                    m + dq * s,
                ));
            }
        }
    }
    let mut worst_z: f64 = 0.0;
    let mut failures = 0;
    for (k, &(m, s, tau, beta, q)) in cases.iter().enumerate() {
        let cfg = AcquisitionConfig::new(beta, tau).unwrap();
        let closed = eqi_of(
            Posterior {
                mean: m,
                variance: s * s,
            },
            &cfg,
            q,
        );
        let (mc, se) = common::eqi_monte_carlo(m, s, tau, beta, q, 1_000_000, 500 + k as u64);
        let diff = (closed - mc).abs();
        if diff > 3.0 * se + 1e-12 {
            failures += 1;
        }
        if se > 0.0 {
            worst_z = worst_z.max(diff / se);
        }
    }

    let mut rng = common::rng(5);
    let inputs: Vec<Vec<f64>> = (0..12)
        .map(|_| (0..3).map(|_| rng.random()).collect())
        .collect();
    let targets: Vec<f64> = inputs.iter().map(|x| x.iter().sum::<f64>().cos()).collect();
    let model = GpModel::fit(inputs, targets, &FitOptions::default(), 1).unwrap();
    let plain = AcquisitionConfig::new(0.5, 0.0).unwrap();
    let mut worst_ei: f64 = 0.0;
    for _ in 0..100 {
        let x: Vec<f64> = (0..3).map(|_| rng.random()).collect();
        let q = rng.random_range(-1.0..1.0);
        worst_ei =
            worst_ei.max((eqi(&model, &x, &plain, q) - expected_improvement(&model, &x, q)).abs());
    }
    outcome(
        failures == 0 && cases.len() == 20 && worst_ei < 1e-10,
        format!(
            "{failures}/20 grid cases outside 3 SE (max {worst_z:.2} SE), EQI vs EI {worst_ei:.2e}"
        ),
    )
}

// 6
fn cmaes_benchmarks() -> Outcome {
    let start = Instant::now();
    let mut sphere = 0;
    for seed in 0..10 {
        let mut rng = common::rng(600 + seed);
        let cfg = CmaConfig {
            initial_mean: Some((0..9).map(|_| rng.random_range(-4.0..4.0)).collect()),
            max_evals: 5000,
            ..Default::default()
        };
        let out = cmaes::minimize(common::sphere, &[(-5.0, 5.0); 9], &cfg, seed).unwrap();
        if out.best_value <= 1e-6 && out.evaluations <= 5000 {
            sphere += 1;
        }
    }
    let mut rosen = 0;
    for seed in 0..10 {
        let mut rng = common::rng(700 + seed);
        let cfg = CmaConfig {
            initial_mean: Some(vec![
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]),
            max_evals: 3000,
            ..Default::default()
        };
        let out = cmaes::minimize(common::rosenbrock, &[(-3.0, 3.0); 2], &cfg, seed).unwrap();
        if out.best_value <= 1e-4 && out.evaluations <= 3000 {
            rosen += 1;
        }
    }
    let t = start.elapsed();
    outcome(
        sphere == 10 && rosen >= 8 && within(t, 60),
        format!("sphere {sphere}/10, rosenbrock {rosen}/10, {t:.1?}"),
    )
}

// 7
fn lhs_stratification() -> Outcome {
    let mut rng = common::rng(7);
    let mut bad_strata = 0;
    let mut bad_monotone = 0;
    for _ in 0..500 {
        let n = rng.random_range(1..=60);
        let m = rng.random_range(1..=10);
        let seed: u64 = rng.random();
        let restarts = rng.random_range(1..=10);
        let d = maximin_lhs(n, m, seed, restarts).unwrap();
        if d.len() != n || !common::stratified(d.points()) {
            bad_strata += 1;
        }
        if n >= 2 {
            let more = maximin_lhs(n, m, seed, restarts + rng.random_range(1..=10)).unwrap();
            if min_pairwise_distance(&more).unwrap() < min_pairwise_distance(&d).unwrap() {
                bad_monotone += 1;
            }
        }
    }
    outcome(
        bad_strata == 0 && bad_monotone == 0,
        format!(
            "{bad_strata} unstratified, {bad_monotone} restart regressions over 500 configurations"
        ),
    )
}

// 8
fn warm_start() -> Outcome {
    let start = Instant::now();
    let master = 8u64;
    let seeds_per_condition = 6u64;
    let space = ParameterSpace::default_grasping();
    let optimizer = OptimizerConfig::default();
    let reduction = ReductionConfig::default();
    let descriptor = DescriptorConfig::default();
    let dir = tempfile::tempdir().unwrap();
    let mem = Memory::open(dir.path()).unwrap();
    let pairs = synthetic_pairs(7, 0.9, master, space.dim());
    for pair in &pairs {
        mem.store_cloud(&SemanticEntry {
            task: pair.known.label.clone(),
            cloud: pair.known_cloud.clone(),
            descriptor: None,
        })
        .unwrap();
        for r in 0..BenchConfig::default().knowledge_runs as u64 {
            let seed = mix_seed(master, 100 + r);
            let mut ev = SimEvaluator::new(pair.known.clone(), space.clone(), mix_seed(seed, 7));
            run_optimization(
                &pair.known.label,
                &mut ev,
                &space,
                &optimizer,
                seed,
                Some(&mem),
                None,
            )
            .unwrap();
        }
    }
    // the evaluator always maps raw parameters through the default space
    let design_mean =
        |active: &ParameterSpace, task: &metabounds::sim_blackbox::SimTask, seed: u64| {
            let points = initial_design(
                active.dim(),
                optimizer.budget.init,
                optimizer.lhs_restarts,
                seed,
            )
            .unwrap();
            let mut ev = SimEvaluator::new(task.clone(), space.clone(), mix_seed(seed, 7));
            let scores: Vec<f64> = points
                .iter()
                .map(|u| ev.evaluate(&active.unscale(u).unwrap()).unwrap())
                .collect();
            scores.iter().sum::<f64>() / scores.len() as f64
        };
    let (mut plain, mut meta) = (Vec::new(), Vec::new());
    let mut retrieved = 0;
    for pair in &pairs {
        let (similar, _) = most_similar(&pair.novel_cloud, &mem, &descriptor).unwrap();
        if similar == pair.known.label {
            retrieved += 1;
        }
        let rb = reduce_bounds(&similar, &mem, &space, &reduction, mix_seed(master, 3)).unwrap();
        let reduced = space.restrict(&rb).unwrap();
        for s in 0..seeds_per_condition {
            let seed = mix_seed(master, 200 + s);
            plain.push(design_mean(&space, &pair.novel, seed));
            meta.push(design_mean(&reduced, &pair.novel, seed));
        }
    }
    let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (p, m) = (avg(&plain), avg(&meta));
    let t = start.elapsed();
    outcome(
        m - p >= 0.03 && within(t, 300),
        format!("initial design {:.1}% default vs {:.1}% reduced (gap {:+.3}), {retrieved}/7 retrieved, {t:.1?}", 100.0 * p, 100.0 * m, m - p),
    )
}

// 9 and 10
fn headline() -> (Outcome, Outcome) {
    let start = Instant::now();
    let space = ParameterSpace::default_grasping();
    let config = BenchConfig::default();
    let mut reports: Vec<BenchReport> = Vec::new();
    for master in 0..10u64 {
        let dir = tempfile::tempdir().unwrap();
        let mem = Memory::open(dir.path()).unwrap();
        let pairs = synthetic_pairs(7, 0.9, master, space.dim());
        let report = paired_benchmark(&pairs, &mem, &space, &config, master).unwrap();
        println!(
            "    seed {master}: baseline {:.1}% meta {:.1}% p={:.4} worst-run wins {}/7",
            100.0 * report.overall_baseline(),
            100.0 * report.overall_meta(),
            report.p_value(),
            report.worst_run_wins()
        );
        reports.push(report);
    }
    let t = start.elapsed();
    let significant = reports
        .iter()
        .filter(|r| r.overall_meta() > r.overall_baseline() && r.p_value() < 0.05)
        .count();
    let robust = reports.iter().filter(|r| r.worst_run_wins() >= 6).count();
    (
        outcome(
            significant >= 8 && within(t, 900),
            format!("{significant}/10 master seeds with meta > baseline and p < 0.05, {t:.1?}"),
        ),
        outcome(
            robust >= 8,
            format!("{robust}/10 master seeds with worst-run wins >= 6/7"),
        ),
    )
}

// 11
fn cli_determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_metabounds");
    let run = |root: &Path, args: &[&str]| -> Vec<u8> {
        let out = Command::new(bin)
            .arg("--memory-root")
            .arg(root)
            .args(args)
            .env_remove("METABOUNDS_MEMORY")
            .output()
            .expect("binary runs");
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let session = |jobs: &str| -> Vec<Vec<u8>> {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut outs = Vec::new();
        for seed in ["1", "2", "3"] {
            outs.push(run(
                root,
                &[
                    "--seed",
                    seed,
                    "optimize",
                    "--task",
                    "cube",
                    "--shape",
                    "cube",
                    "--task-seed",
                    "4",
                ],
            ));
        }
        outs.push(run(
            root,
            &["--seed", "5", "reduce-bounds", "--task", "cube"],
        ));
        outs.push(run(
            root,
            &["--format", "csv", "reduce-bounds", "--task", "cube"],
        ));
        outs.push(run(
            root,
            &["similar", "--shape", "cube", "--shape-seed", "8"],
        ));
        outs.push(run(
            root,
            &[
                "--seed",
                "9",
                "optimize",
                "--meta",
                "--task",
                "cube-2",
                "--shape",
                "cube",
                "--shape-seed",
                "8",
                "--task-seed",
                "4",
            ],
        ));
        outs.push(run(root, &["report"]));
        outs.push(run(root, &["--format", "csv", "report"]));
        outs.push(run(
            root,
            &[
                "--seed",
                "3",
                "bench",
                "--pairs",
                "5",
                "--runs",
                "1",
                "--knowledge-runs",
                "2",
                "--budget",
                "6,6,2",
                "--jobs",
                jobs,
            ],
        ));
        outs
    };
    let a = session("1");
    let b = session("1");
    let c = session("2");
    let same = a == b;
    let jobs_same = a.last() == c.last();
    outcome(
        same && jobs_same,
        format!("{} commands byte-identical across fresh roots: {same}; bench --jobs 1 vs 2 identical: {jobs_same}", a.len()),
    )
}

type Check = (usize, &'static str, fn() -> Outcome);

/// Criterion numbers given on the command line select a subset; libtest
/// flags passed through by cargo are ignored.
fn selected() -> Vec<usize> {
    let picked: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    if picked.is_empty() {
        (1..=11).collect()
    } else {
        picked
    }
}

fn main() -> ExitCode {
    let wanted = selected();
    let want = |n: usize| wanted.contains(&n);
    let mut failed = 0;
    let mut ran = 0;
    let mut report = |n: usize, name: &str, o: Outcome| {
        ran += 1;
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    };
    let checks: [Check; 8] = [
        (1, "bounds reduction oracle", reduction_oracle),
        (2, "wilcoxon exactness", wilcoxon_exactness),
        (3, "entropy test calibration", dvm_calibration),
        (4, "gp posterior", gp_correctness),
        (5, "eqi closed form", eqi_correctness),
        (6, "cma-es", cmaes_benchmarks),
        (7, "latin hypercube", lhs_stratification),
        (8, "warm start", warm_start),
    ];
    for (n, name, check) in checks {
        if want(n) {
            report(n, name, check());
        }
    }
    if want(9) || want(10) {
        let (nine, ten) = headline();
        report(9, "paired benchmark", nine);
        report(10, "worst-run robustness", ten);
    }
    if want(11) {
        report(11, "cli determinism", cli_determinism());
    }
    if failed == 0 {
        println!("acceptance: all {ran} criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {ran} criteria failed");
        ExitCode::FAILURE
    }
}
