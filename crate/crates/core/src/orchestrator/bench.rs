//! Paired comparison of plain and meta-learning runs over synthetic task pairs.

use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use super::{run_optimization, run_with_meta_learning, OptimizerConfig};
use crate::bounds_reduction::{self, ReductionConfig};
use crate::memory::{Memory, ProceduralEntry, ProceduralPayload, SemanticEntry};
use crate::param_space::ParameterSpace;
use crate::shapes::{self, ShapeKind};
use crate::sim_blackbox::{make_task, perturb_task, Difficulty, SimEvaluator, SimTask};
use crate::similarity::DescriptorConfig;
use crate::stats_tests::{median, wilcoxon_signed_rank};
use crate::util::{self, mix_seed};
use crate::{Error, Result};

/// Fewer pairs than this make the paired p-value unreliable.
pub const MIN_RELIABLE_PAIRS: usize = 5;

const CLOUD_POINTS: usize = 600;

/// A solved task and a related new one, each with an object scan.
#[derive(Debug, Clone)]
pub struct TaskPair {
    pub known: SimTask,
    pub known_cloud: Vec<[f64; 3]>,
    pub novel: SimTask,
    pub novel_cloud: Vec<[f64; 3]>,
}

/// `n` pairs cycling through the built-in shapes. Difficulty alternates
/// between medium and hard. The new task's field is a perturbation of the known
/// one at `similarity`; its scan is a re-sampled, slightly stretched, rotated
/// and rescaled copy of the same shape.
pub fn synthetic_pairs(n: usize, similarity: f64, seed: u64, dim: usize) -> Vec<TaskPair> {
    (0..n)
        .map(|i| {
            let kind = ShapeKind::ALL[i % ShapeKind::ALL.len()];
            let base = if i < ShapeKind::ALL.len() {
                kind.as_str().to_string()
            } else {
                format!("{}{}", kind.as_str(), i / ShapeKind::ALL.len())
            };
            let difficulty = if i % 2 == 0 {
                Difficulty::Medium
            } else {
                Difficulty::Hard
            };
            let s = mix_seed(seed, i as u64);
            let known = make_task(&base, s, difficulty, dim);
            let novel = perturb_task(&known, similarity, mix_seed(s, 1), format!("{base}-new"));

            let mut rng = util::rng(mix_seed(s, 2));
            let spread = 1.0 - similarity.clamp(0.0, 1.0);
            let stretch = [0, 1, 2].map(|_| 1.0 + spread * rng.random_range(-0.5..=0.5));
            let euler =
                [0, 1, 2].map(|_| rng.random_range(-std::f64::consts::PI..std::f64::consts::PI));
            let scale = rng.random_range(0.5..2.0);
            let novel_cloud = shapes::transform(
                &shapes::generate_stretched(kind, CLOUD_POINTS, mix_seed(s, 3), stretch),
                euler,
                scale,
                [0.0; 3],
            );
            TaskPair {
                known_cloud: shapes::generate(kind, CLOUD_POINTS, mix_seed(s, 4)),
                known,
                novel,
                novel_cloud,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub runs_per_condition: usize,
    /// Runs on each known task that populate the knowledge base.
    pub knowledge_runs: usize,
    pub optimizer: OptimizerConfig,
    pub reduction: ReductionConfig,
    pub descriptor: DescriptorConfig,
    /// When false the meta condition retrieves a similar task but keeps the
    /// default bounds, making both conditions identical.
    pub use_reduction: bool,
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            runs_per_condition: 6,
            knowledge_runs: 6,
            optimizer: OptimizerConfig::default(),
            reduction: ReductionConfig::default(),
            descriptor: DescriptorConfig::default(),
            use_reduction: true,
            jobs: 1,
        }
    }
}

/// Per-run outcomes of one condition on one task.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConditionStats {
    pub finals: Vec<f64>,
    pub init_means: Vec<f64>,
}

impl ConditionStats {
    pub fn mean(&self) -> f64 {
        util::mean(&self.finals)
    }

    /// Sample standard deviation; zero for a single run.
    pub fn sd(&self) -> f64 {
        let n = self.finals.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        (self.finals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn median(&self) -> f64 {
        median(&self.finals).unwrap_or(f64::NAN)
    }

    pub fn worst(&self) -> f64 {
        self.finals.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn best(&self) -> f64 {
        self.finals
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn init_mean(&self) -> f64 {
        util::mean(&self.init_means)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskRow {
    pub task: String,
    pub similar_task: Option<(String, f64)>,
    pub baseline: ConditionStats,
    pub meta: ConditionStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<TaskRow>,
}

impl BenchReport {
    pub fn overall_baseline(&self) -> f64 {
        util::mean(
            &self
                .rows
                .iter()
                .map(|r| r.baseline.mean())
                .collect::<Vec<_>>(),
        )
    }

    pub fn overall_meta(&self) -> f64 {
        util::mean(&self.rows.iter().map(|r| r.meta.mean()).collect::<Vec<_>>())
    }

    pub fn overall_init(&self) -> (f64, f64) {
        (
            util::mean(
                &self
                    .rows
                    .iter()
                    .map(|r| r.baseline.init_mean())
                    .collect::<Vec<_>>(),
            ),
            util::mean(
                &self
                    .rows
                    .iter()
                    .map(|r| r.meta.init_mean())
                    .collect::<Vec<_>>(),
            ),
        )
    }

    /// Two-sided paired Wilcoxon p-value over per-task means (meta minus baseline).
    pub fn p_value(&self) -> f64 {
        let diffs: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.meta.mean() - r.baseline.mean())
            .collect();
        wilcoxon_signed_rank(&diffs, 0.0).map_or(f64::NAN, |t| t.p_value)
    }

    pub fn reliable(&self) -> bool {
        self.rows.len() >= MIN_RELIABLE_PAIRS
    }

    /// Tasks on which the worst meta run is at least the worst baseline run.
    pub fn worst_run_wins(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.meta.worst() >= r.baseline.worst())
            .count()
    }

    pub fn to_text(&self) -> String {
        let pct = |v: f64| format!("{:.1}", 100.0 * v);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:<9} {:>12} {:>7} {:>7} {:>7} {:>7}  similar",
            "task", "condition", "mean±sd", "median", "worst", "best", "init"
        );
        for row in &self.rows {
            for (name, c) in [("baseline", &row.baseline), ("meta", &row.meta)] {
                let similar = match (&row.similar_task, name) {
                    (Some((label, d)), "meta") => format!("{label} ({d:.4})"),
                    _ => String::new(),
                };
                let line = format!(
                    "{:<16} {:<9} {:>12} {:>7} {:>7} {:>7} {:>7}  {}",
                    if name == "baseline" {
                        row.task.as_str()
                    } else {
                        ""
                    },
                    name,
                    format!("{}±{}", pct(c.mean()), pct(c.sd())),
                    pct(c.median()),
                    pct(c.worst()),
                    pct(c.best()),
                    pct(c.init_mean()),
                    similar
                );
                let _ = writeln!(out, "{}", line.trim_end());
            }
        }
        let (bi, mi) = self.overall_init();
        let _ = writeln!(
            out,
            "overall: baseline {}%, meta {}% (initial design {}% vs {}%)",
            pct(self.overall_baseline()),
            pct(self.overall_meta()),
            pct(bi),
            pct(mi)
        );
        let _ = writeln!(
            out,
            "paired Wilcoxon over {} task means: p = {:.4}{}",
            self.rows.len(),
            self.p_value(),
            if self.reliable() {
                ""
            } else {
                " (unreliable: fewer than 5 pairs)"
            }
        );
        let _ = writeln!(
            out,
            "worst run no lower with meta: {}/{}",
            self.worst_run_wins(),
            self.rows.len()
        );
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "task,condition,run,final_score,init_mean,similar_task,similar_distance\n",
        );
        for row in &self.rows {
            let (label, dist) = match &row.similar_task {
                Some((l, d)) => (l.clone(), d.to_string()),
                None => (String::new(), String::new()),
            };
            for (name, c) in [("baseline", &row.baseline), ("meta", &row.meta)] {
                for (i, (f, init)) in c.finals.iter().zip(&c.init_means).enumerate() {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        row.task, name, i, f, init, label, dist
                    );
                }
            }
        }
        out
    }

    pub fn from_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut rows: Vec<TaskRow> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            if ln == 1 || line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::parse(
                    origin,
                    ln,
                    "expected 7 comma-separated fields",
                ));
            }
            let num = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::parse(origin, ln, format!("bad number `{v}`")))
            };
            let (final_score, init) = (num(f[3])?, num(f[4])?);
            let similar = if f[5].is_empty() {
                None
            } else {
                Some((f[5].to_string(), num(f[6])?))
            };
            let idx = match rows.iter().position(|r| r.task == f[0]) {
                Some(i) => i,
                None => {
                    rows.push(TaskRow {
                        task: f[0].to_string(),
                        similar_task: similar.clone(),
                        baseline: ConditionStats::default(),
                        meta: ConditionStats::default(),
                    });
                    rows.len() - 1
                }
            };
            let cond = match f[1] {
                "baseline" => &mut rows[idx].baseline,
                "meta" => &mut rows[idx].meta,
                other => {
                    return Err(Error::parse(
                        origin,
                        ln,
                        format!("unknown condition `{other}`"),
                    ))
                }
            };
            cond.finals.push(final_score);
            cond.init_means.push(init);
        }
        if rows.is_empty() {
            return Err(Error::parse(origin, 1, "no benchmark rows"));
        }
        Ok(BenchReport { rows })
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))
}

/// Builds the knowledge base from the known tasks, then runs every new task
/// under default bounds and under meta-learning with shared per-run seeds.
///
/// `memory` should be empty; labels `<task>.base` and `<task>.meta` hold the
/// episodic records of the two conditions.
pub fn paired_benchmark(
    pairs: &[TaskPair],
    memory: &Memory,
    space: &ParameterSpace,
    config: &BenchConfig,
    seed: u64,
) -> Result<BenchReport> {
    if pairs.is_empty() || config.runs_per_condition == 0 {
        return Err(Error::InvalidArgument(
            "benchmark needs at least one pair and one run".into(),
        ));
    }
    config.optimizer.validate()?;
    config.reduction.validate()?;
    let workers = pool(config.jobs)?;

    for p in pairs {
        memory.store_cloud(&SemanticEntry {
            task: p.known.label.clone(),
            cloud: p.known_cloud.clone(),
            descriptor: None,
        })?;
    }

    workers.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .try_for_each(|(i, p)| -> Result<()> {
                for r in 0..config.knowledge_runs {
                    let s = mix_seed(seed, 1_000_000 + (i * 1000 + r) as u64);
                    let mut ev = SimEvaluator::new(p.known.clone(), space.clone(), mix_seed(s, 7));
                    run_optimization(
                        &p.known.label,
                        &mut ev,
                        space,
                        &config.optimizer,
                        s,
                        Some(memory),
                        Some(r as u64 + 1),
                    )?;
                }
                Ok(())
            })
    })?;

    for p in pairs {
        let label = &p.known.label;
        let reduced = if config.use_reduction {
            bounds_reduction::reduce_bounds(
                label,
                memory,
                space,
                &config.reduction,
                mix_seed(seed, 3),
            )?
        } else {
            bounds_reduction::reduce_bounds_from_records(
                label,
                &[],
                space,
                &config.reduction,
                mix_seed(seed, 3),
            )?
        };
        memory.store_procedural(&ProceduralEntry {
            task: label.clone(),
            created_by_run: None,
            payload: ProceduralPayload::ReducedBounds(reduced),
        })?;
    }

    let rows = workers.install(|| {
        pairs
            .par_iter()
            .enumerate()
            .map(|(i, p)| -> Result<TaskRow> {
                let mut row = TaskRow {
                    task: p.novel.label.clone(),
                    similar_task: None,
                    baseline: ConditionStats::default(),
                    meta: ConditionStats::default(),
                };
                for r in 0..config.runs_per_condition {
                    let s = mix_seed(seed, 2_000_000 + (i * 1000 + r) as u64);
                    let eval_seed = mix_seed(s, 7);

                    let mut ev = SimEvaluator::new(p.novel.clone(), space.clone(), eval_seed);
                    let base_label = format!("{}.base", p.novel.label);
                    let base = run_optimization(
                        &base_label,
                        &mut ev,
                        space,
                        &config.optimizer,
                        s,
                        Some(memory),
                        Some(r as u64 + 1),
                    )?;
                    row.baseline.finals.push(base.final_score);
                    row.baseline.init_means.push(base.initial_design_mean());

                    let mut ev = SimEvaluator::new(p.novel.clone(), space.clone(), eval_seed);
                    let meta_label = format!("{}.meta", p.novel.label);
                    let meta = run_with_meta_learning(
                        &meta_label,
                        &p.novel_cloud,
                        &mut ev,
                        space,
                        memory,
                        &config.optimizer,
                        &config.reduction,
                        &config.descriptor,
                        s,
                        Some(r as u64 + 1),
                    )?;
                    row.meta.finals.push(meta.final_score);
                    row.meta.init_means.push(meta.initial_design_mean());
                    row.similar_task = meta.metadata.similar_task.clone();
                }
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BenchReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(task: &str, base: &[f64], meta: &[f64]) -> TaskRow {
        TaskRow {
            task: task.into(),
            similar_task: Some(("x".into(), 0.01)),
            baseline: ConditionStats {
                finals: base.to_vec(),
                init_means: base.to_vec(),
            },
            meta: ConditionStats {
                finals: meta.to_vec(),
                init_means: meta.to_vec(),
            },
        }
    }

    #[test]
    fn condition_stats() {
        let c = ConditionStats {
            finals: vec![0.6, 0.8, 0.7, 0.9],
            init_means: vec![0.5; 4],
        };
        assert!((c.mean() - 0.75).abs() < 1e-12);
        assert!((c.sd() - 0.12909944487358055).abs() < 1e-12);
        assert!((c.median() - 0.75).abs() < 1e-12);
        assert_eq!((c.worst(), c.best()), (0.6, 0.9));
    }

    #[test]
    fn csv_round_trip_reproduces_text() {
        let report = BenchReport {
            rows: vec![
                row("a", &[0.1 + 0.2, 0.7], &[0.8, 1.0 / 3.0]),
                row("b", &[0.5, 0.6], &[0.6, 0.7]),
            ],
        };
        let back = BenchReport::from_csv(&report.to_csv(), Path::new("r.csv")).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_text(), report.to_text());
        assert!(report.to_text().contains("unreliable"));
    }

    #[test]
    fn identical_conditions_give_p_one() {
        let rows: Vec<TaskRow> = (0..7)
            .map(|i| row(&format!("t{i}"), &[0.5, 0.6], &[0.5, 0.6]))
            .collect();
        let report = BenchReport { rows };
        assert_eq!(report.p_value(), 1.0);
        assert!(report.reliable());
    }

    #[test]
    fn pairs_are_deterministic_and_distinct() {
        let a = synthetic_pairs(7, 0.9, 3, 9);
        let b = synthetic_pairs(7, 0.9, 3, 9);
        assert_eq!(a.len(), 7);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.novel, y.novel);
            assert_eq!(x.novel_cloud, y.novel_cloud);
        }
        let mut labels: Vec<&str> = a.iter().map(|p| p.known.label.as_str()).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), 7);
    }
}
