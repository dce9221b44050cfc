//! Reduced parameter bounds learned from the best past iterations of a task.
//!
//! For each parameter, the scaled values among the best iterations are tested
//! for uniformity. Parameters whose best values are spread uniformly keep their
//! range. Otherwise a signed-rank test around 0.5 decides which side to cut:
//! a shifted distribution raises the lower bound (median above 0.5) or lowers
//! the upper bound (median below 0.5); a centered one has both bounds moved to
//! the low and high percentiles.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::memory::{IterationRecord, Memory};
use crate::param_space::ParameterSpace;
use crate::stats_tests::{dudewicz_vdm_test, median, percentile, wilcoxon_signed_rank};
use crate::{Error, Result};

/// Below this many iterations the bounds are returned unchanged.
pub const MIN_ITERATIONS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionConfig {
    pub best_fraction: f64,
    pub alpha_dm: f64,
    pub alpha_w: f64,
    pub lo_percentile: f64,
    pub hi_percentile: f64,
    pub min_iterations: usize,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            best_fraction: 0.35,
            alpha_dm: 0.15,
            alpha_w: 0.15,
            lo_percentile: 0.05,
            hi_percentile: 0.95,
            min_iterations: MIN_ITERATIONS,
        }
    }
}

impl ReductionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.best_fraction > 0.0 && self.best_fraction <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "best fraction must be in (0, 1], got {}",
                self.best_fraction
            )));
        }
        for (name, a) in [("alpha_dm", self.alpha_dm), ("alpha_w", self.alpha_w)] {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be in (0, 1), got {a}"
                )));
            }
        }
        if !(0.0 <= self.lo_percentile
            && self.lo_percentile < self.hi_percentile
            && self.hi_percentile <= 1.0)
        {
            return Err(Error::InvalidArgument(format!(
                "percentiles must satisfy 0 <= x < X <= 1, got {} and {}",
                self.lo_percentile, self.hi_percentile
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundDecision {
    Unchanged,
    LowerRaised,
    UpperLowered,
    Both,
}

impl BoundDecision {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundDecision::Unchanged => "unchanged",
            BoundDecision::LowerRaised => "lower-raised",
            BoundDecision::UpperLowered => "upper-lowered",
            BoundDecision::Both => "both",
        }
    }
}

impl fmt::Display for BoundDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BoundDecision {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "unchanged" => BoundDecision::Unchanged,
            "lower-raised" => BoundDecision::LowerRaised,
            "upper-lowered" => BoundDecision::UpperLowered,
            "both" => BoundDecision::Both,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown bound decision `{other}`"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterReduction {
    pub name: String,
    pub default: (f64, f64),
    pub reduced: (f64, f64),
    pub decision: BoundDecision,
    pub p_dm: Option<f64>,
    pub p_w: Option<f64>,
    pub median: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source_runs: Vec<u64>,
    pub iterations_total: usize,
    pub iterations_used: usize,
    pub config: ReductionConfig,
    pub seed: u64,
    pub insufficient_data: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedBounds {
    pub task: String,
    pub space: String,
    pub params: Vec<ParameterReduction>,
    pub provenance: Provenance,
}

/// The `ceil(fraction * N)` highest-scoring records.
///
/// Ties at the cutoff keep the earlier `(run, iteration)` record.
pub fn select_best(records: &[IterationRecord], fraction: f64) -> Result<Vec<IterationRecord>> {
    if records.is_empty() {
        return Err(Error::InsufficientData { needed: 1, got: 0 });
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "fraction must be in (0, 1], got {fraction}"
        )));
    }
    if records.iter().any(|r| !r.score.is_finite()) {
        return Err(Error::InvalidArgument("scores must be finite".into()));
    }
    let mut sorted: Vec<&IterationRecord> = records.iter().collect();
    sorted.sort_by_key(|r| (r.run_id, r.iteration));
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let keep = ((fraction * records.len() as f64).ceil() as usize).clamp(1, records.len());
    Ok(sorted.into_iter().take(keep).cloned().collect())
}

fn unchanged(space: &ParameterSpace) -> Vec<ParameterReduction> {
    space
        .bounds()
        .iter()
        .map(|b| ParameterReduction {
            name: b.name.clone(),
            default: (b.lower, b.upper),
            reduced: (b.lower, b.upper),
            decision: BoundDecision::Unchanged,
            p_dm: None,
            p_w: None,
            median: None,
        })
        .collect()
}

/// Outcome for one parameter, in scaled units.
struct Verdict {
    decision: BoundDecision,
    range: (f64, f64),
    p_dm: Option<f64>,
    p_w: Option<f64>,
    median: Option<f64>,
}

impl Verdict {
    fn unchanged(p_dm: Option<f64>, p_w: Option<f64>, median: Option<f64>) -> Self {
        Verdict {
            decision: BoundDecision::Unchanged,
            range: (0.0, 1.0),
            p_dm,
            p_w,
            median,
        }
    }
}

/// Decision for one parameter given its scaled best-iteration values.
fn reduce_parameter(values: &[f64], config: &ReductionConfig, seed: u64) -> Result<Verdict> {
    let p_dm = match dudewicz_vdm_test(values, seed) {
        Ok(r) => r.p_value,
        // too few samples: uniformity is not rejected
        Err(Error::InsufficientData { .. }) => return Ok(Verdict::unchanged(None, None, None)),
        Err(e) => return Err(e),
    };
    if p_dm >= config.alpha_dm {
        return Ok(Verdict::unchanged(Some(p_dm), None, None));
    }
    let p_w = wilcoxon_signed_rank(values, 0.5)?.p_value;
    let med = median(values)?;
    let (decision, range) = if p_w < config.alpha_w && med > 0.5 {
        (
            BoundDecision::LowerRaised,
            (percentile(values, config.lo_percentile)?, 1.0),
        )
    } else if p_w < config.alpha_w && med < 0.5 {
        (
            BoundDecision::UpperLowered,
            (0.0, percentile(values, config.hi_percentile)?),
        )
    } else {
        (
            BoundDecision::Both,
            (
                percentile(values, config.lo_percentile)?,
                percentile(values, config.hi_percentile)?,
            ),
        )
    };
    if !(range.0 < range.1) {
        // collapsed range; keep the default rather than emit an empty interval
        return Ok(Verdict::unchanged(Some(p_dm), Some(p_w), Some(med)));
    }
    Ok(Verdict {
        decision,
        range,
        p_dm: Some(p_dm),
        p_w: Some(p_w),
        median: Some(med),
    })
}

/// Bounds reduction over an explicit collection of iteration records.
pub fn reduce_bounds_from_records(
    task: &str,
    records: &[IterationRecord],
    space: &ParameterSpace,
    config: &ReductionConfig,
    seed: u64,
) -> Result<ReducedBounds> {
    config.validate()?;
    let mut source_runs: Vec<u64> = records.iter().map(|r| r.run_id).collect();
    source_runs.sort_unstable();
    source_runs.dedup();
    let mut provenance = Provenance {
        source_runs,
        iterations_total: records.len(),
        iterations_used: 0,
        config: *config,
        seed,
        insufficient_data: false,
    };
    if records.len() < config.min_iterations.max(1) {
        provenance.insufficient_data = true;
        return Ok(ReducedBounds {
            task: task.to_string(),
            space: space.name().to_string(),
            params: unchanged(space),
            provenance,
        });
    }

    let best = select_best(records, config.best_fraction)?;
    provenance.iterations_used = best.len();
    let scaled: Vec<Vec<f64>> = best
        .iter()
        .map(|r| space.scale(&r.params))
        .collect::<Result<_>>()?;

    let mut params = Vec::with_capacity(space.dim());
    for (j, b) in space.bounds().iter().enumerate() {
        let values: Vec<f64> = scaled.iter().map(|u| u[j]).collect();
        let v = reduce_parameter(&values, config, seed)?;
        let (lo, hi) = v.range;
        let reduced = match v.decision {
            BoundDecision::Unchanged => (b.lower, b.upper),
            _ => {
                let lower = if lo > 0.0 {
                    (b.lower + lo * b.width()).clamp(b.lower, b.upper)
                } else {
                    b.lower
                };
                let upper = if hi < 1.0 {
                    (b.lower + hi * b.width()).clamp(b.lower, b.upper)
                } else {
                    b.upper
                };
                (lower, upper)
            }
        };
        params.push(ParameterReduction {
            name: b.name.clone(),
            default: (b.lower, b.upper),
            reduced,
            decision: v.decision,
            p_dm: v.p_dm,
            p_w: v.p_w,
            median: v.median,
        });
    }
    Ok(ReducedBounds {
        task: task.to_string(),
        space: space.name().to_string(),
        params,
        provenance,
    })
}

/// Bounds reduction over every stored iteration of `task`.
pub fn reduce_bounds(
    task: &str,
    memory: &Memory,
    space: &ParameterSpace,
    config: &ReductionConfig,
    seed: u64,
) -> Result<ReducedBounds> {
    let records = memory.query_iterations(task)?;
    reduce_bounds_from_records(task, &records, space, config, seed)
}

fn fmt_num(v: f64) -> String {
    let s = format!("{:.3}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

/// One row per parameter: `name default -> reduced decision`.
pub fn format_bounds_report(bounds: &ReducedBounds) -> String {
    let mut out = String::new();
    for p in &bounds.params {
        let _ = writeln!(
            out,
            "{} {}:{} → {}:{} {}",
            p.name,
            fmt_num(p.default.0),
            fmt_num(p.default.1),
            fmt_num(p.reduced.0),
            fmt_num(p.reduced.1),
            p.decision
        );
    }
    out
}

fn opt_text(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

impl ReducedBounds {
    pub fn is_unchanged(&self) -> bool {
        self.params
            .iter()
            .all(|p| p.decision == BoundDecision::Unchanged)
    }

    pub fn ranges(&self) -> Vec<(f64, f64)> {
        self.params.iter().map(|p| p.reduced).collect()
    }

    pub fn to_text(&self) -> String {
        let c = &self.provenance.config;
        let mut out = String::new();
        let _ = writeln!(out, "task {}", self.task);
        let _ = writeln!(out, "space {}", self.space);
        let _ = writeln!(out, "seed {}", self.provenance.seed);
        let _ = writeln!(out, "best_fraction {}", c.best_fraction);
        let _ = writeln!(out, "alpha_dm {}", c.alpha_dm);
        let _ = writeln!(out, "alpha_w {}", c.alpha_w);
        let _ = writeln!(out, "percentiles {} {}", c.lo_percentile, c.hi_percentile);
        let _ = writeln!(out, "min_iterations {}", c.min_iterations);
        let _ = writeln!(out, "iterations_total {}", self.provenance.iterations_total);
        let _ = writeln!(out, "iterations_used {}", self.provenance.iterations_used);
        let runs: Vec<String> = self
            .provenance
            .source_runs
            .iter()
            .map(u64::to_string)
            .collect();
        let _ = writeln!(out, "source_runs {}", runs.join(" "));
        let _ = writeln!(
            out,
            "insufficient_data {}",
            self.provenance.insufficient_data
        );
        for p in &self.params {
            let _ = writeln!(
                out,
                "param {} {} {} {} {} {} {} {} {}",
                p.name,
                p.default.0,
                p.default.1,
                p.reduced.0,
                p.reduced.1,
                p.decision,
                opt_text(p.p_dm),
                opt_text(p.p_w),
                opt_text(p.median)
            );
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::parse(origin, line, msg);
        let mut task = None;
        let mut space = None;
        let mut config = ReductionConfig::default();
        let mut provenance = Provenance {
            source_runs: Vec::new(),
            iterations_total: 0,
            iterations_used: 0,
            config,
            seed: 0,
            insufficient_data: false,
        };
        let mut params = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let mut fields = line.split_whitespace();
            let Some(key) = fields.next() else { continue };
            let rest: Vec<&str> = fields.collect();
            let one = || -> Result<&str> {
                match rest.as_slice() {
                    [v] => Ok(*v),
                    _ => Err(err(ln, format!("`{key}` takes one value"))),
                }
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(ln, format!("bad number `{s}`: {e}")))
            };
            let int = |s: &str| {
                s.parse::<u64>()
                    .map_err(|e| err(ln, format!("bad integer `{s}`: {e}")))
            };
            let opt = |s: &str| if s == "-" { Ok(None) } else { num(s).map(Some) };
            match key {
                "kind" => {}
                "task" => task = Some(one()?.to_string()),
                "space" => space = Some(one()?.to_string()),
                "seed" => provenance.seed = int(one()?)?,
                "best_fraction" => config.best_fraction = num(one()?)?,
                "alpha_dm" => config.alpha_dm = num(one()?)?,
                "alpha_w" => config.alpha_w = num(one()?)?,
                "percentiles" => match rest.as_slice() {
                    [a, b] => {
                        config.lo_percentile = num(a)?;
                        config.hi_percentile = num(b)?;
                    }
                    _ => return Err(err(ln, "`percentiles` takes two values".into())),
                },
                "min_iterations" => config.min_iterations = int(one()?)? as usize,
                "iterations_total" => provenance.iterations_total = int(one()?)? as usize,
                "iterations_used" => provenance.iterations_used = int(one()?)? as usize,
                "source_runs" => {
                    provenance.source_runs = rest.iter().map(|s| int(s)).collect::<Result<_>>()?
                }
                "insufficient_data" => {
                    provenance.insufficient_data = one()?
                        .parse()
                        .map_err(|_| err(ln, "expected true/false".into()))?
                }
                "param" => {
                    let [name, dl, du, rl, ru, dec, pdm, pw, med] = rest.as_slice() else {
                        return Err(err(ln, "`param` takes nine fields".into()));
                    };
                    params.push(ParameterReduction {
                        name: name.to_string(),
                        default: (num(dl)?, num(du)?),
                        reduced: (num(rl)?, num(ru)?),
                        decision: dec.parse().map_err(|e: Error| err(ln, e.to_string()))?,
                        p_dm: opt(pdm)?,
                        p_w: opt(pw)?,
                        median: opt(med)?,
                    });
                }
                other => return Err(err(ln, format!("unknown key `{other}`"))),
            }
        }
        provenance.config = config;
        let task = task.ok_or_else(|| err(1, "missing `task`".into()))?;
        let space = space.ok_or_else(|| err(1, "missing `space`".into()))?;
        Ok(ReducedBounds {
            task,
            space,
            params,
            provenance,
        })
    }
}
