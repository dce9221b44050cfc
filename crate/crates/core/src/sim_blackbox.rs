//! Synthetic noisy bin-picking objectives.
//!
//! A task is a latent success-probability field over the scaled parameter box,
//! built from anisotropic Gaussian bumps over a floor. An episode makes 15
//! grasp attempts: each one succeeds with the field's probability, otherwise
//! yields a partial grasp (worth half) with the partial probability, otherwise
//! fails.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::orchestrator::Evaluator;
use crate::param_space::ParameterSpace;
use crate::util;
use crate::{Error, Result};

pub const ATTEMPTS: u32 = 15;
pub const PARTIAL_REWARD: f64 = 0.5;
pub const PARTIAL_FRACTION: f64 = 0.5;
pub const PARTIAL_CAP: f64 = 0.3;
pub const MAX_DISPLACEMENT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

impl Difficulty {
    pub fn as_str(&self) -> &'static str {
        match self {
            Difficulty::Easy => "easy",
            Difficulty::Medium => "medium",
            Difficulty::Hard => "hard",
        }
    }

    fn preset(&self) -> Preset {
        match self {
            Difficulty::Easy => Preset {
                bumps: 2,
                relevant: 4,
                width: (0.25, 0.40),
            },
            Difficulty::Medium => Preset {
                bumps: 3,
                relevant: 4,
                width: (0.20, 0.32),
            },
            Difficulty::Hard => Preset {
                bumps: 4,
                relevant: 5,
                width: (0.16, 0.26),
            },
        }
    }
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Difficulty {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(Difficulty::Easy),
            "medium" => Ok(Difficulty::Medium),
            "hard" => Ok(Difficulty::Hard),
            other => Err(Error::InvalidArgument(format!(
                "unknown difficulty `{other}`"
            ))),
        }
    }
}

struct Preset {
    bumps: usize,
    /// Number of parameters the bumps depend on.
    relevant: usize,
    width: (f64, f64),
}

/// Width used for parameters a bump ignores; the bump is nearly flat along them.
const FLAT_WIDTH: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub widths: Vec<f64>,
    /// Amplitude above the floor.
    pub height: f64,
}

impl Bump {
    fn value(&self, u: &[f64]) -> f64 {
        let r2: f64 = u
            .iter()
            .zip(&self.center)
            .zip(&self.widths)
            .map(|((x, c), w)| ((x - c) / w).powi(2))
            .sum();
        self.height * (-0.5 * r2).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTask {
    pub label: String,
    pub difficulty: Difficulty,
    pub seed: u64,
    pub dim: usize,
    pub floor: f64,
    pub bumps: Vec<Bump>,
    /// Share of the non-success mass that turns into partial grasps.
    pub partial_fraction: f64,
    pub partial_cap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeResult {
    pub successes: u32,
    pub partials: u32,
    pub score: f64,
}

impl SimTask {
    /// A task with a constant success probability everywhere.
    pub fn constant(
        label: impl Into<String>,
        dim: usize,
        success: f64,
        partial_fraction: f64,
    ) -> Self {
        SimTask {
            label: label.into(),
            difficulty: Difficulty::Easy,
            seed: 0,
            dim,
            floor: success.clamp(0.0, 1.0),
            bumps: Vec::new(),
            partial_fraction,
            partial_cap: PARTIAL_CAP,
        }
    }

    pub fn success_prob(&self, u: &[f64]) -> f64 {
        let lift = self.bumps.iter().map(|b| b.value(u)).fold(0.0, f64::max);
        (self.floor + lift).clamp(0.0, 1.0)
    }

    pub fn partial_prob(&self, u: &[f64]) -> f64 {
        let s = self.success_prob(u);
        (self.partial_fraction * (1.0 - s))
            .min(self.partial_cap)
            .min(1.0 - s)
            .max(0.0)
    }

    /// Expected episode score at a scaled point.
    pub fn expected_score(&self, u: &[f64]) -> f64 {
        self.success_prob(u) + PARTIAL_REWARD * self.partial_prob(u)
    }

    /// Center of the tallest bump, i.e. the location of the field's peak.
    pub fn optimum(&self) -> Option<&[f64]> {
        self.bumps
            .iter()
            .max_by(|a, b| a.height.total_cmp(&b.height))
            .map(|b| b.center.as_slice())
    }

    pub fn peak_success(&self) -> f64 {
        self.optimum().map_or(self.floor, |c| self.success_prob(c))
    }

    /// Runs one 15-attempt episode at a scaled point.
    pub fn episode<R: Rng + ?Sized>(&self, u: &[f64], rng: &mut R) -> EpisodeResult {
        let ps = self.success_prob(u);
        let pp = self.partial_prob(u);
        let (mut successes, mut partials) = (0, 0);
        for _ in 0..ATTEMPTS {
            let r: f64 = rng.random();
            if r < ps {
                successes += 1;
            } else if r < ps + pp {
                partials += 1;
            }
        }
        EpisodeResult {
            successes,
            partials,
            score: (successes as f64 + PARTIAL_REWARD * partials as f64) / ATTEMPTS as f64,
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "simtask {}", self.label);
        let _ = writeln!(out, "difficulty {}", self.difficulty);
        let _ = writeln!(out, "seed {}", self.seed);
        let _ = writeln!(out, "dim {}", self.dim);
        let _ = writeln!(out, "floor {}", self.floor);
        let _ = writeln!(
            out,
            "partial {} {}",
            self.partial_fraction, self.partial_cap
        );
        for b in &self.bumps {
            let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
            let _ = writeln!(out, "bump {}", b.height);
            let _ = writeln!(out, "center {}", join(&b.center));
            let _ = writeln!(out, "widths {}", join(&b.widths));
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut task = SimTask::constant("", 0, 0.0, PARTIAL_FRACTION);
        let mut label = None;
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            let mut f = line.split_whitespace();
            let Some(key) = f.next() else { continue };
            let rest: Vec<&str> = f.collect();
            let nums = || -> Result<Vec<f64>> {
                rest.iter()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|_| Error::parse(origin, ln, format!("bad number `{s}`")))
                    })
                    .collect()
            };
            let single = || -> Result<&str> {
                match rest.as_slice() {
                    [v] => Ok(*v),
                    _ => Err(Error::parse(origin, ln, format!("`{key}` takes one value"))),
                }
            };
            match key {
                "simtask" => label = Some(single()?.to_string()),
                "difficulty" => {
                    task.difficulty = single()?
                        .parse()
                        .map_err(|e: Error| Error::parse(origin, ln, e.to_string()))?
                }
                "seed" => {
                    task.seed = single()?
                        .parse()
                        .map_err(|_| Error::parse(origin, ln, "bad seed"))?
                }
                "dim" => {
                    task.dim = single()?
                        .parse()
                        .map_err(|_| Error::parse(origin, ln, "bad dim"))?
                }
                "floor" => task.floor = nums()?[0],
                "partial" => match nums()?.as_slice() {
                    [a, b] => {
                        task.partial_fraction = *a;
                        task.partial_cap = *b;
                    }
                    _ => return Err(Error::parse(origin, ln, "`partial` takes two values")),
                },
                "bump" => task.bumps.push(Bump {
                    center: Vec::new(),
                    widths: Vec::new(),
                    height: single()?
                        .parse()
                        .map_err(|_| Error::parse(origin, ln, "bad height"))?,
                }),
                "center" | "widths" => {
                    let v = nums()?;
                    let Some(b) = task.bumps.last_mut() else {
                        return Err(Error::parse(origin, ln, format!("`{key}` before `bump`")));
                    };
                    if key == "center" {
                        b.center = v;
                    } else {
                        b.widths = v;
                    }
                }
                other => return Err(Error::parse(origin, ln, format!("unknown key `{other}`"))),
            }
        }
        task.label = label.ok_or_else(|| Error::parse(origin, 1, "missing `simtask` header"))?;
        if task.bumps.iter().any(|b| {
            b.center.len() != task.dim
                || b.widths.len() != task.dim
                || b.widths.iter().any(|w| *w <= 0.0)
        }) {
            return Err(Error::parse(
                origin,
                1,
                "bump dimensions do not match `dim`",
            ));
        }
        Ok(task)
    }
}

/// Builds a seeded task over a `dim`-dimensional box.
pub fn make_task(
    label: impl Into<String>,
    seed: u64,
    difficulty: Difficulty,
    dim: usize,
) -> SimTask {
    let preset = difficulty.preset();
    let mut rng = util::rng(util::mix_seed(seed, 0x5EED));
    let floor = rng.random_range(0.05..=0.25);
    let peak = rng.random_range(0.85..=0.98);
    let relevant = preset.relevant.min(dim);

    let mut bumps = Vec::with_capacity(preset.bumps);
    for k in 0..preset.bumps {
        let mut dims: Vec<usize> = (0..dim).collect();
        // partial Fisher-Yates: first `relevant` entries are the active parameters
        for i in 0..relevant {
            let j = rng.random_range(i..dim);
            dims.swap(i, j);
        }
        let mut widths = vec![FLAT_WIDTH; dim];
        for &j in &dims[..relevant] {
            widths[j] = rng.random_range(preset.width.0..=preset.width.1);
        }
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(0.1..=0.9)).collect();
        let height = if k == 0 {
            peak - floor
        } else {
            (peak - floor) * rng.random_range(0.35..=0.6)
        };
        bumps.push(Bump {
            center,
            widths,
            height,
        });
    }
    SimTask {
        label: label.into(),
        difficulty,
        seed,
        dim,
        floor,
        bumps,
        partial_fraction: PARTIAL_FRACTION,
        partial_cap: PARTIAL_CAP,
    }
}

/// A related task: bump centers shift by `(1 - similarity) * delta` and heights
/// jitter by up to `(1 - similarity) * 0.1`.
pub fn perturb_task(
    task: &SimTask,
    similarity: f64,
    seed: u64,
    label: impl Into<String>,
) -> SimTask {
    let s = similarity.clamp(0.0, 1.0);
    let mut rng = util::rng(util::mix_seed(seed, 0xBEEF));
    let mut out = task.clone();
    out.label = label.into();
    out.seed = seed;
    let max_height = 1.0 - task.floor;
    for b in &mut out.bumps {
        for c in &mut b.center {
            let delta = rng.random_range(-MAX_DISPLACEMENT..=MAX_DISPLACEMENT);
            *c = (*c + (1.0 - s) * delta).clamp(0.0, 1.0);
        }
        let jitter = rng.random_range(-0.1..=0.1);
        b.height = (b.height + (1.0 - s) * jitter).clamp(0.0, max_height);
    }
    out
}

/// One episode at raw parameters `raw` expressed in `space`.
pub fn evaluate<R: Rng + ?Sized>(
    task: &SimTask,
    space: &ParameterSpace,
    raw: &[f64],
    rng: &mut R,
) -> Result<EpisodeResult> {
    if space.dim() != task.dim {
        return Err(Error::InvalidArgument(format!(
            "task has dimension {}, space has {}",
            task.dim,
            space.dim()
        )));
    }
    let u = space.scale(raw)?;
    Ok(task.episode(&u, rng))
}

/// Adapts a [`SimTask`] to the optimizer's black-box interface.
#[derive(Debug, Clone)]
pub struct SimEvaluator {
    task: SimTask,
    space: ParameterSpace,
    rng: util::Rng,
}

impl SimEvaluator {
    /// `space` is the evaluation space in which raw parameters are interpreted.
    pub fn new(task: SimTask, space: ParameterSpace, seed: u64) -> Self {
        SimEvaluator {
            task,
            space,
            rng: util::rng(seed),
        }
    }

    pub fn task(&self) -> &SimTask {
        &self.task
    }
}

impl Evaluator for SimEvaluator {
    fn evaluate(&mut self, raw: &[f64]) -> Result<f64> {
        Ok(evaluate(&self.task, &self.space, raw, &mut self.rng)?.score)
    }
}
