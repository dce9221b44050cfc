//! Long-term memory persisted as a directory tree.
//!
//! ```text
//! <root>/episodic/<task>.log                  one tab-separated record per line
//! <root>/procedural/<task>.optimized_params   latest snapshot
//! <root>/procedural/<task>.reduced_bounds     latest snapshot
//! <root>/semantic/<task>.xyz                  point cloud, `x y z` per line
//! ```
//!
//! Episodic logs are append-only and each record is written with a single
//! `write` on a file opened in append mode. Snapshots are replaced atomically by
//! writing a temporary file and renaming it over the old one.

use std::fmt::{self, Write as _};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::bounds_reduction::ReducedBounds;
use crate::similarity::ShapeDescriptor;
use crate::{Error, Result};

pub const MEMORY_ROOT_ENV: &str = "METABOUNDS_MEMORY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    InitialDesign,
    InfillEqi,
    FinalEval,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::InitialDesign => "initial_design",
            Phase::InfillEqi => "infill_eqi",
            Phase::FinalEval => "final_eval",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "initial_design" => Ok(Phase::InitialDesign),
            "infill_eqi" => Ok(Phase::InfillEqi),
            "final_eval" => Ok(Phase::FinalEval),
            other => Err(Error::InvalidArgument(format!("unknown phase `{other}`"))),
        }
    }
}

/// One evaluated parameter vector (raw units) and its score.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub task: String,
    pub run_id: u64,
    pub iteration: u32,
    pub phase: Phase,
    pub params: Vec<f64>,
    pub score: f64,
}

impl IterationRecord {
    fn to_line(&self) -> String {
        let mut line = format!(
            "{}\t{}\t{}\t{}",
            self.task, self.run_id, self.iteration, self.phase
        );
        for p in &self.params {
            let _ = write!(line, "\t{p}");
        }
        let _ = writeln!(line, "\t{}", self.score);
        line
    }

    fn from_line(line: &str, path: &Path, ln: usize) -> Result<Self> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 6 {
            return Err(Error::parse(
                path,
                ln,
                "record needs at least 6 tab-separated fields",
            ));
        }
        let bad = |what: &str, v: &str| Error::parse(path, ln, format!("bad {what} `{v}`"));
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad("number", v));
        let run_id = fields[1].parse().map_err(|_| bad("run id", fields[1]))?;
        let iteration = fields[2].parse().map_err(|_| bad("iteration", fields[2]))?;
        let phase = fields[3].parse().map_err(|_| bad("phase", fields[3]))?;
        let params = fields[4..fields.len() - 1]
            .iter()
            .map(|v| num(v))
            .collect::<Result<_>>()?;
        let score = num(fields[fields.len() - 1])?;
        Ok(IterationRecord {
            task: fields[0].to_string(),
            run_id,
            iteration,
            phase,
            params,
            score,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProceduralKind {
    OptimizedParams,
    ReducedBounds,
}

impl ProceduralKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ProceduralKind::OptimizedParams => "optimized_params",
            ProceduralKind::ReducedBounds => "reduced_bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedParams {
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub predicted_score: f64,
    pub final_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProceduralPayload {
    OptimizedParams(OptimizedParams),
    ReducedBounds(ReducedBounds),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProceduralEntry {
    pub task: String,
    pub created_by_run: Option<u64>,
    pub payload: ProceduralPayload,
}

impl ProceduralEntry {
    pub fn kind(&self) -> ProceduralKind {
        match self.payload {
            ProceduralPayload::OptimizedParams(_) => ProceduralKind::OptimizedParams,
            ProceduralPayload::ReducedBounds(_) => ProceduralKind::ReducedBounds,
        }
    }

    fn to_text(&self) -> String {
        let mut out = format!("kind {}\n", self.kind().as_str());
        if let Some(run) = self.created_by_run {
            let _ = writeln!(out, "created_by_run {run}");
        }
        match &self.payload {
            ProceduralPayload::OptimizedParams(p) => {
                let _ = writeln!(out, "task {}", self.task);
                let _ = writeln!(out, "predicted_score {}", p.predicted_score);
                let _ = writeln!(out, "final_score {}", p.final_score);
                for (n, v) in p.names.iter().zip(&p.values) {
                    let _ = writeln!(out, "value {n} {v}");
                }
            }
            ProceduralPayload::ReducedBounds(rb) => out.push_str(&rb.to_text()),
        }
        out
    }

    fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut kind = None;
        let mut created_by_run = None;
        for (i, line) in text.lines().enumerate() {
            let mut f = line.split_whitespace();
            match (f.next(), f.next(), f.next()) {
                (Some("kind"), Some(k), None) => kind = Some(k.to_string()),
                (Some("created_by_run"), Some(r), None) => {
                    created_by_run = Some(
                        r.parse()
                            .map_err(|_| Error::parse(path, i + 1, "bad run id"))?,
                    )
                }
                _ => {}
            }
        }
        match kind.as_deref() {
            Some("reduced_bounds") => {
                let rb = ReducedBounds::parse(text, path)?;
                Ok(ProceduralEntry {
                    task: rb.task.clone(),
                    created_by_run,
                    payload: ProceduralPayload::ReducedBounds(rb),
                })
            }
            Some("optimized_params") => {
                let mut task = None;
                let mut p = OptimizedParams {
                    names: Vec::new(),
                    values: Vec::new(),
                    predicted_score: f64::NAN,
                    final_score: f64::NAN,
                };
                for (i, line) in text.lines().enumerate() {
                    let f: Vec<&str> = line.split_whitespace().collect();
                    let num = |s: &str| {
                        s.parse::<f64>()
                            .map_err(|_| Error::parse(path, i + 1, format!("bad number `{s}`")))
                    };
                    match f.as_slice() {
                        ["kind", ..] | ["created_by_run", ..] | [] => {}
                        ["task", t] => task = Some(t.to_string()),
                        ["predicted_score", v] => p.predicted_score = num(v)?,
                        ["final_score", v] => p.final_score = num(v)?,
                        ["value", n, v] => {
                            p.names.push(n.to_string());
                            p.values.push(num(v)?);
                        }
                        _ => {
                            return Err(Error::parse(
                                path,
                                i + 1,
                                format!("unexpected line `{line}`"),
                            ))
                        }
                    }
                }
                Ok(ProceduralEntry {
                    task: task.ok_or_else(|| Error::parse(path, 1, "missing task"))?,
                    created_by_run,
                    payload: ProceduralPayload::OptimizedParams(p),
                })
            }
            _ => Err(Error::parse(path, 1, "missing or unknown `kind`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemanticEntry {
    pub task: String,
    pub cloud: Vec<[f64; 3]>,
    pub descriptor: Option<ShapeDescriptor>,
}

/// Parses whitespace-delimited `x y z` lines; `#` starts a comment.
pub fn parse_cloud(text: &str, origin: &Path) -> Result<Vec<[f64; 3]>> {
    let mut cloud = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 3 {
            return Err(Error::parse(
                origin,
                i + 1,
                format!("expected 3 coordinates, found {}", f.len()),
            ));
        }
        let mut p = [0.0; 3];
        for (slot, s) in p.iter_mut().zip(&f) {
            *slot = s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(origin, i + 1, format!("bad coordinate `{s}`")))?;
        }
        cloud.push(p);
    }
    Ok(cloud)
}

pub fn format_cloud(cloud: &[[f64; 3]]) -> String {
    let mut out = String::with_capacity(cloud.len() * 48);
    for p in cloud {
        let _ = writeln!(out, "{} {} {}", p[0], p[1], p[2]);
    }
    out
}

/// Task labels double as file names.
pub fn validate_label(task: &str) -> Result<()> {
    let ok = !task.is_empty()
        && !task.starts_with('.')
        && task
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "task label `{task}` must be nonempty ASCII [A-Za-z0-9_.-] not starting with '.'"
        )))
    }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().expect("snapshot paths have a parent");
    let tmp = dir.join(format!(
        ".{}.{}.{}.tmp",
        path.file_name()
            .and_then(|s| s.to_str())
            .unwrap_or("snapshot"),
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn list_stems(dir: &Path, extension: &str) -> Result<Vec<String>> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(e.into()),
    };
    for entry in entries {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(extension) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                if !stem.starts_with('.') {
                    out.push(stem.to_string());
                }
            }
        }
    }
    out.sort();
    Ok(out)
}

/// Handle on a memory root directory.
#[derive(Debug, Clone)]
pub struct Memory {
    root: PathBuf,
}

impl Memory {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        for sub in ["episodic", "procedural", "semantic"] {
            fs::create_dir_all(root.join(sub))?;
        }
        Ok(Memory { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn episodic_path(&self, task: &str) -> PathBuf {
        self.root.join("episodic").join(format!("{task}.log"))
    }

    fn procedural_path(&self, task: &str, kind: ProceduralKind) -> PathBuf {
        self.root
            .join("procedural")
            .join(format!("{task}.{}", kind.as_str()))
    }

    fn semantic_path(&self, task: &str) -> PathBuf {
        self.root.join("semantic").join(format!("{task}.xyz"))
    }

    pub fn record_iteration(&self, record: &IterationRecord) -> Result<()> {
        validate_label(&record.task)?;
        if !(record.score.is_finite() && (0.0..=1.0).contains(&record.score)) {
            return Err(Error::InvalidArgument(format!(
                "score {} must lie in [0, 1]",
                record.score
            )));
        }
        if record.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("parameters must be finite".into()));
        }
        let existing = self.query_iterations(&record.task)?;
        if existing
            .iter()
            .any(|r| r.run_id == record.run_id && r.iteration == record.iteration)
        {
            return Err(Error::DuplicateRecord {
                task: record.task.clone(),
                run_id: record.run_id,
                iteration: record.iteration,
            });
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.episodic_path(&record.task))?;
        file.write_all(record.to_line().as_bytes())?;
        Ok(())
    }

    /// Every record of `task`, ordered by `(run_id, iteration)`.
    pub fn query_iterations(&self, task: &str) -> Result<Vec<IterationRecord>> {
        validate_label(task)?;
        let path = self.episodic_path(task);
        let Some(text) = read_optional(&path)? else {
            return Ok(Vec::new());
        };
        let mut records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| IterationRecord::from_line(l, &path, i + 1))
            .collect::<Result<Vec<_>>>()?;
        records.sort_by_key(|r| (r.run_id, r.iteration));
        Ok(records)
    }

    /// One past the largest run id stored for `task` (runs start at 1).
    pub fn next_run_id(&self, task: &str) -> Result<u64> {
        Ok(self
            .query_iterations(task)?
            .iter()
            .map(|r| r.run_id)
            .max()
            .unwrap_or(0)
            + 1)
    }

    pub fn episodic_tasks(&self) -> Result<Vec<String>> {
        list_stems(&self.root.join("episodic"), "log")
    }

    pub fn store_procedural(&self, entry: &ProceduralEntry) -> Result<()> {
        validate_label(&entry.task)?;
        if let ProceduralPayload::ReducedBounds(rb) = &entry.payload {
            if rb.task != entry.task {
                return Err(Error::InvalidArgument(
                    "reduced bounds task does not match entry".into(),
                ));
            }
        }
        write_atomic(
            &self.procedural_path(&entry.task, entry.kind()),
            &entry.to_text(),
        )
    }

    /// Latest entry of `kind` for `task`, or [`Error::NotFound`].
    pub fn load_procedural(&self, task: &str, kind: ProceduralKind) -> Result<ProceduralEntry> {
        validate_label(task)?;
        let path = self.procedural_path(task, kind);
        let text = read_optional(&path)?
            .ok_or_else(|| Error::NotFound(format!("no {} for task `{task}`", kind.as_str())))?;
        let entry = ProceduralEntry::parse(&text, &path)?;
        if entry.kind() != kind {
            return Err(Error::parse(
                &path,
                1,
                "entry kind does not match file name",
            ));
        }
        Ok(entry)
    }

    pub fn load_reduced_bounds(&self, task: &str) -> Result<ReducedBounds> {
        match self
            .load_procedural(task, ProceduralKind::ReducedBounds)?
            .payload
        {
            ProceduralPayload::ReducedBounds(rb) => Ok(rb),
            ProceduralPayload::OptimizedParams(_) => unreachable!("kind checked on load"),
        }
    }

    pub fn store_cloud(&self, entry: &SemanticEntry) -> Result<()> {
        validate_label(&entry.task)?;
        if entry.cloud.is_empty() {
            return Err(Error::InvalidArgument(
                "point cloud must not be empty".into(),
            ));
        }
        write_atomic(
            &self.semantic_path(&entry.task),
            &format_cloud(&entry.cloud),
        )
    }

    pub fn load_cloud(&self, task: &str) -> Result<SemanticEntry> {
        validate_label(task)?;
        let path = self.semantic_path(task);
        let text = read_optional(&path)?
            .ok_or_else(|| Error::NotFound(format!("no point cloud for task `{task}`")))?;
        let cloud = parse_cloud(&text, &path)?;
        if cloud.is_empty() {
            return Err(Error::parse(&path, 1, "point cloud is empty"));
        }
        Ok(SemanticEntry {
            task: task.to_string(),
            cloud,
            descriptor: None,
        })
    }

    /// Tasks with a stored point cloud, sorted.
    pub fn list_tasks(&self) -> Result<Vec<String>> {
        list_stems(&self.root.join("semantic"), "xyz")
    }
}
