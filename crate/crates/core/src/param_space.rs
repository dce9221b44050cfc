//! Bounded continuous parameter spaces.
//!
//! Every optimizer in this crate works on the unit hypercube `[0, 1]^m`; raw
//! values only show up when a point is handed to the black box or persisted.

use std::fmt::Write as _;
use std::path::Path;

use crate::bounds_reduction::ReducedBounds;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterBound {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl ParameterBound {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        ParameterBound {
            name: name.into(),
            lower,
            upper,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// An ordered, named collection of parameter bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSpace {
    name: String,
    bounds: Vec<ParameterBound>,
}

impl ParameterSpace {
    pub fn new(name: impl Into<String>, bounds: Vec<ParameterBound>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains(char::is_whitespace) {
            return Err(Error::InvalidSpace(format!("bad space name `{name}`")));
        }
        if bounds.is_empty() {
            return Err(Error::InvalidSpace(
                "a space needs at least one parameter".into(),
            ));
        }
        for (i, b) in bounds.iter().enumerate() {
            if b.name.is_empty() || b.name.contains(char::is_whitespace) {
                return Err(Error::InvalidSpace(format!(
                    "bad parameter name `{}`",
                    b.name
                )));
            }
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower < b.upper) {
                return Err(Error::InvalidSpace(format!(
                    "parameter `{}` needs lower < upper, got {}:{}",
                    b.name, b.lower, b.upper
                )));
            }
            if bounds[..i].iter().any(|o| o.name == b.name) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate parameter `{}`",
                    b.name
                )));
            }
        }
        Ok(ParameterSpace { name, bounds })
    }

    /// The nine-parameter grasping space with its default ranges.
    pub fn default_grasping() -> Self {
        const DEFAULT: [(&str, f64, f64); 9] = [
            ("p1", -20.0, 20.0),
            ("p2", 5.0, 15.0),
            ("p3", 16.0, 100.0),
            ("p4", 5.0, 30.0),
            ("p5", 5.0, 30.0),
            ("p6", 5.0, 40.0),
            ("p7", 30.0, 300.0),
            ("p8", 5.0, 20.0),
            ("p9", 1.0, 10.0),
        ];
        let bounds = DEFAULT
            .iter()
            .map(|&(n, lo, hi)| ParameterBound::new(n, lo, hi))
            .collect();
        ParameterSpace::new("default", bounds).expect("default space is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[ParameterBound] {
        &self.bounds
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.bounds.iter().map(|b| b.name.as_str())
    }

    pub fn with_name(&self, name: impl Into<String>) -> Result<Self> {
        ParameterSpace::new(name, self.bounds.clone())
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for space `{}`, got {len}",
                self.dim(),
                self.name
            )));
        }
        Ok(())
    }

    /// Checks that `raw` lies inside the space.
    pub fn check(&self, raw: &[f64]) -> Result<()> {
        self.check_dim(raw.len())?;
        for (b, &v) in self.bounds.iter().zip(raw) {
            if !(v >= b.lower && v <= b.upper) {
                return Err(Error::BoundsViolation {
                    name: b.name.clone(),
                    value: v,
                    lower: b.lower,
                    upper: b.upper,
                });
            }
        }
        Ok(())
    }

    pub fn contains(&self, raw: &[f64]) -> bool {
        self.check(raw).is_ok()
    }

    /// Maps raw values into the unit hypercube.
    pub fn scale(&self, raw: &[f64]) -> Result<Vec<f64>> {
        self.check(raw)?;
        Ok(self
            .bounds
            .iter()
            .zip(raw)
            .map(|(b, &v)| ((v - b.lower) / b.width()).clamp(0.0, 1.0))
            .collect())
    }

    /// Maps a unit-cube point back into raw units.
    pub fn unscale(&self, unit: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(unit.len())?;
        self.bounds
            .iter()
            .zip(unit)
            .map(|(b, &u)| {
                if !(0.0..=1.0).contains(&u) {
                    return Err(Error::BoundsViolation {
                        name: b.name.clone(),
                        value: u,
                        lower: 0.0,
                        upper: 1.0,
                    });
                }
                Ok((b.lower + u * b.width()).clamp(b.lower, b.upper))
            })
            .collect()
    }

    /// Narrows the space to nested `(lower, upper)` ranges given in raw units.
    pub fn restrict_to(&self, name: impl Into<String>, ranges: &[(f64, f64)]) -> Result<Self> {
        self.check_dim(ranges.len())?;
        let mut bounds = Vec::with_capacity(self.dim());
        for (b, &(lo, hi)) in self.bounds.iter().zip(ranges) {
            if !(lo < hi) {
                return Err(Error::InvalidSpace(format!(
                    "reduced range for `{}` is inverted or empty: {lo}:{hi}",
                    b.name
                )));
            }
            if lo < b.lower || hi > b.upper {
                return Err(Error::InvalidSpace(format!(
                    "reduced range {lo}:{hi} for `{}` is not nested in {}:{}",
                    b.name, b.lower, b.upper
                )));
            }
            bounds.push(ParameterBound::new(b.name.clone(), lo, hi));
        }
        ParameterSpace::new(name, bounds)
    }

    /// Applies reduced bounds produced by bounds reduction.
    pub fn restrict(&self, reduced: &ReducedBounds) -> Result<Self> {
        if reduced.params.len() != self.dim() {
            return Err(Error::InvalidSpace(format!(
                "reduced bounds have {} parameters, space `{}` has {}",
                reduced.params.len(),
                self.name,
                self.dim()
            )));
        }
        for (b, p) in self.bounds.iter().zip(&reduced.params) {
            if b.name != p.name {
                return Err(Error::InvalidSpace(format!(
                    "parameter mismatch: space has `{}`, reduced bounds have `{}`",
                    b.name, p.name
                )));
            }
        }
        let ranges: Vec<_> = reduced.params.iter().map(|p| p.reduced).collect();
        self.restrict_to(format!("{}@{}", self.name, reduced.task), &ranges)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("space {}\n", self.name);
        for b in &self.bounds {
            let _ = writeln!(out, "{} {} {}", b.name, b.lower, b.upper);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::parse(text, Path::new("<space>"))
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut name = None;
        let mut bounds = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if name.is_none() {
                match fields.as_slice() {
                    ["space", n] => name = Some(n.to_string()),
                    _ => {
                        return Err(Error::parse(
                            origin,
                            i + 1,
                            "expected `space <name>` header",
                        ))
                    }
                }
                continue;
            }
            let [pname, lo, hi] = fields.as_slice() else {
                return Err(Error::parse(origin, i + 1, "expected `name lower upper`"));
            };
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::parse(origin, i + 1, format!("bad number `{s}`: {e}")))
            };
            bounds.push(ParameterBound::new(*pname, num(lo)?, num(hi)?));
        }
        let name = name.ok_or_else(|| Error::parse(origin, 1, "missing `space` header"))?;
        ParameterSpace::new(name, bounds)
    }
}
