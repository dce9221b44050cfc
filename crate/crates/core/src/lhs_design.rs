//! Maximin Latin hypercube designs on the unit cube.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::util;
use crate::{Error, Result};

pub const DEFAULT_RESTARTS: usize = 100;

/// `n` points in `[0, 1]^m`, one per axis stratum in every dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl DesignMatrix {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidArgument(
                "design points need a common nonzero dimension".into(),
            ));
        }
        Ok(DesignMatrix { points, dim })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when every dimension has exactly one point per stratum `[k/n, (k+1)/n)`.
    pub fn is_stratified(&self) -> bool {
        let n = self.len();
        (0..self.dim).all(|j| {
            let mut seen = vec![false; n];
            self.points.iter().all(|p| {
                let u = p[j];
                if !(0.0..1.0).contains(&u) {
                    return false;
                }
                let k = ((u * n as f64).floor() as usize).min(n - 1);
                !std::mem::replace(&mut seen[k], true)
            })
        })
    }
}

fn random_lhs(n: usize, m: usize, rng: &mut util::Rng) -> Vec<Vec<f64>> {
    let mut points = vec![vec![0.0; m]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..m {
        perm.shuffle(rng);
        for (p, &k) in points.iter_mut().zip(&perm) {
            let jitter: f64 = rng.random();
            p[j] = ((k as f64 + jitter) / n as f64).min(f64::from_bits(1f64.to_bits() - 1));
        }
    }
    points
}

fn min_distance(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Best of `restarts` random Latin hypercubes under the maximin criterion.
///
/// Candidates are drawn from one seeded stream, so a larger `restarts` with the
/// same seed always considers a superset of the candidates of a smaller one.
pub fn maximin_lhs(n: usize, m: usize, seed: u64, restarts: usize) -> Result<DesignMatrix> {
    if n == 0 || m == 0 || restarts == 0 {
        return Err(Error::InvalidArgument(format!(
            "maximin_lhs needs n, m, restarts >= 1 (got {n}, {m}, {restarts})"
        )));
    }
    let mut rng = util::rng(seed);
    let mut best = random_lhs(n, m, &mut rng);
    if n >= 2 {
        let mut best_d = min_distance(&best);
        for _ in 1..restarts {
            let cand = random_lhs(n, m, &mut rng);
            let d = min_distance(&cand);
            if d > best_d {
                best = cand;
                best_d = d;
            }
        }
    }
    DesignMatrix::new(best)
}

pub fn min_pairwise_distance(design: &DesignMatrix) -> Result<f64> {
    if design.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: design.len(),
        });
    }
    Ok(min_distance(design.points()))
}
