//! Analytic point clouds standing in for object scans.

use std::f64::consts::PI;

use rand::Rng;

use crate::util;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeKind {
    Cube,
    Sphere,
    Rod,
    Disc,
    Torus,
    Cone,
    Elbow,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 7] = [
        ShapeKind::Cube,
        ShapeKind::Sphere,
        ShapeKind::Rod,
        ShapeKind::Disc,
        ShapeKind::Torus,
        ShapeKind::Cone,
        ShapeKind::Elbow,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ShapeKind::Cube => "cube",
            ShapeKind::Sphere => "sphere",
            ShapeKind::Rod => "rod",
            ShapeKind::Disc => "disc",
            ShapeKind::Torus => "torus",
            ShapeKind::Cone => "cone",
            ShapeKind::Elbow => "elbow",
        }
    }
}

impl std::str::FromStr for ShapeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ShapeKind::ALL
            .iter()
            .copied()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown shape `{s}`")))
    }
}

fn cylinder_surface(rng: &mut util::Rng, radius: f64, length: f64) -> [f64; 3] {
    let side = 2.0 * PI * radius * length;
    let cap = PI * radius * radius;
    let t = rng.random::<f64>() * (side + 2.0 * cap);
    if t < side {
        let a = rng.random::<f64>() * 2.0 * PI;
        [
            radius * a.cos(),
            radius * a.sin(),
            (rng.random::<f64>() - 0.5) * length,
        ]
    } else {
        let r = radius * rng.random::<f64>().sqrt();
        let a = rng.random::<f64>() * 2.0 * PI;
        let z = if t < side + cap {
            -length / 2.0
        } else {
            length / 2.0
        };
        [r * a.cos(), r * a.sin(), z]
    }
}

fn sample(kind: ShapeKind, rng: &mut util::Rng) -> [f64; 3] {
    match kind {
        ShapeKind::Cube => {
            let face = rng.random_range(0..6);
            let (u, v) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let s = if face % 2 == 0 { 0.5 } else { -0.5 };
            match face / 2 {
                0 => [s, u, v],
                1 => [u, s, v],
                _ => [u, v, s],
            }
        }
        ShapeKind::Sphere => {
            let z = 2.0 * rng.random::<f64>() - 1.0;
            let a = rng.random::<f64>() * 2.0 * PI;
            let r = (1.0 - z * z).sqrt();
            [r * a.cos(), r * a.sin(), z]
        }
        ShapeKind::Rod => cylinder_surface(rng, 0.15, 2.0),
        ShapeKind::Disc => cylinder_surface(rng, 1.0, 0.15),
        ShapeKind::Torus => {
            let (big, small) = (1.0, 0.3);
            // rejection sampling for uniform surface density
            loop {
                let u = rng.random::<f64>() * 2.0 * PI;
                let v = rng.random::<f64>() * 2.0 * PI;
                let w = rng.random::<f64>();
                if w <= (big + small * v.cos()) / (big + small) {
                    return [
                        (big + small * v.cos()) * u.cos(),
                        (big + small * v.cos()) * u.sin(),
                        small * v.sin(),
                    ];
                }
            }
        }
        ShapeKind::Cone => {
            let (radius, height): (f64, f64) = (0.6, 1.5);
            let slant = (radius * radius + height * height).sqrt();
            let lateral = PI * radius * slant;
            let base = PI * radius * radius;
            let a = rng.random::<f64>() * 2.0 * PI;
            if rng.random::<f64>() * (lateral + base) < lateral {
                let t = rng.random::<f64>().sqrt();
                [
                    t * radius * a.cos(),
                    t * radius * a.sin(),
                    height * (1.0 - t),
                ]
            } else {
                let r = radius * rng.random::<f64>().sqrt();
                [r * a.cos(), r * a.sin(), 0.0]
            }
        }
        ShapeKind::Elbow => {
            let p = cylinder_surface(rng, 0.12, 1.0);
            if rng.random::<bool>() {
                [p[0], p[1], p[2] + 0.5]
            } else {
                [p[2] + 0.5, p[1], p[0]]
            }
        }
    }
}

/// `n` surface samples of a canonical shape.
pub fn generate(kind: ShapeKind, n: usize, seed: u64) -> Vec<[f64; 3]> {
    generate_stretched(kind, n, seed, [1.0; 3])
}

/// Like [`generate`] with per-axis stretch factors applied.
pub fn generate_stretched(
    kind: ShapeKind,
    n: usize,
    seed: u64,
    stretch: [f64; 3],
) -> Vec<[f64; 3]> {
    let mut rng = util::rng(seed);
    (0..n)
        .map(|_| {
            let p = sample(kind, &mut rng);
            [p[0] * stretch[0], p[1] * stretch[1], p[2] * stretch[2]]
        })
        .collect()
}

/// Rotates by Z-Y-X Euler angles, scales uniformly, then translates.
pub fn transform(
    cloud: &[[f64; 3]],
    euler: [f64; 3],
    scale: f64,
    shift: [f64; 3],
) -> Vec<[f64; 3]> {
    let (sa, ca) = euler[0].sin_cos();
    let (sb, cb) = euler[1].sin_cos();
    let (sc, cc) = euler[2].sin_cos();
    let r = [
        [ca * cb, ca * sb * sc - sa * cc, ca * sb * cc + sa * sc],
        [sa * cb, sa * sb * sc + ca * cc, sa * sb * cc - ca * sc],
        [-sb, cb * sc, cb * cc],
    ];
    cloud
        .iter()
        .map(|p| {
            let mut q = [0.0; 3];
            for (i, row) in r.iter().enumerate() {
                q[i] = scale * (row[0] * p[0] + row[1] * p[1] + row[2] * p[2]) + shift[i];
            }
            q
        })
        .collect()
}
