//! Bayesian optimization of noisy, expensive black-box functions with a
//! long-term memory that learns tighter parameter bounds from past runs.
//!
//! The building blocks:
//!
//! - [`param_space`]: bounded continuous parameters and unit-cube scaling.
//! - [`lhs_design`]: maximin Latin hypercube initial designs.
//! - [`gp_surrogate`]: Matern 3/2 Gaussian-process regression.
//! - [`acquisition`]: expected quantile improvement and expected improvement.
//! - [`cmaes`]: box-constrained CMA-ES used for acquisition and likelihood search.
//! - [`stats_tests`]: entropy uniformity test, Wilcoxon signed-rank test, percentiles.
//! - [`bounds_reduction`]: derive reduced bounds from the best past iterations.
//! - [`memory`]: episodic, procedural and semantic stores on disk.
//! - [`similarity`]: D2 shape descriptors and nearest-task retrieval.
//! - [`sim_blackbox`]: synthetic noisy bin-picking objectives.
//! - [`orchestrator`]: the optimization loop, the meta-learning variant and the
//!   paired benchmark.

// `!(a < b)` is deliberate: NaN must fail these checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod bounds_reduction;
pub mod cmaes;
mod error;
pub mod gp_surrogate;
pub mod lhs_design;
pub mod memory;
pub mod orchestrator;
pub mod param_space;
pub mod shapes;
pub mod sim_blackbox;
pub mod similarity;

pub use error::{Error, Result};

pub(crate) mod util {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub type Rng = ChaCha8Rng;

    pub fn rng(seed: u64) -> Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// SplitMix64 finalizer, used to derive independent child seeds.
    pub fn mix_seed(seed: u64, stream: u64) -> u64 {
        let mut z = seed
            .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
            .wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn mean(xs: &[f64]) -> f64 {
        if xs.is_empty() {
            return f64::NAN;
        }
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub use util::mix_seed;
