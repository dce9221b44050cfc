//! Shape similarity between tasks through D2 shape distributions.
//!
//! A descriptor is the histogram of random pairwise point distances divided by
//! their mean, which makes it invariant to rigid motions and uniform scaling.
//! Any fixed-length feature vector works with [`descriptor_distance`] and the
//! nearest-task lookup.

use rand::Rng;

use crate::memory::Memory;
use crate::util;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorConfig {
    pub bins: usize,
    pub pair_samples: usize,
    pub seed: u64,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        DescriptorConfig {
            bins: 64,
            pair_samples: 100_000,
            seed: 0,
        }
    }
}

/// Upper end of the histogram support, in units of the mean distance.
pub const HISTOGRAM_SUPPORT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeDescriptor {
    pub histogram: Vec<f64>,
    /// Mean sampled pair distance used for normalization.
    pub scale: f64,
}

pub fn descriptor(cloud: &[[f64; 3]], config: &DescriptorConfig) -> Result<ShapeDescriptor> {
    if cloud.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: cloud.len(),
        });
    }
    if config.bins == 0 || config.pair_samples == 0 {
        return Err(Error::InvalidArgument(
            "descriptor needs bins and pair samples".into(),
        ));
    }
    if cloud.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "point cloud coordinates must be finite".into(),
        ));
    }
    if cloud.iter().all(|p| p == &cloud[0]) {
        return Err(Error::InvalidArgument(
            "point cloud has zero diameter".into(),
        ));
    }

    let mut sorted = cloud.to_vec();
    sorted.sort_by(|a, b| {
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });

    let n = sorted.len();
    let mut rng = util::rng(config.seed);
    let distances: Vec<f64> = (0..config.pair_samples)
        .map(|_| {
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let (a, b) = (sorted[i], sorted[j]);
            ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
        })
        .collect();
    let scale = util::mean(&distances);
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(
            "sampled pairs have zero mean distance".into(),
        ));
    }

    let mut histogram = vec![0.0; config.bins];
    let width = HISTOGRAM_SUPPORT / config.bins as f64;
    for d in &distances {
        let bin = ((d / scale / width) as usize).min(config.bins - 1);
        histogram[bin] += 1.0;
    }
    let total = distances.len() as f64;
    histogram.iter_mut().for_each(|h| *h /= total);
    Ok(ShapeDescriptor { histogram, scale })
}

/// Euclidean distance between two descriptors of equal length.
pub fn descriptor_distance(a: &ShapeDescriptor, b: &ShapeDescriptor) -> Result<f64> {
    if a.histogram.len() != b.histogram.len() {
        return Err(Error::InvalidArgument(format!(
            "descriptor lengths differ: {} vs {}",
            a.histogram.len(),
            b.histogram.len()
        )));
    }
    Ok(a.histogram
        .iter()
        .zip(&b.histogram)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt())
}

/// The stored task whose cloud is closest to `query`; ties go to the smaller label.
pub fn most_similar(
    query: &[[f64; 3]],
    memory: &Memory,
    config: &DescriptorConfig,
) -> Result<(String, f64)> {
    let tasks = memory.list_tasks()?;
    if tasks.is_empty() {
        return Err(Error::NotFound(
            "semantic memory holds no point clouds".into(),
        ));
    }
    let q = descriptor(query, config)?;
    let mut best: Option<(String, f64)> = None;
    for task in tasks {
        let entry = memory.load_cloud(&task)?;
        let d = descriptor_distance(&q, &descriptor(&entry.cloud, config)?)?;
        let better = match &best {
            None => true,
            Some((label, bd)) => d < *bd || (d == *bd && task < *label),
        };
        if better {
            best = Some((task, d));
        }
    }
    Ok(best.expect("nonempty task list"))
}
