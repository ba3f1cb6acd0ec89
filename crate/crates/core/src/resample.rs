//! SMOTE oversampling of the minority class.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowdata::FlowTable;
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Desired minority/majority ratio after resampling; 1.0 balances fully.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 42,
        }
    }
}

/// Where a synthetic row came from: `base + lambda * (neighbor - base)`,
/// indices into the input table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticOrigin {
    pub base: usize,
    pub neighbor: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct SmoteOutput {
    pub table: FlowTable,
    /// One entry per appended row, in append order.
    pub origins: Vec<SyntheticOrigin>,
    /// Neighbor count actually used after clamping.
    pub k_used: usize,
}

/// Point on the segment from `a` to `b`.
pub fn interpolate(a: &[f64], b: &[f64], lambda: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + lambda * (y - x)).collect()
}

pub fn smote(train: &FlowTable, config: &SmoteConfig) -> Result<FlowTable> {
    Ok(smote_detailed(train, config)?.table)
}

/// SMOTE with provenance for every synthetic row.
///
/// Base rows are visited round-robin over the minority class; each synthetic
/// row `s` draws its neighbor and interpolation factor from its own stream
/// keyed by `(seed, s)`.
pub fn smote_detailed(train: &FlowTable, config: &SmoteConfig) -> Result<SmoteOutput> {
    if config.k_neighbors == 0 {
        return Err(Error::InvalidConfig("k_neighbors must be at least 1".into()));
    }
    if !(config.target_ratio > 0.0 && config.target_ratio <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target_ratio {} not in (0,1]",
            config.target_ratio
        )));
    }
    let counts = train.class_counts();
    let minority_class: u8 = if counts[1] <= counts[0] { 1 } else { 0 };
    let n_major = counts[1 - minority_class as usize];
    let minority: Vec<usize> = (0..train.n_rows())
        .filter(|&i| train.labels()[i] == minority_class)
        .collect();
    if minority.len() < 2 {
        return Err(Error::MinorityTooSmall {
            found: minority.len(),
        });
    }
    let target = (config.target_ratio * n_major as f64).ceil() as usize;
    let n_new = target.saturating_sub(minority.len());

    let mut k = config.k_neighbors;
    if k > minority.len() - 1 {
        log::warn!(
            "SMOTE k={} exceeds minority size {} - 1; using k={}",
            k,
            minority.len(),
            minority.len() - 1
        );
        k = minority.len() - 1;
    }

    let mut out = train.clone();
    if n_new == 0 {
        return Ok(SmoteOutput {
            table: out,
            origins: Vec::new(),
            k_used: k,
        });
    }

    let neighbors = minority_neighbors(train, &minority, k);
    let m = train.n_features();
    let mut features = Vec::with_capacity(n_new * m);
    let mut origins = Vec::with_capacity(n_new);
    for s in 0..n_new {
        let local = s % minority.len();
        let mut rng = rng::stream(config.seed, Purpose::Smote, s as u64);
        let pick = neighbors[local][rng.random_range(0..k)];
        let lambda: f64 = rng.random();
        let base = minority[local];
        let neighbor = minority[pick];
        features.extend(interpolate(train.row(base), train.row(neighbor), lambda));
        origins.push(SyntheticOrigin {
            base,
            neighbor,
            lambda,
        });
    }
    out.extend_rows(&features, &vec![minority_class; n_new]);
    Ok(SmoteOutput {
        table: out,
        origins,
        k_used: k,
    })
}

/// k nearest minority neighbors (positions into `minority`) of each minority
/// row, excluding itself; distance ties go to the lower position.
fn minority_neighbors(table: &FlowTable, minority: &[usize], k: usize) -> Vec<Vec<usize>> {
    use rayon::prelude::*;
    minority
        .par_iter()
        .enumerate()
        .map(|(a, &ia)| {
            let ra = table.row(ia);
            let mut d: Vec<(f64, usize)> = minority
                .iter()
                .enumerate()
                .filter(|&(b, _)| b != a)
                .map(|(b, &ib)| {
                    let dist = ra
                        .iter()
                        .zip(table.row(ib))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>();
                    (dist, b)
                })
                .collect();
            let cmp = |x: &(f64, usize), y: &(f64, usize)| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1));
            if d.len() > k {
                d.select_nth_unstable_by(k - 1, cmp);
                d.truncate(k);
            }
            d.sort_by(cmp);
            d.into_iter().map(|(_, b)| b).collect()
        })
        .collect()
}
