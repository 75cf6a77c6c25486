//! Per-class subsetting and long-tailed resampling. Both draw without
//! replacement and are deterministic for a given seed.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Indices of exactly `n_per_class` items from every class, shuffled.
pub fn subset_per_class_indices(dataset: &LabeledDataset, n_per_class: usize, seed: u64) -> Result<Vec<usize>> {
    let counts = vec![n_per_class; dataset.num_classes()];
    sample_class_counts(dataset, &counts, seed)
}

pub fn subset_per_class(dataset: &LabeledDataset, n_per_class: usize, seed: u64) -> Result<LabeledDataset> {
    Ok(dataset.select(&subset_per_class_indices(dataset, n_per_class, seed)?))
}

fn sample_class_counts(dataset: &LabeledDataset, counts: &[usize], seed: u64) -> Result<Vec<usize>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_class = dataset.indices_by_class();
    let mut picked = Vec::with_capacity(counts.iter().sum());
    for (class, (members, &n)) in by_class.iter().zip(counts).enumerate() {
        if n > members.len() {
            return Err(Error::invalid(format!(
                "class {class} has {} items, {n} requested",
                members.len()
            )));
        }
        picked.extend(index::sample(&mut rng, members.len(), n).into_iter().map(|j| members[j]));
    }
    picked.shuffle(&mut rng);
    Ok(picked)
}

/// Exponential class-count profile `n_i = round(n_max · ρ^(−i/(C−1)))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImbalanceProfile {
    pub rho: f64,
    pub per_class_counts: Vec<usize>,
}

impl ImbalanceProfile {
    pub fn new(n_max: usize, num_classes: usize, rho: f64) -> Result<Self> {
        if !(rho >= 1.0 && rho.is_finite()) {
            return Err(Error::invalid(format!("imbalance ratio {rho} must be at least 1")));
        }
        let last = num_classes.saturating_sub(1).max(1) as f64;
        let per_class_counts = (0..num_classes)
            .map(|i| {
                let n = (n_max as f64 * rho.powf(-(i as f64) / last)).round() as usize;
                if n == 0 {
                    log::warn!("class {i} rounds to zero items under rho = {rho}; keeping one");
                }
                n.max(1)
            })
            .collect();
        Ok(ImbalanceProfile { rho, per_class_counts })
    }

    pub fn max_count(&self) -> usize {
        self.per_class_counts.iter().copied().max().unwrap_or(0)
    }

    pub fn min_count(&self) -> usize {
        self.per_class_counts.iter().copied().min().unwrap_or(0)
    }
}

/// Indices of a long-tailed subsample plus its profile. `n_max` is the smallest
/// original class count, so every class can supply its quota.
pub fn long_tailed_indices(dataset: &LabeledDataset, rho: f64, seed: u64) -> Result<(Vec<usize>, ImbalanceProfile)> {
    let n_max = dataset.class_counts().into_iter().min().unwrap_or(0);
    let profile = ImbalanceProfile::new(n_max, dataset.num_classes(), rho)?;
    let picked = sample_class_counts(dataset, &profile.per_class_counts, seed)?;
    Ok((picked, profile))
}

pub fn make_long_tailed(dataset: &LabeledDataset, rho: f64, seed: u64) -> Result<(LabeledDataset, ImbalanceProfile)> {
    let (picked, profile) = long_tailed_indices(dataset, rho, seed)?;
    Ok((dataset.select(&picked), profile))
}
