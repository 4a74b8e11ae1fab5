use rand::seq::SliceRandom;

use super::Manifest;
use crate::error::{Error, Result};
use crate::labeling::JointClass;
use crate::seeding;

/// Allowed deviation from each target fraction (0.5 percentage points).
pub const BALANCE_TOLERANCE: f64 = 0.005;

/// Target synthetic label mix: on_on, on_off, off_on, off_off. Rounded to one
/// decimal percent, so it sums to 0.999.
pub const SYNTHETIC_LABEL_MIX: [f64; 4] = [0.5, 0.314, 0.178, 0.007];

fn within(counts: &[usize; 4], target: &[f64; 4]) -> bool {
    let n: usize = counts.iter().sum();
    n > 0 && counts
        .iter()
        .zip(target)
        .all(|(&c, t)| (c as f64 / n as f64 - t).abs() <= BALANCE_TOLERANCE + 1e-12)
}

/// Per-class keep counts for the largest pool size that fits the target.
fn keep_counts(available: &[usize; 4], target: &[f64; 4]) -> Option<[usize; 4]> {
    let total: usize = available.iter().sum();
    // No class can supply more than count / fraction records in total.
    let ceiling = (0..4)
        .filter(|&c| target[c] > 0.0)
        .map(|c| (available[c] as f64 / target[c] + 1e-9).floor() as usize)
        .min()
        .unwrap_or(0)
        .min(total);
    (1..=ceiling).rev().find_map(|n| {
        let k: [usize; 4] = std::array::from_fn(|c| ((target[c] * n as f64).round() as usize).min(available[c]));
        within(&k, target).then_some(k)
    })
}

/// Deletion-only rebalancing to `target` fractions (indexed by [`JointClass`]).
/// Targets may be rounded percentages; they must sum to 1 within 0.01.
/// Which records survive within a class is uniform and seeded; order is kept.
pub fn balance_undersample(m: &Manifest, target: &[f64; 4], seed: u64) -> Result<Manifest> {
    if target.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || (target.iter().sum::<f64>() - 1.0).abs() > 0.01 {
        return Err(Error::InvalidConfig(format!("balance target {target:?} is not a distribution")));
    }
    if m.is_empty() {
        return Err(Error::EmptyManifest);
    }
    let counts = m.histogram().counts;
    if within(&counts, target) {
        return Ok(m.clone());
    }
    let keep = keep_counts(&counts, target).ok_or_else(|| {
        Error::UnachievableTarget(format!("class counts {counts:?} cannot reach {target:?} by deletion"))
    })?;
    let mut keep_mask = vec![false; m.len()];
    for class in JointClass::ALL {
        let mut idx: Vec<usize> = (0..m.len()).filter(|&i| m.records[i].labels.class() == class).collect();
        idx.shuffle(&mut seeding::stream_rng(seed, &[seeding::tag("balance"), class as u64]));
        for &i in idx.iter().take(keep[class as usize]) {
            keep_mask[i] = true;
        }
    }
    Manifest::new(
        m.records
            .iter()
            .zip(&keep_mask)
            .filter(|(_, &k)| k)
            .map(|(r, _)| r.clone())
            .collect(),
        m.split,
        m.config_hash.clone(),
    )
}
