use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};

use super::{Manifest, SplitTag};
use crate::error::{Error, Result};
use crate::seeding;

/// Train/val/test ratios for identity-disjoint splitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, val: f64, test: f64, seed: u64) -> Result<Self> {
        let s = Self {
            ratios: [train, val, test],
            seed,
        };
        s.validate()?;
        Ok(s)
    }

    /// Ratios must sum to one; a zero ratio leaves that split empty.
    pub fn validate(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::InvalidConfig(format!("split ratios {:?} must be >= 0", self.ratios)));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidConfig(format!("split ratios sum to {sum}, not 1")));
        }
        Ok(())
    }
}

/// Largest identity count searched exhaustively; above it assignment is greedy.
const EXACT_LIMIT: usize = 10;

fn cost(sums: &[usize; 3], targets: &[f64; 3]) -> f64 {
    sums.iter().zip(targets).map(|(&s, t)| (s as f64 - t).abs()).sum()
}

fn exact_assignment(counts: &[usize], targets: &[f64; 3], need: &[bool; 3]) -> Vec<usize> {
    let n = counts.len();
    let mut assign = vec![0usize; n];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut sums = [0usize; 3];
    let mut members = [0usize; 3];
    #[allow(clippy::too_many_arguments)]
    fn rec(
        i: usize,
        counts: &[usize],
        targets: &[f64; 3],
        need: &[bool; 3],
        assign: &mut Vec<usize>,
        sums: &mut [usize; 3],
        members: &mut [usize; 3],
        best: &mut Option<(f64, Vec<usize>)>,
    ) {
        if i == counts.len() {
            if (0..3).any(|s| need[s] != (members[s] > 0)) {
                return;
            }
            let c = cost(sums, targets);
            // Strict improvement keeps the first optimum in shuffled order.
            if best.as_ref().is_none_or(|(b, _)| c < *b - 1e-9) {
                *best = Some((c, assign.clone()));
            }
            return;
        }
        for s in 0..3 {
            if !need[s] {
                continue;
            }
            assign[i] = s;
            sums[s] += counts[i];
            members[s] += 1;
            rec(i + 1, counts, targets, need, assign, sums, members, best);
            sums[s] -= counts[i];
            members[s] -= 1;
        }
    }
    rec(0, counts, targets, need, &mut assign, &mut sums, &mut members, &mut best);
    best.expect("enough identities for every required split").1
}

fn greedy_assignment(counts: &[usize], targets: &[f64; 3], need: &[bool; 3]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Stable sort keeps the shuffled order among equal counts.
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    let mut assign = vec![0; counts.len()];
    let mut sums = [0usize; 3];
    let mut members = [0usize; 3];
    for (k, &i) in order.iter().enumerate() {
        let remaining = order.len() - k;
        let empty_needed: Vec<usize> = (0..3).filter(|&s| need[s] && members[s] == 0).collect();
        let s = if empty_needed.len() >= remaining {
            empty_needed[0]
        } else {
            (0..3)
                .filter(|&s| need[s])
                .max_by(|&a, &b| {
                    let da = targets[a] - sums[a] as f64;
                    let db = targets[b] - sums[b] as f64;
                    da.partial_cmp(&db).expect("finite").then(b.cmp(&a))
                })
                .expect("at least one split")
        };
        assign[i] = s;
        sums[s] += counts[i];
        members[s] += 1;
    }
    assign
}

/// Partitions drivers into train/val/test so that frame-count fractions best
/// match the requested ratios. No driver appears in two splits.
pub fn split_by_identity(m: &Manifest, spec: &SplitSpec) -> Result<(Manifest, Manifest, Manifest)> {
    spec.validate()?;
    let need = spec.ratios.map(|r| r > 0.0);
    let needed = need.iter().filter(|&&n| n).count();
    let counts_by_driver = m.driver_counts();
    if counts_by_driver.len() < needed.max(3) {
        return Err(Error::TooFewIdentities {
            needed: needed.max(3),
            found: counts_by_driver.len(),
        });
    }
    let mut drivers: Vec<(String, usize)> = counts_by_driver.into_iter().collect();
    drivers.shuffle(&mut seeding::stream_rng(spec.seed, &[seeding::tag("split")]));
    let counts: Vec<usize> = drivers.iter().map(|d| d.1).collect();
    let total = m.len() as f64;
    let targets = spec.ratios.map(|r| r * total);
    let assign = if drivers.len() <= EXACT_LIMIT {
        exact_assignment(&counts, &targets, &need)
    } else {
        greedy_assignment(&counts, &targets, &need)
    };
    let mut sets: [BTreeSet<String>; 3] = Default::default();
    for ((id, _), s) in drivers.into_iter().zip(assign) {
        sets[s].insert(id);
    }
    Ok((
        m.with_drivers(&sets[0], SplitTag::Train),
        m.with_drivers(&sets[1], SplitTag::Val),
        m.with_drivers(&sets[2], SplitTag::Test),
    ))
}

/// Five drivers, four sequences each, `frames_per_sequence` frames from each
/// sequence; output size is `20 * frames_per_sequence`.
pub fn sample_small_real_subset(
    m: &Manifest,
    drivers: usize,
    frames_per_sequence: usize,
    seed: u64,
) -> Result<Manifest> {
    const SEQUENCES_PER_DRIVER: usize = 4;
    if frames_per_sequence == 0 || drivers == 0 {
        return Err(Error::InvalidConfig("subset sizes must be >= 1".into()));
    }
    let mut by_driver: BTreeMap<&str, BTreeMap<&str, Vec<usize>>> = BTreeMap::new();
    for (i, r) in m.records.iter().enumerate() {
        by_driver
            .entry(&r.driver_id)
            .or_default()
            .entry(&r.sequence_id)
            .or_default()
            .push(i);
    }
    let mut eligible: Vec<(&str, Vec<&Vec<usize>>)> = by_driver
        .iter()
        .filter_map(|(d, seqs)| {
            let long: Vec<&Vec<usize>> = seqs.values().filter(|f| f.len() >= frames_per_sequence).collect();
            (long.len() >= SEQUENCES_PER_DRIVER).then_some((*d, long))
        })
        .collect();
    if eligible.len() < drivers {
        return Err(Error::InsufficientData(format!(
            "{} drivers have {SEQUENCES_PER_DRIVER} sequences of >= {frames_per_sequence} frames, need {drivers}",
            eligible.len()
        )));
    }
    let mut rng = seeding::stream_rng(seed, &[seeding::tag("small_real_subset")]);
    eligible.shuffle(&mut rng);
    let mut chosen = Vec::with_capacity(drivers * SEQUENCES_PER_DRIVER * frames_per_sequence);
    for (_, mut seqs) in eligible.into_iter().take(drivers) {
        seqs.shuffle(&mut rng);
        for frames in seqs.into_iter().take(SEQUENCES_PER_DRIVER) {
            chosen.extend(frames.choose_multiple(&mut rng, frames_per_sequence).copied());
        }
    }
    chosen.sort_unstable();
    Manifest::new(
        chosen.into_iter().map(|i| m.records[i].clone()).collect(),
        m.split,
        m.config_hash.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::tests::record;
    use crate::labeling::LabelPair;
    use proptest::prelude::*;

    fn manifest(frames_per_driver: &[usize]) -> Manifest {
        let mut records = Vec::new();
        for (d, &n) in frames_per_driver.iter().enumerate() {
            for f in 0..n {
                let seq = format!("s{d:02}_{}", f / 30);
                records.push(record(&seq, f, &format!("drv{d:02}"), LabelPair::new(true, f % 2 == 0)));
            }
        }
        Manifest::new(records, SplitTag::Unsplit, "h").unwrap()
    }

    #[test]
    fn equal_drivers_split_eight_one_one() {
        let m = manifest(&[30; 10]);
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 3).unwrap();
        let (tr, va, te) = split_by_identity(&m, &spec).unwrap();
        assert_eq!((tr.drivers().len(), va.drivers().len(), te.drivers().len()), (8, 1, 1));
        assert_eq!(tr.len() + va.len() + te.len(), m.len());
    }

    #[test]
    fn too_few_identities() {
        let m = manifest(&[10, 10]);
        let spec = SplitSpec::new(0.8, 0.1, 0.1, 0).unwrap();
        assert!(matches!(
            split_by_identity(&m, &spec),
            Err(Error::TooFewIdentities { needed: 3, found: 2 })
        ));
    }

    #[test]
    fn skewed_counts_match_best_assignment() {
        // Oracle: brute force over all 3^n assignments with non-empty splits.
        let counts = [5usize, 40, 12, 7, 90, 33, 18, 61];
        let m = manifest(&counts);
        let spec = SplitSpec::new(0.7, 0.15, 0.15, 9).unwrap();
        let (tr, va, te) = split_by_identity(&m, &spec).unwrap();
        let total = m.len() as f64;
        let got = [tr.len(), va.len(), te.len()];
        let got_cost: f64 = got.iter().zip(spec.ratios).map(|(&g, r)| (g as f64 - r * total).abs()).sum();
        let mut best = f64::INFINITY;
        for code in 0..3usize.pow(counts.len() as u32) {
            let mut c = code;
            let mut sums = [0usize; 3];
            let mut members = [0; 3];
            for &n in &counts {
                sums[c % 3] += n;
                members[c % 3] += 1;
                c /= 3;
            }
            if members.contains(&0) {
                continue;
            }
            let cost: f64 = sums.iter().zip(spec.ratios).map(|(&s, r)| (s as f64 - r * total).abs()).sum();
            best = best.min(cost);
        }
        assert!((got_cost - best).abs() < 1e-9, "{got_cost} vs {best}");
        let largest = *counts.iter().max().unwrap() as f64 / total;
        for (g, r) in got.iter().zip(spec.ratios) {
            assert!((*g as f64 / total - r).abs() <= largest);
        }
    }

    #[test]
    fn zero_test_ratio_leaves_test_empty() {
        let m = manifest(&[30; 10]);
        let spec = SplitSpec::new(0.783, 0.217, 0.0, 1).unwrap();
        let (tr, va, te) = split_by_identity(&m, &spec).unwrap();
        assert!(te.is_empty());
        assert_eq!((tr.drivers().len(), va.drivers().len()), (8, 2));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn splits_are_identity_disjoint(counts in prop::collection::vec(1usize..60, 3..16), seed in any::<u64>()) {
            let m = manifest(&counts);
            let spec = SplitSpec::new(0.6, 0.2, 0.2, seed).unwrap();
            let (tr, va, te) = split_by_identity(&m, &spec).unwrap();
            let (a, b, c) = (tr.drivers(), va.drivers(), te.drivers());
            prop_assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
            prop_assert!(!a.is_empty() && !b.is_empty() && !c.is_empty());
            prop_assert_eq!(tr.len() + va.len() + te.len(), m.len());
        }
    }

    #[test]
    fn small_subset_sizes() {
        // 6 drivers x 4 sequences x 30 frames.
        let mut records = Vec::new();
        for d in 0..6 {
            for s in 0..4 {
                for f in 0..30 {
                    records.push(record(&format!("real{d}{s}"), f, &format!("real{d:02}"), LabelPair::new(true, false)));
                }
            }
        }
        let m = Manifest::new(records, SplitTag::Train, "h").unwrap();
        for fps in [5, 10, 15, 20] {
            assert_eq!(sample_small_real_subset(&m, 5, fps, 1).unwrap().len(), 20 * fps);
        }
        let a = sample_small_real_subset(&m, 5, 5, 1).unwrap();
        let b = sample_small_real_subset(&m, 5, 5, 2).unwrap();
        assert_ne!(a, b);
        for x in [&a, &b] {
            assert!(x.driver_counts().values().all(|&n| n == 20));
            assert_eq!(x.driver_counts().len(), 5);
        }
        assert!(matches!(sample_small_real_subset(&m, 5, 31, 1), Err(Error::InsufficientData(_))));
    }
}
