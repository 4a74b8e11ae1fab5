use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{JointClass, LabelPair};

pub const DECISION_THRESHOLD: f64 = 0.5;

/// Twice the Mann-Whitney U statistic (an integer, since tied ranks average
/// to half-integers) together with the positive and negative counts.
fn twice_u(scores: &[f64], labels: &[bool]) -> Result<(u128, u128, u128)> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    let pos = labels.iter().filter(|&&l| l).count() as u128;
    let neg = labels.len() as u128 - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::OneClassOnly);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidConfig("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum2 = 0u128;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start+1 ..= end share the average (start + 1 + end) / 2.
        let group_pos = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        rank_sum2 += group_pos * (start as u128 + 1 + end as u128);
        start = end;
    }
    Ok((rank_sum2 - pos * (pos + 1), pos, neg))
}

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counting one half. O(n log n).
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (u2, pos, neg) = twice_u(scores, labels)?;
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrecisionRecall {
    /// `None` when nothing is predicted positive.
    pub precision: Option<f64>,
    pub recall: f64,
}

/// Precision and recall of `score >= threshold` as the positive prediction.
pub fn precision_recall(scores: &[f64], labels: &[bool], threshold: f64) -> Result<PrecisionRecall> {
    if scores.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    if tp + fneg == 0 {
        return Err(Error::OneClassOnly);
    }
    Ok(PrecisionRecall {
        precision: (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64),
        recall: tp as f64 / (tp + fneg) as f64,
    })
}

pub fn predicted_labels(scores: [f64; 2]) -> LabelPair {
    LabelPair::new(scores[0] >= DECISION_THRESHOLD, scores[1] >= DECISION_THRESHOLD)
}

/// Per-hand ranking and threshold metrics plus per-joint-class recall and
/// precision. Undefined metrics (a hand or class absent) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_frames: usize,
    pub auc_left: Option<f64>,
    pub auc_right: Option<f64>,
    pub precision_left: Option<f64>,
    pub recall_left: Option<f64>,
    pub precision_right: Option<f64>,
    pub recall_right: Option<f64>,
    /// Indexed by [`JointClass`].
    pub class_recall: [Option<f64>; 4],
    pub class_precision: [Option<f64>; 4],
    pub class_counts: [usize; 4],
}

fn defined<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::OneClassOnly) => Ok(None),
        Err(e) => Err(e),
    }
}

impl EvalReport {
    pub fn from_scores(scores: &[[f64; 2]], labels: &[LabelPair]) -> Result<Self> {
        if scores.is_empty() {
            return Err(Error::EmptyManifest);
        }
        if scores.len() != labels.len() {
            return Err(Error::ShapeMismatch(format!("{} scores vs {} labels", scores.len(), labels.len())));
        }
        let hand = |h: usize| -> (Vec<f64>, Vec<bool>) {
            let s = scores.iter().map(|s| s[h]).collect();
            let l = labels
                .iter()
                .map(|l| if h == 0 { l.left_on_wheel } else { l.right_on_wheel })
                .collect();
            (s, l)
        };
        let (sl, ll) = hand(0);
        let (sr, lr) = hand(1);
        let prl = defined(precision_recall(&sl, &ll, DECISION_THRESHOLD))?;
        let prr = defined(precision_recall(&sr, &lr, DECISION_THRESHOLD))?;

        let mut truth = [0usize; 4];
        let mut predicted = [0usize; 4];
        let mut hit = [0usize; 4];
        for (s, l) in scores.iter().zip(labels) {
            let t = l.class() as usize;
            let p = predicted_labels(*s).class() as usize;
            truth[t] += 1;
            predicted[p] += 1;
            if t == p {
                hit[t] += 1;
            }
        }
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Ok(Self {
            n_frames: scores.len(),
            auc_left: defined(roc_auc(&sl, &ll))?,
            auc_right: defined(roc_auc(&sr, &lr))?,
            precision_left: prl.and_then(|p| p.precision),
            recall_left: prl.map(|p| p.recall),
            precision_right: prr.and_then(|p| p.precision),
            recall_right: prr.map(|p| p.recall),
            class_recall: std::array::from_fn(|c| ratio(hit[c], truth[c])),
            class_precision: std::array::from_fn(|c| ratio(hit[c], predicted[c])),
            class_counts: truth,
        })
    }

    /// Mean of the defined per-hand AUCs.
    pub fn mean_auc(&self) -> Option<f64> {
        let v: Vec<f64> = [self.auc_left, self.auc_right].into_iter().flatten().collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn class_recall_of(&self, c: JointClass) -> Option<f64> {
        self.class_recall[c as usize]
    }

    pub fn class_precision_of(&self, c: JointClass) -> Option<f64> {
        self.class_precision[c as usize]
    }

    /// One `key value` line per metric; undefined values print as `undefined`.
    pub fn to_text(&self) -> String {
        let f = |v: Option<f64>| v.map_or("undefined".to_string(), |v| format!("{v:.6}"));
        let mut lines = vec![
            format!("n_frames {}", self.n_frames),
            format!("auc_left {}", f(self.auc_left)),
            format!("auc_right {}", f(self.auc_right)),
            format!("precision_left {}", f(self.precision_left)),
            format!("recall_left {}", f(self.recall_left)),
            format!("precision_right {}", f(self.precision_right)),
            format!("recall_right {}", f(self.recall_right)),
        ];
        for c in JointClass::ALL {
            let i = c as usize;
            lines.push(format!("count_{} {}", c.name(), self.class_counts[i]));
            lines.push(format!("recall_{} {}", c.name(), f(self.class_recall[i])));
            lines.push(format!("precision_{} {}", c.name(), f(self.class_precision[i])));
        }
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute(scores: &[f64], labels: &[bool]) -> f64 {
        let (mut good2, mut pairs) = (0u128, 0u128);
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    pairs += 1;
                    good2 += if scores[i] > scores[j] {
                        2
                    } else if scores[i] == scores[j] {
                        1
                    } else {
                        0
                    };
                }
            }
        }
        good2 as f64 / (2 * pairs) as f64
    }

    #[test]
    fn reference_values() {
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::OneClassOnly)));
    }

    #[test]
    fn precision_recall_reference() {
        let labels = [true, false, true, false, false];
        let perfect = [0.9, 0.1, 0.8, 0.2, 0.3];
        let pr = precision_recall(&perfect, &labels, 0.5).unwrap();
        assert_eq!((pr.precision, pr.recall), (Some(1.0), 1.0));
        let all = precision_recall(&[0.7; 5], &labels, 0.5).unwrap();
        assert_eq!((all.precision, all.recall), (Some(0.4), 1.0));
        let none = precision_recall(&[0.1; 5], &labels, 0.5).unwrap();
        assert_eq!((none.precision, none.recall), (None, 0.0));
        assert!(matches!(precision_recall(&[0.7; 2], &[false, false], 0.5), Err(Error::OneClassOnly)));
    }

    #[test]
    fn report_of_constant_and_oracle_scores() {
        let labels: Vec<LabelPair> = [0, 1, 2, 3, 0, 1].iter().map(|&c| JointClass::ALL[c].labels()).collect();
        let half = EvalReport::from_scores(&[[0.5, 0.5]; 6], &labels).unwrap();
        assert_eq!((half.auc_left, half.auc_right), (Some(0.5), Some(0.5)));
        let oracle: Vec<[f64; 2]> = labels
            .iter()
            .map(|l| [l.left_on_wheel as u8 as f64, l.right_on_wheel as u8 as f64])
            .collect();
        let r = EvalReport::from_scores(&oracle, &labels).unwrap();
        assert_eq!((r.auc_left, r.auc_right), (Some(1.0), Some(1.0)));
        assert!(r.class_recall.iter().all(|&v| v == Some(1.0)));
        assert_eq!(r.class_counts, [2, 2, 1, 1]);
        assert!(r.to_text().contains("recall_off_off 1.000000"));
    }

    proptest! {
        #[test]
        fn matches_brute_force(raw in prop::collection::vec((0u8..20, any::<bool>()), 2..200)) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0 as f64 / 20.0).collect();
            let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
            match roc_auc(&scores, &labels) {
                Ok(a) => {
                    prop_assert_eq!(a, brute(&scores, &labels));
                    let cube: Vec<f64> = scores.iter().map(|s| s * s * s).collect();
                    let sig: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-5.0 * s).exp())).collect();
                    prop_assert_eq!(roc_auc(&cube, &labels).unwrap(), a);
                    prop_assert_eq!(roc_auc(&sig, &labels).unwrap(), a);
                    let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
                    prop_assert_eq!(roc_auc(&scores, &flipped).unwrap() + a, 1.0);
                }
                Err(e) => prop_assert!(matches!(e, Error::OneClassOnly)),
            }
        }

        #[test]
        fn precision_recall_matches_recount(raw in prop::collection::vec((0.0f64..1.0, any::<bool>()), 1..100)) {
            let scores: Vec<f64> = raw.iter().map(|r| r.0).collect();
            let labels: Vec<bool> = raw.iter().map(|r| r.1).collect();
            let tp = raw.iter().filter(|r| r.0 >= 0.5 && r.1).count();
            let fp = raw.iter().filter(|r| r.0 >= 0.5 && !r.1).count();
            let pos = raw.iter().filter(|r| r.1).count();
            match precision_recall(&scores, &labels, 0.5) {
                Ok(pr) => {
                    prop_assert_eq!(pr.recall, tp as f64 / pos as f64);
                    prop_assert_eq!(pr.precision, (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64));
                }
                Err(_) => prop_assert_eq!(pos, 0),
            }
        }
    }
}
