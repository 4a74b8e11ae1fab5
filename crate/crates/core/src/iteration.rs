//! One round of the data-centric loop, end to end: train, collect errors,
//! categorize them, turn the tallies into a plan, generate the planned
//! sequences, retrain with the same recipe on the grown pool, and compare
//! both-off recall and precision on a fixed test set.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::datasets::{generate_frames, generate_sequences, Manifest, SplitTag};
use crate::error::{Error, Result};
use crate::experiment::MatrixPools;
use crate::labeling::{JointClass, LabelPair};
use crate::nn::{ModelConfig, ModelParams};
use crate::pipeline::{
    collect_errors, finetune_mixed, predicted_labels, score, train, Dataset, ErrorCategory, ErrorRecord, EvalReport, TrainConfig,
};
use crate::scenegen::{Behavior, GenerationConfig, TargetedSequence};
use crate::seeding;
use crate::triage::{apply_plan, build_iteration_plan, IterationPlan, DEFAULT_BUDGET_FRAMES};

/// Target-domain test set with a large share of both-hands-off sequences,
/// driven by identities that appear in no training pool.
pub fn both_off_test_config() -> GenerationConfig {
    let mut cfg = GenerationConfig::desk_pseudo_real();
    cfg.sequence_prefix = "fixedtest".into();
    cfg.seed = 4242;
    cfg.driver_set = (0..6).map(|i| format!("heldout{i:02}")).collect();
    cfg.num_sequences = 36;
    cfg.targeted = vec![
        TargetedSequence {
            behavior: Behavior::BothHandsOff,
            cross_reach: false,
        };
        12
    ];
    cfg
}

/// Both-off class counts and metrics of one model on the fixed test set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BothOffMetrics {
    /// Frames truly both-off and predicted both-off.
    pub true_positives: usize,
    /// Frames truly both-off.
    pub actual: usize,
    /// Frames predicted both-off.
    pub predicted: usize,
    pub recall: f64,
    /// `None` when the model never predicts both hands off.
    pub precision: Option<f64>,
    pub auc_left: Option<f64>,
    pub auc_right: Option<f64>,
}

impl BothOffMetrics {
    pub fn of(params: &ModelParams, test: &Dataset) -> Result<Self> {
        let scores = score(params, test)?;
        let r = EvalReport::from_scores(&scores, &test.labels)?;
        let off = |l: LabelPair| l.class() == JointClass::BothOff;
        let predicted: Vec<bool> = scores.iter().map(|&s| off(predicted_labels(s))).collect();
        let truth: Vec<bool> = test.labels.iter().map(|&l| off(l)).collect();
        let actual = truth.iter().filter(|&&t| t).count();
        if actual == 0 {
            return Err(Error::InsufficientData("test set has no both-off frames".into()));
        }
        let tp = truth.iter().zip(&predicted).filter(|(t, p)| **t && **p).count();
        let n_pred = predicted.iter().filter(|&&p| p).count();
        Ok(Self {
            true_positives: tp,
            actual,
            predicted: n_pred,
            recall: tp as f64 / actual as f64,
            precision: (n_pred > 0).then(|| tp as f64 / n_pred as f64),
            auc_left: r.auc_left,
            auc_right: r.auc_right,
        })
    }
}

/// Recall averaged over rounds, precision pooled over all predictions
/// (so rounds without a single both-off prediction still count).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationSummary {
    pub rounds: usize,
    pub recall_before: f64,
    pub recall_after: f64,
    pub precision_before: Option<f64>,
    pub precision_after: Option<f64>,
}

impl IterationSummary {
    pub fn of(outcomes: &[IterationOutcome]) -> Self {
        let n = outcomes.len().max(1) as f64;
        let pooled = |m: &dyn Fn(&IterationOutcome) -> BothOffMetrics| {
            let tp: usize = outcomes.iter().map(|o| m(o).true_positives).sum();
            let pred: usize = outcomes.iter().map(|o| m(o).predicted).sum();
            (pred > 0).then(|| tp as f64 / pred as f64)
        };
        Self {
            rounds: outcomes.len(),
            recall_before: outcomes.iter().map(|o| o.before.recall).sum::<f64>() / n,
            recall_after: outcomes.iter().map(|o| o.after.recall).sum::<f64>() / n,
            precision_before: pooled(&|o| o.before),
            precision_after: pooled(&|o| o.after),
        }
    }

    pub fn recall_gain(&self) -> f64 {
        self.recall_after - self.recall_before
    }

    /// Precision lost by the round, if both sides are defined.
    pub fn precision_drop(&self) -> Option<f64> {
        Some(self.precision_before? - self.precision_after?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationOutcome {
    pub seed: u64,
    pub errors_reviewed: usize,
    pub plan: IterationPlan,
    pub config_hash_before: String,
    pub config_hash_after: String,
    pub frames_added: usize,
    pub before: BothOffMetrics,
    pub after: BothOffMetrics,
}

/// Stand-in for a reviewer working on the both-off failure mode: errors
/// whose ground truth is both hands off are filed as `both_off`, the rest
/// stay unreviewed.
pub fn scripted_review(e: &ErrorRecord) -> ErrorCategory {
    if e.labels().class() == JointClass::BothOff {
        ErrorCategory::BothOff
    } else {
        ErrorCategory::Unassigned
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationConfig {
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub budget_frames: usize,
}

/// Pretraining and fine-tuning batches per fit. Both fits of a round use
/// the same budget; shorter budgets trade both-off precision for recall.
pub const ITERATION_BATCHES: (usize, usize) = (3000, 1000);

impl Default for IterationConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig {
                max_batches: ITERATION_BATCHES.0,
                finetune_batches: ITERATION_BATCHES.1,
                ..TrainConfig::default()
            },
            model: ModelConfig::default(),
            budget_frames: DEFAULT_BUDGET_FRAMES,
        }
    }
}

/// Pretrain on synthetic frames, then fine-tune with an even mix of
/// synthetic and target-domain frames.
fn fit(init: &ModelParams, pools: &MatrixPools, synth: &Dataset, tc: &TrainConfig) -> Result<ModelParams> {
    let (pre, _) = train(init, synth, &pools.synth_val, tc)?;
    Ok(finetune_mixed(&pre, synth, &pools.real_train, tc)?.0)
}

/// Runs one round for `seed`. Errors are collected on every labeled
/// target-domain frame outside the test split and reviewed with `review`.
pub fn run_iteration(
    pools: &MatrixPools,
    synth_config: &GenerationConfig,
    test: &Dataset,
    cfg: &IterationConfig,
    seed: u64,
    review: impl Fn(&ErrorRecord) -> ErrorCategory,
) -> Result<IterationOutcome> {
    let init = ModelParams::init(cfg.model, seeding::stream_seed(seed, &[seeding::tag("init")]))?;
    let tc = TrainConfig { seed, ..cfg.train };
    let model = fit(&init, pools, &pools.synth_train, &tc)?;
    let before = BothOffMetrics::of(&model, test)?;

    let review_manifest = pools.real_train_manifest.concat(&pools.real_val_manifest)?;
    let review_set = pools.real_train.concat(&pools.real_val)?;
    let errors = collect_errors(&model, &review_set, &review_manifest)?;
    let mut tallies = BTreeMap::new();
    for e in &errors.errors {
        *tallies.entry(review(e)).or_insert(0) += 1;
    }
    let plan = build_iteration_plan(&tallies, synth_config, cfg.budget_frames)?;
    let next = apply_plan(&plan, synth_config)?;
    let added = generate_sequences(&next, synth_config.num_sequences..next.num_sequences)?;
    let grown = pools.synth_train.concat(&Dataset::from_frames(&added, cfg.model.input_size)?)?;
    let improved = fit(&init, pools, &grown, &tc)?;
    Ok(IterationOutcome {
        seed,
        errors_reviewed: errors.errors.len(),
        plan,
        config_hash_before: synth_config.hash(),
        config_hash_after: next.hash(),
        frames_added: added.len(),
        before,
        after: BothOffMetrics::of(&improved, test)?,
    })
}

/// Generates the fixed test set of [`both_off_test_config`].
pub fn both_off_test_set(input_size: usize) -> Result<(Manifest, Dataset)> {
    let frames = generate_frames(&both_off_test_config())?;
    let m = Manifest::new(frames.iter().map(|f| f.record.clone()).collect(), SplitTag::Test, both_off_test_config().hash())?;
    Ok((m, Dataset::from_frames(&frames, input_size)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triage::ConfigDelta;

    fn metrics(tp: usize, actual: usize, predicted: usize) -> BothOffMetrics {
        BothOffMetrics {
            true_positives: tp,
            actual,
            predicted,
            recall: tp as f64 / actual as f64,
            precision: (predicted > 0).then(|| tp as f64 / predicted as f64),
            auc_left: None,
            auc_right: None,
        }
    }

    fn outcome(before: BothOffMetrics, after: BothOffMetrics) -> IterationOutcome {
        IterationOutcome {
            seed: 0,
            errors_reviewed: 0,
            plan: IterationPlan {
                counts: BTreeMap::new(),
                budget_frames: 0,
                frames_per_sequence: 1,
                sequence_budget: 0,
                delta: ConfigDelta::default(),
            },
            config_hash_before: String::new(),
            config_hash_after: String::new(),
            frames_added: 0,
            before,
            after,
        }
    }

    #[test]
    fn summary_pools_precision_and_averages_recall() {
        let runs = [
            outcome(metrics(0, 10, 0), metrics(4, 10, 5)),
            outcome(metrics(6, 10, 6), metrics(8, 10, 10)),
        ];
        let s = IterationSummary::of(&runs);
        assert!((s.recall_before - 0.3).abs() < 1e-15);
        assert!((s.recall_after - 0.6).abs() < 1e-15);
        assert_eq!(s.precision_before, Some(1.0));
        assert_eq!(s.precision_after, Some(12.0 / 15.0));
        assert!((s.precision_drop().unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn undefined_precision_has_no_drop() {
        let s = IterationSummary::of(&[outcome(metrics(2, 10, 2), metrics(0, 10, 0))]);
        assert_eq!(s.precision_after, None);
        assert_eq!(s.precision_drop(), None);
    }

    #[test]
    fn fixed_test_set_is_both_off_rich_and_uses_unseen_drivers() {
        let cfg = both_off_test_config();
        cfg.validate().unwrap();
        for other in [GenerationConfig::desk_synthetic(), GenerationConfig::desk_pseudo_real()] {
            assert!(cfg.driver_set.iter().all(|d| !other.driver_set.contains(d)));
        }
        assert_eq!(cfg.targeted.len() * 3, cfg.num_sequences);
    }
}
