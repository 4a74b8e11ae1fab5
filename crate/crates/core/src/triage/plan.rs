use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::ErrorCategory;
use crate::scenegen::{Behavior, GenerationConfig, TargetedSequence};

/// Frames of new data one iteration may add.
pub const DEFAULT_BUDGET_FRAMES: usize = 450;
/// Behavior-weight increase for a category holding every error.
pub const WEIGHT_STEP: f64 = 0.1;
/// Cross-reach rate increase for a category holding every error.
pub const CROSS_REACH_STEP: f64 = 0.2;

/// A run of identical forced sequences appended to the targeted tail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetedBlock {
    pub behavior: Behavior,
    pub cross_reach: bool,
    pub count: usize,
}

/// Changes proposed to a generation config. All fields are increases.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigDelta {
    /// Added to the behavior's weight before renormalizing.
    pub weight_increase: BTreeMap<Behavior, f64>,
    pub targeted: Vec<TargetedBlock>,
    pub cross_reach_increase: f64,
    pub motion_blur_increase: u32,
}

impl ConfigDelta {
    pub fn is_empty(&self) -> bool {
        self.weight_increase.values().all(|&w| w == 0.0)
            && self.targeted.iter().all(|t| t.count == 0)
            && self.cross_reach_increase == 0.0
            && self.motion_blur_increase == 0
    }

    pub fn added_sequences(&self) -> usize {
        self.targeted.iter().map(|t| t.count).sum()
    }

    fn validate(&self) -> Result<()> {
        if self
            .weight_increase
            .values()
            .chain(std::iter::once(&self.cross_reach_increase))
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(Error::InvalidDelta("increases must be finite and non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationPlan {
    /// Reviewed errors per category (unassigned excluded).
    pub counts: BTreeMap<ErrorCategory, usize>,
    pub budget_frames: usize,
    pub frames_per_sequence: usize,
    /// `ceil(budget_frames / frames_per_sequence)`.
    pub sequence_budget: usize,
    pub delta: ConfigDelta,
}

impl IterationPlan {
    pub fn added_frames(&self) -> usize {
        self.delta.added_sequences() * self.frames_per_sequence
    }
}

/// What each reviewed category asks the generator for: a behavior to force
/// and up-weight, and whether those sequences reach across the wheel.
fn remedy(c: ErrorCategory) -> Option<(Behavior, bool)> {
    match c {
        ErrorCategory::BothOff => Some((Behavior::BothHandsOff, false)),
        ErrorCategory::Occlusion => Some((Behavior::Texting, false)),
        ErrorCategory::OppositeSide => Some((Behavior::OneHandedRight, true)),
        ErrorCategory::Blur => Some((Behavior::TurningAround, false)),
        ErrorCategory::Unassigned | ErrorCategory::Other => None,
    }
}

/// Each category's share of the reviewed errors buys that share of the
/// sequence budget (rounded up) plus a proportional weight increase:
///
/// * `both_off`: both-hands-off sequences and weight.
/// * `occlusion`: texting (hand crossing in front of the wheel).
/// * `opposite_side`: cross-reaching one-handed-right sequences and a higher
///   cross-reach rate.
/// * `blur`: turning-around sequences and one more motion-blur frame.
/// * `other`: counted, no remedy.
pub fn build_iteration_plan(
    counts: &BTreeMap<ErrorCategory, usize>,
    base: &GenerationConfig,
    budget_frames: usize,
) -> Result<IterationPlan> {
    let counts: BTreeMap<ErrorCategory, usize> = counts
        .iter()
        .filter(|(c, n)| **c != ErrorCategory::Unassigned && **n > 0)
        .map(|(c, n)| (*c, *n))
        .collect();
    let total: usize = counts.values().sum();
    if total == 0 {
        return Err(Error::NoCategorizedErrors);
    }
    let fps = base.frames_per_sequence();
    let sequence_budget = budget_frames.div_ceil(fps);
    let mut delta = ConfigDelta::default();
    for (&c, &n) in &counts {
        let Some((behavior, cross)) = remedy(c) else { continue };
        // Exact rational ceiling of n / total * budget.
        let seqs = (n * sequence_budget).div_ceil(total);
        let share = n as f64 / total as f64;
        *delta.weight_increase.entry(behavior).or_insert(0.0) += share * WEIGHT_STEP;
        if seqs > 0 {
            delta.targeted.push(TargetedBlock {
                behavior,
                cross_reach: cross,
                count: seqs,
            });
        }
        match c {
            ErrorCategory::OppositeSide => delta.cross_reach_increase += share * CROSS_REACH_STEP,
            ErrorCategory::Blur => delta.motion_blur_increase += 1,
            _ => {}
        }
    }
    Ok(IterationPlan {
        counts,
        budget_frames,
        frames_per_sequence: fps,
        sequence_budget,
        delta,
    })
}

/// A new config with the delta applied; the base is left untouched. Behavior
/// weights are renormalized and the forced sequences join the targeted tail,
/// so every earlier sequence index keeps its content source.
pub fn apply_plan(plan: &IterationPlan, base: &GenerationConfig) -> Result<GenerationConfig> {
    let d = &plan.delta;
    d.validate()?;
    let mut cfg = base.clone();
    if d.is_empty() {
        return Ok(cfg);
    }
    for (&b, &inc) in &d.weight_increase {
        *cfg.behavior_weights.entry(b).or_insert(0.0) += inc;
    }
    let sum: f64 = cfg.behavior_weights.values().sum();
    if !(sum > 0.0) {
        return Err(Error::InvalidDelta("behavior weights vanish".into()));
    }
    cfg.behavior_weights.values_mut().for_each(|w| *w /= sum);
    cfg.cross_reach_rate = (cfg.cross_reach_rate + d.cross_reach_increase).min(1.0);
    cfg.profile.motion_blur_frames += d.motion_blur_increase;
    for t in &d.targeted {
        cfg.targeted.extend(std::iter::repeat_n(
            TargetedSequence {
                behavior: t.behavior,
                cross_reach: t.cross_reach,
            },
            t.count,
        ));
    }
    cfg.num_sequences += d.added_sequences();
    cfg.validate().map_err(|e| Error::InvalidDelta(e.to_string()))?;
    Ok(cfg)
}
