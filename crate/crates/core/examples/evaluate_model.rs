//! Scores a model on a target-domain split: AUC per hand, precision and
//! recall at the decision threshold, and the exact rank statistic.
//!
//! `cargo run --release --example evaluate_model -- [checkpoint_path]`

use handsup::datasets::generate_frames;
use handsup::nn::{load_checkpoint, ModelConfig, ModelParams};
use handsup::pipeline::{precision_recall, roc_auc, score, Dataset, DECISION_THRESHOLD};
use handsup::scenegen::GenerationConfig;

fn main() -> handsup::Result<()> {
    let params = match std::env::args().nth(1) {
        Some(path) => load_checkpoint(path.as_ref())?,
        None => ModelParams::init(ModelConfig::default(), 0)?,
    };
    let mut cfg = GenerationConfig::desk_pseudo_real();
    cfg.num_sequences = 16;
    let test = Dataset::from_frames(&generate_frames(&cfg)?, params.config.input_size)?;
    let scores = score(&params, &test)?;

    for (h, hand) in ["left", "right"].iter().enumerate() {
        let s: Vec<f64> = scores.iter().map(|p| p[h]).collect();
        let on: Vec<bool> = test.labels.iter().map(|l| [l.left_on_wheel, l.right_on_wheel][h]).collect();
        let pr = precision_recall(&s, &on, DECISION_THRESHOLD)?;
        match roc_auc(&s, &on) {
            Ok(auc) => println!("{hand:5} auc {auc:.4} precision {:?} recall {:.3}", pr.precision, pr.recall),
            Err(e) => println!("{hand:5} auc undefined ({e}); recall {:.3}", pr.recall),
        }
    }
    Ok(())
}
