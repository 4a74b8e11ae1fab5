//! One data-centric round aimed at the rare both-hands-off class: train,
//! review the target-domain errors, grow the synthetic pool by the planned
//! 450 frames, retrain, and compare on a fixed both-off-rich test set.
//!
//! `cargo run --release --example iterate_both_off -- [seed]`

use handsup::datasets::generate_frames;
use handsup::experiment::MatrixPools;
use handsup::iteration::{both_off_test_set, run_iteration, scripted_review, IterationConfig};
use handsup::scenegen::GenerationConfig;

fn main() -> handsup::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let synth = GenerationConfig::desk_synthetic();
    let cfg = IterationConfig::default();
    let pools = MatrixPools::from_frames(
        &generate_frames(&synth)?,
        &generate_frames(&GenerationConfig::desk_pseudo_real())?,
        cfg.model.input_size,
        0,
    )?;
    let (_, test) = both_off_test_set(cfg.model.input_size)?;

    let o = run_iteration(&pools, &synth, &test, &cfg, seed, scripted_review)?;
    println!("reviewed {} errors, plan {:?}", o.errors_reviewed, o.plan.counts);
    println!("config {} -> {}, +{} frames", o.config_hash_before, o.config_hash_after, o.frames_added);
    for (name, m) in [("before", o.before), ("after", o.after)] {
        println!(
            "{name:6} both-off recall {:.3} ({}/{}) precision {:?}",
            m.recall, m.true_positives, m.actual, m.precision
        );
    }
    Ok(())
}
