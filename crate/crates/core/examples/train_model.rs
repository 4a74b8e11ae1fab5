//! Pretrains on synthetic frames, fine-tunes with an even synthetic/target
//! mix, evaluates per-hand AUC and saves a checkpoint.
//!
//! `cargo run --release --example train_model -- [checkpoint_path]`

use std::path::PathBuf;

use handsup::datasets::generate_frames;
use handsup::experiment::MatrixPools;
use handsup::nn::{save_checkpoint, ModelConfig, ModelParams};
use handsup::pipeline::{evaluate, finetune_mixed, train, TrainConfig};
use handsup::scenegen::GenerationConfig;

fn main() -> handsup::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("handsup-model.ckpt"));
    let model = ModelConfig::default();
    let synth = generate_frames(&GenerationConfig::desk_synthetic())?;
    let real = generate_frames(&GenerationConfig::desk_pseudo_real())?;
    let pools = MatrixPools::from_frames(&synth, &real, model.input_size, 0)?;

    let cfg = TrainConfig::default();
    let init = ModelParams::init(model, 0)?;
    println!("{} parameters", init.parameter_count());
    let (pretrained, history) = train(&init, &pools.synth_train, &pools.synth_val, &cfg)?;
    print!("{}", history.to_text());
    println!("synthetic only: {:?}", evaluate(&pretrained, &pools.real_test)?.mean_auc());

    let (tuned, audit) = finetune_mixed(&pretrained, &pools.synth_train, &pools.real_train, &cfg)?;
    println!("{} fine-tune batches of {}+{}", audit.len(), audit[0].synthetic, audit[0].real);
    print!("{}", evaluate(&tuned, &pools.real_test)?.to_text());
    save_checkpoint(&tuned, &out)?;
    println!("saved {}", out.display());
    Ok(())
}
