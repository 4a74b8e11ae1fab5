//! Writes the misclassified frames of a briefly trained model as an error
//! manifest with PNG wheel crops, ready for review.
//!
//! `cargo run --release --example export_errors -- [out_dir]`

use std::path::PathBuf;

use handsup::datasets::materialize;
use handsup::nn::{ModelConfig, ModelParams};
use handsup::pipeline::{export_errors, train, Dataset, TrainConfig};
use handsup::scenegen::GenerationConfig;

fn main() -> handsup::Result<()> {
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("handsup-errors"));
    let mut cfg = GenerationConfig::desk_pseudo_real();
    cfg.num_sequences = 8;
    let data = out.join("data");
    let manifest = materialize(&cfg, &data, 0..cfg.num_sequences)?;
    let model = ModelConfig::default();
    let ds = Dataset::from_manifest(&manifest, &data, model.input_size)?;

    let tc = TrainConfig {
        max_batches: 60,
        ..TrainConfig::default()
    };
    let (params, _) = train(&ModelParams::init(model, 1)?, &ds, &ds, &tc)?;
    let errors = export_errors(&params, &ds, &manifest, &data, &out.join("errors/errors.tsv"))?;
    println!("{} of {} frames misclassified", errors.errors.len(), ds.len());
    for e in errors.errors.iter().take(5) {
        println!("{}  truth {}  crop {}", e.frame_id(), e.labels().class().name(), e.crop_path.display());
    }
    Ok(())
}
