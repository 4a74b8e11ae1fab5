//! The domain-gap matrix: synthetic only, target-domain subsets alone, and
//! synthetic pretraining fine-tuned with each subset, over a few seeds.
//!
//! `cargo run --release --example experiment_matrix -- [repetitions] [out_dir]`

use std::path::PathBuf;

use handsup::datasets::generate_frames;
use handsup::experiment::{run_experiment_matrix, ExperimentMatrixConfig, MatrixPools};
use handsup::scenegen::GenerationConfig;

fn main() -> handsup::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("handsup-matrix"));
    let cfg = ExperimentMatrixConfig {
        repetitions: reps,
        seeds: (0..reps as u64).collect(),
        ..ExperimentMatrixConfig::default()
    };
    let pools = MatrixPools::from_frames(
        &generate_frames(&GenerationConfig::desk_synthetic())?,
        &generate_frames(&GenerationConfig::desk_pseudo_real())?,
        cfg.model.input_size,
        0,
    )?;
    let result = run_experiment_matrix(&cfg, &pools)?;
    print!("{}", result.summary_text());
    result.write(&out)?;
    println!("runs and summary written to {}", out.display());
    Ok(())
}
