//! Renders a small synthetic dataset to disk and prints its label mix.
//!
//! `cargo run --example generate_dataset -- [out_dir] [sequences]`

use std::path::PathBuf;

use handsup::datasets::materialize;
use handsup::scenegen::GenerationConfig;

fn main() -> handsup::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("handsup-generate"));
    let mut cfg = GenerationConfig::desk_synthetic();
    cfg.num_sequences = args.next().and_then(|s| s.parse().ok()).unwrap_or(6);

    let manifest = materialize(&cfg, &out, 0..cfg.num_sequences)?;
    manifest.write(&out.join("manifest.tsv"))?;
    cfg.write(&out.join("generation.cfg"))?;

    let h = manifest.histogram();
    println!("{} frames from {} drivers in {}", manifest.len(), manifest.drivers().len(), out.display());
    println!("config hash {}", cfg.hash());
    for (name, f) in ["on_on", "on_off", "off_on", "off_off"].iter().zip(h.fractions()) {
        println!("{name:8} {:5.1}%", f * 100.0);
    }
    Ok(())
}
