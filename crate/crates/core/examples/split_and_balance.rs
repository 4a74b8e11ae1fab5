//! Identity-disjoint splitting, undersampling to the reference label mix,
//! and drawing the small target-domain subsets used for fine-tuning.

use handsup::datasets::{
    balance_undersample, generate_frames, sample_small_real_subset, split_by_identity, Manifest, SplitSpec, SplitTag,
    SYNTHETIC_LABEL_MIX,
};
use handsup::scenegen::GenerationConfig;

fn main() -> handsup::Result<()> {
    let cfg = GenerationConfig::desk_synthetic();
    let frames = generate_frames(&cfg)?;
    let pool = Manifest::new(frames.into_iter().map(|f| f.record).collect(), SplitTag::Unsplit, cfg.hash())?;

    let balanced = balance_undersample(&pool, &SYNTHETIC_LABEL_MIX, 0)?;
    println!("balanced {} -> {} frames, mix {:?}", pool.len(), balanced.len(), balanced.histogram().fractions());

    let (train, val, test) = split_by_identity(&balanced, &SplitSpec::new(0.7, 0.15, 0.15, 1)?)?;
    for (name, m) in [("train", &train), ("val", &val), ("test", &test)] {
        println!("{name:5} {:4} frames, drivers {:?}", m.len(), m.drivers());
    }

    let real_cfg = GenerationConfig::desk_pseudo_real();
    let real_frames = generate_frames(&real_cfg)?;
    let real = Manifest::new(real_frames.into_iter().map(|f| f.record).collect(), SplitTag::Unsplit, real_cfg.hash())?;
    for per_sequence in [5, 10, 15, 20] {
        let sub = sample_small_real_subset(&real, 5, per_sequence, 7)?;
        println!("subset of {per_sequence:2} per sequence: {} frames", sub.len());
    }
    Ok(())
}
