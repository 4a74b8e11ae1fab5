//! Animates one sequence and renders a frame in both domain profiles.
//!
//! `cargo run --example render_frame -- [out_dir] [frame_index]`

use std::path::PathBuf;

use handsup::render::{render_frame, DomainProfile};
use handsup::scenegen::{animate_sequence, sample_scenario, GenerationConfig};

fn main() -> handsup::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("handsup-render"));
    let cfg = GenerationConfig::desk_synthetic();
    let sc = sample_scenario(&cfg, 0)?;
    let poses = animate_sequence(&sc, &cfg);
    let i = args.next().and_then(|s| s.parse().ok()).unwrap_or(0).min(poses.len() - 1);

    println!("sequence {} driver {} behavior {}", sc.sequence_id, sc.driver.driver_id, sc.behavior);
    for (name, profile) in [("synthetic", DomainProfile::synthetic()), ("pseudo_real", DomainProfile::pseudo_real())] {
        let img = render_frame(&sc, &poses[i], &profile);
        let path = out.join(format!("frame{i:03}_{name}.ppm"));
        img.write_ppm(&path)?;
        println!("wrote {}x{} {}", img.width, img.height, path.display());
    }
    Ok(())
}
