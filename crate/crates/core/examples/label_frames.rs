//! Per-hand wheel distances and on/off labels along one sequence, and how
//! the label mix of a whole pool moves with the threshold.

use handsup::datasets::{generate_frames, Manifest, SplitTag};
use handsup::labeling::{frame_labels, hand_distances, LabelerConfig, DEFAULT_SKIN_RADIUS};
use handsup::scenegen::{animate_sequence, sample_scenario, GenerationConfig};

fn main() -> handsup::Result<()> {
    let mut cfg = GenerationConfig::desk_synthetic();
    let labeler = LabelerConfig::default();
    let sc = sample_scenario(&cfg, 3)?;
    println!("{} ({})", sc.sequence_id, sc.behavior);
    for (i, pose) in animate_sequence(&sc, &cfg).iter().enumerate().step_by(5) {
        let [l, r] = hand_distances(pose, &sc.wheel, DEFAULT_SKIN_RADIUS)?;
        let labels = frame_labels(pose, &sc.wheel, &labeler)?;
        println!("frame {i:3}  left {:+.3} m  right {:+.3} m  {}", l, r, labels.class().name());
    }

    cfg.num_sequences = 12;
    let frames = generate_frames(&cfg)?;
    let m = Manifest::new(frames.into_iter().map(|f| f.record).collect(), SplitTag::Unsplit, cfg.hash())?;
    for threshold in [0.01, 0.03, 0.06] {
        let f = m.relabeled(threshold)?.histogram().fractions();
        println!("threshold {threshold:.2} m: on_on {:.3} on_off {:.3} off_on {:.3} off_off {:.3}", f[0], f[1], f[2], f[3]);
    }
    Ok(())
}
