mod common;

use common::{frames, hand_surface_distance, rim_distance};
use handsup::labeling::{frame_labels, hand_distance_to_wheel, occlusion_flag, LabelerConfig, DEFAULT_SKIN_RADIUS};
use handsup::render::{coverage_mask, hand_primitives};
use handsup::scenegen::GenerationConfig;
use proptest::prelude::*;

fn sample_frames(n_sequences: usize, seed: u64) -> Vec<(handsup::scenegen::Scenario, handsup::scenegen::FramePose)> {
    let mut cfg = GenerationConfig::desk_synthetic();
    cfg.num_sequences = n_sequences;
    cfg.seed = seed;
    cfg.cross_reach_rate = 0.2;
    frames(&cfg)
}

#[test]
fn rim_oracle_matches_library_distance() {
    for (sc, pose) in sample_frames(4, 11).iter().step_by(7) {
        for hand in &pose.hands {
            for p in hand {
                let lib = handsup::geometry::torus_signed_distance(p, &sc.wheel);
                assert!((lib - rim_distance(p, &sc.wheel)).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn keypoint_distance_tracks_dense_skin_sampling() {
    // About 1e5 skin points per hand: 20 bones of 100 x 40 ring samples plus caps.
    let mut worst: f64 = 0.0;
    for (sc, pose) in sample_frames(6, 5).iter().step_by(15) {
        for hand in &pose.hands {
            let keypoint = hand_distance_to_wheel(hand, &sc.wheel, DEFAULT_SKIN_RADIUS).unwrap();
            let dense = hand_surface_distance(hand, &sc.wheel, DEFAULT_SKIN_RADIUS, f64::INFINITY, 100, 40);
            worst = worst.max((keypoint - dense).abs());
        }
    }
    assert!(worst < 5e-3, "worst gap {worst}");
}

#[test]
fn label_flips_exactly_at_the_distance() {
    for (sc, pose) in sample_frames(3, 9).iter().step_by(11) {
        let d = hand_distance_to_wheel(&pose.hands[0], &sc.wheel, DEFAULT_SKIN_RADIUS).unwrap();
        if d <= 0.0 {
            continue;
        }
        let label = |t: f64| {
            frame_labels(pose, &sc.wheel, &LabelerConfig { on_wheel_threshold: t, skin_radius: DEFAULT_SKIN_RADIUS })
                .unwrap()
                .left_on_wheel
        };
        assert!(!label(d));
        assert!(label(d.next_up()));
        assert!(!label(d.next_down().max(f64::MIN_POSITIVE)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn raising_threshold_never_turns_a_hand_off(seq in 0usize..40, frame in 0usize..30, t1 in 0.001f64..0.2, dt in 0.0f64..0.2) {
        let mut cfg = GenerationConfig::desk_synthetic();
        cfg.num_sequences = 40;
        let sc = handsup::scenegen::sample_scenario(&cfg, seq).unwrap();
        let pose = &handsup::scenegen::animate_sequence(&sc, &cfg)[frame];
        let at = |t: f64| frame_labels(pose, &sc.wheel, &LabelerConfig { on_wheel_threshold: t, skin_radius: DEFAULT_SKIN_RADIUS }).unwrap();
        let (lo, hi) = (at(t1), at(t1 + dt));
        prop_assert!(!lo.left_on_wheel || hi.left_on_wheel);
        prop_assert!(!lo.right_on_wheel || hi.right_on_wheel);
    }
}

#[test]
fn occlusion_flag_agrees_with_rendered_masks() {
    let mut cfg = GenerationConfig::desk_synthetic();
    cfg.num_sequences = 100;
    cfg.seed = 21;
    let all = frames(&cfg);
    let picked: Vec<_> = all.iter().step_by(3).take(1000).collect();
    assert_eq!(picked.len(), 1000);
    let mut agree = 0;
    let mut overlapping = 0;
    for (sc, pose) in &picked {
        let left = coverage_mask(&hand_primitives(sc, &pose.hands[0]), &sc.camera);
        let right = coverage_mask(&hand_primitives(sc, &pose.hands[1]), &sc.camera);
        let overlap = left.iter().zip(&right).any(|(a, b)| *a && *b);
        overlapping += overlap as usize;
        agree += (overlap == occlusion_flag(pose, &sc.camera).unwrap()) as usize;
    }
    println!("occlusion agreement {agree}/1000, rendered overlaps {overlapping}");
    assert!(overlapping > 0);
    assert!(agree >= 950, "agreement {agree}/1000");
}
