//! Scenario sampling along the variance axes (vehicle, driver, behavior,
//! lighting) and keyframed animation into per-frame 3D poses.

mod config;
mod presets;
mod rig;
mod script;

pub use config::{Behavior, GenerationConfig, Lighting, TargetedSequence};
pub(crate) use config::named_enum;
pub use presets::{vehicle_preset, vehicle_presets, VehiclePreset};
pub use rig::{
    forward_kinematics, solve_arm, ArmAngles, ArmSolution, DriverRig, JointAngles, Keypoints, Side, BODY_BONES,
    BODY_JOINTS, HAND_BONES, HAND_KEYPOINTS,
};
pub use script::{HandTarget, ScriptJitter, OFF_WHEEL_CLEARANCE};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{project_point, rotation_about, PinholeCamera, Torus, Vec3};
use crate::seeding;
use script::{build_script, evaluate_tracks, PoseContext};

/// One sampled driving sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sequence_id: String,
    pub index: usize,
    pub driver: DriverRig,
    pub vehicle: VehiclePreset,
    pub wheel: Torus,
    pub camera: PinholeCamera,
    pub lighting: Lighting,
    pub behavior: Behavior,
    pub cross_reach: bool,
    pub seed: u64,
    pub jitter: ScriptJitter,
}

/// World-space keypoints of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FramePose {
    pub frame_index: usize,
    pub time: f64,
    pub body: [Vec3; 13],
    /// Indexed by [`Side`].
    pub hands: [[Vec3; 21]; 2],
    pub wheel_angle: f64,
    pub angles: JointAngles,
}

fn pick_weighted<K: Copy + Ord>(weights: &BTreeMap<K, f64>, u: f64, axis: &'static str) -> Result<K> {
    let total: f64 = weights.values().sum();
    if weights.is_empty() || !(total > 0.0) {
        return Err(Error::EmptyAxis(axis));
    }
    let mut acc = 0.0;
    let mut last = None;
    for (&k, &w) in weights {
        if w <= 0.0 {
            continue;
        }
        acc += w / total;
        last = Some(k);
        if u < acc {
            return Ok(k);
        }
    }
    last.ok_or(Error::EmptyAxis(axis))
}

/// Deterministic in `(cfg.seed, index)`. Drivers are assigned round-robin so
/// every identity appears in a predictable set of sequences.
pub fn sample_scenario(cfg: &GenerationConfig, index: usize) -> Result<Scenario> {
    if index >= cfg.num_sequences {
        return Err(Error::InvalidConfig(format!(
            "sequence index {index} >= num_sequences {}",
            cfg.num_sequences
        )));
    }
    if cfg.driver_set.is_empty() {
        return Err(Error::EmptyAxis("driver"));
    }
    if cfg.vehicle_set.is_empty() {
        return Err(Error::EmptyAxis("vehicle"));
    }
    let mut rng = seeding::stream_rng(cfg.seed, &[index as u64]);
    // Fixed draw order: changing one axis's weights never shifts another axis.
    let u_behavior: f64 = rng.random();
    let u_lighting: f64 = rng.random();
    let u_vehicle: f64 = rng.random();
    let u_cross: f64 = rng.random();
    let mut unit = || rng.random::<f64>();
    let mut sym = move |half: f64| (unit() * 2.0 - 1.0) * half;

    let (behavior, cross_reach) = match cfg.targeted_at(index) {
        Some(t) => (t.behavior, t.cross_reach),
        None => {
            let b = pick_weighted(&cfg.behavior_weights, u_behavior, "behavior")?;
            (b, b == Behavior::OneHandedRight && u_cross < cfg.cross_reach_rate)
        }
    };
    let lighting = pick_weighted(&cfg.lighting_weights, u_lighting, "lighting")?;
    let vehicle_name = &cfg.vehicle_set[((u_vehicle * cfg.vehicle_set.len() as f64) as usize).min(cfg.vehicle_set.len() - 1)];
    let vehicle = vehicle_preset(vehicle_name)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown vehicle preset `{vehicle_name}`")))?;
    let driver = DriverRig::from_id(&cfg.driver_set[index % cfg.driver_set.len()]);

    let wheel = Torus::new(
        vehicle.wheel_center,
        vehicle.wheel_axis(),
        vehicle.major_radius,
        vehicle.minor_radius,
    )?;
    let cam_jitter = Vec3::new(sym(0.02), sym(0.02), sym(0.02));
    let look_jitter = Vec3::new(sym(0.02), sym(0.02), sym(0.02));
    let size = cfg.image_size;
    let camera = PinholeCamera::centered(
        vehicle.wheel_center + vehicle.camera_offset + cam_jitter,
        vehicle.wheel_center + vehicle.camera_target + look_jitter,
        Vec3::y(),
        vehicle.focal_scale * size as f64,
        size,
    )?;

    let deg = PI / 180.0;
    let jitter = ScriptJitter {
        time_scale: 1.0 + sym(0.1),
        grip_theta: [(150.0 + sym(12.0)) * deg, (30.0 + sym(12.0)) * deg],
        cross_theta: (118.0 + sym(8.0)) * deg,
        spatial: [
            Vec3::new(sym(0.02), sym(0.02), sym(0.02)),
            Vec3::new(sym(0.02), sym(0.02), sym(0.02)),
        ],
        contact_gap: [0.004 + sym(0.006), 0.004 + sym(0.006)],
        grip_curl: 0.75 + sym(0.1),
        steer_amplitude: 0.05 + unit_abs(sym(1.0)) * 0.12,
        steer_period: 3.0 + unit_abs(sym(1.0)) * 3.0,
        steer_phase: sym(PI),
    };

    let sc = Scenario {
        sequence_id: cfg.sequence_id(index),
        index,
        driver,
        vehicle,
        wheel,
        camera,
        lighting,
        behavior,
        cross_reach,
        seed: seeding::stream_seed(cfg.seed, &[index as u64, 0x5EED]),
        jitter,
    };
    wheel_outline_in_view(&sc)?;
    Ok(sc)
}

fn unit_abs(x: f64) -> f64 {
    x.abs()
}

/// Outer rim circle sampled at 64 points.
pub fn wheel_outline(wheel: &Torus, samples: usize) -> Vec<Vec3> {
    let basis = wheel.plane_basis(Vec3::y());
    let outer = wheel.major_radius + wheel.minor_radius;
    (0..samples)
        .map(|i| {
            let th = i as f64 * std::f64::consts::TAU / samples as f64;
            wheel.center + (basis.0 * th.cos() + basis.1 * th.sin()) * outer
        })
        .collect()
}

fn wheel_outline_in_view(sc: &Scenario) -> Result<()> {
    let (w, h) = sc.camera.image_size;
    for p in wheel_outline(&sc.wheel, 64) {
        let q = project_point(&sc.camera, &p)?;
        if q.u < 0.0 || q.v < 0.0 || q.u > w as f64 || q.v > h as f64 {
            return Err(Error::InvalidGeometry(format!(
                "wheel leaves the frustum in {}",
                sc.sequence_id
            )));
        }
    }
    Ok(())
}

pub fn steering_angle(j: &ScriptJitter, t: f64) -> f64 {
    j.steer_amplitude * (std::f64::consts::TAU * t / j.steer_period + j.steer_phase).sin()
}

/// Poses for every frame: `sequence_seconds * fps` of them.
pub fn animate_sequence(sc: &Scenario, cfg: &GenerationConfig) -> Vec<FramePose> {
    let n = cfg.frames_per_sequence();
    let duration = cfg.sequence_seconds as f64;
    let script = build_script(sc, duration);
    (0..n)
        .map(|i| {
            let t = i as f64 / cfg.fps as f64;
            pose_at(sc, &script, i, t)
        })
        .collect()
}

fn pose_at(sc: &Scenario, script: &script::Script, frame_index: usize, t: f64) -> FramePose {
    let rig = &sc.driver;
    let (hand_tracks, [spine_pitch, spine_yaw, neck_pitch, neck_yaw]) = evaluate_tracks(script, t);
    let wheel_angle = steering_angle(&sc.jitter, t);
    let mut angles = JointAngles {
        spine_pitch,
        spine_yaw,
        neck_pitch,
        neck_yaw,
        ..Default::default()
    };
    let pelvis = rig.rest_body[rig::PELVIS];
    let spine_rot = rotation_about(&Vec3::y(), spine_yaw) * rotation_about(&Vec3::x(), spine_pitch);
    let shoulders = Side::BOTH.map(|s| pelvis + spine_rot * (rig.shoulder(s) - pelvis));
    let ctx = PoseContext {
        rig,
        wheel: &sc.wheel,
        wheel_basis: sc.wheel.plane_basis(Vec3::y()),
        wheel_angle,
        shoulders,
        camera_position: sc.camera.position,
        jitter: &sc.jitter,
    };
    for side in Side::BOTH {
        let (from, to, s) = hand_tracks[side as usize];
        let hand = ctx.blend(side, from, to, s);
        let pole = spine_rot * Vec3::new(0.6 * side.sign(), -1.0, -0.2);
        let sol = solve_arm(rig, &angles, side, &hand.wrist, &hand.orientation, &pole, [hand.curl; 5]);
        angles.arms[side as usize] = sol.angles;
    }
    let kp = forward_kinematics(rig, &angles).expect("scripted angles stay within joint limits");
    FramePose {
        frame_index,
        time: t,
        body: kp.body,
        hands: kp.hands,
        wheel_angle,
        angles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::{frame_labels, hand_distances, LabelerConfig, DEFAULT_SKIN_RADIUS};

    fn single(behavior: Behavior) -> GenerationConfig {
        let mut cfg = GenerationConfig::desk_synthetic();
        cfg.behavior_weights = [(behavior, 1.0)].into_iter().collect();
        cfg
    }

    #[test]
    fn degenerate_weights_pick_the_only_option() {
        let mut cfg = single(Behavior::Texting);
        cfg.driver_set = vec!["drv04".into()];
        for i in [0, 7, 33] {
            let sc = sample_scenario(&cfg, i).unwrap();
            assert_eq!(sc.behavior, Behavior::Texting);
            assert_eq!(sc.driver.driver_id, "drv04");
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        let cfg = GenerationConfig::desk_synthetic();
        let a = sample_scenario(&cfg, 12).unwrap();
        let b = sample_scenario(&cfg, 12).unwrap();
        assert_eq!(a, b);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
        assert_ne!(a, sample_scenario(&cfg, 13).unwrap());
    }

    #[test]
    fn empty_axes_are_errors() {
        let mut cfg = GenerationConfig::desk_synthetic();
        cfg.driver_set.clear();
        assert!(matches!(sample_scenario(&cfg, 0), Err(Error::EmptyAxis("driver"))));
        let mut cfg = GenerationConfig::desk_synthetic();
        cfg.behavior_weights.clear();
        assert!(matches!(sample_scenario(&cfg, 0), Err(Error::EmptyAxis("behavior"))));
    }

    #[test]
    fn lighting_frequencies_follow_weights() {
        let mut cfg = GenerationConfig::desk_synthetic();
        cfg.num_sequences = 10_000;
        let mut counts = [0usize; 3];
        for i in 0..cfg.num_sequences {
            counts[sample_scenario(&cfg, i).unwrap().lighting as usize] += 1;
        }
        let expected = [0.5, 0.3, 0.2];
        let mut chi2 = 0.0;
        for (c, e) in counts.iter().zip(expected) {
            let f = *c as f64 / cfg.num_sequences as f64;
            assert!((f - e).abs() < 0.02, "{counts:?}");
            let exp = e * cfg.num_sequences as f64;
            chi2 += (*c as f64 - exp).powi(2) / exp;
        }
        // 2 degrees of freedom, p = 0.001
        assert!(chi2 < 13.82, "chi2 {chi2}");
    }

    #[test]
    fn default_sequence_has_150_frames_at_full_length() {
        let cfg = GenerationConfig::desk_synthetic().paper_scale();
        let sc = sample_scenario(&cfg, 0).unwrap();
        assert_eq!(animate_sequence(&sc, &cfg).len(), 150);
        let desk = GenerationConfig::desk_synthetic();
        assert_eq!(animate_sequence(&sample_scenario(&desk, 0).unwrap(), &desk).len(), 30);
    }

    #[test]
    fn two_handed_frames_are_all_on() {
        let cfg = single(Behavior::TwoHanded).paper_scale();
        for i in 0..10 {
            let sc = sample_scenario(&cfg, i).unwrap();
            for pose in animate_sequence(&sc, &cfg) {
                let d = hand_distances(&pose, &sc.wheel, DEFAULT_SKIN_RADIUS).unwrap();
                assert!(d[0] < 0.03 && d[1] < 0.03, "{} frame {} {d:?}", sc.sequence_id, pose.frame_index);
            }
        }
    }

    #[test]
    fn both_hands_off_holds_clear_of_the_wheel() {
        let cfg = single(Behavior::BothHandsOff).paper_scale();
        for i in 0..10 {
            let sc = sample_scenario(&cfg, i).unwrap();
            let poses = animate_sequence(&sc, &cfg);
            let clear = poses
                .iter()
                .filter(|p| {
                    let d = hand_distances(p, &sc.wheel, DEFAULT_SKIN_RADIUS).unwrap();
                    d[0] >= 0.1 && d[1] >= 0.1
                })
                .count();
            assert!(clear >= 90, "{}: {clear} clear frames", sc.sequence_id);
        }
    }

    #[test]
    fn motion_is_bounded() {
        for b in Behavior::ALL {
            let cfg = single(*b).paper_scale();
            for i in 0..4 {
                let sc = sample_scenario(&cfg, i).unwrap();
                let poses = animate_sequence(&sc, &cfg);
                for w in poses.windows(2) {
                    let dt = w[1].time - w[0].time;
                    for side in 0..2 {
                        for k in 0..21 {
                            let v = (w[1].hands[side][k] - w[0].hands[side][k]).norm() / dt;
                            assert!(v < 2.0, "{b} {} frame {}: {v} m/s", sc.sequence_id, w[1].frame_index);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn bone_lengths_are_rigid_across_a_sequence() {
        let cfg = GenerationConfig::desk_synthetic();
        for i in 0..12 {
            let sc = sample_scenario(&cfg, i).unwrap();
            let rest = DriverRig::bone_lengths(&sc.driver.rest_body, &sc.driver.rest_hands);
            for pose in animate_sequence(&sc, &cfg) {
                let now = DriverRig::bone_lengths(&pose.body, &pose.hands);
                for (a, b) in rest.iter().zip(&now) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn cross_reach_puts_right_hand_on_left_side() {
        let mut cfg = single(Behavior::OneHandedRight);
        cfg.cross_reach_rate = 1.0;
        let sc = sample_scenario(&cfg, 3).unwrap();
        assert!(sc.cross_reach);
        let last = animate_sequence(&sc, &cfg).pop().unwrap();
        let labels = frame_labels(&last, &sc.wheel, &LabelerConfig::default()).unwrap();
        assert!(!labels.left_on_wheel && labels.right_on_wheel);
        assert!(last.hands[1][0].x < 0.0);
    }
}
