//! Driver skeleton: rest pose, forward kinematics and two-bone arm IK.

use nalgebra::{Rotation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{rotation_about, Vec3};
use crate::seeding;

pub const BODY_JOINTS: [&str; 13] = [
    "pelvis",
    "spine",
    "chest",
    "neck",
    "head",
    "left_shoulder",
    "left_elbow",
    "left_wrist",
    "right_shoulder",
    "right_elbow",
    "right_wrist",
    "left_knee",
    "right_knee",
];

pub const HAND_KEYPOINTS: [&str; 21] = [
    "wrist",
    "thumb_cmc",
    "thumb_mcp",
    "thumb_ip",
    "thumb_tip",
    "index_mcp",
    "index_pip",
    "index_dip",
    "index_tip",
    "middle_mcp",
    "middle_pip",
    "middle_dip",
    "middle_tip",
    "ring_mcp",
    "ring_pip",
    "ring_dip",
    "ring_tip",
    "little_mcp",
    "little_pip",
    "little_dip",
    "little_tip",
];

pub const PELVIS: usize = 0;
pub const SPINE: usize = 1;
pub const CHEST: usize = 2;
pub const NECK: usize = 3;
pub const HEAD: usize = 4;
pub const LEFT_KNEE: usize = 11;
pub const RIGHT_KNEE: usize = 12;

/// Parent/child pairs of the body skeleton.
pub const BODY_BONES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (2, 5),
    (5, 6),
    (6, 7),
    (2, 8),
    (8, 9),
    (9, 10),
    (0, 11),
    (0, 12),
];

/// Hand bones as keypoint index pairs: wrist to each finger base, then the
/// three phalanges of every finger.
pub const HAND_BONES: [(usize, usize); 20] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 4),
    (0, 5),
    (5, 6),
    (6, 7),
    (7, 8),
    (0, 9),
    (9, 10),
    (10, 11),
    (11, 12),
    (0, 13),
    (13, 14),
    (14, 15),
    (15, 16),
    (0, 17),
    (17, 18),
    (18, 19),
    (19, 20),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left = 0,
    Right = 1,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    /// +1 for the right side of the body, -1 for the left.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }

    /// Index of the shoulder joint; elbow and wrist follow it.
    pub fn shoulder(self) -> usize {
        5 + 3 * self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmAngles {
    /// Shoulder rotation relative to the chest, as a rotation vector.
    pub shoulder: Vec3,
    /// Elbow flexion; zero is a straight arm.
    pub elbow: f64,
    /// Wrist rotation relative to the forearm, as a rotation vector.
    pub wrist: Vec3,
    /// Flexion per finger (thumb first), applied at each finger joint.
    pub finger_curl: [f64; 5],
}

impl Default for ArmAngles {
    fn default() -> Self {
        Self {
            shoulder: Vec3::zeros(),
            elbow: 0.0,
            wrist: Vec3::zeros(),
            finger_curl: [0.0; 5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointAngles {
    pub spine_pitch: f64,
    pub spine_yaw: f64,
    pub neck_pitch: f64,
    pub neck_yaw: f64,
    /// Indexed by [`Side`].
    pub arms: [ArmAngles; 2],
}

#[derive(Debug, Clone, Copy)]
struct Limit {
    min: f64,
    max: f64,
}

const SPINE_PITCH: Limit = Limit { min: -0.3, max: 0.6 };
const SPINE_YAW: Limit = Limit { min: -0.8, max: 0.8 };
const NECK_PITCH: Limit = Limit { min: -0.5, max: 1.1 };
const NECK_YAW: Limit = Limit { min: -1.4, max: 1.4 };
const SHOULDER: Limit = Limit {
    min: 0.0,
    max: std::f64::consts::PI,
};
const ELBOW: Limit = Limit { min: 0.0, max: 2.7 };
const WRIST: Limit = Limit {
    min: 0.0,
    max: std::f64::consts::PI,
};
const FINGER: Limit = Limit { min: -0.2, max: 1.7 };

fn check(joint: impl Into<String>, value: f64, limit: Limit) -> Result<()> {
    if !value.is_finite() || value < limit.min - 1e-12 || value > limit.max + 1e-12 {
        return Err(Error::JointLimit {
            joint: joint.into(),
            value,
            min: limit.min,
            max: limit.max,
        });
    }
    Ok(())
}

impl JointAngles {
    pub fn validate(&self) -> Result<()> {
        check("spine_pitch", self.spine_pitch, SPINE_PITCH)?;
        check("spine_yaw", self.spine_yaw, SPINE_YAW)?;
        check("neck_pitch", self.neck_pitch, NECK_PITCH)?;
        check("neck_yaw", self.neck_yaw, NECK_YAW)?;
        for side in Side::BOTH {
            let arm = &self.arms[side as usize];
            let name = if side == Side::Left { "left" } else { "right" };
            check(format!("{name}_shoulder"), arm.shoulder.norm(), SHOULDER)?;
            check(format!("{name}_elbow"), arm.elbow, ELBOW)?;
            check(format!("{name}_wrist"), arm.wrist.norm(), WRIST)?;
            for (f, &c) in arm.finger_curl.iter().enumerate() {
                check(format!("{name}_finger{f}"), c, FINGER)?;
            }
        }
        Ok(())
    }
}

/// Local hand geometry in the hand frame: `z` along the fingers, `y` the
/// back of the hand, `x = y × z`. The palm faces `-y`.
#[derive(Debug, Clone, PartialEq)]
struct FingerModel {
    base: Vec3,
    direction: Vec3,
    bend_axis: Vec3,
    lengths: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriverRig {
    pub driver_id: String,
    pub scale: f64,
    pub skin_tone: [u8; 3],
    pub shirt_color: [u8; 3],
    /// Rest-pose body joints, ordered as [`BODY_JOINTS`].
    pub rest_body: [Vec3; 13],
    /// Rest-pose hand keypoints, indexed by [`Side`], ordered as [`HAND_KEYPOINTS`].
    pub rest_hands: [[Vec3; 21]; 2],
    pub upper_arm: f64,
    pub forearm: f64,
    pub torso_radius: f64,
    pub upper_arm_radius: f64,
    pub forearm_radius: f64,
    pub finger_radius: f64,
    pub palm_radius: f64,
    pub head_radius: f64,
    pub thigh_radius: f64,
    fingers: [[FingerModel; 5]; 2],
}

const SKIN_TONES: [[u8; 3]; 10] = [
    [255, 219, 172],
    [241, 194, 125],
    [224, 172, 105],
    [198, 134, 66],
    [141, 85, 36],
    [92, 56, 30],
    [234, 192, 134],
    [255, 205, 148],
    [176, 118, 75],
    [120, 72, 40],
];

const SHIRTS: [[u8; 3]; 8] = [
    [40, 60, 120],
    [160, 30, 40],
    [60, 110, 60],
    [200, 200, 200],
    [30, 30, 30],
    [150, 110, 60],
    [90, 60, 130],
    [210, 150, 40],
];

impl DriverRig {
    /// Builds the rig for a driver identity. Built-in synthetic drivers are
    /// `drv00`..`drv09`; any other id gets hash-derived appearance and build.
    pub fn from_id(driver_id: &str) -> Self {
        let h = seeding::stream_seed(seeding::tag(driver_id), &[0xD1]);
        let builtin = driver_id
            .strip_prefix("drv")
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&n| n < 10);
        let (scale, tone, shirt) = match builtin {
            Some(n) => (0.9 + 0.2 * n as f64 / 9.0, SKIN_TONES[n], SHIRTS[n % SHIRTS.len()]),
            None => {
                let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
                let tone = SKIN_TONES[(h % 10) as usize];
                let shirt = SHIRTS[((h >> 8) % SHIRTS.len() as u64) as usize];
                (0.9 + 0.2 * unit, tone, shirt)
            }
        };
        Self::build(driver_id, scale, tone, shirt)
    }

    fn build(driver_id: &str, s: f64, skin_tone: [u8; 3], shirt_color: [u8; 3]) -> Self {
        let upper_arm = 0.31 * s;
        let forearm = 0.28 * s;
        let pelvis = Vec3::new(0.0, 0.02, 0.0);
        let spine = pelvis + Vec3::new(0.0, 0.22 * s, -0.02 * s);
        let chest = pelvis + Vec3::new(0.0, 0.42 * s, -0.04 * s);
        let neck = pelvis + Vec3::new(0.0, 0.55 * s, -0.04 * s);
        let head = pelvis + Vec3::new(0.0, 0.68 * s, -0.02 * s);
        let mut rest_body = [Vec3::zeros(); 13];
        rest_body[PELVIS] = pelvis;
        rest_body[SPINE] = spine;
        rest_body[CHEST] = chest;
        rest_body[NECK] = neck;
        rest_body[HEAD] = head;
        rest_body[LEFT_KNEE] = pelvis + Vec3::new(-0.11 * s, 0.06, 0.44 * s);
        rest_body[RIGHT_KNEE] = pelvis + Vec3::new(0.11 * s, 0.06, 0.44 * s);
        for side in Side::BOTH {
            let sh = chest + Vec3::new(0.19 * s * side.sign(), 0.09 * s, 0.0);
            rest_body[side.shoulder()] = sh;
            rest_body[side.shoulder() + 1] = sh + Vec3::z() * upper_arm;
            rest_body[side.shoulder() + 2] = sh + Vec3::z() * (upper_arm + forearm);
        }

        let fingers = [Self::finger_models(s, Side::Left), Self::finger_models(s, Side::Right)];
        let mut rig = Self {
            driver_id: driver_id.to_string(),
            scale: s,
            skin_tone,
            shirt_color,
            rest_body,
            rest_hands: [[Vec3::zeros(); 21]; 2],
            upper_arm,
            forearm,
            torso_radius: 0.14 * s,
            upper_arm_radius: 0.045 * s,
            forearm_radius: 0.035 * s,
            finger_radius: 0.0085 * s,
            palm_radius: 0.024 * s,
            head_radius: 0.1 * s,
            thigh_radius: 0.07 * s,
            fingers,
        };
        for side in Side::BOTH {
            let wrist = rig.rest_body[side.shoulder() + 2];
            rig.rest_hands[side as usize] =
                rig.hand_keypoints(side, &wrist, &Rotation3::identity(), &[0.0; 5]);
        }
        rig
    }

    fn finger_models(s: f64, side: Side) -> [FingerModel; 5] {
        // Thumb sits towards the body midline with the palm facing down.
        let m = -side.sign();
        let thumb_dir = Vec3::new(0.55 * m, -0.25, 0.8).normalize();
        let thumb_bend = thumb_dir.cross(&Vec3::y()).normalize() * -m;
        let finger = |x: f64, z: f64, len: f64| FingerModel {
            base: Vec3::new(x * m * s, 0.0, z * s),
            direction: Vec3::z(),
            bend_axis: Vec3::x(),
            lengths: [0.042 * len * s, 0.026 * len * s, 0.02 * len * s],
        };
        [
            FingerModel {
                base: Vec3::new(0.022 * m * s, -0.01 * s, 0.025 * s),
                direction: thumb_dir,
                bend_axis: thumb_bend,
                lengths: [0.04 * s, 0.032 * s, 0.027 * s],
            },
            finger(0.026, 0.085, 0.95),
            finger(0.008, 0.09, 1.05),
            finger(-0.01, 0.086, 1.0),
            finger(-0.027, 0.077, 0.82),
        ]
    }

    /// Hand keypoints for a wrist position and hand orientation (world).
    pub fn hand_keypoints(&self, side: Side, wrist: &Vec3, orientation: &Rotation3<f64>, curl: &[f64; 5]) -> [Vec3; 21] {
        let mut out = [*wrist; 21];
        for (f, model) in self.fingers[side as usize].iter().enumerate() {
            let mut p = model.base;
            out[1 + 4 * f] = wrist + orientation * p;
            let bends = [curl[f], 2.0 * curl[f], 2.8 * curl[f]];
            for k in 0..3 {
                let dir = rotation_about(&model.bend_axis, bends[k]) * model.direction;
                p += dir * model.lengths[k];
                out[2 + 4 * f + k] = wrist + orientation * p;
            }
        }
        out
    }

    pub fn shoulder(&self, side: Side) -> Vec3 {
        self.rest_body[side.shoulder()]
    }

    pub fn bone_lengths(body: &[Vec3; 13], hands: &[[Vec3; 21]; 2]) -> Vec<f64> {
        let mut out: Vec<f64> = BODY_BONES.iter().map(|&(a, b)| (body[a] - body[b]).norm()).collect();
        for hand in hands {
            out.extend(HAND_BONES.iter().map(|&(a, b)| (hand[a] - hand[b]).norm()));
        }
        out
    }
}

/// World keypoints produced by forward kinematics.
#[derive(Debug, Clone, PartialEq)]
pub struct Keypoints {
    pub body: [Vec3; 13],
    pub hands: [[Vec3; 21]; 2],
}

fn spine_rotation(angles: &JointAngles) -> Rotation3<f64> {
    rotation_about(&Vec3::y(), angles.spine_yaw) * rotation_about(&Vec3::x(), angles.spine_pitch)
}

fn from_rotation_vector(v: &Vec3) -> Rotation3<f64> {
    Rotation3::new(*v)
}

pub fn forward_kinematics(rig: &DriverRig, angles: &JointAngles) -> Result<Keypoints> {
    angles.validate()?;
    let rest = &rig.rest_body;
    let pelvis = rest[PELVIS];
    let spine_rot = spine_rotation(angles);
    let mut body = *rest;
    for j in [SPINE, CHEST, NECK, HEAD, 5, 8] {
        body[j] = pelvis + spine_rot * (rest[j] - pelvis);
    }
    let neck_rot = rotation_about(&Vec3::y(), angles.neck_yaw) * rotation_about(&Vec3::x(), angles.neck_pitch);
    body[HEAD] = body[NECK] + spine_rot * neck_rot * (rest[HEAD] - rest[NECK]);

    let mut hands = [[Vec3::zeros(); 21]; 2];
    for side in Side::BOTH {
        let arm = &angles.arms[side as usize];
        let sh = body[side.shoulder()];
        let shoulder_world = spine_rot * from_rotation_vector(&arm.shoulder);
        let elbow = sh + shoulder_world * Vec3::z() * rig.upper_arm;
        let forearm_world = shoulder_world * rotation_about(&Vec3::x(), arm.elbow);
        let wrist = elbow + forearm_world * Vec3::z() * rig.forearm;
        let hand_world = forearm_world * from_rotation_vector(&arm.wrist);
        body[side.shoulder() + 1] = elbow;
        body[side.shoulder() + 2] = wrist;
        hands[side as usize] = rig.hand_keypoints(side, &wrist, &hand_world, &arm.finger_curl);
    }
    Ok(Keypoints { body, hands })
}

/// Solved arm configuration for a requested wrist pose.
#[derive(Debug, Clone, Copy)]
pub struct ArmSolution {
    pub angles: ArmAngles,
    /// Wrist position actually reached (differs from the request when out of reach).
    pub wrist: Vec3,
}

/// Two-bone IK. `pole` biases where the elbow points.
pub fn solve_arm(
    rig: &DriverRig,
    angles: &JointAngles,
    side: Side,
    wrist_target: &Vec3,
    hand_orientation: &UnitQuaternion<f64>,
    pole: &Vec3,
    curl: [f64; 5],
) -> ArmSolution {
    let spine_rot = spine_rotation(angles);
    let pelvis = rig.rest_body[PELVIS];
    let sh = pelvis + spine_rot * (rig.shoulder(side) - pelvis);
    let (l1, l2) = (rig.upper_arm, rig.forearm);
    let delta = wrist_target - sh;
    let dist = delta
        .norm()
        .clamp((l1 - l2).abs() + 1e-3, l1 + l2 - 2e-3);
    let dir = if delta.norm() > 1e-9 { delta.normalize() } else { Vec3::z() };
    let mut perp = pole - dir * pole.dot(&dir);
    if perp.norm() < 1e-9 {
        perp = crate::geometry::any_perpendicular(&dir);
    }
    let perp = perp.normalize();
    let cos_a = ((l1 * l1 + dist * dist - l2 * l2) / (2.0 * l1 * dist)).clamp(-1.0, 1.0);
    let a = cos_a.acos();
    let elbow = sh + (dir * cos_a + perp * a.sin()) * l1;
    let wrist = sh + dir * dist;
    let upper = (elbow - sh) / l1;
    let lower = (wrist - elbow) / l2;
    let flex = upper.dot(&lower).clamp(-1.0, 1.0).acos();
    let hinge = upper.cross(&lower).normalize();
    let shoulder_world = Rotation3::from_basis_unchecked(&[hinge, upper.cross(&hinge), upper]);
    let shoulder_local = spine_rot.inverse() * shoulder_world;
    let forearm_world = shoulder_world * rotation_about(&Vec3::x(), flex);
    let wrist_local = forearm_world.inverse() * hand_orientation.to_rotation_matrix();
    ArmSolution {
        angles: ArmAngles {
            shoulder: shoulder_local.scaled_axis(),
            elbow: flex,
            wrist: wrist_local.scaled_axis(),
            finger_curl: curl,
        },
        wrist,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rig() -> DriverRig {
        DriverRig::from_id("drv03")
    }

    #[test]
    fn zero_angles_give_rest_pose() {
        let r = rig();
        let kp = forward_kinematics(&r, &JointAngles::default()).unwrap();
        assert_eq!(kp.body, r.rest_body);
        assert_eq!(kp.hands, r.rest_hands);
    }

    #[test]
    fn shoulder_rotation_moves_hand_rigidly() {
        let r = rig();
        let mut a = JointAngles::default();
        a.arms[1].shoulder = Vec3::new(0.0, std::f64::consts::FRAC_PI_2, 0.0);
        let kp = forward_kinematics(&r, &a).unwrap();
        let before = &r.rest_hands[1];
        let after = &kp.hands[1];
        for i in 0..21 {
            for j in 0..21 {
                let d0 = (before[i] - before[j]).norm();
                let d1 = (after[i] - after[j]).norm();
                assert!((d0 - d1).abs() < 1e-9);
            }
        }
        assert!((after[0] - before[0]).norm() > 0.1);
    }

    #[test]
    fn joint_limit_reported() {
        let mut a = JointAngles::default();
        a.arms[0].elbow = 3.0;
        let err = forward_kinematics(&rig(), &a).unwrap_err();
        assert!(matches!(err, Error::JointLimit { ref joint, .. } if joint == "left_elbow"));
        let b = JointAngles {
            spine_yaw: -2.0,
            ..JointAngles::default()
        };
        assert!(matches!(forward_kinematics(&rig(), &b), Err(Error::JointLimit { .. })));
    }

    #[test]
    fn ik_reaches_target_and_orientation() {
        let r = rig();
        let base = JointAngles::default();
        let target = r.shoulder(Side::Right) + Vec3::new(-0.1, -0.15, 0.35);
        let q = UnitQuaternion::from_euler_angles(0.3, -0.4, 0.9);
        let sol = solve_arm(&r, &base, Side::Right, &target, &q, &Vec3::new(0.5, -1.0, 0.0), [0.4; 5]);
        assert!((sol.wrist - target).norm() < 1e-9);
        let mut a = base;
        a.arms[1] = sol.angles;
        let kp = forward_kinematics(&r, &a).unwrap();
        assert!((kp.body[10] - target).norm() < 1e-9);
        let expect = r.hand_keypoints(Side::Right, &target, &q.to_rotation_matrix(), &[0.4; 5]);
        for (p, e) in kp.hands[1].iter().zip(expect.iter()) {
            assert!((p - e).norm() < 1e-9);
        }
    }

    #[test]
    fn builtin_and_hashed_drivers_are_stable() {
        assert_eq!(DriverRig::from_id("drv00"), DriverRig::from_id("drv00"));
        let a = DriverRig::from_id("real07");
        assert!(a.scale >= 0.9 && a.scale <= 1.1);
        assert_eq!(a, DriverRig::from_id("real07"));
    }

    proptest! {
        #[test]
        fn random_pose_preserves_bone_lengths(
            sp in -0.3f64..0.6, sy in -0.8f64..0.8, np in -0.5f64..1.1, ny in -1.4f64..1.4,
            s0 in -1.5f64..1.5, s1 in -1.5f64..1.5, s2 in -1.5f64..1.5,
            e in 0.0f64..2.7, w0 in -1.5f64..1.5, w1 in -1.5f64..1.5, curl in -0.2f64..1.7,
        ) {
            let r = rig();
            let mut a = JointAngles { spine_pitch: sp, spine_yaw: sy, neck_pitch: np, neck_yaw: ny, ..Default::default() };
            for side in 0..2 {
                a.arms[side] = ArmAngles {
                    shoulder: Vec3::new(s0, s1, s2) * if side == 0 { 1.0 } else { -0.7 },
                    elbow: e,
                    wrist: Vec3::new(w0, w1, 0.2),
                    finger_curl: [curl; 5],
                };
            }
            let kp = forward_kinematics(&r, &a).unwrap();
            let rest = DriverRig::bone_lengths(&r.rest_body, &r.rest_hands);
            let posed = DriverRig::bone_lengths(&kp.body, &kp.hands);
            for (x, y) in rest.iter().zip(posed.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
