//! Keyframed behavior scripts. Each hand follows a timeline of targets that
//! are blended with a smoothstep; rim targets are settled against the same
//! distance function the labeler uses, so scripted contact is exact.

use nalgebra::{Rotation3, UnitQuaternion};

use super::config::Behavior;
use super::rig::{DriverRig, Side};
use super::Scenario;
use crate::geometry::{torus_gradient, torus_signed_distance, Torus, Vec3};
use crate::labeling::{hand_distance_to_wheel, DEFAULT_SKIN_RADIUS};

/// Hand distances the scripts aim for.
pub const OFF_WHEEL_CLEARANCE: f64 = 0.10;
const PHONE_CLEARANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HandTarget {
    /// Gripping the rim at angle `theta` (wheel frame, 0 = 3 o'clock).
    Rim { theta: f64 },
    Lap,
    Phone,
    SeatBack,
    Raised,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Key<T> {
    start: f64,
    duration: f64,
    target: T,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Track<T> {
    initial: T,
    keys: Vec<Key<T>>,
}

impl<T: Copy> Track<T> {
    fn hold(initial: T) -> Self {
        Self {
            initial,
            keys: Vec::new(),
        }
    }

    fn then(mut self, start: f64, duration: f64, target: T) -> Self {
        self.keys.push(Key {
            start,
            duration,
            target,
        });
        self
    }

    /// `(from, to, blend)` at time `t`; `blend` is already smoothstepped.
    fn at(&self, t: f64) -> (T, T, f64) {
        let mut state = self.initial;
        for k in &self.keys {
            if t >= k.start + k.duration {
                state = k.target;
            } else if t > k.start {
                return (state, k.target, smoothstep((t - k.start) / k.duration));
            } else {
                break;
            }
        }
        (state, state, 0.0)
    }
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn scalar(track: &Track<f64>, t: f64) -> f64 {
    let (a, b, s) = track.at(t);
    a + (b - a) * s
}

/// Per-scenario randomization of a behavior script.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScriptJitter {
    /// Multiplies every keyframe time (±10%).
    pub time_scale: f64,
    /// Rim grip angles, indexed by side.
    pub grip_theta: [f64; 2],
    /// Rim angle for a cross-reaching right hand.
    pub cross_theta: f64,
    /// Offset added to off-wheel targets (±2 cm), indexed by side.
    pub spatial: [Vec3; 2],
    /// Desired hand distance while gripping, indexed by side.
    pub contact_gap: [f64; 2],
    pub grip_curl: f64,
    pub steer_amplitude: f64,
    pub steer_period: f64,
    pub steer_phase: f64,
}

pub(crate) struct Script {
    pub hands: [Track<HandTarget>; 2],
    pub spine_pitch: Track<f64>,
    pub spine_yaw: Track<f64>,
    pub neck_pitch: Track<f64>,
    pub neck_yaw: Track<f64>,
}

pub(crate) fn build_script(sc: &Scenario, duration: f64) -> Script {
    let j = &sc.jitter;
    let at = |frac: f64| frac * duration * j.time_scale;
    let tr = (0.15 * duration * j.time_scale).clamp(0.4, 1.5);
    let rim_l = HandTarget::Rim { theta: j.grip_theta[0] };
    let rim_r = HandTarget::Rim { theta: j.grip_theta[1] };
    let mut s = Script {
        hands: [Track::hold(rim_l), Track::hold(rim_r)],
        spine_pitch: Track::hold(0.0),
        spine_yaw: Track::hold(0.0),
        neck_pitch: Track::hold(0.0),
        neck_yaw: Track::hold(0.0),
    };
    match sc.behavior {
        Behavior::TwoHanded => {}
        Behavior::OneHandedLeft => {
            s.hands[1] = Track::hold(rim_r).then(at(0.1), tr, HandTarget::Lap);
        }
        Behavior::OneHandedRight if sc.cross_reach => {
            s.hands[0] = Track::hold(rim_l).then(at(0.05), tr, HandTarget::Lap);
            s.hands[1] = Track::hold(rim_r).then(at(0.1), tr, HandTarget::Rim { theta: j.cross_theta });
        }
        Behavior::OneHandedRight => {
            s.hands[0] = Track::hold(rim_l).then(at(0.1), tr, HandTarget::Lap);
        }
        Behavior::Texting => {
            let reach = (0.15 * duration * j.time_scale).clamp(0.4, 2.0);
            s.hands[1] = Track::hold(rim_r).then(at(0.12), reach, HandTarget::Phone);
            s.spine_pitch = Track::hold(0.0).then(at(0.12), reach, 0.2);
            s.spine_yaw = Track::hold(0.0).then(at(0.12), reach, -0.25);
        }
        Behavior::TurningAround => {
            s.hands[1] = Track::hold(rim_r)
                .then(at(0.15), tr, HandTarget::SeatBack)
                .then(at(0.72), tr, rim_r);
            s.spine_yaw = Track::hold(0.0).then(at(0.15), tr, 0.3).then(at(0.72), tr, 0.0);
            s.neck_yaw = Track::hold(0.0).then(at(0.15), tr, 1.1).then(at(0.72), tr, 0.0);
        }
        Behavior::FallingAsleep => {
            let slide = HandTarget::Rim {
                theta: j.grip_theta[0] + 0.9,
            };
            s.hands[0] = Track::hold(rim_l)
                .then(at(0.3), at(0.3), slide)
                .then(at(0.78), tr, HandTarget::Lap);
            s.hands[1] = Track::hold(rim_r).then(at(0.25), tr, HandTarget::Lap);
            s.neck_pitch = Track::hold(0.0).then(at(0.1), at(0.5), 0.9);
            s.spine_pitch = Track::hold(0.0).then(at(0.1), at(0.5), 0.2);
        }
        Behavior::BothHandsOff => {
            s.hands[0] = Track::hold(rim_l).then(at(0.04), tr, HandTarget::Raised);
            s.hands[1] = Track::hold(rim_r).then(at(0.05), tr, HandTarget::Raised);
        }
    }
    s
}

/// A fully specified hand placement before IK.
#[derive(Debug, Clone, Copy)]
pub(crate) struct HandPose {
    pub wrist: Vec3,
    pub orientation: UnitQuaternion<f64>,
    pub curl: f64,
}

pub(crate) struct PoseContext<'a> {
    pub rig: &'a DriverRig,
    pub wheel: &'a Torus,
    pub wheel_basis: (Vec3, Vec3),
    pub wheel_angle: f64,
    pub shoulders: [Vec3; 2],
    pub camera_position: Vec3,
    pub jitter: &'a ScriptJitter,
}

impl PoseContext<'_> {
    fn frame_from(z: Vec3, y_hint: Vec3) -> UnitQuaternion<f64> {
        let z = z.normalize();
        let y = (y_hint - z * y_hint.dot(&z)).normalize();
        let x = y.cross(&z);
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_basis_unchecked(&[x, y, z]))
    }

    fn hand_points(&self, side: Side, pose: &HandPose) -> [Vec3; 21] {
        self.rig
            .hand_keypoints(side, &pose.wrist, &pose.orientation.to_rotation_matrix(), &[pose.curl; 5])
    }

    fn distance(&self, side: Side, pose: &HandPose) -> (f64, Vec3) {
        let pts = self.hand_points(side, pose);
        let d = hand_distance_to_wheel(&pts, self.wheel, DEFAULT_SKIN_RADIUS).expect("21 keypoints");
        let closest = pts
            .iter()
            .min_by(|a, b| {
                torus_signed_distance(a, self.wheel)
                    .partial_cmp(&torus_signed_distance(b, self.wheel))
                    .expect("finite")
            })
            .expect("non-empty");
        (d, torus_gradient(closest, self.wheel))
    }

    /// Slides the wrist along the wheel normal until the hand distance equals `goal`.
    fn settle_contact(&self, side: Side, mut pose: HandPose, goal: f64) -> HandPose {
        for _ in 0..12 {
            let (d, normal) = self.distance(side, &pose);
            if (d - goal).abs() < 1e-5 {
                break;
            }
            pose.wrist -= normal * (d - goal);
        }
        pose
    }

    /// Pulls the wrist back inside the arm's reach.
    fn within_reach(&self, side: Side, mut pose: HandPose) -> HandPose {
        let sh = self.shoulders[side as usize];
        let reach = 0.97 * (self.rig.upper_arm + self.rig.forearm);
        let d = pose.wrist - sh;
        if d.norm() > reach {
            pose.wrist = sh + d.normalize() * reach;
        }
        pose
    }

    fn settle_clearance(&self, side: Side, pose: HandPose, min: f64) -> HandPose {
        let mut pose = self.within_reach(side, pose);
        for _ in 0..12 {
            let (d, normal) = self.distance(side, &pose);
            if d >= min {
                break;
            }
            pose.wrist += normal * (min - d + 1e-3);
        }
        pose
    }

    /// Like [`Self::settle_clearance`] but only moves along `dir`.
    fn settle_along(&self, side: Side, mut pose: HandPose, dir: Vec3, min: f64) -> HandPose {
        for _ in 0..24 {
            let (d, _) = self.distance(side, &pose);
            if d >= min {
                break;
            }
            pose.wrist += dir * (min - d + 1e-3);
        }
        self.settle_clearance(side, pose, min)
    }

    pub fn resolve(&self, side: Side, target: HandTarget) -> HandPose {
        let sign = side.sign();
        let s = self.rig.scale;
        let sh = self.shoulders[side as usize];
        let jitter = self.jitter.spatial[side as usize];
        match target {
            HandTarget::Rim { theta } => {
                let theta = theta + self.wheel_angle;
                let (u, v) = self.wheel_basis;
                let radial = u * theta.cos() + v * theta.sin();
                let w = self.wheel.axis;
                let rim = self.wheel.center + radial * self.wheel.major_radius;
                let pose = HandPose {
                    wrist: rim - radial * (0.075 * s) + w * (self.wheel.minor_radius + 0.02),
                    orientation: Self::frame_from(radial - w * 0.2, w),
                    curl: self.jitter.grip_curl,
                };
                self.settle_contact(side, pose, self.jitter.contact_gap[side as usize])
            }
            HandTarget::Lap => {
                let pose = HandPose {
                    wrist: sh + Vec3::new(-0.05 * sign, -0.38, 0.24) * s + jitter,
                    orientation: Self::frame_from(Vec3::new(0.15 * -sign, -0.35, 1.0), Vec3::y()),
                    curl: 0.25,
                };
                self.settle_clearance(side, pose, OFF_WHEEL_CLEARANCE)
            }
            HandTarget::SeatBack => {
                let pose = HandPose {
                    wrist: sh + Vec3::new(0.3 * sign, 0.05, -0.12) * s + jitter,
                    orientation: Self::frame_from(Vec3::new(0.5 * sign, 0.0, -1.0), Vec3::y()),
                    curl: 0.6,
                };
                self.settle_clearance(side, pose, OFF_WHEEL_CLEARANCE)
            }
            HandTarget::Raised => {
                let pose = HandPose {
                    wrist: self.wheel.center + Vec3::new(0.12 * sign, 0.17, -0.2) + jitter,
                    orientation: Self::frame_from(Vec3::new(0.1 * sign, 1.0, 0.3), Vec3::new(0.0, 0.0, -1.0)),
                    curl: 0.15,
                };
                self.settle_clearance(side, pose, OFF_WHEEL_CLEARANCE)
            }
            HandTarget::Phone => {
                // On the camera ray through the opposite wrist, in front of it.
                let other = Side::BOTH[1 - side as usize];
                let grip = self.resolve(other, HandTarget::Rim {
                    theta: self.jitter.grip_theta[other as usize],
                });
                let to_cam = (self.camera_position - grip.wrist).normalize();
                let pose = HandPose {
                    wrist: grip.wrist + to_cam * 0.07 + jitter * 0.3,
                    orientation: Self::frame_from(Vec3::new(-0.3 * sign, 1.0, 0.2), -to_cam),
                    curl: 0.5,
                };
                self.settle_along(side, pose, to_cam, PHONE_CLEARANCE)
            }
        }
    }

    pub fn blend(&self, side: Side, from: HandTarget, to: HandTarget, s: f64) -> HandPose {
        if s <= 0.0 {
            return self.resolve(side, from);
        }
        if s >= 1.0 {
            return self.resolve(side, to);
        }
        if let (HandTarget::Rim { theta: a }, HandTarget::Rim { theta: b }) = (from, to) {
            return self.resolve(side, HandTarget::Rim { theta: a + (b - a) * s });
        }
        let a = self.resolve(side, from);
        let b = self.resolve(side, to);
        HandPose {
            wrist: a.wrist + (b.wrist - a.wrist) * s,
            orientation: a.orientation.slerp(&b.orientation, s),
            curl: a.curl + (b.curl - a.curl) * s,
        }
    }
}

pub(crate) fn evaluate_tracks(script: &Script, t: f64) -> ([(HandTarget, HandTarget, f64); 2], [f64; 4]) {
    (
        [script.hands[0].at(t), script.hands[1].at(t)],
        [
            scalar(&script.spine_pitch, t),
            scalar(&script.spine_yaw, t),
            scalar(&script.neck_pitch, t),
            scalar(&script.neck_yaw, t),
        ],
    )
}
