//! Geometric hands-on-wheel ground truth and the metadata used for triage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{project_with_frame, torus_signed_distance, PinholeCamera, Torus, Vec3};
use crate::scenegen::FramePose;

pub const DEFAULT_ON_WHEEL_THRESHOLD: f64 = 0.03;
pub const DEFAULT_SKIN_RADIUS: f64 = 0.008;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LabelPair {
    pub left_on_wheel: bool,
    pub right_on_wheel: bool,
}

impl LabelPair {
    pub const fn new(left_on_wheel: bool, right_on_wheel: bool) -> Self {
        Self {
            left_on_wheel,
            right_on_wheel,
        }
    }

    pub fn class(self) -> JointClass {
        match (self.left_on_wheel, self.right_on_wheel) {
            (true, true) => JointClass::BothOn,
            (true, false) => JointClass::LeftOnly,
            (false, true) => JointClass::RightOnly,
            (false, false) => JointClass::BothOff,
        }
    }
}

/// The four joint (left, right) label classes, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum JointClass {
    BothOn = 0,
    LeftOnly = 1,
    RightOnly = 2,
    BothOff = 3,
}

impl JointClass {
    pub const ALL: [JointClass; 4] = [
        JointClass::BothOn,
        JointClass::LeftOnly,
        JointClass::RightOnly,
        JointClass::BothOff,
    ];

    pub fn labels(self) -> LabelPair {
        match self {
            JointClass::BothOn => LabelPair::new(true, true),
            JointClass::LeftOnly => LabelPair::new(true, false),
            JointClass::RightOnly => LabelPair::new(false, true),
            JointClass::BothOff => LabelPair::new(false, false),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            JointClass::BothOn => "on_on",
            JointClass::LeftOnly => "on_off",
            JointClass::RightOnly => "off_on",
            JointClass::BothOff => "off_off",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelerConfig {
    pub on_wheel_threshold: f64,
    pub skin_radius: f64,
}

impl Default for LabelerConfig {
    fn default() -> Self {
        Self {
            on_wheel_threshold: DEFAULT_ON_WHEEL_THRESHOLD,
            skin_radius: DEFAULT_SKIN_RADIUS,
        }
    }
}

impl LabelerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.on_wheel_threshold > 0.0) || !(self.skin_radius >= 0.0) {
            return Err(Error::InvalidConfig(format!("invalid labeler config {self:?}")));
        }
        Ok(())
    }
}

/// Distance from the wheel to the closest point of the hand: min over
/// keypoints of the torus signed distance, less the skin radius.
pub fn hand_distance_to_wheel(keypoints: &[Vec3], wheel: &Torus, skin_radius: f64) -> Result<f64> {
    if keypoints.len() != 21 {
        return Err(Error::WrongKeypointCount(keypoints.len()));
    }
    Ok(keypoints
        .iter()
        .map(|p| torus_signed_distance(p, wheel))
        .fold(f64::INFINITY, f64::min)
        - skin_radius)
}

/// Per-hand distances for a pose, indexed by side.
pub fn hand_distances(pose: &FramePose, wheel: &Torus, skin_radius: f64) -> Result<[f64; 2]> {
    Ok([
        hand_distance_to_wheel(&pose.hands[0], wheel, skin_radius)?,
        hand_distance_to_wheel(&pose.hands[1], wheel, skin_radius)?,
    ])
}

pub fn frame_labels(pose: &FramePose, wheel: &Torus, cfg: &LabelerConfig) -> Result<LabelPair> {
    let [l, r] = hand_distances(pose, wheel, cfg.skin_radius)?;
    Ok(LabelPair::new(l < cfg.on_wheel_threshold, r < cfg.on_wheel_threshold))
}

/// True iff the 2D convex hulls of the two hands' projected keypoints intersect.
pub fn occlusion_flag(pose: &FramePose, cam: &PinholeCamera) -> Result<bool> {
    let frame = cam.frame();
    let project = |hand: &[Vec3; 21]| -> Result<Vec<(f64, f64)>> {
        hand.iter()
            .map(|p| project_with_frame(cam, &frame, p).map(|q| (q.u, q.v)))
            .collect()
    };
    let left = convex_hull(project(&pose.hands[0])?);
    let right = convex_hull(project(&pose.hands[1])?);
    Ok(convex_polygons_intersect(&left, &right))
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain; counter-clockwise, no repeated endpoint.
pub fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).expect("finite projections"));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Separating-axis test for convex polygons (degenerate hulls allowed).
pub fn convex_polygons_intersect(a: &[(f64, f64)], b: &[(f64, f64)]) -> bool {
    if a.is_empty() || b.is_empty() {
        return false;
    }
    let axes = |poly: &[(f64, f64)]| -> Vec<(f64, f64)> {
        let n = poly.len();
        if n == 1 {
            return Vec::new();
        }
        (0..n)
            .map(|i| {
                let p = poly[i];
                let q = poly[(i + 1) % n];
                (-(q.1 - p.1), q.0 - p.0)
            })
            .chain(if n == 2 {
                Some((poly[1].0 - poly[0].0, poly[1].1 - poly[0].1))
            } else {
                None
            })
            .collect()
    };
    let project = |poly: &[(f64, f64)], axis: (f64, f64)| {
        poly.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            let d = p.0 * axis.0 + p.1 * axis.1;
            (lo.min(d), hi.max(d))
        })
    };
    let mut all_axes = axes(a);
    all_axes.extend(axes(b));
    if all_axes.is_empty() {
        return a[0] == b[0];
    }
    all_axes.into_iter().all(|axis| {
        let (a0, a1) = project(a, axis);
        let (b0, b1) = project(b, axis);
        a1 >= b0 && b1 >= a0
    })
}

/// Counts and fractions of the four joint classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelHistogram {
    /// Indexed by [`JointClass`].
    pub counts: [usize; 4],
}

impl LabelHistogram {
    pub fn from_labels(labels: impl IntoIterator<Item = LabelPair>) -> Self {
        let mut counts = [0; 4];
        for l in labels {
            counts[l.class() as usize] += 1;
        }
        Self { counts }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn fractions(&self) -> [f64; 4] {
        let n = self.total().max(1) as f64;
        self.counts.map(|c| c as f64 / n)
    }

    pub fn fraction(&self, class: JointClass) -> f64 {
        self.fractions()[class as usize]
    }
}

pub fn label_distribution(labels: &[LabelPair]) -> Result<LabelHistogram> {
    if labels.is_empty() {
        return Err(Error::EmptyManifest);
    }
    Ok(LabelHistogram::from_labels(labels.iter().copied()))
}
