//! Software raycaster for cabin scenes, the two domain profiles, and the
//! wheel-centered crop fed to the classifier.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{
    closest_point_on_segment, project_with_frame, torus_gradient, torus_signed_distance, CameraFrame, Capsule,
    PinholeCamera, Torus, Vec3,
};
use crate::scenegen::{wheel_outline, FramePose, Lighting, Scenario, Side};
use crate::seeding;

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        let pixels = color.iter().copied().cycle().take(3 * (width * height) as usize).collect();
        Self { width, height, pixels }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != 3 * (width as usize) * (height as usize) {
            return Err(Error::ShapeMismatch(format!(
                "{} bytes for a {width}x{height} RGB image",
                pixels.len()
            )));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y * self.width + x) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn mean_abs_diff(&self, other: &Image) -> Result<f64> {
        if (self.width, self.height) != (other.width, other.height) {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        let sum: u64 = self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| a.abs_diff(*b) as u64)
            .sum();
        Ok(sum as f64 / self.pixels.len() as f64)
    }

    pub fn write_ppm_to(&self, mut w: impl Write) -> std::io::Result<()> {
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)
    }

    pub fn write_ppm(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_ppm_to(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }

    pub fn read_ppm(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(f);
        let mut header = Vec::new();
        // Magic, width, height, maxval: four whitespace separated tokens.
        while header.len() < 4 {
            let mut line = String::new();
            if r.read_line(&mut line).map_err(|e| Error::io(path, e))? == 0 {
                return Err(Error::parse(path, 1, "truncated PPM header"));
            }
            let line = line.split('#').next().unwrap_or("");
            header.extend(line.split_whitespace().map(str::to_string));
        }
        if header[0] != "P6" || header[3] != "255" || header.len() != 4 {
            return Err(Error::parse(path, 1, "expected a binary P6 PPM with maxval 255"));
        }
        let dim = |s: &str| s.parse::<u32>().map_err(|_| Error::parse(path, 1, "bad PPM dimensions"));
        let (width, height) = (dim(&header[1])?, dim(&header[2])?);
        let mut pixels = vec![0u8; 3 * (width as usize) * (height as usize)];
        r.read_exact(&mut pixels).map_err(|e| Error::io(path, e))?;
        Ok(Self { width, height, pixels })
    }

    pub fn to_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, self.width, self.height);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc
            .write_header()
            .map_err(|e| Error::InvalidConfig(format!("png encode: {e}")))?;
        w.write_image_data(&self.pixels)
            .map_err(|e| Error::InvalidConfig(format!("png encode: {e}")))?;
        w.finish().map_err(|e| Error::InvalidConfig(format!("png encode: {e}")))?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DomainKind {
    Synthetic,
    PseudoReal,
}

impl DomainKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DomainKind::Synthetic => "synthetic",
            DomainKind::PseudoReal => "pseudo_real",
        }
    }
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DomainKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "synthetic" => Ok(DomainKind::Synthetic),
            "pseudo_real" => Ok(DomainKind::PseudoReal),
            other => Err(format!("unknown domain profile `{other}`")),
        }
    }
}

/// Post-processing applied to clean renders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainProfile {
    pub kind: DomainKind,
    /// Gaussian blur sigma in pixels.
    pub blur_sigma: f64,
    /// Additive noise std in 8-bit counts.
    pub noise_std: f64,
    /// Per-channel multiplicative gain; `[1, 1, 1]` is neutral.
    pub color_gain: [f64; 3],
    pub vignette_strength: f64,
    /// Number of previous frames averaged into each frame.
    pub motion_blur_frames: u32,
}

impl DomainProfile {
    pub fn synthetic() -> Self {
        Self {
            kind: DomainKind::Synthetic,
            blur_sigma: 0.0,
            noise_std: 0.0,
            color_gain: [1.0; 3],
            vignette_strength: 0.0,
            motion_blur_frames: 0,
        }
    }

    pub fn pseudo_real() -> Self {
        Self {
            kind: DomainKind::PseudoReal,
            blur_sigma: 0.9,
            noise_std: 7.0,
            color_gain: [0.88, 0.97, 1.1],
            vignette_strength: 0.45,
            motion_blur_frames: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.blur_sigma, self.noise_std, self.vignette_strength];
        if all.iter().chain(&self.color_gain).any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidConfig(format!("domain profile parameters must be >= 0: {self:?}")));
        }
        Ok(())
    }
}

/// Ambient plus one directional light, and the color of empty space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LightingPreset {
    pub background: [f64; 3],
    pub ambient: f64,
    pub diffuse: f64,
    /// Direction the light travels towards the scene, normalized on use.
    pub direction: Vec3,
    pub tint: [f64; 3],
}

pub fn lighting_preset(l: Lighting) -> LightingPreset {
    match l {
        Lighting::Daylight => LightingPreset {
            background: [190.0, 205.0, 220.0],
            ambient: 0.45,
            diffuse: 0.65,
            direction: Vec3::new(-0.3, -0.8, -0.5),
            tint: [1.0, 1.0, 1.0],
        },
        Lighting::Evening => LightingPreset {
            background: [150.0, 105.0, 80.0],
            ambient: 0.35,
            diffuse: 0.55,
            direction: Vec3::new(0.8, -0.3, -0.5),
            tint: [1.1, 0.85, 0.65],
        },
        Lighting::Night => LightingPreset {
            background: [25.0, 28.0, 40.0],
            ambient: 0.2,
            diffuse: 0.5,
            direction: Vec3::new(-0.4, -0.3, -0.85),
            tint: [0.75, 0.85, 1.1],
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Capsule(Capsule),
    Box { min: Vec3, max: Vec3 },
    Torus(Torus),
}

impl Shape {
    fn bounding_sphere(&self) -> (Vec3, f64) {
        match *self {
            Shape::Sphere { center, radius } => (center, radius),
            Shape::Capsule(c) => ((c.a + c.b) / 2.0, (c.b - c.a).norm() / 2.0 + c.radius),
            Shape::Box { min, max } => ((min + max) / 2.0, (max - min).norm() / 2.0),
            Shape::Torus(t) => (t.center, t.major_radius + t.minor_radius),
        }
    }

    /// Nearest hit distance along the unit ray, with the surface normal.
    fn intersect(&self, ro: &Vec3, rd: &Vec3) -> Option<(f64, Vec3)> {
        match *self {
            Shape::Sphere { center, radius } => {
                let t = ray_sphere(ro, rd, &center, radius)?;
                Some((t, (ro + rd * t - center) / radius))
            }
            Shape::Capsule(c) => {
                let t = ray_capsule(ro, rd, &c)?;
                let p = ro + rd * t;
                let q = closest_point_on_segment(&p, &c.a, &c.b);
                Some((t, (p - q) / c.radius))
            }
            Shape::Box { min, max } => ray_box(ro, rd, &min, &max),
            Shape::Torus(t) => {
                let hit = ray_torus(ro, rd, &t)?;
                Some((hit, torus_gradient(&(ro + rd * hit), &t)))
            }
        }
    }
}

fn ray_sphere(ro: &Vec3, rd: &Vec3, c: &Vec3, r: f64) -> Option<f64> {
    let oc = ro - c;
    let b = oc.dot(rd);
    let h = b * b - (oc.norm_squared() - r * r);
    if h < 0.0 {
        return None;
    }
    let t = -b - h.sqrt();
    (t > 0.0).then_some(t)
}

fn ray_capsule(ro: &Vec3, rd: &Vec3, cap: &Capsule) -> Option<f64> {
    let ba = cap.b - cap.a;
    let oa = ro - cap.a;
    let baba = ba.dot(&ba);
    let bard = ba.dot(rd);
    let baoa = ba.dot(&oa);
    let a = baba - bard * bard;
    if a > 1e-12 {
        let b = baba * rd.dot(&oa) - baoa * bard;
        let c = baba * oa.dot(&oa) - baoa * baoa - cap.radius * cap.radius * baba;
        let h = b * b - a * c;
        if h < 0.0 {
            return None;
        }
        let t = (-b - h.sqrt()) / a;
        let y = baoa + t * bard;
        if y > 0.0 && y < baba {
            return (t > 0.0).then_some(t);
        }
        let end = if y <= 0.0 { cap.a } else { cap.b };
        return ray_sphere(ro, rd, &end, cap.radius);
    }
    // Ray parallel to the axis: only the end caps can be hit first.
    let ta = ray_sphere(ro, rd, &cap.a, cap.radius);
    let tb = ray_sphere(ro, rd, &cap.b, cap.radius);
    match (ta, tb) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    }
}

fn ray_box(ro: &Vec3, rd: &Vec3, min: &Vec3, max: &Vec3) -> Option<(f64, Vec3)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut normal = Vec3::zeros();
    for i in 0..3 {
        if rd[i].abs() < 1e-15 {
            if ro[i] < min[i] || ro[i] > max[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / rd[i];
        let (mut t0, mut t1) = ((min[i] - ro[i]) * inv, (max[i] - ro[i]) * inv);
        let mut sign = -1.0;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
            sign = 1.0;
        }
        if t0 > t_near {
            t_near = t0;
            normal = Vec3::zeros();
            normal[i] = sign;
        }
        t_far = t_far.min(t1);
    }
    (t_near <= t_far && t_near > 0.0).then_some((t_near, normal))
}

/// Sphere tracing restricted to the slab around the ring plane.
fn ray_torus(ro: &Vec3, rd: &Vec3, t: &Torus) -> Option<f64> {
    let outer = t.major_radius + t.minor_radius;
    let oc = ro - t.center;
    let b = oc.dot(rd);
    let h = b * b - (oc.norm_squared() - outer * outer);
    if h < 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (-b - h.sqrt(), -b + h.sqrt());
    let along = oc.dot(&t.axis);
    let speed = rd.dot(&t.axis);
    if speed.abs() > 1e-12 {
        let a = (-t.minor_radius - along) / speed;
        let c = (t.minor_radius - along) / speed;
        lo = lo.max(a.min(c));
        hi = hi.min(a.max(c));
    } else if along.abs() > t.minor_radius {
        return None;
    }
    let mut s = lo.max(0.0);
    for _ in 0..96 {
        if s > hi {
            return None;
        }
        let d = torus_signed_distance(&(ro + rd * s), t);
        if d < 1e-5 {
            return Some(s);
        }
        s += d;
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scene {
    pub primitives: Vec<Primitive>,
}

fn rgb(c: [u8; 3]) -> [f64; 3] {
    c.map(f64::from)
}

fn capsule(a: Vec3, b: Vec3, r: f64, color: [f64; 3]) -> Primitive {
    Primitive {
        shape: Shape::Capsule(Capsule { a, b, radius: r }),
        color,
    }
}

/// Palm and finger solids for one hand.
pub fn hand_primitives(sc: &Scenario, hand: &[Vec3; 21]) -> Vec<Primitive> {
    let rig = &sc.driver;
    let skin = rgb(rig.skin_tone);
    let mut out = Vec::with_capacity(24);
    for base in [1usize, 5, 9, 13, 17] {
        out.push(capsule(hand[0], hand[base], rig.palm_radius, skin));
    }
    out.push(capsule(hand[5], hand[17], rig.palm_radius * 0.8, skin));
    for f in 0..5 {
        for k in 0..3 {
            let a = hand[1 + 4 * f + k];
            let b = hand[2 + 4 * f + k];
            out.push(capsule(a, b, rig.finger_radius, skin));
        }
    }
    out
}

/// Cabin, wheel and driver solids for one frame.
pub fn build_scene(sc: &Scenario, pose: &FramePose) -> Scene {
    let v = &sc.vehicle;
    let rig = &sc.driver;
    let s = rig.scale;
    let mut p = Vec::new();
    let w = &sc.wheel;

    p.push(Primitive {
        shape: Shape::Box {
            min: Vec3::new(-0.3, -0.05, -0.32),
            max: Vec3::new(0.3, 0.95, -0.16),
        },
        color: rgb(v.seat_color),
    });
    p.push(Primitive {
        shape: Shape::Box {
            min: Vec3::new(-0.3, -0.2, -0.3),
            max: Vec3::new(0.3, -0.06, 0.35),
        },
        color: rgb(v.seat_color),
    });
    p.push(Primitive {
        shape: Shape::Box {
            min: Vec3::new(-0.9, w.center.y - 0.35, w.center.z + 0.14),
            max: Vec3::new(0.9, w.center.y + 0.05, w.center.z + 0.6),
        },
        color: rgb(v.dash_color),
    });
    p.push(Primitive {
        shape: Shape::Box {
            min: Vec3::new(-0.75, -0.3, -0.6),
            max: Vec3::new(-0.6, 1.2, 1.0),
        },
        color: rgb(v.wall_color),
    });

    p.push(Primitive {
        shape: Shape::Torus(*w),
        color: rgb(v.rim_color),
    });
    let hub = w.center + w.axis * 0.02;
    p.push(Primitive {
        shape: Shape::Sphere {
            center: hub,
            radius: 0.045,
        },
        color: rgb(v.hub_color),
    });
    let (u, up) = w.plane_basis(Vec3::y());
    for k in 0..v.spokes {
        let th = -std::f64::consts::FRAC_PI_2 + std::f64::consts::TAU * k as f64 / v.spokes as f64 + pose.wheel_angle;
        let end = w.center + (u * th.cos() + up * th.sin()) * w.major_radius;
        p.push(capsule(hub, end, w.minor_radius * 0.7, rgb(v.hub_color)));
    }

    let b = &pose.body;
    let shirt = rgb(rig.shirt_color);
    let skin = rgb(rig.skin_tone);
    let pants = [40.0, 45.0, 70.0];
    p.push(capsule(b[0] + Vec3::y() * 0.1 * s, b[3] - Vec3::y() * 0.05 * s, rig.torso_radius, shirt));
    p.push(capsule(b[3], b[4], 0.045 * s, skin));
    p.push(Primitive {
        shape: Shape::Sphere {
            center: b[4],
            radius: rig.head_radius,
        },
        color: skin,
    });
    for side in Side::BOTH {
        let sh = side.shoulder();
        p.push(capsule(b[sh], b[sh + 1], rig.upper_arm_radius, shirt));
        p.push(capsule(b[sh + 1], b[sh + 2], rig.forearm_radius, skin));
        let hip = b[0] + Vec3::x() * 0.1 * s * side.sign();
        let knee = b[if side == Side::Left { 11 } else { 12 }];
        p.push(capsule(hip, knee, rig.thigh_radius, pants));
        p.extend(hand_primitives(sc, &pose.hands[side as usize]));
    }
    Scene { primitives: p }
}

/// Screen-space bounds of each primitive, `None` when it may straddle the
/// image plane and must always be tested.
fn screen_bounds(cam: &PinholeCamera, frame: &CameraFrame, prim: &Primitive) -> Option<[f64; 4]> {
    let (c, r) = prim.shape.bounding_sphere();
    let mut bounds = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for corner in 0..8 {
        let dx = if corner & 1 == 0 { -r } else { r };
        let dy = if corner & 2 == 0 { -r } else { r };
        let dz = if corner & 4 == 0 { -r } else { r };
        let q = c + frame.right * dx + frame.down * dy + frame.forward * dz;
        let pr = project_with_frame(cam, frame, &q).ok()?;
        if pr.depth < 1e-3 {
            return None;
        }
        bounds = [bounds[0].min(pr.u), bounds[1].min(pr.v), bounds[2].max(pr.u), bounds[3].max(pr.v)];
    }
    Some(bounds)
}

/// Supersampling grid per pixel axis.
const SAMPLES: u32 = 2;

fn trace(
    prims: &[Primitive],
    bounds: &[Option<[f64; 4]>],
    ro: &Vec3,
    rd: &Vec3,
    u: f64,
    v: f64,
) -> Option<(usize, Vec3)> {
    let mut best: Option<(f64, usize, Vec3)> = None;
    for (i, prim) in prims.iter().enumerate() {
        if let Some(b) = bounds[i] {
            if u < b[0] || u > b[2] || v < b[1] || v > b[3] {
                continue;
            }
        }
        if let Some((t, n)) = prim.shape.intersect(ro, rd) {
            if best.is_none_or(|(bt, _, _)| t < bt) {
                best = Some((t, i, n));
            }
        }
    }
    best.map(|(_, i, n)| (i, n))
}

/// Raycasts a scene with flat diffuse shading; nearest surface wins.
pub fn render_scene(scene: &Scene, cam: &PinholeCamera, lighting: &LightingPreset) -> Image {
    let frame = cam.frame();
    let (w, h) = cam.image_size;
    let bounds: Vec<_> = scene.primitives.iter().map(|p| screen_bounds(cam, &frame, p)).collect();
    let light = -lighting.direction.normalize();
    let mut pixels = vec![0u8; 3 * (w * h) as usize];
    let n = (SAMPLES * SAMPLES) as f64;
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0; 3];
            for sy in 0..SAMPLES {
                for sx in 0..SAMPLES {
                    let u = x as f64 + (sx as f64 + 0.5) / SAMPLES as f64;
                    let v = y as f64 + (sy as f64 + 0.5) / SAMPLES as f64;
                    let rd = cam.ray_direction(&frame, u, v);
                    let color = match trace(&scene.primitives, &bounds, &cam.position, &rd, u, v) {
                        None => lighting.background,
                        Some((i, normal)) => {
                            let n = if normal.dot(&rd) > 0.0 { -normal } else { normal };
                            let shade = lighting.ambient + lighting.diffuse * n.dot(&light).max(0.0);
                            let c = scene.primitives[i].color;
                            [0, 1, 2].map(|k| c[k] * shade * lighting.tint[k])
                        }
                    };
                    for k in 0..3 {
                        acc[k] += color[k];
                    }
                }
            }
            let i = 3 * (y * w + x) as usize;
            for k in 0..3 {
                pixels[i + k] = (acc[k] / n).round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Image {
        width: w,
        height: h,
        pixels,
    }
}

/// Binary coverage mask of a primitive set (center sample per pixel).
pub fn coverage_mask(prims: &[Primitive], cam: &PinholeCamera) -> Vec<bool> {
    let frame = cam.frame();
    let (w, h) = cam.image_size;
    let bounds: Vec<_> = prims.iter().map(|p| screen_bounds(cam, &frame, p)).collect();
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = (x as f64 + 0.5, y as f64 + 0.5);
            let rd = cam.ray_direction(&frame, u, v);
            out.push(trace(prims, &bounds, &cam.position, &rd, u, v).is_some());
        }
    }
    out
}

fn clean_frame(sc: &Scenario, pose: &FramePose) -> Image {
    render_scene(&build_scene(sc, pose), &sc.camera, &lighting_preset(sc.lighting))
}

fn noise_seed(sc: &Scenario, frame_index: usize) -> u64 {
    seeding::stream_seed(sc.seed, &[frame_index as u64])
}

/// One frame without temporal effects; [`render_sequence`] adds motion blur.
pub fn render_frame(sc: &Scenario, pose: &FramePose, profile: &DomainProfile) -> Image {
    apply_domain_profile(&clean_frame(sc, pose), profile, noise_seed(sc, pose.frame_index))
}

/// Renders all frames in parallel. Motion blur averages each clean frame with
/// up to `motion_blur_frames` predecessors before the profile is applied.
pub fn render_sequence(sc: &Scenario, poses: &[FramePose], profile: &DomainProfile) -> Vec<Image> {
    let clean: Vec<Image> = poses.par_iter().map(|p| clean_frame(sc, p)).collect();
    let k = profile.motion_blur_frames as usize;
    (0..poses.len())
        .into_par_iter()
        .map(|i| {
            let img = if k == 0 || i == 0 {
                clean[i].clone()
            } else {
                average(&clean[i.saturating_sub(k)..=i])
            };
            apply_domain_profile(&img, profile, noise_seed(sc, poses[i].frame_index))
        })
        .collect()
}

fn average(frames: &[Image]) -> Image {
    let n = frames.len() as f64;
    let first = &frames[0];
    let pixels = (0..first.pixels.len())
        .map(|i| (frames.iter().map(|f| f.pixels[i] as f64).sum::<f64>() / n).round() as u8)
        .collect();
    Image {
        width: first.width,
        height: first.height,
        pixels,
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|x| x / sum).collect()
}

/// Separable Gaussian blur of a planar float buffer (`channels` interleaved),
/// with edge clamping.
pub fn gaussian_blur(data: &[f64], width: usize, height: usize, channels: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return data.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut dst = vec![0.0; src.len()];
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    let mut acc = 0.0;
                    for (j, w) in k.iter().enumerate() {
                        let o = j as i64 - r;
                        let (sx, sy) = if horizontal {
                            ((x as i64 + o).clamp(0, width as i64 - 1) as usize, y)
                        } else {
                            (x, (y as i64 + o).clamp(0, height as i64 - 1) as usize)
                        };
                        acc += w * src[(sy * width + sx) * channels + c];
                    }
                    dst[(y * width + x) * channels + c] = acc;
                }
            }
        }
        dst
    };
    pass(&pass(data, true), false)
}

/// Blur, additive noise (clamped), channel gains and vignette, in that order.
pub fn apply_domain_profile(img: &Image, profile: &DomainProfile, stream_seed: u64) -> Image {
    let (w, h) = (img.width as usize, img.height as usize);
    let mut buf: Vec<f64> = img.pixels.iter().map(|&p| p as f64).collect();
    buf = gaussian_blur(&buf, w, h, 3, profile.blur_sigma);
    if profile.noise_std > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed);
        let normal = Normal::new(0.0, profile.noise_std).expect("validated std");
        for v in &mut buf {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 255.0);
        }
    }
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    let r2max = cx * cx + cy * cy;
    for y in 0..h {
        for x in 0..w {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let vig = 1.0 - profile.vignette_strength * (dx * dx + dy * dy) / r2max;
            for c in 0..3 {
                let v = &mut buf[(y * w + x) * 3 + c];
                *v *= profile.color_gain[c] * vig.max(0.0);
            }
        }
    }
    Image {
        width: img.width,
        height: img.height,
        pixels: buf.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CropRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

pub const DEFAULT_CROP_MARGIN: f64 = 0.15;

/// Square box around the projected outer rim, padded by `margin` per side.
pub fn compute_wheel_crop(cam: &PinholeCamera, wheel: &Torus, margin: f64) -> Result<CropRect> {
    let frame = cam.frame();
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for p in wheel_outline(wheel, 64) {
        let q = project_with_frame(cam, &frame, &p)?;
        b = [b[0].min(q.u), b[1].min(q.v), b[2].max(q.u), b[3].max(q.v)];
    }
    let (iw, ih) = (cam.image_size.0 as f64, cam.image_size.1 as f64);
    let (bw, bh) = (b[2] - b[0], b[3] - b[1]);
    let mut x0 = (b[0] - margin * bw).floor().max(0.0);
    let mut y0 = (b[1] - margin * bh).floor().max(0.0);
    let x1 = (b[2] + margin * bw).ceil().min(iw);
    let y1 = (b[3] + margin * bh).ceil().min(ih);
    let side = (x1 - x0).max(y1 - y0).max(16.0).min(iw.min(ih));
    // Grow the shorter side around its center, then shift back inside.
    x0 = ((x0 + x1) / 2.0 - side / 2.0).floor().clamp(0.0, iw - side);
    y0 = ((y0 + y1) / 2.0 - side / 2.0).floor().clamp(0.0, ih - side);
    Ok(CropRect {
        x: x0 as u32,
        y: y0 as u32,
        w: side as u32,
        h: side as u32,
    })
}

/// Bilinear resample of `rect` to `out_size` × `out_size`, sampling at pixel centers.
pub fn crop_and_resize(img: &Image, rect: CropRect, out_size: u32) -> Result<Image> {
    if rect.w == 0 || rect.h == 0 || rect.x + rect.w > img.width || rect.y + rect.h > img.height || out_size == 0 {
        return Err(Error::RectOutOfBounds {
            x: rect.x,
            y: rect.y,
            w: rect.w,
            h: rect.h,
            width: img.width,
            height: img.height,
        });
    }
    let mut pixels = Vec::with_capacity(3 * (out_size * out_size) as usize);
    let sx = rect.w as f64 / out_size as f64;
    let sy = rect.h as f64 / out_size as f64;
    let sample_axis = |o: u32, scale: f64, start: u32, len: u32| {
        let f = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
        let i0 = f.floor() as u32;
        let i1 = (i0 + 1).min(len - 1);
        (start + i0, start + i1, f - i0 as f64)
    };
    for oy in 0..out_size {
        let (y0, y1, fy) = sample_axis(oy, sy, rect.y, rect.h);
        for ox in 0..out_size {
            let (x0, x1, fx) = sample_axis(ox, sx, rect.x, rect.w);
            let (a, b, c, d) = (img.pixel(x0, y0), img.pixel(x1, y0), img.pixel(x0, y1), img.pixel(x1, y1));
            for k in 0..3 {
                let top = a[k] as f64 * (1.0 - fx) + b[k] as f64 * fx;
                let bottom = c[k] as f64 * (1.0 - fx) + d[k] as f64 * fx;
                pixels.push((top * (1.0 - fy) + bottom * fy).round() as u8);
            }
        }
    }
    Ok(Image {
        width: out_size,
        height: out_size,
        pixels,
    })
}
