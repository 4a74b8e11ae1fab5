//! Exact 3D primitives shared by scene construction, labeling and cropping.
//!
//! World frame: `x` points to the driver's right, `y` up and `z` forward
//! (towards the windshield). All lengths are meters.

use nalgebra::{Rotation3, Unit, Vector3};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Steering-wheel rim: a ring of major radius `R` around `axis`, tube radius `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Torus {
    pub center: Vec3,
    pub axis: Vec3,
    pub major_radius: f64,
    pub minor_radius: f64,
}

impl Torus {
    pub fn new(center: Vec3, axis: Vec3, major_radius: f64, minor_radius: f64) -> Result<Self> {
        let norm = axis.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::InvalidGeometry("torus axis must be non-zero".into()));
        }
        if !(major_radius > minor_radius && minor_radius > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "torus needs R > r > 0, got R={major_radius} r={minor_radius}"
            )));
        }
        Ok(Self {
            center,
            axis: axis / norm,
            major_radius,
            minor_radius,
        })
    }

    /// Orthonormal in-plane basis `(right, up)`; `up` is the projection of
    /// `up_hint` onto the ring plane.
    pub fn plane_basis(&self, up_hint: Vec3) -> (Vec3, Vec3) {
        let mut up = up_hint - self.axis * up_hint.dot(&self.axis);
        if up.norm() < 1e-9 {
            up = any_perpendicular(&self.axis);
        }
        let up = up.normalize();
        let right = self.axis.cross(&up).normalize();
        (right, up)
    }

    /// Point on the tube's center circle at angle `theta` in the given basis.
    pub fn center_circle_point(&self, basis: (Vec3, Vec3), theta: f64) -> Vec3 {
        self.center + (basis.0 * theta.cos() + basis.1 * theta.sin()) * self.major_radius
    }

    /// Applies a rigid transform `x -> rotation * x + translation`.
    pub fn transformed(&self, rotation: &Rotation3<f64>, translation: &Vec3) -> Self {
        Self {
            center: rotation * self.center + translation,
            axis: rotation * self.axis,
            ..*self
        }
    }
}

/// Signed distance from `p` to the torus surface; negative inside the tube.
pub fn torus_signed_distance(p: &Vec3, t: &Torus) -> f64 {
    let d = p - t.center;
    let along_axis = d.dot(&t.axis);
    let in_plane = (d - t.axis * along_axis).norm();
    let radial = in_plane - t.major_radius;
    (radial * radial + along_axis * along_axis).sqrt() - t.minor_radius
}

/// Unit outward normal of the torus level set through `p`.
pub fn torus_gradient(p: &Vec3, t: &Torus) -> Vec3 {
    let d = p - t.center;
    let along_axis = d.dot(&t.axis);
    let plane_vec = d - t.axis * along_axis;
    let plane_len = plane_vec.norm();
    let radial_dir = if plane_len > 1e-12 {
        plane_vec / plane_len
    } else {
        any_perpendicular(&t.axis)
    };
    let ring_point = t.center + radial_dir * t.major_radius;
    let g = p - ring_point;
    let n = g.norm();
    if n > 1e-12 {
        g / n
    } else {
        t.axis
    }
}

/// Limb or finger solid: all points within `radius` of segment `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    pub fn new(a: Vec3, b: Vec3, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidGeometry(format!("capsule radius {radius} <= 0")));
        }
        if (a - b).norm() == 0.0 {
            return Err(Error::InvalidGeometry("capsule endpoints coincide".into()));
        }
        Ok(Self { a, b, radius })
    }
}

/// Closest point to `p` on segment `[a, b]`.
pub fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * s
}

pub fn segment_distance(p: &Vec3, a: &Vec3, b: &Vec3) -> f64 {
    (p - closest_point_on_segment(p, a, b)).norm()
}

pub fn capsule_signed_distance(p: &Vec3, c: &Capsule) -> f64 {
    segment_distance(p, &c.a, &c.b) - c.radius
}

/// Camera-frame coordinates of a projected point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PinholeCamera {
    pub position: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub focal_length_px: f64,
    pub principal_point: (f64, f64),
    pub image_size: (u32, u32),
}

/// Orthonormal camera axes: image-right, image-down and optical forward.
#[derive(Debug, Clone, Copy)]
pub struct CameraFrame {
    pub right: Vec3,
    pub down: Vec3,
    pub forward: Vec3,
}

impl PinholeCamera {
    /// Camera with the principal point at the image center.
    pub fn centered(position: Vec3, look_at: Vec3, up: Vec3, focal_length_px: f64, size: u32) -> Result<Self> {
        let cam = Self {
            position,
            look_at,
            up,
            focal_length_px,
            principal_point: (size as f64 / 2.0, size as f64 / 2.0),
            image_size: (size, size),
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal_length_px > 0.0) {
            return Err(Error::InvalidGeometry("focal length must be positive".into()));
        }
        if self.image_size.0 < 16 || self.image_size.1 < 16 {
            return Err(Error::InvalidGeometry(format!(
                "image size {:?} below 16x16",
                self.image_size
            )));
        }
        let fwd = self.look_at - self.position;
        if fwd.norm() == 0.0 {
            return Err(Error::InvalidGeometry("look_at equals position".into()));
        }
        if fwd.cross(&self.up).norm() < 1e-12 {
            return Err(Error::InvalidGeometry("up is parallel to the view direction".into()));
        }
        Ok(())
    }

    pub fn frame(&self) -> CameraFrame {
        let forward = (self.look_at - self.position).normalize();
        let right = self.up.cross(&forward).normalize();
        let down = right.cross(&forward);
        CameraFrame {
            right,
            down,
            forward,
        }
    }

    /// Unit ray direction through image coordinates `(u, v)`.
    pub fn ray_direction(&self, frame: &CameraFrame, u: f64, v: f64) -> Vec3 {
        let x = (u - self.principal_point.0) / self.focal_length_px;
        let y = (v - self.principal_point.1) / self.focal_length_px;
        (frame.forward + frame.right * x + frame.down * y).normalize()
    }
}

pub fn project_point(cam: &PinholeCamera, p: &Vec3) -> Result<Projection> {
    project_with_frame(cam, &cam.frame(), p)
}

pub fn project_with_frame(cam: &PinholeCamera, frame: &CameraFrame, p: &Vec3) -> Result<Projection> {
    let d = p - cam.position;
    let depth = d.dot(&frame.forward);
    if depth <= 0.0 {
        return Err(Error::BehindCamera { depth });
    }
    let x = d.dot(&frame.right);
    let y = d.dot(&frame.down);
    Ok(Projection {
        u: cam.principal_point.0 + cam.focal_length_px * x / depth,
        v: cam.principal_point.1 + cam.focal_length_px * y / depth,
        depth,
    })
}

pub fn any_perpendicular(v: &Vec3) -> Vec3 {
    let candidate = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    v.cross(&candidate).normalize()
}

/// Rotation by `angle` about unit `axis`.
pub fn rotation_about(axis: &Vec3, angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle)
}
