use crate::geometry::Vec3;

/// Cabin and wheel layout for one vehicle, relative to the driver's seat.
#[derive(Debug, Clone, PartialEq)]
pub struct VehiclePreset {
    pub name: &'static str,
    pub wheel_center: Vec3,
    /// Tilt of the wheel plane away from vertical, radians.
    pub wheel_tilt: f64,
    pub major_radius: f64,
    pub minor_radius: f64,
    pub spokes: u32,
    pub rim_color: [u8; 3],
    pub hub_color: [u8; 3],
    pub seat_color: [u8; 3],
    pub wall_color: [u8; 3],
    pub dash_color: [u8; 3],
    /// Body-facing camera mount, offset from the wheel center.
    pub camera_offset: Vec3,
    /// Point the camera looks at, offset from the wheel center.
    pub camera_target: Vec3,
    /// Focal length in multiples of the image side.
    pub focal_scale: f64,
}

impl VehiclePreset {
    pub fn wheel_axis(&self) -> Vec3 {
        Vec3::new(0.0, self.wheel_tilt.sin(), -self.wheel_tilt.cos())
    }
}

const fn v(x: f64, y: f64, z: f64) -> Vec3 {
    Vec3::new(x, y, z)
}

pub fn vehicle_presets() -> Vec<VehiclePreset> {
    vec![
        VehiclePreset {
            name: "suv_large",
            wheel_center: v(0.0, 0.37, 0.36),
            wheel_tilt: 0.42,
            major_radius: 0.195,
            minor_radius: 0.017,
            spokes: 3,
            rim_color: [35, 35, 38],
            hub_color: [70, 70, 75],
            seat_color: [60, 50, 45],
            wall_color: [150, 140, 125],
            dash_color: [45, 45, 50],
            camera_offset: v(0.42, 0.2, 0.42),
            camera_target: v(-0.02, -0.04, -0.06),
            focal_scale: 0.8,
        },
        VehiclePreset {
            name: "suv_medium",
            wheel_center: v(0.0, 0.36, 0.35),
            wheel_tilt: 0.45,
            major_radius: 0.19,
            minor_radius: 0.016,
            spokes: 3,
            rim_color: [25, 25, 25],
            hub_color: [90, 90, 95],
            seat_color: [30, 30, 32],
            wall_color: [120, 120, 125],
            dash_color: [30, 30, 34],
            camera_offset: v(0.4, 0.18, 0.44),
            camera_target: v(-0.03, -0.03, -0.05),
            focal_scale: 0.82,
        },
        VehiclePreset {
            name: "sedan",
            wheel_center: v(0.0, 0.34, 0.34),
            wheel_tilt: 0.5,
            major_radius: 0.18,
            minor_radius: 0.015,
            spokes: 4,
            rim_color: [50, 40, 35],
            hub_color: [110, 100, 90],
            seat_color: [110, 85, 60],
            wall_color: [175, 165, 150],
            dash_color: [70, 60, 55],
            camera_offset: v(0.38, 0.22, 0.4),
            camera_target: v(-0.02, -0.05, -0.05),
            focal_scale: 0.85,
        },
        // Target-domain pool: never used by the synthetic defaults.
        VehiclePreset {
            name: "minivan",
            wheel_center: v(0.0, 0.38, 0.36),
            wheel_tilt: 0.4,
            major_radius: 0.19,
            minor_radius: 0.018,
            spokes: 3,
            rim_color: [60, 55, 50],
            hub_color: [130, 130, 135],
            seat_color: [90, 95, 105],
            wall_color: [190, 185, 170],
            dash_color: [85, 80, 75],
            camera_offset: v(0.44, 0.17, 0.42),
            camera_target: v(-0.03, -0.04, -0.06),
            focal_scale: 0.8,
        },
        VehiclePreset {
            name: "hatchback",
            wheel_center: v(0.0, 0.35, 0.34),
            wheel_tilt: 0.48,
            major_radius: 0.18,
            minor_radius: 0.016,
            spokes: 3,
            rim_color: [20, 20, 24],
            hub_color: [160, 40, 40],
            seat_color: [45, 55, 70],
            wall_color: [100, 105, 115],
            dash_color: [25, 28, 32],
            camera_offset: v(0.39, 0.21, 0.43),
            camera_target: v(-0.02, -0.04, -0.05),
            focal_scale: 0.84,
        },
        VehiclePreset {
            name: "pickup",
            wheel_center: v(0.0, 0.39, 0.37),
            wheel_tilt: 0.38,
            major_radius: 0.2,
            minor_radius: 0.019,
            spokes: 4,
            rim_color: [70, 50, 35],
            hub_color: [60, 60, 60],
            seat_color: [120, 100, 80],
            wall_color: [140, 125, 100],
            dash_color: [55, 50, 45],
            camera_offset: v(0.45, 0.19, 0.41),
            camera_target: v(-0.03, -0.04, -0.06),
            focal_scale: 0.79,
        },
    ]
}

pub fn vehicle_preset(name: &str) -> Option<VehiclePreset> {
    vehicle_presets().into_iter().find(|p| p.name == name)
}
