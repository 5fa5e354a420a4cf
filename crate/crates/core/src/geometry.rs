//! Fisheye-to-rectilinear projection chain.
//!
//! A pixel of the virtual fisheye image is mapped back to the rectilinear
//! source in four steps:
//!
//! ```text
//! θ        = ‖(x₀, y₀)‖ / f_fish                         equidistant model r = f·θ
//! (x₁, y₁) = z₁ · tan θ · (x₀, y₀) / ‖(x₀, y₀)‖           ray hits the plane z = z₁
//! X₂       = R · X₁ + t                                   rig transform
//! (u, v)   = z₁ · (x₂, y₂) / z₂ + (cols/2, rows/2)        pinhole intrinsics
//! ```
//!
//! `(x₀, y₀)` is the offset from the output center `(width/2, height/2)`.
//! Axes are image aligned: x right, y down, z forward. `R = R_z · R_y · R_x`
//! with angles given in degrees. A positive translation moves the virtual
//! camera visually right / down / forward; a positive `rot_y` turns it right and
//! a positive `rot_x` turns it up.
//!
//! Everything here is double precision and pure.

use nalgebra::{Matrix3, Matrix4, Point2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Guard below π/2 for the incidence angle.
pub const EPS_THETA: f64 = 1e-6;
/// Guard on the camera-space depth, in pixels.
pub const EPS_Z: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisheyeIntrinsics {
    /// Focal length in pixels.
    pub f_fish: f64,
    pub out_width: u32,
    pub out_height: u32,
}

impl FisheyeIntrinsics {
    pub fn new(f_fish: f64, out_width: u32, out_height: u32) -> Result<Self> {
        let intr = Self {
            f_fish,
            out_width,
            out_height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_fish.is_finite() && self.f_fish > 0.0) {
            return Err(Error::Config(format!(
                "fisheye focal length must be positive, got {}",
                self.f_fish
            )));
        }
        if self.out_width == 0 || self.out_height == 0 {
            return Err(Error::Config(format!(
                "output size must be non-zero, got {}x{}",
                self.out_width, self.out_height
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> Point2<f64> {
        Point2::new(self.out_width as f64 / 2.0, self.out_height as f64 / 2.0)
    }

    /// Largest incidence angle over the output raster, reached at pixel (0, 0).
    pub fn max_incidence(&self) -> f64 {
        let c = self.center();
        incidence_angle(c.x, c.y, self.f_fish)
    }
}

/// The rectilinear source camera. `focal` doubles as the world-plane depth z₁.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PinholeIntrinsics {
    pub focal: f64,
    pub cols: u32,
    pub rows: u32,
}

impl PinholeIntrinsics {
    pub fn new(focal: f64, cols: u32, rows: u32) -> Result<Self> {
        let intr = Self { focal, cols, rows };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal.is_finite() && self.focal > 0.0) {
            return Err(Error::Config(format!(
                "pinhole focal length must be positive, got {}",
                self.focal
            )));
        }
        if self.cols == 0 || self.rows == 0 {
            return Err(Error::Config(format!(
                "source size must be non-zero, got {}x{}",
                self.cols, self.rows
            )));
        }
        Ok(())
    }

    pub fn principal_point(&self) -> Point2<f64> {
        Point2::new(self.cols as f64 / 2.0, self.rows as f64 / 2.0)
    }
}

/// Pose of the virtual fisheye rig relative to the source camera.
///
/// Angles are degrees. `t_x` and `t_y` are fractions of the fisheye output
/// width, `t_z` is a fraction of the pinhole focal length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RigPose {
    pub rot_x: f64,
    pub rot_y: f64,
    pub rot_z: f64,
    pub t_x: f64,
    pub t_y: f64,
    pub t_z: f64,
}

impl RigPose {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity()
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.rot_x, self.rot_y, self.rot_z, self.t_x, self.t_y, self.t_z,
        ];
        if all.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Config(format!("pose has non-finite entries: {self:?}")))
        }
    }
}

/// One complete seven-DoF warp configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarpParams {
    pub fisheye: FisheyeIntrinsics,
    pub pinhole: PinholeIntrinsics,
    pub pose: RigPose,
}

impl WarpParams {
    pub fn new(
        fisheye: FisheyeIntrinsics,
        pinhole: PinholeIntrinsics,
        pose: RigPose,
    ) -> Result<Self> {
        let params = Self {
            fisheye,
            pinhole,
            pose,
        };
        params.validate()?;
        Ok(params)
    }

    /// Pure zoom warp: identity pose at focal length `f_fish`.
    pub fn zoom(f_fish: f64, out_size: u32, z1: f64, cols: u32, rows: u32) -> Result<Self> {
        Self::new(
            FisheyeIntrinsics::new(f_fish, out_size, out_size)?,
            PinholeIntrinsics::new(z1, cols, rows)?,
            RigPose::identity(),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.fisheye.validate()?;
        self.pinhole.validate()?;
        self.pose.validate()
    }

    /// Precomputes the rig transform for repeated per-pixel evaluation.
    pub fn compile(&self) -> CompiledWarp {
        CompiledWarp::new(self)
    }
}

/// Incidence angle θ of an offset `(x0, y0)` from the fisheye center.
pub fn incidence_angle(x0: f64, y0: f64, f_fish: f64) -> f64 {
    x0.hypot(y0) / f_fish
}

/// Point on the plane `z = z1` seen along the fisheye ray through offset `(x0, y0)`.
pub fn fisheye_ray(x0: f64, y0: f64, f_fish: f64, z1: f64) -> Result<Vector3<f64>> {
    let radius = x0.hypot(y0);
    let theta = radius / f_fish;
    if theta >= std::f64::consts::FRAC_PI_2 - EPS_THETA {
        return Err(Error::IncidenceOutOfRange { theta });
    }
    if radius == 0.0 {
        return Ok(Vector3::new(0.0, 0.0, z1));
    }
    let scale = z1 * theta.tan() / radius;
    Ok(Vector3::new(x0 * scale, y0 * scale, z1))
}

/// `R = R_z(rot_z) · R_y(rot_y) · R_x(rot_x)`, angles in degrees.
pub fn rotation_from_euler(rot_x: f64, rot_y: f64, rot_z: f64) -> Matrix3<f64> {
    let (sa, ca) = rot_x.to_radians().sin_cos();
    let (sb, cb) = rot_y.to_radians().sin_cos();
    let (sg, cg) = rot_z.to_radians().sin_cos();
    #[rustfmt::skip]
    let rx = Matrix3::new(
        1.0, 0.0, 0.0,
        0.0, ca, -sa,
        0.0, sa, ca,
    );
    #[rustfmt::skip]
    let ry = Matrix3::new(
        cb, 0.0, sb,
        0.0, 1.0, 0.0,
        -sb, 0.0, cb,
    );
    #[rustfmt::skip]
    let rz = Matrix3::new(
        cg, -sg, 0.0,
        sg, cg, 0.0,
        0.0, 0.0, 1.0,
    );
    rz * ry * rx
}

/// Homogeneous world-to-camera transform `[R | t; 0 1]` with `t` in pixels.
pub fn rig_transform(
    pose: &RigPose,
    fisheye: &FisheyeIntrinsics,
    pinhole: &PinholeIntrinsics,
) -> Matrix4<f64> {
    let rotation = rotation_from_euler(pose.rot_x, pose.rot_y, pose.rot_z);
    let translation = translation_pixels(pose, fisheye, pinhole);
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&rotation);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
    m
}

fn translation_pixels(
    pose: &RigPose,
    fisheye: &FisheyeIntrinsics,
    pinhole: &PinholeIntrinsics,
) -> Vector3<f64> {
    let width = fisheye.out_width as f64;
    Vector3::new(pose.t_x * width, pose.t_y * width, pose.t_z * pinhole.focal)
}

/// Projects a camera-space point into the source raster (unbounded).
pub fn pinhole_project(p_cam: &Vector3<f64>, pinhole: &PinholeIntrinsics) -> Result<Point2<f64>> {
    if p_cam.z <= EPS_Z {
        return Err(Error::BehindCamera { z: p_cam.z });
    }
    let pp = pinhole.principal_point();
    Ok(Point2::new(
        pinhole.focal * p_cam.x / p_cam.z + pp.x,
        pinhole.focal * p_cam.y / p_cam.z + pp.y,
    ))
}

/// Source coordinates for output pixel `(col, row)`, or `None` when the ray
/// misses the source raster.
pub fn fisheye_to_source(col: f64, row: f64, params: &WarpParams) -> Option<Point2<f64>> {
    CompiledWarp::new(params).map(col, row)
}

/// Rotates `p` by `angle_deg` about `center` in image coordinates (y down),
/// the same sense in which `R_z` turns the x axis towards the y axis.
pub fn rotate_about_center(p: Point2<f64>, center: Point2<f64>, angle_deg: f64) -> Point2<f64> {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let d = p - center;
    Point2::new(center.x + c * d.x - s * d.y, center.y + s * d.x + c * d.y)
}

/// A [`WarpParams`] with its rotation and translation precomputed.
#[derive(Debug, Clone, Copy)]
pub struct CompiledWarp {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    center: Point2<f64>,
    f_fish: f64,
    pinhole: PinholeIntrinsics,
}

impl CompiledWarp {
    pub fn new(params: &WarpParams) -> Self {
        let pose = &params.pose;
        Self {
            rotation: rotation_from_euler(pose.rot_x, pose.rot_y, pose.rot_z),
            translation: translation_pixels(pose, &params.fisheye, &params.pinhole),
            center: params.fisheye.center(),
            f_fish: params.fisheye.f_fish,
            pinhole: params.pinhole,
        }
    }

    /// Unbounded source projection of output pixel `(col, row)`.
    pub fn project(&self, col: f64, row: f64) -> Result<Point2<f64>> {
        let x0 = col - self.center.x;
        let y0 = row - self.center.y;
        let world = fisheye_ray(x0, y0, self.f_fish, self.pinhole.focal)?;
        let cam = self.rotation * world + self.translation;
        pinhole_project(&cam, &self.pinhole)
    }

    /// Like [`project`](Self::project) but bounded to `[0, cols-1] x [0, rows-1]`.
    pub fn map(&self, col: f64, row: f64) -> Option<Point2<f64>> {
        let p = self.project(col, row).ok()?;
        let max_u = (self.pinhole.cols - 1) as f64;
        let max_v = (self.pinhole.rows - 1) as f64;
        ((0.0..=max_u).contains(&p.x) && (0.0..=max_v).contains(&p.y)).then_some(p)
    }

    /// Inverse of [`project`](Self::project): the output pixel whose ray lands
    /// on source point `(u, v)`. `None` when the source point cannot be reached
    /// from the forward hemisphere of the fisheye rig.
    pub fn unproject(&self, u: f64, v: f64) -> Option<Point2<f64>> {
        let pp = self.pinhole.principal_point();
        let z1 = self.pinhole.focal;
        let dir = Vector3::new((u - pp.x) / z1, (v - pp.y) / z1, 1.0);
        // world = Rᵀ(s·dir − t); pick s so that world.z = z1.
        let rt = self.rotation.transpose();
        let rd = rt * dir;
        let rtt = rt * self.translation;
        if rd.z.abs() < f64::EPSILON {
            return None;
        }
        let s = (z1 + rtt.z) / rd.z;
        if s <= 0.0 {
            return None;
        }
        let world = rd * s - rtt;
        let rho = world.x.hypot(world.y);
        let theta = rho.atan2(z1);
        if rho == 0.0 {
            return Some(self.center);
        }
        let r = self.f_fish * theta;
        Some(Point2::new(
            self.center.x + r * world.x / rho,
            self.center.y + r * world.y / rho,
        ))
    }
}
