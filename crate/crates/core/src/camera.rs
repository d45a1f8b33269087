//! Orbit camera: presets, object focus, relative orbit/move, and projection.
//!
//! The camera sits at `target + distance * dir(azimuth, elevation)` where
//! `dir(0, 0)` points to -Y. Azimuth grows toward +X, so an azimuth of 90
//! places the camera on the +X side.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::Aabb;
use crate::math::{normalize_degrees, Vec3};
use crate::scene::Scene;

pub const DEFAULT_FOV_DEG: f64 = 50.0;
pub const MIN_ELEVATION: f64 = -89.0;
pub const MAX_ELEVATION: f64 = 89.0;
/// Closest a forward move may bring the camera to its target.
pub const MIN_DISTANCE: f64 = 0.05;
/// Lower bound on preset framing distance before zoom is applied.
pub const MIN_FRAMING_DISTANCE: f64 = 0.5;
/// Radius multiplier for FocusOn, to show the target's surroundings.
pub const FOCUS_PADDING: f64 = 1.5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CameraError {
    #[error("zoom must be positive and finite, got {0}")]
    BadZoom(f64),
    #[error("no object named {0:?}")]
    UnknownObject(String),
    #[error("bad view {0:?}; expected Top, Front, Side or Iso")]
    BadView(String),
    #[error("bad direction {0:?}; expected Forward, Backward, Left, Right, Up or Down")]
    BadDirection(String),
    #[error("move distance must be non-negative and finite, got {0}")]
    BadDistance(f64),
    #[error("point is at or behind the camera")]
    BehindCamera,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum View {
    Top,
    Front,
    Side,
    Iso,
}

impl View {
    /// `(azimuth, elevation)` in degrees.
    pub fn angles(self) -> (f64, f64) {
        match self {
            View::Front => (0.0, 15.0),
            View::Side => (90.0, 15.0),
            View::Top => (0.0, 90.0),
            View::Iso => (45.0, 30.0),
        }
    }
}

impl FromStr for View {
    type Err = CameraError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "top" => Ok(View::Top),
            "front" => Ok(View::Front),
            "side" => Ok(View::Side),
            "iso" => Ok(View::Iso),
            _ => Err(CameraError::BadView(s.to_string())),
        }
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Backward,
    Left,
    Right,
    Up,
    Down,
}

impl FromStr for Direction {
    type Err = CameraError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "left" => Ok(Direction::Left),
            "right" => Ok(Direction::Right),
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            _ => Err(CameraError::BadDirection(s.to_string())),
        }
    }
}

/// Camera-space axes plus eye position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraBasis {
    pub eye: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    /// Viewing direction, eye toward target.
    pub forward: Vec3,
}

/// A projected point: pixel coordinates (origin top-left) and view depth in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub x: f64,
    pub y: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraState {
    pub target: Vec3,
    pub azimuth: f64,
    pub elevation: f64,
    pub distance: f64,
    /// Vertical field of view in degrees.
    pub fov: f64,
}

impl Default for CameraState {
    fn default() -> Self {
        let (azimuth, elevation) = View::Iso.angles();
        Self {
            target: Vec3::ZERO,
            azimuth,
            elevation,
            distance: 1.0 / (DEFAULT_FOV_DEG / 2.0).to_radians().tan(),
            fov: DEFAULT_FOV_DEG,
        }
    }
}

impl CameraState {
    fn preset(view: View, target: Vec3) -> Self {
        let (azimuth, elevation) = view.angles();
        Self {
            target,
            azimuth,
            elevation,
            distance: 1.0,
            fov: DEFAULT_FOV_DEG,
        }
    }

    /// Unit vector from target toward the eye.
    pub fn back_direction(&self) -> Vec3 {
        let (sa, ca) = self.azimuth.to_radians().sin_cos();
        let (se, ce) = self.elevation.to_radians().sin_cos();
        if self.elevation.abs() >= 90.0 {
            return Vec3::new(0.0, 0.0, self.elevation.signum());
        }
        Vec3::new(sa * ce, -ca * ce, se)
    }

    pub fn basis(&self) -> CameraBasis {
        let back = self.back_direction();
        let forward = -back;
        let right = if self.elevation.abs() >= 90.0 {
            // straight down/up: orient screen-up along the azimuth heading
            let (sa, ca) = self.azimuth.to_radians().sin_cos();
            let heading = Vec3::new(-sa, ca, 0.0) * self.elevation.signum();
            forward.cross(heading).normalized()
        } else {
            forward.cross(Vec3::Z).normalized()
        };
        let up = right.cross(forward);
        CameraBasis {
            eye: self.target + back * self.distance,
            right,
            up,
            forward,
        }
    }

    pub fn eye(&self) -> Vec3 {
        self.target + self.back_direction() * self.distance
    }

    fn tan_half_fov(&self) -> f64 {
        (self.fov / 2.0).to_radians().tan()
    }

    /// Pinhole projection into a `width` x `height` viewport.
    pub fn project(&self, point: Vec3, width: u32, height: u32) -> Result<Projection, CameraError> {
        project_with(&self.basis(), self.tan_half_fov(), point, width, height)
    }

    /// Orbit: positive horizontal turns right (azimuth grows), positive vertical raises the eye.
    pub fn rotate(&self, horizontal_deg: f64, vertical_deg: f64) -> CameraState {
        let mut next = *self;
        next.azimuth = normalize_degrees(self.azimuth + horizontal_deg);
        if vertical_deg != 0.0 {
            next.elevation = (self.elevation + vertical_deg).clamp(MIN_ELEVATION, MAX_ELEVATION);
        }
        next
    }

    /// Dolly along the view axis or pan the target in the camera's right/up plane.
    pub fn moved(&self, direction: Direction, distance_m: f64) -> Result<CameraState, CameraError> {
        if !(distance_m.is_finite() && distance_m >= 0.0) {
            return Err(CameraError::BadDistance(distance_m));
        }
        let basis = self.basis();
        let mut next = *self;
        match direction {
            Direction::Forward => next.distance = (self.distance - distance_m).max(MIN_DISTANCE),
            Direction::Backward => next.distance = self.distance + distance_m,
            Direction::Right => next.target = self.target + basis.right * distance_m,
            Direction::Left => next.target = self.target - basis.right * distance_m,
            Direction::Up => next.target = self.target + basis.up * distance_m,
            Direction::Down => next.target = self.target - basis.up * distance_m,
        }
        Ok(next)
    }
}

pub(crate) fn project_with(
    basis: &CameraBasis,
    tan_half_fov: f64,
    point: Vec3,
    width: u32,
    height: u32,
) -> Result<Projection, CameraError> {
    let rel = point - basis.eye;
    let depth = rel.dot(basis.forward);
    if depth <= 1e-9 || !depth.is_finite() {
        return Err(CameraError::BehindCamera);
    }
    let focal = (height as f64 / 2.0) / tan_half_fov;
    Ok(Projection {
        x: width as f64 / 2.0 + focal * rel.dot(basis.right) / depth,
        y: height as f64 / 2.0 - focal * rel.dot(basis.up) / depth,
        depth,
    })
}

fn check_zoom(zoom: f64) -> Result<(), CameraError> {
    if zoom.is_finite() && zoom > 0.0 {
        Ok(())
    } else {
        Err(CameraError::BadZoom(zoom))
    }
}

/// Distance at zoom 1 that shows every corner of `bounds` from the preset direction.
///
/// At least `r / tan(fov/2)` for the bounding-sphere radius `r`; raised further
/// when a corner would still fall outside a square viewport at that distance.
fn framing_distance(cam: &CameraState, bounds: Option<Aabb>) -> f64 {
    let t = cam.tan_half_fov();
    let Some(b) = bounds else {
        return (1.0 / t).max(MIN_FRAMING_DISTANCE);
    };
    let center = b.center();
    let mut radius = b.corners().iter().map(|c| (*c - center).length()).fold(0.0, f64::max);
    if radius <= 0.0 {
        radius = 1.0;
    }
    let basis = cam.basis();
    let fit = b
        .corners()
        .iter()
        .map(|c| {
            let rel = *c - center;
            let lateral = rel.dot(basis.right).abs().max(rel.dot(basis.up).abs());
            rel.dot(-basis.forward) + lateral / t
        })
        .fold(f64::NEG_INFINITY, f64::max);
    (radius / t).max(fit * (1.0 + 1e-9)).max(MIN_FRAMING_DISTANCE)
}

/// Preset view framing the whole scene. Clears any accumulated orbit or pan.
pub fn view_scene(scene: &Scene, view: View, zoom: f64) -> Result<CameraState, CameraError> {
    check_zoom(zoom)?;
    let bounds = scene.bounds();
    let mut cam = CameraState::preset(view, bounds.map_or(Vec3::ZERO, |b| b.center()));
    cam.distance = zoom * framing_distance(&cam, bounds);
    Ok(cam)
}

/// Preset view of a single object with some surrounding margin.
pub fn focus_on(scene: &Scene, target: &str, view: View, zoom: f64) -> Result<CameraState, CameraError> {
    check_zoom(zoom)?;
    let object = scene
        .get(target)
        .map_err(|_| CameraError::UnknownObject(target.to_string()))?;
    let bounds = object.world_aabb();
    let mut cam = CameraState::preset(view, bounds.center());
    cam.distance = zoom * FOCUS_PADDING * framing_distance(&cam, Some(bounds));
    Ok(cam)
}
