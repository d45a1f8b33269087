//! Software rasterizer for the feedback image.

mod image;
pub mod overlay;

pub use image::{Image, ImageError};
pub use overlay::{hud_axis_directions, overlay_axis_hud, overlay_labels, LabelPlacement, Rect};

use crate::camera::CameraState;
use crate::math::Vec3;
use crate::scene::Scene;

pub const DEFAULT_WIDTH: u32 = 1024;
pub const DEFAULT_HEIGHT: u32 = 768;
pub const MIN_SIZE: u32 = 64;
/// Near clipping plane, meters in front of the eye.
pub const NEAR: f64 = 0.01;

/// Object-id buffer values for pixels not covered by any object.
pub const ID_BACKGROUND: i32 = -1;
pub const ID_FLOOR: i32 = -2;

const AMBIENT: f64 = 0.35;
const DIFFUSE: f64 = 0.65;
const CHECKER_SIZE: f64 = 0.5;
const CHECKER_RGB: [[u8; 3]; 2] = [[214, 214, 210], [184, 184, 180]];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RenderError {
    #[error("viewport {0}x{1} is below the {MIN_SIZE}px minimum")]
    BadSize(u32, u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderOptions {
    pub width: u32,
    pub height: u32,
    /// Draw name labels and the axis gizmo.
    pub visual_prompting: bool,
    pub draw_floor: bool,
    pub background: [u8; 3],
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
            visual_prompting: true,
            draw_floor: true,
            background: [236, 240, 245],
        }
    }
}

/// A rendered image plus per-pixel object ids and the overlay regions drawn.
#[derive(Debug, Clone)]
pub struct Frame {
    pub image: Image,
    /// Index into `scene.objects()`, or [`ID_BACKGROUND`] / [`ID_FLOOR`].
    pub object_ids: Vec<i32>,
    pub labels: Vec<LabelPlacement>,
    pub hud: Option<Rect>,
}

impl Frame {
    pub fn object_id(&self, x: u32, y: u32) -> i32 {
        self.object_ids[(y * self.image.width() + x) as usize]
    }

    /// Every pixel rectangle an overlay may have touched.
    pub fn overlay_rects(&self) -> Vec<Rect> {
        self.labels.iter().map(|l| l.rect).chain(self.hud).collect()
    }
}

/// Stable base color derived from an object name.
pub fn name_color(name: &str) -> [u8; 3] {
    let digest = crate::geometry::mesh::hex_digest(name.as_bytes());
    let byte = |i: usize| u8::from_str_radix(&digest[2 * i..2 * i + 2], 16).expect("hex digest");
    [0, 1, 2].map(|i| 60 + (byte(i) as u16 * 170 / 255) as u8)
}

/// Light direction: halfway between the view-back direction and world up.
pub fn light_direction(cam: &CameraState) -> Vec3 {
    (cam.back_direction() + Vec3::Z).normalized()
}

pub fn render(scene: &Scene, cam: &CameraState, opts: &RenderOptions) -> Result<Image, RenderError> {
    render_frame(scene, cam, opts).map(|f| f.image)
}

pub fn render_frame(scene: &Scene, cam: &CameraState, opts: &RenderOptions) -> Result<Frame, RenderError> {
    if opts.width < MIN_SIZE || opts.height < MIN_SIZE {
        return Err(RenderError::BadSize(opts.width, opts.height));
    }
    let mut r = Raster::new(cam, opts);
    if opts.draw_floor {
        r.floor(scene);
    }
    let light = light_direction(cam);
    for (id, object) in scene.objects().iter().enumerate() {
        let pose = object.transform();
        let mesh = object.mesh();
        let base = name_color(object.name());
        let world: Vec<Vec3> = mesh.vertices().iter().map(|&v| pose.apply(v)).collect();
        for t in mesh.triangles() {
            let tri = t.map(|i| world[i as usize]);
            let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
            let len = n.length();
            if len.is_nan() || len <= 0.0 {
                continue;
            }
            let shade = AMBIENT + DIFFUSE * (n * (1.0 / len)).dot(light).abs();
            let rgb = base.map(|c| (c as f64 * shade).round().clamp(0.0, 255.0) as u8);
            r.triangle(tri, id as i32, rgb);
        }
    }
    let mut frame = Frame {
        image: r.image,
        object_ids: r.ids,
        labels: Vec::new(),
        hud: None,
    };
    if opts.visual_prompting {
        frame.labels = overlay_labels(&mut frame.image, scene, cam);
        frame.hud = Some(overlay_axis_hud(&mut frame.image, cam));
    }
    Ok(frame)
}

struct Raster {
    eye: Vec3,
    right: Vec3,
    up: Vec3,
    forward: Vec3,
    focal: f64,
    w: u32,
    h: u32,
    image: Image,
    depth: Vec<f64>,
    ids: Vec<i32>,
}

/// Camera-space vertex: x right, y up, z depth.
type CamPoint = [f64; 3];

impl Raster {
    fn new(cam: &CameraState, opts: &RenderOptions) -> Self {
        let b = cam.basis();
        let n = opts.width as usize * opts.height as usize;
        let bg = opts.background;
        Self {
            eye: b.eye,
            right: b.right,
            up: b.up,
            forward: b.forward,
            focal: (opts.height as f64 / 2.0) / (cam.fov / 2.0).to_radians().tan(),
            w: opts.width,
            h: opts.height,
            image: Image::new(opts.width, opts.height, [bg[0], bg[1], bg[2], 255]),
            depth: vec![f64::INFINITY; n],
            ids: vec![ID_BACKGROUND; n],
        }
    }

    fn to_camera(&self, p: Vec3) -> CamPoint {
        let rel = p - self.eye;
        [rel.dot(self.right), rel.dot(self.up), rel.dot(self.forward)]
    }

    fn pixel_ray(&self, x: u32, y: u32) -> Vec3 {
        let sx = (x as f64 + 0.5 - self.w as f64 / 2.0) / self.focal;
        let sy = (self.h as f64 / 2.0 - (y as f64 + 0.5)) / self.focal;
        self.forward + self.right * sx + self.up * sy
    }

    /// Ray-cast each pixel against the z=0 plane inside the floor rectangle.
    fn floor(&mut self, scene: &Scene) {
        let (lo, hi) = scene.floor_extent();
        let texture = scene.floor_texture.as_ref().map(|t| &t.image);
        for y in 0..self.h {
            for x in 0..self.w {
                let dir = self.pixel_ray(x, y);
                if dir.z == 0.0 {
                    continue;
                }
                // dir has unit forward component, so the ray parameter is view depth
                let s = -self.eye.z / dir.z;
                if s.is_nan() || s <= NEAR {
                    continue;
                }
                let p = self.eye + dir * s;
                if p.x < lo[0] || p.x > hi[0] || p.y < lo[1] || p.y > hi[1] {
                    continue;
                }
                let rgb = match texture {
                    Some(tex) => tex.sample(p.x - lo[0], p.y - lo[1]),
                    None => {
                        let cx = ((p.x - lo[0]) / CHECKER_SIZE).floor() as i64;
                        let cy = ((p.y - lo[1]) / CHECKER_SIZE).floor() as i64;
                        CHECKER_RGB[(cx + cy).rem_euclid(2) as usize]
                    }
                };
                let i = (y * self.w + x) as usize;
                self.depth[i] = s;
                self.ids[i] = ID_FLOOR;
                self.image.set(x, y, [rgb[0], rgb[1], rgb[2], 255]);
            }
        }
    }

    fn triangle(&mut self, tri: [Vec3; 3], id: i32, rgb: [u8; 3]) {
        let cam = tri.map(|p| self.to_camera(p));
        let clipped = clip_near(&cam);
        for k in 1..clipped.len().saturating_sub(1) {
            self.fill([clipped[0], clipped[k], clipped[k + 1]], id, rgb);
        }
    }

    fn fill(&mut self, tri: [CamPoint; 3], id: i32, rgb: [u8; 3]) {
        let (hw, hh) = (self.w as f64 / 2.0, self.h as f64 / 2.0);
        let s = tri.map(|[x, y, z]| (hw + self.focal * x / z, hh - self.focal * y / z, 1.0 / z));
        let area = edge(s[0], s[1], s[2].0, s[2].1);
        if area == 0.0 || !area.is_finite() {
            return;
        }
        let min_x = s.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0) as i64;
        let x1 = ((max_x - 0.5).floor()).min(self.w as f64 - 1.0) as i64;
        let y0 = (min_y - 0.5).ceil().max(0.0) as i64;
        let y1 = ((max_y - 0.5).floor()).min(self.h as f64 - 1.0) as i64;
        for py in y0..=y1 {
            let cy = py as f64 + 0.5;
            for px in x0..=x1 {
                let cx = px as f64 + 0.5;
                let w0 = edge(s[1], s[2], cx, cy) / area;
                let w1 = edge(s[2], s[0], cx, cy) / area;
                let w2 = edge(s[0], s[1], cx, cy) / area;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let inv_z = w0 * s[0].2 + w1 * s[1].2 + w2 * s[2].2;
                let depth = 1.0 / inv_z;
                let i = (py as u32 * self.w + px as u32) as usize;
                if depth < self.depth[i] {
                    self.depth[i] = depth;
                    self.ids[i] = id;
                    self.image.set(px as u32, py as u32, [rgb[0], rgb[1], rgb[2], 255]);
                }
            }
        }
    }
}

fn edge(a: (f64, f64, f64), b: (f64, f64, f64), x: f64, y: f64) -> f64 {
    (b.0 - a.0) * (y - a.1) - (b.1 - a.1) * (x - a.0)
}

/// Sutherland-Hodgman against the plane z = NEAR.
fn clip_near(poly: &[CamPoint; 3]) -> Vec<CamPoint> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let a = poly[i];
        let b = poly[(i + 1) % 3];
        let a_in = a[2] >= NEAR;
        let b_in = b[2] >= NEAR;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (NEAR - a[2]) / (b[2] - a[2]);
            out.push([a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, NEAR]);
        }
    }
    out
}
