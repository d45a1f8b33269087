//! Visual prompting overlays: per-object name labels and the axis gizmo.

use font8x8::legacy::BASIC_LEGACY;

use super::Image;
use crate::camera::CameraState;
use crate::math::Vec3;
use crate::scene::Scene;

/// Bitmap glyphs are 8x8, drawn at this integer scale.
pub const FONT_SCALE: i64 = 2;
pub const GLYPH_SIZE: i64 = 8 * FONT_SCALE;
const LABEL_PAD: i64 = 3;
const LABEL_BOX_RGB: [u8; 3] = [20, 20, 24];
const LABEL_BOX_ALPHA: u8 = 170;
const TEXT_RGB: [u8; 3] = [255, 255, 255];

/// Gizmo center offset from the top-right corner, and arm length, in pixels.
pub const HUD_MARGIN: i64 = 64;
pub const HUD_ARM: f64 = 44.0;
/// Arms shorter than this fraction of full length are drawn as a dot.
const HUD_DOT_FRACTION: f64 = 0.08;

/// Inclusive-exclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rect {
    pub x0: i64,
    pub y0: i64,
    pub x1: i64,
    pub y1: i64,
}

impl Rect {
    pub fn contains(&self, x: i64, y: i64) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    fn clipped(self, w: u32, h: u32) -> Rect {
        Rect {
            x0: self.x0.clamp(0, w as i64),
            y0: self.y0.clamp(0, h as i64),
            x1: self.x1.clamp(0, w as i64),
            y1: self.y1.clamp(0, h as i64),
        }
    }
}

/// Where a label was drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelPlacement {
    pub name: String,
    /// Projected top-center of the object's world box, in pixels.
    pub anchor: (f64, f64),
    pub rect: Rect,
}

fn glyph(c: char) -> [u8; 8] {
    let code = c as usize;
    if (32..128).contains(&code) {
        BASIC_LEGACY[code]
    } else {
        BASIC_LEGACY['?' as usize]
    }
}

pub fn text_width(text: &str) -> i64 {
    text.chars().count() as i64 * GLYPH_SIZE
}

/// Draws `text` with its top-left at `(x, y)`.
pub fn draw_text(image: &mut Image, x: i64, y: i64, text: &str, rgb: [u8; 3]) {
    for (i, c) in text.chars().enumerate() {
        let rows = glyph(c);
        let gx = x + i as i64 * GLYPH_SIZE;
        for (row, bits) in rows.iter().enumerate() {
            for col in 0..8 {
                if bits >> col & 1 == 1 {
                    for dy in 0..FONT_SCALE {
                        for dx in 0..FONT_SCALE {
                            image.put(
                                gx + col * FONT_SCALE + dx,
                                y + row as i64 * FONT_SCALE + dy,
                                [rgb[0], rgb[1], rgb[2], 255],
                            );
                        }
                    }
                }
            }
        }
    }
}

fn fill_rect(image: &mut Image, r: Rect, rgb: [u8; 3], alpha: u8) {
    for y in r.y0..r.y1 {
        for x in r.x0..r.x1 {
            image.blend(x, y, rgb, alpha);
        }
    }
}

/// Label box for `text` whose bottom edge is centered on `anchor`.
pub fn label_rect(anchor: (f64, f64), text: &str) -> Rect {
    let w = text_width(text) + 2 * LABEL_PAD;
    let h = GLYPH_SIZE + 2 * LABEL_PAD;
    let cx = anchor.0.floor() as i64;
    let bottom = anchor.1.floor() as i64;
    Rect {
        x0: cx - w / 2,
        y0: bottom - h,
        x1: cx - w / 2 + w,
        y1: bottom,
    }
}

/// Computes label anchors without drawing. Objects whose box center is
/// off-screen or behind the camera get no label.
pub fn label_placements(scene: &Scene, cam: &CameraState, width: u32, height: u32) -> Vec<LabelPlacement> {
    scene
        .objects()
        .iter()
        .filter_map(|o| {
            let bb = o.world_aabb();
            let c = cam.project(bb.center(), width, height).ok()?;
            if !(c.x >= 0.0 && c.x < width as f64 && c.y >= 0.0 && c.y < height as f64) {
                return None;
            }
            let top = Vec3::new(bb.center().x, bb.center().y, bb.max.z);
            let a = cam.project(top, width, height).ok()?;
            Some(LabelPlacement {
                name: o.name().to_string(),
                anchor: (a.x, a.y),
                rect: label_rect((a.x, a.y), o.name()),
            })
        })
        .collect()
}

/// Draws name labels: white text on a translucent dark box.
pub fn overlay_labels(image: &mut Image, scene: &Scene, cam: &CameraState) -> Vec<LabelPlacement> {
    let placements = label_placements(scene, cam, image.width(), image.height());
    for p in &placements {
        fill_rect(image, p.rect.clipped(image.width(), image.height()), LABEL_BOX_RGB, LABEL_BOX_ALPHA);
        draw_text(image, p.rect.x0 + LABEL_PAD, p.rect.y0 + LABEL_PAD, &p.name, TEXT_RGB);
    }
    placements
}

/// Screen-space direction (x right, y down) of each world axis under the
/// camera's rotation only, scaled so a unit axis facing the screen has length 1.
pub fn hud_axis_directions(cam: &CameraState) -> [(f64, f64); 3] {
    let b = cam.basis();
    [Vec3::X, Vec3::Y, Vec3::Z].map(|axis| (axis.dot(b.right), -axis.dot(b.up)))
}

pub fn hud_center(width: u32) -> (f64, f64) {
    ((width as i64 - HUD_MARGIN) as f64, HUD_MARGIN as f64)
}

pub fn hud_rect(width: u32) -> Rect {
    let (cx, cy) = hud_center(width);
    let r = HUD_ARM as i64 + GLYPH_SIZE + 6;
    Rect {
        x0: cx as i64 - r,
        y0: cy as i64 - r,
        x1: cx as i64 + r + 1,
        y1: cy as i64 + r + 1,
    }
}

const AXIS_RGB: [[u8; 3]; 3] = [[230, 40, 40], [40, 190, 40], [50, 90, 240]];
const AXIS_NAMES: [&str; 3] = ["X", "Y", "Z"];

fn draw_disc(image: &mut Image, cx: f64, cy: f64, radius: f64, rgb: [u8; 3]) {
    let r = radius.ceil() as i64;
    let (ix, iy) = (cx.floor() as i64, cy.floor() as i64);
    for dy in -r..=r {
        for dx in -r..=r {
            let (px, py) = ((ix + dx) as f64 + 0.5 - cx, (iy + dy) as f64 + 0.5 - cy);
            if px * px + py * py <= radius * radius {
                image.put(ix + dx, iy + dy, [rgb[0], rgb[1], rgb[2], 255]);
            }
        }
    }
}

fn draw_thick_line(image: &mut Image, from: (f64, f64), to: (f64, f64), half_width: f64, rgb: [u8; 3]) {
    let len = ((to.0 - from.0).powi(2) + (to.1 - from.1).powi(2)).sqrt();
    let steps = (len * 2.0).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        draw_disc(image, from.0 + (to.0 - from.0) * t, from.1 + (to.1 - from.1) * t, half_width, rgb);
    }
}

/// Axis gizmo in the top-right corner: X red, Y green, Z blue.
pub fn overlay_axis_hud(image: &mut Image, cam: &CameraState) -> Rect {
    let rect = hud_rect(image.width());
    fill_rect(image, rect.clipped(image.width(), image.height()), LABEL_BOX_RGB, 110);
    let (cx, cy) = hud_center(image.width());
    let dirs = hud_axis_directions(cam);
    let fwd = cam.basis().forward;
    // far-pointing axes first so nearer arms paint over them
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let da = unit(a).dot(fwd);
        let db = unit(b).dot(fwd);
        db.total_cmp(&da).then(a.cmp(&b))
    });
    for i in order {
        let (dx, dy) = dirs[i];
        let len = (dx * dx + dy * dy).sqrt();
        let rgb = AXIS_RGB[i];
        if len < HUD_DOT_FRACTION {
            draw_disc(image, cx, cy, 4.5, rgb);
            draw_text(image, cx as i64 + 6, cy as i64 + 6, AXIS_NAMES[i], rgb);
            continue;
        }
        let tip = (cx + dx * HUD_ARM, cy + dy * HUD_ARM);
        draw_thick_line(image, (cx, cy), tip, 1.5, rgb);
        draw_disc(image, tip.0, tip.1, 3.5, rgb);
        let label = (cx + dx / len * (HUD_ARM + 10.0), cy + dy / len * (HUD_ARM + 10.0));
        draw_text(
            image,
            label.0 as i64 - GLYPH_SIZE / 2,
            label.1 as i64 - GLYPH_SIZE / 2,
            AXIS_NAMES[i],
            rgb,
        );
    }
    rect
}

fn unit(i: usize) -> Vec3 {
    [Vec3::X, Vec3::Y, Vec3::Z][i]
}
