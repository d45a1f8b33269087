//! Oracles and generators shared by the integration suites.
#![allow(dead_code)]

pub mod http;

use std::sync::Arc;

use rand::Rng;
use sceneloom_core::action::{Action, ActionBatch};
use sceneloom_core::geometry::mesh::{cuboid, frustum, uv_sphere};
use sceneloom_core::geometry::{Triangle, TriangleMesh};
use sceneloom_core::camera::CameraState;
use sceneloom_core::math::Vec3;
use sceneloom_core::scene::{ScaleValue, Scene, SceneObject};

pub const MAX_TRIANGLES: usize = 200;

/// Separating-axis test for closed triangles: both normals, the nine edge
/// cross products and the six in-plane edge normals.
pub fn sat_intersect(a: &Triangle, b: &Triangle) -> bool {
    let ea = [a[1] - a[0], a[2] - a[1], a[0] - a[2]];
    let eb = [b[1] - b[0], b[2] - b[1], b[0] - b[2]];
    let na = ea[0].cross(ea[1]);
    let nb = eb[0].cross(eb[1]);
    let mut axes = vec![na, nb];
    for x in ea {
        for y in eb {
            axes.push(x.cross(y));
        }
    }
    for e in ea {
        axes.push(na.cross(e));
    }
    for e in eb {
        axes.push(nb.cross(e));
    }
    for axis in axes {
        if axis.x == 0.0 && axis.y == 0.0 && axis.z == 0.0 {
            continue;
        }
        let (amin, amax) = project(a, axis);
        let (bmin, bmax) = project(b, axis);
        if amax < bmin || bmax < amin {
            return false;
        }
    }
    true
}

fn project(t: &Triangle, axis: Vec3) -> (f64, f64) {
    let d = t.map(|p| p.dot(axis));
    (d[0].min(d[1]).min(d[2]), d[0].max(d[1]).max(d[2]))
}

pub fn random_point(rng: &mut impl Rng, lo: f64, hi: f64) -> Vec3 {
    Vec3::new(rng.random_range(lo..hi), rng.random_range(lo..hi), rng.random_range(lo..hi))
}

pub fn random_triangle(rng: &mut impl Rng) -> Triangle {
    [random_point(rng, -1.0, 1.0), random_point(rng, -1.0, 1.0), random_point(rng, -1.0, 1.0)]
}

/// Two triangles in the same axis-aligned plane, so the coplanar path is exercised exactly.
pub fn random_coplanar_pair(rng: &mut impl Rng) -> (Triangle, Triangle) {
    let z = rng.random_range(-1.0..1.0);
    let mut tri = || -> Triangle {
        [0, 1, 2].map(|_| Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), z))
    };
    (tri(), tri())
}

/// A mesh of at most [`MAX_TRIANGLES`] triangles: box, cone, frustum, sphere or random soup.
pub fn random_mesh(rng: &mut impl Rng) -> TriangleMesh {
    let mesh = match rng.random_range(0..5) {
        0 => cuboid(Vec3::ZERO, random_point(rng, 0.2, 1.0)),
        1 => frustum(Vec3::ZERO, rng.random_range(0.1..0.6), 0.0, rng.random_range(0.2..1.0), rng.random_range(3..=40)),
        2 => frustum(
            Vec3::ZERO,
            rng.random_range(0.1..0.6),
            rng.random_range(0.05..0.6),
            rng.random_range(0.2..1.0),
            rng.random_range(3..=40),
        ),
        3 => uv_sphere(Vec3::ZERO, rng.random_range(0.1..0.6), rng.random_range(2..=8), rng.random_range(3..=12)),
        _ => {
            let n = rng.random_range(1..=60);
            let vertices: Vec<Vec3> = (0..3 * n).map(|_| random_point(rng, -0.5, 0.5)).collect();
            let triangles = (0..n as u32).map(|i| [3 * i, 3 * i + 1, 3 * i + 2]).collect();
            TriangleMesh::new(vertices, triangles).expect("random soup is non-degenerate")
        }
    };
    assert!(mesh.triangle_count() <= MAX_TRIANGLES);
    mesh.recentered()
}

/// Scene of 1..=`max_objects` randomly posed meshes packed into a small volume
/// so that a good share of pairs collide.
pub fn random_scene(rng: &mut impl Rng, max_objects: usize) -> Scene {
    let mut scene = Scene::new();
    let n = rng.random_range(1..=max_objects);
    for i in 0..n {
        let mut o = SceneObject::new(format!("obj_{i:02}"), Arc::new(random_mesh(rng)));
        o.position = Vec3::new(
            rng.random_range(-1.5..1.5),
            rng.random_range(-1.5..1.5),
            rng.random_range(0.0..1.2),
        );
        o.rotation = random_point(rng, -180.0, 180.0);
        o.scale = random_point(rng, 0.3, 1.6);
        scene.insert(o).expect("unique names");
    }
    scene
}

/// Möller-Trumbore ray/triangle hit: `(t, u, v)` with the barycentrics of the hit.
pub fn ray_triangle(origin: Vec3, dir: Vec3, tri: &Triangle) -> Option<(f64, f64, f64)> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(p) * inv;
    let q = s.cross(e1);
    let v = dir.dot(q) * inv;
    let t = e2.dot(q) * inv;
    Some((t, u, v))
}

/// Result of casting one ray through every object triangle in world space.
pub struct RayHit {
    /// Nearest object index and hit distance, if any.
    pub nearest: Option<(usize, f64)>,
    /// The ray grazes a triangle edge closely enough that rasterization could go either way.
    pub ambiguous: bool,
}

pub fn cast(scene: &Scene, origin: Vec3, dir: Vec3) -> RayHit {
    let mut nearest: Option<(usize, f64)> = None;
    let mut ambiguous = false;
    for (id, o) in scene.objects().iter().enumerate() {
        let pose = o.transform();
        for t in o.mesh().triangles() {
            let tri = t.map(|i| pose.apply(o.mesh().vertices()[i as usize]));
            let Some((dist, u, v)) = ray_triangle(origin, dir, &tri) else {
                continue;
            };
            if dist <= 0.0 {
                continue;
            }
            let w = 1.0 - u - v;
            let margin = u.min(v).min(w);
            if margin.abs() < 1e-6 {
                ambiguous = true;
            }
            if margin >= 0.0 && nearest.is_none_or(|(_, best)| dist < best) {
                nearest = Some((id, dist));
            }
        }
    }
    RayHit { nearest, ambiguous }
}

/// Rotation by Euler degrees, X applied first, then Y, then Z, written out
/// axis by axis instead of going through the engine's matrix.
pub fn euler_rotate(p: Vec3, deg: Vec3) -> Vec3 {
    let (sx, cx) = deg.x.to_radians().sin_cos();
    let (sy, cy) = deg.y.to_radians().sin_cos();
    let (sz, cz) = deg.z.to_radians().sin_cos();
    let p = Vec3::new(p.x, cx * p.y - sx * p.z, sx * p.y + cx * p.z);
    let p = Vec3::new(cy * p.x + sy * p.z, p.y, -sy * p.x + cy * p.z);
    Vec3::new(cz * p.x - sz * p.y, sz * p.x + cz * p.y, p.z)
}

/// World box of an object by transforming every vertex with [`euler_rotate`].
pub fn oracle_world_aabb(o: &SceneObject) -> (Vec3, Vec3) {
    let mut lo = Vec3::splat(f64::INFINITY);
    let mut hi = Vec3::splat(f64::NEG_INFINITY);
    for &v in o.mesh().vertices() {
        let w = euler_rotate(v.mul_elem(o.scale), o.rotation) + o.position;
        lo = lo.min(w);
        hi = hi.max(w);
    }
    (lo, hi)
}

pub fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
    (a - b).length() <= tol
}

const DESCRIPTIONS: [&str; 6] = ["oak desk", "round table", "floor lamp", "bookshelf", "armchair", "potted plant"];

/// One batch an agent might plausibly send against `scene`, mixing valid and invalid calls.
pub fn random_batch(rng: &mut impl Rng, scene: &Scene) -> ActionBatch {
    let names: Vec<String> = scene.objects().iter().map(|o| o.name().to_string()).collect();
    let pick = |rng: &mut dyn rand::RngCore| -> String {
        if names.is_empty() || rng.random_bool(0.05) {
            "ghost".to_string()
        } else {
            names[rng.random_range(0..names.len())].clone()
        }
    };
    let axis = |rng: &mut dyn rand::RngCore| ["X", "Y", "Z"][rng.random_range(0..3)].to_string();
    if names.is_empty() || rng.random_bool(0.2) {
        let n = rng.random_range(1..=2);
        let actions = (0..n)
            .map(|i| {
                if !names.is_empty() && rng.random_bool(0.3) {
                    Action::Duplicate {
                        name: pick(rng),
                        count: rng.random_range(1..=3),
                    }
                } else {
                    Action::Create {
                        name: format!("thing_{}_{i}", scene.len()),
                        description: DESCRIPTIONS[rng.random_range(0..DESCRIPTIONS.len())].to_string(),
                    }
                }
            })
            .collect();
        return ActionBatch::new(actions);
    }
    let n = rng.random_range(1..=4);
    let actions = (0..n)
        .map(|_| match rng.random_range(0..9) {
            0 => Action::Translate {
                name: pick(rng),
                axis: axis(rng),
                distance: rng.random_range(-2.0..2.0),
            },
            1 => Action::Place {
                name: pick(rng),
                position: [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-1.0..2.0)],
            },
            2 => Action::Rotate {
                name: pick(rng),
                axis: axis(rng),
                angle_degrees: rng.random_range(-400.0..400.0),
            },
            3 => Action::Scale {
                name: pick(rng),
                value: if rng.random_bool(0.5) {
                    ScaleValue::Uniform(rng.random_range(0.2..2.5))
                } else {
                    ScaleValue::PerAxis(random_point(rng, 0.2, 2.5))
                },
            },
            4 => Action::Delete { name: pick(rng) },
            5 => Action::RotateCamera {
                horizontal: rng.random_range(-90.0..90.0),
                vertical: rng.random_range(-30.0..30.0),
            },
            6 => Action::ViewScene {
                view: ["Front", "Side", "Top", "Iso"][rng.random_range(0..4)].to_string(),
                zoom: rng.random_range(0.8..2.0),
            },
            7 => Action::MoveCamera {
                direction: ["Forward", "Backward", "Left", "Right", "Up", "Down"][rng.random_range(0..6)].to_string(),
                distance: rng.random_range(0.0..1.0),
            },
            _ => Action::Finish,
        })
        .collect();
    ActionBatch::new(actions)
}

/// Pinhole projection built straight from the orbit parameters:
/// eye on the sphere around the target, screen up toward +Z (toward +Y when looking straight down).
pub fn oracle_project(cam: &CameraState, p: Vec3, width: u32, height: u32) -> Option<(f64, f64, f64)> {
    let (a, e) = (cam.azimuth.to_radians(), cam.elevation.to_radians());
    let back = if cam.elevation >= 90.0 {
        Vec3::new(0.0, 0.0, 1.0)
    } else {
        Vec3::new(a.sin() * e.cos(), -a.cos() * e.cos(), e.sin())
    };
    let eye = cam.target + back * cam.distance;
    let forward = -back;
    let world_up = if cam.elevation >= 90.0 {
        Vec3::new(-a.sin(), a.cos(), 0.0)
    } else {
        Vec3::Z
    };
    let right = forward.cross(world_up).normalized();
    let up = right.cross(forward);
    let rel = p - eye;
    let depth = rel.dot(forward);
    if depth <= 0.0 {
        return None;
    }
    let f = (height as f64 / 2.0) / (cam.fov.to_radians() / 2.0).tan();
    Some((
        width as f64 / 2.0 + f * rel.dot(right) / depth,
        height as f64 / 2.0 - f * rel.dot(up) / depth,
        depth,
    ))
}

pub fn respond(actions: Vec<Action>) -> String {
    let mut batch = ActionBatch::new(actions);
    batch.reason = "scripted test step".into();
    batch.to_response_text()
}

/// Two objects created, pushed into each other, then Finish.
pub fn overlapping_pair_responses() -> Vec<String> {
    let create = |n: &str| Action::Create {
        name: n.into(),
        description: "wooden crate".into(),
    };
    vec![
        respond(vec![create("a"), create("b")]),
        respond(vec![
            Action::Place { name: "a".into(), position: [0.0, 0.0, 0.0] },
            Action::Place { name: "b".into(), position: [0.3, 0.0, 0.0] },
        ]),
        respond(vec![Action::Finish]),
    ]
}
