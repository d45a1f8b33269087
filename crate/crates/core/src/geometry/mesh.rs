use std::f64::consts::TAU;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use super::{Aabb, GeometryError};
use crate::math::{Vec3, WorldTransform};

/// Triangles whose doubled area is at or below this are dropped on import.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh in local coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    /// Validates indices and coordinates, then drops degenerate triangles.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self, GeometryError> {
        if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite(i));
        }
        let n = vertices.len() as u32;
        if let Some(t) = triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(GeometryError::IndexOutOfRange {
                triangle: *t,
                vertex_count: vertices.len(),
            });
        }
        let triangles: Vec<[u32; 3]> = triangles
            .into_iter()
            .filter(|t| {
                let [a, b, c] = t.map(|i| vertices[i as usize]);
                (b - a).cross(c - a).length() > DEGENERATE_AREA
            })
            .collect();
        if triangles.is_empty() {
            return Err(GeometryError::EmptyMesh);
        }
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        self.triangles[i].map(|j| self.vertices[j as usize])
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Box over the vertices referenced by triangles.
    pub fn aabb(&self) -> Aabb {
        Aabb::from_points(self.triangles.iter().flatten().map(|&i| self.vertices[i as usize]))
    }

    /// Same mesh translated so its AABB center sits at the origin. Meshes already
    /// centered to within 1e-12 of their size are returned unchanged, so the
    /// operation is idempotent bit for bit.
    pub fn recentered(&self) -> TriangleMesh {
        let bb = self.aabb();
        let c = bb.center();
        let tol = 1e-12 * bb.extents().max_element().max(f64::MIN_POSITIVE);
        if c.x.abs().max(c.y.abs()).max(c.z.abs()) <= tol {
            return self.clone();
        }
        self.map_vertices(|v| v - c)
    }

    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Applies `pose` to every vertex. Degenerate triangles are kept so indices stay aligned.
    pub fn transformed(&self, pose: &WorldTransform) -> TriangleMesh {
        let m = pose.matrix();
        self.map_vertices(|v| m.transform(v.mul_elem(pose.scale)) + pose.position)
    }

    /// Uniform rescale to a max AABB extent of 1 m, recentered at the origin.
    pub fn normalized(&self) -> Result<TriangleMesh, GeometryError> {
        let bb = self.aabb();
        let extent = bb.extents().max_element();
        if extent.partial_cmp(&1e-12) != Some(std::cmp::Ordering::Greater) {
            return Err(GeometryError::DegenerateMesh);
        }
        let c = bb.center();
        let s = 1.0 / extent;
        Ok(self.map_vertices(|v| (v - c) * s))
    }

    /// Drops vertices not referenced by any triangle, preserving order.
    pub fn compacted(&self) -> TriangleMesh {
        let mut remap = vec![u32::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let triangles = self
            .triangles
            .iter()
            .map(|t| {
                t.map(|i| {
                    let slot = &mut remap[i as usize];
                    if *slot == u32::MAX {
                        *slot = vertices.len() as u32;
                        vertices.push(self.vertices[i as usize]);
                    }
                    *slot
                })
            })
            .collect();
        TriangleMesh { vertices, triangles }
    }

    /// Wavefront OBJ text with shortest round-trip float formatting.
    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 32 + self.triangles.len() * 16);
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    /// Parses `v` and `f` records; polygons are fan-triangulated. Other records are ignored.
    pub fn from_obj(text: &str) -> Result<TriangleMesh, GeometryError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            let mut parts = line.split_whitespace();
            let bad = |msg: &str| GeometryError::Obj {
                line: lineno + 1,
                message: msg.to_string(),
            };
            match parts.next() {
                Some("v") => {
                    let coords: Vec<f64> = parts
                        .take(3)
                        .map(|p| p.parse::<f64>().map_err(|_| bad("bad vertex coordinate")))
                        .collect::<Result<_, _>>()?;
                    if coords.len() != 3 {
                        return Err(bad("vertex needs three coordinates"));
                    }
                    vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
                }
                Some("f") => {
                    let idx: Vec<u32> = parts
                        .map(|p| {
                            let first = p.split('/').next().unwrap_or("");
                            let i: i64 = first.parse().map_err(|_| bad("bad face index"))?;
                            let resolved = if i < 0 { vertices.len() as i64 + i } else { i - 1 };
                            if resolved < 0 || resolved >= vertices.len() as i64 {
                                return Err(bad("face index out of range"));
                            }
                            Ok(resolved as u32)
                        })
                        .collect::<Result<_, _>>()?;
                    if idx.len() < 3 {
                        return Err(bad("face needs at least three vertices"));
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        TriangleMesh::new(vertices, triangles)
    }

    /// Hex SHA-256 of the OBJ serialization; used as a content address.
    pub fn content_hash(&self) -> String {
        hex_digest(self.to_obj().as_bytes())
    }

    /// Appends another mesh's triangles.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| t.map(|i| i + base)));
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

/// Closed box centered at `center` with full side lengths `size`.
pub fn cuboid(center: Vec3, size: Vec3) -> TriangleMesh {
    let h = size * 0.5;
    let vertices: Vec<Vec3> = (0..8)
        .map(|i| {
            let sx = if i & 1 == 0 { -h.x } else { h.x };
            let sy = if i & 2 == 0 { -h.y } else { h.y };
            let sz = if i & 4 == 0 { -h.z } else { h.z };
            center + Vec3::new(sx, sy, sz)
        })
        .collect();
    // outward winding
    let triangles = vec![
        [0, 2, 1],
        [1, 2, 3],
        [4, 5, 6],
        [5, 7, 6],
        [0, 1, 4],
        [1, 5, 4],
        [2, 6, 3],
        [3, 6, 7],
        [0, 4, 2],
        [2, 4, 6],
        [1, 3, 5],
        [3, 7, 5],
    ];
    TriangleMesh::new(vertices, triangles).expect("box with positive size")
}

/// Unit cube centered at the origin.
pub fn unit_cube() -> TriangleMesh {
    cuboid(Vec3::ZERO, Vec3::ONE)
}

/// Capped frustum along +Z from `base_z`; `top_radius` of zero yields a cone.
pub fn frustum(
    base_center: Vec3,
    base_radius: f64,
    top_radius: f64,
    height: f64,
    segments: u32,
) -> TriangleMesh {
    let segments = segments.max(3);
    let mut vertices = Vec::new();
    let ring = |r: f64, z: f64, vertices: &mut Vec<Vec3>| {
        for k in 0..segments {
            let a = TAU * k as f64 / segments as f64;
            vertices.push(base_center + Vec3::new(r * a.cos(), r * a.sin(), z));
        }
    };
    ring(base_radius, 0.0, &mut vertices);
    let cone = top_radius <= 0.0;
    if cone {
        vertices.push(base_center + Vec3::new(0.0, 0.0, height));
    } else {
        ring(top_radius, height, &mut vertices);
    }
    let bottom_center = vertices.len() as u32;
    vertices.push(base_center);
    let mut triangles = Vec::new();
    for k in 0..segments {
        let n = (k + 1) % segments;
        if cone {
            triangles.push([k, n, segments]);
        } else {
            let (tk, tn) = (segments + k, segments + n);
            triangles.push([k, n, tn]);
            triangles.push([k, tn, tk]);
        }
        triangles.push([bottom_center, n, k]);
    }
    if !cone {
        let top_center = vertices.len() as u32;
        vertices.push(base_center + Vec3::new(0.0, 0.0, height));
        for k in 0..segments {
            let n = (k + 1) % segments;
            triangles.push([top_center, segments + k, segments + n]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("frustum with positive size")
}

pub fn uv_sphere(center: Vec3, radius: f64, rings: u32, segments: u32) -> TriangleMesh {
    let rings = rings.max(2);
    let segments = segments.max(3);
    let mut vertices = vec![center + Vec3::new(0.0, 0.0, -radius)];
    for r in 1..rings {
        let polar = std::f64::consts::PI * r as f64 / rings as f64;
        let (s, c) = polar.sin_cos();
        for k in 0..segments {
            let a = TAU * k as f64 / segments as f64;
            vertices.push(center + Vec3::new(radius * s * a.cos(), radius * s * a.sin(), -radius * c));
        }
    }
    let top = vertices.len() as u32;
    vertices.push(center + Vec3::new(0.0, 0.0, radius));
    let idx = |r: u32, k: u32| 1 + (r - 1) * segments + (k % segments);
    let mut triangles = Vec::new();
    for k in 0..segments {
        triangles.push([0, idx(1, k + 1), idx(1, k)]);
        triangles.push([top, idx(rings - 1, k), idx(rings - 1, k + 1)]);
    }
    for r in 1..rings - 1 {
        for k in 0..segments {
            triangles.push([idx(r, k), idx(r, k + 1), idx(r + 1, k + 1)]);
            triangles.push([idx(r, k), idx(r + 1, k + 1), idx(r + 1, k)]);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("sphere with positive radius")
}
