//! Mesh geometry: triangle meshes, boxes, BVH and the triangle overlap test.

mod aabb;
pub mod bvh;
pub mod mesh;
pub mod tri_tri;

pub use aabb::Aabb;
pub use bvh::{Bvh, BvhNode, BvhNodeKind};
pub use mesh::TriangleMesh;
pub use tri_tri::{tri_tri_intersect, Triangle};

use crate::math::WorldTransform;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("mesh has no non-degenerate triangles")]
    EmptyMesh,
    #[error("mesh has zero extent")]
    DegenerateMesh,
    #[error("vertex {0} is not finite")]
    NonFinite(usize),
    #[error("triangle {triangle:?} references a vertex beyond {vertex_count}")]
    IndexOutOfRange { triangle: [u32; 3], vertex_count: usize },
    #[error("OBJ line {line}: {message}")]
    Obj { line: usize, message: String },
}

/// Exact world box: every referenced vertex is transformed, not just the local box corners.
pub fn world_aabb(mesh: &TriangleMesh, pose: &WorldTransform) -> Aabb {
    let m = pose.matrix();
    Aabb::from_points(
        mesh.triangles()
            .iter()
            .flatten()
            .map(|&i| m.transform(mesh.vertices()[i as usize].mul_elem(pose.scale)) + pose.position),
    )
}
