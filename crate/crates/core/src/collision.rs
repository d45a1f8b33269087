//! Mesh-mesh collision queries between scene objects.

use crate::geometry::{tri_tri_intersect, Bvh, TriangleMesh};
use crate::math::WorldTransform;
use crate::scene::Scene;

/// Default contact tolerance: meshes shrink by this fraction before testing.
pub const DEFAULT_MARGIN: f64 = 1e-4;

/// A mesh posed in world space with its hierarchy, built once per query set.
pub struct WorldMesh {
    mesh: TriangleMesh,
    bvh: Bvh,
}

impl WorldMesh {
    /// Contracts `mesh` by `1 - margin` about its local origin, then applies `pose`.
    pub fn new(mesh: &TriangleMesh, pose: &WorldTransform, margin: f64) -> Self {
        let mesh = mesh.transformed(&pose.contracted(1.0 - margin));
        let bvh = Bvh::build(&mesh).expect("validated meshes are non-empty");
        Self { mesh, bvh }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn intersects(&self, other: &WorldMesh) -> bool {
        if !self.bvh.root().aabb.overlaps(&other.bvh.root().aabb) {
            return false;
        }
        self.bvh.any_leaf_pair(&other.bvh, |a, b| {
            tri_tri_intersect(&self.mesh.triangle(a as usize), &other.mesh.triangle(b as usize))
        })
    }
}

pub fn intersect_meshes(
    a: &TriangleMesh,
    pose_a: &WorldTransform,
    b: &TriangleMesh,
    pose_b: &WorldTransform,
    margin: f64,
) -> bool {
    WorldMesh::new(a, pose_a, margin).intersects(&WorldMesh::new(b, pose_b, margin))
}

fn pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// All colliding object pairs, each ordered by name and the list sorted.
pub fn detect_collisions(scene: &Scene, margin: f64) -> Vec<(String, String)> {
    let objects = scene.objects();
    let world: Vec<WorldMesh> = objects
        .iter()
        .map(|o| WorldMesh::new(o.mesh(), &o.transform(), margin))
        .collect();
    let mut out = Vec::new();
    for i in 0..world.len() {
        for j in i + 1..world.len() {
            if world[i].intersects(&world[j]) {
                out.push(pair(objects[i].name(), objects[j].name()));
            }
        }
    }
    out.sort();
    out
}

/// Reference implementation: every triangle against every triangle, no pruning.
pub fn brute_force_collisions(scene: &Scene, margin: f64) -> Vec<(String, String)> {
    let objects = scene.objects();
    let world: Vec<TriangleMesh> = objects
        .iter()
        .map(|o| o.mesh().transformed(&o.transform().contracted(1.0 - margin)))
        .collect();
    let mut out = Vec::new();
    for i in 0..world.len() {
        for j in i + 1..world.len() {
            let hit = (0..world[i].triangle_count()).any(|a| {
                let ta = world[i].triangle(a);
                (0..world[j].triangle_count()).any(|b| tri_tri_intersect(&ta, &world[j].triangle(b)))
            });
            if hit {
                out.push(pair(objects[i].name(), objects[j].name()));
            }
        }
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::mesh::unit_cube;
    use crate::math::Vec3;

    fn at(x: f64) -> WorldTransform {
        WorldTransform {
            position: Vec3::new(x, 0.0, 0.0),
            ..WorldTransform::identity()
        }
    }

    #[test]
    fn cube_pairs() {
        let c = unit_cube();
        let o = WorldTransform::identity();
        assert!(!intersect_meshes(&c, &o, &c, &at(2.0), DEFAULT_MARGIN));
        assert!(intersect_meshes(&c, &o, &c, &at(0.5), DEFAULT_MARGIN));
        assert!(!intersect_meshes(&c, &o, &c, &at(1.0), DEFAULT_MARGIN));
        // without contraction the closed faces touch
        assert!(intersect_meshes(&c, &o, &c, &at(1.0), 0.0));
    }

    #[test]
    fn three_overlapping_cubes() {
        let mut s = Scene::new();
        for (name, x) in [("c", 0.0), ("a", 0.3), ("b", 0.6)] {
            s.add_object(name, unit_cube()).unwrap();
            s.place(name, Vec3::new(x, 0.0, 0.5)).unwrap();
        }
        let expected: Vec<(String, String)> = [("a", "b"), ("a", "c"), ("b", "c")]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(detect_collisions(&s, DEFAULT_MARGIN), expected);
        assert_eq!(brute_force_collisions(&s, DEFAULT_MARGIN), expected);
    }

    #[test]
    fn small_scenes_are_collision_free() {
        let mut s = Scene::new();
        assert!(detect_collisions(&s, DEFAULT_MARGIN).is_empty());
        s.add_object("solo", unit_cube()).unwrap();
        assert!(detect_collisions(&s, DEFAULT_MARGIN).is_empty());
        // the stacked copy touches but does not penetrate
        s.duplicate("solo", 1).unwrap();
        assert!(detect_collisions(&s, DEFAULT_MARGIN).is_empty());
    }
}
