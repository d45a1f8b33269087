//! Binary bounding-volume hierarchy over mesh triangles.
//!
//! Built by median split along the longest axis of the triangle-centroid
//! box. Leaves hold at most [`LEAF_SIZE`] triangles.

use super::{Aabb, GeometryError, TriangleMesh};

pub const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub enum BvhNodeKind {
    /// Range into [`Bvh::triangle_order`].
    Leaf { start: usize, count: usize },
    Internal { left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BvhNode {
    pub aabb: Aabb,
    pub kind: BvhNodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Result<Bvh, GeometryError> {
        let n = mesh.triangle_count();
        if n == 0 {
            return Err(GeometryError::EmptyMesh);
        }
        let boxes: Vec<Aabb> = (0..n).map(|i| Aabb::from_points(mesh.triangle(i))).collect();
        let centroids: Vec<[f64; 3]> = boxes.iter().map(|b| b.center().to_array()).collect();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * n / LEAF_SIZE + 1),
            order: (0..n as u32).collect(),
        };
        bvh.build_range(0, n, &boxes, &centroids);
        Ok(bvh)
    }

    fn build_range(&mut self, start: usize, end: usize, boxes: &[Aabb], centroids: &[[f64; 3]]) -> usize {
        let slice = &mut self.order[start..end];
        let aabb = slice.iter().fold(Aabb::empty(), |b, &t| b.union(boxes[t as usize]));
        let id = self.nodes.len();
        let count = end - start;
        if count <= LEAF_SIZE {
            self.nodes.push(BvhNode {
                aabb,
                kind: BvhNodeKind::Leaf { start, count },
            });
            return id;
        }
        let cbox = slice
            .iter()
            .fold(Aabb::empty(), |b, &t| b.grow(centroids[t as usize].into()));
        let axis = cbox.longest_axis();
        // ties broken by index so the build is deterministic
        slice.sort_by(|&a, &b| {
            centroids[a as usize][axis]
                .total_cmp(&centroids[b as usize][axis])
                .then(a.cmp(&b))
        });
        let mid = start + count / 2;
        self.nodes.push(BvhNode {
            aabb,
            kind: BvhNodeKind::Leaf { start, count: 0 },
        });
        let left = self.build_range(start, mid, boxes, centroids);
        let right = self.build_range(mid, end, boxes, centroids);
        self.nodes[id].kind = BvhNodeKind::Internal { left, right };
        id
    }

    pub fn root(&self) -> &BvhNode {
        &self.nodes[0]
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &BvhNode {
        &self.nodes[i]
    }

    /// Triangle indices permuted so every leaf owns a contiguous range.
    pub fn triangle_order(&self) -> &[u32] {
        &self.order
    }

    pub fn leaf_triangles(&self, node: &BvhNode) -> &[u32] {
        match node.kind {
            BvhNodeKind::Leaf { start, count } => &self.order[start..start + count],
            BvhNodeKind::Internal { .. } => &[],
        }
    }

    /// All leaves, left to right.
    pub fn leaves(&self) -> impl Iterator<Item = &BvhNode> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.kind, BvhNodeKind::Leaf { .. }))
    }

    /// Calls `visit` for each pair of leaf triangles whose leaf boxes overlap.
    /// Stops early and returns `true` as soon as `visit` does.
    pub fn any_leaf_pair(&self, other: &Bvh, mut visit: impl FnMut(u32, u32) -> bool) -> bool {
        let mut stack = vec![(0usize, 0usize)];
        while let Some((a, b)) = stack.pop() {
            let (na, nb) = (&self.nodes[a], &other.nodes[b]);
            if !na.aabb.overlaps(&nb.aabb) {
                continue;
            }
            match (&na.kind, &nb.kind) {
                (BvhNodeKind::Leaf { .. }, BvhNodeKind::Leaf { .. }) => {
                    for &ta in self.leaf_triangles(na) {
                        for &tb in other.leaf_triangles(nb) {
                            if visit(ta, tb) {
                                return true;
                            }
                        }
                    }
                }
                (BvhNodeKind::Leaf { .. }, BvhNodeKind::Internal { left, right }) => {
                    stack.push((a, *right));
                    stack.push((a, *left));
                }
                (BvhNodeKind::Internal { left, right }, BvhNodeKind::Leaf { .. }) => {
                    stack.push((*right, b));
                    stack.push((*left, b));
                }
                (BvhNodeKind::Internal { left: la, right: ra }, BvhNodeKind::Internal { left: lb, right: rb }) => {
                    // descend the larger box first
                    let va = na.aabb.extents().length_squared();
                    let vb = nb.aabb.extents().length_squared();
                    if va >= vb {
                        stack.push((*ra, b));
                        stack.push((*la, b));
                    } else {
                        stack.push((a, *rb));
                        stack.push((a, *lb));
                    }
                }
            }
        }
        false
    }
}
