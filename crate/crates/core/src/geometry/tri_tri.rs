//! Triangle/triangle overlap via Möller's interval test.
//!
//! Triangles are closed point sets: shared edges, shared vertices and
//! touching faces all count as intersecting. No epsilon snapping is applied;
//! plane-side tests compare against exact zero.

use crate::math::Vec3;

pub type Triangle = [Vec3; 3];

/// `true` iff the closed triangles share at least one point.
pub fn tri_tri_intersect(t1: &Triangle, t2: &Triangle) -> bool {
    let n2 = (t2[1] - t2[0]).cross(t2[2] - t2[0]);
    let d2 = -n2.dot(t2[0]);
    let du = t1.map(|p| n2.dot(p) + d2);
    if same_strict_side(du) {
        return false;
    }

    let n1 = (t1[1] - t1[0]).cross(t1[2] - t1[0]);
    let d1 = -n1.dot(t1[0]);
    let dv = t2.map(|p| n1.dot(p) + d1);
    if same_strict_side(dv) {
        return false;
    }

    if du.iter().all(|&d| d == 0.0) || dv.iter().all(|&d| d == 0.0) {
        return coplanar_overlap(n1, t1, t2);
    }

    // Both triangles straddle the other's plane: compare their intervals on
    // the intersection line, projected onto its dominant axis.
    let dir = n1.cross(n2);
    let axis = dominant_axis(dir);
    let pu = t1.map(|p| p[axis]);
    let pv = t2.map(|p| p[axis]);

    let Some((a0, a1)) = line_interval(pu, du) else {
        return coplanar_overlap(n1, t1, t2);
    };
    let Some((b0, b1)) = line_interval(pv, dv) else {
        return coplanar_overlap(n1, t1, t2);
    };
    let (a0, a1) = if a0 <= a1 { (a0, a1) } else { (a1, a0) };
    let (b0, b1) = if b0 <= b1 { (b0, b1) } else { (b1, b0) };
    !(a1 < b0 || b1 < a0)
}

fn same_strict_side(d: [f64; 3]) -> bool {
    (d[0] > 0.0 && d[1] > 0.0 && d[2] > 0.0) || (d[0] < 0.0 && d[1] < 0.0 && d[2] < 0.0)
}

fn dominant_axis(v: Vec3) -> usize {
    let (x, y, z) = (v.x.abs(), v.y.abs(), v.z.abs());
    if x >= y && x >= z {
        0
    } else if y >= z {
        1
    } else {
        2
    }
}

/// Endpoints of the segment where a triangle crosses the other plane,
/// parametrized by the projections `p` of its vertices. `d` holds the
/// signed plane distances. `None` when all distances vanish.
fn line_interval(p: [f64; 3], d: [f64; 3]) -> Option<(f64, f64)> {
    // pick the vertex that sits alone on its side of the plane
    let lone = if d[0] * d[1] > 0.0 {
        2
    } else if d[0] * d[2] > 0.0 {
        1
    } else if d[1] * d[2] > 0.0 || d[0] != 0.0 {
        0
    } else if d[1] != 0.0 {
        1
    } else if d[2] != 0.0 {
        2
    } else {
        return None;
    };
    let (a, b) = ((lone + 1) % 3, (lone + 2) % 3);
    let cut = |o: usize| {
        let denom = d[lone] - d[o];
        if denom == 0.0 {
            // both on the plane: the vertex itself is the endpoint
            p[o]
        } else {
            p[lone] + (p[o] - p[lone]) * d[lone] / denom
        }
    };
    Some((cut(a), cut(b)))
}

/// 2D overlap of two triangles lying in the plane with normal `n`.
fn coplanar_overlap(n: Vec3, t1: &Triangle, t2: &Triangle) -> bool {
    // drop the coordinate where the normal is largest
    let (i, j) = match dominant_axis(n) {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let a = t1.map(|p| [p[i], p[j]]);
    let b = t2.map(|p| [p[i], p[j]]);
    triangles_overlap_2d(&a, &b)
}

type P2 = [f64; 2];

fn orient(a: P2, b: P2, c: P2) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment(a: P2, b: P2, p: P2) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// Closed segment intersection.
fn segments_intersect(p1: P2, p2: P2, q1: P2, q2: P2) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// Closed point-in-triangle, either winding.
fn point_in_triangle(p: P2, t: &[P2; 3]) -> bool {
    let s0 = orient(t[0], t[1], p);
    let s1 = orient(t[1], t[2], p);
    let s2 = orient(t[2], t[0], p);
    (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0)
}

fn triangles_overlap_2d(a: &[P2; 3], b: &[P2; 3]) -> bool {
    for i in 0..3 {
        for j in 0..3 {
            if segments_intersect(a[i], a[(i + 1) % 3], b[j], b[(j + 1) % 3]) {
                return true;
            }
        }
    }
    point_in_triangle(a[0], b) || point_in_triangle(b[0], a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Triangle {
        [a.into(), b.into(), c.into()]
    }

    #[test]
    fn coplanar_disjoint_is_false() {
        let a = t([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = t([2.0, 2.0, 0.0], [3.0, 2.0, 0.0], [2.0, 3.0, 0.0]);
        assert!(!tri_tri_intersect(&a, &b));
        assert!(!tri_tri_intersect(&b, &a));
    }

    #[test]
    fn coplanar_nested_is_true() {
        let a = t([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = t([0.1, 0.1, 0.0], [0.3, 0.1, 0.0], [0.1, 0.3, 0.0]);
        assert!(tri_tri_intersect(&a, &b));
        assert!(tri_tri_intersect(&b, &a));
    }

    #[test]
    fn perpendicular_crossing_is_true() {
        let a = t([-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, 0.0]);
        let b = t([0.0, 0.0, -1.0], [0.0, 0.0, 1.0], [0.0, 1.5, 0.0]);
        assert!(tri_tri_intersect(&a, &b));
    }

    #[test]
    fn parallel_planes_are_false() {
        let a = t([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = t([0.0, 0.0, 0.5], [1.0, 0.0, 0.5], [0.0, 1.0, 0.5]);
        assert!(!tri_tri_intersect(&a, &b));
    }

    #[test]
    fn shared_edge_counts_as_contact() {
        let a = t([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = t([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]);
        assert!(tri_tri_intersect(&a, &b));
    }

    #[test]
    fn vertex_touching_face_counts_as_contact() {
        let a = t([-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [0.0, 1.0, 0.0]);
        let b = t([0.0, 0.0, 0.0], [0.5, 0.0, 1.0], [0.0, 0.5, 1.0]);
        assert!(tri_tri_intersect(&a, &b));
        let lifted = b.map(|p| p + Vec3::new(0.0, 0.0, 1e-9));
        assert!(!tri_tri_intersect(&a, &lifted));
    }

    #[test]
    fn plane_crossing_without_overlap_is_false() {
        // b pierces a's plane outside of a
        let a = t([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let b = t([2.0, 2.0, -1.0], [2.0, 2.0, 1.0], [3.0, 2.0, 0.0]);
        assert!(!tri_tri_intersect(&a, &b));
    }
}
