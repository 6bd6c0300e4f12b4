//! Two-sided cutting surface with a blunt spine.

use std::collections::HashMap;

use crate::math::{Real, Vec3};

use super::{GeometryError, SdfSample, SlicerRegion};

#[derive(Debug, Clone, PartialEq)]
pub struct SlicerMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    spine_edges: Vec<[u32; 2]>,
    spine_radius: Real,
    normals: Vec<Vec3>,
}

impl SlicerMesh {
    /// Planar quad `v0 v1 v2 v3` whose edge `spine_edge` (from vertex
    /// `spine_edge` to the next) is the blunt side.
    pub fn quad(vertices: [Vec3; 4], spine_edge: usize, spine_radius: Real) -> Result<Self, GeometryError> {
        if spine_edge > 3 {
            return Err(GeometryError::DegenerateSlicer(format!("spine edge {spine_edge} out of range")));
        }
        let n = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0]));
        let scale = (vertices[2] - vertices[0]).norm().max(1e-12);
        if n.norm() > 0.0 && ((vertices[3] - vertices[0]).dot(&n.normalize())).abs() > 1e-4 * scale {
            return Err(GeometryError::DegenerateSlicer("quad is not planar".into()));
        }
        let e = spine_edge as u32;
        Self::triangle_mesh(
            vertices.to_vec(),
            vec![[0, 1, 2], [0, 2, 3]],
            vec![[e, (e + 1) % 4]],
            spine_radius,
        )
    }

    /// Open triangle mesh with the listed boundary edges forming the spine.
    pub fn triangle_mesh(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        spine_edges: Vec<[u32; 2]>,
        spine_radius: Real,
    ) -> Result<Self, GeometryError> {
        if !(spine_radius > 0.0) {
            return Err(GeometryError::NonPositive("spine radius"));
        }
        if triangles.is_empty() {
            return Err(GeometryError::DegenerateSlicer("no triangles".into()));
        }
        if spine_edges.is_empty() {
            return Err(GeometryError::DegenerateSlicer("no spine edges".into()));
        }
        let nv = vertices.len() as u32;
        let mut edge_use: HashMap<(u32, u32), u32> = HashMap::new();
        let mut normals = Vec::with_capacity(triangles.len());
        for t in &triangles {
            if t.iter().any(|&i| i >= nv) {
                return Err(GeometryError::DegenerateSlicer("triangle index out of range".into()));
            }
            let [a, b, c] = t.map(|i| vertices[i as usize]);
            let n = (b - a).cross(&(c - a));
            if !(n.norm() > 1e-12) {
                return Err(GeometryError::DegenerateSlicer("zero-area triangle".into()));
            }
            normals.push(n.normalize());
            for (i, j) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *edge_use.entry((i.min(j), i.max(j))).or_default() += 1;
            }
        }
        if edge_use.values().any(|&n| n > 2) {
            return Err(GeometryError::DegenerateSlicer("non-manifold edge".into()));
        }
        for &[i, j] in &spine_edges {
            if edge_use.get(&(i.min(j), i.max(j))) != Some(&1) {
                return Err(GeometryError::DegenerateSlicer(format!("spine edge ({i}, {j}) is not a boundary edge")));
            }
        }
        Ok(Self {
            vertices,
            triangles,
            spine_edges,
            spine_radius,
            normals,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn spine_edges(&self) -> &[[u32; 2]] {
        &self.spine_edges
    }

    pub fn spine_radius(&self) -> Real {
        self.spine_radius
    }

    /// Query in the slicer frame.
    pub(super) fn query(&self, p: &Vec3, halfwidth: Real) -> SdfSample {
        let mut best = (Real::INFINITY, Vec3::zeros(), 0usize);
        for (t, tri) in self.triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|i| self.vertices[i as usize]);
            let q = closest_point_on_triangle(p, &a, &b, &c);
            let d2 = (p - q).norm_squared();
            if d2 < best.0 {
                best = (d2, q, t);
            }
        }
        let (_, q, tri) = best;
        let tri_normal = self.normals[tri];

        let (spine_q, _) = self.nearest_spine_point(&q);
        if (q - spine_q).norm() < self.spine_radius {
            let (axis, r) = self.nearest_spine_point(p);
            let normal = if r > 1e-9 { (p - axis) / r } else { tri_normal };
            return SdfSample {
                distance: r - self.spine_radius,
                normal,
                tangent: None,
                region: Some(SlicerRegion::Spine),
                at_curve_end: false,
            };
        }

        let side = if (p - q).dot(&tri_normal) >= 0.0 { 1.0 } else { -1.0 };
        let distance = side * (p - q).norm();
        let region = if distance.abs() < halfwidth {
            SlicerRegion::Edge
        } else {
            SlicerRegion::Bulk
        };
        SdfSample {
            distance,
            normal: tri_normal * side,
            tangent: None,
            region: Some(region),
            at_curve_end: false,
        }
    }

    fn nearest_spine_point(&self, p: &Vec3) -> (Vec3, Real) {
        let mut best = (Vec3::zeros(), Real::INFINITY);
        for &[i, j] in &self.spine_edges {
            let (q, _) = closest_point_on_segment(p, &self.vertices[i as usize], &self.vertices[j as usize]);
            let d = (p - q).norm();
            if d < best.1 {
                best = (q, d);
            }
        }
        best
    }
}

/// Closest point on segment `ab` and its parameter in `[0, 1]`.
pub(crate) fn closest_point_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> (Vec3, Real) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 <= 0.0 {
        return (*a, 0.0);
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * s, s)
}

/// Region-based closest point on a triangle.
pub(crate) fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Unit quad in the xy plane, spine along the top edge y = 1.
    fn unit_quad(r: Real) -> SlicerMesh {
        SlicerMesh::quad(
            [
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
            ],
            2,
            r,
        )
        .unwrap()
    }

    #[test]
    fn two_sided_distance() {
        let m = unit_quad(0.05);
        let s = m.query(&Vec3::new(0.5, 0.3, 0.01), 0.1);
        assert_relative_eq!(s.distance, 0.01, epsilon = 1e-6);
        assert_eq!(s.region, Some(SlicerRegion::Edge));
        assert_relative_eq!(s.normal, Vec3::z());
        let s = m.query(&Vec3::new(0.5, 0.3, -0.01), 0.1);
        assert_relative_eq!(s.distance, -0.01, epsilon = 1e-6);
        assert_relative_eq!(s.normal, -Vec3::z());
        let s = m.query(&Vec3::new(0.5, 0.3, -0.5), 0.1);
        assert_eq!(s.region, Some(SlicerRegion::Bulk));
    }

    #[test]
    fn spine_field() {
        let r = 0.05;
        let m = unit_quad(r);
        let s = m.query(&Vec3::new(0.5, 1.0 + 1.5 * r, 0.0), 0.1);
        assert_eq!(s.region, Some(SlicerRegion::Spine));
        assert_relative_eq!(s.distance, 0.5 * r, epsilon = 1e-6);
        assert_relative_eq!(s.normal, Vec3::y(), epsilon = 1e-6);
        let s = m.query(&Vec3::new(0.5, 1.0, 0.02), 0.1);
        assert_eq!(s.region, Some(SlicerRegion::Spine));
        assert!(s.distance < 0.0);
    }

    #[test]
    fn rejects_degenerate() {
        let z = Vec3::zeros();
        assert!(SlicerMesh::quad([z, Vec3::x(), Vec3::x() * 2.0, Vec3::x() * 3.0], 0, 0.1).is_err());
        assert!(SlicerMesh::quad(
            [z, Vec3::x(), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 1.0, 0.5)],
            0,
            0.1
        )
        .is_err());
        let q = unit_quad(0.1);
        // Diagonal is interior, not a boundary edge.
        assert!(SlicerMesh::triangle_mesh(q.vertices.clone(), q.triangles.clone(), vec![[0, 2]], 0.1).is_err());
        assert!(SlicerMesh::triangle_mesh(q.vertices.clone(), q.triangles.clone(), vec![[0, 1]], 0.0).is_err());
    }

    #[test]
    fn triangle_closest_point_regions() {
        let a = Vec3::zeros();
        let b = Vec3::x();
        let c = Vec3::y();
        assert_eq!(closest_point_on_triangle(&Vec3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
        assert_relative_eq!(
            closest_point_on_triangle(&Vec3::new(0.2, 0.2, 3.0), &a, &b, &c),
            Vec3::new(0.2, 0.2, 0.0)
        );
        assert_relative_eq!(
            closest_point_on_triangle(&Vec3::new(1.0, 1.0, 0.0), &a, &b, &c),
            Vec3::new(0.5, 0.5, 0.0)
        );
    }
}
