//! Exact signed distances for the closed primitives, in the shape frame.

use crate::math::{Real, Vec3};

pub(super) fn plane(normal: &Vec3, p: &Vec3) -> (Real, Vec3) {
    (p.dot(normal), *normal)
}

pub(super) fn sphere(radius: Real, p: &Vec3) -> (Real, Vec3) {
    let r = p.norm();
    let n = if r > 1e-12 { p / r } else { Vec3::x() };
    (r - radius, n)
}

pub(super) fn cuboid(half: &Vec3, p: &Vec3) -> (Real, Vec3) {
    let q = p.abs() - half;
    let sign = p.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
    let outside = q.map(|v| v.max(0.0));
    let out_len = outside.norm();
    if out_len > 0.0 {
        return (out_len, outside.component_mul(&sign) / out_len);
    }
    // Inside: nearest face is the axis with the largest (least negative) q.
    let mut axis = 0;
    for a in 1..3 {
        if q[a] > q[axis] {
            axis = a;
        }
    }
    let mut n = Vec3::zeros();
    n[axis] = sign[axis];
    (q[axis], n)
}
