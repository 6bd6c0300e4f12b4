//! One-dimensional suturing geometries: circular arc needles and polyline
//! threads.

use std::f32::consts::TAU;

use crate::math::{Real, Vec3};

use super::slicer::closest_point_on_segment;
use super::{any_perpendicular, GeometryError, SdfSample};

/// Circular arc of `radius` in the local xy plane, centred at the origin,
/// spanning angles `[0, angle]` from local +x about local +z.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcGeometry {
    radius: Real,
    angle: Real,
}

impl ArcGeometry {
    pub fn new(radius: Real, angle: Real) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::NonPositive("arc radius"));
        }
        if !(angle > 0.0 && angle <= TAU + 1e-6) {
            return Err(GeometryError::BadArcAngle(angle));
        }
        Ok(Self {
            radius,
            angle: angle.min(TAU),
        })
    }

    pub fn radius(&self) -> Real {
        self.radius
    }

    pub fn angle(&self) -> Real {
        self.angle
    }

    fn full_circle(&self) -> bool {
        self.angle >= TAU - 1e-6
    }

    pub fn point_at(&self, theta: Real) -> Vec3 {
        Vec3::new(theta.cos(), theta.sin(), 0.0) * self.radius
    }

    pub fn tangent_at(&self, theta: Real) -> Vec3 {
        Vec3::new(-theta.sin(), theta.cos(), 0.0)
    }

    pub(super) fn query(&self, p: &Vec3) -> SdfSample {
        let planar = (p.x * p.x + p.y * p.y).sqrt();
        let mut theta = if planar < 1e-9 { 0.0 } else { p.y.atan2(p.x) };
        if theta < 0.0 {
            theta += TAU;
        }
        // Past a free end the tangent follows the circle the arc lies on, so
        // material ahead of the tip sees the tip moving along its own track.
        let tangent = self.tangent_at(theta);
        let mut at_end = false;
        if !self.full_circle() && theta > self.angle {
            let d_end = (p - self.point_at(self.angle)).norm();
            let d_start = (p - self.point_at(0.0)).norm();
            theta = if d_end <= d_start { self.angle } else { 0.0 };
            at_end = true;
        }
        let q = self.point_at(theta);
        let d = p - q;
        let dist = d.norm();
        let normal = if dist < 1e-9 {
            Vec3::new(theta.cos(), theta.sin(), 0.0)
        } else {
            d / dist
        };
        SdfSample {
            distance: dist,
            normal,
            tangent: Some(tangent),
            region: None,
            at_curve_end: at_end,
        }
    }
}

/// Open chain of line segments through `vertices`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Vec3>,
}

impl Polyline {
    pub fn new(vertices: Vec<Vec3>) -> Result<Self, GeometryError> {
        if vertices.len() < 2 || vertices.windows(2).any(|w| !((w[1] - w[0]).norm() > 1e-12)) {
            return Err(GeometryError::ShortPolyline);
        }
        Ok(Self { vertices })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    fn segment_dir(&self, s: usize) -> Vec3 {
        (self.vertices[s + 1] - self.vertices[s]).normalize()
    }

    pub(super) fn query(&self, p: &Vec3) -> SdfSample {
        let last = self.vertices.len() - 2;
        let mut best = (Real::INFINITY, Vec3::zeros(), 0usize, 0.0);
        for s in 0..=last {
            let (q, t) = closest_point_on_segment(p, &self.vertices[s], &self.vertices[s + 1]);
            let d2 = (p - q).norm_squared();
            if d2 < best.0 {
                best = (d2, q, s, t);
            }
        }
        let (_, q, s, t) = best;
        let mut at_end = false;
        let tangent = if t <= 0.0 {
            if s == 0 {
                at_end = true;
                self.segment_dir(0)
            } else {
                average_dir(&self.segment_dir(s - 1), &self.segment_dir(s))
            }
        } else if t >= 1.0 {
            if s == last {
                at_end = true;
                self.segment_dir(last)
            } else {
                average_dir(&self.segment_dir(s), &self.segment_dir(s + 1))
            }
        } else {
            self.segment_dir(s)
        };
        let d = p - q;
        let dist = d.norm();
        let normal = if dist < 1e-9 { any_perpendicular(&tangent) } else { d / dist };
        SdfSample {
            distance: dist,
            normal,
            tangent: Some(tangent),
            region: None,
            at_curve_end: at_end,
        }
    }
}

fn average_dir(a: &Vec3, b: &Vec3) -> Vec3 {
    let m = a + b;
    if m.norm() > 1e-9 {
        m.normalize()
    } else {
        *b
    }
}
