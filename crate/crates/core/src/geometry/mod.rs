//! Rigid shapes and their distance-field queries.
//!
//! Closed primitives report signed distance (negative inside). Slicers report
//! a per-side signed distance to their cutting surface plus a circular field
//! around the blunt spine. Curves (arc needles, thread polylines) report the
//! unsigned distance to the nearest projected point and the curve tangent.

mod curve;
mod primitive;
mod slicer;

pub use curve::{ArcGeometry, Polyline};
pub use slicer::SlicerMesh;

use thiserror::Error;

use crate::math::{Quat, Real, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("arc angle must lie in (0, 2pi], got {0}")]
    BadArcAngle(Real),
    #[error("polyline needs at least 2 distinct vertices")]
    ShortPolyline,
    #[error("degenerate slicer: {0}")]
    DegenerateSlicer(String),
    #[error("normal must be non-zero")]
    ZeroNormal,
    #[error("friction must be >= 0 and drag retention within [0, 1]")]
    BadContactParameters,
}

/// Where a slicer query landed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlicerRegion {
    /// Beyond the fattened band around the cutting surface.
    Bulk,
    /// Inside the band around the sharp part of the surface.
    Edge,
    /// Governed by the circular field around the spine.
    Spine,
}

/// Result of one distance query, in world space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdfSample {
    pub distance: Real,
    pub normal: Vec3,
    /// Curve tangent at the projected point (curves only).
    pub tangent: Option<Vec3>,
    /// Slicer region (slicers only).
    pub region: Option<SlicerRegion>,
    /// The nearest point is a free end of the curve.
    pub at_curve_end: bool,
}

impl SdfSample {
    fn surface(distance: Real, normal: Vec3) -> Self {
        Self {
            distance,
            normal,
            tangent: None,
            region: None,
            at_curve_end: false,
        }
    }
}

/// Pose and rigid velocity of a shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapePose {
    pub position: Vec3,
    pub orientation: Quat,
    pub linear_velocity: Vec3,
    pub angular_velocity: Vec3,
}

impl Default for ShapePose {
    fn default() -> Self {
        Self::at(Vec3::zeros())
    }
}

impl ShapePose {
    pub fn at(position: Vec3) -> Self {
        Self {
            position,
            orientation: Quat::identity(),
            linear_velocity: Vec3::zeros(),
            angular_velocity: Vec3::zeros(),
        }
    }

    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.orientation.inverse_transform_vector(&(p - self.position))
    }

    pub fn to_world_dir(&self, v: &Vec3) -> Vec3 {
        self.orientation.transform_vector(v)
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.orientation.transform_vector(p) + self.position
    }
}

/// Velocity of the rigid body at a world point.
pub fn rigid_point_velocity(pose: &ShapePose, point: &Vec3) -> Vec3 {
    pose.linear_velocity + pose.angular_velocity.cross(&(point - pose.position))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    /// Half-space below the plane through the shape origin.
    Plane { normal: Vec3 },
    Sphere { radius: Real },
    Box { half_extents: Vec3 },
    QuadSlicer(SlicerMesh),
    TriangleMeshSlicer(SlicerMesh),
    Arc(ArcGeometry),
    ConnectedLineSegments(Polyline),
}

/// How the contact pass treats a geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryClass {
    Closed,
    Slicer,
    Curve,
}

impl Geometry {
    pub fn plane(normal: Vec3) -> Result<Self, GeometryError> {
        let n = normal.norm();
        if !(n > 1e-12) {
            return Err(GeometryError::ZeroNormal);
        }
        Ok(Geometry::Plane { normal: normal / n })
    }

    pub fn sphere(radius: Real) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::NonPositive("sphere radius"));
        }
        Ok(Geometry::Sphere { radius })
    }

    pub fn cuboid(half_extents: Vec3) -> Result<Self, GeometryError> {
        if half_extents.iter().any(|h| !(*h > 0.0)) {
            return Err(GeometryError::NonPositive("box half extents"));
        }
        Ok(Geometry::Box { half_extents })
    }

    pub fn class(&self) -> GeometryClass {
        match self {
            Geometry::Plane { .. } | Geometry::Sphere { .. } | Geometry::Box { .. } => GeometryClass::Closed,
            Geometry::QuadSlicer(_) | Geometry::TriangleMeshSlicer(_) => GeometryClass::Slicer,
            Geometry::Arc(_) | Geometry::ConnectedLineSegments(_) => GeometryClass::Curve,
        }
    }
}

/// Closed primitive query (plane, sphere, box). Returns `None` for other
/// geometries.
pub fn sdf_primitive(geometry: &Geometry, pose: &ShapePose, point: &Vec3) -> Option<SdfSample> {
    let local = pose.to_local(point);
    let (d, n) = match geometry {
        Geometry::Plane { normal } => primitive::plane(normal, &local),
        Geometry::Sphere { radius } => primitive::sphere(*radius, &local),
        Geometry::Box { half_extents } => primitive::cuboid(half_extents, &local),
        _ => return None,
    };
    Some(SdfSample::surface(d, pose.to_world_dir(&n)))
}

/// Slicer query with the given fattened-band half width.
pub fn slicer_query(geometry: &Geometry, pose: &ShapePose, point: &Vec3, halfwidth: Real) -> Option<SdfSample> {
    match geometry {
        Geometry::QuadSlicer(mesh) | Geometry::TriangleMeshSlicer(mesh) => {
            let mut s = mesh.query(&pose.to_local(point), halfwidth);
            s.normal = pose.to_world_dir(&s.normal);
            Some(s)
        }
        _ => None,
    }
}

/// Arc or polyline query.
pub fn curve_query(geometry: &Geometry, pose: &ShapePose, point: &Vec3) -> Option<SdfSample> {
    let local = pose.to_local(point);
    let mut s = match geometry {
        Geometry::Arc(arc) => arc.query(&local),
        Geometry::ConnectedLineSegments(line) => line.query(&local),
        _ => return None,
    };
    s.normal = pose.to_world_dir(&s.normal);
    s.tangent = s.tangent.map(|t| pose.to_world_dir(&t));
    Some(s)
}

/// A rigid shape taking part in contact.
#[derive(Debug, Clone, PartialEq)]
pub struct Shape {
    pub id: u32,
    pub geometry: Geometry,
    pub pose: ShapePose,
    /// Kinetic friction coefficient.
    pub mu_k: Real,
    /// Tangential velocity retention, 0 = fully sticky.
    pub c_d: Real,
    /// Half width of the contact band for slicers and curves.
    pub collision_halfwidth: Real,
}

impl Shape {
    pub fn new(
        id: u32,
        geometry: Geometry,
        pose: ShapePose,
        mu_k: Real,
        c_d: Real,
        collision_halfwidth: Real,
    ) -> Result<Self, GeometryError> {
        if !(mu_k >= 0.0) || !(0.0..=1.0).contains(&c_d) {
            return Err(GeometryError::BadContactParameters);
        }
        if !(collision_halfwidth > 0.0) {
            return Err(GeometryError::NonPositive("collision_halfwidth"));
        }
        Ok(Self {
            id,
            geometry,
            pose,
            mu_k,
            c_d,
            collision_halfwidth,
        })
    }

    pub fn query(&self, point: &Vec3) -> SdfSample {
        match self.geometry.class() {
            GeometryClass::Closed => sdf_primitive(&self.geometry, &self.pose, point),
            GeometryClass::Slicer => slicer_query(&self.geometry, &self.pose, point, self.collision_halfwidth),
            GeometryClass::Curve => curve_query(&self.geometry, &self.pose, point),
        }
        .expect("geometry class matches query")
    }

    pub fn velocity_at(&self, point: &Vec3) -> Vec3 {
        rigid_point_velocity(&self.pose, point)
    }
}

/// Unit vector perpendicular to `t`, chosen deterministically.
pub(crate) fn any_perpendicular(t: &Vec3) -> Vec3 {
    let a = t.abs();
    let axis = if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    t.cross(&axis).normalize()
}
