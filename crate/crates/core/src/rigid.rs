//! Rigid-body motion: keyframed kinematic trajectories for tools and free
//! bodies driven by contact impulses.

use thiserror::Error;

use crate::geometry::ShapePose;
use crate::math::{Quat, Real, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RigidError {
    #[error("trajectory needs at least one keyframe")]
    NoKeyframes,
    #[error("keyframe times must be strictly increasing and finite")]
    UnorderedKeyframes,
    #[error("free body needs positive mass and inertia")]
    BadInertia,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub time: Real,
    pub position: Vec3,
    pub orientation: Quat,
}

/// Piecewise pose path: linear in position, spherical in orientation.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicTrajectory {
    keyframes: Vec<Keyframe>,
}

impl KinematicTrajectory {
    pub fn new(keyframes: Vec<Keyframe>) -> Result<Self, RigidError> {
        if keyframes.is_empty() {
            return Err(RigidError::NoKeyframes);
        }
        if keyframes.iter().any(|k| !k.time.is_finite()) || keyframes.windows(2).any(|w| !(w[1].time > w[0].time)) {
            return Err(RigidError::UnorderedKeyframes);
        }
        Ok(Self { keyframes })
    }

    pub fn keyframes(&self) -> &[Keyframe] {
        &self.keyframes
    }

    /// Pose at time `t`, clamped outside the keyframe range with zero
    /// velocity there.
    pub fn evaluate(&self, t: Real) -> ShapePose {
        let first = &self.keyframes[0];
        let last = self.keyframes.last().unwrap();
        if self.keyframes.len() == 1 || t < first.time {
            return still(first);
        }
        if t >= last.time {
            return still(last);
        }
        let seg = self.keyframes.partition_point(|k| k.time <= t) - 1;
        let (a, b) = (&self.keyframes[seg], &self.keyframes[seg + 1]);
        let span = b.time - a.time;
        let alpha = (t - a.time) / span;
        let position = a.position.lerp(&b.position, alpha);
        let orientation = a.orientation.try_slerp(&b.orientation, alpha, 1e-9).unwrap_or(a.orientation);
        let rel = b.orientation * a.orientation.inverse();
        let angular_velocity = rel.scaled_axis() / span;
        ShapePose {
            position,
            orientation,
            linear_velocity: (b.position - a.position) / span,
            angular_velocity,
        }
    }
}

fn still(k: &Keyframe) -> ShapePose {
    ShapePose {
        position: k.position,
        orientation: k.orientation,
        linear_velocity: Vec3::zeros(),
        angular_velocity: Vec3::zeros(),
    }
}

/// Rigid body integrated from contact impulses and gravity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeBody {
    pub mass: Real,
    /// Principal inertia in the body frame.
    pub inertia_diag: Vec3,
    pub pose: ShapePose,
}

impl FreeBody {
    pub fn new(mass: Real, inertia_diag: Vec3, pose: ShapePose) -> Result<Self, RigidError> {
        if !(mass > 0.0) || inertia_diag.iter().any(|i| !(*i > 0.0)) {
            return Err(RigidError::BadInertia);
        }
        Ok(Self {
            mass,
            inertia_diag,
            pose,
        })
    }

    /// Solid sphere of uniform density.
    pub fn solid_sphere(mass: Real, radius: Real, pose: ShapePose) -> Result<Self, RigidError> {
        let i = 0.4 * mass * radius * radius;
        Self::new(mass, Vec3::repeat(i), pose)
    }

    /// Solid box of uniform density.
    pub fn solid_box(mass: Real, half_extents: Vec3, pose: ShapePose) -> Result<Self, RigidError> {
        let s = half_extents * 2.0;
        let k = mass / 12.0;
        Self::new(
            mass,
            Vec3::new(
                k * (s.y * s.y + s.z * s.z),
                k * (s.x * s.x + s.z * s.z),
                k * (s.x * s.x + s.y * s.y),
            ),
            pose,
        )
    }

    pub fn momentum(&self) -> nalgebra::Vector3<f64> {
        self.pose.linear_velocity.cast::<f64>() * self.mass as f64
    }
}

/// Semi-implicit Euler update of a free body.
pub fn integrate_free_body(
    body: &mut FreeBody,
    impulse: &nalgebra::Vector3<f64>,
    torque_impulse: &nalgebra::Vector3<f64>,
    gravity: &Vec3,
    dt: Real,
) {
    let pose = &mut body.pose;
    let v = pose.linear_velocity.cast::<f64>() + impulse / body.mass as f64 + gravity.cast::<f64>() * dt as f64;
    pose.linear_velocity = v.cast();

    let r = pose.orientation.to_rotation_matrix();
    let local_torque = r.inverse_transform_vector(&torque_impulse.cast::<Real>());
    let dw_local = local_torque.component_div(&body.inertia_diag);
    pose.angular_velocity += r.transform_vector(&dw_local);

    pose.position += pose.linear_velocity * dt;
    let spin = Quat::from_scaled_axis(pose.angular_velocity * dt);
    pose.orientation = Quat::new_normalize((spin * pose.orientation).into_inner());
}

/// How a shape moves over time.
#[derive(Debug, Clone, PartialEq)]
pub enum ShapeMotion {
    Static,
    Kinematic(KinematicTrajectory),
    /// Driven frame by frame from outside; velocity is set so the shape
    /// reaches the target at the end of the frame.
    Target { target: ShapePose },
    Free(FreeBody),
}
