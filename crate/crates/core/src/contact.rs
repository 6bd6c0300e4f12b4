//! Grid-level contact against rigid shapes, two-way impulse bookkeeping and
//! particle push-out.

use crate::geometry::{GeometryClass, SdfSample, Shape, SlicerRegion};
use crate::math::{Real, Vec3};
use crate::solver::transfer::par_map;
use crate::solver::GridContact;
use crate::state::{Grid, Particles, MASS_EPSILON};

/// Per-shape momentum exchanged with the soft bodies.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ContactAccumulator {
    /// Momentum delivered to the shape (kg m/s).
    pub impulse: nalgebra::Vector3<f64>,
    /// Angular momentum delivered to the shape about its position.
    pub torque_impulse: nalgebra::Vector3<f64>,
    pub contact_node_count: u64,
    /// Sum of `m |delta_v|` over every correction, regardless of direction.
    pub resistive: f64,
}

impl ContactAccumulator {
    pub fn reset(&mut self) {
        *self = Self::default();
    }

    fn record(&mut self, mass: Real, dv: &Vec3, lever: &Vec3) {
        let m = mass as f64;
        let dv = dv.cast::<f64>();
        let lever = lever.cast::<f64>();
        self.impulse -= dv * m;
        self.torque_impulse -= lever.cross(&(dv * m));
        self.resistive += m * dv.norm();
    }

    fn merge(&mut self, other: &Self) {
        self.impulse += other.impulse;
        self.torque_impulse += other.torque_impulse;
        self.contact_node_count += other.contact_node_count;
        self.resistive += other.resistive;
    }
}

impl std::ops::AddAssign<&ContactAccumulator> for ContactAccumulator {
    fn add_assign(&mut self, rhs: &ContactAccumulator) {
        self.merge(rhs);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams {
    pub mu_k: Real,
    pub c_d: Real,
    pub collision_halfwidth: Real,
}

impl From<&Shape> for ContactParams {
    fn from(s: &Shape) -> Self {
        Self {
            mu_k: s.mu_k,
            c_d: s.c_d,
            collision_halfwidth: s.collision_halfwidth,
        }
    }
}

/// Friction and drag on a tangential relative velocity, pressed by `v_n_press`
/// (magnitude of the removed normal part).
#[inline]
fn friction_drag(v_tg: &Vec3, v_n_press: Real, params: &ContactParams) -> Vec3 {
    let t = v_tg.norm();
    if t < 1e-12 {
        return Vec3::zeros();
    }
    let scale = (1.0 - params.mu_k * v_n_press / t).max(0.0);
    v_tg * (params.c_d * scale)
}

/// Surface contact: normal part removed and tangent damped for approaching
/// nodes; separating nodes are left alone. Returns the corrected velocity and
/// its change.
pub fn correct_surface_contact(v_node: &Vec3, v_rigid: &Vec3, normal: &Vec3, params: &ContactParams) -> (Vec3, Vec3) {
    let v_rel = v_node - v_rigid;
    let v_n = v_rel.dot(normal);
    if v_n >= 0.0 {
        return (*v_node, Vec3::zeros());
    }
    let v_tg = v_rel - normal * v_n;
    let corrected = v_rigid + friction_drag(&v_tg, -v_n, params);
    (corrected, corrected - v_node)
}

/// Curve contact: only the along-curve component of the relative velocity is
/// kept, then damped by friction and drag.
pub fn correct_curve_contact(
    v_node: &Vec3,
    v_rigid: &Vec3,
    _normal: &Vec3,
    tangent: &Vec3,
    params: &ContactParams,
) -> (Vec3, Vec3) {
    let v_rel = v_node - v_rigid;
    let v_tg1 = tangent * v_rel.dot(tangent);
    let removed = (v_rel - v_tg1).norm();
    let corrected = v_rigid + friction_drag(&v_tg1, removed, params);
    (corrected, corrected - v_node)
}

/// Velocity correction of one node against one shape, or `None` when the
/// node is outside the shape's contact region.
#[inline]
fn node_correction(shape: &Shape, params: &ContactParams, x: &Vec3, v: &Vec3) -> Option<Vec3> {
    let s = shape.query(x);
    let v_r = shape.velocity_at(x);
    match shape.geometry.class() {
        GeometryClass::Closed => (s.distance < 0.0).then(|| correct_surface_contact(v, &v_r, &s.normal, params).0),
        GeometryClass::Slicer => match s.region {
            Some(SlicerRegion::Spine) if s.distance < 0.0 => Some(v_r),
            Some(SlicerRegion::Edge) => Some(correct_surface_contact(v, &v_r, &s.normal, params).0),
            _ => None,
        },
        GeometryClass::Curve => (s.distance < params.collision_halfwidth)
            .then(|| correct_curve_contact(v, &v_r, &s.normal, &s.tangent.unwrap_or_default(), params).0),
    }
}

const NODE_CHUNK: usize = 4096;

/// Corrects nodal velocities against every shape, in shape order, and adds
/// the reaction to each shape's accumulator.
///
/// Nodes are processed in fixed chunks whose partial sums are reduced in
/// chunk order, so the result does not depend on the thread count.
pub fn apply_contact_pass(grid: &mut Grid, shapes: &[Shape], accumulators: &mut [ContactAccumulator], _dt: Real) {
    assert_eq!(shapes.len(), accumulators.len());
    if shapes.is_empty() {
        return;
    }
    let nodes: Vec<usize> = grid
        .touched_indices()
        .filter(|&i| grid.nodes[i].mass > MASS_EPSILON)
        .collect();
    let params: Vec<ContactParams> = shapes.iter().map(ContactParams::from).collect();
    let chunks = nodes.len().div_ceil(NODE_CHUNK);
    let results = {
        let g = &*grid;
        par_map(chunks, |c| {
            let mut acc = vec![ContactAccumulator::default(); shapes.len()];
            let mut changed = Vec::new();
            for &idx in &nodes[c * NODE_CHUNK..((c + 1) * NODE_CHUNK).min(nodes.len())] {
                let node = &g.nodes[idx];
                let x = g.node_position_of(idx);
                let mut v = node.velocity;
                let mut touched = false;
                for (k, shape) in shapes.iter().enumerate() {
                    if let Some(v_new) = node_correction(shape, &params[k], &x, &v) {
                        let dv = v_new - v;
                        acc[k].contact_node_count += 1;
                        acc[k].record(node.mass, &dv, &(x - shape.pose.position));
                        v = v_new;
                        touched = true;
                    }
                }
                if touched {
                    changed.push((idx, v));
                }
            }
            (changed, acc)
        })
    };
    for (changed, acc) in results {
        for (idx, v) in changed {
            let n = &mut grid.nodes[idx];
            let dv = v - n.velocity;
            n.contact_impulse -= dv * n.mass;
            n.velocity = v;
        }
        for (total, part) in accumulators.iter_mut().zip(&acc) {
            total.merge(part);
        }
    }
}

/// Target of a push-out move: new position along the sample normal, or
/// `None` if the particle is clear of the shape.
fn pushout_target(shape: &Shape, s: &SdfSample, clearance: Real) -> Option<Real> {
    let band = 0.5 * shape.collision_halfwidth;
    match shape.geometry.class() {
        GeometryClass::Closed => (s.distance < 0.0).then(|| -s.distance + clearance),
        GeometryClass::Slicer => match s.region {
            Some(SlicerRegion::Spine) => (s.distance < 0.0).then(|| -s.distance + clearance),
            _ if s.distance.abs() < band => Some(band + clearance - s.distance.abs()),
            _ => None,
        },
        // Free curve ends (the needle tip) do not push material aside.
        GeometryClass::Curve => (s.distance < band && !s.at_curve_end).then_some(band + clearance - s.distance),
    }
}

/// Moves particles out of shapes and removes the velocity component into the
/// surface. The velocity change is recorded in `accumulators` when given.
/// Returns the number of particles moved.
pub fn particle_pushout(
    particles: &mut Particles,
    shapes: &[Shape],
    dx: Real,
    mut accumulators: Option<&mut [ContactAccumulator]>,
) -> usize {
    let clearance = 1e-4 * dx;
    let mut moved = 0;
    for i in 0..particles.len() {
        if !particles.active[i] {
            continue;
        }
        let mut any = false;
        for (k, shape) in shapes.iter().enumerate() {
            let s = shape.query(&particles.x[i]);
            let Some(step) = pushout_target(shape, &s, clearance) else {
                continue;
            };
            any = true;
            let x = particles.x[i] + s.normal * step;
            let v_r = shape.velocity_at(&x);
            let v = particles.v[i];
            let v_n = (v - v_r).dot(&s.normal);
            particles.x[i] = x;
            if v_n < 0.0 {
                let dv = -s.normal * v_n;
                particles.v[i] = v + dv;
                if let Some(acc) = accumulators.as_deref_mut() {
                    acc[k].record(particles.mass[i], &dv, &(x - shape.pose.position));
                }
            }
        }
        moved += any as usize;
    }
    moved
}

/// Contact hook binding shapes and their accumulators to a solver step.
pub struct ShapeContact<'a> {
    pub shapes: &'a [Shape],
    pub accumulators: &'a mut [ContactAccumulator],
}

impl GridContact for ShapeContact<'_> {
    fn apply(&mut self, grid: &mut Grid, dt: Real) {
        apply_contact_pass(grid, self.shapes, self.accumulators, dt);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Geometry, ShapePose};
    use approx::assert_relative_eq;

    fn params(mu_k: Real, c_d: Real) -> ContactParams {
        ContactParams {
            mu_k,
            c_d,
            collision_halfwidth: 0.1,
        }
    }

    #[test]
    fn separating_node_is_unchanged() {
        let v = Vec3::new(3.0, 1.0, 0.0);
        let (c, dv) = correct_surface_contact(&v, &Vec3::zeros(), &Vec3::y(), &params(0.5, 0.5));
        assert_eq!(c, v);
        assert_eq!(dv, Vec3::zeros());
    }

    #[test]
    fn frictionless_removes_normal() {
        let (c, dv) = correct_surface_contact(&Vec3::new(1.0, -1.0, 0.0), &Vec3::zeros(), &Vec3::y(), &params(0.0, 1.0));
        assert_relative_eq!(c, Vec3::x());
        assert_relative_eq!(dv, Vec3::y());
    }

    #[test]
    fn sticky_drag_matches_rigid() {
        let vr = Vec3::new(0.2, 0.0, 0.1);
        let (c, _) = correct_surface_contact(&Vec3::new(1.0, -1.0, 0.0), &vr, &Vec3::y(), &params(0.3, 0.0));
        assert_relative_eq!(c, vr);
    }

    #[test]
    fn friction_reduces_tangent() {
        let (c, _) = correct_surface_contact(&Vec3::new(1.0, -0.5, 0.0), &Vec3::zeros(), &Vec3::y(), &params(1.0, 1.0));
        assert_relative_eq!(c, Vec3::new(0.5, 0.0, 0.0), epsilon = 1e-6);
        let (c, _) = correct_surface_contact(&Vec3::new(0.0, -0.5, 0.0), &Vec3::zeros(), &Vec3::y(), &params(1.0, 1.0));
        assert_eq!(c, Vec3::zeros());
    }

    #[test]
    fn curve_decomposition() {
        let n = Vec3::y();
        let t = Vec3::x();
        let p = params(0.0, 1.0);
        let (c, _) = correct_curve_contact(&t, &Vec3::zeros(), &n, &t, &p);
        assert_relative_eq!(c, t);
        let (c, _) = correct_curve_contact(&Vec3::z(), &Vec3::zeros(), &n, &t, &p);
        assert_relative_eq!(c, Vec3::zeros());
        let (c, _) = correct_curve_contact(&(t + n), &Vec3::zeros(), &n, &t, &p);
        assert_relative_eq!(c, t);
    }

    #[test]
    fn pushout_from_sphere_centre() {
        let mut p = Particles::default();
        p.push(Vec3::zeros(), Vec3::new(-1.0, 0.0, 0.0), 1.0, 1.0, 0);
        let sphere = Shape::new(0, Geometry::sphere(0.5).unwrap(), ShapePose::default(), 0.0, 1.0, 0.1).unwrap();
        let mut acc = vec![ContactAccumulator::default()];
        assert_eq!(particle_pushout(&mut p, &[sphere], 0.1, Some(&mut acc)), 1);
        assert_relative_eq!(p.x[0], Vec3::new(0.5 + 1e-5, 0.0, 0.0), epsilon = 1e-6);
        assert_relative_eq!(p.v[0], Vec3::zeros());
        assert_relative_eq!(acc[0].impulse.x, -1.0);
        assert_eq!(particle_pushout(&mut p, &[], 0.1, None), 0);
    }
}
