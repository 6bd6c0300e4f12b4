//! Particle and background-grid storage.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::math::{grid_coordinate, in_interior_band, Mat3, Real, Vec3};

/// Node mass below which a node carries no velocity.
pub const MASS_EPSILON: Real = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StateError {
    #[error("grid needs at least 4 nodes per axis, got {0:?}")]
    GridTooSmall([usize; 3]),
    #[error("grid cell size must be positive, got {0}")]
    BadCellSize(Real),
    #[error("spawn box {min:?}..{max:?} is not strictly inside the grid interior band")]
    BoxOutsideDomain { min: [Real; 3], max: [Real; 3] },
    #[error("spawn box has zero or negative extent")]
    DegenerateBox,
    #[error("particles_per_cell must be a positive perfect cube, got {0}")]
    BadParticlesPerCell(u32),
    #[error("density must be positive, got {0}")]
    BadDensity(Real),
    #[error("unknown particle object {0}")]
    UnknownObject(u32),
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GridNode {
    pub mass: Real,
    pub momentum: Vec3,
    pub velocity: Vec3,
    /// Momentum change applied by contact corrections this step.
    pub contact_impulse: Vec3,
}

/// Dense background grid. Node `(i, j, k)` lives at `i + nx * (j + ny * k)`.
#[derive(Debug, Clone)]
pub struct Grid {
    dims: [usize; 3],
    dx: Real,
    origin: Vec3,
    pub nodes: Vec<GridNode>,
    /// Inclusive bounds of every node written since the last clear.
    touched: Option<([usize; 3], [usize; 3])>,
}

impl Grid {
    pub fn new(dims: [usize; 3], dx: Real, origin: Vec3) -> Result<Self, StateError> {
        if dims.iter().any(|&d| d < 4) {
            return Err(StateError::GridTooSmall(dims));
        }
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(StateError::BadCellSize(dx));
        }
        Ok(Self {
            dims,
            dx,
            origin,
            nodes: vec![GridNode::default(); dims[0] * dims[1] * dims[2]],
            touched: None,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn dx(&self) -> Real {
        self.dx
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn unindex(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn node_position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as Real, j as Real, k as Real) * self.dx
    }

    #[inline]
    pub fn node_position_of(&self, idx: usize) -> Vec3 {
        let [i, j, k] = self.unindex(idx);
        self.node_position(i, j, k)
    }

    /// True if `x` is at least 1.5 cells inside the node lattice.
    pub fn contains(&self, x: &Vec3) -> bool {
        in_interior_band(&grid_coordinate(x, &self.origin, self.dx), self.dims)
    }

    pub(crate) fn mark_region(&mut self, lo: [usize; 3], hi: [usize; 3]) {
        self.touched = Some(match self.touched {
            None => (lo, hi),
            Some((l, h)) => (
                [l[0].min(lo[0]), l[1].min(lo[1]), l[2].min(lo[2])],
                [h[0].max(hi[0]), h[1].max(hi[1]), h[2].max(hi[2])],
            ),
        });
    }

    /// Inclusive node bounds that may hold nonzero data.
    pub fn touched_region(&self) -> Option<([usize; 3], [usize; 3])> {
        self.touched
    }

    /// Linear indices of every node in the touched region, in node-major order.
    pub fn touched_indices(&self) -> impl Iterator<Item = usize> + '_ {
        let (lo, hi) = self.touched.unwrap_or(([1, 1, 1], [0, 0, 0]));
        (lo[2]..=hi[2]).flat_map(move |k| {
            (lo[1]..=hi[1]).flat_map(move |j| (lo[0]..=hi[0]).map(move |i| self.index(i, j, k)))
        })
    }

    /// Zeroes all node data.
    pub fn clear(&mut self) {
        if let Some((lo, hi)) = self.touched.take() {
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    let start = self.index(lo[0], j, k);
                    let end = self.index(hi[0], j, k);
                    self.nodes[start..=end].fill(GridNode::default());
                }
            }
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.touched_indices().map(|i| self.nodes[i].mass as f64).sum()
    }

    /// Sum of node mass times node velocity.
    pub fn total_velocity_momentum(&self) -> [f64; 3] {
        let mut p = [0.0f64; 3];
        for idx in self.touched_indices() {
            let n = &self.nodes[idx];
            for a in 0..3 {
                p[a] += n.mass as f64 * n.velocity[a] as f64;
            }
        }
        p
    }
}

/// Structure-of-arrays particle store.
#[derive(Debug, Clone, Default)]
pub struct Particles {
    pub x: Vec<Vec3>,
    pub v: Vec<Vec3>,
    pub mass: Vec<Real>,
    pub volume0: Vec<Real>,
    pub volume: Vec<Real>,
    pub f: Vec<Mat3>,
    pub c: Vec<Mat3>,
    /// Cauchy stress cached at the end of the previous step.
    pub stress: Vec<Mat3>,
    pub material: Vec<u32>,
    pub active: Vec<bool>,
}

impl Particles {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn push(&mut self, x: Vec3, v: Vec3, mass: Real, volume: Real, material: u32) {
        self.x.push(x);
        self.v.push(v);
        self.mass.push(mass);
        self.volume0.push(volume);
        self.volume.push(volume);
        self.f.push(Mat3::identity());
        self.c.push(Mat3::zeros());
        self.stress.push(Mat3::zeros());
        self.material.push(material);
        self.active.push(true);
    }

    pub fn remove_range(&mut self, range: Range<usize>) {
        self.x.drain(range.clone());
        self.v.drain(range.clone());
        self.mass.drain(range.clone());
        self.volume0.drain(range.clone());
        self.volume.drain(range.clone());
        self.f.drain(range.clone());
        self.c.drain(range.clone());
        self.stress.drain(range.clone());
        self.material.drain(range.clone());
        self.active.drain(range);
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    pub fn total_mass(&self) -> f64 {
        self.active_iter().map(|i| self.mass[i] as f64).sum()
    }

    pub fn total_momentum(&self) -> [f64; 3] {
        let mut p = [0.0f64; 3];
        for i in self.active_iter() {
            let m = self.mass[i] as f64;
            for a in 0..3 {
                p[a] += m * self.v[i][a] as f64;
            }
        }
        p
    }

    pub fn kinetic_energy(&self) -> f64 {
        self.active_iter()
            .map(|i| 0.5 * self.mass[i] as f64 * (self.v[i].norm_squared() as f64))
            .sum()
    }

    pub fn active_iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&i| self.active[i])
    }
}

/// A contiguous range of particles sharing one material.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleObject {
    pub id: u32,
    pub range: Range<usize>,
    pub material_id: u32,
}

/// Parameters for filling an axis-aligned box with particles.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpawn {
    pub min_corner: Vec3,
    pub max_corner: Vec3,
    pub particles_per_cell: u32,
    pub density: Real,
    pub material_id: u32,
    pub seed: u64,
    pub velocity: Vec3,
}

/// Particles, grid and the object table.
#[derive(Debug, Clone)]
pub struct MpmState {
    pub particles: Particles,
    pub grid: Grid,
    pub objects: Vec<ParticleObject>,
    next_object_id: u32,
}

impl MpmState {
    pub fn new(grid: Grid) -> Self {
        Self {
            particles: Particles::default(),
            grid,
            objects: Vec::new(),
            next_object_id: 0,
        }
    }

    /// Fills a box with a jittered lattice of `particles_per_cell` particles
    /// per grid cell.
    pub fn spawn_box_particles(&mut self, spec: &BoxSpawn) -> Result<ParticleObject, StateError> {
        let extent = spec.max_corner - spec.min_corner;
        if extent.iter().any(|e| !(*e > 0.0)) {
            return Err(StateError::DegenerateBox);
        }
        if !self.grid.contains(&spec.min_corner) || !self.grid.contains(&spec.max_corner) {
            return Err(StateError::BoxOutsideDomain {
                min: spec.min_corner.into(),
                max: spec.max_corner.into(),
            });
        }
        let per_axis = (spec.particles_per_cell as f64).cbrt().round() as u32;
        if per_axis == 0 || per_axis.pow(3) != spec.particles_per_cell {
            return Err(StateError::BadParticlesPerCell(spec.particles_per_cell));
        }
        if !(spec.density > 0.0) {
            return Err(StateError::BadDensity(spec.density));
        }

        let spacing = self.grid.dx() / per_axis as Real;
        let counts: Vec<usize> = (0..3)
            .map(|a| ((extent[a] / spacing).round() as usize).max(1))
            .collect();
        let center = (spec.min_corner + spec.max_corner) * 0.5;
        let start = Vec3::new(
            center.x - counts[0] as Real * spacing * 0.5,
            center.y - counts[1] as Real * spacing * 0.5,
            center.z - counts[2] as Real * spacing * 0.5,
        );
        let volume = spacing * spacing * spacing;
        let mass = spec.density * volume;
        let jitter = 0.25 * spacing;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

        let first = self.particles.len();
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    let lattice = start
                        + Vec3::new(i as Real + 0.5, j as Real + 0.5, k as Real + 0.5) * spacing;
                    let offset = Vec3::new(
                        rng.gen_range(-jitter..=jitter),
                        rng.gen_range(-jitter..=jitter),
                        rng.gen_range(-jitter..=jitter),
                    );
                    self.particles
                        .push(lattice + offset, spec.velocity, mass, volume, spec.material_id);
                }
            }
        }
        let object = ParticleObject {
            id: self.next_object_id,
            range: first..self.particles.len(),
            material_id: spec.material_id,
        };
        self.next_object_id += 1;
        self.objects.push(object.clone());
        Ok(object)
    }

    /// Removes an object's particles and shifts the ranges of later objects.
    pub fn remove_object(&mut self, id: u32) -> Result<(), StateError> {
        let pos = self
            .objects
            .iter()
            .position(|o| o.id == id)
            .ok_or(StateError::UnknownObject(id))?;
        let removed = self.objects.remove(pos);
        let n = removed.range.len();
        self.particles.remove_range(removed.range.clone());
        for o in &mut self.objects {
            if o.range.start >= removed.range.end {
                o.range = (o.range.start - n)..(o.range.end - n);
            }
        }
        Ok(())
    }

    /// Flags active particles outside the interior band as inactive.
    pub fn deactivate_out_of_domain(&mut self) -> usize {
        let p = &mut self.particles;
        let mut count = 0;
        for i in 0..p.x.len() {
            if p.active[i] && !self.grid.contains(&p.x[i]) {
                p.active[i] = false;
                count += 1;
            }
        }
        count
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_grid() -> Grid {
        // 8 cells across the unit cube plus a 3-cell margin on each side.
        Grid::new([15, 15, 15], 0.125, Vec3::repeat(-0.375)).unwrap()
    }

    fn unit_spawn(seed: u64) -> BoxSpawn {
        BoxSpawn {
            min_corner: Vec3::zeros(),
            max_corner: Vec3::repeat(1.0),
            particles_per_cell: 8,
            density: 1000.0,
            material_id: 0,
            seed,
            velocity: Vec3::zeros(),
        }
    }

    #[test]
    fn unit_cube_count_and_mass() {
        let mut s = MpmState::new(unit_grid());
        let obj = s.spawn_box_particles(&unit_spawn(7)).unwrap();
        assert_eq!(obj.range.len(), 4096);
        let m = s.particles.total_mass();
        assert!((m - 1000.0).abs() / 1000.0 < 1e-3, "mass {m}");
        assert!(s.particles.f.iter().all(|f| *f == Mat3::identity()));
        assert!(s.particles.c.iter().all(|c| *c == Mat3::zeros()));
    }

    #[test]
    fn jitter_bounded_and_deterministic() {
        let mut a = MpmState::new(unit_grid());
        let mut b = MpmState::new(unit_grid());
        a.spawn_box_particles(&unit_spawn(3)).unwrap();
        b.spawn_box_particles(&unit_spawn(3)).unwrap();
        assert_eq!(a.particles.x, b.particles.x);

        let spacing = 0.0625;
        for (n, x) in a.particles.x.iter().enumerate() {
            let i = n % 16;
            let lattice = (i as Real + 0.5) * spacing;
            assert!((x.x - lattice).abs() <= 0.25 * spacing + 1e-6);
        }

        let mut c = MpmState::new(unit_grid());
        c.spawn_box_particles(&unit_spawn(4)).unwrap();
        assert_ne!(a.particles.x, c.particles.x);
    }

    #[test]
    fn spawn_rejections() {
        let mut s = MpmState::new(unit_grid());
        let mut spec = unit_spawn(0);
        spec.max_corner = spec.min_corner;
        assert_eq!(s.spawn_box_particles(&spec), Err(StateError::DegenerateBox));

        let mut spec = unit_spawn(0);
        spec.max_corner = Vec3::repeat(3.0);
        assert!(matches!(
            s.spawn_box_particles(&spec),
            Err(StateError::BoxOutsideDomain { .. })
        ));

        let mut spec = unit_spawn(0);
        spec.particles_per_cell = 4;
        assert_eq!(
            s.spawn_box_particles(&spec),
            Err(StateError::BadParticlesPerCell(4))
        );
    }

    #[test]
    fn grid_rejects_bad_shape() {
        assert!(Grid::new([3, 8, 8], 0.1, Vec3::zeros()).is_err());
        assert!(Grid::new([8, 8, 8], 0.0, Vec3::zeros()).is_err());
    }

    #[test]
    fn index_roundtrip() {
        let g = Grid::new([5, 7, 9], 0.1, Vec3::zeros()).unwrap();
        for k in 0..9 {
            for j in 0..7 {
                for i in 0..5 {
                    assert_eq!(g.unindex(g.index(i, j, k)), [i, j, k]);
                }
            }
        }
    }

    #[test]
    fn clear_resets_nodes() {
        let mut g = Grid::new([8, 8, 8], 0.1, Vec3::zeros()).unwrap();
        g.clear();
        let idx = g.index(3, 4, 5);
        g.nodes[idx].mass = 2.0;
        g.nodes[idx].velocity = Vec3::new(1.0, 2.0, 3.0);
        g.mark_region([3, 4, 5], [5, 6, 7]);
        g.clear();
        assert!(g.nodes.iter().all(|n| *n == GridNode::default()));
        assert!(g.touched_region().is_none());
    }

    #[test]
    fn deactivation() {
        let mut s = MpmState::new(unit_grid());
        s.spawn_box_particles(&unit_spawn(0)).unwrap();
        assert_eq!(s.deactivate_out_of_domain(), 0);
        s.particles.x[10] = Vec3::new(5.0, 0.5, 0.5);
        assert_eq!(s.deactivate_out_of_domain(), 1);
        assert!(!s.particles.active[10]);
        assert_eq!(s.particles.active_count(), 4095);
    }

    #[test]
    fn remove_object_shifts_ranges() {
        let mut s = MpmState::new(unit_grid());
        let a = s.spawn_box_particles(&unit_spawn(0)).unwrap();
        let mut spec = unit_spawn(1);
        spec.max_corner = Vec3::repeat(0.5);
        let b = s.spawn_box_particles(&spec).unwrap();
        s.remove_object(a.id).unwrap();
        assert_eq!(s.objects.len(), 1);
        assert_eq!(s.objects[0].range, 0..b.range.len());
        assert_eq!(s.particles.len(), b.range.len());
        assert_eq!(s.remove_object(a.id), Err(StateError::UnknownObject(a.id)));
    }
}
