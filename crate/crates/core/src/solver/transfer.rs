//! Particle-grid transfer kernels shared by the steppers.

use crate::math::{weights_unchecked, grid_coordinate, Mat3, Real, SplineWeights, Vec3};
use crate::state::{Grid, Particles, MASS_EPSILON};

use super::{BoundaryKind, ExecMode};

/// Per-particle quantities scattered to the 27 stencil nodes.
///
/// Node `I` receives `w m` mass and `w (momentum + affine (x_I - x_p)) +
/// force_matrix grad(w)` momentum.
#[derive(Debug, Clone, Copy)]
pub struct ScatterTerms {
    pub mass: Real,
    pub momentum: Vec3,
    pub affine: Mat3,
    pub force_matrix: Mat3,
}

/// Stencil weights for every particle; `None` for inactive particles.
pub fn compute_weights(grid: &Grid, particles: &Particles) -> Vec<Option<SplineWeights>> {
    let origin = grid.origin();
    let dx = grid.dx();
    par_map(particles.len(), |i| {
        particles.active[i].then(|| weights_unchecked(&grid_coordinate(&particles.x[i], &origin, dx), dx))
    })
}

/// Scatters mass and momentum from particles to the grid.
pub fn particle_to_grid<T>(
    grid: &mut Grid,
    particles: &Particles,
    weights: &[Option<SplineWeights>],
    mode: ExecMode,
    terms: T,
) where
    T: Fn(usize) -> ScatterTerms + Sync,
{
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for sw in weights.iter().flatten() {
        for a in 0..3 {
            lo[a] = lo[a].min(sw.base_node[a]);
            hi[a] = hi[a].max(sw.base_node[a] + 2);
        }
    }
    if lo[0] == usize::MAX {
        return;
    }
    grid.mark_region(lo, hi);

    let dims = grid.dims();
    let dx = grid.dx();
    let origin = grid.origin();

    match mode {
        ExecMode::Deterministic => {
            for (i, sw) in weights.iter().enumerate() {
                if let Some(sw) = sw {
                    scatter_one(&mut grid.nodes, 0, dims, dx, &origin, &particles.x[i], sw, &terms(i));
                }
            }
        }
        ExecMode::Parallel => scatter_colored(grid, particles, weights, &terms),
    }
}

#[allow(clippy::too_many_arguments)]
#[inline]
fn scatter_one(
    nodes: &mut [crate::state::GridNode],
    first_node: usize,
    dims: [usize; 3],
    dx: Real,
    origin: &Vec3,
    xp: &Vec3,
    sw: &SplineWeights,
    t: &ScatterTerms,
) {
    let [bi, bj, bk] = sw.base_node;
    let frac = grid_coordinate(xp, origin, dx) - Vec3::new(bi as Real, bj as Real, bk as Real);
    for c in 0..3 {
        for b in 0..3 {
            let row = bi + dims[0] * ((bj + b) + dims[1] * (bk + c)) - first_node;
            for a in 0..3 {
                let w = sw.weight(a, b, c);
                let d = (Vec3::new(a as Real, b as Real, c as Real) - frac) * dx;
                let n = &mut nodes[row + a];
                n.mass += w * t.mass;
                n.momentum += (t.momentum + t.affine * d) * w + t.force_matrix * sw.gradient(a, b, c);
            }
        }
    }
}

/// Slab-colored scatter. Particles are bucketed by the z index of their
/// stencil base into slabs four planes thick; slabs of one parity write
/// disjoint node planes and run concurrently.
#[cfg(feature = "parallel")]
fn scatter_colored<T>(grid: &mut Grid, particles: &Particles, weights: &[Option<SplineWeights>], terms: &T)
where
    T: Fn(usize) -> ScatterTerms + Sync,
{
    use rayon::prelude::*;

    const SLAB: usize = 4;
    let dims = grid.dims();
    let dx = grid.dx();
    let origin = grid.origin();
    let plane = dims[0] * dims[1];
    let slab_count = dims[2].div_ceil(SLAB);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); slab_count];
    for (i, sw) in weights.iter().enumerate() {
        if let Some(sw) = sw {
            buckets[sw.base_node[2] / SLAB].push(i as u32);
        }
    }

    for color in 0..2 {
        let offset_planes = color * SLAB;
        if offset_planes * plane >= grid.nodes.len() {
            continue;
        }
        let (_, tail) = grid.nodes.split_at_mut(offset_planes * plane);
        let chunks: Vec<(usize, &mut [crate::state::GridNode])> = tail
            .chunks_mut(2 * SLAB * plane)
            .enumerate()
            .map(|(t, chunk)| (2 * t + color, chunk))
            .collect();
        chunks.into_par_iter().for_each(|(slab, chunk)| {
            let Some(bucket) = buckets.get(slab) else {
                return;
            };
            let first_node = slab * SLAB * plane;
            for &i in bucket {
                let i = i as usize;
                if let Some(sw) = &weights[i] {
                    scatter_one(chunk, first_node, dims, dx, &origin, &particles.x[i], sw, &terms(i));
                }
            }
        });
    }
}

#[cfg(not(feature = "parallel"))]
fn scatter_colored<T>(grid: &mut Grid, particles: &Particles, weights: &[Option<SplineWeights>], terms: &T)
where
    T: Fn(usize) -> ScatterTerms + Sync,
{
    let dims = grid.dims();
    let dx = grid.dx();
    let origin = grid.origin();
    for (i, sw) in weights.iter().enumerate() {
        if let Some(sw) = sw {
            scatter_one(&mut grid.nodes, 0, dims, dx, &origin, &particles.x[i], sw, &terms(i));
        }
    }
}

/// Divides momentum by mass and adds `velocity_increment` (gravity times dt)
/// on every node that carries mass.
pub fn update_grid_velocities(grid: &mut Grid, velocity_increment: Vec3) {
    let indices: Vec<usize> = grid.touched_indices().collect();
    for idx in indices {
        let n = &mut grid.nodes[idx];
        if n.mass > MASS_EPSILON {
            n.velocity = n.momentum / n.mass + velocity_increment;
        } else {
            n.velocity = Vec3::zeros();
        }
    }
}

/// Domain-wall condition on nodes within two cells of the grid boundary.
pub fn apply_boundary(grid: &mut Grid, kind: BoundaryKind) {
    let Some((lo, hi)) = grid.touched_region() else {
        return;
    };
    let dims = grid.dims();
    for k in lo[2]..=hi[2] {
        for j in lo[1]..=hi[1] {
            for i in lo[0]..=hi[0] {
                let ijk = [i, j, k];
                let near_lo = ijk.map(|v| v < 2);
                let near_hi = [0, 1, 2].map(|a| ijk[a] + 3 > dims[a]);
                if !near_lo.iter().chain(near_hi.iter()).any(|b| *b) {
                    continue;
                }
                let idx = grid.index(i, j, k);
                let v = &mut grid.nodes[idx].velocity;
                match kind {
                    BoundaryKind::Sticky => *v = Vec3::zeros(),
                    BoundaryKind::Slip => {
                        for a in 0..3 {
                            if (near_lo[a] && v[a] < 0.0) || (near_hi[a] && v[a] > 0.0) {
                                v[a] = 0.0;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Grid quantities interpolated back to one particle.
#[derive(Debug, Clone, Copy)]
pub struct Gathered {
    /// `sum w v_I`.
    pub velocity: Vec3,
    /// `sum w v_I (x_I - x_p)^T`.
    pub affine_b: Mat3,
    /// `sum v_I grad(w)^T`.
    pub velocity_gradient: Mat3,
}

/// Offsets and velocities are taken relative to the particle, which keeps
/// the affine moment free of cancellation against a large mean velocity.
pub fn gather(grid: &Grid, xp: &Vec3, sw: &SplineWeights) -> Gathered {
    let dims = grid.dims();
    let dx = grid.dx();
    let [bi, bj, bk] = sw.base_node;
    let local = grid_coordinate(xp, &grid.origin(), dx);
    let frac = local - Vec3::new(bi as Real, bj as Real, bk as Real);
    let row_of = |b: usize, c: usize| bi + dims[0] * ((bj + b) + dims[1] * (bk + c));

    let mut velocity = Vec3::zeros();
    for c in 0..3 {
        for b in 0..3 {
            let row = row_of(b, c);
            for a in 0..3 {
                velocity += grid.nodes[row + a].velocity * sw.weight(a, b, c);
            }
        }
    }
    let mut affine_b = Mat3::zeros();
    let mut velocity_gradient = Mat3::zeros();
    for c in 0..3 {
        for b in 0..3 {
            let row = row_of(b, c);
            for a in 0..3 {
                let dv = grid.nodes[row + a].velocity - velocity;
                let d = (Vec3::new(a as Real, b as Real, c as Real) - frac) * dx;
                affine_b += (dv * sw.weight(a, b, c)) * d.transpose();
                velocity_gradient += dv * sw.gradient(a, b, c).transpose();
            }
        }
    }
    Gathered {
        velocity,
        affine_b,
        velocity_gradient,
    }
}

/// Order-preserving map over `0..n`, parallel when the feature is enabled.
pub(crate) fn par_map<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}
