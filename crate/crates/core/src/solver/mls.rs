//! APIC-style MLS-MPM.

use crate::material::{neo_hookean_cauchy_stress_clamped, Material, MIN_VOLUME_RATIO};
use crate::math::{Mat3, Real, Vec3};
use crate::state::MpmState;

use super::transfer::{
    apply_boundary, compute_weights, gather, par_map, particle_to_grid, update_grid_velocities,
    ScatterTerms,
};
use super::{check_dt, check_finite, lookup_materials, GridContact, SolverError, StepOptions, StepReport};

/// One MLS-MPM step. The stress term is fused into the affine momentum
/// transfer with the quadratic-basis inertia `M^-1 = 4 / dx^2`.
pub fn step_mls(
    state: &mut MpmState,
    materials: &[Material],
    dt: Real,
    gravity: Vec3,
    options: StepOptions,
    contact: &mut dyn GridContact,
) -> Result<StepReport, SolverError> {
    check_dt(dt)?;
    lookup_materials(state, materials)?;
    let mut report = StepReport {
        deactivated: state.deactivate_out_of_domain(),
        ..Default::default()
    };

    let MpmState { particles, grid, .. } = state;
    let dx = grid.dx();
    let inv_d = 4.0 / (dx * dx);
    grid.clear();
    let weights = compute_weights(grid, particles);
    {
        let p = &*particles;
        particle_to_grid(grid, p, &weights, options.mode, |i| ScatterTerms {
            mass: p.mass[i],
            momentum: p.v[i] * p.mass[i],
            affine: p.c[i] * p.mass[i] - p.stress[i] * (dt * p.volume[i] * inv_d),
            force_matrix: Mat3::zeros(),
        });
    }
    update_grid_velocities(grid, gravity * dt);
    contact.apply(grid, dt);
    apply_boundary(grid, options.boundary);

    let updates = {
        let g = &*grid;
        let p = &*particles;
        par_map(p.len(), |i| {
            weights[i].map(|sw| {
                let gathered = gather(g, &p.x[i], &sw);
                let v = gathered.velocity;
                let c = gathered.affine_b * inv_d;
                let f = (Mat3::identity() + c * dt) * p.f[i];
                let mat = &materials[p.material[i] as usize];
                let (stress, inverted) = neo_hookean_cauchy_stress_clamped(&f, mat.mu, mat.lambda);
                let j = f.determinant().max(MIN_VOLUME_RATIO);
                (v, c, p.x[i] + v * dt, f, j * p.volume0[i], stress, inverted)
            })
        })
    };
    for (i, u) in updates.into_iter().enumerate() {
        if let Some((v, c, x, f, volume, stress, inverted)) = u {
            particles.v[i] = v;
            particles.c[i] = c;
            particles.x[i] = x;
            particles.f[i] = f;
            particles.volume[i] = volume;
            particles.stress[i] = stress;
            report.inverted += inverted as usize;
        }
    }
    grid.clear();
    check_finite(state)?;
    Ok(report)
}
