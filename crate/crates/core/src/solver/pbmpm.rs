//! Position-based MPM: repeated P2G-G2P cycles per step, each projecting
//! the particle velocity gradient onto the co-rotational constraint.

use crate::material::{corotational_project, Material, MaterialKind, MIN_VOLUME_RATIO};
use crate::math::{Mat3, Real, Vec3};
use crate::state::MpmState;

use super::transfer::{
    apply_boundary, compute_weights, gather, par_map, particle_to_grid, update_grid_velocities,
    ScatterTerms,
};
use super::{check_dt, check_finite, lookup_materials, GridContact, SolverError, StepOptions, StepReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbmpmConfig {
    pub iterations: u32,
}

impl Default for PbmpmConfig {
    fn default() -> Self {
        Self { iterations: 10 }
    }
}

/// One PB-MPM step of length `dt`.
///
/// Gravity enters on the first cycle only. Contact runs on every cycle.
/// Positions and F are committed once, after the last cycle.
pub fn step_pbmpm(
    state: &mut MpmState,
    materials: &[Material],
    dt: Real,
    gravity: Vec3,
    config: PbmpmConfig,
    options: StepOptions,
    contact: &mut dyn GridContact,
) -> Result<StepReport, SolverError> {
    check_dt(dt)?;
    if config.iterations == 0 {
        return Err(SolverError::BadIterations);
    }
    lookup_materials(state, materials)?;
    for i in state.particles.active_iter() {
        let id = state.particles.material[i];
        if materials[id as usize].kind != MaterialKind::CorotationalPb {
            return Err(SolverError::WrongMaterialKind(id));
        }
    }
    let mut report = StepReport {
        deactivated: state.deactivate_out_of_domain(),
        ..Default::default()
    };

    let MpmState { particles, grid, .. } = state;
    let dx = grid.dx();
    let inv_d = 4.0 / (dx * dx);
    let weights = compute_weights(grid, particles);

    for iteration in 0..config.iterations {
        grid.clear();
        {
            let p = &*particles;
            particle_to_grid(grid, p, &weights, options.mode, |i| ScatterTerms {
                mass: p.mass[i],
                momentum: p.v[i] * p.mass[i],
                affine: p.c[i] * p.mass[i],
                force_matrix: Mat3::zeros(),
            });
        }
        let dv = if iteration == 0 { gravity * dt } else { Vec3::zeros() };
        update_grid_velocities(grid, dv);
        contact.apply(grid, dt);
        apply_boundary(grid, options.boundary);

        let updates = {
            let g = &*grid;
            let p = &*particles;
            par_map(p.len(), |i| {
                weights[i].map(|sw| {
                    let gathered = gather(g, &p.x[i], &sw);
                    let candidate = gathered.affine_b * inv_d;
                    let beta = materials[p.material[i] as usize].beta;
                    match corotational_project(&p.f[i], &candidate, dt, beta) {
                        Ok(c) => (gathered.velocity, c, false),
                        Err(_) => (gathered.velocity, p.c[i], true),
                    }
                })
            })
        };
        for (i, u) in updates.into_iter().enumerate() {
            if let Some((v, c, failed)) = u {
                particles.v[i] = v;
                particles.c[i] = c;
                report.projection_failures += failed as usize;
            }
        }
    }
    grid.clear();

    for i in 0..particles.len() {
        if !particles.active[i] {
            continue;
        }
        particles.x[i] += particles.v[i] * dt;
        let f = (Mat3::identity() + particles.c[i] * dt) * particles.f[i];
        particles.f[i] = f;
        particles.volume[i] = f.determinant().max(MIN_VOLUME_RATIO) * particles.volume0[i];
    }
    check_finite(state)?;
    Ok(report)
}
