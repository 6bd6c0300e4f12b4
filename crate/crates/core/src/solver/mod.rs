//! Time steppers: standard MPM with PIC transfer, APIC-style MLS-MPM, and
//! position-based MPM.

mod mls;
mod pbmpm;
mod standard;
pub mod transfer;

pub use mls::step_mls;
pub use pbmpm::{step_pbmpm, PbmpmConfig};
pub use standard::step_standard;

use thiserror::Error;

use crate::material::{Material, MaterialKind};
use crate::math::{is_finite_vec, Real};
use crate::state::{Grid, MpmState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("time step must be positive, got {0}")]
    BadTimeStep(Real),
    #[error("particle references unknown material {0}")]
    UnknownMaterial(u32),
    #[error("position-based MPM requires co-rotational materials (material {0} is not)")]
    WrongMaterialKind(u32),
    #[error("iteration count must be at least 1")]
    BadIterations,
    #[error("non-finite particle state after step (particle {particle})")]
    NonFinite { particle: usize },
}

/// Accumulation strategy for particle-to-grid scatter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    /// Sequential scatter in particle order.
    #[default]
    Deterministic,
    /// Slab-colored concurrent scatter.
    Parallel,
}

/// Condition applied at the domain walls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    #[default]
    Slip,
    Sticky,
}

/// Grid-level velocity correction hook, invoked after the nodal update.
pub trait GridContact {
    fn apply(&mut self, grid: &mut Grid, dt: Real);
}

/// Contact hook that does nothing.
pub struct NoContact;

impl GridContact for NoContact {
    fn apply(&mut self, _grid: &mut Grid, _dt: Real) {}
}

/// Counters reported by one solver step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepReport {
    /// Particles whose stress evaluation needed the `det(F)` clamp.
    pub inverted: usize,
    /// Particles whose constraint projection failed and kept their prior C.
    pub projection_failures: usize,
    /// Particles deactivated for leaving the grid interior.
    pub deactivated: usize,
}

impl std::ops::AddAssign for StepReport {
    fn add_assign(&mut self, rhs: Self) {
        self.inverted += rhs.inverted;
        self.projection_failures += rhs.projection_failures;
        self.deactivated += rhs.deactivated;
    }
}

/// Options shared by every stepper.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOptions {
    pub mode: ExecMode,
    pub boundary: BoundaryKind,
}

/// Which stepper a scene runs, with its per-frame schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverConfig {
    Standard { substeps: u32 },
    Mls { substeps: u32 },
    Pbmpm(PbmpmConfig),
}

impl SolverConfig {
    /// Solver steps per frame and the time step of each.
    pub fn schedule(&self, frame_dt: Real) -> (u32, Real) {
        match *self {
            SolverConfig::Standard { substeps } | SolverConfig::Mls { substeps } => {
                let n = substeps.max(1);
                (n, frame_dt / n as Real)
            }
            SolverConfig::Pbmpm(_) => (1, frame_dt),
        }
    }

    pub fn material_kind(&self) -> MaterialKind {
        match self {
            SolverConfig::Pbmpm(_) => MaterialKind::CorotationalPb,
            _ => MaterialKind::NeoHookean,
        }
    }

    /// Runs one solver step of length `dt`.
    pub fn step(
        &self,
        state: &mut MpmState,
        materials: &[Material],
        dt: Real,
        gravity: crate::math::Vec3,
        options: StepOptions,
        contact: &mut dyn GridContact,
    ) -> Result<StepReport, SolverError> {
        match self {
            SolverConfig::Standard { .. } => step_standard(state, materials, dt, gravity, options, contact),
            SolverConfig::Mls { .. } => step_mls(state, materials, dt, gravity, options, contact),
            SolverConfig::Pbmpm(cfg) => step_pbmpm(state, materials, dt, gravity, *cfg, options, contact),
        }
    }
}

fn check_dt(dt: Real) -> Result<(), SolverError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(SolverError::BadTimeStep(dt))
    }
}

fn lookup_materials(state: &MpmState, materials: &[Material]) -> Result<(), SolverError> {
    for (i, &m) in state.particles.material.iter().enumerate() {
        if state.particles.active[i] && m as usize >= materials.len() {
            return Err(SolverError::UnknownMaterial(m));
        }
    }
    Ok(())
}

fn check_finite(state: &MpmState) -> Result<(), SolverError> {
    let p = &state.particles;
    for i in p.active_iter() {
        if !is_finite_vec(&p.x[i]) || !is_finite_vec(&p.v[i]) {
            return Err(SolverError::NonFinite { particle: i });
        }
    }
    Ok(())
}
