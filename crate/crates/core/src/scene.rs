//! Scene object model and the advance / fetch_results frame lifecycle.

use std::sync::Arc;

use thiserror::Error;

use crate::contact::{particle_pushout, ContactAccumulator, ShapeContact};
use crate::geometry::{GeometryError, Shape, ShapePose};
use crate::material::{Material, MaterialError};
use crate::math::{Quat, Real, Vec3};
use crate::rigid::{integrate_free_body, RigidError, ShapeMotion};
use crate::solver::{BoundaryKind, ExecMode, SolverConfig, SolverError, StepOptions, StepReport};
use crate::state::{BoxSpawn, Grid, MpmState, ParticleObject, StateError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("illegal call: {0}")]
    Lifecycle(&'static str),
    #[error("frame time step must be positive, got {0}")]
    BadTimeStep(Real),
    #[error("unknown shape {0}")]
    UnknownShape(u32),
    #[error("unknown material {0}")]
    UnknownMaterial(u32),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error(transparent)]
    Rigid(#[from] RigidError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneStatus {
    Idle,
    Advancing,
    ResultsReady,
    /// A frame failed; the scene accepts no further advances.
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub solver: SolverConfig,
    pub grid_dims: [usize; 3],
    pub dx: Real,
    pub origin: Vec3,
    pub gravity: Vec3,
    pub boundary: BoundaryKind,
    pub mode: ExecMode,
}

/// Momentum exchanged with one shape over a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapeFrameResult {
    pub id: u32,
    pub impulse: [f64; 3],
    pub torque_impulse: [f64; 3],
    pub contact_node_count: u64,
    pub resistive: f64,
    pub pose: ShapePose,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrameMetrics {
    pub total_mass: f64,
    pub total_momentum: [f64; 3],
    pub kinetic_energy: f64,
    pub pushed_out: usize,
    pub inverted: usize,
    pub projection_failures: usize,
    pub deactivated: usize,
    pub active_particles: usize,
}

/// Immutable snapshot of a completed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub frame: u64,
    pub time: f64,
    pub positions: Vec<Vec3>,
    pub velocities: Vec<Vec3>,
    pub active: Vec<bool>,
    pub shapes: Vec<ShapeFrameResult>,
    pub metrics: FrameMetrics,
}

impl FrameResult {
    pub fn active_positions(&self) -> impl Iterator<Item = &Vec3> + '_ {
        self.positions.iter().zip(&self.active).filter(|(_, a)| **a).map(|(x, _)| x)
    }
}

/// Everything a frame reads and writes. Moved to the worker during advance.
#[derive(Debug, Clone)]
pub struct SceneData {
    pub config: SceneConfig,
    pub state: MpmState,
    pub materials: Vec<Material>,
    pub shapes: Vec<Shape>,
    pub motions: Vec<ShapeMotion>,
    pub time: f64,
    pub frame: u64,
    next_shape_id: u32,
}

impl SceneData {
    fn new(config: SceneConfig) -> Result<Self, SceneError> {
        let grid = Grid::new(config.grid_dims, config.dx, config.origin)?;
        Ok(Self {
            config,
            state: MpmState::new(grid),
            materials: Vec::new(),
            shapes: Vec::new(),
            motions: Vec::new(),
            time: 0.0,
            frame: 0,
            next_shape_id: 0,
        })
    }

    fn shape_index(&self, id: u32) -> Result<usize, SceneError> {
        self.shapes.iter().position(|s| s.id == id).ok_or(SceneError::UnknownShape(id))
    }

    /// Runs one frame of length `frame_dt`.
    pub fn run_frame(&mut self, frame_dt: Real) -> Result<FrameResult, SceneError> {
        let (steps, dt) = self.config.solver.schedule(frame_dt);
        let options = StepOptions {
            mode: self.config.mode,
            boundary: self.config.boundary,
        };
        let frame_start = self.time;
        let target_rates: Vec<Option<(Vec3, Vec3, ShapePose)>> = self
            .shapes
            .iter()
            .zip(&self.motions)
            .map(|(shape, motion)| match motion {
                ShapeMotion::Target { target } => Some(target_rate(&shape.pose, target, frame_dt)),
                _ => None,
            })
            .collect();

        let mut frame_acc = vec![ContactAccumulator::default(); self.shapes.len()];
        let mut report = StepReport::default();
        let mut pushed_out = 0;
        for step in 0..steps {
            let t = frame_start + step as f64 * dt as f64;
            for (k, motion) in self.motions.iter().enumerate() {
                let pose = &mut self.shapes[k].pose;
                match motion {
                    ShapeMotion::Static => {
                        pose.linear_velocity = Vec3::zeros();
                        pose.angular_velocity = Vec3::zeros();
                    }
                    ShapeMotion::Kinematic(traj) => *pose = traj.evaluate(t as Real),
                    ShapeMotion::Target { .. } => {
                        let (v, w, start) = target_rates[k].expect("target motion has a rate");
                        let s = step as Real * dt;
                        *pose = ShapePose {
                            position: start.position + v * s,
                            orientation: Quat::from_scaled_axis(w * s) * start.orientation,
                            linear_velocity: v,
                            angular_velocity: w,
                        };
                    }
                    ShapeMotion::Free(body) => *pose = body.pose,
                }
            }

            let mut step_acc = vec![ContactAccumulator::default(); self.shapes.len()];
            let mut contact = ShapeContact {
                shapes: &self.shapes,
                accumulators: &mut step_acc,
            };
            report += self.config.solver.step(
                &mut self.state,
                &self.materials,
                dt,
                self.config.gravity,
                options,
                &mut contact,
            )?;
            let dx = self.state.grid.dx();
            pushed_out += particle_pushout(&mut self.state.particles, &self.shapes, dx, Some(&mut step_acc));

            for (k, motion) in self.motions.iter_mut().enumerate() {
                if let ShapeMotion::Free(body) = motion {
                    integrate_free_body(
                        body,
                        &step_acc[k].impulse,
                        &step_acc[k].torque_impulse,
                        &self.config.gravity,
                        dt,
                    );
                    self.shapes[k].pose = body.pose;
                }
            }
            for (total, part) in frame_acc.iter_mut().zip(&step_acc) {
                *total += part;
            }
        }

        for (k, motion) in self.motions.iter().enumerate() {
            match motion {
                ShapeMotion::Target { target } => {
                    self.shapes[k].pose = ShapePose {
                        linear_velocity: Vec3::zeros(),
                        angular_velocity: Vec3::zeros(),
                        ..*target
                    }
                }
                ShapeMotion::Kinematic(traj) => {
                    self.shapes[k].pose = traj.evaluate((frame_start + frame_dt as f64) as Real)
                }
                _ => {}
            }
        }
        report.deactivated += self.state.deactivate_out_of_domain();
        self.time = frame_start + frame_dt as f64;
        self.frame += 1;
        Ok(self.snapshot(&frame_acc, report, pushed_out))
    }

    fn snapshot(&self, acc: &[ContactAccumulator], report: StepReport, pushed_out: usize) -> FrameResult {
        let p = &self.state.particles;
        FrameResult {
            frame: self.frame,
            time: self.time,
            positions: p.x.clone(),
            velocities: p.v.clone(),
            active: p.active.clone(),
            shapes: self
                .shapes
                .iter()
                .zip(acc)
                .map(|(s, a)| ShapeFrameResult {
                    id: s.id,
                    impulse: a.impulse.into(),
                    torque_impulse: a.torque_impulse.into(),
                    contact_node_count: a.contact_node_count,
                    resistive: a.resistive,
                    pose: s.pose,
                })
                .collect(),
            metrics: FrameMetrics {
                total_mass: p.total_mass(),
                total_momentum: p.total_momentum(),
                kinetic_energy: p.kinetic_energy(),
                pushed_out,
                inverted: report.inverted,
                projection_failures: report.projection_failures,
                deactivated: report.deactivated,
                active_particles: p.active_count(),
            },
        }
    }
}

/// Constant linear and angular velocity taking `from` to `to` over `dt`.
fn target_rate(from: &ShapePose, to: &ShapePose, dt: Real) -> (Vec3, Vec3, ShapePose) {
    let v = (to.position - from.position) / dt;
    let w = (to.orientation * from.orientation.inverse()).scaled_axis() / dt;
    (v, w, *from)
}

enum Pending {
    None,
    Ready(Result<FrameResult, SceneError>),
    #[cfg(feature = "threads")]
    Worker(std::thread::JoinHandle<(Box<SceneData>, Result<FrameResult, SceneError>)>),
}

/// A simulation scene. `advance` schedules a frame, `fetch_results` waits
/// for it.
pub struct Scene {
    data: Option<Box<SceneData>>,
    pending: Pending,
    status: SceneStatus,
    last: Option<Arc<FrameResult>>,
    /// Run frames on a worker thread when the `threads` feature is enabled.
    pub use_worker: bool,
}

impl Scene {
    pub fn new(config: SceneConfig) -> Result<Self, SceneError> {
        Ok(Self {
            data: Some(Box::new(SceneData::new(config)?)),
            pending: Pending::None,
            status: SceneStatus::Idle,
            last: None,
            use_worker: cfg!(feature = "threads"),
        })
    }

    pub fn status(&self) -> SceneStatus {
        self.status
    }

    fn data_mut(&mut self) -> Result<&mut SceneData, SceneError> {
        match self.status {
            SceneStatus::Advancing => Err(SceneError::Lifecycle("scene is advancing")),
            _ => self.data.as_deref_mut().ok_or(SceneError::Lifecycle("scene is advancing")),
        }
    }

    /// Read access to the scene between frames.
    pub fn data(&self) -> Result<&SceneData, SceneError> {
        match self.status {
            SceneStatus::Advancing => Err(SceneError::Lifecycle("scene is advancing")),
            _ => self.data.as_deref().ok_or(SceneError::Lifecycle("scene is advancing")),
        }
    }

    pub fn add_material(&mut self, material: Material) -> Result<u32, SceneError> {
        let data = self.data_mut()?;
        data.materials.push(material);
        Ok(data.materials.len() as u32 - 1)
    }

    pub fn spawn_box(&mut self, spawn: &BoxSpawn) -> Result<ParticleObject, SceneError> {
        let data = self.data_mut()?;
        if spawn.material_id as usize >= data.materials.len() {
            return Err(SceneError::UnknownMaterial(spawn.material_id));
        }
        Ok(data.state.spawn_box_particles(spawn)?)
    }

    pub fn remove_object(&mut self, id: u32) -> Result<(), SceneError> {
        Ok(self.data_mut()?.state.remove_object(id)?)
    }

    /// Adds a shape; its id is assigned by the scene and returned.
    pub fn add_shape(&mut self, mut shape: Shape, motion: ShapeMotion) -> Result<u32, SceneError> {
        let data = self.data_mut()?;
        shape.id = data.next_shape_id;
        data.next_shape_id += 1;
        match &motion {
            ShapeMotion::Kinematic(traj) => shape.pose = traj.evaluate(data.time as Real),
            ShapeMotion::Free(body) => shape.pose = body.pose,
            ShapeMotion::Target { .. } | ShapeMotion::Static => {}
        }
        let id = shape.id;
        data.shapes.push(shape);
        data.motions.push(motion);
        Ok(id)
    }

    pub fn remove_shape(&mut self, id: u32) -> Result<(), SceneError> {
        let data = self.data_mut()?;
        let k = data.shape_index(id)?;
        data.shapes.remove(k);
        data.motions.remove(k);
        Ok(())
    }

    /// Makes the shape externally driven; it reaches `target` at the end of
    /// the next frame.
    pub fn set_shape_pose_target(&mut self, id: u32, position: Vec3, orientation: Quat) -> Result<(), SceneError> {
        let data = self.data_mut()?;
        let k = data.shape_index(id)?;
        data.motions[k] = ShapeMotion::Target {
            target: ShapePose {
                position,
                orientation,
                ..ShapePose::default()
            },
        };
        Ok(())
    }

    /// Schedules one frame of length `dt`.
    pub fn advance(&mut self, dt: Real) -> Result<(), SceneError> {
        match self.status {
            SceneStatus::Idle | SceneStatus::ResultsReady => {}
            SceneStatus::Advancing => return Err(SceneError::Lifecycle("advance called while advancing")),
            SceneStatus::Failed => return Err(SceneError::Lifecycle("scene failed in an earlier frame")),
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SceneError::BadTimeStep(dt));
        }
        let mut data = self.data.take().expect("idle scene owns its data");
        self.status = SceneStatus::Advancing;
        #[cfg(feature = "threads")]
        if self.use_worker {
            self.pending = Pending::Worker(std::thread::spawn(move || {
                let r = data.run_frame(dt);
                (data, r)
            }));
            return Ok(());
        }
        let r = data.run_frame(dt);
        self.data = Some(data);
        self.pending = Pending::Ready(r);
        Ok(())
    }

    /// Waits for the scheduled frame and returns its snapshot.
    pub fn fetch_results(&mut self) -> Result<Arc<FrameResult>, SceneError> {
        if self.status != SceneStatus::Advancing {
            return Err(SceneError::Lifecycle("fetch_results without a pending advance"));
        }
        let result = match std::mem::replace(&mut self.pending, Pending::None) {
            Pending::None => unreachable!("advancing scene has a pending frame"),
            Pending::Ready(r) => r,
            #[cfg(feature = "threads")]
            Pending::Worker(handle) => {
                let (data, r) = handle.join().expect("frame worker panicked");
                self.data = Some(data);
                r
            }
        };
        match result {
            Ok(frame) => {
                let frame = Arc::new(frame);
                self.last = Some(frame.clone());
                self.status = SceneStatus::ResultsReady;
                Ok(frame)
            }
            Err(e) => {
                self.status = SceneStatus::Failed;
                Err(e)
            }
        }
    }

    /// Most recent completed frame.
    pub fn last_result(&self) -> Option<Arc<FrameResult>> {
        self.last.clone()
    }
}

impl Drop for Scene {
    fn drop(&mut self) {
        #[cfg(feature = "threads")]
        if let Pending::Worker(handle) = std::mem::replace(&mut self.pending, Pending::None) {
            let _ = handle.join();
        }
    }
}
