//! Flat, handle-based engine API with plain-data arguments, for foreign
//! callers (the browser demo, C-style bindings).

use std::collections::HashMap;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{Geometry, Shape, ShapePose};
use crate::material::Material;
use crate::math::{Quat, Real, Vec3};
use crate::rigid::ShapeMotion;
use crate::scene::{FrameResult, Scene, SceneConfig, SceneError};
use crate::state::BoxSpawn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HandleKind {
    Scene,
    ParticleObject,
    Shape,
}

/// Opaque id plus kind tag. Ids are never reused within an engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Handle {
    pub id: u64,
    pub kind: HandleKind,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unknown or destroyed handle {0:?}")]
    BadHandle(Handle),
    #[error("output buffer holds {got} floats, need {need}")]
    BufferTooSmall { got: usize, need: usize },
    #[error("no frame results available yet")]
    NoResults,
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Child object of a scene: the owning scene handle and the scene-local id.
#[derive(Debug, Clone, Copy)]
struct Child {
    scene: u64,
    local: u32,
}

#[derive(Default)]
pub struct Engine {
    scenes: HashMap<u64, Scene>,
    objects: HashMap<u64, Child>,
    shapes: HashMap<u64, Child>,
    next_id: u64,
}

impl Engine {
    pub fn new() -> Self {
        Self::default()
    }

    fn allocate(&mut self, kind: HandleKind) -> Handle {
        self.next_id += 1;
        Handle { id: self.next_id, kind }
    }

    fn scene_mut(&mut self, h: Handle) -> Result<&mut Scene, EngineError> {
        if h.kind != HandleKind::Scene {
            return Err(EngineError::BadHandle(h));
        }
        self.scenes.get_mut(&h.id).ok_or(EngineError::BadHandle(h))
    }

    fn child(&self, h: Handle) -> Result<Child, EngineError> {
        let table = match h.kind {
            HandleKind::ParticleObject => &self.objects,
            HandleKind::Shape => &self.shapes,
            HandleKind::Scene => return Err(EngineError::BadHandle(h)),
        };
        table.get(&h.id).copied().ok_or(EngineError::BadHandle(h))
    }

    pub fn create_scene(&mut self, config: SceneConfig) -> Result<Handle, EngineError> {
        let scene = Scene::new(config)?;
        let h = self.allocate(HandleKind::Scene);
        self.scenes.insert(h.id, scene);
        Ok(h)
    }

    /// Spawns a box of particles with its own material. `spawn.material_id`
    /// is ignored and replaced by the new material.
    pub fn create_particle_object(
        &mut self,
        scene: Handle,
        material: Material,
        spawn: &BoxSpawn,
    ) -> Result<Handle, EngineError> {
        let s = self.scene_mut(scene)?;
        let material_id = s.add_material(material)?;
        let object = s.spawn_box(&BoxSpawn {
            material_id,
            ..spawn.clone()
        })?;
        let h = self.allocate(HandleKind::ParticleObject);
        self.objects.insert(
            h.id,
            Child {
                scene: scene.id,
                local: object.id,
            },
        );
        Ok(h)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn create_shape(
        &mut self,
        scene: Handle,
        geometry: Geometry,
        pose: ShapePose,
        mu_k: Real,
        c_d: Real,
        collision_halfwidth: Real,
        motion: ShapeMotion,
    ) -> Result<Handle, EngineError> {
        let shape = Shape::new(0, geometry, pose, mu_k, c_d, collision_halfwidth).map_err(SceneError::from)?;
        let local = self.scene_mut(scene)?.add_shape(shape, motion)?;
        let h = self.allocate(HandleKind::Shape);
        self.shapes.insert(h.id, Child { scene: scene.id, local });
        Ok(h)
    }

    /// Position and `[w, x, y, z]` orientation the shape reaches at the end
    /// of the next frame.
    pub fn set_shape_pose_target(&mut self, shape: Handle, position: [Real; 3], orientation: [Real; 4]) -> Result<(), EngineError> {
        let c = self.child(shape)?;
        let scene = self.scenes.get_mut(&c.scene).ok_or(EngineError::BadHandle(shape))?;
        scene.set_shape_pose_target(c.local, Vec3::from(position), crate::math::quat_from_wxyz(orientation))?;
        Ok(())
    }

    pub fn advance(&mut self, scene: Handle, dt: Real) -> Result<(), EngineError> {
        Ok(self.scene_mut(scene)?.advance(dt)?)
    }

    pub fn fetch_results(&mut self, scene: Handle) -> Result<Arc<FrameResult>, EngineError> {
        Ok(self.scene_mut(scene)?.fetch_results()?)
    }

    /// Number of active particles in the latest frame.
    pub fn particle_count(&mut self, scene: Handle) -> Result<usize, EngineError> {
        let r = self.scene_mut(scene)?.last_result().ok_or(EngineError::NoResults)?;
        Ok(r.metrics.active_particles)
    }

    /// Writes active particle positions of the latest frame as xyz triples.
    /// Returns the number of particles written.
    pub fn copy_positions(&mut self, scene: Handle, out: &mut [f32]) -> Result<usize, EngineError> {
        let r = self.scene_mut(scene)?.last_result().ok_or(EngineError::NoResults)?;
        let need = 3 * r.metrics.active_particles;
        if out.len() < need {
            return Err(EngineError::BufferTooSmall { got: out.len(), need });
        }
        for (chunk, x) in out.chunks_exact_mut(3).zip(r.active_positions()) {
            chunk.copy_from_slice(x.as_slice());
        }
        Ok(r.metrics.active_particles)
    }

    /// Current pose of a shape as `[x, y, z, w, qx, qy, qz]`.
    pub fn shape_pose(&mut self, shape: Handle) -> Result<[Real; 7], EngineError> {
        let c = self.child(shape)?;
        let scene = self.scenes.get(&c.scene).ok_or(EngineError::BadHandle(shape))?;
        let data = scene.data()?;
        let s = data
            .shapes
            .iter()
            .find(|s| s.id == c.local)
            .ok_or(EngineError::BadHandle(shape))?;
        let q: Quat = s.pose.orientation;
        let [w, x, y, z] = crate::math::quat_to_wxyz(&q);
        let p = s.pose.position;
        Ok([p.x, p.y, p.z, w, x, y, z])
    }

    /// Destroys a scene (with all its children) or a single child object.
    pub fn destroy(&mut self, h: Handle) -> Result<(), EngineError> {
        match h.kind {
            HandleKind::Scene => {
                self.scenes.remove(&h.id).ok_or(EngineError::BadHandle(h))?;
                self.objects.retain(|_, c| c.scene != h.id);
                self.shapes.retain(|_, c| c.scene != h.id);
            }
            HandleKind::ParticleObject => {
                let c = self.child(h)?;
                let scene = self.scenes.get_mut(&c.scene).ok_or(EngineError::BadHandle(h))?;
                scene.remove_object(c.local)?;
                self.objects.remove(&h.id);
            }
            HandleKind::Shape => {
                let c = self.child(h)?;
                let scene = self.scenes.get_mut(&c.scene).ok_or(EngineError::BadHandle(h))?;
                scene.remove_shape(c.local)?;
                self.shapes.remove(&h.id);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::MaterialKind;
    use crate::solver::{BoundaryKind, ExecMode, SolverConfig};

    fn config() -> SceneConfig {
        SceneConfig {
            solver: SolverConfig::Mls { substeps: 1 },
            grid_dims: [10, 10, 10],
            dx: 0.1,
            origin: Vec3::zeros(),
            gravity: Vec3::zeros(),
            boundary: BoundaryKind::Slip,
            mode: ExecMode::Deterministic,
        }
    }

    fn spawn() -> BoxSpawn {
        BoxSpawn {
            min_corner: Vec3::repeat(0.3),
            max_corner: Vec3::repeat(0.5),
            particles_per_cell: 1,
            density: 10.0,
            material_id: 0,
            seed: 0,
            velocity: Vec3::zeros(),
        }
    }

    #[test]
    fn create_destroy_use() {
        let mut e = Engine::new();
        let s = e.create_scene(config()).unwrap();
        let m = Material::new(MaterialKind::NeoHookean, 10.0, 10.0, 0.0).unwrap();
        let o = e.create_particle_object(s, m, &spawn()).unwrap();
        let sh = e
            .create_shape(s, Geometry::sphere(0.05).unwrap(), ShapePose::at(Vec3::repeat(0.8)), 0.0, 1.0, 0.05, ShapeMotion::Static)
            .unwrap();
        e.advance(s, 0.01).unwrap();
        e.fetch_results(s).unwrap();
        let mut buf = vec![0.0; 3 * e.particle_count(s).unwrap()];
        assert_eq!(e.copy_positions(s, &mut buf).unwrap(), 8);
        e.destroy(o).unwrap();
        assert!(matches!(e.destroy(o), Err(EngineError::BadHandle(_))));
        e.set_shape_pose_target(sh, [0.8, 0.7, 0.8], [1.0, 0.0, 0.0, 0.0]).unwrap();
        e.destroy(s).unwrap();
        assert!(e.advance(s, 0.01).is_err());
        assert!(e.set_shape_pose_target(sh, [0.0; 3], [1.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn handles_are_not_reused_and_scenes_are_isolated() {
        let mut e = Engine::new();
        let a = e.create_scene(config()).unwrap();
        e.destroy(a).unwrap();
        let b = e.create_scene(config()).unwrap();
        assert_ne!(a.id, b.id);
        let c = e.create_scene(config()).unwrap();
        let m = Material::new(MaterialKind::NeoHookean, 10.0, 10.0, 0.0).unwrap();
        e.create_particle_object(b, m, &spawn()).unwrap();
        e.advance(b, 0.01).unwrap();
        e.fetch_results(b).unwrap();
        e.advance(c, 0.01).unwrap();
        assert_eq!(e.fetch_results(c).unwrap().metrics.active_particles, 0);
    }

    #[test]
    fn invalid_geometry_rejected() {
        let mut e = Engine::new();
        let s = e.create_scene(config()).unwrap();
        assert!(Geometry::sphere(-1.0).is_err());
        let r = e.create_shape(s, Geometry::Sphere { radius: 1.0 }, ShapePose::default(), -1.0, 1.0, 0.1, ShapeMotion::Static);
        assert!(matches!(r, Err(EngineError::Scene(SceneError::Geometry(_)))));
    }
}
