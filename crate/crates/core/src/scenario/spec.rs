//! Declarative scene files (JSON, version 1, strict).

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ArcGeometry, Geometry, GeometryError, Polyline, Shape, ShapePose, SlicerMesh};
use crate::material::{lame_from_young_poisson, Material, MaterialError, MaterialKind};
use crate::math::{quat_from_wxyz, Real, Vec3};
use crate::rigid::{FreeBody, Keyframe, KinematicTrajectory, RigidError, ShapeMotion};
use crate::scene::{Scene, SceneConfig, SceneError};
use crate::solver::{BoundaryKind, ExecMode, PbmpmConfig, SolverConfig};
use crate::state::BoxSpawn;

pub const SPEC_VERSION: u32 = 1;
pub const DEFAULT_SUBSTEPS: u32 = 10;
pub const DEFAULT_ITERATIONS: u32 = 10;
/// Default slicer / curve band half width, in cells.
pub const DEFAULT_HALFWIDTH_CELLS: Real = 0.75;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid `{field}`: {message}")]
    Semantic { field: String, message: String },
}

fn semantic(field: impl Into<String>, message: impl ToString) -> SpecError {
    SpecError::Semantic {
        field: field.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverName {
    Standard,
    Mls,
    Pbmpm,
}

impl std::str::FromStr for SolverName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "standard" => Ok(Self::Standard),
            "mls" => Ok(Self::Mls),
            "pbmpm" => Ok(Self::Pbmpm),
            _ => Err(format!("unknown solver `{s}` (expected standard, mls or pbmpm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub version: u32,
    pub solver: SolverName,
    pub dt_frame: Real,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub substeps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Real>,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default = "default_gravity")]
    pub gravity: [Real; 3],
    #[serde(default)]
    pub boundary: BoundaryKind,
    #[serde(default)]
    pub particle_objects: Vec<ParticleObjectSpec>,
    #[serde(default)]
    pub shapes: Vec<ShapeSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn default_gravity() -> [Real; 3] {
    [0.0, -9.81, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dims: [usize; 3],
    pub dx: Real,
    #[serde(default)]
    pub origin: [Real; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleObjectSpec {
    #[serde(default)]
    pub name: String,
    pub min: [Real; 3],
    pub max: [Real; 3],
    pub density: Real,
    #[serde(default = "default_ppc")]
    pub particles_per_cell: u32,
    pub material: MaterialSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub velocity: [Real; 3],
}

fn default_ppc() -> u32 {
    8
}

/// Either Young's modulus and Poisson ratio or the Lamé pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Real>,
}

impl MaterialSpec {
    pub fn young_poisson(e: Real, nu: Real) -> Self {
        Self {
            youngs_modulus: Some(e),
            poisson_ratio: Some(nu),
            mu: None,
            lambda: None,
        }
    }

    pub fn lame(&self) -> Result<(Real, Real), MaterialError> {
        match (self.youngs_modulus, self.poisson_ratio, self.mu, self.lambda) {
            (Some(e), Some(nu), None, None) => lame_from_young_poisson(e, nu),
            (None, None, Some(mu), Some(lambda)) => Ok((mu, lambda)),
            _ => Err(MaterialError::BadParameters {
                mu: self.mu.unwrap_or(Real::NAN),
                lambda: self.lambda.unwrap_or(Real::NAN),
                beta: Real::NAN,
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Plane {
        normal: [Real; 3],
    },
    Sphere {
        radius: Real,
    },
    Box {
        half_extents: [Real; 3],
    },
    QuadSlicer {
        vertices: [[Real; 3]; 4],
        /// Index of the spine edge, from vertex `spine_edge` to the next.
        spine_edge: usize,
        spine_radius: Real,
    },
    TriangleMeshSlicer {
        vertices: Vec<[Real; 3]>,
        indices: Vec<[u32; 3]>,
        spine_edges: Vec<[u32; 2]>,
        spine_radius: Real,
    },
    Arc {
        radius: Real,
        angle: Real,
    },
    ConnectedLineSegments {
        vertices: Vec<[Real; 3]>,
    },
}

impl GeometrySpec {
    pub fn build(&self) -> Result<Geometry, GeometryError> {
        let v = |a: &[Real; 3]| Vec3::from(*a);
        Ok(match self {
            GeometrySpec::Plane { normal } => Geometry::plane(v(normal))?,
            GeometrySpec::Sphere { radius } => Geometry::sphere(*radius)?,
            GeometrySpec::Box { half_extents } => Geometry::cuboid(v(half_extents))?,
            GeometrySpec::QuadSlicer {
                vertices,
                spine_edge,
                spine_radius,
            } => Geometry::QuadSlicer(SlicerMesh::quad(vertices.map(|p| v(&p)), *spine_edge, *spine_radius)?),
            GeometrySpec::TriangleMeshSlicer {
                vertices,
                indices,
                spine_edges,
                spine_radius,
            } => Geometry::TriangleMeshSlicer(SlicerMesh::triangle_mesh(
                vertices.iter().map(v).collect(),
                indices.clone(),
                spine_edges.clone(),
                *spine_radius,
            )?),
            GeometrySpec::Arc { radius, angle } => Geometry::Arc(ArcGeometry::new(*radius, *angle)?),
            GeometrySpec::ConnectedLineSegments { vertices } => {
                Geometry::ConnectedLineSegments(Polyline::new(vertices.iter().map(v).collect())?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyframeSpec {
    pub time: Real,
    pub position: [Real; 3],
    #[serde(default = "identity_wxyz")]
    pub orientation: [Real; 4],
}

fn identity_wxyz() -> [Real; 4] {
    [1.0, 0.0, 0.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MotionSpec {
    #[default]
    Static,
    Trajectory {
        keyframes: Vec<KeyframeSpec>,
    },
    Free {
        mass: Real,
        /// Body-frame principal inertia; derived from the geometry when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inertia: Option<[Real; 3]>,
        #[serde(default)]
        velocity: [Real; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSpec {
    #[serde(default)]
    pub name: String,
    pub geometry: GeometrySpec,
    #[serde(default)]
    pub position: [Real; 3],
    #[serde(default = "identity_wxyz")]
    pub orientation: [Real; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_k: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_d: Option<Real>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collision_halfwidth: Option<Real>,
    #[serde(default)]
    pub motion: MotionSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DumpFormat {
    Bin,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_stride")]
    pub stride: u32,
    #[serde(default = "default_formats")]
    pub formats: Vec<DumpFormat>,
    /// Compute the connected-component count for every metrics row.
    #[serde(default = "default_true")]
    pub components: bool,
}

fn default_stride() -> u32 {
    1
}

fn default_formats() -> Vec<DumpFormat> {
    vec![DumpFormat::Bin]
}

fn default_true() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            stride: default_stride(),
            formats: default_formats(),
            components: true,
        }
    }
}

impl SceneSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: SceneSpec = serde_json::from_str(text).map_err(|e| SpecError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.materialize()
    }

    pub fn load(path: &Path) -> Result<Self, SpecError> {
        let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene spec serializes")
    }

    pub fn grid(&self) -> &GridSpec {
        self.grid.as_ref().expect("materialized spec has a grid")
    }

    /// Validates the spec and fills every default explicitly.
    pub fn materialize(mut self) -> Result<Self, SpecError> {
        if self.version != SPEC_VERSION {
            return Err(semantic("version", format!("expected {SPEC_VERSION}, got {}", self.version)));
        }
        if !(self.dt_frame > 0.0) || !self.dt_frame.is_finite() {
            return Err(semantic("dt_frame", "must be positive"));
        }
        let grid = self.grid.as_ref().ok_or_else(|| semantic("grid", "missing grid block"))?;
        if grid.dims.iter().any(|&d| d < 4) {
            return Err(semantic("grid.dims", "each axis needs at least 4 nodes"));
        }
        if !(grid.dx > 0.0) {
            return Err(semantic("grid.dx", "must be positive"));
        }
        let dx = grid.dx;
        match self.solver {
            SolverName::Standard | SolverName::Mls => {
                if self.iterations.is_some() {
                    return Err(semantic("iterations", "only valid for the pbmpm solver"));
                }
                let n = self.substeps.unwrap_or(DEFAULT_SUBSTEPS);
                if n == 0 {
                    return Err(semantic("substeps", "must be at least 1"));
                }
                self.substeps = Some(n);
                if self.beta.is_some() {
                    return Err(semantic("beta", "only valid for the pbmpm solver"));
                }
            }
            SolverName::Pbmpm => {
                if self.substeps.is_some() {
                    return Err(semantic("substeps", "pbmpm uses `iterations`"));
                }
                let n = self.iterations.unwrap_or(DEFAULT_ITERATIONS);
                if n == 0 {
                    return Err(semantic("iterations", "must be at least 1"));
                }
                self.iterations = Some(n);
                match self.beta {
                    Some(b) if (0.0..=1.0).contains(&b) => {}
                    Some(_) => return Err(semantic("beta", "must lie in [0, 1]")),
                    None => return Err(semantic("beta", "required for the pbmpm solver")),
                }
            }
        }
        for (i, o) in self.particle_objects.iter().enumerate() {
            o.material
                .lame()
                .map_err(|e| semantic(format!("particle_objects[{i}].material"), e))?;
            if !(o.density > 0.0) {
                return Err(semantic(format!("particle_objects[{i}].density"), "must be positive"));
            }
        }
        for (i, s) in self.shapes.iter_mut().enumerate() {
            let field = |f: &str| format!("shapes[{i}].{f}");
            let geometry = s.geometry.build().map_err(|e| semantic(field("geometry"), e))?;
            s.mu_k.get_or_insert(0.0);
            s.c_d.get_or_insert(1.0);
            s.collision_halfwidth.get_or_insert(DEFAULT_HALFWIDTH_CELLS * dx);
            s.orientation = normalize_quat(s.orientation).ok_or_else(|| semantic(field("orientation"), "not a unit quaternion"))?;
            match &mut s.motion {
                MotionSpec::Static => {}
                MotionSpec::Trajectory { keyframes } => {
                    for k in keyframes.iter_mut() {
                        k.orientation = normalize_quat(k.orientation)
                            .ok_or_else(|| semantic(field("motion.keyframes"), "not a unit quaternion"))?;
                    }
                    build_trajectory(keyframes).map_err(|e| semantic(field("motion.keyframes"), e))?;
                }
                MotionSpec::Free { mass, inertia, .. } => {
                    if inertia.is_none() {
                        let body = default_body(&geometry, *mass).map_err(|e| semantic(field("motion"), e))?;
                        *inertia = Some(body.into());
                    }
                    FreeBody::new(*mass, Vec3::from(inertia.unwrap()), ShapePose::default())
                        .map_err(|e| semantic(field("motion"), e))?;
                }
            }
            Shape::new(0, geometry, ShapePose::default(), s.mu_k.unwrap(), s.c_d.unwrap(), s.collision_halfwidth.unwrap())
                .map_err(|e| semantic(format!("shapes[{i}]"), e))?;
        }
        if self.outputs.stride == 0 {
            return Err(semantic("outputs.stride", "must be at least 1"));
        }
        Ok(self)
    }

    pub fn solver_config(&self) -> SolverConfig {
        match self.solver {
            SolverName::Standard => SolverConfig::Standard {
                substeps: self.substeps.unwrap_or(DEFAULT_SUBSTEPS),
            },
            SolverName::Mls => SolverConfig::Mls {
                substeps: self.substeps.unwrap_or(DEFAULT_SUBSTEPS),
            },
            SolverName::Pbmpm => SolverConfig::Pbmpm(PbmpmConfig {
                iterations: self.iterations.unwrap_or(DEFAULT_ITERATIONS),
            }),
        }
    }

    /// Switches the solver, keeping the spec valid. A pbmpm spec gets
    /// `beta` (default 1) and `iterations`, the others get `substeps`.
    pub fn with_solver(mut self, solver: SolverName, steps: Option<u32>, beta: Option<Real>) -> Self {
        self.solver = solver;
        match solver {
            SolverName::Pbmpm => {
                self.substeps = None;
                self.iterations = Some(steps.or(self.iterations).unwrap_or(DEFAULT_ITERATIONS));
                self.beta = Some(beta.or(self.beta).unwrap_or(1.0));
            }
            _ => {
                self.iterations = None;
                self.beta = None;
                self.substeps = Some(steps.or(self.substeps).unwrap_or(DEFAULT_SUBSTEPS));
            }
        }
        self
    }

    /// Builds a runnable scene.
    pub fn build_scene(&self, mode: ExecMode) -> Result<Scene, SceneError> {
        let g = self.grid();
        let solver = self.solver_config();
        let mut scene = Scene::new(SceneConfig {
            solver,
            grid_dims: g.dims,
            dx: g.dx,
            origin: Vec3::from(g.origin),
            gravity: Vec3::from(self.gravity),
            boundary: self.boundary,
            mode,
        })?;
        let kind = solver.material_kind();
        let beta = self.beta.unwrap_or(0.0);
        for o in &self.particle_objects {
            let (mu, lambda) = o.material.lame()?;
            let beta = if kind == MaterialKind::CorotationalPb { beta } else { 0.0 };
            let material = Material::new(kind, mu, lambda, beta)?;
            let id = scene.add_material(material)?;
            scene.spawn_box(&BoxSpawn {
                min_corner: Vec3::from(o.min),
                max_corner: Vec3::from(o.max),
                particles_per_cell: o.particles_per_cell,
                density: o.density,
                material_id: id,
                seed: o.seed,
                velocity: Vec3::from(o.velocity),
            })?;
        }
        for s in &self.shapes {
            let pose = ShapePose {
                position: Vec3::from(s.position),
                orientation: quat_from_wxyz(s.orientation),
                ..ShapePose::default()
            };
            let shape = Shape::new(
                0,
                s.geometry.build()?,
                pose,
                s.mu_k.unwrap_or(0.0),
                s.c_d.unwrap_or(1.0),
                s.collision_halfwidth.unwrap_or(DEFAULT_HALFWIDTH_CELLS * g.dx),
            )?;
            let motion = match &s.motion {
                MotionSpec::Static => ShapeMotion::Static,
                MotionSpec::Trajectory { keyframes } => {
                    ShapeMotion::Kinematic(build_trajectory(keyframes).expect("validated trajectory"))
                }
                MotionSpec::Free {
                    mass,
                    inertia,
                    velocity,
                } => {
                    let inertia = match inertia {
                        Some(i) => Vec3::from(*i),
                        None => default_body(&shape.geometry, *mass).expect("validated free body"),
                    };
                    let mut body = FreeBody::new(*mass, inertia, pose).expect("validated free body");
                    body.pose.linear_velocity = Vec3::from(*velocity);
                    ShapeMotion::Free(body)
                }
            };
            scene.add_shape(shape, motion)?;
        }
        Ok(scene)
    }
}

fn normalize_quat(q: [Real; 4]) -> Option<[Real; 4]> {
    let n = q.iter().map(|v| v * v).sum::<Real>().sqrt();
    ((n - 1.0).abs() < 1e-3).then(|| q.map(|v| v / n))
}

fn build_trajectory(keyframes: &[KeyframeSpec]) -> Result<KinematicTrajectory, RigidError> {
    KinematicTrajectory::new(
        keyframes
            .iter()
            .map(|k| Keyframe {
                time: k.time,
                position: Vec3::from(k.position),
                orientation: quat_from_wxyz(k.orientation),
            })
            .collect(),
    )
}

/// Inertia of a uniform solid for sphere and box geometries.
fn default_body(geometry: &Geometry, mass: Real) -> Result<Vec3, RigidError> {
    let pose = ShapePose::default();
    let body = match geometry {
        Geometry::Sphere { radius } => FreeBody::solid_sphere(mass, *radius, pose)?,
        Geometry::Box { half_extents } => FreeBody::solid_box(mass, *half_extents, pose)?,
        _ => return Err(RigidError::BadInertia),
    };
    Ok(body.inertia_diag)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "version": 1,
        "solver": "mls",
        "dt_frame": 0.02,
        "grid": { "dims": [16, 16, 16], "dx": 0.1 }
    }"#;

    #[test]
    fn defaults_are_materialized() {
        let s = SceneSpec::from_json(MINIMAL).unwrap();
        assert_eq!(s.substeps, Some(10));
        assert_eq!(s.gravity, [0.0, -9.81, 0.0]);
        assert_eq!(s.outputs.stride, 1);
        let again = SceneSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn missing_grid_names_field() {
        let text = r#"{ "version": 1, "solver": "mls", "dt_frame": 0.02 }"#;
        match SceneSpec::from_json(text) {
            Err(SpecError::Semantic { field, .. }) => assert_eq!(field, "grid"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_solver_and_fields_rejected() {
        let text = MINIMAL.replace("\"mls\"", "\"flip\"");
        let err = SceneSpec::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("unknown variant"), "{err}");
        let text = MINIMAL.replace("\"version\": 1,", "\"version\": 1, \"colour\": 3,");
        assert!(matches!(SceneSpec::from_json(&text), Err(SpecError::Parse { .. })));
        let text = MINIMAL.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(SceneSpec::from_json(&text), Err(SpecError::Semantic { .. })));
    }

    #[test]
    fn pbmpm_requires_beta() {
        let text = MINIMAL.replace("\"mls\"", "\"pbmpm\"");
        match SceneSpec::from_json(&text) {
            Err(SpecError::Semantic { field, .. }) => assert_eq!(field, "beta"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shape_defaults_and_validation() {
        let text = MINIMAL.replace(
            "\"grid\"",
            r#""shapes": [
                { "geometry": { "type": "sphere", "radius": 0.1 }, "position": [0.5, 0.5, 0.5],
                  "motion": { "type": "free", "mass": 2.0 } }
            ],
            "grid""#,
        );
        let s = SceneSpec::from_json(&text).unwrap();
        assert_eq!(s.shapes[0].collision_halfwidth, Some(0.75 * 0.1));
        assert!(matches!(s.shapes[0].motion, MotionSpec::Free { inertia: Some(_), .. }));
        let bad = text.replace("\"radius\": 0.1", "\"radius\": -1");
        match SceneSpec::from_json(&bad) {
            Err(SpecError::Semantic { field, .. }) => assert_eq!(field, "shapes[0].geometry"),
            other => panic!("unexpected {other:?}"),
        }
        let bad = text.replace("\"radius\": 0.1", "\"radius\": 0.1, \"height\": 2");
        assert!(SceneSpec::from_json(&bad).is_err());
    }

    #[test]
    fn with_solver_switches_schedule() {
        let s = SceneSpec::from_json(MINIMAL).unwrap().with_solver(SolverName::Pbmpm, Some(20), None);
        let s = s.materialize().unwrap();
        assert_eq!(s.iterations, Some(20));
        assert_eq!(s.substeps, None);
        assert_eq!(s.beta, Some(1.0));
    }
}
