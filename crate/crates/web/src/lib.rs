//! Browser demo: three small slab scenes drawn in 2D by `www/index.html`.

use mpm_core::math::{Quat, Real, Vec3};
use mpm_core::scenario::SceneSpec;
use mpm_core::scene::Scene;
use mpm_core::solver::ExecMode;
use wasm_bindgen::prelude::*;

const DT_FRAME: Real = 1.0 / 60.0;
const NEEDLE_CENTRE: [Real; 3] = [0.5, 0.45, 0.1125];
const NEEDLE_RADIUS: Real = 0.12;
const NEEDLE_SPIN: Real = 1.0;
const BLADE_Y: Real = 0.1;
const BLADE_HALF: Real = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    CubeDrop,
    Cutting,
    Needle { lateral: bool },
}

fn tissue(min: [Real; 3], max: [Real; 3], e: Real) -> String {
    format!(
        r#"{{ "min": {min:?}, "max": {max:?}, "density": 1000.0, "particles_per_cell": 8,
            "material": {{ "youngs_modulus": {e}, "poisson_ratio": 0.3 }}, "seed": 1 }}"#
    )
}

fn floor(y: Real, mu_k: Real) -> String {
    format!(r#"{{ "geometry": {{ "type": "plane", "normal": [0.0, 1.0, 0.0] }}, "position": [0.0, {y}, 0.0], "mu_k": {mu_k} }}"#)
}

fn scene_json(solver: &str, gravity: Real, dims: [usize; 3], objects: &[String], shapes: &[String]) -> String {
    let solver = match solver {
        "pbmpm" => r#""solver": "pbmpm", "iterations": 10, "beta": 0.9"#.to_string(),
        other => format!(r#""solver": "{other}", "substeps": 10"#),
    };
    format!(
        r#"{{ "version": 1, {solver}, "dt_frame": {DT_FRAME}, "gravity": [0.0, {gravity}, 0.0],
            "grid": {{ "dims": {dims:?}, "dx": 0.025 }},
            "particle_objects": [{}], "shapes": [{}],
            "outputs": {{ "components": false }} }}"#,
        objects.join(","),
        shapes.join(",")
    )
}

/// Demo state without any JavaScript types, so it also runs natively.
pub struct DemoCore {
    scene: Scene,
    mode: Mode,
    /// Axes of the 2D view.
    view: [usize; 2],
    tool: Option<u32>,
    blade: [Real; 2],
    resistive_sum: f64,
    impulse: [f64; 3],
}

impl DemoCore {
    fn build(json: &str, mode: Mode, view: [usize; 2]) -> Result<Self, String> {
        let spec = SceneSpec::from_json(json).map_err(|e| e.to_string())?;
        let mut scene = spec.build_scene(ExecMode::Deterministic).map_err(|e| e.to_string())?;
        scene.use_worker = false;
        let tool = (mode != Mode::CubeDrop).then(|| spec.shapes.len() as u32 - 1);
        Ok(Self {
            scene,
            mode,
            view,
            tool,
            blade: [BLADE_HALF + 0.02, 0.5],
            resistive_sum: 0.0,
            impulse: [0.0; 3],
        })
    }

    /// A soft cube dropped on the floor, seen from the side.
    pub fn cube_drop(solver: &str, youngs_modulus: Real) -> Result<Self, String> {
        if !matches!(solver, "standard" | "mls" | "pbmpm") {
            return Err(format!("unknown solver {solver}"));
        }
        let json = scene_json(
            solver,
            -9.81,
            [40, 40, 9],
            &[tissue([0.35, 0.45, 0.075], [0.65, 0.75, 0.15], youngs_modulus)],
            &[floor(0.1, 0.3)],
        );
        Self::build(&json, Mode::CubeDrop, [0, 1])
    }

    /// A tissue slab on the floor and a blade driven by `set_blade`, seen
    /// from above.
    pub fn cutting() -> Result<Self, String> {
        let blade = format!(
            r#"{{ "geometry": {{ "type": "quad_slicer", "spine_edge": 2, "spine_radius": 0.01,
                 "vertices": [[-{h}, -0.06, 0.0], [{h}, -0.06, 0.0], [{h}, 0.12, 0.0], [-{h}, 0.12, 0.0]] }},
                 "position": [{x}, {BLADE_Y}, 0.5], "mu_k": 0.2, "c_d": 0.95, "collision_halfwidth": 0.02 }}"#,
            h = BLADE_HALF,
            x = BLADE_HALF + 0.02,
        );
        let json = scene_json(
            "mls",
            -9.81,
            [40, 10, 40],
            &[tissue([0.3, 0.1, 0.3], [0.7, 0.16, 0.7], 5000.0)],
            &[floor(0.1, 0.6), blade],
        );
        Self::build(&json, Mode::Cutting, [0, 2])
    }

    /// A curved needle embedded in tissue, either spun along its own arc or
    /// pushed sideways at the same tip speed.
    pub fn needle(lateral: bool) -> Result<Self, String> {
        let needle = format!(
            r#"{{ "geometry": {{ "type": "arc", "radius": {NEEDLE_RADIUS}, "angle": 3.14159265 }},
                 "position": {NEEDLE_CENTRE:?}, "orientation": [0.0, 0.0, 0.0, 1.0],
                 "mu_k": 0.1, "c_d": 0.98, "collision_halfwidth": 0.015 }}"#
        );
        let json = scene_json(
            "mls",
            0.0,
            [40, 32, 9],
            &[tissue([0.25, 0.2, 0.075], [0.75, 0.45, 0.15], 8000.0)],
            &[floor(0.2, 0.8), needle],
        );
        Self::build(&json, Mode::Needle { lateral }, [0, 1])
    }

    /// Moves the blade towards view coordinates `(x, z)` for the next frame.
    pub fn set_blade(&mut self, x: Real, z: Real) {
        self.blade = [x.clamp(BLADE_HALF + 0.02, 0.98 - BLADE_HALF), z.clamp(0.1, 0.9)];
    }

    fn drive_tool(&mut self) -> Result<(), String> {
        let Some(id) = self.tool else { return Ok(()) };
        let t = (self.scene.data().map_err(|e| e.to_string())?.time as Real) + DT_FRAME;
        let flip = Quat::from_axis_angle(&Vec3::z_axis(), std::f32::consts::PI);
        let (position, orientation) = match self.mode {
            Mode::Cutting => (Vec3::new(self.blade[0], BLADE_Y, self.blade[1]), Quat::identity()),
            Mode::Needle { lateral: false } => (
                Vec3::from(NEEDLE_CENTRE),
                Quat::from_axis_angle(&Vec3::z_axis(), NEEDLE_SPIN * t) * flip,
            ),
            Mode::Needle { lateral: true } => (
                Vec3::from(NEEDLE_CENTRE) + Vec3::x() * (NEEDLE_SPIN * NEEDLE_RADIUS * t),
                flip,
            ),
            Mode::CubeDrop => return Ok(()),
        };
        self.scene
            .set_shape_pose_target(id, position, orientation)
            .map_err(|e| e.to_string())
    }

    pub fn step(&mut self) -> Result<(), String> {
        if matches!(self.mode, Mode::Needle { .. }) && self.time() >= 0.5 {
            return Ok(());
        }
        self.drive_tool()?;
        self.scene.advance(DT_FRAME).map_err(|e| e.to_string())?;
        let frame = self.scene.fetch_results().map_err(|e| e.to_string())?;
        if let Some(s) = self.tool.and_then(|id| frame.shapes.iter().find(|s| s.id == id)) {
            self.resistive_sum += s.resistive;
            for k in 0..3 {
                self.impulse[k] += s.impulse[k];
            }
        }
        Ok(())
    }

    pub fn frame(&self) -> u64 {
        self.scene.data().map(|d| d.frame).unwrap_or(0)
    }

    pub fn time(&self) -> f64 {
        self.scene.data().map(|d| d.time).unwrap_or(0.0)
    }

    /// Active particle positions projected on the view axes, interleaved.
    pub fn points(&self) -> Vec<f32> {
        let Ok(data) = self.scene.data() else { return Vec::new() };
        let p = &data.state.particles;
        p.active_iter()
            .flat_map(|i| [p.x[i][self.view[0]], p.x[i][self.view[1]]])
            .collect()
    }

    /// The driven tool drawn as a 2D polyline in view coordinates.
    pub fn tool_outline(&self) -> Vec<f32> {
        let (Some(id), Ok(data)) = (self.tool, self.scene.data()) else {
            return Vec::new();
        };
        let Some(shape) = data.shapes.iter().find(|s| s.id == id) else {
            return Vec::new();
        };
        let local: Vec<Vec3> = match self.mode {
            Mode::Cutting => vec![Vec3::new(-BLADE_HALF, 0.0, 0.0), Vec3::new(BLADE_HALF, 0.0, 0.0)],
            _ => (0..=32)
                .map(|k| {
                    let a = std::f32::consts::PI * k as Real / 32.0;
                    Vec3::new(a.cos(), a.sin(), 0.0) * NEEDLE_RADIUS
                })
                .collect(),
        };
        local
            .iter()
            .map(|p| shape.pose.to_world(p))
            .flat_map(|w| [w[self.view[0]], w[self.view[1]]])
            .collect()
    }

    /// Summary line for the page.
    pub fn readout(&self) -> String {
        let frames = self.frame().max(1) as f64;
        match self.mode {
            Mode::CubeDrop => format!("frame {}  t = {:.2} s", self.frame(), self.time()),
            _ => {
                let i = self.impulse;
                format!(
                    "t = {:.2} s  resistive {:.3e} kg m/s per frame  |impulse| {:.3e} N s",
                    self.time(),
                    self.resistive_sum / frames,
                    (i[0] * i[0] + i[1] * i[1] + i[2] * i[2]).sqrt()
                )
            }
        }
    }

    pub fn mean_resistive(&self) -> f64 {
        self.resistive_sum / self.frame().max(1) as f64
    }
}

#[wasm_bindgen]
pub struct Demo {
    core: DemoCore,
}

fn js(e: String) -> JsError {
    JsError::new(&e)
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(js_name = cubeDrop)]
    pub fn cube_drop(solver: &str, youngs_modulus: f32) -> Result<Demo, JsError> {
        DemoCore::cube_drop(solver, youngs_modulus).map(|core| Demo { core }).map_err(js)
    }

    pub fn cutting() -> Result<Demo, JsError> {
        DemoCore::cutting().map(|core| Demo { core }).map_err(js)
    }

    pub fn needle(lateral: bool) -> Result<Demo, JsError> {
        DemoCore::needle(lateral).map(|core| Demo { core }).map_err(js)
    }

    #[wasm_bindgen(js_name = setBlade)]
    pub fn set_blade(&mut self, x: f32, z: f32) {
        self.core.set_blade(x, z);
    }

    pub fn step(&mut self) -> Result<(), JsError> {
        self.core.step().map_err(js)
    }

    pub fn points(&self) -> Vec<f32> {
        self.core.points()
    }

    #[wasm_bindgen(js_name = toolOutline)]
    pub fn tool_outline(&self) -> Vec<f32> {
        self.core.tool_outline()
    }

    pub fn readout(&self) -> String {
        self.core.readout()
    }
}
