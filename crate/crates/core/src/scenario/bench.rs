//! Solver timing on the falling-cube configuration.

use std::io::Write;
use std::time::Instant;

use crate::math::Real;
use crate::scene::SceneError;
use crate::solver::ExecMode;

use super::spec::{GridSpec, SceneSpec, SolverName};

pub const BENCH_HEADER: &str = "solver,particles,ms_per_step_mean,ms_per_step_std";
pub const BENCH_GRID: usize = 56;
pub const WARMUP_FRAMES: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub label: &'static str,
    pub solver: SolverName,
    /// Substeps for the force-based solvers, iterations for pbmpm.
    pub steps: u32,
}

pub const BENCH_CONFIGS: [BenchConfig; 4] = [
    BenchConfig {
        label: "mls",
        solver: SolverName::Mls,
        steps: 10,
    },
    BenchConfig {
        label: "standard",
        solver: SolverName::Standard,
        steps: 10,
    },
    BenchConfig {
        label: "pbmpm_10",
        solver: SolverName::Pbmpm,
        steps: 10,
    },
    BenchConfig {
        label: "pbmpm_20",
        solver: SolverName::Pbmpm,
        steps: 20,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub solver: String,
    pub particles: usize,
    /// Mean and standard deviation of wall time per frame; `None` when the
    /// configuration could not be set up.
    pub timing: Option<(f64, f64)>,
}

/// Template resized to hold about `particles` particles in one cube, on a
/// 56^3 grid. The cube keeps the template's lower face and horizontal centre.
pub fn resize_template(template: &SceneSpec, particles: usize) -> SceneSpec {
    let mut spec = template.clone();
    let dx = template.grid().dx;
    spec.grid = Some(GridSpec {
        dims: [BENCH_GRID; 3],
        ..template.grid().clone()
    });
    if let Some(obj) = spec.particle_objects.first_mut() {
        let per_axis = (obj.particles_per_cell as f64).cbrt().round().max(1.0);
        let spacing = dx / per_axis as Real;
        let n = (particles as f64).cbrt().round().max(1.0) as Real;
        let side = n * spacing;
        let cx = 0.5 * (obj.min[0] + obj.max[0]);
        let cz = 0.5 * (obj.min[2] + obj.max[2]);
        obj.min = [cx - 0.5 * side, obj.min[1], cz - 0.5 * side];
        obj.max = [cx + 0.5 * side, obj.min[1] + side, cz + 0.5 * side];
    }
    spec.particle_objects.truncate(1);
    spec
}

fn time_config(spec: &SceneSpec, steps: u32, mode: ExecMode) -> Result<(usize, Vec<f64>), SceneError> {
    let mut scene = spec.build_scene(mode)?;
    let count = scene.data()?.state.particles.len();
    for _ in 0..WARMUP_FRAMES {
        scene.advance(spec.dt_frame)?;
        scene.fetch_results()?;
    }
    let mut samples = Vec::with_capacity(steps as usize);
    for _ in 0..steps {
        let t0 = Instant::now();
        scene.advance(spec.dt_frame)?;
        scene.fetch_results()?;
        samples.push(t0.elapsed().as_secs_f64() * 1e3);
    }
    Ok((count, samples))
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Times `steps` frames (after warm-up) for every configuration and count.
pub fn benchmark(template: &SceneSpec, counts: &[usize], steps: u32, mode: ExecMode) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &count in counts {
        let sized = resize_template(template, count);
        for cfg in BENCH_CONFIGS {
            let spec = sized.clone().with_solver(cfg.solver, Some(cfg.steps), None);
            let row = match spec.materialize().map_err(|e| e.to_string()).and_then(|spec| {
                time_config(&spec, steps.max(1), mode).map_err(|e| e.to_string())
            }) {
                Ok((particles, samples)) => BenchRow {
                    solver: cfg.label.to_string(),
                    particles,
                    timing: Some(mean_std(&samples)),
                },
                Err(_) => BenchRow {
                    solver: cfg.label.to_string(),
                    particles: count,
                    timing: None,
                },
            };
            rows.push(row);
        }
    }
    rows
}

pub fn write_bench_csv(rows: &[BenchRow], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{BENCH_HEADER}")?;
    for r in rows {
        match r.timing {
            Some((mean, std)) => writeln!(w, "{},{},{:.4},{:.4}", r.solver, r.particles, mean, std)?,
            None => writeln!(w, "{},{},skipped,skipped", r.solver, r.particles)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_format() {
        let rows = vec![
            BenchRow {
                solver: "mls".into(),
                particles: 1000,
                timing: Some((1.5, 0.25)),
            },
            BenchRow {
                solver: "pbmpm_20".into(),
                particles: 8,
                timing: None,
            },
        ];
        let mut out = Vec::new();
        write_bench_csv(&rows, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "solver,particles,ms_per_step_mean,ms_per_step_std\nmls,1000,1.5000,0.2500\npbmpm_20,8,skipped,skipped\n"
        );
    }

    #[test]
    fn mean_and_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}
