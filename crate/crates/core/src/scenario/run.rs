//! Frame loop for declarative scenes: particle dumps, metrics and summary.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::math::{Real, Vec3};
use crate::scene::{FrameResult, SceneError};
use crate::solver::{ExecMode, SolverError};

use super::components::{compute_components, mean_nearest_neighbor_spacing, DEFAULT_RADIUS_FACTOR};
use super::spec::{DumpFormat, SceneSpec};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scene(#[from] SceneError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub frames: u64,
    pub out_dir: PathBuf,
    pub mode: ExecMode,
    /// Overrides the scene's output stride.
    pub stride: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub frames_requested: u64,
    pub frames_completed: u64,
    pub last_good_frame: u64,
    pub nan: bool,
    pub error: Option<String>,
    pub particles: usize,
    pub wall_seconds: f64,
    pub final_component_count: Option<usize>,
}

impl RunSummary {
    pub fn success(&self) -> bool {
        !self.nan && self.error.is_none() && self.frames_completed == self.frames_requested
    }
}

pub fn frame_file_name(frame: u64, format: DumpFormat) -> String {
    match format {
        DumpFormat::Bin => format!("frame_{frame:06}.bin"),
        DumpFormat::Csv => format!("frame_{frame:06}.csv"),
    }
}

/// Binary dump: little-endian `u64` count, then `f32` xyz triples.
pub fn write_frame_bin<'a>(path: &Path, positions: impl ExactSizeIterator<Item = &'a Vec3>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&(positions.len() as u64).to_le_bytes())?;
    for p in positions {
        for c in p.iter() {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn read_frame_bin(path: &Path) -> std::io::Result<Vec<[f32; 3]>> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || std::io::Error::new(std::io::ErrorKind::InvalidData, "truncated frame dump");
    let count = u64::from_le_bytes(bytes.get(..8).ok_or_else(bad)?.try_into().unwrap()) as usize;
    let body = bytes.get(8..8 + 12 * count).ok_or_else(bad)?;
    Ok(body
        .chunks_exact(12)
        .map(|c| {
            let f = |o: usize| f32::from_le_bytes(c[o..o + 4].try_into().unwrap());
            [f(0), f(4), f(8)]
        })
        .collect())
}

fn write_frame_csv<'a>(path: &Path, positions: impl Iterator<Item = &'a Vec3>) -> std::io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y,z")?;
    for p in positions {
        writeln!(w, "{},{},{}", p.x, p.y, p.z)?;
    }
    w.flush()
}

/// Fixed metrics columns, followed by three impulse columns per shape and
/// the component count.
pub fn metrics_header(shape_count: usize) -> String {
    let mut h = String::from(
        "frame,sim_time,wall_ms,total_mass,momentum_x,momentum_y,momentum_z,kinetic_energy,pushed_out,inverted_f",
    );
    for k in 0..shape_count {
        h.push_str(&format!(",shape{k}_impulse_x,shape{k}_impulse_y,shape{k}_impulse_z"));
    }
    h.push_str(",component_count");
    h
}

fn metrics_row(r: &FrameResult, wall_ms: f64, components: Option<usize>) -> String {
    let m = &r.metrics;
    let mut row = format!(
        "{},{:.6},{:.3},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{},{}",
        r.frame,
        r.time,
        wall_ms,
        m.total_mass,
        m.total_momentum[0],
        m.total_momentum[1],
        m.total_momentum[2],
        m.kinetic_energy,
        m.pushed_out,
        m.inverted,
    );
    for s in &r.shapes {
        row.push_str(&format!(",{:.9e},{:.9e},{:.9e}", s.impulse[0], s.impulse[1], s.impulse[2]));
    }
    match components {
        Some(c) => row.push_str(&format!(",{c}")),
        None => row.push(','),
    }
    row
}

/// Runs `options.frames` frames of `spec`, writing dumps, `metrics.csv` and
/// `summary.json` into `options.out_dir`.
///
/// A non-finite solver state stops the run; the summary then records the
/// last good frame and `nan = true`.
pub fn run_scenario(spec: &SceneSpec, options: &RunOptions) -> Result<RunSummary, RunError> {
    let out = &options.out_dir;
    std::fs::create_dir_all(out).map_err(io_err(out))?;
    let stride = options.stride.unwrap_or(spec.outputs.stride).max(1) as u64;
    let started = Instant::now();

    let mut scene = spec.build_scene(options.mode)?;
    let shape_count = scene.data()?.shapes.len();
    let initial: Vec<Vec3> = scene.data()?.state.particles.x.clone();
    let spacing = mean_nearest_neighbor_spacing(&initial);
    let particles = initial.len();

    let metrics_path = out.join("metrics.csv");
    let mut metrics = BufWriter::new(File::create(&metrics_path).map_err(io_err(&metrics_path))?);
    writeln!(metrics, "{}", metrics_header(shape_count)).map_err(io_err(&metrics_path))?;

    let dump = |frame: u64, positions: &[&Vec3]| -> Result<(), RunError> {
        for &format in &spec.outputs.formats {
            let path = out.join(frame_file_name(frame, format));
            match format {
                DumpFormat::Bin => write_frame_bin(&path, positions.iter().copied()),
                DumpFormat::Csv => write_frame_csv(&path, positions.iter().copied()),
            }
            .map_err(io_err(&path))?;
        }
        Ok(())
    };
    dump(0, &initial.iter().collect::<Vec<_>>())?;

    let mut summary = RunSummary {
        frames_requested: options.frames,
        frames_completed: 0,
        last_good_frame: 0,
        nan: false,
        error: None,
        particles,
        wall_seconds: 0.0,
        final_component_count: None,
    };
    for _ in 0..options.frames {
        let t0 = Instant::now();
        let result = scene.advance(spec.dt_frame).and_then(|_| scene.fetch_results());
        let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        let frame = match result {
            Ok(f) => f,
            Err(e) => {
                summary.nan = matches!(e, SceneError::Solver(SolverError::NonFinite { .. }));
                summary.error = Some(e.to_string());
                break;
            }
        };
        let active: Vec<&Vec3> = frame.active_positions().collect();
        let components = (spec.outputs.components && !active.is_empty()).then(|| {
            let pts: Vec<Vec3> = active.iter().map(|p| **p).collect();
            compute_components(&pts, spacing, DEFAULT_RADIUS_FACTOR)
        });
        writeln!(metrics, "{}", metrics_row(&frame, wall_ms, components)).map_err(io_err(&metrics_path))?;
        if frame.frame % stride == 0 {
            dump(frame.frame, &active)?;
        }
        summary.frames_completed = frame.frame;
        summary.last_good_frame = frame.frame;
        summary.final_component_count = components;
    }
    metrics.flush().map_err(io_err(&metrics_path))?;
    summary.wall_seconds = started.elapsed().as_secs_f64();

    let summary_path = out.join("summary.json");
    std::fs::write(&summary_path, serde_json::to_string_pretty(&summary).expect("summary serializes"))
        .map_err(io_err(&summary_path))?;
    Ok(summary)
}

/// Lowest particle height in a frame.
pub fn min_height(frame: &FrameResult) -> Real {
    frame.active_positions().map(|p| p.y).fold(Real::INFINITY, Real::min)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bin_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(frame_file_name(3, DumpFormat::Bin));
        assert!(path.ends_with("frame_000003.bin"));
        let pts = [Vec3::new(1.0, 2.0, 3.0), Vec3::new(-0.5, 0.25, 8.0)];
        write_frame_bin(&path, pts.iter()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 + 24);
        assert_eq!(&bytes[..8], &2u64.to_le_bytes());
        assert_eq!(read_frame_bin(&path).unwrap(), vec![[1.0, 2.0, 3.0], [-0.5, 0.25, 8.0]]);
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            metrics_header(1),
            "frame,sim_time,wall_ms,total_mass,momentum_x,momentum_y,momentum_z,kinetic_energy,pushed_out,inverted_f,shape0_impulse_x,shape0_impulse_y,shape0_impulse_z,component_count"
        );
    }
}
