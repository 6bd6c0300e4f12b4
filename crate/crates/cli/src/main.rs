use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use mpm_core::scenario::{benchmark, run_scenario, write_bench_csv, RunOptions, SceneSpec, SolverName};
use mpm_core::solver::ExecMode;

#[derive(Parser)]
#[command(name = "mpmsim", version, about = "Run material point method scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scene and write frame dumps, metrics.csv and summary.json.
    Run {
        scene: PathBuf,
        #[arg(long)]
        frames: u64,
        #[arg(long)]
        out: PathBuf,
        /// Sequential particle-to-grid scatter (byte-reproducible output).
        #[arg(long)]
        deterministic: bool,
        /// Override the scene's solver (standard, mls, pbmpm).
        #[arg(long)]
        solver: Option<SolverName>,
        /// Write a frame dump every K frames.
        #[arg(long)]
        stride: Option<u32>,
    },
    /// Time every solver configuration on a resized falling-cube template.
    Bench {
        #[arg(long)]
        scene: PathBuf,
        /// Comma-separated particle counts.
        #[arg(long, value_delimiter = ',', required = true)]
        particles: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        steps: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        deterministic: bool,
    },
    /// Parse and validate a scene file.
    Validate { scene: PathBuf },
}

fn mode(deterministic: bool) -> ExecMode {
    if deterministic {
        ExecMode::Deterministic
    } else {
        ExecMode::Parallel
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            scene,
            frames,
            out,
            deterministic,
            solver,
            stride,
        } => {
            let mut spec = SceneSpec::load(&scene)?;
            if let Some(s) = solver {
                spec = spec.with_solver(s, None, None).materialize()?;
            }
            let summary = run_scenario(
                &spec,
                &RunOptions {
                    frames,
                    out_dir: out.clone(),
                    mode: mode(deterministic),
                    stride,
                },
            )?;
            println!(
                "{} frames of {} ({} particles) in {:.1} s -> {}",
                summary.frames_completed,
                frames,
                summary.particles,
                summary.wall_seconds,
                out.display()
            );
            if let Some(err) = &summary.error {
                eprintln!("stopped after frame {}: {err}", summary.last_good_frame);
            }
            Ok(if summary.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Bench {
            scene,
            particles,
            steps,
            out,
            deterministic,
        } => {
            let spec = SceneSpec::load(&scene)?;
            let rows = benchmark(&spec, &particles, steps, mode(deterministic));
            let file = File::create(&out).with_context(|| format!("creating {}", out.display()))?;
            write_bench_csv(&rows, BufWriter::new(file))?;
            write_bench_csv(&rows, std::io::stdout())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { scene } => {
            let spec = SceneSpec::load(&scene)?;
            println!(
                "{}: ok ({:?}, {} particle objects, {} shapes)",
                scene.display(),
                spec.solver,
                spec.particle_objects.len(),
                spec.shapes.len()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
