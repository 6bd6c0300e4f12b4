//! Declarative scenes, the frame runner, the cut metric and the benchmark.

pub mod bench;
pub mod components;
pub mod run;
pub mod spec;

pub use bench::{benchmark, write_bench_csv, BenchRow, BENCH_HEADER};
pub use components::{compute_components, mean_nearest_neighbor_spacing};
pub use run::{run_scenario, RunOptions, RunSummary};
pub use spec::{SceneSpec, SolverName, SpecError};
