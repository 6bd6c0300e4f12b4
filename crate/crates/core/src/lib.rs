//! Material point method soft-body engine: three solvers (standard MPM,
//! MLS-MPM, position-based MPM), grid-level rigid contact with two-way
//! coupling, slicer cutting and curve (needle, thread) geometries, a scene
//! lifecycle API and a declarative scenario runner.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contact;
pub mod facade;
pub mod geometry;
pub mod material;
pub mod math;
pub mod rigid;
pub mod scenario;
pub mod scene;
pub mod solver;
pub mod state;
