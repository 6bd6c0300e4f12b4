mod common;

use mpm_core::scenario::run::{metrics_header, read_frame_bin};
use mpm_core::scenario::{run_scenario, RunOptions, SceneSpec, SpecError};
use mpm_core::solver::ExecMode;

use common::{bundled_scene_names, load_scene};

const MINIMAL: &str = r#"{
  "version": 1,
  "solver": "mls",
  "dt_frame": 0.01,
  "grid": { "dims": [16, 16, 16], "dx": 0.05 },
  "particle_objects": [
    { "min": [0.3, 0.3, 0.3], "max": [0.5, 0.5, 0.5], "density": 1000.0,
      "material": { "youngs_modulus": 1000.0, "poisson_ratio": 0.3 } }
  ]
}"#;

#[test]
fn bundled_scenes_load_and_round_trip() {
    let names = bundled_scene_names();
    assert!(names.len() >= 6, "{names:?}");
    for name in names {
        let spec = load_scene(&name);
        let again = SceneSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, again, "{name}");
    }
}

#[test]
fn defaults_are_filled() {
    let spec = SceneSpec::from_json(MINIMAL).unwrap();
    assert_eq!(spec.substeps, Some(10));
    assert_eq!(spec.gravity, [0.0, -9.81, 0.0]);
    assert_eq!(spec.particle_objects[0].particles_per_cell, 8);
    assert_eq!(spec.outputs.stride, 1);
}

#[test]
fn unknown_field_reports_position() {
    let text = MINIMAL.replace("\"dt_frame\"", "\"dt_frames\"");
    match SceneSpec::from_json(&text) {
        Err(SpecError::Parse { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn semantic_errors_name_the_field() {
    let field_of = |text: String| match SceneSpec::from_json(&text) {
        Err(SpecError::Semantic { field, .. }) => field,
        other => panic!("{other:?}"),
    };
    assert_eq!(field_of(MINIMAL.replace("\"version\": 1", "\"version\": 2")), "version");
    assert_eq!(field_of(MINIMAL.replace("\"mls\"", "\"pbmpm\"")), "beta");
    assert_eq!(field_of(MINIMAL.replace("0.01", "-0.01")), "dt_frame");
    assert_eq!(
        field_of(MINIMAL.replace("\"poisson_ratio\": 0.3", "\"poisson_ratio\": 0.5")),
        "particle_objects[0].material"
    );
    let pb = MINIMAL.replace("\"mls\",", "\"pbmpm\", \"beta\": 0.5, \"substeps\": 4,");
    assert_eq!(field_of(pb), "substeps");
}

#[test]
fn missing_file_is_io_error() {
    let err = SceneSpec::load(std::path::Path::new("/nonexistent/scene.json")).unwrap_err();
    assert!(matches!(err, SpecError::Io { .. }));
}

#[test]
fn run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = load_scene("cube_drop");
    let summary = run_scenario(
        &spec,
        &RunOptions {
            frames: 3,
            out_dir: dir.path().to_path_buf(),
            mode: ExecMode::Deterministic,
            stride: Some(2),
        },
    )
    .unwrap();
    assert!(summary.success());
    assert_eq!(summary.frames_completed, 3);

    let metrics = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), metrics_header(1));
    assert_eq!(lines.count(), 3);

    let frame0 = read_frame_bin(&dir.path().join("frame_000000.bin")).unwrap();
    assert_eq!(frame0.len(), summary.particles);
    assert!(dir.path().join("frame_000002.bin").exists());
    assert!(!dir.path().join("frame_000001.bin").exists());

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(json["frames_completed"], 3);
    assert_eq!(json["nan"], false);
}
