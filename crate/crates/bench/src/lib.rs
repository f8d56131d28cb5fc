//! Shared fixtures for the tracking benchmarks.

use mot3d_core::simgen::{render_scene, RenderedFrame, Scene, SceneSpec};

/// Default scene rendered at its configured noise model.
pub fn default_frames() -> Vec<RenderedFrame> {
    let spec = SceneSpec::default();
    let scene = Scene::build(&spec).expect("default scene builds");
    render_scene(&scene, &spec.noise, spec.seed)
}
