//! Cross-module pipeline checks: the simulator, tracker, metrics and
//! experiment runner composed the way the CLI composes them.

use std::collections::HashSet;

use mot3d_core::experiment::{run_experiment, ExperimentSpec};
use mot3d_core::metrics::{evaluate, SimilarityConfig};
use mot3d_core::simgen::{
    ground_truth, render_scene, FrameOrder, OperatingPoint, Scene, SceneSpec,
};
use mot3d_core::tracker::run_sequence;
use mot3d_core::types::Detection;

/// Noiseless, clutter-free, fully visible scene tracked with lambda = 0:
/// the whole chain must be lossless, scoring HOTA = 1 with zero switches.
#[test]
fn noiseless_chain_is_perfect_at_lambda_zero() {
    let mut spec = SceneSpec::default();
    spec.n_trusses = 3;
    spec.tomatoes_per_truss = [1, 1];
    spec.stem_height = 3.0;
    spec.truss_radius = 0.02;
    spec.n_leaves = 0;
    spec.noise.sigma_pos_lateral = 0.0;
    spec.noise.sigma_pos_ray = 0.0;
    spec.noise.sigma_feat = 0.0;
    spec.noise.detect_prob_visible = 1.0;
    spec.noise.clutter_rate = 0.0;

    let scene = Scene::build(&spec).unwrap();
    let frames = render_scene(&scene, &spec.noise, spec.seed);
    let gt = ground_truth(&frames);
    let sequence: Vec<(u64, Vec<Detection>)> = frames
        .iter()
        .map(|f| (f.viewpoint as u64, f.detections.clone()))
        .collect();

    let config = mot3d_core::tracker::TrackerConfig::with_lambda(0.0, 0.5).unwrap();
    let (world, pred, _) = run_sequence(&sequence, &config).unwrap();
    assert_eq!(world.len(), scene.tomatoes.len());

    let report = evaluate(&gt, &pred, &SimilarityConfig::default(), 0.5).unwrap();
    assert_eq!(report.hota, 1.0);
    assert_eq!(report.idsw, 0);
    assert_eq!(report.mota, 1.0);
}

/// The lambda = 0 column of an experiment table must equal an independent
/// manual composition of tracking and evaluation on the same subset.
#[test]
fn baseline_column_matches_manual_composition() {
    let mut spec = ExperimentSpec::default();
    spec.scene.n_trusses = 2;
    spec.scene.tomatoes_per_truss = [3, 4];
    spec.scene.n_leaves = 8;
    spec.scene.path.n_heights = 4;
    spec.scene.path.n_azimuths = 5;
    spec.lambda_grid = vec![0.0, 1.0];
    spec.orders = vec![FrameOrder::Sequential];
    spec.n_subsets = 2;
    spec.subset_size = 15;
    spec.feat_gate = Some(0.3);

    let table = run_experiment(&spec).unwrap();

    // Manual run of (sequential, mid, lambda = 0, subset 0).
    let scene = Scene::build(&spec.scene).unwrap();
    let op = OperatingPoint::preset(spec.operating_points[0]);
    let frames = render_scene(&scene, &op.apply(&spec.scene.noise), spec.scene.seed);
    let gt = ground_truth(&frames);
    let subset = &table.subsets[0];
    let sequence: Vec<(u64, Vec<Detection>)> = subset
        .iter()
        .map(|&i| (i as u64, frames[i].detections.clone()))
        .collect();
    let config = spec.tracker_config(0.0, table.feat_gate).unwrap();
    let (_, pred, _) = run_sequence(&sequence, &config).unwrap();
    let frame_set: HashSet<u64> = subset.iter().map(|&i| i as u64).collect();
    let manual = evaluate(
        &gt.restricted_to_frames(&frame_set),
        &pred,
        &spec.similarity_config(),
        spec.match_threshold,
    )
    .unwrap();

    let from_table = table
        .subset_reports(FrameOrder::Sequential, spec.operating_points[0], 0.0)
        .into_iter()
        .next()
        .unwrap();
    assert_eq!(from_table, &manual);
}
