//! The per-frame tracking pipeline: associate detections to predicted
//! tracks, update matched tracks, spawn tracks for unmatched detections,
//! and predict everything forward for the next frame.
//!
//! Tracks are never removed, and a track never gets a probation period: an
//! unmatched detection becomes a full track immediately.

use nalgebra::Matrix3;

use crate::association::{
    apply_gates, combined_cost, feature_cost_matrix, position_cost_matrix, solve_assignment,
    Assignment, CostMatrix, GateConfig, DEFAULT_POS_GATE,
};
use crate::error::{Error, Result};
use crate::kalman;
use crate::trajectory::{TrajectoryRecord, TrajectorySet};
use crate::types::{Detection, Track, WorldModel};

/// Default isotropic measurement noise applied to detections that carry no
/// covariance of their own: sigma = 0.01 m per axis.
pub const DEFAULT_MEAS_VAR: f64 = 1e-4;

/// Default isotropic process noise per step: sigma = 0.005 m per axis.
/// Static plants do not move, but the apparent center of a partially
/// observed fruit drifts with the viewpoint; the filter needs enough
/// process noise to follow that drift between adjacent views.
pub const DEFAULT_PROCESS_VAR: f64 = 2.5e-5;

/// Tracker parameters: gates, noise defaults and the optional cap on stored
/// features per track (disabled by default; the feature list keeps every
/// associated feature).
#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub gate: GateConfig,
    pub meas_cov_default: Matrix3<f64>,
    pub process_noise: Matrix3<f64>,
    pub feature_cap: Option<usize>,
}

impl TrackerConfig {
    pub fn new(
        gate: GateConfig,
        meas_cov_default: Matrix3<f64>,
        process_noise: Matrix3<f64>,
        feature_cap: Option<usize>,
    ) -> Result<Self> {
        for (name, m) in [
            ("meas_cov_default", &meas_cov_default),
            ("process_noise", &process_noise),
        ] {
            let min = ((m + m.transpose()) * 0.5).symmetric_eigenvalues().min();
            if !m.iter().all(|v| v.is_finite()) || min < -1e-12 {
                return Err(Error::Config(format!("{name} must be symmetric PSD")));
            }
        }
        if feature_cap == Some(0) {
            return Err(Error::Config("feature_cap must be positive".into()));
        }
        Ok(Self {
            gate,
            meas_cov_default,
            process_noise,
            feature_cap,
        })
    }

    /// Defaults with the given mixing weight and feature gate.
    pub fn with_lambda(lambda: f64, feat_gate: f64) -> Result<Self> {
        Self::new(
            GateConfig::new(DEFAULT_POS_GATE, feat_gate, lambda)?,
            Matrix3::identity() * DEFAULT_MEAS_VAR,
            Matrix3::identity() * DEFAULT_PROCESS_VAR,
            None,
        )
    }
}

/// Per-pair costs recorded for audit.
#[derive(Debug, Clone, PartialEq)]
pub struct PairLog {
    pub track_index: usize,
    pub detection_index: usize,
    pub track_id: u64,
    pub combined_cost: f64,
    /// Absent when lambda = 1 (the position path is not evaluated).
    pub position_cost: Option<f64>,
    /// Absent when lambda = 0 (the feature path is not evaluated).
    pub feature_cost: Option<f64>,
}

/// Audit log of a single step.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameLog {
    pub frame: u64,
    pub assignment: Assignment,
    pub new_track_ids: Vec<u64>,
    pub pair_costs: Vec<PairLog>,
}

/// Applies one matched detection to a track: Kalman-update the position,
/// append the feature to the list, replace the box with the detection's box
/// (keeping the old one when the detection has none), and bump the counters.
pub fn update_track(track: &Track, det: &Detection, config: &TrackerConfig) -> Result<Track> {
    let position = kalman::update(track.position(), &det.position)?;
    let mut features = track.features().to_vec();
    features.push(det.feature.clone());
    if let Some(cap) = config.feature_cap {
        if features.len() > cap {
            features.drain(..features.len() - cap);
        }
    }
    Ok(Track {
        id: track.id(),
        position,
        features,
        bbox: det.bbox.or(track.bbox()),
        birth_frame: track.birth_frame(),
        last_update_frame: det.frame,
        hits: track.hits() + 1,
    })
}

/// Advances the world model by one frame.
///
/// Costs are computed against the stored track states, which are the
/// predictions produced at the end of the previous step. Matched tracks are
/// updated, every unmatched detection spawns a new track, no track is
/// removed, and finally all tracks are predicted forward.
///
/// The modality weighted zero by lambda is fully inert: at lambda = 0 the
/// feature costs are neither computed nor gated, and at lambda = 1 the same
/// holds for position costs.
pub fn step(
    world: WorldModel,
    frame: u64,
    detections: &[Detection],
    config: &TrackerConfig,
) -> Result<(WorldModel, FrameLog)> {
    if let Some(current) = world.frame {
        if frame <= current {
            return Err(Error::NonIncreasingFrame {
                got: frame,
                current,
            });
        }
    }
    for det in detections {
        if det.frame != frame {
            return Err(Error::MixedFrameIndices {
                expected: frame,
                got: det.frame,
            });
        }
    }

    let lambda = config.gate.lambda;
    let tracks_slice = world.tracks.as_slice();
    let pos = if lambda < 1.0 {
        Some(position_cost_matrix(tracks_slice, detections)?)
    } else {
        None
    };
    let feat = if lambda > 0.0 {
        Some(feature_cost_matrix(tracks_slice, detections)?)
    } else {
        None
    };
    let (combined, forbidden) = match (&pos, &feat) {
        (Some(p), None) => (
            p.clone(),
            p.map(|v| v > config.gate.pos_gate),
        ),
        (None, Some(f)) => (
            f.clone(),
            f.map(|v| v > config.gate.feat_gate),
        ),
        (Some(p), Some(f)) => (
            combined_cost(p, f, lambda)?,
            apply_gates(p, f, &config.gate)?,
        ),
        (None, None) => unreachable!("lambda cannot be both 0 and 1"),
    };
    let cost = CostMatrix::new(combined, forbidden)?;
    let assignment = solve_assignment(&cost);

    let pair_costs = assignment
        .pairs
        .iter()
        .map(|&(i, j)| PairLog {
            track_index: i,
            detection_index: j,
            track_id: world.tracks[i].id(),
            combined_cost: cost.value(i, j),
            position_cost: pos.as_ref().map(|m| m[(i, j)]),
            feature_cost: feat.as_ref().map(|m| m[(i, j)]),
        })
        .collect();

    let WorldModel {
        mut tracks,
        mut next_id,
        ..
    } = world;
    for &(i, j) in &assignment.pairs {
        tracks[i] = update_track(&tracks[i], &detections[j], config)?;
    }
    let mut new_track_ids = Vec::with_capacity(assignment.unmatched_detections.len());
    for &j in &assignment.unmatched_detections {
        tracks.push(Track::from_detection(next_id, &detections[j]));
        new_track_ids.push(next_id);
        next_id += 1;
    }
    for track in &mut tracks {
        track.position = kalman::predict(&track.position, &config.process_noise)?;
    }

    let log = FrameLog {
        frame,
        assignment,
        new_track_ids,
        pair_costs,
    };
    Ok((
        WorldModel {
            tracks,
            frame: Some(frame),
            next_id,
        },
        log,
    ))
}

/// Runs the tracker over an ordered sequence of `(frame, detections)` sets.
///
/// Frame indices must be strictly increasing in presentation order; callers
/// that shuffled frames are expected to have re-indexed them first. Returns
/// the final world model, the trajectory records of every association and
/// initialization (one record per matched or newly created track per
/// frame), and the per-frame audit logs.
pub fn run_sequence(
    frames: &[(u64, Vec<Detection>)],
    config: &TrackerConfig,
) -> Result<(WorldModel, TrajectorySet, Vec<FrameLog>)> {
    for pair in frames.windows(2) {
        if pair[1].0 <= pair[0].0 {
            return Err(Error::UnorderedFrames {
                prev: pair[0].0,
                next: pair[1].0,
            });
        }
    }
    let mut world = WorldModel::new();
    let mut records = Vec::new();
    let mut logs = Vec::new();
    for (frame, detections) in frames {
        let (next, log) = step(world, *frame, detections, config)?;
        world = next;
        // A record reports the association itself: the measured position
        // under the maintained identity. The filtered belief stays internal
        // to the world model.
        for &(track_index, det_index) in &log.assignment.pairs {
            let track = &world.tracks[track_index];
            records.push(TrajectoryRecord {
                frame: *frame,
                id: track.id(),
                pos: (*detections[det_index].position.mean()).into(),
                bbox: track.bbox(),
            });
        }
        let first_new = world.tracks.len() - log.new_track_ids.len();
        for track in &world.tracks[first_new..] {
            records.push(TrajectoryRecord {
                frame: *frame,
                id: track.id(),
                pos: (*track.position().mean()).into(),
                bbox: track.bbox(),
            });
        }
        logs.push(log);
    }
    Ok((world, TrajectorySet::from_records(records)?, logs))
}

/// Rewrites a shuffled frame sequence onto logical time 0..n, returning the
/// re-indexed sequence and the original frame index for each logical step.
/// The shuffled presentation order defines logical time for the filter.
pub fn reindex_frames(frames: Vec<(u64, Vec<Detection>)>) -> (Vec<(u64, Vec<Detection>)>, Vec<u64>) {
    let originals: Vec<u64> = frames.iter().map(|(f, _)| *f).collect();
    let reindexed = frames
        .into_iter()
        .enumerate()
        .map(|(logical, (_, dets))| {
            let logical = logical as u64;
            let dets = dets
                .into_iter()
                .map(|mut d| {
                    d.frame = logical;
                    d
                })
                .collect();
            (logical, dets)
        })
        .collect();
    (reindexed, originals)
}

/// Maps trajectory records from logical frame indices back to the original
/// indices recorded by `reindex_frames`.
pub fn remap_trajectory_frames(set: TrajectorySet, originals: &[u64]) -> Result<TrajectorySet> {
    let records = set
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.frame = originals[r.frame as usize];
            r
        })
        .collect();
    TrajectorySet::from_records(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FeatureVector, Gaussian3};
    use nalgebra::Vector3;

    fn det(pos: [f64; 3], feat: &[f64], frame: u64) -> Detection {
        Detection::new(
            Gaussian3::isotropic(Vector3::from(pos), DEFAULT_MEAS_VAR).unwrap(),
            None,
            FeatureVector::new(feat.to_vec()).unwrap(),
            frame,
        )
        .unwrap()
    }

    fn config(lambda: f64) -> TrackerConfig {
        TrackerConfig::with_lambda(lambda, 0.5).unwrap()
    }

    #[test]
    fn cold_start_spawns_one_track_per_detection() {
        let dets = vec![
            det([0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0),
            det([1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 0),
            det([0.0, 1.0, 0.0], &[0.0, 0.0, 1.0], 0),
        ];
        let (world, log) = step(WorldModel::new(), 0, &dets, &config(0.5)).unwrap();
        assert_eq!(world.len(), 3);
        let ids: Vec<u64> = world.tracks().iter().map(|t| t.id()).collect();
        assert_eq!(ids, vec![0, 1, 2]);
        assert_eq!(log.new_track_ids, vec![0, 1, 2]);
        for (track, d) in world.tracks().iter().zip(&dets) {
            assert_eq!(track.features(), std::slice::from_ref(&d.feature));
        }
    }

    #[test]
    fn perfect_reobservation_matches_without_growth() {
        let d0 = det([0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0);
        let (world, _) = step(WorldModel::new(), 0, &[d0], &config(0.5)).unwrap();
        let d1 = det([0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 1);
        let (world, log) = step(world, 1, &[d1], &config(0.5)).unwrap();
        assert_eq!(world.len(), 1);
        assert_eq!(log.assignment.pairs, vec![(0, 0)]);
        assert_eq!(world.tracks()[0].hits(), 2);
    }

    #[test]
    fn fully_gated_detection_spawns_new_track() {
        let d0 = det([0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0);
        let (world, _) = step(WorldModel::new(), 0, &[d0], &config(0.5)).unwrap();
        // 10 m away with an orthogonal feature: both gates exceeded.
        let d1 = det([10.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 1);
        let (world, log) = step(world, 1, &[d1], &config(0.5)).unwrap();
        assert_eq!(world.len(), 2);
        assert!(log.assignment.pairs.is_empty());
        assert_eq!(log.new_track_ids, vec![1]);
    }

    #[test]
    fn lambda_zero_ignores_features_entirely() {
        let d0 = det([0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0);
        let (world, _) = step(WorldModel::new(), 0, &[d0], &config(0.0)).unwrap();
        // Identical position, orthogonal feature. The feature gate would
        // forbid this pair; at lambda = 0 it must not even be evaluated.
        let d1 = det([0.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 1);
        let (world, log) = step(world, 1, &[d1], &config(0.0)).unwrap();
        assert_eq!(world.len(), 1);
        assert_eq!(log.assignment.pairs, vec![(0, 0)]);
        assert_eq!(log.pair_costs[0].feature_cost, None);

        // The same input under a mixed weight is kept apart by the gate.
        let d0 = det([0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0);
        let (world2, _) = step(WorldModel::new(), 0, &[d0], &config(0.5)).unwrap();
        let d1 = det([0.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 1);
        let (world2, _) = step(world2, 1, &[d1], &config(0.5)).unwrap();
        assert_eq!(world2.len(), 2);
        drop(world);
    }

    #[test]
    fn lambda_one_ignores_position_gate() {
        let d0 = det([0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 0);
        let (world, _) = step(WorldModel::new(), 0, &[d0], &config(1.0)).unwrap();
        // Far away but with the same feature: matched at lambda = 1.
        let d1 = det([5.0, 0.0, 0.0], &[1.0, 0.0, 0.0], 1);
        let (world, log) = step(world, 1, &[d1], &config(1.0)).unwrap();
        assert_eq!(world.len(), 1);
        assert_eq!(log.assignment.pairs, vec![(0, 0)]);
        assert_eq!(log.pair_costs[0].position_cost, None);
    }

    #[test]
    fn step_rejects_stale_and_mixed_frames() {
        let d0 = det([0.0, 0.0, 0.0], &[1.0, 0.0], 0);
        let (world, _) = step(WorldModel::new(), 0, &[d0], &config(0.5)).unwrap();
        let stale = det([0.0, 0.0, 0.0], &[1.0, 0.0], 0);
        assert!(matches!(
            step(world.clone(), 0, &[stale], &config(0.5)),
            Err(Error::NonIncreasingFrame { .. })
        ));
        let wrong = det([0.0, 0.0, 0.0], &[1.0, 0.0], 2);
        assert!(matches!(
            step(world, 1, &[wrong], &config(0.5)),
            Err(Error::MixedFrameIndices { .. })
        ));
    }

    #[test]
    fn empty_detection_set_is_a_predict_only_step() {
        let d0 = det([0.0, 0.0, 0.0], &[1.0, 0.0], 0);
        let (world, _) = step(WorldModel::new(), 0, &[d0], &config(0.5)).unwrap();
        let var_before = world.tracks()[0].position().cov()[(0, 0)];
        let (world, log) = step(world, 1, &[], &config(0.5)).unwrap();
        assert_eq!(world.len(), 1);
        assert!(log.assignment.pairs.is_empty());
        assert!(world.tracks()[0].position().cov()[(0, 0)] > var_before);
    }

    #[test]
    fn update_track_appends_feature_and_replaces_box() {
        let cfg = config(0.5);
        let base = det([0.0, 0.0, 0.0], &[1.0, 0.0], 0);
        let track = Track::from_detection(0, &base);
        let mut matched = det([0.0, 0.0, 0.0], &[0.8, 0.6], 1);
        matched.bbox = Some([5.0, 6.0, 20.0, 30.0]);
        let updated = update_track(&track, &matched, &cfg).unwrap();
        assert_eq!(updated.features().len(), 2);
        assert_eq!(updated.bbox(), Some([5.0, 6.0, 20.0, 30.0]));
        assert_eq!(updated.last_update_frame(), 1);
        assert_eq!(updated.hits(), 2);
        assert_eq!(updated.id(), 0);

        // A detection without a box leaves the previous box in place.
        let bare = det([0.0, 0.0, 0.0], &[1.0, 0.0], 2);
        let updated = update_track(&updated, &bare, &cfg).unwrap();
        assert_eq!(updated.bbox(), Some([5.0, 6.0, 20.0, 30.0]));
    }

    #[test]
    fn update_track_strictly_shrinks_covariance_trace() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let cfg = config(0.5);
        for frame in 1..=100u64 {
            let mean = [
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            let track = Track::from_detection(0, &det(mean, &[1.0, 0.0], frame - 1));
            let jitter = [
                mean[0] + rng.random_range(-0.01..0.01),
                mean[1] + rng.random_range(-0.01..0.01),
                mean[2] + rng.random_range(-0.01..0.01),
            ];
            let updated = update_track(&track, &det(jitter, &[1.0, 0.0], frame), &cfg).unwrap();
            assert!(updated.position().cov().trace() < track.position().cov().trace());
        }
    }

    #[test]
    fn feature_cap_keeps_most_recent() {
        let mut cfg = config(0.5);
        cfg.feature_cap = Some(2);
        let track = Track::from_detection(0, &det([0.0; 3], &[1.0, 0.0], 0));
        let track = update_track(&track, &det([0.0; 3], &[0.0, 1.0], 1), &cfg).unwrap();
        let track = update_track(&track, &det([0.0; 3], &[-1.0, 0.0], 2), &cfg).unwrap();
        assert_eq!(track.features().len(), 2);
        assert_eq!(track.features()[0].values(), &[0.0, 1.0]);
        assert_eq!(track.features()[1].values(), &[-1.0, 0.0]);
    }

    fn static_objects_sequence(n_frames: u64) -> Vec<(u64, Vec<Detection>)> {
        let objects: [([f64; 3], [f64; 3]); 3] = [
            ([0.0, 0.0, 0.0], [1.0, 0.0, 0.0]),
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            ([0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
        ];
        (0..n_frames)
            .map(|f| {
                (
                    f,
                    objects
                        .iter()
                        .map(|(p, feat)| det(*p, feat, f))
                        .collect::<Vec<_>>(),
                )
            })
            .collect()
    }

    #[test]
    fn noiseless_static_objects_keep_their_tracks() {
        let frames = static_objects_sequence(5);
        let mut cfg = config(0.5);
        cfg.gate = GateConfig::new(f64::INFINITY, 2.0, 0.5).unwrap();
        let (world, traj, _) = run_sequence(&frames, &cfg).unwrap();
        assert_eq!(world.len(), 3);
        // Identity tracking: each object keeps one id across all frames.
        for id in 0..3u64 {
            let count = traj.records().iter().filter(|r| r.id == id).count();
            assert_eq!(count, 5);
        }
    }

    #[test]
    fn single_frame_trajectory_has_one_record_per_detection() {
        let frames = static_objects_sequence(1);
        let (_, traj, _) = run_sequence(&frames, &config(0.5)).unwrap();
        assert_eq!(traj.len(), 3);
        let mut ids: Vec<u64> = traj.records().iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn track_count_is_non_decreasing_and_features_add_up() {
        let mut frames = static_objects_sequence(6);
        // Drop some detections to create predict-only content.
        frames[2].1.truncate(1);
        frames[4].1.clear();
        let total_dets: usize = frames.iter().map(|(_, d)| d.len()).sum();
        let cfg = config(0.5);
        let mut world = WorldModel::new();
        let mut prev_len = 0;
        for (frame, dets) in &frames {
            let (next, _) = step(world, *frame, dets, &cfg).unwrap();
            world = next;
            assert!(world.len() >= prev_len);
            prev_len = world.len();
        }
        let stored: usize = world.tracks().iter().map(|t| t.features().len()).sum();
        assert_eq!(stored, total_dets);
    }

    #[test]
    fn identical_runs_are_identical() {
        let frames = static_objects_sequence(4);
        let cfg = config(0.25);
        let (w1, t1, l1) = run_sequence(&frames, &cfg).unwrap();
        let (w2, t2, l2) = run_sequence(&frames, &cfg).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(l1, l2);
        assert_eq!(w1.tracks().len(), w2.tracks().len());
        for (a, b) in w1.tracks().iter().zip(w2.tracks()) {
            assert_eq!(a.id(), b.id());
            assert_eq!(a.position(), b.position());
        }
    }

    #[test]
    fn permuted_presentation_with_pure_features_gives_same_track_count() {
        // Noiseless features, lambda = 1: shuffling frames must not change
        // how many objects the world model discovers.
        let frames = static_objects_sequence(6);
        let mut shuffled = frames.clone();
        shuffled.swap(0, 4);
        shuffled.swap(2, 5);
        let (reindexed, _) = reindex_frames(shuffled);
        let cfg = config(1.0);
        let (w1, _, _) = run_sequence(&frames, &cfg).unwrap();
        let (w2, _, _) = run_sequence(&reindexed, &cfg).unwrap();
        assert_eq!(w1.len(), w2.len());
    }

    #[test]
    fn run_sequence_rejects_unordered_frames() {
        let mut frames = static_objects_sequence(3);
        frames.swap(0, 1);
        assert!(matches!(
            run_sequence(&frames, &config(0.5)),
            Err(Error::UnorderedFrames { .. })
        ));
    }
}
