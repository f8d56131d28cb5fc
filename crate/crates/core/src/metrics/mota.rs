//! Multi-object tracking accuracy per the CLEAR protocol: frame-by-frame
//! correspondence with carry-over, counting false positives, misses and
//! identity switches.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::association::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::metrics::{records_by_frame, similarity, SimilarityConfig};
use crate::trajectory::TrajectorySet;

#[derive(Debug, Clone, PartialEq)]
pub struct MotaReport {
    /// `1 - (FP + FN + IDSW) / num_gt`; at most 1 and possibly negative.
    pub mota: f64,
    pub false_positives: u64,
    pub misses: u64,
    pub id_switches: u64,
    pub num_gt: u64,
}

/// Computes MOTA between ground truth and predictions.
///
/// Correspondences from the previous frame are kept while their similarity
/// stays at or above `match_threshold`; the remainder is matched per frame
/// by a Hungarian solve over threshold-eligible pairs. An identity switch is
/// counted when a ground-truth identity's matched prediction id differs
/// from its most recent previous match.
pub fn mota(
    gt: &TrajectorySet,
    pred: &TrajectorySet,
    config: &SimilarityConfig,
    match_threshold: f64,
) -> Result<MotaReport> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    config.validate()?;

    let gt_by_frame = records_by_frame(gt);
    let pred_by_frame = records_by_frame(pred);
    let mut frames: Vec<u64> = gt_by_frame
        .keys()
        .chain(pred_by_frame.keys())
        .copied()
        .collect();
    frames.sort_unstable();
    frames.dedup();

    let empty = Vec::new();
    let mut fp = 0u64;
    let mut misses = 0u64;
    let mut idsw = 0u64;
    // Previous frame's correspondence (for carry-over) and the most recent
    // match ever (for switch counting).
    let mut prev_frame_match: HashMap<u64, u64> = HashMap::new();
    let mut last_match: HashMap<u64, u64> = HashMap::new();

    for frame in frames {
        let gt_f = gt_by_frame.get(&frame).unwrap_or(&empty);
        let pred_f = pred_by_frame.get(&frame).unwrap_or(&empty);

        let mut sim = DMatrix::zeros(gt_f.len(), pred_f.len());
        for (i, g) in gt_f.iter().enumerate() {
            for (j, p) in pred_f.iter().enumerate() {
                sim[(i, j)] = similarity(g, p, config)?;
            }
        }

        let mut gt_used = vec![false; gt_f.len()];
        let mut pred_used = vec![false; pred_f.len()];
        let mut matches: Vec<(usize, usize)> = Vec::new();

        // Carry over still-valid correspondences first. Ids are unique
        // within a frame, and the previous matching was injective, so no
        // two ground truths contend for the same prediction here.
        for (i, g) in gt_f.iter().enumerate() {
            let Some(&kept_pred) = prev_frame_match.get(&g.id) else {
                continue;
            };
            let Some(j) = pred_f.iter().position(|p| p.id == kept_pred) else {
                continue;
            };
            if !pred_used[j] && sim[(i, j)] >= match_threshold {
                gt_used[i] = true;
                pred_used[j] = true;
                matches.push((i, j));
            }
        }

        // Hungarian over the leftovers, maximizing matches then similarity.
        let free_gt: Vec<usize> = (0..gt_f.len()).filter(|&i| !gt_used[i]).collect();
        let free_pred: Vec<usize> = (0..pred_f.len()).filter(|&j| !pred_used[j]).collect();
        if !free_gt.is_empty() && !free_pred.is_empty() {
            let values = DMatrix::from_fn(free_gt.len(), free_pred.len(), |a, b| {
                1.0 - sim[(free_gt[a], free_pred[b])]
            });
            let forbidden = DMatrix::from_fn(free_gt.len(), free_pred.len(), |a, b| {
                sim[(free_gt[a], free_pred[b])] < match_threshold
            });
            let assignment = solve_assignment(&CostMatrix::new(values, forbidden)?);
            for (a, b) in assignment.pairs {
                let (i, j) = (free_gt[a], free_pred[b]);
                gt_used[i] = true;
                pred_used[j] = true;
                matches.push((i, j));
            }
        }

        misses += gt_used.iter().filter(|&&u| !u).count() as u64;
        fp += pred_used.iter().filter(|&&u| !u).count() as u64;

        prev_frame_match.clear();
        for (i, j) in matches {
            let gt_id = gt_f[i].id;
            let pred_id = pred_f[j].id;
            if let Some(&prev) = last_match.get(&gt_id) {
                if prev != pred_id {
                    idsw += 1;
                }
            }
            last_match.insert(gt_id, pred_id);
            prev_frame_match.insert(gt_id, pred_id);
        }
    }

    let num_gt = gt.len() as u64;
    Ok(MotaReport {
        mota: 1.0 - (fp + misses + idsw) as f64 / num_gt as f64,
        false_positives: fp,
        misses,
        id_switches: idsw,
        num_gt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::TrajectoryRecord;

    fn rec(frame: u64, id: u64, pos: [f64; 3]) -> TrajectoryRecord {
        TrajectoryRecord {
            frame,
            id,
            pos,
            bbox: None,
        }
    }

    fn set(records: Vec<TrajectoryRecord>) -> TrajectorySet {
        TrajectorySet::from_records(records).unwrap()
    }

    fn two_object_gt() -> TrajectorySet {
        let mut records = Vec::new();
        for frame in 0..3 {
            records.push(rec(frame, 1, [0.0, 0.0, 0.0]));
            records.push(rec(frame, 2, [1.0, 0.0, 0.0]));
        }
        set(records)
    }

    #[test]
    fn perfect_predictions_score_one() {
        let gt = two_object_gt();
        let report = mota(&gt, &gt, &SimilarityConfig::default(), 0.5).unwrap();
        assert_eq!(report.mota, 1.0);
        assert_eq!(report.false_positives, 0);
        assert_eq!(report.misses, 0);
        assert_eq!(report.id_switches, 0);
    }

    #[test]
    fn hand_traced_toy_scores_half() {
        // 6 GT records; predictions miss GT2 once, add one clutter record,
        // and switch GT1's id on the last frame: MOTA = 1 - 3/6 = 0.5.
        let gt = two_object_gt();
        let pred = set(vec![
            rec(0, 10, [0.0, 0.0, 0.0]),
            rec(0, 20, [1.0, 0.0, 0.0]),
            rec(1, 10, [0.0, 0.0, 0.0]),
            rec(1, 30, [5.0, 5.0, 5.0]), // false positive; GT2 missed
            rec(2, 40, [0.0, 0.0, 0.0]), // GT1 switches 10 -> 40
            rec(2, 20, [1.0, 0.0, 0.0]),
        ]);
        let report = mota(&gt, &pred, &SimilarityConfig::default(), 0.5).unwrap();
        assert_eq!(report.false_positives, 1);
        assert_eq!(report.misses, 1);
        assert_eq!(report.id_switches, 1);
        assert_eq!(report.mota, 0.5);
    }

    #[test]
    fn relabeled_ids_are_not_switches() {
        let gt = two_object_gt();
        let pred = set(
            gt.records()
                .iter()
                .map(|r| rec(r.frame, r.id + 100, r.pos))
                .collect(),
        );
        let report = mota(&gt, &pred, &SimilarityConfig::default(), 0.5).unwrap();
        assert_eq!(report.mota, 1.0);
        assert_eq!(report.id_switches, 0);
    }

    #[test]
    fn empty_ground_truth_is_rejected() {
        let gt = TrajectorySet::default();
        let pred = two_object_gt();
        assert!(matches!(
            mota(&gt, &pred, &SimilarityConfig::default(), 0.5),
            Err(Error::EmptyGroundTruth)
        ));
    }

    #[test]
    fn empty_predictions_count_all_misses() {
        let gt = two_object_gt();
        let report = mota(&gt, &TrajectorySet::default(), &SimilarityConfig::default(), 0.5)
            .unwrap();
        assert_eq!(report.misses, 6);
        assert_eq!(report.mota, 0.0);
    }

    #[test]
    fn deleting_a_prediction_record_weakly_decreases_mota() {
        let gt = two_object_gt();
        let full: Vec<TrajectoryRecord> = gt.records().to_vec();
        let baseline = mota(&gt, &set(full.clone()), &SimilarityConfig::default(), 0.5)
            .unwrap()
            .mota;
        for skip in 0..full.len() {
            let mut partial = full.clone();
            partial.remove(skip);
            let score = mota(&gt, &set(partial), &SimilarityConfig::default(), 0.5)
                .unwrap()
                .mota;
            assert!(score <= baseline);
        }
    }

    #[test]
    fn reappearance_after_gap_does_not_switch() {
        // GT1 is missed in frame 1 but rematches its old prediction id in
        // frame 2: the most-recent-match rule counts no switch.
        let gt = set(vec![
            rec(0, 1, [0.0; 3]),
            rec(1, 1, [0.0; 3]),
            rec(2, 1, [0.0; 3]),
        ]);
        let pred = set(vec![rec(0, 7, [0.0; 3]), rec(2, 7, [0.0; 3])]);
        let report = mota(&gt, &pred, &SimilarityConfig::default(), 0.5).unwrap();
        assert_eq!(report.id_switches, 0);
        assert_eq!(report.misses, 1);
    }

    #[test]
    fn monotone_frame_relabeling_preserves_mota() {
        let gt = two_object_gt();
        let pred = set(vec![
            rec(0, 10, [0.0, 0.0, 0.0]),
            rec(1, 10, [0.0, 0.0, 0.0]),
            rec(2, 11, [0.0, 0.0, 0.0]),
            rec(2, 20, [1.0, 0.0, 0.0]),
        ]);
        let remap = |s: &TrajectorySet| {
            set(s
                .records()
                .iter()
                .map(|r| rec(r.frame * 10 + 3, r.id, r.pos))
                .collect())
        };
        let cfg = SimilarityConfig::default();
        let a = mota(&gt, &pred, &cfg, 0.5).unwrap();
        let b = mota(&remap(&gt), &remap(&pred), &cfg, 0.5).unwrap();
        assert_eq!(a, b);
    }
}
