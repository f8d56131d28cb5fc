//! Higher order tracking accuracy.
//!
//! For every threshold alpha in the grid, records are matched per frame by
//! a Hungarian solve restricted to similarity-eligible pairs, weighting ties
//! by the global gt/prediction alignment score; the per-alpha detection and
//! association accuracies combine as a geometric mean and the final scores
//! average over the grid.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::association::{solve_assignment, CostMatrix};
use crate::error::{Error, Result};
use crate::metrics::{records_by_frame, similarity, SimilarityConfig};
use crate::trajectory::TrajectorySet;

/// Slack applied to the eligibility comparison so that a similarity sitting
/// exactly on an alpha value counts as eligible.
const ALPHA_EPS: f64 = 1e-12;

/// Scores at one alpha threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaScores {
    pub alpha: f64,
    pub hota: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub det_re: f64,
    pub det_pr: f64,
    pub tp: u64,
    pub fn_: u64,
    pub fp: u64,
}

/// Alpha-averaged scores plus the per-alpha breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct HotaReport {
    pub hota: f64,
    pub det_re: f64,
    pub det_pr: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub per_alpha: Vec<AlphaScores>,
}

pub fn hota(
    gt: &TrajectorySet,
    pred: &TrajectorySet,
    config: &SimilarityConfig,
) -> Result<HotaReport> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    config.validate()?;

    // Dense id indices, deterministic by id order.
    let mut gt_index: BTreeMap<u64, usize> = BTreeMap::new();
    for r in gt.records() {
        let next = gt_index.len();
        gt_index.entry(r.id).or_insert(next);
    }
    let mut pred_index: BTreeMap<u64, usize> = BTreeMap::new();
    for r in pred.records() {
        let next = pred_index.len();
        pred_index.entry(r.id).or_insert(next);
    }
    let n_gt_ids = gt_index.len();
    let n_pred_ids = pred_index.len();

    let mut gt_count = vec![0.0_f64; n_gt_ids];
    for r in gt.records() {
        gt_count[gt_index[&r.id]] += 1.0;
    }
    let mut pred_count = vec![0.0_f64; n_pred_ids];
    for r in pred.records() {
        pred_count[pred_index[&r.id]] += 1.0;
    }

    // Per frame: global id indices on both sides plus the similarity matrix.
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
    let mut per_frame: Vec<(Vec<usize>, Vec<usize>, DMatrix<f64>)> = Vec::new();
    for frame in &frames {
        let gt_f = gt_by_frame.get(frame).unwrap_or(&empty);
        let pred_f = pred_by_frame.get(frame).unwrap_or(&empty);
        let mut sim = DMatrix::zeros(gt_f.len(), pred_f.len());
        for (i, g) in gt_f.iter().enumerate() {
            for (j, p) in pred_f.iter().enumerate() {
                sim[(i, j)] = similarity(g, p, config)?;
            }
        }
        per_frame.push((
            gt_f.iter().map(|r| gt_index[&r.id]).collect(),
            pred_f.iter().map(|r| pred_index[&r.id]).collect(),
            sim,
        ));
    }

    // Jaccard-weighted potential matches accumulated over all frames, then
    // the global alignment score per (gt id, pred id).
    let mut potential = DMatrix::<f64>::zeros(n_gt_ids, n_pred_ids);
    for (gt_ids, pred_ids, sim) in &per_frame {
        if gt_ids.is_empty() || pred_ids.is_empty() {
            continue;
        }
        let row_sums: Vec<f64> = (0..gt_ids.len()).map(|i| sim.row(i).sum()).collect();
        let col_sums: Vec<f64> = (0..pred_ids.len()).map(|j| sim.column(j).sum()).collect();
        for (i, &gi) in gt_ids.iter().enumerate() {
            for (j, &pj) in pred_ids.iter().enumerate() {
                let denom = row_sums[i] + col_sums[j] - sim[(i, j)];
                if denom > f64::EPSILON {
                    potential[(gi, pj)] += sim[(i, j)] / denom;
                }
            }
        }
    }
    let galign = DMatrix::<f64>::from_fn(n_gt_ids, n_pred_ids, |g, p| {
        potential[(g, p)] / (gt_count[g] + pred_count[p] - potential[(g, p)])
    });

    let mut per_alpha = Vec::with_capacity(config.alpha_grid.len());
    for &alpha in &config.alpha_grid {
        let mut tp = 0u64;
        let mut fn_ = 0u64;
        let mut fp = 0u64;
        let mut matches_count = DMatrix::<f64>::zeros(n_gt_ids, n_pred_ids);
        for (gt_ids, pred_ids, sim) in &per_frame {
            if gt_ids.is_empty() || pred_ids.is_empty() {
                fn_ += gt_ids.len() as u64;
                fp += pred_ids.len() as u64;
                continue;
            }
            let forbidden = DMatrix::from_fn(gt_ids.len(), pred_ids.len(), |i, j| {
                sim[(i, j)] < alpha - ALPHA_EPS
            });
            // Costs in [1, 2]: the solver maximizes the match count first,
            // then the alignment-weighted similarity as the tie rule.
            let values = DMatrix::from_fn(gt_ids.len(), pred_ids.len(), |i, j| {
                2.0 - galign[(gt_ids[i], pred_ids[j])] * sim[(i, j)]
            });
            let assignment = solve_assignment(&CostMatrix::new(values, forbidden)?);
            tp += assignment.pairs.len() as u64;
            fn_ += (gt_ids.len() - assignment.pairs.len()) as u64;
            fp += (pred_ids.len() - assignment.pairs.len()) as u64;
            for (i, j) in assignment.pairs {
                matches_count[(gt_ids[i], pred_ids[j])] += 1.0;
            }
        }

        let det_re = tp as f64 / (tp + fn_).max(1) as f64;
        let det_pr = tp as f64 / (tp + fp).max(1) as f64;
        let det_a = tp as f64 / (tp + fn_ + fp).max(1) as f64;
        let mut ass_sum = 0.0;
        for g in 0..n_gt_ids {
            for p in 0..n_pred_ids {
                let mc = matches_count[(g, p)];
                if mc > 0.0 {
                    ass_sum += mc * (mc / (gt_count[g] + pred_count[p] - mc));
                }
            }
        }
        let ass_a = ass_sum / (tp.max(1)) as f64;
        per_alpha.push(AlphaScores {
            alpha,
            hota: (det_a * ass_a).sqrt(),
            det_a,
            ass_a,
            det_re,
            det_pr,
            tp,
            fn_,
            fp,
        });
    }

    let n = per_alpha.len() as f64;
    Ok(HotaReport {
        hota: per_alpha.iter().map(|a| a.hota).sum::<f64>() / n,
        det_re: per_alpha.iter().map(|a| a.det_re).sum::<f64>() / n,
        det_pr: per_alpha.iter().map(|a| a.det_pr).sum::<f64>() / n,
        det_a: per_alpha.iter().map(|a| a.det_a).sum::<f64>() / n,
        ass_a: per_alpha.iter().map(|a| a.ass_a).sum::<f64>() / n,
        per_alpha,
    })
}
