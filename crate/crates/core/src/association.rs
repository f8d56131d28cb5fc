//! Data association between predicted tracks and detections: cost matrices,
//! gating, and the assignment solve.
//!
//! Position cost is the squared Mahalanobis distance under the track's own
//! covariance, feature cost is the smallest cosine distance against the
//! track's stored feature list, and the two are fused as a convex
//! combination weighted by lambda before a gated Hungarian solve.

use nalgebra::{Cholesky, DMatrix, Vector3};

use crate::error::{Error, Result};
use crate::types::{Detection, FeatureVector, Gaussian3, Track};

/// Condition-number limit above which a track covariance is rejected.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Default squared-Mahalanobis position gate: the 0.95 quantile of the
/// chi-square distribution with 3 degrees of freedom.
pub const DEFAULT_POS_GATE: f64 = 7.82;

/// Gating thresholds and the position/feature mixing weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateConfig {
    /// Squared-Mahalanobis threshold on the position cost.
    pub pos_gate: f64,
    /// Cosine-distance threshold on the feature cost, in [0, 2].
    pub feat_gate: f64,
    /// Weight of the feature cost in the fused matrix, in [0, 1].
    pub lambda: f64,
}

impl GateConfig {
    pub fn new(pos_gate: f64, feat_gate: f64, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidLambda(lambda));
        }
        if !(pos_gate > 0.0) {
            return Err(Error::InvalidGate(format!(
                "position gate must be positive, got {pos_gate}"
            )));
        }
        if !(0.0..=2.0).contains(&feat_gate) {
            return Err(Error::InvalidGate(format!(
                "feature gate must lie in [0, 2], got {feat_gate}"
            )));
        }
        Ok(Self {
            pos_gate,
            feat_gate,
            lambda,
        })
    }
}

/// A rectangular cost matrix (rows = tracks, cols = detections) with a mask
/// of pairs that gating has ruled out.
#[derive(Debug, Clone)]
pub struct CostMatrix {
    values: DMatrix<f64>,
    forbidden: DMatrix<bool>,
}

impl CostMatrix {
    pub fn new(values: DMatrix<f64>, forbidden: DMatrix<bool>) -> Result<Self> {
        if values.shape() != forbidden.shape() {
            return Err(Error::ShapeMismatch {
                left_rows: values.nrows(),
                left_cols: values.ncols(),
                right_rows: forbidden.nrows(),
                right_cols: forbidden.ncols(),
            });
        }
        for i in 0..values.nrows() {
            for j in 0..values.ncols() {
                if !forbidden[(i, j)] && !values[(i, j)].is_finite() {
                    return Err(Error::NonFiniteCost { row: i, col: j });
                }
            }
        }
        Ok(Self { values, forbidden })
    }

    /// Cost matrix with no gated-out pairs.
    pub fn unforbidden(values: DMatrix<f64>) -> Result<Self> {
        let forbidden = DMatrix::from_element(values.nrows(), values.ncols(), false);
        Self::new(values, forbidden)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[(row, col)]
    }

    pub fn is_forbidden(&self, row: usize, col: usize) -> bool {
        self.forbidden[(row, col)]
    }
}

/// Result of an assignment solve: matched index pairs plus the leftovers on
/// both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    /// Matched (track_index, detection_index) pairs, sorted by track index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self, cost: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(i, j)| cost.value(i, j)).sum()
    }
}

/// Squared Mahalanobis distance between a detection mean and a track's
/// belief, weighted by the track covariance only.
pub fn position_cost(track_belief: &Gaussian3, det_mean: &Vector3<f64>) -> Result<f64> {
    let cond = track_belief.condition_number();
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::IllConditionedCovariance {
            cond,
            limit: CONDITION_LIMIT,
        });
    }
    let chol = Cholesky::new(*track_belief.cov()).ok_or(Error::IllConditionedCovariance {
        cond,
        limit: CONDITION_LIMIT,
    })?;
    let delta = det_mean - track_belief.mean();
    // d^T S^-1 d via the triangular factor: solve L z = d, cost = |z|^2.
    let z = chol
        .l()
        .solve_lower_triangular(&delta)
        .ok_or(Error::IllConditionedCovariance {
            cond,
            limit: CONDITION_LIMIT,
        })?;
    Ok(z.norm_squared())
}

/// Cosine distance between two unit vectors, computed as half the squared
/// Euclidean distance. Algebraically equal to `1 - a.b` for unit inputs,
/// and exactly zero for bitwise-identical ones.
fn cosine_distance(a: &FeatureVector, b: &FeatureVector) -> f64 {
    let d: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| {
            let e = x - y;
            e * e
        })
        .sum();
    (0.5 * d).min(2.0)
}

/// Smallest cosine distance between the track's stored features and the
/// detection feature.
pub fn feature_cost(track_features: &[FeatureVector], det_feature: &FeatureVector) -> Result<f64> {
    if track_features.is_empty() {
        return Err(Error::EmptyFeatureList);
    }
    let mut best = f64::INFINITY;
    for f in track_features {
        if f.dim() != det_feature.dim() {
            return Err(Error::FeatureDimMismatch {
                left: f.dim(),
                right: det_feature.dim(),
            });
        }
        best = best.min(cosine_distance(f, det_feature));
    }
    Ok(best)
}

/// Position cost matrix over all (track, detection) pairs. Errors name the
/// offending track.
pub fn position_cost_matrix(tracks: &[Track], detections: &[Detection]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(tracks.len(), detections.len());
    for (i, track) in tracks.iter().enumerate() {
        for (j, det) in detections.iter().enumerate() {
            out[(i, j)] =
                position_cost(track.position(), det.position.mean()).map_err(|e| match e {
                    Error::IllConditionedCovariance { cond, .. } => {
                        Error::TrackCovarianceIllConditioned {
                            track_id: track.id(),
                            cond,
                        }
                    }
                    other => other,
                })?;
        }
    }
    Ok(out)
}

/// Feature cost matrix over all (track, detection) pairs.
pub fn feature_cost_matrix(tracks: &[Track], detections: &[Detection]) -> Result<DMatrix<f64>> {
    let mut out = DMatrix::zeros(tracks.len(), detections.len());
    for (i, track) in tracks.iter().enumerate() {
        for (j, det) in detections.iter().enumerate() {
            out[(i, j)] = feature_cost(track.features(), &det.feature)?;
        }
    }
    Ok(out)
}

/// Convex combination `(1 - lambda) * pos + lambda * feat`.
///
/// At the endpoints the other matrix is returned untouched so that the
/// unused modality cannot leak rounding into the result.
pub fn combined_cost(
    pos: &DMatrix<f64>,
    feat: &DMatrix<f64>,
    lambda: f64,
) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    if pos.shape() != feat.shape() {
        return Err(Error::ShapeMismatch {
            left_rows: pos.nrows(),
            left_cols: pos.ncols(),
            right_rows: feat.nrows(),
            right_cols: feat.ncols(),
        });
    }
    if lambda == 0.0 {
        return Ok(pos.clone());
    }
    if lambda == 1.0 {
        return Ok(feat.clone());
    }
    Ok(pos.zip_map(feat, |p, f| (1.0 - lambda) * p + lambda * f))
}

/// A pair is forbidden when either cost strictly exceeds its threshold.
pub fn apply_gates(
    pos: &DMatrix<f64>,
    feat: &DMatrix<f64>,
    gate: &GateConfig,
) -> Result<DMatrix<bool>> {
    if pos.shape() != feat.shape() {
        return Err(Error::ShapeMismatch {
            left_rows: pos.nrows(),
            left_cols: pos.ncols(),
            right_rows: feat.nrows(),
            right_cols: feat.ncols(),
        });
    }
    Ok(DMatrix::from_fn(pos.nrows(), pos.ncols(), |i, j| {
        pos[(i, j)] > gate.pos_gate || feat[(i, j)] > gate.feat_gate
    }))
}

/// Minimum-cost assignment over the non-forbidden pairs, maximizing the
/// number of matched pairs first and total cost second. Leftover rows and
/// columns are reported unmatched; an all-forbidden matrix yields an empty
/// pairing.
pub fn solve_assignment(cost: &CostMatrix) -> Assignment {
    let (rows, cols) = (cost.nrows(), cost.ncols());
    if rows == 0 || cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_tracks: (0..rows).collect(),
            unmatched_detections: (0..cols).collect(),
        };
    }

    // Forbidden pairs enter the solver as a large finite sentinel so a
    // standard solver applies; any returned sentinel pair is stripped
    // afterwards. The sentinel dwarfs every achievable finite total, which
    // makes the solver prefer more real pairs over any cost saving.
    let mut max_finite = 0.0_f64;
    for i in 0..rows {
        for j in 0..cols {
            if !cost.is_forbidden(i, j) {
                max_finite = max_finite.max(cost.value(i, j).abs());
            }
        }
    }
    let sentinel = 1e6 * max_finite.max(1.0);

    let transposed = rows > cols;
    let (n, m) = if transposed { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| -> f64 {
        let (r, c) = if transposed { (j, i) } else { (i, j) };
        if cost.is_forbidden(r, c) {
            sentinel
        } else {
            cost.value(r, c)
        }
    };

    let row_of_col = hungarian(n, m, at);

    let mut pairs = Vec::new();
    for (j, &i) in row_of_col.iter().enumerate() {
        if let Some(i) = i {
            let (r, c) = if transposed { (j, i) } else { (i, j) };
            if !cost.is_forbidden(r, c) {
                pairs.push((r, c));
            }
        }
    }
    pairs.sort_unstable();

    let mut track_used = vec![false; rows];
    let mut det_used = vec![false; cols];
    for &(r, c) in &pairs {
        track_used[r] = true;
        det_used[c] = true;
    }
    Assignment {
        pairs,
        unmatched_tracks: (0..rows).filter(|&r| !track_used[r]).collect(),
        unmatched_detections: (0..cols).filter(|&c| !det_used[c]).collect(),
    }
}

/// Potential-based Hungarian algorithm for `n <= m`: assigns every row to a
/// distinct column minimizing total cost. Returns, per column, the assigned
/// row. Deterministic for identical inputs.
fn hungarian(n: usize, m: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    debug_assert!(n <= m);
    // 1-indexed with a virtual column 0, after the classic formulation.
    let mut u = vec![0.0_f64; n + 1];
    let mut v = vec![0.0_f64; m + 1];
    let mut p = vec![0_usize; m + 1]; // row assigned to column (0 = none)
    let mut way = vec![0_usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0_usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0_usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=m)
        .map(|j| if p[j] == 0 { None } else { Some(p[j] - 1) })
        .collect()
}

/// Calibrates the feature gate from labeled embeddings: for every occurrence
/// of every id, the minimum cosine distance to the other occurrences of the
/// same id is collected, and the 0.95 empirical quantile (nearest rank) of
/// those minima is the threshold.
pub fn calibrate_feature_gate(labeled_features: &[(u64, FeatureVector)]) -> Result<f64> {
    let mut by_id: std::collections::BTreeMap<u64, Vec<&FeatureVector>> =
        std::collections::BTreeMap::new();
    for (id, f) in labeled_features {
        by_id.entry(*id).or_default().push(f);
    }
    let mut minima = Vec::new();
    for occurrences in by_id.values() {
        if occurrences.len() < 2 {
            continue;
        }
        for (k, f) in occurrences.iter().enumerate() {
            let mut best = f64::INFINITY;
            for (other_k, other) in occurrences.iter().enumerate() {
                if other_k != k {
                    best = best.min(cosine_distance(f, other));
                }
            }
            minima.push(best);
        }
    }
    if minima.is_empty() {
        return Err(Error::NoRepeatedIds);
    }
    minima.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.95 * minima.len() as f64).ceil() as usize).max(1);
    Ok(minima[rank - 1])
}
