//! Tracking metrics between predicted and ground-truth trajectories:
//! CLEAR-style MOTA with FP/FN/identity-switch counts, HOTA with its
//! detection and association sub-metrics, and the paired t-test used to
//! annotate significance.

mod hota;
mod mota;
mod ttest;

pub use hota::{hota, AlphaScores, HotaReport};
pub use mota::{mota, MotaReport};
pub use ttest::{paired_t_test, significance_stars, TTest};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{TrajectoryRecord, TrajectorySet};

/// How two records on the same frame are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityKind {
    /// `max(0, 1 - |a - b| / d_max)` over 3D positions.
    Distance3d,
    /// Area intersection-over-union of the 2D boxes.
    Iou2d,
}

/// Similarity measure plus the alpha grid HOTA averages over.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityConfig {
    pub kind: SimilarityKind,
    /// Distance at which 3D similarity reaches zero, in meters.
    pub d_max: f64,
    /// Ascending thresholds in (0, 1).
    pub alpha_grid: Vec<f64>,
}

/// The 19-point grid 0.05, 0.10, ..., 0.95.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

impl Default for SimilarityConfig {
    fn default() -> Self {
        Self {
            kind: SimilarityKind::Distance3d,
            // One tomato diameter: beyond that, a detection cannot be the
            // same fruit.
            d_max: 0.05,
            alpha_grid: default_alpha_grid(),
        }
    }
}

impl SimilarityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_max > 0.0) {
            return Err(Error::Config(format!(
                "d_max must be positive, got {}",
                self.d_max
            )));
        }
        if self.alpha_grid.is_empty() {
            return Err(Error::Config("alpha_grid must be non-empty".into()));
        }
        for pair in self.alpha_grid.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Config("alpha_grid must be strictly ascending".into()));
            }
        }
        if self
            .alpha_grid
            .iter()
            .any(|a| !(*a > 0.0 && *a < 1.0))
        {
            return Err(Error::Config("alpha values must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Similarity of two same-frame records, in [0, 1].
pub fn similarity(
    gt: &TrajectoryRecord,
    pred: &TrajectoryRecord,
    config: &SimilarityConfig,
) -> Result<f64> {
    match config.kind {
        SimilarityKind::Distance3d => {
            let dist = (0..3)
                .map(|i| (gt.pos[i] - pred.pos[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            Ok((1.0 - dist / config.d_max).max(0.0))
        }
        SimilarityKind::Iou2d => {
            let a = gt.bbox.ok_or(Error::MissingBBox { frame: gt.frame })?;
            let b = pred.bbox.ok_or(Error::MissingBBox { frame: pred.frame })?;
            Ok(iou2d(a, b))
        }
    }
}

/// Area IoU of `(u, v, w, h)` boxes.
fn iou2d(a: [f64; 4], b: [f64; 4]) -> f64 {
    let ix = (a[0] + a[2]).min(b[0] + b[2]) - a[0].max(b[0]);
    let iy = (a[1] + a[3]).min(b[1] + b[3]) - a[1].max(b[1]);
    if ix <= 0.0 || iy <= 0.0 {
        return 0.0;
    }
    let inter = ix * iy;
    let union = a[2] * a[3] + b[2] * b[3] - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Every score the experiment tables need, in one flat record. Ratios are
/// fractions in [0, 1]; the table layer renders them as percentages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub hota: f64,
    pub det_re: f64,
    pub det_pr: f64,
    pub det_a: f64,
    pub ass_a: f64,
    pub mota: f64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub idsw: u64,
}

/// Runs both metric families at the given matching threshold for MOTA.
pub fn evaluate(
    gt: &TrajectorySet,
    pred: &TrajectorySet,
    config: &SimilarityConfig,
    match_threshold: f64,
) -> Result<MetricReport> {
    let hota_report = hota(gt, pred, config)?;
    let mota_report = mota(gt, pred, config, match_threshold)?;
    Ok(MetricReport {
        hota: hota_report.hota,
        det_re: hota_report.det_re,
        det_pr: hota_report.det_pr,
        det_a: hota_report.det_a,
        ass_a: hota_report.ass_a,
        mota: mota_report.mota,
        fp: mota_report.false_positives,
        fn_: mota_report.misses,
        idsw: mota_report.id_switches,
    })
}

/// Groups records by frame, ascending, preserving record order within a
/// frame.
pub(crate) fn records_by_frame(
    set: &TrajectorySet,
) -> std::collections::BTreeMap<u64, Vec<&TrajectoryRecord>> {
    let mut map: std::collections::BTreeMap<u64, Vec<&TrajectoryRecord>> = Default::default();
    for r in set.records() {
        map.entry(r.frame).or_default().push(r);
    }
    map
}
