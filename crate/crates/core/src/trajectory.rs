//! Trajectory records shared by the tracker output path and the metric
//! evaluation input path.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// One trajectory sample: an object id observed at a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub frame: u64,
    pub id: u64,
    pub pos: [f64; 3],
    pub bbox: Option<[f64; 4]>,
}

/// A set of trajectory records, ground truth or predicted, with at most one
/// record per (frame, id).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectorySet {
    records: Vec<TrajectoryRecord>,
}

impl TrajectorySet {
    pub fn from_records(records: Vec<TrajectoryRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert((r.frame, r.id)) {
                return Err(Error::DuplicateTrajectoryRecord {
                    frame: r.frame,
                    id: r.id,
                });
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[TrajectoryRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct frame indices, ascending.
    pub fn frames(&self) -> Vec<u64> {
        let mut frames: Vec<u64> = self.records.iter().map(|r| r.frame).collect();
        frames.sort_unstable();
        frames.dedup();
        frames
    }

    /// Records restricted to the given frames, preserving order.
    pub fn restricted_to_frames(&self, frames: &HashSet<u64>) -> Self {
        Self {
            records: self
                .records
                .iter()
                .filter(|r| frames.contains(&r.frame))
                .cloned()
                .collect(),
        }
    }
}
