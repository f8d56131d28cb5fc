//! Frame ordering and viewpoint subset selection for experiments.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simgen::rng::{derive_rng, DOMAIN_ORDER, DOMAIN_SUBSET};

/// Presentation order of rendered frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameOrder {
    /// Frames processed as recorded along the camera path.
    Sequential,
    /// Frames processed in a seeded uniform shuffle.
    Random,
}

impl std::fmt::Display for FrameOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sequential => "sequential",
            Self::Random => "random",
        })
    }
}

/// Sequential is the identity; random is a seeded Fisher-Yates shuffle.
pub fn order_frames<T>(frames: Vec<T>, order: FrameOrder, seed: u64) -> Vec<T> {
    match order {
        FrameOrder::Sequential => frames,
        FrameOrder::Random => {
            let mut rng = derive_rng(seed, DOMAIN_ORDER, 0);
            let mut frames = frames;
            frames.shuffle(&mut rng);
            frames
        }
    }
}

/// `k` seeded uniform subsets of `size` frame indices out of `n_frames`,
/// each sorted ascending (order-preserving within the subset).
pub fn subsample_viewpoints(
    n_frames: usize,
    k: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>> {
    if size > n_frames {
        return Err(Error::SubsetTooLarge {
            size,
            available: n_frames,
        });
    }
    Ok((0..k)
        .map(|subset| {
            let mut rng = derive_rng(seed, DOMAIN_SUBSET, subset as u64);
            let mut indices: Vec<usize> = (0..n_frames).collect();
            indices.shuffle(&mut rng);
            indices.truncate(size);
            indices.sort_unstable();
            indices
        })
        .collect())
}

/// Subsets audited for union coverage: every frame should appear in at
/// least one subset. On a violation the seed is advanced and sampling
/// retried; the seed actually used is returned alongside the subsets.
pub fn covering_subsets(
    n_frames: usize,
    k: usize,
    size: usize,
    seed: u64,
    max_retries: u64,
) -> Result<(Vec<Vec<usize>>, u64)> {
    for attempt in 0..=max_retries {
        let candidate_seed = seed + attempt;
        let subsets = subsample_viewpoints(n_frames, k, size, candidate_seed)?;
        let mut covered = vec![false; n_frames];
        for subset in &subsets {
            for &idx in subset {
                covered[idx] = true;
            }
        }
        if covered.iter().all(|&c| c) {
            return Ok((subsets, candidate_seed));
        }
    }
    Err(Error::SceneGeneration(format!(
        "no covering subset family found in {max_retries} reseeds"
    )))
}
