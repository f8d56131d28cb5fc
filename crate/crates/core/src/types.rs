//! Domain value types: position beliefs, appearance features, detections,
//! tracks and the world model.
//!
//! All types are immutable once constructed; the operations over them are
//! pure functions, so values can be shared freely across threads.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Maximum per-entry asymmetry accepted when ingesting a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Maximum deviation of a feature vector's L2 norm from 1 after ingest.
pub const UNIT_NORM_TOL: f64 = 1e-6;

/// A 3D position belief: mean in meters (world frame) plus a symmetric
/// positive-definite covariance in meters squared.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian3 {
    mean: Vector3<f64>,
    cov: Matrix3<f64>,
}

impl Gaussian3 {
    /// Builds a belief, checking symmetry (within [`SYMMETRY_TOL`]) and
    /// positive definiteness. The stored covariance is the symmetrized
    /// `(C + C^T) / 2`.
    pub fn new(mean: Vector3<f64>, cov: Matrix3<f64>) -> Result<Self> {
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: f64::NAN,
            });
        }
        let max_asymmetry = (cov - cov.transpose()).abs().max();
        if max_asymmetry > SYMMETRY_TOL {
            return Err(Error::AsymmetricCovariance {
                max_asymmetry,
                tol: SYMMETRY_TOL,
            });
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let min_eigenvalue = sym.symmetric_eigenvalues().min();
        if min_eigenvalue <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(Self { mean, cov: sym })
    }

    /// Belief with covariance `var * I`.
    pub fn isotropic(mean: Vector3<f64>, var: f64) -> Result<Self> {
        Self::new(mean, Matrix3::identity() * var)
    }

    pub fn mean(&self) -> &Vector3<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix3<f64> {
        &self.cov
    }

    /// Ratio of extreme eigenvalue magnitudes of the covariance.
    pub fn condition_number(&self) -> f64 {
        let eig = self.cov.symmetric_eigenvalues();
        let max = eig.amax();
        let min = eig.amin();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// A unit-norm appearance embedding.
///
/// Vectors are re-normalized on ingest: upstream float serialization loses
/// a little precision and the cosine-distance arithmetic presumes unit
/// norm, so rejecting slightly off-norm inputs would be needlessly strict.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::ZeroNormFeature);
        }
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-12 {
            return Err(Error::ZeroNormFeature);
        }
        Ok(Self {
            values: values.into_iter().map(|v| v / norm).collect(),
        })
    }

    /// Wraps values that are already unit-norm by construction, preserving
    /// their bits. Used where exact equality of repeated embeddings matters
    /// (a renormalizing division can flip the last ulp).
    pub(crate) fn from_unit_unchecked(values: Vec<f64>) -> Self {
        debug_assert!({
            let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
            (norm - 1.0).abs() <= UNIT_NORM_TOL
        });
        Self { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

/// One measurement: a position belief, an optional image-space box
/// `(u, v, w, h)` and a unit appearance feature, stamped with a frame index.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub position: Gaussian3,
    pub bbox: Option<[f64; 4]>,
    pub feature: FeatureVector,
    pub frame: u64,
}

impl Detection {
    pub fn new(
        position: Gaussian3,
        bbox: Option<[f64; 4]>,
        feature: FeatureVector,
        frame: u64,
    ) -> Result<Self> {
        if let Some([_, _, w, h]) = bbox {
            if !(w > 0.0 && h > 0.0) {
                return Err(Error::InvalidBBox { w, h });
            }
        }
        Ok(Self {
            position,
            bbox,
            feature,
            frame,
        })
    }
}

/// A persistent object hypothesis: id, position belief, the full history of
/// associated appearance features, and the box of the last associated
/// detection.
#[derive(Debug, Clone)]
pub struct Track {
    pub(crate) id: u64,
    pub(crate) position: Gaussian3,
    pub(crate) features: Vec<FeatureVector>,
    pub(crate) bbox: Option<[f64; 4]>,
    pub(crate) birth_frame: u64,
    pub(crate) last_update_frame: u64,
    pub(crate) hits: u64,
}

impl Track {
    /// Initializes a track directly from an unmatched detection: the belief
    /// is the detection's belief and the feature list is seeded with the
    /// detection's feature.
    pub fn from_detection(id: u64, det: &Detection) -> Self {
        Self {
            id,
            position: det.position.clone(),
            features: vec![det.feature.clone()],
            bbox: det.bbox,
            birth_frame: det.frame,
            last_update_frame: det.frame,
            hits: 1,
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn position(&self) -> &Gaussian3 {
        &self.position
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn bbox(&self) -> Option<[f64; 4]> {
        self.bbox
    }

    pub fn birth_frame(&self) -> u64 {
        self.birth_frame
    }

    pub fn last_update_frame(&self) -> u64 {
        self.last_update_frame
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }
}

/// The set of all tracks maintained over time. Tracks are never removed and
/// ids are never reused.
#[derive(Debug, Clone, Default)]
pub struct WorldModel {
    pub(crate) tracks: Vec<Track>,
    pub(crate) frame: Option<u64>,
    pub(crate) next_id: u64,
}

impl WorldModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Frame index of the last processed step, `None` before the first step.
    pub fn frame(&self) -> Option<u64> {
        self.frame
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }
}
