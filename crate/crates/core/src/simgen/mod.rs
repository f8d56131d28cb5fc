//! Synthetic greenhouse scenes: parametric plant geometry, a semi-cylindrical
//! camera path, occlusion-aware detection rendering with a configurable noise
//! model, and embedding synthesis standing in for a learned feature
//! extractor.

mod embed;
mod ordering;
mod path;
mod render;
pub mod rng;
mod scene;

pub use embed::embedding_centers;
pub use ordering::{covering_subsets, order_frames, subsample_viewpoints, FrameOrder};
pub use path::{camera_path, Viewpoint};
pub use render::{
    ground_truth, labeled_features, render_frame, render_scene, RenderedFrame,
};
pub use scene::{generate_scene, Leaf, Scene, Tomato};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parametric plant, camera-path and noise configuration. The seed fully
/// determines the generated scene and every rendered frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub seed: u64,
    pub n_trusses: usize,
    /// Inclusive [min, max] tomato count per truss.
    pub tomatoes_per_truss: [usize; 2],
    /// Stem height in meters; trusses are spaced evenly along it.
    pub stem_height: f64,
    /// Radial spread of a truss around the stem, meters.
    pub truss_radius: f64,
    pub tomato_radius: f64,
    pub n_leaves: usize,
    pub leaf_radius: f64,
    /// Linear gain of leaf density toward the top of the plant: the density
    /// at height z is proportional to `1 + gradient * z / stem_height`.
    pub leaf_density_gradient: f64,
    pub path: PathSpec,
    pub noise: NoiseSpec,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            n_trusses: 7,
            tomatoes_per_truss: [5, 9],
            stem_height: 2.0,
            truss_radius: 0.12,
            tomato_radius: 0.03,
            n_leaves: 40,
            leaf_radius: 0.08,
            leaf_density_gradient: 2.0,
            path: PathSpec::default(),
            noise: NoiseSpec::default(),
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("stem_height", self.stem_height),
            ("truss_radius", self.truss_radius),
            ("tomato_radius", self.tomato_radius),
            ("leaf_radius", self.leaf_radius),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tomatoes_per_truss[0] > self.tomatoes_per_truss[1] {
            return Err(Error::Config(
                "tomatoes_per_truss must be an ascending [min, max] pair".into(),
            ));
        }
        self.path.validate()?;
        self.noise.validate()
    }
}

/// Semi-cylindrical viewpoint grid: `n_heights` levels, each with
/// `n_azimuths` equally spaced poses aimed at the stem axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathSpec {
    pub n_heights: usize,
    pub n_azimuths: usize,
    /// Cylinder radius, meters.
    pub radius: f64,
    /// Swept azimuth in radians, endpoints inclusive.
    pub azimuth_span: f64,
    /// [min, max] camera heights, meters.
    pub height_range: [f64; 2],
}

impl Default for PathSpec {
    fn default() -> Self {
        Self {
            n_heights: 10,
            n_azimuths: 10,
            radius: 0.6,
            azimuth_span: std::f64::consts::PI,
            height_range: [0.25, 1.75],
        }
    }
}

impl PathSpec {
    pub fn n_viewpoints(&self) -> usize {
        self.n_heights * self.n_azimuths
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_heights == 0 || self.n_azimuths == 0 {
            return Err(Error::Config("path needs at least one height and azimuth".into()));
        }
        if !(self.radius > 0.0) {
            return Err(Error::Config("path radius must be positive".into()));
        }
        if self.height_range[0] > self.height_range[1] {
            return Err(Error::Config("height_range must be ascending".into()));
        }
        Ok(())
    }
}

/// Detector and embedding noise model.
///
/// The ray-aligned position error is a per-object offset applied along the
/// current viewing ray: it emulates the viewpoint-dependent bias of centers
/// estimated from a partial surface observation, which moves smoothly under
/// small viewpoint changes and jumps under large ones. The lateral error is
/// fresh zero-mean noise per detection, orthogonal to the ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSpec {
    /// Std of the fresh per-detection error orthogonal to the ray, meters.
    pub sigma_pos_lateral: f64,
    /// Std of the per-object coherent offset along the viewing ray, meters.
    pub sigma_pos_ray: f64,
    /// Detection probability of an unoccluded tomato, scaled down by
    /// partial silhouette occlusion.
    pub detect_prob_visible: f64,
    /// Expected false detections per frame (Poisson).
    pub clutter_rate: f64,
    /// Embedding dimensionality.
    pub feat_dim: usize,
    /// Angular scale (radians) of the per-detection embedding perturbation.
    pub sigma_feat: f64,
    /// Optional viewpoint-dependent embedding drift: an angular offset
    /// aligned with the viewing azimuth, at most this many radians at the
    /// sweep ends. Off by default; turning it on stresses how much of the
    /// feature path's order-invariance survives view-dependent features.
    pub sigma_feat_view: f64,
    /// Minimum pairwise angle between the embedding centers of distinct
    /// object ids, radians.
    pub min_center_angle: f64,
    /// Isotropic position sigma written into emitted detections, meters.
    pub reported_sigma_meas: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        OperatingPoint::preset(OperatingPointName::Mid).apply(&NoiseSpec {
            sigma_pos_lateral: 0.004,
            sigma_pos_ray: 0.025,
            detect_prob_visible: 1.0,
            clutter_rate: 0.0,
            feat_dim: 64,
            sigma_feat: 0.15,
            sigma_feat_view: 0.0,
            min_center_angle: 1.2,
            reported_sigma_meas: 0.01,
        })
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.detect_prob_visible) {
            return Err(Error::Config(format!(
                "detect_prob_visible must lie in [0, 1], got {}",
                self.detect_prob_visible
            )));
        }
        let non_negative = [
            ("sigma_pos_lateral", self.sigma_pos_lateral),
            ("sigma_pos_ray", self.sigma_pos_ray),
            ("clutter_rate", self.clutter_rate),
            ("sigma_feat", self.sigma_feat),
            ("sigma_feat_view", self.sigma_feat_view),
            ("min_center_angle", self.min_center_angle),
            ("reported_sigma_meas", self.reported_sigma_meas),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.feat_dim == 0 {
            return Err(Error::Config("feat_dim must be positive".into()));
        }
        Ok(())
    }
}

/// The three shipped detector operating points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatingPointName {
    Low,
    Mid,
    High,
}

impl std::fmt::Display for OperatingPointName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Low => "low",
            Self::Mid => "mid",
            Self::High => "high",
        })
    }
}

/// A detector operating regime: the frame-level detection recall/precision
/// pair the preset is tuned toward, and the noise parameters that realize
/// it on the default scene.
///
/// `detect_prob_visible` and `clutter_rate` were fixed once by a seeded
/// Monte-Carlo audit of rendered default scenes and are frozen here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatingPoint {
    pub name: OperatingPointName,
    /// Target detection recall, percent.
    pub target_det_re: f64,
    /// Target detection precision, percent.
    pub target_det_pr: f64,
    pub detect_prob_visible: f64,
    pub clutter_rate: f64,
}

impl OperatingPoint {
    pub fn preset(name: OperatingPointName) -> Self {
        match name {
            OperatingPointName::Low => Self {
                name,
                target_det_re: 67.76,
                target_det_pr: 68.83,
                detect_prob_visible: 0.855,
                clutter_rate: 7.48,
            },
            OperatingPointName::Mid => Self {
                name,
                target_det_re: 60.83,
                target_det_pr: 82.33,
                detect_prob_visible: 0.768,
                clutter_rate: 3.18,
            },
            OperatingPointName::High => Self {
                name,
                target_det_re: 46.71,
                target_det_pr: 88.07,
                detect_prob_visible: 0.590,
                clutter_rate: 1.54,
            },
        }
    }

    /// Noise spec with this preset's detection parameters substituted in.
    pub fn apply(&self, base: &NoiseSpec) -> NoiseSpec {
        NoiseSpec {
            detect_prob_visible: self.detect_prob_visible,
            clutter_rate: self.clutter_rate,
            ..base.clone()
        }
    }
}
