//! Plant geometry: tomato spheres grouped in trusses along the stem, and
//! oriented leaf discs as occluders.

use nalgebra::Vector3;
use rand::Rng;

use crate::error::{Error, Result};
use crate::simgen::rng::{derive_rng, DOMAIN_SCENE};
use crate::simgen::{embedding_centers, SceneSpec};
use crate::types::FeatureVector;

const PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct Tomato {
    pub id: u64,
    pub center: Vector3<f64>,
    pub radius: f64,
    /// Amplitude and phase of this object's center-estimate offset along
    /// the viewing ray, a single slow harmonic over the sweep position.
    /// The offset changes smoothly between neighboring viewpoints and
    /// decorrelates across distant ones, the way a center fitted to a
    /// partial surface drifts with the visible cap.
    pub ray_bias_amp: f64,
    pub ray_bias_phase: f64,
}

impl Tomato {
    /// Unit-scale bias factor at a sweep position in [0, 1); multiplied by
    /// `sigma_pos_ray` at render time.
    pub fn ray_bias_at(&self, path_fraction: f64) -> f64 {
        self.ray_bias_amp
            * std::f64::consts::SQRT_2
            * (std::f64::consts::TAU * path_fraction + self.ray_bias_phase).cos()
    }
}

/// An occluding leaf: a flat disc.
#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub center: Vector3<f64>,
    pub normal: Vector3<f64>,
    pub radius: f64,
}

/// A generated scene plus the embedding center of each tomato id.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub tomatoes: Vec<Tomato>,
    pub leaves: Vec<Leaf>,
    pub embedding_centers: Vec<FeatureVector>,
}

impl Scene {
    /// Generates geometry and embedding centers for the spec.
    pub fn build(spec: &SceneSpec) -> Result<Self> {
        spec.validate()?;
        let (tomatoes, leaves) = generate_scene(spec)?;
        let embedding_centers = embedding_centers(
            tomatoes.len(),
            spec.noise.feat_dim,
            spec.noise.min_center_angle,
            spec.seed,
        )?;
        Ok(Self {
            spec: spec.clone(),
            tomatoes,
            leaves,
            embedding_centers,
        })
    }
}

/// Generates the tomato spheres and leaf discs. Tomato centers keep a
/// minimum pairwise distance of 1.5 radii; if a truss cannot be packed
/// within the retry budget the error suggests reducing the count.
pub fn generate_scene(spec: &SceneSpec) -> Result<(Vec<Tomato>, Vec<Leaf>)> {
    spec.validate()?;
    let mut rng = derive_rng(spec.seed, DOMAIN_SCENE, 0);
    let mut tomatoes: Vec<Tomato> = Vec::new();
    let min_dist = 1.5 * spec.tomato_radius;

    for truss in 0..spec.n_trusses {
        let truss_z = spec.stem_height * (truss + 1) as f64 / (spec.n_trusses + 1) as f64;
        let [lo, hi] = spec.tomatoes_per_truss;
        let count = rng.random_range(lo..=hi);
        for _ in 0..count {
            let mut placed = false;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let angle = rng.random_range(0.0..std::f64::consts::TAU);
                let radial = spec.truss_radius * rng.random_range(0.5..1.0);
                let z = truss_z + spec.truss_radius * rng.random_range(-0.35..0.35);
                let center = Vector3::new(radial * angle.cos(), radial * angle.sin(), z);
                if tomatoes
                    .iter()
                    .all(|t| (t.center - center).norm() >= min_dist)
                {
                    tomatoes.push(Tomato {
                        id: tomatoes.len() as u64,
                        center,
                        radius: spec.tomato_radius,
                        ray_bias_amp: rng.random_range(0.5..1.5),
                        ray_bias_phase: rng.random_range(0.0..std::f64::consts::TAU),
                    });
                    placed = true;
                    break;
                }
            }
            if !placed {
                return Err(Error::SceneGeneration(format!(
                    "could not place tomato {} of truss {truss} without violating the \
                     minimum spacing; try fewer tomatoes per truss or a larger truss_radius",
                    tomatoes.len()
                )));
            }
        }
    }

    let mut leaves = Vec::with_capacity(spec.n_leaves);
    let gradient = spec.leaf_density_gradient.max(0.0);
    for _ in 0..spec.n_leaves {
        // Height density grows linearly toward the top of the stem.
        let z = loop {
            let z = rng.random_range(0.0..spec.stem_height);
            let accept = (1.0 + gradient * z / spec.stem_height) / (1.0 + gradient);
            if rng.random_range(0.0..1.0) < accept {
                break z;
            }
        };
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        let radial = spec.truss_radius * rng.random_range(0.2..1.6);
        let center = Vector3::new(radial * angle.cos(), radial * angle.sin(), z);
        // Mostly outward-facing with a random tilt.
        let tilt = rng.random_range(-0.4..0.8);
        let yaw = angle + rng.random_range(-0.5..0.5);
        let normal = Vector3::new(yaw.cos(), yaw.sin(), tilt).normalize();
        let radius = spec.leaf_radius * rng.random_range(0.7..1.3);
        leaves.push(Leaf {
            center,
            normal,
            radius,
        });
    }
    Ok((tomatoes, leaves))
}
