//! Occlusion-aware rendering of detections from a viewpoint.
//!
//! A tomato is visible when the segment from the camera to its center
//! clears every leaf disc and every other tomato sphere. Six extra rays at
//! the sphere silhouette grade partial occlusion: the detection probability
//! scales with the fraction of clear silhouette rays.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Poisson, StandardNormal};
use rand_chacha::ChaCha8Rng;

use crate::simgen::rng::{derive_rng, DOMAIN_FRAME, DOMAIN_VIEWFEAT};
use crate::simgen::{camera_path, NoiseSpec, Scene, Viewpoint};
use crate::trajectory::{TrajectoryRecord, TrajectorySet};
use crate::types::{Detection, FeatureVector, Gaussian3};

const SILHOUETTE_RAYS: usize = 6;

/// Rendered detections for one viewpoint, with the ground-truth side
/// channel kept apart from the tracker input.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    /// Index of the viewpoint on the camera path; doubles as frame index.
    pub viewpoint: usize,
    pub detections: Vec<Detection>,
    /// Per-detection true object id; `None` marks clutter. Audit-only.
    pub gt_ids: Vec<Option<u64>>,
    /// Visible ground truth at this viewpoint: (id, true center).
    pub visible_gt: Vec<(u64, Vector3<f64>)>,
}

fn segment_hits_sphere(
    from: &Vector3<f64>,
    to: &Vector3<f64>,
    center: &Vector3<f64>,
    radius: f64,
) -> bool {
    let d = to - from;
    let len_sq = d.norm_squared();
    if len_sq == 0.0 {
        return (center - from).norm() < radius;
    }
    let t = ((center - from).dot(&d) / len_sq).clamp(0.0, 1.0);
    let closest = from + d * t;
    (center - closest).norm() < radius
}

fn segment_hits_disc(
    from: &Vector3<f64>,
    to: &Vector3<f64>,
    center: &Vector3<f64>,
    normal: &Vector3<f64>,
    radius: f64,
) -> bool {
    let d = to - from;
    let denom = normal.dot(&d);
    if denom.abs() < 1e-12 {
        return false;
    }
    let t = normal.dot(&(center - from)) / denom;
    if !(0.0..=1.0).contains(&t) {
        return false;
    }
    let point = from + d * t;
    (point - center).norm() <= radius
}

/// True when the open segment from the camera to `target` is blocked by any
/// leaf or by a tomato sphere other than `exclude`.
fn segment_blocked(scene: &Scene, from: &Vector3<f64>, target: &Vector3<f64>, exclude: u64) -> bool {
    for tomato in &scene.tomatoes {
        if tomato.id != exclude && segment_hits_sphere(from, target, &tomato.center, tomato.radius)
        {
            return true;
        }
    }
    for leaf in &scene.leaves {
        if segment_hits_disc(from, target, &leaf.center, &leaf.normal, leaf.radius) {
            return true;
        }
    }
    false
}

/// Orthonormal pair spanning the plane orthogonal to `dir` (unit).
fn orthonormal_basis(dir: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if dir.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let u = dir.cross(&helper).normalize();
    let v = dir.cross(&u);
    (u, v)
}

/// Rotates a unit vector by `theta` toward the unit tangent `tangent`.
fn rotate_toward(center: &[f64], tangent: &[f64], theta: f64) -> Vec<f64> {
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    center
        .iter()
        .zip(tangent)
        .map(|(c, t)| cos_t * c + sin_t * t)
        .collect()
}

/// Azimuth-aligned embedding drift: the embedding center tilted toward a
/// fixed per-object tangent direction by an angle proportional to where
/// the viewpoint sits on the azimuth arc (-1 at one end, +1 at the other).
/// Deterministic in (seed, object id).
fn view_shifted_center(
    scene: &Scene,
    object_id: u64,
    viewpoint: &Viewpoint,
    sigma_feat_view: f64,
    seed: u64,
) -> FeatureVector {
    let center = scene.embedding_centers[object_id as usize].values();
    let mut rng = derive_rng(seed, DOMAIN_VIEWFEAT, object_id);
    let tangent = loop {
        let g: Vec<f64> = (0..center.len())
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let dot: f64 = g.iter().zip(center).map(|(a, b)| a * b).sum();
        let t: Vec<f64> = g.iter().zip(center).map(|(a, b)| a - dot * b).collect();
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            break t.iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let azimuth = viewpoint.position.y.atan2(viewpoint.position.x);
    let span = scene.spec.path.azimuth_span.max(1e-9);
    let arc_position = 2.0 * (azimuth / span) - 1.0;
    FeatureVector::from_unit_unchecked(rotate_toward(
        center,
        &tangent,
        sigma_feat_view * arc_position,
    ))
}

/// Perturbs an embedding center by an angle of scale `sigma` radians inside
/// the unit sphere's tangent space, renormalizing analytically. A zero
/// sigma returns the center bit-for-bit.
fn perturb_embedding(
    center: &FeatureVector,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> FeatureVector {
    if sigma == 0.0 {
        return center.clone();
    }
    let dim = center.dim();
    let c = center.values();
    let tangent = loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let dot: f64 = g.iter().zip(c).map(|(a, b)| a * b).sum();
        let t: Vec<f64> = g.iter().zip(c).map(|(a, b)| a - dot * b).collect();
        let norm = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            break t.iter().map(|x| x / norm).collect::<Vec<f64>>();
        }
    };
    let theta = sigma * rng.sample::<f64, _>(StandardNormal).abs();
    let (cos_t, sin_t) = (theta.cos(), theta.sin());
    FeatureVector::from_unit_unchecked(
        c.iter()
            .zip(&tangent)
            .map(|(ci, ti)| cos_t * ci + sin_t * ti)
            .collect(),
    )
}

/// Renders the detections seen from one viewpoint.
///
/// Detected positions are the true centers displaced by the object's
/// coherent ray-aligned offset plus fresh lateral noise; features are the
/// object's embedding center perturbed by `sigma_feat`. Clutter count is
/// Poisson and clutter falls uniformly in a cone toward the look-at point
/// with a fresh random feature.
pub fn render_frame(
    scene: &Scene,
    viewpoint_index: usize,
    viewpoint: &Viewpoint,
    noise: &NoiseSpec,
    seed: u64,
) -> RenderedFrame {
    let mut rng = derive_rng(seed, DOMAIN_FRAME, viewpoint_index as u64);
    let cam = viewpoint.position;
    let frame = viewpoint_index as u64;

    let mut detections = Vec::new();
    let mut gt_ids = Vec::new();
    let mut visible_gt = Vec::new();

    for tomato in &scene.tomatoes {
        if segment_blocked(scene, &cam, &tomato.center, tomato.id) {
            continue;
        }
        visible_gt.push((tomato.id, tomato.center));

        let ray = (tomato.center - cam).normalize();
        let (u, v) = orthonormal_basis(&ray);
        let mut clear = 0usize;
        for k in 0..SILHOUETTE_RAYS {
            let angle = std::f64::consts::TAU * k as f64 / SILHOUETTE_RAYS as f64;
            let limb = tomato.center + (u * angle.cos() + v * angle.sin()) * tomato.radius;
            if !segment_blocked(scene, &cam, &limb, tomato.id) {
                clear += 1;
            }
        }
        let p_detect = noise.detect_prob_visible * clear as f64 / SILHOUETTE_RAYS as f64;
        if rng.random_range(0.0..1.0) >= p_detect {
            continue;
        }

        let lateral = u * (noise.sigma_pos_lateral * rng.sample::<f64, _>(StandardNormal))
            + v * (noise.sigma_pos_lateral * rng.sample::<f64, _>(StandardNormal));
        let path_fraction = viewpoint_index as f64 / scene.spec.path.n_viewpoints() as f64;
        let bias = tomato.ray_bias_at(path_fraction) * noise.sigma_pos_ray;
        let mean = tomato.center + ray * bias + lateral;
        let position = Gaussian3::isotropic(mean, noise.reported_sigma_meas.powi(2))
            .expect("reported measurement covariance is PD");
        let base = if noise.sigma_feat_view > 0.0 {
            view_shifted_center(scene, tomato.id, viewpoint, noise.sigma_feat_view, seed)
        } else {
            scene.embedding_centers[tomato.id as usize].clone()
        };
        let feature = perturb_embedding(&base, noise.sigma_feat, &mut rng);
        detections.push(Detection::new(position, None, feature, frame).expect("valid detection"));
        gt_ids.push(Some(tomato.id));
    }

    if noise.clutter_rate > 0.0 {
        let poisson = Poisson::new(noise.clutter_rate).expect("positive clutter rate");
        let count = rng.sample::<f64, _>(poisson) as usize;
        let dir = (viewpoint.look_at - cam).normalize();
        let (u, v) = orthonormal_basis(&dir);
        let axis_dist = (viewpoint.look_at - cam).norm();
        for _ in 0..count {
            let depth = axis_dist * rng.random_range(0.5..1.3);
            let spread = 0.35 * depth * rng.random_range(0.0..1.0f64).sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let mean = cam + dir * depth + (u * phi.cos() + v * phi.sin()) * spread;
            let position = Gaussian3::isotropic(mean, noise.reported_sigma_meas.powi(2))
                .expect("reported measurement covariance is PD");
            let raw: Vec<f64> = (0..noise.feat_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let feature = FeatureVector::new(raw).expect("gaussian feature is non-degenerate");
            detections
                .push(Detection::new(position, None, feature, frame).expect("valid detection"));
            gt_ids.push(None);
        }
    }

    RenderedFrame {
        viewpoint: viewpoint_index,
        detections,
        gt_ids,
        visible_gt,
    }
}

/// Renders every viewpoint of the scene's camera path.
pub fn render_scene(scene: &Scene, noise: &NoiseSpec, seed: u64) -> Vec<RenderedFrame> {
    camera_path(&scene.spec.path)
        .iter()
        .enumerate()
        .map(|(idx, vp)| render_frame(scene, idx, vp, noise, seed))
        .collect()
}

/// Ground-truth trajectory set of the visible tomatoes per frame.
pub fn ground_truth(frames: &[RenderedFrame]) -> TrajectorySet {
    let records = frames
        .iter()
        .flat_map(|f| {
            f.visible_gt.iter().map(|(id, center)| TrajectoryRecord {
                frame: f.viewpoint as u64,
                id: *id,
                pos: (*center).into(),
                bbox: None,
            })
        })
        .collect();
    TrajectorySet::from_records(records).expect("one record per visible tomato per frame")
}

/// (id, feature) pairs of every non-clutter detection, for gate calibration.
pub fn labeled_features(frames: &[RenderedFrame]) -> Vec<(u64, FeatureVector)> {
    let mut out = Vec::new();
    for frame in frames {
        for (det, gt) in frame.detections.iter().zip(&frame.gt_ids) {
            if let Some(id) = gt {
                out.push((*id, det.feature.clone()));
            }
        }
    }
    out
}
