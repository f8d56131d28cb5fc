//! Synthetic embedding centers standing in for a trained feature extractor:
//! one well-separated unit vector per object id.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::simgen::rng::{derive_rng, DOMAIN_EMBED};
use crate::types::FeatureVector;

const ATTEMPTS_PER_ID: usize = 10_000;

fn random_unit(rng: &mut impl Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-9 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

/// Samples `n_ids` unit vectors with pairwise angle at least
/// `min_center_angle`, deterministically in the seed. A separation of pi is
/// only satisfiable by an antipodal pair, so that case is constructed
/// directly; everything below it goes through bounded rejection sampling.
pub fn embedding_centers(
    n_ids: usize,
    feat_dim: usize,
    min_center_angle: f64,
    seed: u64,
) -> Result<Vec<FeatureVector>> {
    let mut rng = derive_rng(seed, DOMAIN_EMBED, 0);
    if n_ids == 0 {
        return Ok(Vec::new());
    }
    let infeasible = Error::EmbeddingInfeasible {
        n: n_ids,
        min_angle: min_center_angle,
        dim: feat_dim,
    };
    if min_center_angle >= std::f64::consts::PI - 1e-12 {
        if n_ids > 2 {
            return Err(infeasible);
        }
        let v = random_unit(&mut rng, feat_dim);
        let mut out = vec![FeatureVector::new(v.clone())?];
        if n_ids == 2 {
            out.push(FeatureVector::new(v.iter().map(|x| -x).collect())?);
        }
        return Ok(out);
    }

    let max_dot = min_center_angle.cos() + 1e-12;
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(n_ids);
    let mut budget = ATTEMPTS_PER_ID * n_ids;
    while centers.len() < n_ids {
        if budget == 0 {
            return Err(infeasible);
        }
        budget -= 1;
        let candidate = random_unit(&mut rng, feat_dim);
        let ok = centers.iter().all(|c| {
            let dot: f64 = c.iter().zip(&candidate).map(|(a, b)| a * b).sum();
            dot <= max_dot
        });
        if ok {
            centers.push(candidate);
        }
    }
    centers.into_iter().map(FeatureVector::new).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn angle(a: &FeatureVector, b: &FeatureVector) -> f64 {
        let dot: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
        dot.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn antipodal_pair_for_pi_separation() {
        let centers = embedding_centers(2, 8, std::f64::consts::PI, 1).unwrap();
        for (a, b) in centers[0].values().iter().zip(centers[1].values()) {
            assert_eq!(*a, -b);
        }
        assert!(embedding_centers(3, 8, std::f64::consts::PI, 1).is_err());
    }

    #[test]
    fn zero_angle_accepts_anything() {
        let centers = embedding_centers(20, 4, 0.0, 5).unwrap();
        assert_eq!(centers.len(), 20);
    }

    #[test]
    fn fifty_eight_ids_keep_quarter_pi_separation() {
        // Same population size as the labeled training ids the embedding
        // model stands in for.
        let centers = embedding_centers(58, 64, std::f64::consts::FRAC_PI_4, 7).unwrap();
        assert_eq!(centers.len(), 58);
        for i in 0..centers.len() {
            for j in 0..i {
                assert!(
                    angle(&centers[i], &centers[j]) >= std::f64::consts::FRAC_PI_4 - 1e-9,
                    "centers {i} and {j} are too close"
                );
            }
        }
    }

    #[test]
    fn overpacked_sphere_exhausts_the_retry_budget() {
        // A circle holds at most six unit vectors a radian apart.
        let err = embedding_centers(50, 2, 1.0, 3).unwrap_err();
        assert!(matches!(err, crate::Error::EmbeddingInfeasible { .. }));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = embedding_centers(10, 16, 0.5, 99).unwrap();
        let b = embedding_centers(10, 16, 0.5, 99).unwrap();
        assert_eq!(a, b);
        let c = embedding_centers(10, 16, 0.5, 100).unwrap();
        assert_ne!(a, c);
    }
}
