//! Static-model Kalman filter over 3D position beliefs.
//!
//! The state is the Cartesian position of an object that is assumed not to
//! move: the transition is the identity, so prediction only inflates the
//! covariance by the process noise, and the observation model is the
//! identity on (x, y, z).

use nalgebra::{Cholesky, Matrix3};

use crate::error::{Error, Result};
use crate::types::{Gaussian3, SYMMETRY_TOL};

/// Condition number above which an innovation covariance is treated as
/// numerically singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Projects a belief one step forward under the static model: the mean is
/// unchanged and the covariance grows by the process noise.
pub fn predict(state: &Gaussian3, process_noise: &Matrix3<f64>) -> Result<Gaussian3> {
    let max_asymmetry = (process_noise - process_noise.transpose()).abs().max();
    if !process_noise.iter().all(|v| v.is_finite()) || max_asymmetry > SYMMETRY_TOL {
        return Err(Error::InvalidProcessNoise {
            min_eigenvalue: f64::NAN,
        });
    }
    let sym = (process_noise + process_noise.transpose()) * 0.5;
    let min_eigenvalue = sym.symmetric_eigenvalues().min();
    // PSD with a little slack for eigenvalue round-off; Q = 0 is allowed.
    if min_eigenvalue < -1e-12 {
        return Err(Error::InvalidProcessNoise { min_eigenvalue });
    }
    Gaussian3::new(*state.mean(), state.cov() + sym)
}

/// Fuses a measurement into a prior with the standard update step.
///
/// `K = P (P + R)^-1`, `mean' = mean + K (z - mean)`,
/// `cov' = (I - K) P` symmetrized afterwards to suppress float asymmetry.
pub fn update(prior: &Gaussian3, measurement: &Gaussian3) -> Result<Gaussian3> {
    let innovation_cov = prior.cov() + measurement.cov();
    let eig = innovation_cov.symmetric_eigenvalues();
    let cond = if eig.min() <= 0.0 {
        f64::INFINITY
    } else {
        eig.max() / eig.min()
    };
    if !cond.is_finite() || cond > CONDITION_LIMIT {
        return Err(Error::SingularInnovation { cond });
    }
    let chol =
        Cholesky::new(innovation_cov).ok_or(Error::SingularInnovation { cond })?;
    // K = P S^-1; with P and S symmetric this equals (S^-1 P)^T.
    let gain = chol.solve(prior.cov()).transpose();
    let mean = prior.mean() + gain * (measurement.mean() - prior.mean());
    let cov = (Matrix3::identity() - gain) * prior.cov();
    let cov = (cov + cov.transpose()) * 0.5;
    Gaussian3::new(mean, cov)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pd(rng: &mut ChaCha8Rng, floor: f64) -> Matrix3<f64> {
        let a = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        a * a.transpose() + Matrix3::identity() * floor
    }

    fn random_psd(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let a = Matrix3::from_fn(|_, _| rng.random_range(-0.3..0.3));
        a * a.transpose()
    }

    /// Information-form fusion: combines precisions instead of gains.
    /// Independent of the gain-form path used by `update`.
    fn information_oracle(prior: &Gaussian3, meas: &Gaussian3) -> (Vector3<f64>, Matrix3<f64>) {
        let prior_info = prior.cov().try_inverse().unwrap();
        let meas_info = meas.cov().try_inverse().unwrap();
        let post_cov = (prior_info + meas_info).try_inverse().unwrap();
        let post_mean = post_cov * (prior_info * prior.mean() + meas_info * meas.mean());
        (post_mean, post_cov)
    }

    #[test]
    fn predict_with_zero_noise_is_identity() {
        let state = Gaussian3::isotropic(Vector3::zeros(), 1.0).unwrap();
        let out = predict(&state, &Matrix3::zeros()).unwrap();
        assert_eq!(out.mean(), state.mean());
        assert_eq!(out.cov(), state.cov());
    }

    #[test]
    fn predict_adds_diagonal_noise() {
        let state = Gaussian3::isotropic(Vector3::new(1.0, 2.0, 3.0), 1.0).unwrap();
        let out = predict(&state, &(Matrix3::identity() * 0.01)).unwrap();
        assert_eq!(out.mean(), &Vector3::new(1.0, 2.0, 3.0));
        assert_relative_eq!(out.cov()[(0, 0)], 1.01, max_relative = 1e-15);
        assert_relative_eq!(out.cov()[(1, 1)], 1.01, max_relative = 1e-15);
        assert_relative_eq!(out.cov()[(2, 2)], 1.01, max_relative = 1e-15);
    }

    #[test]
    fn predict_grows_covariance_by_exactly_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let state = Gaussian3::new(
                Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
                random_pd(&mut rng, 0.05),
            )
            .unwrap();
            let q = random_psd(&mut rng);
            let out = predict(&state, &q).unwrap();
            let delta = out.cov() - state.cov();
            assert!((delta - q).abs().max() < 1e-12);
        }
    }

    #[test]
    fn predict_rejects_non_psd_noise() {
        let state = Gaussian3::isotropic(Vector3::zeros(), 1.0).unwrap();
        let q = Matrix3::from_diagonal(&Vector3::new(0.1, -0.01, 0.1));
        assert!(matches!(
            predict(&state, &q),
            Err(crate::Error::InvalidProcessNoise { .. })
        ));
    }

    #[test]
    fn update_symmetric_fusion_halves_covariance() {
        let prior = Gaussian3::isotropic(Vector3::new(1.0, 1.0, 1.0), 1.0).unwrap();
        let meas = prior.clone();
        let post = update(&prior, &meas).unwrap();
        assert_relative_eq!(post.mean().x, 1.0, max_relative = 1e-12);
        assert_relative_eq!(post.cov()[(0, 0)], 0.5, max_relative = 1e-12);
        assert_relative_eq!(post.cov()[(1, 1)], 0.5, max_relative = 1e-12);
        assert!(post.cov()[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn update_ignores_uninformative_measurement() {
        let prior = Gaussian3::new(
            Vector3::new(0.5, -0.25, 2.0),
            Matrix3::from_diagonal(&Vector3::new(0.1, 0.2, 0.3)),
        )
        .unwrap();
        let meas = Gaussian3::isotropic(Vector3::new(100.0, -50.0, 7.0), 1e9).unwrap();
        let post = update(&prior, &meas).unwrap();
        for i in 0..3 {
            assert_relative_eq!(post.mean()[i], prior.mean()[i], max_relative = 1e-6);
            assert_relative_eq!(post.cov()[(i, i)], prior.cov()[(i, i)], max_relative = 1e-6);
        }
    }

    #[test]
    fn update_matches_information_form_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let prior = Gaussian3::new(
                Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
                random_pd(&mut rng, 0.05),
            )
            .unwrap();
            let meas = Gaussian3::new(
                Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0)),
                random_pd(&mut rng, 0.05),
            )
            .unwrap();
            let post = update(&prior, &meas).unwrap();
            let (oracle_mean, oracle_cov) = information_oracle(&prior, &meas);
            assert!((post.mean() - oracle_mean).abs().max() < 1e-9);
            assert!((post.cov() - oracle_cov).abs().max() < 1e-9);
        }
    }

    #[test]
    fn update_shrinks_covariance_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let prior = Gaussian3::new(Vector3::zeros(), random_pd(&mut rng, 0.05)).unwrap();
            let meas = Gaussian3::new(
                Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                random_pd(&mut rng, 0.05),
            )
            .unwrap();
            let post = update(&prior, &meas).unwrap();
            assert!(post.cov().trace() < prior.cov().trace());
        }
    }

    #[test]
    fn update_rejects_singular_innovation() {
        let tiny = Gaussian3::isotropic(Vector3::zeros(), 1e-15).unwrap();
        let skewed = Gaussian3::new(
            Vector3::zeros(),
            Matrix3::from_diagonal(&Vector3::new(1e-15, 1e-15, 10.0)),
        )
        .unwrap();
        let err = update(&skewed, &tiny).unwrap_err();
        assert!(matches!(err, crate::Error::SingularInnovation { cond } if cond > 1e12));
    }

    #[test]
    fn predict_update_cycle_keeps_mean_and_shrinks_eigenvalues() {
        // Q = 0 and a measurement at the prior mean: the mean must stay
        // fixed while every covariance eigenvalue strictly shrinks.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let prior = Gaussian3::new(
                Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)),
                random_pd(&mut rng, 0.05),
            )
            .unwrap();
            let meas = Gaussian3::new(*prior.mean(), random_pd(&mut rng, 0.05)).unwrap();
            let predicted = predict(&prior, &Matrix3::zeros()).unwrap();
            let post = update(&predicted, &meas).unwrap();
            assert!((post.mean() - prior.mean()).abs().max() < 1e-12);
            let before = prior.cov().symmetric_eigenvalues();
            let after = post.cov().symmetric_eigenvalues();
            let mut before: Vec<f64> = before.iter().copied().collect();
            let mut after: Vec<f64> = after.iter().copied().collect();
            before.sort_by(|a, b| a.partial_cmp(b).unwrap());
            after.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (b, a) in before.iter().zip(&after) {
                assert!(a < b);
            }
        }
    }

    #[test]
    fn covariance_stays_symmetric_pd_over_long_cycles() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut belief = Gaussian3::isotropic(Vector3::zeros(), 1.0).unwrap();
        for _ in 0..10_000 {
            let q = random_psd(&mut rng) * 0.01;
            belief = predict(&belief, &q).unwrap();
            let meas = Gaussian3::new(
                Vector3::from_fn(|_, _| rng.random_range(-0.1..0.1)),
                random_pd(&mut rng, 0.05),
            )
            .unwrap();
            belief = update(&belief, &meas).unwrap();
            // Constructors re-validate on every step; spot-check anyway.
            let asym = (belief.cov() - belief.cov().transpose()).abs().max();
            assert!(asym <= 1e-9);
            assert!(belief.cov().symmetric_eigenvalues().min() > 0.0);
        }
    }
}
