//! The semi-cylindrical camera path.

use nalgebra::Vector3;

use crate::simgen::PathSpec;

/// One camera pose: position plus the stem-axis point it looks at.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Viewpoint {
    pub position: Vector3<f64>,
    pub look_at: Vector3<f64>,
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

/// Viewpoints ordered height level by height level, sweeping the azimuths
/// boustrophedon (every other level in reverse) the way a sweeping arm
/// records them, so consecutive poses are always adjacent. Both grids
/// include their endpoints, so ten azimuths over a half circle sit pi/9
/// apart. Every pose aims at the stem axis at its own height.
pub fn camera_path(path: &PathSpec) -> Vec<Viewpoint> {
    let heights = linspace(path.height_range[0], path.height_range[1], path.n_heights);
    let azimuths = linspace(0.0, path.azimuth_span, path.n_azimuths);
    let mut out = Vec::with_capacity(path.n_viewpoints());
    for (level, &h) in heights.iter().enumerate() {
        let sweep: Vec<f64> = if level % 2 == 0 {
            azimuths.clone()
        } else {
            azimuths.iter().rev().copied().collect()
        };
        for az in sweep {
            out.push(Viewpoint {
                position: Vector3::new(path.radius * az.cos(), path.radius * az.sin(), h),
                look_at: Vector3::new(0.0, 0.0, h),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_give_exactly_one_hundred_viewpoints() {
        let path = PathSpec::default();
        assert_eq!(camera_path(&path).len(), 100);
    }

    #[test]
    fn azimuths_are_equally_spaced_with_inclusive_endpoints() {
        let path = PathSpec::default();
        let vps = camera_path(&path);
        let step = std::f64::consts::PI / 9.0;
        // First height level: consecutive azimuths differ by pi/9.
        for j in 0..9 {
            let a0 = vps[j].position.y.atan2(vps[j].position.x);
            let a1 = vps[j + 1].position.y.atan2(vps[j + 1].position.x);
            assert!((a1 - a0 - step).abs() < 1e-12);
        }
        // Endpoints: azimuth 0 and pi.
        assert!((vps[0].position.y).abs() < 1e-12);
        assert!((vps[9].position.y).abs() < 1e-9);
        assert!(vps[9].position.x < 0.0);
    }

    #[test]
    fn path_is_boustrophedon_between_levels() {
        let path = PathSpec::default();
        let vps = camera_path(&path);
        // Level transitions keep the azimuth: pose 9 -> 10 and 19 -> 20
        // share x/y, only the height moves.
        for boundary in [9usize, 19, 29] {
            let a = &vps[boundary].position;
            let b = &vps[boundary + 1].position;
            assert!((a.x - b.x).abs() < 1e-12 && (a.y - b.y).abs() < 1e-12);
            assert!(b.z > a.z);
        }
    }

    #[test]
    fn look_at_sits_on_the_stem_axis_at_the_viewpoint_height() {
        for vp in camera_path(&PathSpec::default()) {
            assert_eq!(vp.look_at.x, 0.0);
            assert_eq!(vp.look_at.y, 0.0);
            assert_eq!(vp.look_at.z, vp.position.z);
        }
    }

    #[test]
    fn single_sample_grids_collapse_to_the_start() {
        let path = PathSpec {
            n_heights: 1,
            n_azimuths: 1,
            ..Default::default()
        };
        let vps = camera_path(&path);
        assert_eq!(vps.len(), 1);
        assert_eq!(vps[0].position.z, path.height_range[0]);
        assert!((vps[0].position.x - path.radius).abs() < 1e-12);
    }
}
