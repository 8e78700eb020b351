use rayon::prelude::*;

use super::WeightedCloud;
use crate::hydro::Vec3;

pub const SLICE_DIRECTIONS: usize = 64;

/// Spherical Fibonacci points: evenly spaced heights, golden-angle azimuths.
pub fn slice_directions() -> Vec<Vec3> {
    let n = SLICE_DIRECTIONS as f64;
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..SLICE_DIRECTIONS)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n;
            let r = (1.0 - z * z).sqrt();
            let phi = k as f64 * golden;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// `∫ |F_a − F_b|` for two weighted samples on the line. Total weights must
/// match.
pub fn wasserstein1_1d(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let mut events: Vec<(f64, f64)> = Vec::with_capacity(a.len() + b.len());
    events.extend(a.iter().copied());
    events.extend(b.iter().map(|&(x, w)| (x, -w)));
    events.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut cdf_diff = 0.0;
    let mut total = 0.0;
    for win in events.windows(2) {
        cdf_diff += win[0].1;
        total += cdf_diff.abs() * (win[1].0 - win[0].0);
    }
    total
}

/// Sliced 1-Wasserstein distance over [`slice_directions`].
pub fn empirical_distance(a: &WeightedCloud, b: &WeightedCloud) -> f64 {
    let dirs = slice_directions();
    let project = |c: &WeightedCloud, e: &Vec3| -> Vec<(f64, f64)> {
        c.points().iter().zip(c.weights()).map(|(x, &w)| (x.dot(e), w)).collect()
    };
    let per_dir: Vec<f64> = dirs
        .par_iter()
        .map(|e| wasserstein1_1d(&project(a, e), &project(b, e)))
        .collect();
    per_dir.iter().sum::<f64>() / dirs.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::gaussian_cloud;
    use proptest::prelude::*;

    fn point(x: Vec3) -> WeightedCloud {
        WeightedCloud::uniform(vec![x])
    }

    #[test]
    fn directions_are_unit() {
        let d = slice_directions();
        assert_eq!(d.len(), 64);
        assert!(d.iter().all(|e| (e.norm() - 1.0).abs() < 1e-15));
    }

    #[test]
    fn one_dimensional_cases() {
        assert_eq!(wasserstein1_1d(&[(0.0, 1.0)], &[(2.5, 1.0)]), 2.5);
        // Quantile coupling: {0,1} vs {0.5,3} moves 0.5 and 2, halved.
        let w = wasserstein1_1d(&[(0.0, 0.5), (1.0, 0.5)], &[(3.0, 0.5), (0.5, 0.5)]);
        assert!((w - 1.25).abs() < 1e-15);
    }

    #[test]
    fn point_masses() {
        let o = point(Vec3::zeros());
        assert_eq!(empirical_distance(&o, &o), 0.0);
        // Heights are a midpoint rule for E|z| = 1/2, exact up to rounding.
        assert!((empirical_distance(&o, &point(Vec3::z())) - 0.5).abs() < 1e-12);
        let dx = empirical_distance(&o, &point(Vec3::x()));
        assert!((dx - 0.5).abs() < 0.02, "{dx}");
    }

    #[test]
    fn identical_clouds() {
        let c = WeightedCloud::uniform(gaussian_cloud(300, Vec3::zeros(), 1.0, 1));
        assert_eq!(empirical_distance(&c, &c), 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn translation_bound(tx in -2.0..2.0f64, ty in -2.0..2.0f64, tz in -2.0..2.0f64, seed in 0u64..1000) {
            let t = Vec3::new(tx, ty, tz);
            let pts = gaussian_cloud(50, Vec3::zeros(), 1.0, seed);
            let a = WeightedCloud::uniform(pts.clone());
            let b = WeightedCloud::uniform(pts.iter().map(|x| x + t).collect());
            let d = empirical_distance(&a, &b);
            prop_assert!(d <= t.norm() * (1.0 + 1e-12) + 1e-12);
        }
    }
}
