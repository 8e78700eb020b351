use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{particle_rng, WeightedCloud, INIT_STREAM};
use crate::dynamics::fmt_f64;
use crate::error::{invalid, Result};
use crate::hydro::Vec3;

/// A labeled particle cloud. `labels[k]` is true when particle `k` is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    positions: Vec<Vec3>,
    labels: Vec<bool>,
    p: f64,
    radius: f64,
    sep_radius: f64,
}

impl Ensemble {
    pub fn new(positions: Vec<Vec3>, labels: Vec<bool>, p: f64, radius: f64, sep_radius: f64) -> Result<Self> {
        if positions.len() < 2 {
            return Err(crate::Error::TooFewParticles(positions.len()));
        }
        if labels.len() != positions.len() {
            return Err(invalid(format!(
                "{} labels for {} positions",
                labels.len(),
                positions.len()
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("p = {p} outside [0, 1]")));
        }
        if !(radius > 0.0 && radius.is_finite()) || !(sep_radius > 0.0 && sep_radius.is_finite()) {
            return Err(invalid("radius and separation radius must be positive"));
        }
        if positions.iter().any(|x| !x.iter().all(|c| c.is_finite())) {
            return Err(crate::Error::NonFinite("ensemble positions"));
        }
        Ok(Self {
            positions,
            labels,
            p,
            radius,
            sep_radius,
        })
    }

    /// Labels drawn i.i.d. Bernoulli(p); the active count is binomial.
    pub fn with_random_labels(positions: Vec<Vec3>, p: f64, radius: f64, sep_radius: f64, seed: u64) -> Result<Self> {
        let labels = (0..positions.len())
            .into_par_iter()
            .map(|k| particle_rng(seed, INIT_STREAM, k).random::<f64>() < p)
            .collect();
        Self::new(positions, labels, p, radius, sep_radius)
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn sep_radius(&self) -> f64 {
        self.sep_radius
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn n_active(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }

    pub(crate) fn with_positions(&self, positions: Vec<Vec3>) -> Self {
        debug_assert_eq!(positions.len(), self.positions.len());
        Self {
            positions,
            ..self.clone()
        }
    }

    /// Equal-weight empirical measure of the positions.
    pub fn cloud(&self) -> WeightedCloud {
        WeightedCloud::uniform(self.positions.clone())
    }

    /// Columns `x,y,z,active`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,active\n");
        for (x, &l) in self.positions.iter().zip(&self.labels) {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(x.x),
                fmt_f64(x.y),
                fmt_f64(x.z),
                u8::from(l)
            ));
        }
        out
    }
}

/// `n` points from an isotropic normal with the given center and standard
/// deviation.
pub fn gaussian_cloud(n: usize, center: Vec3, std: f64, seed: u64) -> Vec<Vec3> {
    (0..n)
        .into_par_iter()
        .map(|k| {
            // Separate stream from the label draws of the same seed.
            let mut rng = particle_rng(seed, INIT_STREAM - 1, k);
            let z: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            center + Vec3::from(z) * std
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let pts = vec![Vec3::zeros(), Vec3::x()];
        assert!(Ensemble::new(pts[..1].to_vec(), vec![true], 0.5, 1.0, 2.0).is_err());
        assert!(Ensemble::new(pts.clone(), vec![true], 0.5, 1.0, 2.0).is_err());
        assert!(Ensemble::new(pts.clone(), vec![true, false], 1.5, 1.0, 2.0).is_err());
        assert!(Ensemble::new(pts.clone(), vec![true, false], 0.5, 0.0, 2.0).is_err());
        let e = Ensemble::new(pts, vec![true, false], 0.5, 1.0, 2.0).unwrap();
        assert_eq!(e.n_active(), 1);
    }

    #[test]
    fn label_fraction_within_four_sigma() {
        let n = 100_000;
        let p = 0.3;
        let pts = vec![Vec3::zeros(); n];
        let e = Ensemble::with_random_labels(pts, p, 1.0, 2.0, 17).unwrap();
        let frac = e.n_active() as f64 / n as f64;
        assert!((frac - p).abs() < 4.0 * (p * (1.0 - p) / n as f64).sqrt(), "{frac}");
    }

    #[test]
    fn gaussian_cloud_moments() {
        let n = 50_000;
        let c = Vec3::new(1.0, -2.0, 0.5);
        let pts = gaussian_cloud(n, c, 0.5, 3);
        let mean = pts.iter().sum::<Vec3>() / n as f64;
        let var = pts.iter().map(|x| (x - mean).norm_squared()).sum::<f64>() / (3 * n) as f64;
        assert!((mean - c).norm() < 0.02);
        assert!((var.sqrt() - 0.5).abs() < 0.01);
        assert_eq!(pts, gaussian_cloud(n, c, 0.5, 3));
    }

    #[test]
    fn csv_header_and_rows() {
        let e = Ensemble::new(vec![Vec3::zeros(), Vec3::x()], vec![false, true], 0.5, 1.0, 2.0).unwrap();
        let csv = e.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "x,y,z,active");
        assert!(lines[2].ends_with(",1"));
        assert_eq!(lines.len(), 3);
    }
}
