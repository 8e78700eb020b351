use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::control_at;
use crate::dynamics::ControlSignal;
use crate::error::{invalid, Result};
use crate::hydro::{stokeslet, Vec3};

/// A discrete probability measure on R³.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCloud {
    points: Vec<Vec3>,
    weights: Vec<f64>,
}

impl WeightedCloud {
    pub fn new(points: Vec<Vec3>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(invalid("cloud needs one weight per point and at least one point"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<Vec3>) -> Self {
        let w = 1.0 / points.len() as f64;
        let weights = vec![w; points.len()];
        Self { points, weights }
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean(&self) -> Vec3 {
        self.points.iter().zip(&self.weights).map(|(x, w)| x * *w).sum()
    }
}

/// `K(X, Y, u) = p(1−p) G(Y−X) u + p u`.
pub fn meanfield_kernel(x: &Vec3, y: &Vec3, u: &Vec3, p: f64, a: f64) -> Result<Vec3> {
    let g = stokeslet(&(y - x), a)?;
    Ok(g.matrix() * u * (p * (1.0 - p)) + u * p)
}

/// Transport velocity `V(X_k) = Σ_j w_j K(X_k, X_j, u)` over `|X_j − X_k| > R`.
///
/// The sum for each point runs over `j` in index order, so the result does
/// not depend on the thread count.
pub fn meanfield_velocity(cloud: &WeightedCloud, u: &Vec3, p: f64, a: f64, sep_radius: f64) -> Vec<Vec3> {
    let r2_min = sep_radius * sep_radius;
    let c = 0.75 * a * p * (1.0 - p);
    let pts = &cloud.points;
    let ws = &cloud.weights;
    pts.par_iter()
        .map(|x| {
            let mut mass = 0.0;
            // Σ w (u/r + d (d·u)/r³), the Stokeslet without its prefactor.
            let mut acc = Vec3::zeros();
            for (y, &w) in pts.iter().zip(ws) {
                let d = y - x;
                let r2 = d.norm_squared();
                if r2 <= r2_min {
                    continue;
                }
                let inv_r = 1.0 / r2.sqrt();
                let du = d.dot(u);
                mass += w;
                acc += u * (w * inv_r) + d * (w * du * inv_r * inv_r * inv_r);
            }
            acc * c + u * (p * mass)
        })
        .collect()
}

/// Explicit Euler step of the continuity equation in particle form. Weights
/// are carried unchanged.
pub fn meanfield_step(cloud: &WeightedCloud, u: &Vec3, p: f64, a: f64, sep_radius: f64, dt: f64) -> Result<WeightedCloud> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid(format!("dt = {dt} must be positive")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("p = {p} outside [0, 1]")));
    }
    let v = meanfield_velocity(cloud, u, p, a, sep_radius);
    let points = cloud.points.iter().zip(&v).map(|(x, v)| x + v * dt).collect();
    Ok(WeightedCloud {
        points,
        weights: cloud.weights.clone(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeanFieldRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<WeightedCloud>,
}

impl MeanFieldRun {
    pub fn last(&self) -> &WeightedCloud {
        self.snapshots.last().expect("a run keeps its initial snapshot")
    }
}

#[allow(clippy::too_many_arguments)]
pub fn meanfield_run(
    initial: &WeightedCloud,
    signal: &ControlSignal,
    p: f64,
    a: f64,
    sep_radius: f64,
    dt: f64,
    horizon: f64,
    snapshot_every: usize,
) -> Result<MeanFieldRun> {
    let n = super::step_count(horizon, dt)?;
    let every = snapshot_every.max(1);
    let mut run = MeanFieldRun {
        times: vec![0.0],
        snapshots: vec![initial.clone()],
    };
    let mut cur = initial.clone();
    for s in 0..n {
        let u = control_at(signal, s as f64 * dt, dt)?;
        cur = meanfield_step(&cur, &u, p, a, sep_radius, dt)?;
        if (s + 1) % every == 0 || s + 1 == n {
            run.times.push((s + 1) as f64 * dt);
            run.snapshots.push(cur.clone());
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::gaussian_cloud;

    #[test]
    fn kernel_examples() {
        let (x, y, u) = (Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0), Vec3::x());
        assert_eq!(meanfield_kernel(&x, &y, &u, 0.0, 1.0).unwrap(), Vec3::zeros());
        assert_eq!(meanfield_kernel(&x, &y, &u, 1.0, 1.0).unwrap(), u);
        let k = meanfield_kernel(&x, &y, &u, 0.5, 1.0).unwrap();
        assert!((k - Vec3::new(0.6875, 0.0, 0.0)).norm() < 1e-15);
        assert!(meanfield_kernel(&x, &x, &u, 0.5, 1.0).is_err());
    }

    #[test]
    fn cloud_validation() {
        assert!(WeightedCloud::new(vec![Vec3::zeros()], vec![0.9]).is_err());
        assert!(WeightedCloud::new(vec![Vec3::zeros(); 2], vec![1.5, -0.5]).is_err());
        assert!(WeightedCloud::new(vec![], vec![]).is_err());
        assert!(WeightedCloud::new(vec![Vec3::zeros(); 2], vec![0.25, 0.75]).is_ok());
    }

    #[test]
    fn single_point_is_static() {
        let c = WeightedCloud::uniform(vec![Vec3::new(1.0, 2.0, 3.0)]);
        let next = meanfield_step(&c, &Vec3::x(), 0.5, 1.0, 0.1, 0.3).unwrap();
        assert_eq!(next, c);
    }

    #[test]
    fn all_active_moves_with_admissible_weight() {
        let pts: Vec<Vec3> = (0..5).map(|k| Vec3::new(k as f64 * 3.0, 0.0, 0.0)).collect();
        let w = vec![0.1, 0.2, 0.3, 0.25, 0.15];
        let c = WeightedCloud::new(pts, w.clone()).unwrap();
        let u = Vec3::new(0.2, -1.0, 0.4);
        let v = meanfield_velocity(&c, &u, 1.0, 1.0, 1.0);
        for (vk, wk) in v.iter().zip(&w) {
            assert!((vk - u * (1.0 - wk)).norm() < 1e-15);
        }
    }

    #[test]
    fn velocity_matches_kernel_sum() {
        let pts = gaussian_cloud(40, Vec3::zeros(), 1.0, 2);
        let c = WeightedCloud::uniform(pts.clone());
        let (u, p, a, r) = (Vec3::new(0.3, 0.1, -0.7), 0.3, 0.05, 0.4);
        let v = meanfield_velocity(&c, &u, p, a, r);
        for (k, x) in pts.iter().enumerate() {
            let mut expect = Vec3::zeros();
            for y in &pts {
                if (y - x).norm() > r {
                    expect += meanfield_kernel(x, y, &u, p, a).unwrap() / 40.0;
                }
            }
            assert!((v[k] - expect).norm() <= 1e-13 * expect.norm().max(1e-3));
        }
    }

    #[test]
    fn weights_preserved_and_thread_independent() {
        let pts = gaussian_cloud(500, Vec3::zeros(), 1.0, 2);
        let c = WeightedCloud::uniform(pts);
        let sig = ControlSignal::single(vec![0.0, 0.5, 1.0], vec![Vec3::x(), Vec3::y()]).unwrap();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| meanfield_run(&c, &sig, 0.3, 0.02, 0.2, 0.1, 1.0, 5).unwrap())
        };
        let (r1, r2) = (run(1), run(2));
        assert_eq!(r1.snapshots, r2.snapshots);
        assert_eq!(r1.last().weights(), c.weights());
        assert_eq!(r1.times, vec![0.0, 0.5, 1.0]);
    }
}
