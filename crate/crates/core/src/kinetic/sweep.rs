use serde::{Deserialize, Serialize};

use super::{empirical_distance, meanfield_run, run_nanbu, Ensemble, KineticParams, LabelMode, WeightedCloud};
use crate::dynamics::ControlSignal;
use crate::error::{invalid, Result};
use crate::hydro::Vec3;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub p: f64,
    pub radius: f64,
    pub sep_radius: f64,
    pub labels: LabelMode,
    /// Euler step of the mean-field reference.
    pub meanfield_dt: f64,
    /// One Monte Carlo run per seed and per tau.
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub tau: f64,
    pub distances: Vec<f64>,
    pub mean: f64,
    /// Standard error of `mean` across seeds; zero with a single seed.
    pub std_err: f64,
    pub skipped_pairs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub horizon: f64,
    pub n_particles: usize,
    pub meanfield_dt: f64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// Each mean distance is below the previous one by more than `k` combined
    /// standard errors.
    pub fn decreasing_beyond_noise(&self, k: f64) -> bool {
        self.rows.windows(2).all(|w| {
            let gap = w[0].mean - w[1].mean;
            gap > k * (w[0].std_err.powi(2) + w[1].std_err.powi(2)).sqrt()
        })
    }

    /// Mean distance at the smallest tau over the mean at the largest.
    pub fn ratio_last_to_first(&self) -> f64 {
        match (self.rows.first(), self.rows.last()) {
            (Some(f), Some(l)) => l.mean / f.mean,
            _ => f64::NAN,
        }
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// For each tau, run the Monte Carlo with `sigma = 1/tau`, `dt = tau` from the
/// given points and compare its final empirical measure with the mean-field
/// particle solution started from the same points.
pub fn quasi_invariant_sweep(
    initial: &[Vec3],
    signal: &ControlSignal,
    taus: &[f64],
    horizon: f64,
    cfg: &SweepConfig,
) -> Result<SweepReport> {
    if taus.is_empty() || taus.windows(2).any(|w| w[1] >= w[0]) {
        return Err(invalid("taus must be nonempty and strictly decreasing"));
    }
    if cfg.seeds.is_empty() {
        return Err(invalid("need at least one seed"));
    }
    let cloud = WeightedCloud::uniform(initial.to_vec());
    let reference = meanfield_run(
        &cloud,
        signal,
        cfg.p,
        cfg.radius,
        cfg.sep_radius,
        cfg.meanfield_dt,
        horizon,
        usize::MAX,
    )?;
    let target = reference.last();

    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let mut distances = Vec::with_capacity(cfg.seeds.len());
        let mut skipped_pairs = 0;
        for &seed in &cfg.seeds {
            let ens = Ensemble::with_random_labels(initial.to_vec(), cfg.p, cfg.radius, cfg.sep_radius, seed)?;
            let params = KineticParams::quasi_invariant(tau, seed).with_labels(cfg.labels);
            let run = run_nanbu(&ens, &params, signal, horizon, usize::MAX)?;
            skipped_pairs += run.total_skipped();
            distances.push(empirical_distance(&run.last().cloud(), target));
        }
        let (mean, std_err) = mean_and_stderr(&distances);
        rows.push(SweepRow {
            tau,
            distances,
            mean,
            std_err,
            skipped_pairs,
        });
    }
    Ok(SweepReport {
        horizon,
        n_particles: initial.len(),
        meanfield_dt: cfg.meanfield_dt,
        rows,
    })
}
