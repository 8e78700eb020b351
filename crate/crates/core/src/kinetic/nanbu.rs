use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{particle_rng, Ensemble};
use crate::dynamics::ControlSignal;
use crate::error::{contract, invalid, Result};
use crate::hydro::{stokeslet, Vec3};

/// How labels enter a binary interaction.
///
/// `Quenched` uses the ensemble's fixed labels. `Annealed` draws a fresh
/// Bernoulli(p) label for every particle at every step, which is the
/// independent average over Θ_X, Θ_Y that the kinetic limit assumes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelMode {
    #[default]
    Quenched,
    Annealed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticParams {
    pub tau: f64,
    pub sigma: f64,
    pub dt: f64,
    pub seed: u64,
    #[serde(default)]
    pub labels: LabelMode,
}

impl KineticParams {
    /// `sigma = 1/tau` and `dt = tau`, so every particle interacts once per
    /// step.
    pub fn quasi_invariant(tau: f64, seed: u64) -> Self {
        Self {
            tau,
            sigma: 1.0 / tau,
            dt: tau,
            seed,
            labels: LabelMode::Quenched,
        }
    }

    pub fn with_labels(mut self, labels: LabelMode) -> Self {
        self.labels = labels;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("tau", self.tau), ("sigma", self.sigma), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} = {v} must be positive")));
            }
        }
        // 1/tau * tau may round one ulp above 1.
        if self.sigma * self.dt > 1.0 + 1e-12 {
            return Err(invalid(format!("sigma*dt = {} exceeds 1", self.sigma * self.dt)));
        }
        Ok(())
    }

    pub(crate) fn flag_probability(&self) -> f64 {
        (self.sigma * self.dt).min(1.0)
    }
}

/// Bookkeeping for one Monte Carlo step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepStats {
    pub flagged: usize,
    pub pairs: usize,
    /// Pairs closer than R, left untouched.
    pub skipped: usize,
}

/// The random part of one step: which particles meet, and with which labels.
#[derive(Debug, Clone)]
pub struct PairDraw {
    pub pairs: Vec<(usize, usize)>,
    pub flagged: usize,
    /// Present in annealed mode only.
    pub fresh_labels: Option<Vec<bool>>,
}

impl PairDraw {
    pub fn label(&self, ensemble: &Ensemble, k: usize) -> bool {
        match &self.fresh_labels {
            Some(l) => l[k],
            None => ensemble.labels()[k],
        }
    }
}

/// Flag each particle with probability `sigma*dt`, then pair the flagged ones
/// uniformly at random by sorting on a random key. An odd one out is left
/// alone.
pub fn draw_pairs(ensemble: &Ensemble, params: &KineticParams, step: u64) -> PairDraw {
    let prob = params.flag_probability();
    let p = ensemble.p();
    let annealed = params.labels == LabelMode::Annealed;
    let draws: Vec<(bool, u64, bool)> = (0..ensemble.len())
        .into_par_iter()
        .map(|k| {
            let mut rng = particle_rng(params.seed, step, k);
            let flag = rng.random::<f64>() < prob;
            let key = rng.random::<u64>();
            let label = annealed && rng.random::<f64>() < p;
            (flag, key, label)
        })
        .collect();

    let mut flagged: Vec<(u64, usize)> = draws
        .iter()
        .enumerate()
        .filter(|(_, d)| d.0)
        .map(|(k, d)| (d.1, k))
        .collect();
    flagged.sort_unstable();
    let pairs = flagged.chunks_exact(2).map(|c| (c[0].1, c[1].1)).collect();
    PairDraw {
        pairs,
        flagged: flagged.len(),
        fresh_labels: annealed.then(|| draws.iter().map(|d| d.2).collect()),
    }
}

/// One binary encounter:
/// `X* = X + τΘ_X u + τ(1−Θ_X)Θ_Y G(X−Y)u`, and symmetrically for `Y`.
pub fn binary_interact(
    x: &Vec3,
    y: &Vec3,
    labels: (bool, bool),
    tau: f64,
    u: &Vec3,
    a: f64,
    sep_radius: f64,
) -> Result<(Vec3, Vec3)> {
    let d = x - y;
    let r = d.norm();
    if r <= sep_radius {
        return Err(contract(format!("pair at distance {r:e} inside R = {sep_radius:e}")));
    }
    let (tx, ty) = labels;
    let step = |own: bool, other: bool| -> Result<Vec3> {
        Ok(if own {
            u * tau
        } else if other {
            // G is even in d, so G(X−Y) = G(Y−X).
            stokeslet(&d, a)?.matrix() * u * tau
        } else {
            Vec3::zeros()
        })
    };
    Ok((x + step(tx, ty)?, y + step(ty, tx)?))
}

/// One Monte Carlo step of the Boltzmann dynamics with a uniform control.
///
/// `step` is the step counter used to key the random draws.
pub fn nanbu_step(ensemble: &Ensemble, params: &KineticParams, u: &Vec3, step: u64) -> Result<(Ensemble, StepStats)> {
    params.validate()?;
    let draw = draw_pairs(ensemble, params, step);
    let pos = ensemble.positions();
    let (a, r) = (ensemble.radius(), ensemble.sep_radius());
    let updates: Vec<Option<(Vec3, Vec3)>> = draw
        .pairs
        .par_iter()
        .map(|&(i, j)| {
            if (pos[i] - pos[j]).norm() <= r {
                return Ok(None);
            }
            let labels = (draw.label(ensemble, i), draw.label(ensemble, j));
            binary_interact(&pos[i], &pos[j], labels, params.tau, u, a, r).map(Some)
        })
        .collect::<Result<_>>()?;

    let mut next = pos.to_vec();
    let mut skipped = 0;
    for (&(i, j), up) in draw.pairs.iter().zip(updates) {
        match up {
            Some((xi, xj)) => {
                next[i] = xi;
                next[j] = xj;
            }
            None => skipped += 1,
        }
    }
    let stats = StepStats {
        flagged: draw.flagged,
        pairs: draw.pairs.len(),
        skipped,
    };
    Ok((ensemble.with_positions(next), stats))
}

/// Value of a width-one signal on the step `[t, t + dt]`, read at its midpoint
/// so breakpoints that coincide with step boundaries are unambiguous.
pub fn control_at(signal: &ControlSignal, t: f64, dt: f64) -> Result<Vec3> {
    if signal.width() != 1 {
        return Err(invalid(format!("kinetic control must have width 1, got {}", signal.width())));
    }
    signal
        .at(t + 0.5 * dt)
        .map(|c| c[0])
        .ok_or_else(|| invalid(format!("control signal ends at {} before t = {t}", signal.end_time())))
}

/// Number of steps of size `dt` that land on `horizon`.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon >= 0.0 && horizon.is_finite() && dt > 0.0) {
        return Err(invalid("horizon must be nonnegative and dt positive"));
    }
    let n = (horizon / dt).round();
    if (n * dt - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(invalid(format!("horizon {horizon} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KineticRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<Ensemble>,
    pub stats: Vec<StepStats>,
}

impl KineticRun {
    pub fn last(&self) -> &Ensemble {
        self.snapshots.last().expect("a run keeps its initial snapshot")
    }

    pub fn total_skipped(&self) -> usize {
        self.stats.iter().map(|s| s.skipped).sum()
    }
}

/// Run to `horizon`, keeping the initial state, every `snapshot_every`-th
/// step, and the final state.
pub fn run_nanbu(
    initial: &Ensemble,
    params: &KineticParams,
    signal: &ControlSignal,
    horizon: f64,
    snapshot_every: usize,
) -> Result<KineticRun> {
    params.validate()?;
    let n = step_count(horizon, params.dt)?;
    let every = snapshot_every.max(1);
    let mut run = KineticRun {
        times: vec![0.0],
        snapshots: vec![initial.clone()],
        stats: Vec::with_capacity(n),
    };
    let mut cur = initial.clone();
    for s in 0..n {
        let t = s as f64 * params.dt;
        let u = control_at(signal, t, params.dt)?;
        let (next, stats) = nanbu_step(&cur, params, &u, s as u64)?;
        cur = next;
        run.stats.push(stats);
        if (s + 1) % every == 0 || s + 1 == n {
            run.times.push((s + 1) as f64 * params.dt);
            run.snapshots.push(cur.clone());
        }
    }
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::gaussian_cloud;

    fn lattice(n: usize, spacing: f64) -> Vec<Vec3> {
        let side = (n as f64).cbrt().ceil() as usize;
        (0..n)
            .map(|k| Vec3::new((k % side) as f64, ((k / side) % side) as f64, (k / (side * side)) as f64) * spacing)
            .collect()
    }

    #[test]
    fn interaction_examples() {
        let u = Vec3::x();
        let (x, y) = (Vec3::zeros(), Vec3::new(2.0, 0.0, 0.0));
        let (xs, ys) = binary_interact(&x, &y, (true, false), 0.1, &u, 1.0, 1.0).unwrap();
        assert_eq!(xs, x + u * 0.1);
        // Y passive, X active: Y moves by τG(Y−X)u.
        assert!((ys - Vec3::new(2.075, 0.0, 0.0)).norm() < 1e-15);
        let (xs, ys) = binary_interact(&x, &y, (false, false), 0.1, &u, 1.0, 1.0).unwrap();
        assert_eq!((xs, ys), (x, y));
        let (xs, _) = binary_interact(&x, &y, (false, true), 0.1, &u, 1.0, 1.0).unwrap();
        assert!((xs - Vec3::new(0.075, 0.0, 0.0)).norm() < 1e-15);
        assert!(binary_interact(&x, &y, (true, true), 0.1, &u, 1.0, 2.0).is_err());
    }

    #[test]
    fn all_passive_or_no_flags_is_static() {
        let pts = gaussian_cloud(500, Vec3::zeros(), 3.0, 1);
        let u = Vec3::new(1.0, -2.0, 0.3);
        let e = Ensemble::with_random_labels(pts.clone(), 0.0, 0.01, 0.05, 2).unwrap();
        let (next, _) = nanbu_step(&e, &KineticParams::quasi_invariant(0.1, 3), &u, 0).unwrap();
        assert_eq!(next, e);

        let e = Ensemble::with_random_labels(pts, 0.5, 0.01, 0.05, 2).unwrap();
        let mut params = KineticParams::quasi_invariant(0.1, 3);
        params.sigma = 1e-300;
        let (next, stats) = nanbu_step(&e, &params, &u, 0).unwrap();
        assert_eq!(next, e);
        assert_eq!(stats.flagged, 0);
    }

    #[test]
    fn all_active_translates_exactly() {
        let pts = lattice(64, 3.0);
        let e = Ensemble::with_random_labels(pts.clone(), 1.0, 0.1, 1.0, 5).unwrap();
        let u = Vec3::new(0.3, -0.2, 1.0);
        let params = KineticParams::quasi_invariant(0.25, 9);
        let (next, stats) = nanbu_step(&e, &params, &u, 0).unwrap();
        assert_eq!(stats.pairs, 32);
        assert_eq!(stats.skipped, 0);
        for (a, b) in next.positions().iter().zip(&pts) {
            assert_eq!(*a, b + u * 0.25);
        }
    }

    #[test]
    fn pairing_is_a_matching_of_flagged_particles() {
        let pts = gaussian_cloud(1001, Vec3::zeros(), 1.0, 4);
        let e = Ensemble::with_random_labels(pts, 0.3, 0.01, 0.05, 1).unwrap();
        let mut params = KineticParams::quasi_invariant(0.1, 7);
        params.dt = 0.05;
        let d = draw_pairs(&e, &params, 3);
        assert_eq!(d.pairs.len(), d.flagged / 2);
        let mut seen = vec![false; e.len()];
        for &(i, j) in &d.pairs {
            assert!(i != j && !seen[i] && !seen[j]);
            seen[i] = true;
            seen[j] = true;
        }
        // Flag rate 0.5 on 1001 particles.
        assert!((d.flagged as f64 - 500.5).abs() < 5.0 * 15.8);
    }

    #[test]
    fn close_pairs_are_skipped() {
        let pts = vec![Vec3::zeros(), Vec3::new(0.5, 0.0, 0.0)];
        let e = Ensemble::new(pts.clone(), vec![true, false], 0.5, 0.1, 1.0).unwrap();
        let (next, stats) = nanbu_step(&e, &KineticParams::quasi_invariant(0.1, 0), &Vec3::x(), 0).unwrap();
        assert_eq!(stats.skipped, 1);
        assert_eq!(next.positions(), &pts[..]);
    }

    #[test]
    fn annealed_labels_are_fresh_each_step() {
        let pts = gaussian_cloud(2000, Vec3::zeros(), 5.0, 4);
        let e = Ensemble::with_random_labels(pts, 0.4, 0.01, 0.05, 1).unwrap();
        let params = KineticParams::quasi_invariant(0.1, 7).with_labels(LabelMode::Annealed);
        let l0 = draw_pairs(&e, &params, 0).fresh_labels.unwrap();
        let l1 = draw_pairs(&e, &params, 1).fresh_labels.unwrap();
        assert_ne!(l0, l1);
        let frac = l0.iter().filter(|&&l| l).count() as f64 / 2000.0;
        assert!((frac - 0.4).abs() < 4.0 * (0.24f64 / 2000.0).sqrt());
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let pts = gaussian_cloud(3000, Vec3::zeros(), 2.0, 8);
        let e = Ensemble::with_random_labels(pts, 0.3, 0.02, 0.1, 2).unwrap();
        let sig = ControlSignal::single(vec![0.0, 1.0], vec![Vec3::new(1.0, 0.5, 0.0)]).unwrap();
        let params = KineticParams::quasi_invariant(0.1, 11).with_labels(LabelMode::Annealed);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_nanbu(&e, &params, &sig, 1.0, 5).unwrap())
        };
        let (r1, r2) = (run(1), run(3));
        assert_eq!(r1.snapshots, r2.snapshots);
        assert_eq!(r1.times, vec![0.0, 0.5, 1.0]);
        assert_eq!(r1.snapshots[0].len(), r1.last().len());
    }

    #[test]
    fn step_count_checks_divisibility() {
        assert_eq!(step_count(1.0, 0.1).unwrap(), 10);
        assert_eq!(step_count(1.0, 0.025).unwrap(), 40);
        assert!(step_count(1.0, 0.3).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(KineticParams::quasi_invariant(0.1, 0).validate().is_ok());
        let mut p = KineticParams::quasi_invariant(0.1, 0);
        p.dt = 0.2;
        assert!(p.validate().is_err());
        p.tau = -1.0;
        assert!(p.validate().is_err());
    }
}
