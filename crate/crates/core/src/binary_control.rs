//! Instantaneous optimal control of a binary encounter and its use as a
//! feedback inside the kinetic Monte Carlo.
//!
//! The step is `h = T/K`. Minimizing `h·ℒ(z₁(u), u)` with `z₁ = z₀ + hAu`
//! gives `D u = C` with `D = h(A_x² + A_y²) + (γ/h)I` and
//! `C = A_x(x̄ − x₀) + A_y(ȳ − y₀)`; for `T = 1` this is the usual
//! `K⁻¹(A_x² + A_y²) + γK I`. The solution is clamped to the control box.

use nalgebra::Cholesky;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hydro::{stokeslet, Mat3, Vec3};
use crate::kinetic::{draw_pairs, step_count, Ensemble, KineticParams, StepStats, WeightedCloud};

/// `(x, y)`.
pub type PairState = [Vec3; 2];

/// Control weight in the running cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weight {
    Fixed(f64),
    /// `γ = γ̄/K`.
    Scaled(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub z_bar: PairState,
    pub weight: Weight,
    pub k: usize,
    pub u_box: f64,
    pub horizon: f64,
    /// Sphere radius entering the Stokeslet.
    pub radius: f64,
}

impl ControlProblem {
    pub fn new(z_bar: PairState, weight: Weight, k: usize, u_box: f64, radius: f64) -> Result<Self> {
        let p = Self {
            z_bar,
            weight,
            k,
            u_box,
            horizon: 1.0,
            radius,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let w = match self.weight {
            Weight::Fixed(g) | Weight::Scaled(g) => g,
        };
        if !(w > 0.0 && w.is_finite()) {
            return Err(invalid(format!("control weight {w} must be positive")));
        }
        if self.k == 0 {
            return Err(invalid("K must be at least 1"));
        }
        for (name, v) in [("u_box", self.u_box), ("horizon", self.horizon), ("radius", self.radius)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        match self.weight {
            Weight::Fixed(g) => g,
            Weight::Scaled(gb) => gb / self.k as f64,
        }
    }

    /// `γK`, exact in the scaled regime.
    fn gamma_k(&self) -> f64 {
        match self.weight {
            Weight::Fixed(g) => g * self.k as f64,
            Weight::Scaled(gb) => gb,
        }
    }

    /// `h = T/K`.
    pub fn step(&self) -> f64 {
        self.horizon / self.k as f64
    }

    pub fn with_k(&self, k: usize) -> Self {
        Self { k, ..self.clone() }
    }

    pub fn with_target(&self, z_bar: PairState) -> Self {
        Self { z_bar, ..self.clone() }
    }

    fn clamp(&self, u: &Vec3) -> Vec3 {
        u.map(|c| c.clamp(-self.u_box, self.u_box))
    }
}

/// `A_x = Θ_x I + (1−Θ_x)Θ_y G(x−y)` and its mirror image.
pub fn interaction_matrices(x: &Vec3, y: &Vec3, labels: (bool, bool), a: f64) -> Result<(Mat3, Mat3)> {
    // G is even, so one evaluation serves both sides; it also rejects x = y.
    let g = stokeslet(&(x - y), a)?.into_inner();
    let side = |own: bool, other: bool| {
        if own {
            Mat3::identity()
        } else if other {
            g
        } else {
            Mat3::zeros()
        }
    };
    Ok((side(labels.0, labels.1), side(labels.1, labels.0)))
}

/// `½|z̄ − z|² + (γ/2)|u|²`.
pub fn cost_l(z: &PairState, u: &Vec3, z_bar: &PairState, gamma: f64) -> f64 {
    0.5 * ((z_bar[0] - z[0]).norm_squared() + (z_bar[1] - z[1]).norm_squared()) + 0.5 * gamma * u.norm_squared()
}

/// State after one step of size `h` under `u`.
fn advance(z: &PairState, a: &(Mat3, Mat3), u: &Vec3, h: f64) -> PairState {
    [z[0] + a.0 * u * h, z[1] + a.1 * u * h]
}

/// `h·ℒ(z₁(u), u)`, the quantity the instantaneous control minimizes.
pub fn one_step_cost(z0: &PairState, u: &Vec3, problem: &ControlProblem, labels: (bool, bool)) -> Result<f64> {
    let a = interaction_matrices(&z0[0], &z0[1], labels, problem.radius)?;
    let h = problem.step();
    Ok(h * cost_l(&advance(z0, &a, u, h), u, &problem.z_bar, problem.gamma()))
}

/// Everything the control law computes, for checks and reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantaneousSolution {
    pub d: Mat3,
    pub c: Vec3,
    pub unprojected: Vec3,
    pub control: Vec3,
}

impl InstantaneousSolution {
    /// `‖D u − C‖ / max(‖C‖, ‖D‖‖u‖)`, zero when both sides vanish.
    pub fn stationarity_residual(&self) -> f64 {
        let r = (self.d * self.unprojected - self.c).norm();
        let scale = self.c.norm().max(self.d.norm() * self.unprojected.norm());
        if scale == 0.0 {
            0.0
        } else {
            r / scale
        }
    }

    /// Largest violation of the box KKT sign conditions on `∇ = Du − C`:
    /// zero on free coordinates, outward-pointing descent on active faces.
    pub fn kkt_violation(&self, u_box: f64) -> f64 {
        let grad = self.d * self.control - self.c;
        (0..3)
            .map(|i| {
                let (u, g) = (self.control[i], grad[i]);
                if u >= u_box {
                    g.max(0.0)
                } else if u <= -u_box {
                    (-g).max(0.0)
                } else {
                    g.abs()
                }
            })
            .fold(0.0, f64::max)
    }
}

pub fn instantaneous_solution(
    x0: &Vec3,
    y0: &Vec3,
    problem: &ControlProblem,
    labels: (bool, bool),
) -> Result<InstantaneousSolution> {
    let (ax, ay) = interaction_matrices(x0, y0, labels, problem.radius)?;
    let (t, k) = (problem.horizon, problem.k as f64);
    // Written as (T/K)·A² + (γK/T)·I so the T = 1 case is bit-identical to
    // K⁻¹(A_x² + A_y²) + γK·I.
    let d = (ax * ax + ay * ay) * (t / k) + Mat3::identity() * (problem.gamma_k() / t);
    let c = ax * (problem.z_bar[0] - x0) + ay * (problem.z_bar[1] - y0);
    let off_diagonal = (0..3).any(|i| (0..3).any(|j| i != j && d[(i, j)] != 0.0));
    let unprojected = if off_diagonal {
        Cholesky::new(d)
            .ok_or_else(|| Error::Singular("D is not positive definite".into()))?
            .solve(&c)
    } else {
        if (0..3).any(|i| d[(i, i)] <= 0.0) {
            return Err(Error::Singular("D has a zero diagonal entry".into()));
        }
        Vec3::new(c[0] / d[(0, 0)], c[1] / d[(1, 1)], c[2] / d[(2, 2)])
    };
    if !unprojected.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("instantaneous control"));
    }
    Ok(InstantaneousSolution {
        d,
        c,
        control: problem.clamp(&unprojected),
        unprojected,
    })
}

/// `Π_U[(D^K)⁻¹ C]` at the state `(x0, y0)`.
pub fn instantaneous_control(x0: &Vec3, y0: &Vec3, problem: &ControlProblem, labels: (bool, bool)) -> Result<Vec3> {
    instantaneous_solution(x0, y0, problem, labels).map(|s| s.control)
}

/// Brute-force minimizer of [`one_step_cost`] over the box: a 41³ grid,
/// then two rounds of 41³ grids on ±2 cells around the incumbent.
pub fn grid_search_control(z0: &PairState, problem: &ControlProblem, labels: (bool, bool)) -> Result<(Vec3, f64)> {
    const N: usize = 41;
    let a = interaction_matrices(&z0[0], &z0[1], labels, problem.radius)?;
    let (h, gamma, b) = (problem.step(), problem.gamma(), problem.u_box);
    let f = |u: &Vec3| h * cost_l(&advance(z0, &a, u, h), u, &problem.z_bar, gamma);

    let mut center = Vec3::zeros();
    let mut half = b;
    let mut best = (center, f(&center));
    for _ in 0..3 {
        let lo = center.map(|c| (c - half).max(-b));
        let hi = center.map(|c| (c + half).min(b));
        let axis = |i: usize, k: usize| lo[i] + (hi[i] - lo[i]) * k as f64 / (N - 1) as f64;
        let round = (0..N * N * N)
            .into_par_iter()
            .map(|idx| {
                let u = Vec3::new(axis(0, idx / (N * N)), axis(1, (idx / N) % N), axis(2, idx % N));
                (u, f(&u))
            })
            .reduce(|| (Vec3::zeros(), f64::INFINITY), |p, q| if q.1 < p.1 { q } else { p });
        if round.1 < best.1 {
            best = round;
        }
        let cell = (hi - lo).max() / (N - 1) as f64;
        center = best.0;
        half = 2.0 * cell;
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackPolicy {
    /// `ū_0 … ū_K`; the last one is computed at `z_K` and not applied.
    pub controls: Vec<Vec3>,
    /// `z_0 … z_K`.
    pub states: Vec<PairState>,
    pub labels: (bool, bool),
    /// `𝒥_K = h Σ_{k=1}^K ℒ(z_k, ū_{k−1})`.
    pub cost: f64,
}

/// Roll out the discrete dynamics with `u_k = law(k, z_k)`.
fn rollout_with(
    z0: &PairState,
    problem: &ControlProblem,
    labels: (bool, bool),
    mut law: impl FnMut(&PairState) -> Result<Vec3>,
) -> Result<FeedbackPolicy> {
    problem.validate()?;
    let h = problem.step();
    let gamma = problem.gamma();
    let mut states = vec![*z0];
    let mut controls = Vec::with_capacity(problem.k + 1);
    let mut running = 0.0;
    for k in 0..problem.k {
        let z = states[k];
        let a = interaction_matrices(&z[0], &z[1], labels, problem.radius).map_err(|e| match e {
            Error::CoincidentParticles => Error::Contract(format!("coincident pair at step {k}")),
            e => e,
        })?;
        let u = law(&z)?;
        let next = advance(&z, &a, &u, h);
        running += cost_l(&next, &u, &problem.z_bar, gamma);
        controls.push(u);
        states.push(next);
    }
    controls.push(law(&states[problem.k])?);
    Ok(FeedbackPolicy {
        controls,
        states,
        labels,
        cost: h * running,
    })
}

pub fn feedback_rollout(z0: &PairState, problem: &ControlProblem, labels: (bool, bool)) -> Result<FeedbackPolicy> {
    rollout_with(z0, problem, labels, |z| instantaneous_control(&z[0], &z[1], problem, labels))
}

/// The same rollout with `u ≡ 0`, the baseline for the feedback cost.
pub fn zero_control_rollout(z0: &PairState, problem: &ControlProblem, labels: (bool, bool)) -> Result<FeedbackPolicy> {
    rollout_with(z0, problem, labels, |_| Ok(Vec3::zeros()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaScalingRow {
    pub k: usize,
    /// `‖D^K − γ̄I‖₂` at `z_0` with `γ = γ̄/K`.
    pub d_deviation: f64,
    /// Largest `|z_k − z_{k−1}|` along the scaled-weight rollout.
    pub max_increment: f64,
    /// `|ū_0|` with the weight held at `γ̄` for every K.
    pub fixed_weight_control: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GammaScalingReport {
    pub gamma_bar: f64,
    pub rows: Vec<GammaScalingRow>,
    /// `max_K K·‖D^K − γ̄I‖`.
    pub c_fit: f64,
    pub increment_slope: f64,
    pub fixed_weight_control_slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Compare the `γ = γ̄/K` regime with a fixed weight across several K.
/// `problem.weight` supplies `γ̄`; its K and variant are overridden.
pub fn gamma_scaling_check(
    z0: &PairState,
    problem: &ControlProblem,
    labels: (bool, bool),
    ks: &[usize],
) -> Result<GammaScalingReport> {
    let gamma_bar = match problem.weight {
        Weight::Fixed(g) | Weight::Scaled(g) => g,
    };
    if ks.len() < 2 {
        return Err(invalid("need at least two values of K"));
    }
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let scaled = ControlProblem {
            weight: Weight::Scaled(gamma_bar),
            ..problem.with_k(k)
        };
        let sol = instantaneous_solution(&z0[0], &z0[1], &scaled, labels)?;
        let d_deviation = (sol.d - Mat3::identity() * gamma_bar).symmetric_eigenvalues().amax();
        let policy = feedback_rollout(z0, &scaled, labels)?;
        let max_increment = policy
            .states
            .windows(2)
            .map(|w| ((w[1][0] - w[0][0]).norm_squared() + (w[1][1] - w[0][1]).norm_squared()).sqrt())
            .fold(0.0, f64::max);
        let fixed = ControlProblem {
            weight: Weight::Fixed(gamma_bar),
            ..problem.with_k(k)
        };
        let fixed_weight_control = instantaneous_control(&z0[0], &z0[1], &fixed, labels)?.norm();
        rows.push(GammaScalingRow {
            k,
            d_deviation,
            max_increment,
            fixed_weight_control,
        });
    }
    let kf: Vec<f64> = rows.iter().map(|r| r.k as f64).collect();
    let inc: Vec<f64> = rows.iter().map(|r| r.max_increment).collect();
    let ctl: Vec<f64> = rows.iter().map(|r| r.fixed_weight_control).collect();
    Ok(GammaScalingReport {
        gamma_bar,
        c_fit: rows.iter().map(|r| r.k as f64 * r.d_deviation).fold(0.0, f64::max),
        increment_slope: loglog_slope(&kf, &inc),
        fixed_weight_control_slope: loglog_slope(&kf, &ctl),
        rows,
    })
}

/// Per-particle targets for the controlled kinetic step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Targets {
    Global(Vec3),
    PerParticle(Vec<Vec3>),
}

impl Targets {
    pub fn get(&self, k: usize) -> Vec3 {
        match self {
            Targets::Global(x) => *x,
            Targets::PerParticle(v) => v[k],
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        match self {
            Targets::PerParticle(v) if v.len() != n => {
                Err(invalid(format!("{} targets for {n} particles", v.len())))
            }
            _ => Ok(()),
        }
    }
}

/// Pair-control settings shared by every encounter in a kinetic run. The
/// targets come from [`Targets`], so `z_bar` is not used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticControl {
    pub k: usize,
    pub gamma_bar: f64,
    pub u_box: f64,
}

impl KineticControl {
    fn problem(&self, radius: f64, z_bar: PairState) -> Result<ControlProblem> {
        ControlProblem::new(z_bar, Weight::Scaled(self.gamma_bar), self.k, self.u_box, radius)
    }
}

/// One Monte Carlo step where each surviving pair moves by
/// `X* = X + K⁻¹ A_x ū`, `Y* = Y + K⁻¹ A_y ū`, with ū the instantaneous
/// control of that pair toward its targets. Returns the new ensemble, the
/// control each particle received (zero if it did not interact), and stats.
pub fn controlled_kinetic_step(
    ensemble: &Ensemble,
    params: &KineticParams,
    control: &KineticControl,
    targets: &Targets,
    step: u64,
) -> Result<(Ensemble, Vec<Vec3>, StepStats)> {
    params.validate()?;
    targets.check(ensemble.len())?;
    let template = control.problem(ensemble.radius(), [Vec3::zeros(); 2])?;
    let h = template.step();
    let draw = draw_pairs(ensemble, params, step);
    let pos = ensemble.positions();
    let r = ensemble.sep_radius();
    type Update = Option<(PairState, Vec3)>;
    let updates: Vec<Update> = draw
        .pairs
        .par_iter()
        .map(|&(i, j)| -> Result<Update> {
            let (x, y) = (pos[i], pos[j]);
            if (x - y).norm() <= r {
                return Ok(None);
            }
            let labels = (draw.label(ensemble, i), draw.label(ensemble, j));
            let problem = template.with_target([targets.get(i), targets.get(j)]);
            let u = instantaneous_control(&x, &y, &problem, labels)?;
            let a = interaction_matrices(&x, &y, labels, ensemble.radius())?;
            Ok(Some((advance(&[x, y], &a, &u, h), u)))
        })
        .collect::<Result<_>>()?;

    let mut next = pos.to_vec();
    let mut applied = vec![Vec3::zeros(); pos.len()];
    let mut skipped = 0;
    for (&(i, j), up) in draw.pairs.iter().zip(updates) {
        match up {
            Some((z, u)) => {
                next[i] = z[0];
                next[j] = z[1];
                applied[i] = u;
                applied[j] = u;
            }
            None => skipped += 1,
        }
    }
    let stats = StepStats {
        flagged: draw.flagged,
        pairs: draw.pairs.len(),
        skipped,
    };
    Ok((ensemble.with_positions(next), applied, stats))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlledRun {
    pub times: Vec<f64>,
    pub snapshots: Vec<Ensemble>,
    /// Control applied to each particle during the step that starts at the
    /// matching snapshot; zeros at the final time.
    pub controls: Vec<Vec<Vec3>>,
    pub stats: Vec<StepStats>,
}

/// Controlled kinetic run over `horizon` with every step recorded. Passing
/// `control = None` runs the same pairings with `ū ≡ 0`.
pub fn run_controlled(
    initial: &Ensemble,
    params: &KineticParams,
    control: Option<&KineticControl>,
    targets: &Targets,
    horizon: f64,
) -> Result<ControlledRun> {
    let n = step_count(horizon, params.dt)?;
    let zeros = vec![Vec3::zeros(); initial.len()];
    let mut run = ControlledRun {
        times: vec![0.0],
        snapshots: vec![initial.clone()],
        controls: Vec::with_capacity(n + 1),
        stats: Vec::with_capacity(n),
    };
    let mut cur = initial.clone();
    for s in 0..n {
        let (next, applied, stats) = match control {
            Some(c) => controlled_kinetic_step(&cur, params, c, targets, s as u64)?,
            None => {
                params.validate()?;
                targets.check(cur.len())?;
                let draw = draw_pairs(&cur, params, s as u64);
                let skipped = draw
                    .pairs
                    .iter()
                    .filter(|&&(i, j)| (cur.positions()[i] - cur.positions()[j]).norm() <= cur.sep_radius())
                    .count();
                let stats = StepStats {
                    flagged: draw.flagged,
                    pairs: draw.pairs.len(),
                    skipped,
                };
                (cur.clone(), zeros.clone(), stats)
            }
        };
        run.controls.push(applied);
        run.stats.push(stats);
        run.times.push((s + 1) as f64 * params.dt);
        run.snapshots.push(next.clone());
        cur = next;
    }
    run.controls.push(zeros);
    Ok(run)
}

/// Trapezoid rule in time of `Σ_k w_k [½|X̄_k − X_k|² + (γ/2)|u_k|²]`.
pub fn meanfield_cost_j(
    times: &[f64],
    clouds: &[WeightedCloud],
    controls: &[Vec<Vec3>],
    targets: &Targets,
    gamma: f64,
) -> Result<f64> {
    if times.len() != clouds.len() || times.len() != controls.len() || times.is_empty() {
        return Err(invalid("times, clouds and controls must have equal nonzero length"));
    }
    let running: Vec<f64> = clouds
        .iter()
        .zip(controls)
        .map(|(c, u)| -> Result<f64> {
            if u.len() != c.len() {
                return Err(invalid("one control per cloud point"));
            }
            targets.check(c.len())?;
            Ok(c.points()
                .iter()
                .zip(c.weights())
                .zip(u)
                .enumerate()
                .map(|(k, ((x, w), u))| {
                    w * (0.5 * (targets.get(k) - x).norm_squared() + 0.5 * gamma * u.norm_squared())
                })
                .sum())
        })
        .collect::<Result<_>>()?;
    Ok(times
        .windows(2)
        .zip(running.windows(2))
        .map(|(t, l)| 0.5 * (t[1] - t[0]) * (l[0] + l[1]))
        .sum())
}

impl ControlledRun {
    pub fn cost(&self, targets: &Targets, gamma: f64) -> Result<f64> {
        let clouds: Vec<WeightedCloud> = self.snapshots.iter().map(|e| e.cloud()).collect();
        meanfield_cost_j(&self.times, &clouds, &self.controls, targets, gamma)
    }
}
