//! Steering by re-linearized commutator loops.
//!
//! Each outer iteration writes the residual in a local basis of control
//! fields and brackets, then realizes each coefficient: direct moves for the
//! fields, nested back-and-forth loops for the brackets.

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{integrate_with, ControlSignal, Integrator, Stepper, Trajectory};
use crate::error::{contract, invalid, Error, Result};
use crate::hydro::{ParticleConfiguration, Vec3};
use crate::lie::{
    achieving_columns, bracket_columns, resolve_w1, v_1on1, reduced_1on2_brackets, BracketExpr, DiffMode,
    VectorFieldSet, DELTA1_COLUMNS, DELTA2_COLUMNS, DEFAULT_RANK_TOL,
};

/// A piece of a loop: move field `field` with signed path length `len`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Seg {
    field: usize,
    len: f64,
}

fn loop_segments(expr: &BracketExpr, eps: f64, out: &mut Vec<Seg>) {
    match expr {
        BracketExpr::Gen(l) => out.push(Seg { field: *l, len: eps }),
        BracketExpr::Br(f, g) => {
            let mut a = Vec::new();
            let mut b = Vec::new();
            loop_segments(f, eps, &mut a);
            loop_segments(g, eps, &mut b);
            out.extend_from_slice(&a);
            out.extend_from_slice(&b);
            out.extend(inverse(&a));
            out.extend(inverse(&b));
        }
    }
}

fn inverse(segs: &[Seg]) -> impl Iterator<Item = Seg> + '_ {
    segs.iter().rev().map(|s| Seg { field: s.field, len: -s.len })
}

/// Loop whose net displacement is `sign · eps^deg · expr + O(eps^{deg+1})`.
fn signed_loop(expr: &BracketExpr, eps: f64, negative: bool) -> Vec<Seg> {
    let mut out = Vec::new();
    match (expr, negative) {
        (BracketExpr::Gen(_), true) => {
            loop_segments(expr, -eps, &mut out);
        }
        (BracketExpr::Br(f, g), true) => {
            loop_segments(&BracketExpr::Br(g.clone(), f.clone()), eps, &mut out);
        }
        _ => loop_segments(expr, eps, &mut out),
    }
    out
}

/// Symmetrized loop: `L(ε)` followed by `L(−ε)` (even depth) or its inverse
/// (odd depth). The `ε^{deg+1}` terms cancel and the net displacement is
/// `±2 ε^deg · expr + O(ε^{deg+2})`.
fn symmetric_loop(expr: &BracketExpr, eps: f64, negative: bool) -> Vec<Seg> {
    let mut out = signed_loop(expr, eps, negative);
    let mirror = signed_loop(expr, -eps, negative);
    if expr.depth() % 2 == 0 {
        out.extend_from_slice(&mirror);
    } else {
        out.extend(inverse(&mirror));
    }
    out
}

/// Largest distance of the driving active from its start along the loop,
/// per unit `eps`.
fn excursion(segs: &[Seg]) -> f64 {
    let mut p = [Vec3::zeros(); 8];
    let mut worst: f64 = 0.0;
    for s in segs {
        let (i, c) = (s.field / 3, s.field % 3);
        p[i.min(7)][c] += s.len;
        worst = worst.max(p[i.min(7)].norm());
    }
    worst
}

/// Append one interval unless it is too short to register on the clock.
fn push_interval(signal: &mut ControlSignal, duration: f64, u: &[Vec3]) -> Result<()> {
    if signal.end_time() + duration == signal.end_time() {
        return Ok(());
    }
    signal.push(duration, u)
}

fn push_segments(signal: &mut ControlSignal, segs: &[Seg], speed: f64) -> Result<()> {
    let width = signal.width();
    for s in segs {
        let mut u = vec![Vec3::zeros(); width];
        u[s.field / 3][s.field % 3] = speed * s.len.signum();
        push_interval(signal, s.len.abs() / speed, &u)?;
    }
    Ok(())
}

/// Four-segment loop `+e^i, +e^j, −e^i, −e^j` with unit controls, each
/// lasting `eps`. Fails if the loop breaks separation.
pub fn bracket_move(config: &ParticleConfiguration, i: usize, j: usize, eps: f64) -> Result<ControlSignal> {
    let m = 3 * config.n_active();
    if i >= m || j >= m {
        return Err(contract(format!("field indices must be below {m}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid(format!("eps must be positive, got {eps}")));
    }
    loop_signal(config, &BracketExpr::br(BracketExpr::gen(i), BracketExpr::gen(j)), eps, 1.0)
}

/// Nested commutator loop for any bracket expression, at speed `speed`.
/// The signal is checked by integration with the default sub-step.
pub fn loop_signal(config: &ParticleConfiguration, expr: &BracketExpr, eps: f64, speed: f64) -> Result<ControlSignal> {
    let mut sig = ControlSignal::empty(config.n_active());
    push_segments(&mut sig, &signed_loop(expr, eps, false), speed)?;
    let stepper = Stepper::euler(Stepper::default_dt_max(config.sep_radius(), speed));
    integrate_with(config, &sig, &stepper)?;
    Ok(sig)
}

/// Directions spanning the tangent space at a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBasis {
    pub generators: Vec<BracketExpr>,
    /// Columns are the generator directions at the configuration.
    pub directions: DMatrix<f64>,
    /// Name of the column set used.
    pub set: String,
    pub determinant: f64,
}

impl LocalBasis {
    pub fn condition_number(&self) -> f64 {
        let sv = self.directions.clone().svd(false, false).singular_values;
        let max = sv.iter().copied().fold(0.0, f64::max);
        let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

fn basis_from(fs: &VectorFieldSet, z: &[f64], generators: Vec<BracketExpr>, set: String) -> Result<LocalBasis> {
    let cols = fs.eval(&generators, z, DiffMode::Analytic)?;
    let directions = DMatrix::from_columns(&cols);
    let determinant = directions.determinant();
    Ok(LocalBasis {
        generators,
        directions,
        set,
        determinant,
    })
}

/// Pick `n` spanning directions: for 1+1 the best of the three δ sets, for
/// 1+2 the δ⁽¹⁾ or δ⁽²⁾ set with larger `|det|`, otherwise a greedy pick.
pub fn local_basis(config: &ParticleConfiguration) -> Result<LocalBasis> {
    if config.n_active() != 1 {
        return Err(contract(format!(
            "steering supports one active particle, got {}",
            config.n_active()
        )));
    }
    let fs = VectorFieldSet::full(1, config.n_passive(), config.radius())?;
    let z = config.state();
    let gens = || (0..3).map(BracketExpr::gen).collect::<Vec<_>>();
    let candidates: Vec<(String, Vec<BracketExpr>)> = match config.n_passive() {
        0 => vec![("fields".into(), gens())],
        1 => {
            let [v1, v2, v3] = v_1on1();
            let w1 = resolve_w1(config.radius())?.recipe;
            let br = BracketExpr::br;
            let g = BracketExpr::gen;
            let w2 = br(g(0), v3.clone());
            let w3 = br(g(0), v2.clone());
            vec![
                ("delta_1".into(), [gens(), vec![w1, v2.clone(), v3.clone()]].concat()),
                ("delta_2".into(), [gens(), vec![v1.clone(), w2, v3]].concat()),
                ("delta_3".into(), [gens(), vec![v1, v2, w3]].concat()),
            ]
        }
        2 => {
            let named = reduced_1on2_brackets();
            let pick = |names: &[&str]| -> Vec<BracketExpr> {
                names
                    .iter()
                    .map(|n| named.iter().find(|(k, _)| k == n).expect("known name").1.clone())
                    .collect()
            };
            vec![
                ("delta^(1)".into(), [gens(), pick(&DELTA1_COLUMNS)].concat()),
                ("delta^(2)".into(), [gens(), pick(&DELTA2_COLUMNS)].concat()),
            ]
        }
        _ => {
            let exprs = bracket_columns(3, 4);
            let cols = fs.eval(&exprs, &z, DiffMode::Analytic)?;
            let picked = achieving_columns(&cols, DEFAULT_RANK_TOL);
            if picked.len() < fs.dim() {
                return Err(Error::RankDeficient {
                    rank: picked.len(),
                    dim: fs.dim(),
                });
            }
            vec![("greedy".into(), picked.into_iter().map(|k| exprs[k].clone()).collect())]
        }
    };
    let mut best: Option<LocalBasis> = None;
    for (name, g) in candidates {
        let b = basis_from(&fs, &z, g, name)?;
        if best.as_ref().is_none_or(|x| b.determinant.abs() > x.determinant.abs()) {
            best = Some(b);
        }
    }
    let best = best.expect("at least one candidate");
    let (rank, _) = crate::lie::numerical_rank(&best.directions, DEFAULT_RANK_TOL);
    if rank < fs.dim() {
        return Err(Error::RankDeficient { rank, dim: fs.dim() });
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringTask {
    pub start: ParticleConfiguration,
    pub goal: ParticleConfiguration,
    /// Largest allowed per-particle position error at the end.
    pub position_tol: f64,
    pub u_max: f64,
    /// Horizon budget.
    pub t_budget: f64,
    pub options: SteeringOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringOptions {
    /// Sub-step bound; `None` means `R / (100 u_max)`.
    pub dt_max: Option<f64>,
    pub integrator: Integrator,
    /// Extra clearance kept by the loop envelopes, as a fraction of `R`.
    pub margin_frac: f64,
    pub max_iterations: usize,
    /// Cap on loop amplitude as a fraction of the current minimum separation.
    pub max_eps_frac: f64,
}

impl Default for SteeringOptions {
    fn default() -> Self {
        Self {
            dt_max: None,
            integrator: Integrator::Rk4,
            margin_frac: 0.05,
            max_iterations: 200,
            max_eps_frac: 0.1,
        }
    }
}

impl SteeringTask {
    pub fn new(start: ParticleConfiguration, goal: ParticleConfiguration, position_tol: f64, u_max: f64, t_budget: f64) -> Self {
        Self {
            start,
            goal,
            position_tol,
            u_max,
            t_budget,
            options: SteeringOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.start.same_shape(&self.goal) {
            return Err(invalid("start and goal differ in particle counts, radius or separation radius"));
        }
        for (name, c) in [("start", &self.start), ("goal", &self.goal)] {
            if let Some(v) = c.separation_violation() {
                return Err(invalid(format!("{name} configuration is not well separated: {v}")));
            }
        }
        if !(self.position_tol > 0.0 && self.u_max > 0.0 && self.t_budget > 0.0) {
            return Err(invalid("tolerance, control bound and budget must be positive"));
        }
        if self.start.n_active() != 1 {
            return Err(contract("steering supports exactly one active particle"));
        }
        Ok(())
    }

    pub fn stepper(&self) -> Stepper {
        Stepper {
            dt_max: self
                .options
                .dt_max
                .unwrap_or_else(|| Stepper::default_dt_max(self.start.sep_radius(), self.u_max)),
            method: self.options.integrator,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteeringStatus {
    Converged,
    BudgetExhausted,
    IterationLimit,
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringResult {
    pub signal: ControlSignal,
    /// Integration policy used; replaying `signal` with it reproduces `trajectory`.
    pub stepper: Stepper,
    pub trajectory: Trajectory,
    pub final_error: f64,
    pub min_sep_achieved: f64,
    pub status: SteeringStatus,
    pub iterations: usize,
    /// Error after each accepted iteration.
    pub error_history: Vec<f64>,
}

impl SteeringResult {
    pub fn success(&self) -> bool {
        self.status == SteeringStatus::Converged
    }
}

/// Largest per-particle distance between two configurations.
pub fn position_error(a: &ParticleConfiguration, b: &ParticleConfiguration) -> f64 {
    a.positions().zip(b.positions()).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max)
}

enum Move {
    /// Straight-line active displacement.
    Direct(Vec3),
    Loops(Vec<Seg>),
}

/// One outer iteration's moves at scale `scale`, in execution order.
fn plan_moves(task: &SteeringTask, cur: &ParticleConfiguration, basis: &LocalBasis, coef: &DVector<f64>, scale: f64) -> Vec<Move> {
    let r = cur.sep_radius();
    let margin = task.options.margin_frac * r;
    let min_sep = cur.min_separation().unwrap_or(f64::INFINITY);
    let kappa = 1.5 * cur.radius() / r;
    let room = (min_sep - r - margin).max(0.0) / (1.0 + kappa);
    let eps_max = task.options.max_eps_frac * min_sep;
    let mut moves = Vec::new();

    let mut bracket_moves: Vec<(usize, Vec<Seg>)> = Vec::new();
    let mut step = [0.0; 3];
    for (k, g) in basis.generators.iter().enumerate() {
        let c = coef[k] * scale;
        if c == 0.0 {
            continue;
        }
        match g {
            BracketExpr::Gen(l) => step[*l] += c,
            _ => {
                let deg = g.depth();
                let unit = symmetric_loop(g, 1.0, c < 0.0);
                let cap = (room / excursion(&unit)).min(eps_max);
                if cap <= 0.0 {
                    continue;
                }
                let per_loop = 2.0 * cap.powi(deg as i32);
                let reps = (c.abs() / per_loop).ceil().max(1.0);
                let eps = (c.abs() / (2.0 * reps)).powf(1.0 / deg as f64);
                let one = symmetric_loop(g, eps, c < 0.0);
                let mut segs = Vec::new();
                for _ in 0..reps as usize {
                    segs.extend_from_slice(&one);
                }
                bracket_moves.push((deg, segs));
            }
        }
    }
    let step = Vec3::from(step);
    let len = step.norm();
    if len > 0.0 {
        moves.push(Move::Direct(step * (room / len).min(1.0)));
    }
    // Brackets after the straight move, lowest order first.
    bracket_moves.sort_by_key(|(deg, _)| *deg);
    moves.extend(bracket_moves.into_iter().map(|(_, s)| Move::Loops(s)));
    moves
}

fn push_move(signal: &mut ControlSignal, mv: &Move, speed: f64) -> Result<()> {
    match mv {
        Move::Direct(step) => {
            let len = step.norm();
            if len == 0.0 {
                return Ok(());
            }
            push_interval(signal, len / speed, &[step * (speed / len)])
        }
        Move::Loops(segs) => push_segments(signal, segs, speed),
    }
}

pub fn steer(task: &SteeringTask) -> Result<SteeringResult> {
    task.validate()?;
    let stepper = task.stepper();
    let speed = task.u_max;
    let mut signal = ControlSignal::empty(1);
    let mut traj = Trajectory::start(task.start.clone())?;
    let mut err = position_error(&task.start, &task.goal);
    let mut history = vec![err];
    let mut scale: f64 = 1.0;
    let mut iterations = 0;
    let goal = task.goal.state();

    let status = loop {
        if err <= task.position_tol {
            break SteeringStatus::Converged;
        }
        if iterations >= task.options.max_iterations {
            break SteeringStatus::IterationLimit;
        }
        if scale < 1e-6 {
            break SteeringStatus::Stalled;
        }
        iterations += 1;

        let cur = traj.last().clone();
        let basis = local_basis(&cur)?;
        let residual = DVector::from_iterator(goal.len(), goal.iter().zip(cur.state()).map(|(g, z)| g - z));
        let Some(coef) = basis.directions.clone().lu().solve(&residual) else {
            break SteeringStatus::Stalled;
        };

        let (k0, n0, sep0) = (signal.len(), traj.len(), traj.min_separation);
        let mut ok = true;
        for mv in plan_moves(task, &cur, &basis, &coef, scale) {
            let from = signal.len();
            let pushed = push_move(&mut signal, &mv, speed);
            if pushed.is_err() || signal.end_time() > task.t_budget || traj.extend(&signal, from, &stepper).is_err() {
                ok = false;
                break;
            }
        }
        let new_err = position_error(traj.last(), &task.goal);
        if ok && new_err < err {
            err = new_err;
            history.push(err);
            scale = (scale * 2.0).min(1.0);
        } else {
            let over_budget = signal.end_time() > task.t_budget;
            signal.truncate(k0);
            traj.truncate(n0);
            traj.min_separation = sep0;
            if over_budget && scale <= 1.0 / 64.0 {
                break SteeringStatus::BudgetExhausted;
            }
            scale /= 2.0;
        }
    };

    Ok(SteeringResult {
        stepper,
        final_error: err,
        min_sep_achieved: traj.min_separation,
        signal,
        trajectory: traj,
        status,
        iterations,
        error_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::integrate;
    use crate::lie::{fields_1on1, lie_bracket};

    fn pair(d: Vec3) -> ParticleConfiguration {
        ParticleConfiguration::new(vec![Vec3::zeros()], vec![d], 1.0, 10.0).unwrap()
    }

    fn net(config: &ParticleConfiguration, sig: &ControlSignal) -> DVector<f64> {
        let tr = integrate(config, sig, 1e-3).unwrap();
        DVector::from_vec(tr.last().state()) - DVector::from_vec(config.state())
    }

    #[test]
    fn loop_without_passives_closes_exactly() {
        let c = ParticleConfiguration::new(vec![Vec3::new(1., 2., 3.)], vec![], 1.0, 10.0).unwrap();
        for eps in [0.5, 0.125] {
            let sig = bracket_move(&c, 0, 2, eps).unwrap();
            assert_eq!(sig.len(), 4);
            let tr = integrate(&c, &sig, 1.0).unwrap();
            assert_eq!(tr.last().active[0], c.active[0]);
        }
    }

    #[test]
    fn loop_displacement_tracks_bracket() {
        let c = pair(Vec3::new(6.0, 0.0, 8.0) * 2.0);
        let fs = fields_1on1(1.0).unwrap();
        let b = lie_bracket(&fs, &BracketExpr::gen(1), &BracketExpr::gen(2), &c.state(), DiffMode::Analytic).unwrap();
        let mut ratios = Vec::new();
        for eps in [0.4, 0.2, 0.1, 0.05, 0.025] {
            let sig = bracket_move(&c, 1, 2, eps).unwrap();
            let d = net(&c, &sig);
            ratios.push(d[4] / (eps * eps));
        }
        // Richardson: the O(eps) term cancels between consecutive ratios.
        let extrapolated = 2.0 * ratios[4] - ratios[3];
        assert!((extrapolated - b[4]).abs() < 1e-3 * b[4].abs(), "{ratios:?} vs {}", b[4]);
        for w in ratios[1..].windows(2) {
            assert!((w[0] / w[1] - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn swapped_loop_flips_sign() {
        let c = pair(Vec3::new(9.0, -7.0, 11.0));
        let a = net(&c, &bracket_move(&c, 0, 1, 0.1).unwrap());
        let b = net(&c, &bracket_move(&c, 1, 0, 0.1).unwrap());
        assert!((a[3] + b[3]).abs() < 0.05 * a[3].abs());
    }

    #[test]
    fn bracket_move_reports_separation() {
        let c = ParticleConfiguration::new(vec![Vec3::zeros()], vec![Vec3::new(10.5, 0.0, 0.0)], 1.0, 10.0).unwrap();
        assert!(matches!(bracket_move(&c, 0, 1, 2.0), Err(Error::Separation { .. })));
    }

    #[test]
    fn basis_examples() {
        let b = local_basis(&pair(Vec3::new(12.0, -5.0, 7.0))).unwrap();
        assert_eq!(b.generators.len(), 6);
        assert!(b.condition_number().is_finite());
        let b = local_basis(&pair(Vec3::new(15.0, 0.0, 0.0))).unwrap();
        assert_eq!(b.set, "delta_1");
        let c = ParticleConfiguration::new(
            vec![Vec3::zeros()],
            vec![Vec3::new(15.0, 0.0, 0.0), Vec3::new(-20.0, 0.0, 0.0)],
            1.0,
            10.0,
        )
        .unwrap();
        assert_eq!(local_basis(&c).unwrap().set, "delta^(2)");
    }

    #[test]
    fn goal_equal_start_is_trivial() {
        let c = pair(Vec3::new(12.0, 3.0, 4.0));
        let r = steer(&SteeringTask::new(c.clone(), c, 0.1, 1.0, 100.0)).unwrap();
        assert!(r.success());
        assert!(r.signal.is_empty());
        assert_eq!(r.final_error, 0.0);
    }

    #[test]
    fn moves_active_back_into_place() {
        let start = pair(Vec3::new(14.0, 4.0, -3.0));
        let mut goal = start.clone();
        goal.active[0] += Vec3::new(0.4, -0.3, 0.2);
        let task = SteeringTask::new(start.clone(), goal.clone(), 0.1, 1.0, 1e6);
        let r = steer(&task).unwrap();
        assert!(r.success(), "{:?} err {}", r.status, r.final_error);
        assert!(r.min_sep_achieved > 10.0);
        let replay = crate::dynamics::integrate_with(&start, &r.signal, &r.stepper).unwrap();
        assert_eq!(replay, r.trajectory);
        for w in r.error_history.windows(2) {
            assert!(w[1] < w[0]);
        }
    }
}
