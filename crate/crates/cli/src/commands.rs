use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::json;
use spherectl::binary_control::{
    feedback_rollout, run_controlled, zero_control_rollout, ControlProblem, KineticControl, Targets, Weight,
};
use spherectl::dynamics::fmt_f64;
use spherectl::kinetic::{
    empirical_distance, gaussian_cloud, meanfield_run, run_nanbu, Ensemble, KineticParams, LabelMode, WeightedCloud,
};
use spherectl::lie::{certify, DiffMode, LarcOptions};
use spherectl::planner::{steer, SteeringTask};
use spherectl::{integrate_with, ControlSignal, Error, Integrator, ParticleConfiguration, Stepper, Vec3};

use crate::args::*;
use crate::manifest::Inputs;

/// A failed run: message plus process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn algorithmic(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Separation { .. } => 3,
            Error::NonFinite(_) | Error::Singular(_) | Error::RankDeficient { .. } => 2,
            Error::CoincidentParticles
            | Error::TooFewParticles(_)
            | Error::InvalidParameter(_)
            | Error::Contract(_)
            | Error::Json(_)
            | Error::Io(_) => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::input(format!("io: {e}"))
    }
}

pub type Outcome = Result<(), Failure>;

/// Where a command reads inputs and writes outputs.
pub struct Context {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub inputs: Inputs,
    pub outputs: Vec<String>,
}

impl Context {
    fn read(&mut self, path: &Path) -> Result<String, Failure> {
        self.inputs
            .read(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    fn write(&mut self, name: &str, contents: &str) -> Outcome {
        std::fs::write(self.out_dir.join(name), contents)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn write_json(&mut self, name: &str, value: &impl serde::Serialize) -> Outcome {
        let text = serde_json::to_string_pretty(value).map_err(|e| Failure::input(e.to_string()))?;
        self.write(name, &text)
    }

    fn config(&mut self, path: &Path) -> Result<ParticleConfiguration, Failure> {
        let text = self.read(path)?;
        Ok(ParticleConfiguration::from_json(&text)?)
    }
}

fn method(i: IntegratorArg) -> Integrator {
    match i {
        IntegratorArg::Euler => Integrator::Euler,
        IntegratorArg::Rk4 => Integrator::Rk4,
    }
}

fn label_mode(l: LabelArg) -> LabelMode {
    match l {
        LabelArg::Quenched => LabelMode::Quenched,
        LabelArg::Annealed => LabelMode::Annealed,
    }
}

fn vec3(v: [f64; 3]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

pub fn run(cmd: &Command, ctx: &mut Context) -> Outcome {
    match cmd {
        Command::Simulate(a) => simulate(a, ctx),
        Command::Larc(a) => larc(a, ctx),
        Command::Plan(a) => plan(a, ctx),
        Command::Kinetic(a) => kinetic(a, ctx),
        Command::Meanfield(a) => meanfield(a, ctx),
        Command::ControlBinary(a) => control_binary(a, ctx),
        Command::ControlKinetic(a) => control_kinetic(a, ctx),
    }
}

fn simulate(a: &SimulateArgs, ctx: &mut Context) -> Outcome {
    let config = ctx.config(&a.config)?;
    let text = ctx.read(&a.signal)?;
    let signal = ControlSignal::from_json(&text, config.n_active())?;
    let stepper = Stepper {
        dt_max: a
            .dt
            .unwrap_or_else(|| Stepper::default_dt_max(config.sep_radius(), signal.max_norm())),
        method: method(a.integrator),
    };
    match integrate_with(&config, &signal, &stepper) {
        Ok(traj) => ctx.write("trajectory.csv", &traj.to_csv()),
        Err(aborted) => {
            // Keep what was reached so the violation can be inspected.
            ctx.write("trajectory.csv", &aborted.partial.to_csv())?;
            Err(aborted.error.into())
        }
    }
}

fn larc(a: &LarcArgs, ctx: &mut Context) -> Outcome {
    let config = ctx.config(&a.config)?;
    let opts = LarcOptions {
        rank_tol: a.rank_tol,
        mode: if a.finite_difference {
            DiffMode::FiniteDifference
        } else {
            DiffMode::Analytic
        },
    };
    let cert = certify(&config, a.depth, opts)?;
    ctx.write("certificate.json", &cert.to_json())?;
    if cert.is_full_rank() {
        Ok(())
    } else {
        Err(Failure::algorithmic(format!("rank {} < {}", cert.rank, cert.n)))
    }
}

fn plan(a: &PlanArgs, ctx: &mut Context) -> Outcome {
    let start = ctx.config(&a.start)?;
    let goal = ctx.config(&a.goal)?;
    let mut task = SteeringTask::new(start, goal, a.tol, a.u_max, a.budget);
    task.options.dt_max = a.dt;
    task.options.integrator = method(a.integrator);
    let result = steer(&task)?;
    ctx.write("signal.json", &result.signal.to_json())?;
    ctx.write("trajectory.csv", &result.trajectory.to_csv())?;
    let report = json!({
        "status": format!("{:?}", result.status),
        "final_error": result.final_error,
        "min_separation": result.min_sep_achieved,
        "iterations": result.iterations,
        "horizon": result.signal.end_time(),
        "error_history": result.error_history,
        "stepper": {
            "dt_max": result.stepper.dt_max,
            "method": result.stepper.method,
        },
    });
    ctx.write_json("report.json", &report)?;
    if result.success() {
        Ok(())
    } else {
        Err(Failure::algorithmic(format!(
            "not converged ({:?}), final error {:.3e}",
            result.status, result.final_error
        )))
    }
}

#[derive(Debug, Deserialize)]
struct InitialRow {
    x: f64,
    y: f64,
    z: f64,
    active: Option<u8>,
}

fn initial_ensemble(e: &EnsembleArgs, ctx: &mut Context) -> Result<Ensemble, Failure> {
    let Some(path) = &e.initial else {
        let pts = gaussian_cloud(e.n, Vec3::zeros(), e.std, ctx.seed);
        return Ok(Ensemble::with_random_labels(pts, e.p, e.radius, e.sep_radius, ctx.seed)?);
    };
    let text = ctx.read(path)?;
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for row in reader.deserialize::<InitialRow>() {
        let row = row.map_err(|err| Failure::input(format!("{}: {err}", path.display())))?;
        pts.push(Vec3::new(row.x, row.y, row.z));
        labels.push(row.active);
    }
    if labels.iter().all(Option::is_some) {
        let labels = labels.into_iter().map(|l| l == Some(1)).collect();
        Ok(Ensemble::new(pts, labels, e.p, e.radius, e.sep_radius)?)
    } else if labels.iter().all(Option::is_none) {
        Ok(Ensemble::with_random_labels(pts, e.p, e.radius, e.sep_radius, ctx.seed)?)
    } else {
        Err(Failure::input("the active column must be filled for every row or for none"))
    }
}

fn control_signal(e: &EnsembleArgs, ctx: &mut Context) -> Result<ControlSignal, Failure> {
    match &e.u_signal {
        Some(path) => {
            let text = ctx.read(path)?;
            Ok(ControlSignal::from_json(&text, 1)?)
        }
        None => Ok(ControlSignal::single(vec![0.0, e.horizon], vec![vec3(e.u)])?),
    }
}

fn ensemble_csv(ens: &Ensemble) -> String {
    ens.to_csv()
}

fn cloud_csv(cloud: &WeightedCloud) -> String {
    let mut s = String::from("x,y,z,weight\n");
    for (p, w) in cloud.points().iter().zip(cloud.weights()) {
        let _ = writeln!(s, "{},{},{},{}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(p.z), fmt_f64(*w));
    }
    s
}

fn kinetic(a: &KineticArgs, ctx: &mut Context) -> Outcome {
    let ens = initial_ensemble(&a.ensemble, ctx)?;
    let signal = control_signal(&a.ensemble, ctx)?;
    let params = KineticParams {
        tau: a.tau,
        sigma: a.sigma.unwrap_or(1.0 / a.tau),
        dt: a.dt.unwrap_or(a.tau),
        seed: ctx.seed,
        labels: label_mode(a.labels),
    };
    let run = run_nanbu(&ens, &params, &signal, a.ensemble.horizon, a.ensemble.snapshot_every)?;
    for (k, snap) in run.snapshots.iter().enumerate() {
        ctx.write(&format!("snapshot_{k:04}.csv"), &ensemble_csv(snap))?;
    }
    let mut report = json!({
        "times": run.times,
        "n_particles": ens.len(),
        "n_active": ens.n_active(),
        "params": params,
        "flagged": run.stats.iter().map(|s| s.flagged).sum::<usize>(),
        "pairs": run.stats.iter().map(|s| s.pairs).sum::<usize>(),
        "skipped_pairs": run.total_skipped(),
    });
    if a.compare_meanfield {
        let mf = meanfield_run(
            &ens.cloud(),
            &signal,
            ens.p(),
            ens.radius(),
            ens.sep_radius(),
            params.dt,
            a.ensemble.horizon,
            a.ensemble.snapshot_every,
        )?;
        let distances: Vec<f64> = run
            .snapshots
            .iter()
            .zip(&mf.snapshots)
            .map(|(mc, m)| empirical_distance(&mc.cloud(), m))
            .collect();
        report["meanfield_distances"] = json!(distances);
    }
    ctx.write_json("report.json", &report)
}

fn meanfield(a: &MeanfieldArgs, ctx: &mut Context) -> Outcome {
    let ens = initial_ensemble(&a.ensemble, ctx)?;
    let signal = control_signal(&a.ensemble, ctx)?;
    let run = meanfield_run(
        &ens.cloud(),
        &signal,
        ens.p(),
        ens.radius(),
        ens.sep_radius(),
        a.dt,
        a.ensemble.horizon,
        a.ensemble.snapshot_every,
    )?;
    for (k, snap) in run.snapshots.iter().enumerate() {
        ctx.write(&format!("snapshot_{k:04}.csv"), &cloud_csv(snap))?;
    }
    let means: Vec<Vec3> = run.snapshots.iter().map(WeightedCloud::mean).collect();
    let report = json!({
        "times": run.times,
        "n_particles": ens.len(),
        "p": ens.p(),
        "dt": a.dt,
        "means": means,
    });
    ctx.write_json("report.json", &report)
}

#[derive(Debug, Deserialize)]
struct PairTarget {
    x0: Vec3,
    y0: Vec3,
    x_bar: Vec3,
    y_bar: Vec3,
}

fn parse_labels(s: &str) -> Result<(bool, bool), Failure> {
    let bit = |c: char| match c {
        '0' => Ok(false),
        '1' => Ok(true),
        _ => Err(Failure::input(format!("labels must be two of 0/1, got {s:?}"))),
    };
    let chars: Vec<char> = s.chars().collect();
    match chars.as_slice() {
        [x, y] => Ok((bit(*x)?, bit(*y)?)),
        _ => Err(Failure::input(format!("labels must be two of 0/1, got {s:?}"))),
    }
}

fn control_binary(a: &ControlBinaryArgs, ctx: &mut Context) -> Outcome {
    let text = ctx.read(&a.target)?;
    let t: PairTarget = serde_json::from_str(&text).map_err(Error::from)?;
    let labels = parse_labels(&a.labels)?;
    let weight = match (a.gamma, a.gamma_bar) {
        (Some(g), None) => Weight::Fixed(g),
        (None, Some(gb)) => Weight::Scaled(gb),
        _ => return Err(Failure::input("give exactly one of --gamma and --gamma-bar")),
    };
    let mut problem = ControlProblem::new([t.x_bar, t.y_bar], weight, a.k, a.u_box, a.radius)?;
    problem.horizon = a.horizon;
    let z0 = [t.x0, t.y0];
    let policy = feedback_rollout(&z0, &problem, labels)?;
    let baseline = zero_control_rollout(&z0, &problem, labels)?;
    let out = json!({
        "problem": problem,
        "gamma": problem.gamma(),
        "policy": policy,
        "zero_control_cost": baseline.cost,
    });
    ctx.write_json("policy.json", &out)
}

fn control_kinetic(a: &ControlKineticArgs, ctx: &mut Context) -> Outcome {
    if a.ensemble.horizon != 1.0 {
        return Err(Failure::input("the pair control is posed on the unit horizon; use --horizon 1"));
    }
    if a.k == 0 {
        return Err(Failure::input("--k must be positive"));
    }
    let ens = initial_ensemble(&a.ensemble, ctx)?;
    let targets = match &a.targets {
        Some(path) => {
            let text = ctx.read(path)?;
            let mut reader = csv::Reader::from_reader(text.as_bytes());
            let mut v = Vec::new();
            for row in reader.deserialize::<(f64, f64, f64)>() {
                let (x, y, z) = row.map_err(|err| Failure::input(format!("{}: {err}", path.display())))?;
                v.push(Vec3::new(x, y, z));
            }
            Targets::PerParticle(v)
        }
        None => Targets::Global(vec3(a.target)),
    };
    let control = KineticControl {
        k: a.k,
        gamma_bar: a.gamma_bar,
        u_box: a.u_box,
    };
    let gamma = a.gamma_bar / a.k as f64;
    let params = KineticParams::quasi_invariant(1.0 / a.k as f64, ctx.seed).with_labels(label_mode(a.labels));
    let on = run_controlled(&ens, &params, Some(&control), &targets, 1.0)?;
    let every = a.ensemble.snapshot_every.max(1);
    for (k, snap) in on.snapshots.iter().enumerate() {
        if k % every == 0 || k + 1 == on.snapshots.len() {
            ctx.write(&format!("snapshot_{k:04}.csv"), &ensemble_csv(snap))?;
        }
    }
    let mut report = json!({
        "times": on.times,
        "gamma": gamma,
        "control": control,
        "cost": on.cost(&targets, gamma)?,
        "skipped_pairs": on.stats.iter().map(|s| s.skipped).sum::<usize>(),
    });
    if a.compare_uncontrolled {
        let off = run_controlled(&ens, &params, None, &targets, 1.0)?;
        report["uncontrolled_cost"] = json!(off.cost(&targets, gamma)?);
    }
    ctx.write_json("report.json", &report)
}
