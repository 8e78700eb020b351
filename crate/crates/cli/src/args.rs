use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "spherectl", version, about = "Steering and kinetic simulation of spheres in Stokes flow")]
pub struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; 0 lets rayon decide. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = "out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Integrate a configuration under a control signal.
    Simulate(SimulateArgs),
    /// Bracket-rank certificate for a configuration.
    Larc(LarcArgs),
    /// Plan a control that steers one configuration to another.
    Plan(PlanArgs),
    /// Monte Carlo of the binary-interaction dynamics.
    Kinetic(KineticArgs),
    /// Particle solution of the mean-field transport equation.
    Meanfield(MeanfieldArgs),
    /// Feedback rollout of the instantaneous control for one pair.
    ControlBinary(ControlBinaryArgs),
    /// Kinetic Monte Carlo with the pair feedback control.
    ControlKinetic(ControlKineticArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Larc(_) => "larc",
            Command::Plan(_) => "plan",
            Command::Kinetic(_) => "kinetic",
            Command::Meanfield(_) => "meanfield",
            Command::ControlBinary(_) => "control-binary",
            Command::ControlKinetic(_) => "control-kinetic",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IntegratorArg {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelArg {
    Quenched,
    Annealed,
}

pub fn parse_vec3(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(v)
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Configuration JSON: {active, passive, radius, sep_radius}.
    #[arg(long)]
    pub config: PathBuf,
    /// Control signal JSON: [{t_start, t_end, u}].
    #[arg(long)]
    pub signal: PathBuf,
    /// Largest sub-step; defaults to R/(100 u_max).
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Euler)]
    pub integrator: IntegratorArg,
}

#[derive(Debug, Args, Serialize)]
pub struct LarcArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Deepest bracket; defaults to the smallest depth that can reach full rank.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Relative singular-value threshold.
    #[arg(long, default_value_t = spherectl::lie::DEFAULT_RANK_TOL)]
    pub rank_tol: f64,
    /// Use finite differences instead of exact derivatives.
    #[arg(long)]
    pub finite_difference: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PlanArgs {
    #[arg(long)]
    pub start: PathBuf,
    #[arg(long)]
    pub goal: PathBuf,
    /// Largest allowed per-particle position error at the end.
    #[arg(long)]
    pub tol: f64,
    #[arg(long, default_value_t = 1.0)]
    pub u_max: f64,
    /// Time budget for the whole plan.
    #[arg(long, default_value_t = 1e7)]
    pub budget: f64,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = IntegratorArg::Rk4)]
    pub integrator: IntegratorArg,
}

/// Flags shared by the kinetic subcommands.
#[derive(Debug, Args, Serialize)]
pub struct EnsembleArgs {
    /// Number of particles for the default Gaussian cloud.
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Standard deviation of the default Gaussian cloud.
    #[arg(long, default_value_t = 0.5)]
    pub std: f64,
    /// CSV with columns x,y,z and optionally active (0/1); replaces the Gaussian cloud.
    #[arg(long)]
    pub initial: Option<PathBuf>,
    /// Probability that a particle is active.
    #[arg(long, default_value_t = 0.3)]
    pub p: f64,
    /// Sphere radius a.
    #[arg(long, default_value_t = 0.02)]
    pub radius: f64,
    /// Separation radius R.
    #[arg(long, default_value_t = 0.2)]
    pub sep_radius: f64,
    /// Horizon T.
    #[arg(long = "horizon", visible_alias = "t-end", default_value_t = 1.0)]
    pub horizon: f64,
    /// Constant uniform control, used when no signal file is given.
    #[arg(long, value_parser = parse_vec3, default_value = "1,0,0")]
    pub u: [f64; 3],
    /// Control signal JSON (one 3-vector per interval).
    #[arg(long)]
    pub u_signal: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub snapshot_every: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct KineticArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 0.05)]
    pub tau: f64,
    /// Interaction rate; defaults to 1/tau.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Monte Carlo step; defaults to tau.
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_enum, default_value_t = LabelArg::Quenched)]
    pub labels: LabelArg,
    /// Also run the mean-field solution with the same step and report distances.
    #[arg(long)]
    pub compare_meanfield: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct MeanfieldArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 0.025)]
    pub dt: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ControlBinaryArgs {
    /// Pair JSON: {x0, y0, x_bar, y_bar} as 3-vectors.
    #[arg(long)]
    pub target: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    /// Fixed control weight.
    #[arg(long, conflicts_with = "gamma_bar", required_unless_present = "gamma_bar")]
    pub gamma: Option<f64>,
    /// Scaled weight: gamma = gamma_bar / K.
    #[arg(long)]
    pub gamma_bar: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub u_box: f64,
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub horizon: f64,
    /// Labels of x and y, as two characters of 0/1 (1 = active).
    #[arg(long, default_value = "10")]
    pub labels: String,
}

#[derive(Debug, Args, Serialize)]
pub struct ControlKineticArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub ensemble: EnsembleArgs,
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub gamma_bar: f64,
    #[arg(long, default_value_t = 1.0)]
    pub u_box: f64,
    /// Common target for every particle.
    #[arg(long, value_parser = parse_vec3, default_value = "0,0,0")]
    pub target: [f64; 3],
    /// CSV x,y,z of per-particle targets; replaces --target.
    #[arg(long)]
    pub targets: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = LabelArg::Quenched)]
    pub labels: LabelArg,
    /// Also run the same pairings with zero control and report both costs.
    #[arg(long)]
    pub compare_uncontrolled: bool,
}
