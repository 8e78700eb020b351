//! Time integration of the driftless system `ẋ_i = u_i`, `ẏ_j = Σ_i G(y_j − x_i) u_i`.

use serde::{Deserialize, Serialize};

use crate::error::{contract, invalid, Error, Result};
use crate::hydro::{stokeslet, ParticleConfiguration, Vec3};

/// Piecewise-constant control: on `(t_{k−1}, t_k]` each active particle
/// moves with its own constant velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    breakpoints: Vec<f64>,
    width: usize,
    values: Vec<Vec3>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum SegmentControl {
    Single([f64; 3]),
    Multi(Vec<[f64; 3]>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Segment {
    t_start: f64,
    t_end: f64,
    u: SegmentControl,
}

impl ControlSignal {
    /// Empty signal on `[0, 0]` for `width` active particles.
    pub fn empty(width: usize) -> Self {
        Self {
            breakpoints: vec![0.0],
            width,
            values: Vec::new(),
        }
    }

    /// Single-active signal from breakpoints `0 = t_0 < … < t_K` and `K` controls.
    pub fn single(breakpoints: Vec<f64>, values: Vec<Vec3>) -> Result<Self> {
        Self::build(breakpoints, 1, values)
    }

    /// Signal for several actives; `values[k]` holds one control per active.
    pub fn new(breakpoints: Vec<f64>, values: Vec<Vec<Vec3>>) -> Result<Self> {
        let width = values.first().map_or(1, |v| v.len());
        if values.iter().any(|v| v.len() != width) {
            return Err(invalid("all intervals need the same number of controls"));
        }
        Self::build(breakpoints, width, values.into_iter().flatten().collect())
    }

    fn build(breakpoints: Vec<f64>, width: usize, values: Vec<Vec3>) -> Result<Self> {
        if breakpoints.first() != Some(&0.0) {
            return Err(invalid("control grid must start at t = 0"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0]) || !w[1].is_finite()) {
            return Err(invalid("control breakpoints must be strictly increasing and finite"));
        }
        if width == 0 {
            return Err(invalid("control width must be at least one"));
        }
        if values.len() != (breakpoints.len() - 1) * width {
            return Err(invalid(format!(
                "{} breakpoints need {} control vectors, got {}",
                breakpoints.len(),
                (breakpoints.len() - 1) * width,
                values.len()
            )));
        }
        if values.iter().any(|u| !u.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("control value"));
        }
        Ok(Self {
            breakpoints,
            width,
            values,
        })
    }

    /// Append an interval of length `duration` with the given controls.
    pub fn push(&mut self, duration: f64, controls: &[Vec3]) -> Result<()> {
        if controls.len() != self.width {
            return Err(contract(format!(
                "expected {} controls, got {}",
                self.width,
                controls.len()
            )));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(invalid(format!("interval duration must be positive, got {duration}")));
        }
        let t = self.end_time() + duration;
        if !(t > self.end_time()) {
            return Err(invalid("interval too short to advance the clock"));
        }
        self.breakpoints.push(t);
        self.values.extend_from_slice(controls);
        Ok(())
    }

    /// Drop every interval after the first `k`.
    pub fn truncate(&mut self, k: usize) {
        self.breakpoints.truncate(k + 1);
        self.values.truncate(k * self.width);
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of intervals.
    pub fn len(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.breakpoints[k], self.breakpoints[k + 1])
    }

    pub fn controls(&self, k: usize) -> &[Vec3] {
        &self.values[k * self.width..(k + 1) * self.width]
    }

    pub fn end_time(&self) -> f64 {
        *self.breakpoints.last().expect("grid is never empty")
    }

    /// Largest control magnitude over all intervals and actives.
    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(|u| u.norm()).fold(0.0, f64::max)
    }

    /// Control in effect at time `t` (`u_k` on `(t_{k−1}, t_k]`, `u_1` at `t = 0`).
    pub fn at(&self, t: f64) -> Option<&[Vec3]> {
        if self.is_empty() || t < 0.0 || t > self.end_time() {
            return None;
        }
        let k = self.breakpoints[1..].partition_point(|&b| b < t);
        Some(self.controls(k.min(self.len() - 1)))
    }

    pub fn to_json(&self) -> String {
        let segs: Vec<Segment> = (0..self.len())
            .map(|k| {
                let (t_start, t_end) = self.interval(k);
                let c = self.controls(k);
                let u = if self.width == 1 {
                    SegmentControl::Single([c[0].x, c[0].y, c[0].z])
                } else {
                    SegmentControl::Multi(c.iter().map(|u| [u.x, u.y, u.z]).collect())
                };
                Segment { t_start, t_end, u }
            })
            .collect();
        serde_json::to_string_pretty(&segs).expect("signal serializes")
    }

    /// Parse a JSON array of `{t_start, t_end, u}` segments. Segments must be
    /// contiguous and start at zero. `width` is used when the array is empty.
    pub fn from_json(text: &str, width: usize) -> Result<Self> {
        let segs: Vec<Segment> = serde_json::from_str(text)?;
        let mut breakpoints = vec![0.0];
        let mut values = Vec::new();
        let mut seg_width = None;
        for s in &segs {
            if s.t_start != *breakpoints.last().unwrap() {
                return Err(invalid(format!(
                    "segment starting at {} is not contiguous with the previous end {}",
                    s.t_start,
                    breakpoints.last().unwrap()
                )));
            }
            breakpoints.push(s.t_end);
            let us: Vec<Vec3> = match &s.u {
                SegmentControl::Single(u) => vec![Vec3::from(*u)],
                SegmentControl::Multi(us) => us.iter().map(|u| Vec3::from(*u)).collect(),
            };
            if *seg_width.get_or_insert(us.len()) != us.len() {
                return Err(invalid("segments disagree on the number of controls"));
            }
            values.extend(us);
        }
        Self::build(breakpoints, seg_width.unwrap_or(width), values)
    }
}

/// Velocities of all particles (actives first) under controls `u`.
pub fn velocity_field(config: &ParticleConfiguration, u: &[Vec3]) -> Result<Vec<Vec3>> {
    if u.len() != config.n_active() {
        return Err(contract(format!(
            "need {} active controls, got {}",
            config.n_active(),
            u.len()
        )));
    }
    let a = config.radius();
    let mut vel = Vec::with_capacity(config.len());
    vel.extend_from_slice(u);
    for y in &config.passive {
        let mut s = Vec3::zeros();
        for (x, ui) in config.active.iter().zip(u) {
            s += stokeslet(&(y - x), a)? * *ui;
        }
        vel.push(s);
    }
    Ok(vel)
}

/// `ḋ_j = [(3a/(4|d_j|) − 1) I + (3a/(4|d_j|³)) d_j⊗d_j] u` for one active particle.
pub fn relative_velocity(config: &ParticleConfiguration, u: &Vec3) -> Result<Vec<Vec3>> {
    if config.n_active() != 1 {
        return Err(contract(format!(
            "relative form needs exactly one active particle, got {}",
            config.n_active()
        )));
    }
    let a = config.radius();
    let x = config.active[0];
    config
        .passive
        .iter()
        .map(|y| {
            let d = y - x;
            let r = d.norm();
            if r == 0.0 {
                return Err(Error::CoincidentParticles);
            }
            let c = 0.75 * a / r;
            Ok(u * (c - 1.0) + d * (c * d.dot(u) / (r * r)))
        })
        .collect()
}

fn advance(config: &ParticleConfiguration, vel: &[Vec3], dt: f64) -> Result<ParticleConfiguration> {
    let n = config.n_active();
    let active = config.active.iter().zip(vel).map(|(p, v)| p + v * dt).collect();
    let passive = config.passive.iter().zip(&vel[n..]).map(|(p, v)| p + v * dt).collect();
    ParticleConfiguration::new(active, passive, config.radius(), config.sep_radius())
}

/// One explicit Euler step. Fails if the result is not well separated.
pub fn step_euler(config: &ParticleConfiguration, u: &[Vec3], dt: f64) -> Result<ParticleConfiguration> {
    if !(dt > 0.0) {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let next = advance(config, &velocity_field(config, u)?, dt)?;
    match next.separation_violation() {
        Some(violation) => Err(Error::Separation { time: dt, violation }),
        None => Ok(next),
    }
}

fn step_rk4(config: &ParticleConfiguration, u: &[Vec3], dt: f64) -> Result<ParticleConfiguration> {
    let k1 = velocity_field(config, u)?;
    let k2 = velocity_field(&advance(config, &k1, dt / 2.0)?, u)?;
    let k3 = velocity_field(&advance(config, &k2, dt / 2.0)?, u)?;
    let k4 = velocity_field(&advance(config, &k3, dt)?, u)?;
    let vel: Vec<Vec3> = (0..k1.len())
        .map(|i| (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) / 6.0)
        .collect();
    advance(config, &vel, dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

/// Sub-stepping policy: each control interval is split into
/// `ceil(len / dt_max)` equal steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stepper {
    pub dt_max: f64,
    pub method: Integrator,
}

impl Stepper {
    pub fn euler(dt_max: f64) -> Self {
        Self {
            dt_max,
            method: Integrator::Euler,
        }
    }

    /// `R / (100 u_max)`: no particle can cross the `R` shell in one step.
    pub fn default_dt_max(sep_radius: f64, u_max: f64) -> f64 {
        sep_radius / (100.0 * u_max)
    }

    fn substeps(&self, len: f64) -> usize {
        ((len / self.dt_max).ceil() as usize).max(1)
    }

    /// Integrate one interval `[t0, t1]`, checking separation after every
    /// sub-step. `min_sep` is lowered to the smallest distance seen.
    fn run_interval(
        &self,
        config: &ParticleConfiguration,
        u: &[Vec3],
        t0: f64,
        t1: f64,
        min_sep: &mut f64,
    ) -> Result<ParticleConfiguration> {
        let steps = self.substeps(t1 - t0);
        let h = (t1 - t0) / steps as f64;
        let mut cur = config.clone();
        for s in 0..steps {
            cur = match self.method {
                Integrator::Euler => advance(&cur, &velocity_field(&cur, u)?, h)?,
                Integrator::Rk4 => step_rk4(&cur, u, h)?,
            };
            if cur.len() >= 2 {
                let (pair, d) = cur.closest_pair()?;
                *min_sep = min_sep.min(d);
                if !(d > cur.sep_radius()) {
                    return Err(Error::Separation {
                        time: t0 + h * (s + 1) as f64,
                        violation: crate::error::SeparationViolation {
                            pair,
                            distance: d,
                            sep_radius: cur.sep_radius(),
                        },
                    });
                }
            }
        }
        Ok(cur)
    }
}

/// States at every control breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ParticleConfiguration>,
    /// Smallest pairwise distance over all recorded states and sub-steps.
    pub min_separation: f64,
}

impl Trajectory {
    pub fn start(config: ParticleConfiguration) -> Result<Self> {
        if let Some(violation) = config.separation_violation() {
            return Err(Error::Separation { time: 0.0, violation });
        }
        let min_separation = config.min_separation().unwrap_or(f64::INFINITY);
        Ok(Self {
            times: vec![0.0],
            states: vec![config],
            min_separation,
        })
    }

    pub fn last(&self) -> &ParticleConfiguration {
        self.states.last().expect("trajectory is never empty")
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.times.truncate(n);
        self.states.truncate(n);
    }

    /// Integrate intervals `from..signal.len()` of `signal`, appending the
    /// state at each breakpoint. The trajectory must already hold the state
    /// at breakpoint `from`.
    pub fn extend(&mut self, signal: &ControlSignal, from: usize, stepper: &Stepper) -> Result<()> {
        if self.len() != from + 1 {
            return Err(contract(format!(
                "trajectory holds {} states but extension starts at interval {from}",
                self.len()
            )));
        }
        if signal.width() != self.last().n_active() {
            return Err(contract(format!(
                "signal drives {} actives, configuration has {}",
                signal.width(),
                self.last().n_active()
            )));
        }
        for k in from..signal.len() {
            let (t0, t1) = signal.interval(k);
            let mut min_sep = self.min_separation;
            let res = stepper.run_interval(self.last(), signal.controls(k), t0, t1, &mut min_sep);
            self.min_separation = min_sep;
            let next = res?;
            self.times.push(t1);
            self.states.push(next);
        }
        Ok(())
    }

    /// CSV with header `t,x1x,x1y,x1z,…,y1x,…`; 17 significant digits.
    pub fn to_csv(&self) -> String {
        let first = &self.states[0];
        let mut out = String::from("t");
        for i in 1..=first.n_active() {
            for c in ["x", "y", "z"] {
                out.push_str(&format!(",x{i}{c}"));
            }
        }
        for j in 1..=first.n_passive() {
            for c in ["x", "y", "z"] {
                out.push_str(&format!(",y{j}{c}"));
            }
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            out.push_str(&fmt_f64(*t));
            for p in s.positions() {
                for c in p.iter() {
                    out.push(',');
                    out.push_str(&fmt_f64(*c));
                }
            }
            out.push('\n');
        }
        out
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Integration stopped early; `partial` holds every state reached.
#[derive(Debug, thiserror::Error)]
#[error("{error}")]
pub struct Aborted {
    pub error: Error,
    pub partial: Trajectory,
}

impl From<Aborted> for Error {
    fn from(a: Aborted) -> Self {
        a.error
    }
}

/// Euler integration with sub-steps of at most `dt_max`.
pub fn integrate(
    config0: &ParticleConfiguration,
    signal: &ControlSignal,
    dt_max: f64,
) -> std::result::Result<Trajectory, Aborted> {
    integrate_with(config0, signal, &Stepper::euler(dt_max))
}

pub fn integrate_with(
    config0: &ParticleConfiguration,
    signal: &ControlSignal,
    stepper: &Stepper,
) -> std::result::Result<Trajectory, Aborted> {
    let mut traj = match Trajectory::start(config0.clone()) {
        Ok(t) => t,
        Err(error) => {
            return Err(Aborted {
                error,
                partial: Trajectory {
                    times: vec![0.0],
                    states: vec![config0.clone()],
                    min_separation: config0.min_separation().unwrap_or(f64::INFINITY),
                },
            })
        }
    };
    if !(stepper.dt_max > 0.0) {
        return Err(Aborted {
            error: invalid(format!("dt_max must be positive, got {}", stepper.dt_max)),
            partial: traj,
        });
    }
    match traj.extend(signal, 0, stepper) {
        Ok(()) => Ok(traj),
        Err(error) => Err(Aborted { error, partial: traj }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hydro::mobility_stack;
    use nalgebra::DVector;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    fn pair(d: Vec3) -> ParticleConfiguration {
        ParticleConfiguration::new(vec![Vec3::zeros()], vec![d], 1.0, 1.0).unwrap()
    }

    #[test]
    fn velocity_examples() {
        let c = ParticleConfiguration::new(vec![v(0., 0., 0.)], vec![], 1.0, 1.0).unwrap();
        assert_eq!(velocity_field(&c, &[v(1., 2., 3.)]).unwrap(), vec![v(1., 2., 3.)]);
        let c = pair(v(2., 0., 0.));
        let vel = velocity_field(&c, &[v(1., 0., 0.)]).unwrap();
        assert_eq!(vel[1], v(0.75, 0., 0.));
        assert!(matches!(velocity_field(&c, &[]), Err(Error::Contract(_))));
    }

    #[test]
    fn velocity_matches_mobility_stack() {
        let c = ParticleConfiguration::new(
            vec![v(0.3, -1.0, 2.0), v(14.0, 3.0, -2.0)],
            vec![v(-11.0, 4.0, 1.0), v(5.0, 19.0, 7.0)],
            1.0,
            10.0,
        )
        .unwrap();
        assert!(c.is_well_separated());
        let u = [v(0.2, -0.7, 1.1), v(-0.4, 0.5, 0.9)];
        let h = mobility_stack(&c).unwrap();
        let us = DVector::from_iterator(6, u.iter().flat_map(|x| x.iter().copied()));
        let expect = h * us;
        let got = velocity_field(&c, &u).unwrap();
        for (k, g) in got.iter().enumerate() {
            for c in 0..3 {
                assert!((g[c] - expect[3 * k + c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn euler_step_examples() {
        let c = pair(v(2., 0., 0.));
        assert_eq!(step_euler(&c, &[Vec3::zeros()], 0.1).unwrap(), c);
        let next = step_euler(&c, &[v(1., 0., 0.)], 0.1).unwrap();
        assert_eq!(next.active[0], v(0.1, 0., 0.));
        assert!((next.passive[0] - v(2.075, 0., 0.)).norm() < 1e-15);
        let lone = ParticleConfiguration::new(vec![v(0., 0., 0.)], vec![], 1.0, 1.0).unwrap();
        assert_eq!(step_euler(&lone, &[v(1., 0., 0.)], 0.1).unwrap().active[0], v(0.1, 0., 0.));
    }

    #[test]
    fn euler_step_reports_violation() {
        let c = ParticleConfiguration::new(vec![Vec3::zeros()], vec![v(12., 0., 0.)], 1.0, 10.0).unwrap();
        let err = step_euler(&c, &[v(5., 0., 0.)], 1.0).unwrap_err();
        assert!(matches!(err, Error::Separation { .. }));
    }

    #[test]
    fn relative_velocity_examples() {
        let r = 7.0;
        let c = pair(v(r, 0., 0.));
        let dd = relative_velocity(&c, &v(1., 0., 0.)).unwrap();
        assert!((dd[0].x - (1.5 / r - 1.0)).abs() < 1e-15);
        assert_eq!((dd[0].y, dd[0].z), (0.0, 0.0));
        let c = ParticleConfiguration::new(vec![v(1., 2., 3.)], vec![v(-4., 8., 5.5)], 1.0, 1.0).unwrap();
        let u = v(0.3, -0.2, 0.9);
        let vel = velocity_field(&c, &[u]).unwrap();
        let dd = relative_velocity(&c, &u).unwrap();
        assert!((dd[0] - (vel[1] - u)).norm() < 1e-15);
        let two = ParticleConfiguration::new(vec![v(0., 0., 0.), v(9., 0., 0.)], vec![], 1.0, 1.0).unwrap();
        assert!(matches!(relative_velocity(&two, &u), Err(Error::Contract(_))));
    }

    #[test]
    fn relative_velocity_small_radius_limit() {
        let c = ParticleConfiguration::new(vec![Vec3::zeros()], vec![v(0., 0., 5.)], 1e-300, 1.0).unwrap();
        let dd = relative_velocity(&c, &v(1., 0., 0.)).unwrap();
        assert_eq!(dd[0], v(-1., 0., 0.));
    }

    #[test]
    fn single_active_integration_is_exact() {
        let c = ParticleConfiguration::new(vec![v(1., 2., 3.)], vec![], 1.0, 1.0).unwrap();
        let sig = ControlSignal::single(vec![0.0, 1.0], vec![v(0.5, -1.0, 2.0)]).unwrap();
        for dt in [1.0, 0.3, 0.01] {
            let tr = integrate(&c, &sig, dt).unwrap();
            assert!((tr.last().active[0] - v(1.5, 1.0, 5.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_signal_keeps_configuration() {
        let c = pair(v(12., 0., 1.));
        let sig = ControlSignal::single(vec![0.0, 0.5, 2.0], vec![Vec3::zeros(); 2]).unwrap();
        let tr = integrate(&c, &sig, 0.1).unwrap();
        assert_eq!(tr.len(), 3);
        assert!(tr.states.iter().all(|s| *s == c));
    }

    #[test]
    fn integration_aborts_with_partial() {
        let c = ParticleConfiguration::new(vec![Vec3::zeros()], vec![v(12., 0., 0.)], 1.0, 10.0).unwrap();
        let sig = ControlSignal::single(vec![0.0, 0.5, 5.0], vec![v(0., 1., 0.), v(1., 0., 0.)]).unwrap();
        let err = integrate(&c, &sig, 0.1).unwrap_err();
        assert_eq!(err.partial.len(), 2);
        match err.error {
            Error::Separation { time, .. } => assert!(time > 0.5 && time < 5.0),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn one_interval_one_substep_equals_euler_step() {
        let c = pair(v(3., 4., -2.));
        let u = v(0.2, 0.1, -0.3);
        let sig = ControlSignal::single(vec![0.0, 0.25], vec![u]).unwrap();
        let tr = integrate(&c, &sig, 1.0).unwrap();
        assert_eq!(*tr.last(), step_euler(&c, &[u], 0.25).unwrap());
    }

    #[test]
    fn signal_lookup_uses_left_open_intervals() {
        let sig = ControlSignal::single(vec![0.0, 1.0, 2.0], vec![v(1., 0., 0.), v(2., 0., 0.)]).unwrap();
        assert_eq!(sig.at(0.0).unwrap()[0].x, 1.0);
        assert_eq!(sig.at(1.0).unwrap()[0].x, 1.0);
        assert_eq!(sig.at(1.0 + 1e-12).unwrap()[0].x, 2.0);
        assert!(sig.at(2.5).is_none());
    }

    #[test]
    fn signal_rejects_bad_grids() {
        assert!(ControlSignal::single(vec![0.0, 1.0, 1.0], vec![Vec3::zeros(); 2]).is_err());
        assert!(ControlSignal::single(vec![0.5, 1.0], vec![Vec3::zeros()]).is_err());
        assert!(ControlSignal::single(vec![0.0, 1.0], vec![]).is_err());
        assert!(ControlSignal::single(vec![0.0, 1.0], vec![v(f64::NAN, 0., 0.)]).is_err());
    }

    #[test]
    fn signal_json_round_trip() {
        let mut sig = ControlSignal::empty(1);
        sig.push(0.1, &[v(1.0, 0.0, 0.0)]).unwrap();
        sig.push(0.3, &[v(0.0, -1.0 / 3.0, 0.0)]).unwrap();
        let back = ControlSignal::from_json(&sig.to_json(), 1).unwrap();
        assert_eq!(sig, back);
        let multi = ControlSignal::new(vec![0.0, 2.0], vec![vec![v(1., 0., 0.), v(0., 1., 0.)]]).unwrap();
        assert_eq!(ControlSignal::from_json(&multi.to_json(), 2).unwrap(), multi);
    }

    #[test]
    fn csv_header_and_rows() {
        let c = pair(v(12., 0., 0.));
        let tr = Trajectory::start(c).unwrap();
        let csv = tr.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "t,x1x,x1y,x1z,y1x,y1y,y1z");
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 0.0, 0.0, 0.0, 12.0, 0.0, 0.0]);
    }
}
