//! Far-field hydrodynamic coupling between equal spheres.
//!
//! An active sphere translating with velocity `u` drags a sphere at offset
//! `d` with velocity `G(d) u`, where
//!
//! ```text
//! G(d) = (3a/4) (I/|d| + d⊗d/|d|³)
//! ```
//!
//! is the leading-order (Stokeslet) mobility normalised by the active drag.
//! Higher reflections and the finite-size `a²∇²/3` term are not included, so
//! every routine here assumes the configuration stays well separated.

use std::fmt;
use std::ops::Mul;

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result, SeparationViolation};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Symmetric 3×3 velocity-coupling factor between two spheres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionTensor(Mat3);

impl InteractionTensor {
    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn into_inner(self) -> Mat3 {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn column(&self, l: usize) -> Vec3 {
        self.0.column(l).into_owned()
    }
}

impl Mul<Vec3> for InteractionTensor {
    type Output = Vec3;

    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

impl Mul<&Vec3> for &InteractionTensor {
    type Output = Vec3;

    fn mul(self, rhs: &Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Stokeslet coupling `G(d) = (3a/4)(I/|d| + d⊗d/|d|³)`.
///
/// Entries are filled for `i <= j` and mirrored, so the result is exactly
/// symmetric.
pub fn stokeslet(d: &Vec3, a: f64) -> Result<InteractionTensor> {
    let r2 = d.norm_squared();
    if r2 == 0.0 {
        return Err(Error::CoincidentParticles);
    }
    if !r2.is_finite() {
        return Err(Error::NonFinite("separation vector"));
    }
    let r = r2.sqrt();
    let c = 0.75 * a / r;
    let c3 = c / r2;
    let mut m = Mat3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let mut v = c3 * d[i] * d[j];
            if i == j {
                v += c;
            }
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(InteractionTensor(m))
}

/// Directional derivative of the Stokeslet, `∂G/∂d · h`.
///
/// With `r = |d|` and `s = d·h`:
/// `(3a/4)[ −s I/r³ + (h⊗d + d⊗h)/r³ − 3 s d⊗d/r⁵ ]`.
pub fn stokeslet_derivative(d: &Vec3, h: &Vec3, a: f64) -> Result<Mat3> {
    let r2 = d.norm_squared();
    if r2 == 0.0 {
        return Err(Error::CoincidentParticles);
    }
    let r = r2.sqrt();
    let r3 = r2 * r;
    let s = d.dot(h);
    let k = 0.75 * a;
    let m = Mat3::identity() * (-s / r3) + (h * d.transpose() + d * h.transpose()) / r3
        - d * d.transpose() * (3.0 * s / (r3 * r2));
    Ok(m * k)
}

/// Index of a particle in either population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairIndex {
    Active(usize),
    Passive(usize),
}

impl fmt::Display for PairIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairIndex::Active(i) => write!(f, "active[{i}]"),
            PairIndex::Passive(j) => write!(f, "passive[{j}]"),
        }
    }
}

/// Positions of `N` active and `M` passive spheres of common radius `a`,
/// together with the separation radius `R` of the far-field regime.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfiguration {
    pub active: Vec<Vec3>,
    pub passive: Vec<Vec3>,
    radius: f64,
    sep_radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ConfigurationFile {
    active: Vec<[f64; 3]>,
    #[serde(default)]
    passive: Vec<[f64; 3]>,
    radius: f64,
    sep_radius: f64,
}

impl ParticleConfiguration {
    pub fn new(active: Vec<Vec3>, passive: Vec<Vec3>, radius: f64, sep_radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {radius}")));
        }
        if !(sep_radius > 0.0 && sep_radius.is_finite()) {
            return Err(invalid(format!("sep_radius must be positive, got {sep_radius}")));
        }
        if active.iter().chain(&passive).any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("particle position"));
        }
        Ok(Self {
            active,
            passive,
            radius,
            sep_radius,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn sep_radius(&self) -> f64 {
        self.sep_radius
    }

    pub fn n_active(&self) -> usize {
        self.active.len()
    }

    pub fn n_passive(&self) -> usize {
        self.passive.len()
    }

    pub fn len(&self) -> usize {
        self.active.len() + self.passive.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn position(&self, idx: PairIndex) -> &Vec3 {
        match idx {
            PairIndex::Active(i) => &self.active[i],
            PairIndex::Passive(j) => &self.passive[j],
        }
    }

    /// All positions, actives first.
    pub fn positions(&self) -> impl Iterator<Item = &Vec3> {
        self.active.iter().chain(self.passive.iter())
    }

    fn index_of(&self, k: usize) -> PairIndex {
        if k < self.active.len() {
            PairIndex::Active(k)
        } else {
            PairIndex::Passive(k - self.active.len())
        }
    }

    /// Flattened state `(x_1, …, x_N, y_1, …, y_M)` of length `3(N+M)`.
    pub fn state(&self) -> Vec<f64> {
        self.positions().flat_map(|p| p.iter().copied()).collect()
    }

    /// Same particle counts and radii, new positions from a flat state.
    pub fn with_state(&self, z: &[f64]) -> Result<Self> {
        if z.len() != 3 * self.len() {
            return Err(invalid(format!(
                "state has length {}, expected {}",
                z.len(),
                3 * self.len()
            )));
        }
        let pts: Vec<Vec3> = z.chunks_exact(3).map(Vec3::from_column_slice).collect();
        let (a, p) = pts.split_at(self.active.len());
        Self::new(a.to_vec(), p.to_vec(), self.radius, self.sep_radius)
    }

    /// Same shape and radii as `other` (used to validate start/goal pairs).
    pub fn same_shape(&self, other: &Self) -> bool {
        self.active.len() == other.active.len()
            && self.passive.len() == other.passive.len()
            && self.radius == other.radius
            && self.sep_radius == other.sep_radius
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ConfigurationFile = serde_json::from_str(text)?;
        Self::new(
            raw.active.iter().map(|p| Vec3::from(*p)).collect(),
            raw.passive.iter().map(|p| Vec3::from(*p)).collect(),
            raw.radius,
            raw.sep_radius,
        )
    }

    pub fn to_json(&self) -> String {
        let raw = ConfigurationFile {
            active: self.active.iter().map(|p| [p.x, p.y, p.z]).collect(),
            passive: self.passive.iter().map(|p| [p.x, p.y, p.z]).collect(),
            radius: self.radius,
            sep_radius: self.sep_radius,
        };
        serde_json::to_string_pretty(&raw).expect("configuration serializes")
    }

    /// Closest unordered pair over both populations, with its distance.
    pub fn closest_pair(&self) -> Result<((PairIndex, PairIndex), f64)> {
        let n = self.len();
        if n < 2 {
            return Err(Error::TooFewParticles(n));
        }
        let pts: Vec<&Vec3> = self.positions().collect();
        let mut best = (0, 1, f64::INFINITY);
        for i in 0..n {
            for j in i + 1..n {
                let d = (pts[j] - pts[i]).norm();
                if d < best.2 {
                    best = (i, j, d);
                }
            }
        }
        Ok(((self.index_of(best.0), self.index_of(best.1)), best.2))
    }

    pub fn min_separation(&self) -> Result<f64> {
        self.closest_pair().map(|(_, d)| d)
    }

    /// Strictly greater than `R` between every pair. Fewer than two
    /// particles is trivially well separated.
    pub fn is_well_separated(&self) -> bool {
        match self.closest_pair() {
            Ok((_, d)) => d > self.sep_radius,
            Err(_) => true,
        }
    }

    /// The offending pair, if any.
    pub fn separation_violation(&self) -> Option<SeparationViolation> {
        match self.closest_pair() {
            Ok((pair, d)) if !(d > self.sep_radius) => Some(SeparationViolation {
                pair,
                distance: d,
                sep_radius: self.sep_radius,
            }),
            _ => None,
        }
    }
}

pub fn min_separation(config: &ParticleConfiguration) -> Result<f64> {
    config.min_separation()
}

pub fn is_well_separated(config: &ParticleConfiguration) -> bool {
    config.is_well_separated()
}

/// The `3(N+M) × 3N` matrix `H` with `ż = H u`: identity on the active rows,
/// and block `(j, i)` of the passive rows equal to `G(y_j − x_i)`.
pub fn mobility_stack(config: &ParticleConfiguration) -> Result<DMatrix<f64>> {
    let n = config.n_active();
    let m = config.n_passive();
    let mut h = DMatrix::zeros(3 * (n + m), 3 * n);
    for k in 0..3 * n {
        h[(k, k)] = 1.0;
    }
    for (j, y) in config.passive.iter().enumerate() {
        for (i, x) in config.active.iter().enumerate() {
            let g = stokeslet(&(y - x), config.radius())?;
            h.fixed_view_mut::<3, 3>(3 * (n + j), 3 * i).copy_from(g.matrix());
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(x: f64, y: f64, z: f64) -> Vec3 {
        Vec3::new(x, y, z)
    }

    #[test]
    fn stokeslet_on_axis() {
        let g = stokeslet(&v(2.0, 0.0, 0.0), 1.0).unwrap();
        assert_eq!(*g.matrix(), Mat3::from_diagonal(&v(0.75, 0.375, 0.375)));
    }

    #[test]
    fn stokeslet_trace() {
        let g = stokeslet(&v(6.0, 0.0, 8.0), 1.0).unwrap();
        assert!((g.trace() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn stokeslet_rejects_zero() {
        assert!(matches!(
            stokeslet(&Vec3::zeros(), 1.0),
            Err(Error::CoincidentParticles)
        ));
    }

    #[test]
    fn stokeslet_derivative_matches_central_difference() {
        let d = v(3.0, -4.0, 7.5);
        let h = v(0.3, 0.9, -0.2);
        let eps = 1e-6;
        let fd = (stokeslet(&(d + h * eps), 2.0).unwrap().into_inner()
            - stokeslet(&(d - h * eps), 2.0).unwrap().into_inner())
            / (2.0 * eps);
        let an = stokeslet_derivative(&d, &h, 2.0).unwrap();
        assert!((fd - an).norm() < 1e-9, "{fd} vs {an}");
    }

    #[test]
    fn min_separation_examples() {
        let c = ParticleConfiguration::new(vec![v(0., 0., 0.)], vec![v(3., 4., 0.)], 1.0, 1.0).unwrap();
        assert_eq!(c.min_separation().unwrap(), 5.0);
        let c = ParticleConfiguration::new(
            vec![v(0., 0., 0.)],
            vec![v(2., 0., 0.), v(5., 0., 0.)],
            1.0,
            1.0,
        )
        .unwrap();
        assert_eq!(c.min_separation().unwrap(), 2.0);
        let c = ParticleConfiguration::new(vec![v(0., 0., 0.)], vec![], 1.0, 1.0).unwrap();
        assert!(matches!(c.min_separation(), Err(Error::TooFewParticles(1))));
    }

    #[test]
    fn well_separated_is_strict() {
        let c = ParticleConfiguration::new(vec![v(0., 0., 0.)], vec![v(2.5, 0., 0.)], 0.1, 2.0).unwrap();
        assert!(c.is_well_separated());
        let c = ParticleConfiguration::new(vec![v(0., 0., 0.)], vec![v(2.0, 0., 0.)], 0.1, 2.0).unwrap();
        assert!(!c.is_well_separated());
        let viol = c.separation_violation().unwrap();
        assert_eq!(viol.pair, (PairIndex::Active(0), PairIndex::Passive(0)));
    }

    #[test]
    fn rejects_bad_radii() {
        assert!(ParticleConfiguration::new(vec![], vec![], 0.0, 1.0).is_err());
        assert!(ParticleConfiguration::new(vec![], vec![], 1.0, -1.0).is_err());
    }

    #[test]
    fn mobility_stack_small_cases() {
        let c = ParticleConfiguration::new(vec![v(1., 2., 3.)], vec![], 1.0, 1.0).unwrap();
        assert_eq!(mobility_stack(&c).unwrap(), DMatrix::identity(3, 3));
        let c = ParticleConfiguration::new(vec![v(0., 0., 0.)], vec![v(2., 0., 0.)], 1.0, 1.0).unwrap();
        let h = mobility_stack(&c).unwrap();
        assert_eq!(
            h.view((3, 0), (3, 3)).into_owned(),
            DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.75, 0.375, 0.375]))
        );
    }

    #[test]
    fn json_round_trip() {
        let c = ParticleConfiguration::new(vec![v(0.1, 0.2, 0.3)], vec![v(12., 0., 0.)], 1.0, 10.0).unwrap();
        let back = ParticleConfiguration::from_json(&c.to_json()).unwrap();
        assert_eq!(c, back);
    }

    fn arb_vec() -> impl Strategy<Value = Vec3> {
        (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| v(x, y, z))
    }

    proptest! {
        #[test]
        fn stokeslet_even_and_homogeneous(d in arb_vec(), lam in 0.1..10.0f64, a in 0.01..2.0f64) {
            prop_assume!(d.norm() > 1e-3);
            let g = stokeslet(&d, a).unwrap().into_inner();
            let gm = stokeslet(&(-d), a).unwrap().into_inner();
            prop_assert_eq!(g, gm);
            let gl = stokeslet(&(d * lam), a).unwrap().into_inner();
            prop_assert!((gl * lam - g).norm() <= 1e-12 * g.norm());
        }

        #[test]
        fn min_separation_matches_brute_force(pts in proptest::collection::vec(arb_vec(), 2..10), n_act in 0usize..10) {
            let n_act = n_act.min(pts.len());
            let c = ParticleConfiguration::new(pts[..n_act].to_vec(), pts[n_act..].to_vec(), 1.0, 5.0).unwrap();
            let mut best = f64::INFINITY;
            for i in 0..pts.len() {
                for j in 0..pts.len() {
                    if i != j {
                        best = best.min((pts[i] - pts[j]).norm());
                    }
                }
            }
            prop_assert_eq!(c.min_separation().unwrap(), best);
            prop_assert_eq!(c.is_well_separated(), best > 5.0);
        }
    }
}
