use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::jet::{self, Jet, JetSpace, Scalar};
use crate::error::{contract, invalid, Error, Result};
use crate::hydro::ParticleConfiguration;

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    /// State `(x_1..x_N, y_1..y_M)`; field `3i + ℓ` moves active `i` along `e^ℓ`.
    Full { n_active: usize, n_passive: usize, a: f64 },
    /// State `(d_1..d_M)` with `d_j = y_j − x` for a single active.
    Relative { n_passive: usize, a: f64 },
    /// `f_ℓ(z) = A_ℓ z + b_ℓ`.
    Affine(Vec<(DMatrix<f64>, DVector<f64>)>),
}

/// Control vector fields `g^1..g^m` of a driftless system on `ℝⁿ`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSet {
    kind: Kind,
}

/// Which derivative engine to use for bracket evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffMode {
    /// Exact derivatives through truncated Taylor arithmetic.
    #[default]
    Analytic,
    /// Nested central differences with step `1e-5·max(1, |z|)`.
    FiniteDifference,
}

fn stokeslet_column<S: Scalar>(d: [&S; 3], l: usize, a: f64) -> Result<[S; 3]> {
    let r2 = d[0].clone() * d[0].clone() + d[1].clone() * d[1].clone() + d[2].clone() * d[2].clone();
    if r2.value() == 0.0 {
        return Err(Error::CoincidentParticles);
    }
    let ir = r2.powf(-0.5);
    let ir3 = r2.powf(-1.5);
    let c = 0.75 * a;
    let dl = d[l].clone() * ir3;
    Ok(std::array::from_fn(|k| {
        let mut v = d[k].clone() * dl.clone();
        if k == l {
            v = v + ir.clone();
        }
        v * c
    }))
}

impl VectorFieldSet {
    /// Fields of `N` actives driving `M` passives in the lab frame.
    pub fn full(n_active: usize, n_passive: usize, a: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {a}")));
        }
        if n_active == 0 {
            return Err(invalid("need at least one active particle"));
        }
        Ok(Self {
            kind: Kind::Full { n_active, n_passive, a },
        })
    }

    /// Fields of one active and `M` passives in relative coordinates:
    /// column `ℓ` of `G(d_j) − I` stacked over `j`.
    pub fn relative(n_passive: usize, a: f64) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(invalid(format!("radius must be nonnegative, got {a}")));
        }
        if n_passive == 0 {
            return Err(invalid("need at least one passive particle"));
        }
        Ok(Self {
            kind: Kind::Relative { n_passive, a },
        })
    }

    /// Affine fields `A_ℓ z + b_ℓ`, mainly for tests.
    pub fn affine(fields: Vec<(DMatrix<f64>, DVector<f64>)>) -> Result<Self> {
        let n = fields.first().map(|f| f.1.len()).ok_or_else(|| invalid("no fields"))?;
        if fields.iter().any(|(m, b)| m.nrows() != n || m.ncols() != n || b.len() != n) {
            return Err(invalid("affine fields need n×n matrices and length-n offsets"));
        }
        Ok(Self {
            kind: Kind::Affine(fields),
        })
    }

    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        match &self.kind {
            Kind::Full { n_active, n_passive, .. } => 3 * (n_active + n_passive),
            Kind::Relative { n_passive, .. } => 3 * n_passive,
            Kind::Affine(f) => f[0].1.len(),
        }
    }

    /// Number of control fields `m`.
    pub fn len(&self) -> usize {
        match &self.kind {
            Kind::Full { n_active, .. } => 3 * n_active,
            Kind::Relative { .. } => 3,
            Kind::Affine(f) => f.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lab-frame state of a configuration matching this field set.
    pub fn state_of(&self, config: &ParticleConfiguration) -> Result<Vec<f64>> {
        match &self.kind {
            Kind::Full { n_active, n_passive, .. } => {
                if config.n_active() != *n_active || config.n_passive() != *n_passive {
                    return Err(contract(format!(
                        "field set is {n_active}+{n_passive}, configuration is {}+{}",
                        config.n_active(),
                        config.n_passive()
                    )));
                }
                Ok(config.state())
            }
            Kind::Relative { n_passive, .. } => {
                if config.n_active() != 1 || config.n_passive() != *n_passive {
                    return Err(contract(format!(
                        "relative field set needs 1+{n_passive}, configuration is {}+{}",
                        config.n_active(),
                        config.n_passive()
                    )));
                }
                let x = config.active[0];
                Ok(config.passive.iter().flat_map(|y| (y - x).iter().copied().collect::<Vec<_>>()).collect())
            }
            Kind::Affine(_) => Err(contract("affine field sets have no particle state")),
        }
    }

    fn check_state(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(contract(format!("state has length {len}, fields live in dimension {}", self.dim())));
        }
        Ok(())
    }

    fn field_generic<S: Scalar>(&self, l: usize, z: &[S]) -> Result<Vec<S>> {
        if l >= self.len() {
            return Err(contract(format!("field index {l} out of range 0..{}", self.len())));
        }
        self.check_state(z.len())?;
        let zero = z[0].lift(0.0);
        let mut out = vec![zero; z.len()];
        match &self.kind {
            Kind::Full { n_active, n_passive, a } => {
                let (i, c) = (l / 3, l % 3);
                out[3 * i + c] = z[0].lift(1.0);
                for j in 0..*n_passive {
                    let (y, x) = (3 * (n_active + j), 3 * i);
                    let d: [S; 3] = std::array::from_fn(|k| z[y + k].clone() - z[x + k].clone());
                    let col = stokeslet_column([&d[0], &d[1], &d[2]], c, *a)?;
                    for (k, v) in col.into_iter().enumerate() {
                        out[y + k] = v;
                    }
                }
            }
            Kind::Relative { n_passive, a } => {
                for j in 0..*n_passive {
                    let d = [&z[3 * j], &z[3 * j + 1], &z[3 * j + 2]];
                    let mut col = stokeslet_column(d, l, *a)?;
                    col[l] = col[l].clone() + z[0].lift(-1.0);
                    for (k, v) in col.into_iter().enumerate() {
                        out[3 * j + k] = v;
                    }
                }
            }
            Kind::Affine(f) => {
                let (m, b) = &f[l];
                for (r, o) in out.iter_mut().enumerate() {
                    let mut acc = z[0].lift(b[r]);
                    for (c, zc) in z.iter().enumerate() {
                        if m[(r, c)] != 0.0 {
                            acc = acc + zc.clone() * m[(r, c)];
                        }
                    }
                    *o = acc;
                }
            }
        }
        if out.iter().any(|v| !v.value().is_finite()) {
            return Err(Error::NonFinite("vector field"));
        }
        Ok(out)
    }

    /// `g^ℓ(z)`.
    pub fn field(&self, l: usize, z: &[f64]) -> Result<DVector<f64>> {
        Ok(DVector::from_vec(self.field_generic(l, z)?))
    }

    /// All fields as columns of an `n × m` matrix.
    pub fn field_matrix(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        let cols = (0..self.len()).map(|l| self.field(l, z)).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_columns(&cols))
    }

    /// Exact Jacobian `Dg^ℓ(z)`.
    pub fn jacobian(&self, l: usize, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check_state(z.len())?;
        let space = JetSpace::new(z.len(), 1);
        let zj: Vec<Jet> = z.iter().enumerate().map(|(k, &v)| Jet::variable(&space, k, v)).collect();
        let g = self.field_generic(l, &zj)?;
        Ok(DMatrix::from_fn(z.len(), z.len(), |r, c| g[r].gradient()[c]))
    }

    /// Central-difference Jacobian with step `h`.
    pub fn jacobian_fd(&self, l: usize, z: &[f64], h: f64) -> Result<DMatrix<f64>> {
        jacobian_fd(|p| self.field(l, p), z, h)
    }

    /// Evaluate bracket expressions at `z`.
    pub fn eval(&self, exprs: &[BracketExpr], z: &[f64], mode: DiffMode) -> Result<Vec<DVector<f64>>> {
        self.check_state(z.len())?;
        for e in exprs {
            e.check(self.len())?;
        }
        match mode {
            DiffMode::Analytic => {
                let depth = exprs.iter().map(BracketExpr::depth).max().unwrap_or(1);
                let space = JetSpace::new(z.len(), depth - 1);
                let zj: Vec<Jet> = z.iter().enumerate().map(|(k, &v)| Jet::variable(&space, k, v)).collect();
                let mut memo = HashMap::new();
                exprs
                    .iter()
                    .map(|e| {
                        let v = self.eval_jet(e, &zj, &mut memo)?;
                        Ok(DVector::from_iterator(v.len(), v.iter().map(Jet::value)))
                    })
                    .collect()
            }
            DiffMode::FiniteDifference => exprs.iter().map(|e| self.eval_fd(e, z)).collect(),
        }
    }

    fn eval_jet(&self, e: &BracketExpr, z: &[Jet], memo: &mut HashMap<BracketExpr, Vec<Jet>>) -> Result<Vec<Jet>> {
        if let Some(v) = memo.get(e) {
            return Ok(v.clone());
        }
        let v = match e {
            BracketExpr::Gen(l) => self.field_generic(*l, z)?,
            BracketExpr::Br(f, g) => {
                let fv = self.eval_jet(f, z, memo)?;
                let gv = self.eval_jet(g, z, memo)?;
                jet::bracket(&fv, &gv)
            }
        };
        memo.insert(e.clone(), v.clone());
        Ok(v)
    }

    fn eval_fd(&self, e: &BracketExpr, z: &[f64]) -> Result<DVector<f64>> {
        match e {
            BracketExpr::Gen(l) => self.field(*l, z),
            BracketExpr::Br(f, g) => {
                let h = fd_step(z);
                let fv = self.eval_fd(f, z)?;
                let gv = self.eval_fd(g, z)?;
                let df = jacobian_fd(|p| self.eval_fd(f, p), z, h)?;
                let dg = jacobian_fd(|p| self.eval_fd(g, p), z, h)?;
                Ok(dg * fv - df * gv)
            }
        }
    }
}

/// Default finite-difference step `1e-5·max(1, |z|)`.
pub fn fd_step(z: &[f64]) -> f64 {
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    1e-5 * norm.max(1.0)
}

fn jacobian_fd(f: impl Fn(&[f64]) -> Result<DVector<f64>>, z: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = z.len();
    let mut p = z.to_vec();
    let mut jac = DMatrix::zeros(0, 0);
    for c in 0..n {
        p[c] = z[c] + h;
        let fp = f(&p)?;
        p[c] = z[c] - h;
        let fm = f(&p)?;
        p[c] = z[c];
        if c == 0 {
            jac = DMatrix::zeros(fp.len(), n);
        }
        jac.set_column(c, &((fp - fm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Iterated Lie bracket of generator fields.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum BracketExpr {
    Gen(usize),
    Br(Box<BracketExpr>, Box<BracketExpr>),
}

impl BracketExpr {
    pub fn gen(l: usize) -> Self {
        Self::Gen(l)
    }

    /// `[f, g]`.
    pub fn br(f: BracketExpr, g: BracketExpr) -> Self {
        Self::Br(Box::new(f), Box::new(g))
    }

    /// Number of generators in the expression.
    pub fn depth(&self) -> usize {
        match self {
            Self::Gen(_) => 1,
            Self::Br(f, g) => f.depth() + g.depth(),
        }
    }

    fn check(&self, m: usize) -> Result<()> {
        match self {
            Self::Gen(l) if *l >= m => Err(contract(format!("generator {l} out of range 0..{m}"))),
            Self::Gen(_) => Ok(()),
            Self::Br(f, g) => f.check(m).and(g.check(m)),
        }
    }

    /// Parse labels like `g2` or `[g1,[g2,g3]]` (generators are 1-based).
    pub fn parse(s: &str) -> Result<Self> {
        fn go(s: &[u8], i: &mut usize) -> Result<BracketExpr> {
            while *i < s.len() && s[*i] == b' ' {
                *i += 1;
            }
            match s.get(*i) {
                Some(b'[') => {
                    *i += 1;
                    let f = go(s, i)?;
                    while *i < s.len() && s[*i] == b' ' {
                        *i += 1;
                    }
                    if s.get(*i) != Some(&b',') {
                        return Err(invalid("expected ',' in bracket label"));
                    }
                    *i += 1;
                    let g = go(s, i)?;
                    while *i < s.len() && s[*i] == b' ' {
                        *i += 1;
                    }
                    if s.get(*i) != Some(&b']') {
                        return Err(invalid("expected ']' in bracket label"));
                    }
                    *i += 1;
                    Ok(BracketExpr::br(f, g))
                }
                Some(b'g') => {
                    *i += 1;
                    let start = *i;
                    while *i < s.len() && s[*i].is_ascii_digit() {
                        *i += 1;
                    }
                    let n: usize = std::str::from_utf8(&s[start..*i])
                        .unwrap()
                        .parse()
                        .map_err(|_| invalid("bad generator index in bracket label"))?;
                    if n == 0 {
                        return Err(invalid("generators are numbered from 1"));
                    }
                    Ok(BracketExpr::Gen(n - 1))
                }
                _ => Err(invalid(format!("unexpected input in bracket label at byte {i}"))),
            }
        }
        let mut i = 0;
        let e = go(s.as_bytes(), &mut i)?;
        if s[i..].trim().is_empty() {
            Ok(e)
        } else {
            Err(invalid(format!("trailing input in bracket label: {}", &s[i..])))
        }
    }
}

impl fmt::Display for BracketExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Gen(l) => write!(f, "g{}", l + 1),
            Self::Br(a, b) => write!(f, "[{a},{b}]"),
        }
    }
}

/// `[f, g](z) = Dg·f − Df·g`.
pub fn lie_bracket(
    fields: &VectorFieldSet,
    f: &BracketExpr,
    g: &BracketExpr,
    z: &[f64],
    mode: DiffMode,
) -> Result<DVector<f64>> {
    let e = BracketExpr::br(f.clone(), g.clone());
    Ok(fields.eval(&[e], z, mode)?.remove(0))
}

/// 1+1 fields `g^ℓ = (e^ℓ, G(y − x) e^ℓ)` on `(x, y) ∈ ℝ⁶`.
pub fn fields_1on1(a: f64) -> Result<VectorFieldSet> {
    VectorFieldSet::full(1, 1, a)
}

/// 1+2 fields on the full state `(x, y_1, y_2) ∈ ℝ⁹`.
pub fn fields_1on2(a: f64) -> Result<VectorFieldSet> {
    VectorFieldSet::full(1, 2, a)
}

/// 1+2 fields on the relative state `(d_1, d_2) ∈ ℝ⁶`.
pub fn fields_1on2_reduced(a: f64) -> Result<VectorFieldSet> {
    VectorFieldSet::relative(2, a)
}
