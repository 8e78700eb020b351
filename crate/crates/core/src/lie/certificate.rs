use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::fields::{fields_1on1, fields_1on2_reduced, BracketExpr, DiffMode, VectorFieldSet};
use crate::error::{contract, invalid, Error, Result};
use crate::hydro::{Mat3, ParticleConfiguration, Vec3};

/// Singular values below this fraction of the largest count as zero.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rank_rel: f64,
}

/// Result of a Lie algebra rank test at one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketCertificate {
    pub state: Vec<f64>,
    pub n: usize,
    pub rank: usize,
    pub max_depth: usize,
    pub determinants: BTreeMap<String, f64>,
    /// Labels of the columns that achieve `rank`, in the order they were picked.
    pub basis: Vec<String>,
    pub singular_values: Vec<f64>,
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub metadata: BTreeMap<String, String>,
}

impl BracketCertificate {
    pub fn is_full_rank(&self) -> bool {
        self.rank == self.n
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificate serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LarcOptions {
    pub rank_tol: f64,
    pub mode: DiffMode,
}

impl Default for LarcOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            mode: DiffMode::Analytic,
        }
    }
}

/// Fields plus right-normed brackets `[g^ℓ, E]` up to `max_depth`, skipping `[g^ℓ, g^ℓ]`.
pub fn bracket_columns(m: usize, max_depth: usize) -> Vec<BracketExpr> {
    let mut all: Vec<BracketExpr> = (0..m).map(BracketExpr::gen).collect();
    let mut last = all.clone();
    for _ in 1..max_depth {
        let mut next = Vec::new();
        for l in 0..m {
            for e in &last {
                if *e != BracketExpr::Gen(l) {
                    next.push(BracketExpr::br(BracketExpr::gen(l), e.clone()));
                }
            }
        }
        all.extend(next.iter().cloned());
        last = next;
    }
    all
}

/// Numerical rank and singular values (descending).
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> (usize, Vec<f64>) {
    if m.ncols() == 0 || m.nrows() == 0 {
        return (0, Vec::new());
    }
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    let cut = rel_tol * sv[0];
    let rank = if sv[0] > 0.0 { sv.iter().filter(|&&s| s > cut).count() } else { 0 };
    (rank, sv)
}

/// Greedy column selection: keep a column when it raises the rank.
pub fn achieving_columns(cols: &[DVector<f64>], rel_tol: f64) -> Vec<usize> {
    let n = cols.first().map_or(0, |c| c.len());
    let scale = cols.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut picked: Vec<usize> = Vec::new();
    for (k, c) in cols.iter().enumerate() {
        if picked.len() == n {
            break;
        }
        let mut trial: Vec<DVector<f64>> = picked.iter().map(|&i| cols[i].clone()).collect();
        trial.push(c.clone());
        let m = DMatrix::from_columns(&trial);
        let sv = m.svd(false, false).singular_values;
        let smallest = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smallest > rel_tol * scale {
            picked.push(k);
        }
    }
    picked
}

pub fn larc_rank(fields: &VectorFieldSet, z: &[f64], max_depth: usize) -> Result<BracketCertificate> {
    larc_rank_with(fields, z, max_depth, LarcOptions::default())
}

pub fn larc_rank_with(fields: &VectorFieldSet, z: &[f64], max_depth: usize, opts: LarcOptions) -> Result<BracketCertificate> {
    if max_depth == 0 {
        return Err(invalid("bracket depth must be at least 1"));
    }
    let exprs = bracket_columns(fields.len(), max_depth);
    let cols = fields.eval(&exprs, z, opts.mode)?;
    let m = DMatrix::from_columns(&cols);
    let (rank, singular_values) = numerical_rank(&m, opts.rank_tol);
    let basis = achieving_columns(&cols, opts.rank_tol).into_iter().map(|k| exprs[k].to_string()).collect();
    Ok(BracketCertificate {
        state: z.to_vec(),
        n: fields.dim(),
        rank,
        max_depth,
        determinants: BTreeMap::new(),
        basis,
        singular_values,
        tolerances: Tolerances { rank_rel: opts.rank_tol },
        metadata: BTreeMap::new(),
    })
}

/// Closed-form 1+1 determinants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneOnOneDeterminants {
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

/// `δ(d) = 27a³(8|d|−9a)²(16|d|²−42a|d|+27a²)/(8192|d|¹³)` with
/// `δ₁ = δ d₁²`, `δ₂ = −δ d₂²`, `δ₃ = −δ d₃²` as printed.
pub fn delta_1on1(d: &Vec3, a: f64) -> Result<OneOnOneDeterminants> {
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::CoincidentParticles);
    }
    let delta = 27.0 * a.powi(3) * (8.0 * r - 9.0 * a).powi(2) * (16.0 * r * r - 42.0 * a * r + 27.0 * a * a)
        / (8192.0 * r.powi(13));
    Ok(OneOnOneDeterminants {
        delta,
        delta1: delta * d.x * d.x,
        delta2: -delta * d.y * d.y,
        delta3: -delta * d.z * d.z,
    })
}

fn g(l: usize) -> BracketExpr {
    BracketExpr::gen(l)
}

fn br(f: BracketExpr, h: BracketExpr) -> BracketExpr {
    BracketExpr::br(f, h)
}

/// `v¹ = [g²,g³]`, `v² = [g¹,g³]`, `v³ = [g¹,g²]`.
pub fn v_1on1() -> [BracketExpr; 3] {
    [br(g(1), g(2)), br(g(0), g(2)), br(g(0), g(1))]
}

/// Printed lower block of the second-order bracket `w¹` in the 1+1 system.
pub fn w1_printed(d: &Vec3, a: f64) -> [f64; 3] {
    let r = d.norm();
    let (d1, d2, d3) = (d.x, d.y, d.z);
    let den = 64.0 * r.powi(7);
    [
        3.0 * a
            * (32.0 * (r * r - 3.0 * d3 * d3) * r * r - 12.0 * a * (7.0 * d1 * d1 + 5.0 * d2 * d2 - 19.0 * d3 * d3) * r
                + 27.0 * a * a * (2.0 * d1 * d1 + d2 * d2 - 7.0 * d3 * d3))
            / den,
        -9.0 * a * a * (8.0 * r - 9.0 * a) * d1 * d2 / den,
        9.0 * a * (32.0 * r * r - 104.0 * a * r + 81.0 * a * a) * d1 * d3 / den,
    ]
}

/// Outcome of matching candidate recipes against the printed `w¹` entries.
#[derive(Debug, Clone, PartialEq)]
pub struct W1Resolution {
    pub recipe: BracketExpr,
    /// Relative mismatch of the chosen recipe.
    pub mismatch: f64,
    /// Every candidate with its relative mismatch.
    pub candidates: Vec<(BracketExpr, f64)>,
}

/// Compare every `[g^ℓ, v^k]` against the printed `w¹` at a generic state
/// and keep the closest one.
pub fn resolve_w1(a: f64) -> Result<W1Resolution> {
    let fs = fields_1on1(a)?;
    let d = Vec3::new(0.47, -0.31, 0.83).normalize() * (12.0 * a);
    let z = [0.0, 0.0, 0.0, d.x, d.y, d.z];
    let printed = DVector::from_row_slice(&w1_printed(&d, a));
    let v = v_1on1();
    let exprs: Vec<BracketExpr> = (0..3).flat_map(|l| v.iter().map(move |vk| br(g(l), vk.clone()))).collect();
    let cols = fs.eval(&exprs, &z, DiffMode::Analytic)?;
    let candidates: Vec<(BracketExpr, f64)> = exprs
        .into_iter()
        .zip(&cols)
        .map(|(e, c)| {
            let upper = c.rows(0, 3).amax();
            let lower: DVector<f64> = c.rows(3, 3).into();
            (e, ((lower - &printed).norm() + upper) / printed.norm())
        })
        .collect();
    let best = candidates
        .iter()
        .min_by(|x, y| x.1.total_cmp(&y.1))
        .cloned()
        .expect("nine candidates");
    Ok(W1Resolution {
        recipe: best.0,
        mismatch: best.1,
        candidates,
    })
}

fn det_of(cols: &[&DVector<f64>]) -> f64 {
    DMatrix::from_columns(&cols.iter().map(|c| (*c).clone()).collect::<Vec<_>>()).determinant()
}

/// `det(g|w¹|v²|v³)`, `det(g|v¹|w²|v³)`, `det(g|v¹|v²|w³)` from numeric
/// brackets at `x = 0, y = d`, with `w¹` taken from `w1`.
pub fn delta_1on1_numeric(d: &Vec3, a: f64, w1: &BracketExpr, mode: DiffMode) -> Result<[f64; 3]> {
    let fs = fields_1on1(a)?;
    let z = [0.0, 0.0, 0.0, d.x, d.y, d.z];
    let [v1, v2, v3] = v_1on1();
    let w2 = br(g(0), v3.clone());
    let w3 = br(g(0), v2.clone());
    let exprs = [g(0), g(1), g(2), v1, v2, v3, w1.clone(), w2, w3];
    let c = fs.eval(&exprs, &z, mode)?;
    let (gs, v, w) = ([&c[0], &c[1], &c[2]], [&c[3], &c[4], &c[5]], [&c[6], &c[7], &c[8]]);
    Ok([
        det_of(&[gs[0], gs[1], gs[2], w[0], v[1], v[2]]),
        det_of(&[gs[0], gs[1], gs[2], v[0], w[1], v[2]]),
        det_of(&[gs[0], gs[1], gs[2], v[0], v[1], w[2]]),
    ])
}

/// Bracket recipes for the reduced 1+2 system, keyed by name.
pub fn reduced_1on2_brackets() -> Vec<(&'static str, BracketExpr)> {
    let v1 = br(g(0), g(1));
    let v2 = br(g(0), g(2));
    let w2 = br(g(1), v1.clone());
    vec![
        ("v1", v1.clone()),
        ("v2", v2.clone()),
        ("w1", br(g(0), v1.clone())),
        ("w2", w2.clone()),
        ("w3", br(g(2), v2.clone())),
        ("w4", br(g(0), v2.clone())),
        ("w5", br(g(2), br(g(1), g(2)))),
        ("w6", br(g(1), br(g(1), g(2)))),
        ("w7", br(g(0), w2)),
    ]
}

/// Column sets of the two 1+2 determinants.
pub const DELTA1_COLUMNS: [&str; 6] = ["v1", "w2", "w3", "w4", "w5", "w6"];
pub const DELTA2_COLUMNS: [&str; 6] = ["v1", "v2", "w1", "w4", "w2", "w7"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneOnTwoDeterminants {
    pub delta_1: f64,
    pub delta_2: f64,
}

fn check_frame(d1: &Vec3, d2: &Vec3) -> Result<()> {
    if !(d1.x > 0.0 && d1.y == 0.0 && d1.z == 0.0 && d2.z == 0.0) {
        return Err(contract("expected d1 = (d11, 0, 0) with d11 > 0 and d2 = (d21, d22, 0)"));
    }
    if d2.norm() == 0.0 || (d1 - d2).norm() == 0.0 {
        return Err(Error::CoincidentParticles);
    }
    Ok(())
}

/// `δ⁽¹⁾ = det(v̂¹|ŵ²|ŵ³|ŵ⁴|ŵ⁵|ŵ⁶)` and `δ⁽²⁾ = det(v̂¹|v̂²|ŵ¹|ŵ⁴|ŵ²|ŵ⁷)`
/// in the canonical frame.
pub fn delta_1on2(d1: &Vec3, d2: &Vec3, a: f64, mode: DiffMode) -> Result<OneOnTwoDeterminants> {
    check_frame(d1, d2)?;
    let fs = fields_1on2_reduced(a)?;
    let z = [d1.x, d1.y, d1.z, d2.x, d2.y, d2.z];
    let named = reduced_1on2_brackets();
    let exprs: Vec<BracketExpr> = named.iter().map(|(_, e)| e.clone()).collect();
    let cols = fs.eval(&exprs, &z, mode)?;
    let pick = |names: &[&str]| -> f64 {
        let cs: Vec<&DVector<f64>> = names
            .iter()
            .map(|n| &cols[named.iter().position(|(k, _)| k == n).expect("known name")])
            .collect();
        det_of(&cs)
    };
    Ok(OneOnTwoDeterminants {
        delta_1: pick(&DELTA1_COLUMNS),
        delta_2: pick(&DELTA2_COLUMNS),
    })
}

/// Small-radius limit of `δ⁽¹⁾/a⁶`: `6561 d₂₂⁴ / (64 |d₁|⁸ |d₂|¹³)`.
pub fn delta_1on2_limit_noncollinear(d1: &Vec3, d2: &Vec3) -> f64 {
    6561.0 * d2.y.powi(4) / (64.0 * d1.norm().powi(8) * d2.norm().powi(13))
}

/// Small-radius limit of `δ⁽²⁾/a⁶` on collinear frames:
/// `2187 (d₁₁ − d₂₁)³ / (16 d₁₁¹⁰ d₂₁¹⁰)`.
pub fn delta_1on2_limit_collinear(d1: &Vec3, d2: &Vec3) -> f64 {
    2187.0 * (d1.x - d2.x).powi(3) / (16.0 * d1.x.powi(10) * d2.x.powi(10))
}

/// Rigid motion taking a 1+2 configuration to the canonical frame: active at
/// the origin, `d₁` on the positive first axis, `d₂` in the first-second
/// plane with `d₂₂ ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalFrame {
    pub origin: Vec3,
    /// Rows are the new axes in world coordinates; `det = +1`.
    pub rotation: Mat3,
    pub d1: Vec3,
    pub d2: Vec3,
}

impl CanonicalFrame {
    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * (p - self.origin)
    }

    /// Inverse map for directions (tangent vectors).
    pub fn to_world_direction(&self, v: &Vec3) -> Vec3 {
        self.rotation.transpose() * v
    }
}

pub fn canonical_frame_1on2(config: &ParticleConfiguration) -> Result<CanonicalFrame> {
    if config.n_active() != 1 || config.n_passive() != 2 {
        return Err(contract(format!(
            "canonical frame needs 1+2 particles, got {}+{}",
            config.n_active(),
            config.n_passive()
        )));
    }
    let x = config.active[0];
    let (p1, p2) = (config.passive[0] - x, config.passive[1] - x);
    let r1 = p1.norm();
    if r1 == 0.0 || p2.norm() == 0.0 || (p1 - p2).norm() == 0.0 {
        return Err(Error::CoincidentParticles);
    }
    let e1 = p1 / r1;
    let mut perp = p2 - e1 * e1.dot(&p2);
    if perp.norm() <= 1e-12 * p2.norm() {
        let mut aux = Vec3::y() - e1 * e1.y;
        if aux.norm() < 0.5 {
            aux = Vec3::z() - e1 * e1.z;
        }
        perp = aux;
    }
    let e2 = perp.normalize();
    let e3 = e1.cross(&e2);
    let rotation = Mat3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);
    Ok(CanonicalFrame {
        origin: x,
        rotation,
        d1: Vec3::new(r1, 0.0, 0.0),
        d2: Vec3::new(e1.dot(&p2), e2.dot(&p2).max(0.0), 0.0),
    })
}

/// Full certificate for a configuration: LARC rank on the lab-frame fields
/// plus the closed-form determinants where they exist (1+1 and 1+2).
pub fn certify(config: &ParticleConfiguration, max_depth: Option<usize>, opts: LarcOptions) -> Result<BracketCertificate> {
    let a = config.radius();
    let fs = VectorFieldSet::full(config.n_active(), config.n_passive(), a)?;
    let depth = max_depth.unwrap_or(if config.n_passive() <= 1 { 3 } else { 4 });
    let mut cert = larc_rank_with(&fs, &config.state(), depth, opts)?;
    match (config.n_active(), config.n_passive()) {
        (1, 1) => {
            let d = config.passive[0] - config.active[0];
            let closed = delta_1on1(&d, a)?;
            let w1 = resolve_w1(a)?;
            let num = delta_1on1_numeric(&d, a, &w1.recipe, opts.mode)?;
            let dets = &mut cert.determinants;
            dets.insert("delta".into(), closed.delta);
            dets.insert("delta_1".into(), closed.delta1);
            dets.insert("delta_2".into(), closed.delta2);
            dets.insert("delta_3".into(), closed.delta3);
            dets.insert("det(g1|g2|g3|w1|v2|v3)".into(), num[0]);
            dets.insert("det(g1|g2|g3|v1|w2|v3)".into(), num[1]);
            dets.insert("det(g1|g2|g3|v1|v2|w3)".into(), num[2]);
            cert.metadata.insert("w1_recipe".into(), w1.recipe.to_string());
            cert.metadata.insert("w1_mismatch".into(), format!("{:.3e}", w1.mismatch));
            cert.metadata.insert("bracket_convention".into(), "[f,g] = Dg f - Df g".into());
        }
        (1, 2) => {
            let frame = canonical_frame_1on2(config)?;
            let dd = delta_1on2(&frame.d1, &frame.d2, a, opts.mode)?;
            cert.determinants.insert("delta^(1)".into(), dd.delta_1);
            cert.determinants.insert("delta^(2)".into(), dd.delta_2);
            cert.metadata.insert("frame_d1".into(), format!("{:?}", frame.d1.as_slice()));
            cert.metadata.insert("frame_d2".into(), format!("{:?}", frame.d2.as_slice()));
            cert.metadata.insert("bracket_convention".into(), "[f,g] = Dg f - Df g".into());
        }
        _ => {}
    }
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::fields::fields_1on2;
    use proptest::prelude::*;

    #[test]
    fn delta_example_value() {
        let d = Vec3::new(10.0, 0.0, 0.0);
        let r = delta_1on1(&d, 1.0).unwrap();
        let expect = 27.0 * 71.0f64.powi(2) * 1207.0 / (8192.0 * 1e13);
        assert!((r.delta - expect).abs() <= 1e-15 * expect);
        assert!((r.delta - 2.00538e-9).abs() < 1e-14);
        assert_eq!((r.delta2, r.delta3), (0.0, 0.0));
    }

    #[test]
    fn delta_sign_change_below_three_halves_radius() {
        // 16r² − 42ar + 27a² has roots 9a/8 and 3a/2.
        let d = Vec3::new(1.3, 0.0, 0.0);
        assert!(delta_1on1(&d, 1.0).unwrap().delta < 0.0);
        assert!(delta_1on1(&(d * 2.0), 1.0).unwrap().delta > 0.0);
    }

    #[test]
    fn w1_resolves_to_unique_recipe() {
        let res = resolve_w1(1.0).unwrap();
        assert_eq!(res.recipe.to_string(), "[g3,[g1,g3]]");
        assert!(res.mismatch < 1e-12);
        let runner_up = res
            .candidates
            .iter()
            .filter(|c| c.0 != res.recipe)
            .map(|c| c.1)
            .fold(f64::INFINITY, f64::min);
        assert!(runner_up > 0.1);
    }

    #[test]
    fn sibling_brackets_match_printed_entries() {
        // w² and w³ as printed, at a generic point.
        let a = 1.3;
        let d = Vec3::new(7.0, -4.0, 9.5);
        let (r, d1, d2, d3) = (d.norm(), d.x, d.y, d.z);
        let den = 64.0 * r.powi(7);
        let w2 = [
            -9.0 * a * (32.0 * r * r - 104.0 * a * r + 81.0 * a * a) * d1 * d2 / den,
            3.0 * a
                * (32.0 * (3.0 * d1 * d1 - r * r) * r * r - 12.0 * a * (19.0 * d1 * d1 - 7.0 * d2 * d2 - 5.0 * d3 * d3) * r
                    + 27.0 * a * a * (7.0 * d1 * d1 - 2.0 * d2 * d2 - d3 * d3))
                / den,
            9.0 * a * a * (8.0 * r - 9.0 * a) * d2 * d3 / den,
        ];
        let w3 = [
            -9.0 * a * (32.0 * r * r - 104.0 * a * r + 81.0 * a * a) * d1 * d3 / den,
            9.0 * a * a * (8.0 * r - 9.0 * a) * d2 * d3 / den,
            3.0 * a
                * (32.0 * (3.0 * d1 * d1 - r * r) * r * r - 12.0 * a * (19.0 * d1 * d1 - 5.0 * d2 * d2 - 7.0 * d3 * d3) * r
                    + 27.0 * a * a * (7.0 * d1 * d1 - d2 * d2 - 2.0 * d3 * d3))
                / den,
        ];
        let fs = fields_1on1(a).unwrap();
        let [_, v2, v3] = v_1on1();
        let z = [0.0, 0.0, 0.0, d.x, d.y, d.z];
        let c = fs.eval(&[br(g(0), v3), br(g(0), v2)], &z, DiffMode::Analytic).unwrap();
        for k in 0..3 {
            assert!((c[0][3 + k] - w2[k]).abs() < 1e-14);
            assert!((c[1][3 + k] - w3[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn rank_examples_one_on_one() {
        let fs = fields_1on1(1.0).unwrap();
        let z = [0.0, 0.0, 0.0, 6.0, 0.0, 8.0];
        assert_eq!(larc_rank(&fs, &z, 1).unwrap().rank, 3);
        let c = larc_rank(&fs, &z, 3).unwrap();
        assert_eq!(c.rank, 6);
        assert_eq!(c.basis.len(), 6);
        assert!(larc_rank(&fs, &z, 0).is_err());
    }

    #[test]
    fn rank_nine_for_one_on_two() {
        let fs = fields_1on2(1.0).unwrap();
        let z = [0.0, 0.0, 0.0, 14.0, 3.0, -2.0, -4.0, 12.0, 5.0];
        let c = larc_rank(&fs, &z, 4).unwrap();
        assert_eq!(c.rank, 9, "{:?}", c.singular_values);
    }

    #[test]
    fn column_generation_counts() {
        assert_eq!(bracket_columns(3, 1).len(), 3);
        assert_eq!(bracket_columns(3, 2).len(), 3 + 6);
        assert_eq!(bracket_columns(3, 4).len(), 3 + 6 + 18 + 54);
    }

    #[test]
    fn delta_1on2_rejects_unframed_input() {
        let r = delta_1on2(&Vec3::new(3.0, 0.1, 0.0), &Vec3::new(0.0, 2.0, 0.0), 1e-3, DiffMode::Analytic);
        assert!(matches!(r, Err(Error::Contract(_))));
    }

    #[test]
    fn collinear_limit_vanishes_at_coincidence() {
        let d = Vec3::new(2.0, 0.0, 0.0);
        assert_eq!(delta_1on2_limit_collinear(&d, &d), 0.0);
    }

    #[test]
    fn framed_input_gives_identity() {
        let c = ParticleConfiguration::new(
            vec![Vec3::zeros()],
            vec![Vec3::new(2.5, 0.0, 0.0), Vec3::new(-1.0, 1.5, 0.0)],
            1e-3,
            0.01,
        )
        .unwrap();
        let f = canonical_frame_1on2(&c).unwrap();
        assert_eq!(f.rotation, Mat3::identity());
        assert_eq!(f.d1, Vec3::new(2.5, 0.0, 0.0));
        assert_eq!(f.d2, Vec3::new(-1.0, 1.5, 0.0));
    }

    #[test]
    fn collinear_frame_is_valid() {
        let c = ParticleConfiguration::new(
            vec![Vec3::new(1.0, 1.0, 1.0)],
            vec![Vec3::new(1.0, 3.0, 1.0), Vec3::new(1.0, -2.0, 1.0)],
            1e-3,
            0.01,
        )
        .unwrap();
        let f = canonical_frame_1on2(&c).unwrap();
        assert!((f.rotation.determinant() - 1.0).abs() < 1e-15);
        assert!((f.d2 - Vec3::new(-3.0, 0.0, 0.0)).norm() < 1e-15);
    }

    fn arb_point() -> impl Strategy<Value = Vec3> {
        prop::array::uniform3(-3.0..3.0f64).prop_map(Vec3::from)
    }

    proptest! {
        #[test]
        fn frame_is_isometry(x in arb_point(), y1 in arb_point(), y2 in arb_point()) {
            prop_assume!((y1 - x).norm() > 0.1 && (y2 - x).norm() > 0.1 && (y1 - y2).norm() > 0.1);
            let c = ParticleConfiguration::new(vec![x], vec![y1, y2], 1e-3, 0.01).unwrap();
            let f = canonical_frame_1on2(&c).unwrap();
            prop_assert!((f.rotation * f.rotation.transpose() - Mat3::identity()).amax() < 1e-14);
            prop_assert!((f.rotation.determinant() - 1.0).abs() < 1e-13);
            prop_assert!((f.d1.norm() - (y1 - x).norm()).abs() < 1e-12);
            prop_assert!((f.d2.norm() - (y2 - x).norm()).abs() < 1e-12);
            prop_assert!((f.apply(&y2) - f.d2).norm() < 1e-12);

            // Mirror image through the xy-plane.
            let m = |p: Vec3| Vec3::new(p.x, p.y, -p.z);
            let cm = ParticleConfiguration::new(vec![m(x)], vec![m(y1), m(y2)], 1e-3, 0.01).unwrap();
            let fm = canonical_frame_1on2(&cm).unwrap();
            prop_assert!((fm.d1 - f.d1).norm() < 1e-12);
            prop_assert!((fm.d2.x - f.d2.x).abs() < 1e-12);
            prop_assert!((fm.d2.y.abs() - f.d2.y.abs()).abs() < 1e-12);
        }

        #[test]
        fn delta_positive_beyond_threshold(r in 1.500001..1e3f64, a in 0.01..10.0f64) {
            let d = Vec3::new(0.6, 0.0, 0.8) * (r * a);
            prop_assert!(delta_1on1(&d, a).unwrap().delta > 0.0);
        }
    }
}
