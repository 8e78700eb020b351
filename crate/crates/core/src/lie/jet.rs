//! Truncated multivariate Taylor polynomials.
//!
//! A `Jet` over `n` variables and degree `D` stores the Taylor coefficients of
//! a smooth function at a point, up to total degree `D`. Arithmetic is exact
//! up to truncation, so derivatives of nested brackets come out to rounding
//! error instead of finite-difference error.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

#[derive(Debug)]
pub struct JetSpace {
    n: usize,
    degree: usize,
    degs: Vec<usize>,
    // mul[i] lists (j, k): monomial i times monomial j is monomial k.
    mul: Vec<Vec<(u32, u32)>>,
    // diff[v] lists (src, dst, factor) for ∂/∂z_v.
    diff: Vec<Vec<(u32, u32, f64)>>,
}

impl JetSpace {
    pub fn new(n: usize, degree: usize) -> Arc<Self> {
        let mut exps: Vec<Vec<u8>> = vec![vec![0; n]];
        let mut last = vec![vec![0u8; n]];
        for _ in 0..degree {
            let mut next = Vec::new();
            for e in &last {
                // Only raise variables at or after the last nonzero one, so
                // every monomial of the next degree is produced once.
                let start = e.iter().rposition(|&x| x > 0).unwrap_or(0);
                for v in start..n {
                    let mut f = e.clone();
                    f[v] += 1;
                    next.push(f);
                }
            }
            exps.extend(next.iter().cloned());
            last = next;
        }
        let index: HashMap<Vec<u8>, u32> = exps.iter().enumerate().map(|(i, e)| (e.clone(), i as u32)).collect();
        let degs: Vec<usize> = exps.iter().map(|e| e.iter().map(|&x| x as usize).sum()).collect();

        let mut mul = vec![Vec::new(); exps.len()];
        for (i, ei) in exps.iter().enumerate() {
            for (j, ej) in exps.iter().enumerate() {
                if degs[i] + degs[j] <= degree {
                    let s: Vec<u8> = ei.iter().zip(ej).map(|(a, b)| a + b).collect();
                    mul[i].push((j as u32, index[&s]));
                }
            }
        }

        let mut diff = vec![Vec::new(); n];
        for (v, dv) in diff.iter_mut().enumerate() {
            for (i, e) in exps.iter().enumerate() {
                if e[v] > 0 {
                    let mut f = e.clone();
                    f[v] -= 1;
                    dv.push((i as u32, index[&f], e[v] as f64));
                }
            }
        }
        Arc::new(Self {
            n,
            degree,
            degs,
            mul,
            diff,
        })
    }

    pub fn len(&self) -> usize {
        self.degs.len()
    }
}

#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    c: Vec<f64>,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, v: f64) -> Self {
        let mut c = vec![0.0; space.len()];
        c[0] = v;
        Self {
            space: space.clone(),
            c,
        }
    }

    /// The coordinate function `z_k` expanded at `value`.
    pub fn variable(space: &Arc<JetSpace>, k: usize, value: f64) -> Self {
        let mut j = Self::constant(space, value);
        if space.degree >= 1 {
            j.c[1 + k] = 1.0;
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// First partial derivatives at the expansion point.
    pub fn gradient(&self) -> Vec<f64> {
        (0..self.space.n)
            .map(|k| if self.space.degree >= 1 { self.c[1 + k] } else { 0.0 })
            .collect()
    }

    /// ∂/∂z_v. The result is valid to one degree less than `self`.
    pub fn diff(&self, v: usize) -> Self {
        let mut c = vec![0.0; self.c.len()];
        for &(src, dst, f) in &self.space.diff[v] {
            c[dst as usize] += f * self.c[src as usize];
        }
        Self {
            space: self.space.clone(),
            c,
        }
    }

    fn mul_ref(&self, rhs: &Self) -> Self {
        let mut c = vec![0.0; self.c.len()];
        for (i, row) in self.space.mul.iter().enumerate() {
            let a = self.c[i];
            if a == 0.0 {
                continue;
            }
            for &(j, k) in row {
                c[k as usize] += a * rhs.c[j as usize];
            }
        }
        Self {
            space: self.space.clone(),
            c,
        }
    }

    /// `x^alpha` by composing the Taylor series of `t ↦ t^alpha` at the value.
    pub fn powf(&self, alpha: f64) -> Self {
        let x0 = self.c[0];
        let d = self.space.degree;
        let mut h = self.clone();
        h.c[0] = 0.0;
        // coef[k] = binom(alpha, k) x0^(alpha - k)
        let mut coef = Vec::with_capacity(d + 1);
        let mut b = 1.0;
        for k in 0..=d {
            coef.push(b * x0.powf(alpha - k as f64));
            b *= (alpha - k as f64) / (k + 1) as f64;
        }
        let mut acc = Self::constant(&self.space, coef[d]);
        for k in (0..d).rev() {
            acc = acc.mul_ref(&h);
            acc.c[0] += coef[k];
        }
        acc
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for (a, b) in self.c.iter_mut().zip(&rhs.c) {
            *a -= b;
        }
        self
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_ref(&rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.c.iter_mut().for_each(|a| *a *= rhs);
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

/// Numbers the field formulas are generic over: plain `f64` or `Jet`.
pub trait Scalar:
    Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Mul<f64, Output = Self> + Neg<Output = Self>
{
    /// A constant living in the same space as `self`.
    fn lift(&self, v: f64) -> Self;
    fn powf(&self, alpha: f64) -> Self;
    fn value(&self) -> f64;
}

impl Scalar for f64 {
    fn lift(&self, v: f64) -> Self {
        v
    }
    fn powf(&self, alpha: f64) -> Self {
        f64::powf(*self, alpha)
    }
    fn value(&self) -> f64 {
        *self
    }
}

impl Scalar for Jet {
    fn lift(&self, v: f64) -> Self {
        Jet::constant(&self.space, v)
    }
    fn powf(&self, alpha: f64) -> Self {
        Jet::powf(self, alpha)
    }
    fn value(&self) -> f64 {
        self.c[0]
    }
}

/// `[F, G]_i = Σ_k ∂_k G_i F_k − ∂_k F_i G_k` on jet-valued fields.
pub fn bracket(f: &[Jet], g: &[Jet]) -> Vec<Jet> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let mut acc = f[0].lift(0.0);
            for k in 0..n {
                acc = acc + g[i].diff(k).mul_ref(&f[k]) - f[i].diff(k).mul_ref(&g[k]);
            }
            acc
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn monomial_count() {
        for (n, d) in [(1, 3), (6, 2), (9, 3), (3, 0)] {
            assert_eq!(JetSpace::new(n, d).len(), binom(n + d, d));
        }
    }

    #[test]
    fn product_rule_and_value() {
        let s = JetSpace::new(2, 3);
        let x = Jet::variable(&s, 0, 2.0);
        let y = Jet::variable(&s, 1, -1.5);
        let f = x.clone() * x.clone() * y.clone() + y.clone() * 3.0;
        assert_eq!(f.value(), 4.0 * -1.5 + -4.5);
        // ∂x = 2xy, ∂y = x² + 3
        assert_eq!(f.gradient(), vec![2.0 * 2.0 * -1.5, 4.0 + 3.0]);
        // ∂x∂x = 2y
        assert_eq!(f.diff(0).diff(0).value(), -3.0);
        assert_eq!(f.diff(0).diff(1).value(), 4.0);
    }

    #[test]
    fn powf_matches_analytic_derivatives() {
        let s = JetSpace::new(1, 3);
        let x0 = 2.7;
        let x = Jet::variable(&s, 0, x0);
        let r = x.powf(-0.5);
        let d1 = -0.5 * x0.powf(-1.5);
        let d2 = 0.75 * x0.powf(-2.5);
        let d3 = -1.875 * x0.powf(-3.5);
        assert!((r.value() - x0.powf(-0.5)).abs() < 1e-15);
        assert!((r.diff(0).value() - d1).abs() < 1e-15);
        assert!((r.diff(0).diff(0).value() - d2).abs() < 1e-14);
        assert!((r.diff(0).diff(0).diff(0).value() - d3).abs() < 1e-14);
    }

    #[test]
    fn bracket_of_linear_fields() {
        // f = A z, g = B z: [f, g] = (B A − A B) z
        let s = JetSpace::new(2, 1);
        let z = [Jet::variable(&s, 0, 0.3), Jet::variable(&s, 1, -1.1)];
        let f = vec![z[1].clone(), z[0].clone() * 2.0]; // A = [[0,1],[2,0]]
        let g = vec![z[0].clone() * 3.0, z[0].clone() + z[1].clone()]; // B = [[3,0],[1,1]]
        let b = bracket(&f, &g);
        // BA − AB = [[0,3],[2,1]] − [[1,1],[6,0]] = [[-1,2],[-4,1]]
        let expect = [-0.3 + 2.0 * -1.1, -4.0 * 0.3 + -1.1];
        assert!((b[0].value() - expect[0]).abs() < 1e-15);
        assert!((b[1].value() - expect[1]).abs() < 1e-15);
    }
}
