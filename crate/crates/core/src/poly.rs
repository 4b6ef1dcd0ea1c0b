//! Sparse multivariate polynomials with real coefficients.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::scalar::Scalar;

/// Exponent multi-index.
pub type Monomial = Vec<u32>;

/// `Σ c_α x^α`; zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialData", into = "PolynomialData")]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermData {
    pub exponents: Vec<u32>,
    pub coeff: f64,
}

/// Exponent-map encoding used in problem files.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialData {
    pub nvars: usize,
    pub terms: Vec<TermData>,
}

impl TryFrom<PolynomialData> for Polynomial {
    type Error = Error;

    fn try_from(d: PolynomialData) -> Result<Self> {
        let mut p = Polynomial::zero(d.nvars);
        for t in d.terms {
            if t.exponents.len() != d.nvars {
                return Err(Error::DimensionMismatch {
                    expected: d.nvars,
                    found: t.exponents.len(),
                });
            }
            if !t.coeff.is_finite() {
                return Err(Error::InvalidArgument(
                    "non-finite polynomial coefficient".into(),
                ));
            }
            p.add_term(t.exponents, t.coeff);
        }
        Ok(p)
    }
}

impl From<Polynomial> for PolynomialData {
    fn from(p: Polynomial) -> Self {
        PolynomialData {
            nvars: p.nvars,
            terms: p
                .terms
                .into_iter()
                .map(|(exponents, coeff)| TermData { exponents, coeff })
                .collect(),
        }
    }
}

/// Every monomial in `nvars` variables with total degree in
/// `[min_deg, max_deg]`, ordered by degree and then lexicographically
/// descending.
pub fn monomials(nvars: usize, min_deg: u32, max_deg: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in min_deg..=max_deg {
        let mut cur = vec![0u32; nvars];
        fill(&mut out, &mut cur, 0, d);
    }
    out
}

fn fill(out: &mut Vec<Monomial>, cur: &mut Monomial, k: usize, left: u32) {
    if k + 1 >= cur.len() {
        if let Some(i) = cur.len().checked_sub(1) {
            cur[i] = left;
            out.push(cur.clone());
            cur[i] = 0;
        } else if left == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for e in (0..=left).rev() {
        cur[k] = e;
        fill(out, cur, k + 1, left - e);
    }
    cur[k] = 0;
}

pub fn monomial_product(a: &[u32], b: &[u32]) -> Monomial {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, k: usize) -> Self {
        let mut e = vec![0; nvars];
        e[k] = 1;
        Self::monomial(e, 1.0)
    }

    pub fn monomial(exponents: Monomial, c: f64) -> Self {
        let mut p = Self::zero(exponents.len());
        p.add_term(exponents, c);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, f64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coeff(&self, m: &[u32]) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, m: Monomial, c: f64) {
        debug_assert_eq!(m.len(), self.nvars);
        if c == 0.0 {
            return;
        }
        match self.terms.entry(m) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    /// Total degree (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).max().unwrap_or(0)
    }

    /// Smallest total degree among stored terms.
    pub fn min_degree(&self) -> u32 {
        self.terms.keys().map(|m| m.iter().sum()).min().unwrap_or(0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.abs()))
    }

    /// Drops terms with `|c| ≤ tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(_, c)| c.abs() > tol)
                .map(|(m, c)| (m.clone(), *c))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        if s == 0.0 {
            return Self::zero(self.nvars);
        }
        Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c * s)).collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(self.nvars, 1.0);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        let mut acc = S::zero();
        for (m, c) in &self.terms {
            let mut t = S::from_f64(*c);
            for (xi, &e) in x.iter().zip(m) {
                if e > 0 {
                    t *= xi.powi(e as i32);
                }
            }
            acc += t;
        }
        acc
    }

    pub fn diff(&self, k: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            if m[k] > 0 {
                let mut e = m.clone();
                e[k] -= 1;
                out.add_term(e, c * m[k] as f64);
            }
        }
        out
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.nvars).map(|k| self.diff(k)).collect()
    }

    /// The same polynomial over `nvars` variables; dropped variables must
    /// not occur.
    pub fn with_nvars(&self, nvars: usize) -> Result<Self> {
        let mut out = Self::zero(nvars);
        for (m, c) in &self.terms {
            if m.iter().skip(nvars).any(|&e| e > 0) {
                return Err(Error::InvalidArgument(format!(
                    "polynomial uses variables beyond {nvars}"
                )));
            }
            let mut e = m.clone();
            e.resize(nvars, 0);
            out.add_term(e, *c);
        }
        Ok(out)
    }

    /// Substitutes variable `k` by `subs[k]`; all substitutes share one
    /// variable set.
    pub fn compose(&self, subs: &[Polynomial]) -> Result<Self> {
        if subs.len() != self.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: subs.len(),
            });
        }
        let nv = subs.first().map_or(0, |s| s.nvars);
        if subs.iter().any(|s| s.nvars != nv) {
            return Err(Error::InvalidArgument(
                "substitutes use different variable sets".into(),
            ));
        }
        let mut powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .map(|s| vec![Self::constant(nv, 1.0), s.clone()])
            .collect();
        let mut out = Self::zero(nv);
        for (m, c) in &self.terms {
            let mut t = Self::constant(nv, *c);
            for (k, &e) in m.iter().enumerate() {
                while powers[k].len() <= e as usize {
                    let next = &powers[k][powers[k].len() - 1] * &subs[k];
                    powers[k].push(next);
                }
                if e > 0 {
                    t = &t * &powers[k][e as usize];
                }
            }
            out = out + t;
        }
        Ok(out)
    }

    /// `p(x + shift)`.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        let subs: Vec<Polynomial> = shift
            .iter()
            .enumerate()
            .map(|(k, &s)| Self::var(self.nvars, k) + Self::constant(self.nvars, s))
            .collect();
        self.compose(&subs)
    }

    /// Converts an expression built from variables, constants, sums,
    /// products and integer powers.
    pub fn from_expr(e: &Expr, nvars: usize) -> Result<Self> {
        Ok(match e {
            Expr::Var(k) => {
                if *k >= nvars {
                    return Err(Error::InvalidArgument(format!("variable {k} out of range")));
                }
                Self::var(nvars, *k)
            }
            Expr::Const(c) => Self::constant(nvars, *c),
            Expr::Add(ts) => {
                let mut acc = Self::zero(nvars);
                for t in ts {
                    acc = acc + Self::from_expr(t, nvars)?;
                }
                acc
            }
            Expr::Mul(fs) => {
                let mut acc = Self::constant(nvars, 1.0);
                for f in fs {
                    acc = &acc * &Self::from_expr(f, nvars)?;
                }
                acc
            }
            Expr::Neg(a) => -Self::from_expr(a, nvars)?,
            Expr::Pow(a, k) => Self::from_expr(a, nvars)?.pow(*k),
            other => {
                return Err(Error::InvalidArgument(format!(
                    "expression is not polynomial: {other:?}"
                )))
            }
        })
    }

    pub fn to_expr(&self) -> Expr {
        let terms = self
            .terms
            .iter()
            .map(|(m, c)| {
                let mut fs = vec![Expr::Const(*c)];
                for (k, &e) in m.iter().enumerate() {
                    match e {
                        0 => {}
                        1 => fs.push(Expr::Var(k)),
                        _ => fs.push(Expr::Pow(Box::new(Expr::Var(k)), e)),
                    }
                }
                crate::expr::product(fs)
            })
            .collect();
        crate::expr::sum(terms)
    }

    /// Largest coefficient difference to `other`.
    pub fn distance(&self, other: &Polynomial) -> f64 {
        (self - other).max_abs_coeff()
    }
}

impl Add for Polynomial {
    type Output = Polynomial;
    fn add(mut self, o: Polynomial) -> Polynomial {
        for (m, c) in o.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, o: &Polynomial) -> Polynomial {
        self.clone() + o.clone()
    }
}

impl Sub for Polynomial {
    type Output = Polynomial;
    fn sub(self, o: Polynomial) -> Polynomial {
        self + (-o)
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, o: &Polynomial) -> Polynomial {
        self.clone() - o.clone()
    }
}

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(-1.0)
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, o: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero(self.nvars);
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                out.add_term(monomial_product(a, b), ca * cb);
            }
        }
        out
    }
}

impl Mul for Polynomial {
    type Output = Polynomial;
    fn mul(self, o: Polynomial) -> Polynomial {
        &self * &o
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{cst, var};

    #[test]
    fn basis_counts() {
        assert_eq!(monomials(2, 0, 2).len(), 6);
        assert_eq!(monomials(4, 1, 2).len(), 14);
        assert_eq!(monomials(3, 2, 2)[0], vec![2, 0, 0]);
        assert_eq!(monomials(0, 0, 0), vec![Vec::<u32>::new()]);
    }

    #[test]
    fn arithmetic_and_eval() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let p = (&x - &y).pow(2);
        assert_eq!(p.coeff(&[1, 1]), -2.0);
        assert_eq!(p.eval(&[3.0, 1.0]), 4.0);
        let q = &p - &p;
        assert!(q.is_zero());
        assert_eq!(p.diff(0).eval(&[3.0, 1.0]), 4.0);
    }

    #[test]
    fn compose_and_shift() {
        let x = Polynomial::var(1, 0);
        let p = &x * &x;
        let s = p.shifted(&[1.0]).unwrap();
        assert_eq!(s.eval(&[2.0]), 9.0);
        let e = cst(2.0) * var(0) * var(1) - var(1).pow(3);
        let q = Polynomial::from_expr(&e, 2).unwrap();
        assert_eq!(q.eval(&[2.0, 3.0]), 12.0 - 27.0);
        let back = Polynomial::from_expr(&q.to_expr(), 2).unwrap();
        assert_eq!(back, q);
        assert!(Polynomial::from_expr(&var(0).sin(), 1).is_err());
    }
}
