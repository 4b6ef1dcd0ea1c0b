//! Expression trees over indexed variables with generic evaluation and
//! symbolic differentiation.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expr {
    Var(usize),
    Const(f64),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    /// Named elementary function; only `sin`, `cos` and `exp` are registered.
    Func {
        name: String,
        arg: Box<Expr>,
    },
}

pub fn var(i: usize) -> Expr {
    Expr::Var(i)
}

pub fn cst(v: f64) -> Expr {
    Expr::Const(v)
}

impl Expr {
    pub fn sin(self) -> Expr {
        Expr::Sin(Box::new(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(Box::new(self))
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(Box::new(self))
    }

    pub fn pow(self, k: u32) -> Expr {
        Expr::Pow(Box::new(self), k)
    }

    /// Replaces registered `Func` nodes by their dedicated variants.
    pub fn resolve(self) -> Result<Expr> {
        Ok(match self {
            Expr::Func { name, arg } => {
                let a = Box::new(arg.resolve()?);
                match name.as_str() {
                    "sin" => Expr::Sin(a),
                    "cos" => Expr::Cos(a),
                    "exp" => Expr::Exp(a),
                    _ => return Err(Error::UnregisteredFunction(name)),
                }
            }
            Expr::Add(v) => Expr::Add(v.into_iter().map(Expr::resolve).collect::<Result<_>>()?),
            Expr::Mul(v) => Expr::Mul(v.into_iter().map(Expr::resolve).collect::<Result<_>>()?),
            Expr::Neg(a) => Expr::Neg(Box::new(a.resolve()?)),
            Expr::Pow(a, k) => Expr::Pow(Box::new(a.resolve()?), k),
            Expr::Sin(a) => Expr::Sin(Box::new(a.resolve()?)),
            Expr::Cos(a) => Expr::Cos(Box::new(a.resolve()?)),
            Expr::Exp(a) => Expr::Exp(Box::new(a.resolve()?)),
            e @ (Expr::Var(_) | Expr::Const(_)) => e,
        })
    }

    /// Largest variable index plus one.
    pub fn arity(&self) -> usize {
        match self {
            Expr::Var(i) => i + 1,
            Expr::Const(_) => 0,
            Expr::Add(v) | Expr::Mul(v) => v.iter().map(Expr::arity).max().unwrap_or(0),
            Expr::Neg(a)
            | Expr::Pow(a, _)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Exp(a)
            | Expr::Func { arg: a, .. } => a.arity(),
        }
    }

    /// Evaluates at `x`; unresolved `Func` nodes evaluate to NaN.
    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        match self {
            Expr::Var(i) => x[*i],
            Expr::Const(c) => S::from_f64(*c),
            Expr::Add(v) => {
                let mut acc = S::zero();
                for e in v {
                    acc += e.eval(x);
                }
                acc
            }
            Expr::Mul(v) => {
                let mut acc = S::one();
                for e in v {
                    acc *= e.eval(x);
                }
                acc
            }
            Expr::Neg(a) => -a.eval(x),
            Expr::Pow(a, k) => a.eval(x).powi(*k as i32),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
            Expr::Exp(a) => a.eval(x).exp(),
            Expr::Func { .. } => S::from_f64(f64::NAN),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// Symbolic partial derivative with light simplification.
    pub fn diff(&self, k: usize) -> Expr {
        match self {
            Expr::Var(i) => cst(if *i == k { 1.0 } else { 0.0 }),
            Expr::Const(_) => cst(0.0),
            Expr::Add(v) => sum(v.iter().map(|e| e.diff(k)).collect()),
            Expr::Mul(v) => {
                let mut terms = Vec::new();
                for j in 0..v.len() {
                    let dj = v[j].diff(k);
                    if dj.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<Expr> = Vec::with_capacity(v.len());
                    for (i, e) in v.iter().enumerate() {
                        factors.push(if i == j { dj.clone() } else { e.clone() });
                    }
                    terms.push(product(factors));
                }
                sum(terms)
            }
            Expr::Neg(a) => {
                let d = a.diff(k);
                if d.is_zero() {
                    d
                } else {
                    Expr::Neg(Box::new(d))
                }
            }
            Expr::Pow(a, p) => match p {
                0 => cst(0.0),
                1 => a.diff(k),
                _ => product(vec![
                    cst(*p as f64),
                    a.as_ref().clone().pow(p - 1),
                    a.diff(k),
                ]),
            },
            Expr::Sin(a) => product(vec![a.as_ref().clone().cos(), a.diff(k)]),
            Expr::Cos(a) => {
                let d = product(vec![a.as_ref().clone().sin(), a.diff(k)]);
                if d.is_zero() {
                    d
                } else {
                    Expr::Neg(Box::new(d))
                }
            }
            Expr::Exp(a) => product(vec![self.clone(), a.diff(k)]),
            Expr::Func { name, arg } => Expr::Func {
                name: format!("d{name}"),
                arg: arg.clone(),
            },
        }
    }

    /// Replaces every occurrence of `target` (structural equality) by `with`.
    pub fn substitute(&self, target: &Expr, with: &Expr) -> Expr {
        if self == target {
            return with.clone();
        }
        match self {
            Expr::Add(v) => Expr::Add(v.iter().map(|e| e.substitute(target, with)).collect()),
            Expr::Mul(v) => Expr::Mul(v.iter().map(|e| e.substitute(target, with)).collect()),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(target, with))),
            Expr::Pow(a, p) => Expr::Pow(Box::new(a.substitute(target, with)), *p),
            Expr::Sin(a) => Expr::Sin(Box::new(a.substitute(target, with))),
            Expr::Cos(a) => Expr::Cos(Box::new(a.substitute(target, with))),
            Expr::Exp(a) => Expr::Exp(Box::new(a.substitute(target, with))),
            Expr::Func { name, arg } => Expr::Func {
                name: name.clone(),
                arg: Box::new(arg.substitute(target, with)),
            },
            e => e.clone(),
        }
    }
}

/// Sum with zero terms dropped and constants folded.
pub fn sum(terms: Vec<Expr>) -> Expr {
    let mut c = 0.0;
    let mut rest = Vec::new();
    for t in terms {
        match t {
            Expr::Const(v) => c += v,
            Expr::Add(inner) => rest.extend(inner),
            other => rest.push(other),
        }
    }
    if c != 0.0 {
        rest.push(cst(c));
    }
    match rest.len() {
        0 => cst(0.0),
        1 => rest.pop().expect("one term"),
        _ => Expr::Add(rest),
    }
}

/// Product with constants folded; any zero factor yields zero.
pub fn product(factors: Vec<Expr>) -> Expr {
    let mut c = 1.0;
    let mut rest = Vec::new();
    for f in factors {
        match f {
            Expr::Const(v) => c *= v,
            Expr::Mul(inner) => {
                for g in inner {
                    match g {
                        Expr::Const(v) => c *= v,
                        other => rest.push(other),
                    }
                }
            }
            other => rest.push(other),
        }
    }
    if c == 0.0 {
        return cst(0.0);
    }
    if c != 1.0 {
        rest.insert(0, cst(c));
    }
    match rest.len() {
        0 => cst(c),
        1 => rest.pop().expect("one factor"),
        _ => Expr::Mul(rest),
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, o: Expr) -> Expr {
        sum(vec![self, o])
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, o: Expr) -> Expr {
        sum(vec![self, Expr::Neg(Box::new(o))])
    }
}

impl Mul for Expr {
    type Output = Expr;
    fn mul(self, o: Expr) -> Expr {
        product(vec![self, o])
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}
