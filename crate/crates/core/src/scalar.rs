//! Scalar types for generic evaluation: plain `f64`, forward-mode duals and
//! truncated Taylor series (jets).

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

/// Number type that model callbacks are written against.
pub trait Scalar:
    Copy
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + 'static
{
    fn from_f64(v: f64) -> Self;
    /// The real part (value without derivative information).
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;

    fn zero() -> Self {
        Self::from_f64(0.0)
    }

    fn one() -> Self {
        Self::from_f64(1.0)
    }

    fn powi(self, n: i32) -> Self {
        if n < 0 {
            return Self::one() / self.powi(-n);
        }
        let mut acc = Self::one();
        let mut base = self;
        let mut k = n as u32;
        while k > 0 {
            if k & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            k >>= 1;
        }
        acc
    }

    fn scale(self, c: f64) -> Self {
        self * Self::from_f64(c)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
}

/// Forward-mode dual number `re + du·ε` with `ε² = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Dual {
    pub re: f64,
    pub du: f64,
}

impl Dual {
    pub fn new(re: f64, du: f64) -> Self {
        Self { re, du }
    }

    pub fn constant(re: f64) -> Self {
        Self { re, du: 0.0 }
    }

    pub fn variable(re: f64) -> Self {
        Self { re, du: 1.0 }
    }
}

impl Add for Dual {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.du + o.du)
    }
}

impl Sub for Dual {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.du - o.du)
    }
}

impl Mul for Dual {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.du * o.re + self.re * o.du)
    }
}

impl Div for Dual {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Dual::new(q, (self.du - q * o.du) / o.re)
    }
}

impl Neg for Dual {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.du)
    }
}

impl AddAssign for Dual {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for Dual {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl MulAssign for Dual {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl Scalar for Dual {
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }
    fn value(&self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.du * self.re.cos())
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -self.du * self.re.sin())
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.du * e)
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::constant(1.0);
        }
        Dual::new(self.re.powi(n), self.du * n as f64 * self.re.powi(n - 1))
    }
}

/// Number of stored Taylor coefficients in a [`Jet`].
pub const JET_LEN: usize = 8;

/// Truncated Taylor series `Σ c_k t^k`, `k < JET_LEN`, over any scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet<S: Scalar> {
    pub c: [S; JET_LEN],
}

impl<S: Scalar> Jet<S> {
    pub fn constant(v: S) -> Self {
        let mut c = [S::zero(); JET_LEN];
        c[0] = v;
        Self { c }
    }

    pub fn from_coeffs(coeffs: &[S]) -> Self {
        let mut c = [S::zero(); JET_LEN];
        for (dst, src) in c.iter_mut().zip(coeffs) {
            *dst = *src;
        }
        Self { c }
    }

    fn sin_cos(self) -> (Self, Self) {
        let mut s = [S::zero(); JET_LEN];
        let mut co = [S::zero(); JET_LEN];
        s[0] = self.c[0].sin();
        co[0] = self.c[0].cos();
        for k in 1..JET_LEN {
            let mut acc_s = S::zero();
            let mut acc_c = S::zero();
            for j in 1..=k {
                let ju = self.c[j].scale(j as f64);
                acc_s += ju * co[k - j];
                acc_c += ju * s[k - j];
            }
            s[k] = acc_s.scale(1.0 / k as f64);
            co[k] = -acc_c.scale(1.0 / k as f64);
        }
        (Self { c: s }, Self { c: co })
    }
}

impl<S: Scalar> Add for Jet<S> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(o.c) {
            *a += b;
        }
        Self { c }
    }
}

impl<S: Scalar> Sub for Jet<S> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        let mut c = self.c;
        for (a, b) in c.iter_mut().zip(o.c) {
            *a -= b;
        }
        Self { c }
    }
}

impl<S: Scalar> Mul for Jet<S> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut c = [S::zero(); JET_LEN];
        for (k, ck) in c.iter_mut().enumerate() {
            for j in 0..=k {
                *ck += self.c[j] * o.c[k - j];
            }
        }
        Self { c }
    }
}

impl<S: Scalar> Div for Jet<S> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let mut c = [S::zero(); JET_LEN];
        for k in 0..JET_LEN {
            let mut acc = self.c[k];
            for j in 1..=k {
                acc -= o.c[j] * c[k - j];
            }
            c[k] = acc / o.c[0];
        }
        Self { c }
    }
}

impl<S: Scalar> Neg for Jet<S> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut c = self.c;
        for a in c.iter_mut() {
            *a = -*a;
        }
        Self { c }
    }
}

impl<S: Scalar> AddAssign for Jet<S> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<S: Scalar> SubAssign for Jet<S> {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl<S: Scalar> MulAssign for Jet<S> {
    fn mul_assign(&mut self, o: Self) {
        *self = *self * o;
    }
}

impl<S: Scalar> Scalar for Jet<S> {
    fn from_f64(v: f64) -> Self {
        Jet::constant(S::from_f64(v))
    }
    fn value(&self) -> f64 {
        self.c[0].value()
    }
    fn sin(self) -> Self {
        self.sin_cos().0
    }
    fn cos(self) -> Self {
        self.sin_cos().1
    }
    fn exp(self) -> Self {
        let mut e = [S::zero(); JET_LEN];
        e[0] = self.c[0].exp();
        for k in 1..JET_LEN {
            let mut acc = S::zero();
            for j in 1..=k {
                acc += self.c[j].scale(j as f64) * e[k - j];
            }
            e[k] = acc.scale(1.0 / k as f64);
        }
        Self { c: e }
    }
    fn scale(self, f: f64) -> Self {
        let mut c = self.c;
        for a in c.iter_mut() {
            *a = a.scale(f);
        }
        Self { c }
    }
}

/// Gradient of a scalar function by one forward-mode pass per coordinate.
pub fn gradient<F>(f: F, x: &[f64]) -> Vec<f64>
where
    F: Fn(&[Dual]) -> Dual,
{
    let mut xs: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut g = vec![0.0; x.len()];
    for k in 0..x.len() {
        xs[k].du = 1.0;
        g[k] = f(&xs).du;
        xs[k].du = 0.0;
    }
    g
}

/// Jacobian (row per output) of a vector function by forward mode.
pub fn jacobian<F>(f: F, x: &[f64], m: usize) -> Vec<Vec<f64>>
where
    F: Fn(&[Dual]) -> Vec<Dual>,
{
    let mut xs: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
    let mut jac = vec![vec![0.0; x.len()]; m];
    for k in 0..x.len() {
        xs[k].du = 1.0;
        let out = f(&xs);
        for (row, v) in jac.iter_mut().zip(out) {
            row[k] = v.du;
        }
        xs[k].du = 0.0;
    }
    jac
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_jet(a: f64) -> Jet<f64> {
        Jet::from_coeffs(&[a, 1.0])
    }

    #[test]
    fn dual_product_rule() {
        let x = Dual::variable(3.0);
        let y = x * x * x.sin();
        let expect = 2.0 * 3.0 * 3f64.sin() + 9.0 * 3f64.cos();
        assert!((y.du - expect).abs() < 1e-12);
    }

    #[test]
    fn dual_division_and_powi() {
        let x = Dual::variable(2.0);
        let y = Dual::constant(1.0) / x.powi(3);
        assert!((y.re - 0.125).abs() < 1e-15);
        assert!((y.du + 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn jet_sin_matches_series() {
        let s = t_jet(0.0).sin();
        let expect = [
            0.0,
            1.0,
            0.0,
            -1.0 / 6.0,
            0.0,
            1.0 / 120.0,
            0.0,
            -1.0 / 5040.0,
        ];
        for (a, b) in s.c.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn jet_exp_and_division() {
        let e = t_jet(0.0).exp();
        let mut fact = 1.0;
        for k in 0..JET_LEN {
            if k > 0 {
                fact *= k as f64;
            }
            assert!((e.c[k] - 1.0 / fact).abs() < 1e-15);
        }
        let q = Jet::constant(1.0) / Jet::from_coeffs(&[1.0, -1.0]);
        for k in 0..JET_LEN {
            assert!((q.c[k] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn jet_cos_shifted() {
        let a = 0.7;
        let c = t_jet(a).cos();
        let mut fact = 1.0;
        for k in 0..JET_LEN {
            if k > 0 {
                fact *= k as f64;
            }
            let d = (a + k as f64 * std::f64::consts::FRAC_PI_2).cos();
            assert!((c.c[k] - d / fact).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_of_quadratic() {
        let g = gradient(|x| x[0] * x[0] + x[0] * x[1].scale(3.0), &[1.0, 2.0]);
        assert_eq!(g, vec![8.0, 3.0]);
    }
}
