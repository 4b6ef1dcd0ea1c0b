//! Polynomial recasting of quasi-polynomial systems, sum-of-squares
//! decompositions, SOS-convex Lyapunov functions and ball certificates for
//! systems with a Hurwitz linear part.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::expr::Expr;
use crate::linalg;
use crate::poly::{monomial_product, monomials, Monomial, Polynomial};
use crate::polytope::Polytope;
use crate::quadratic::LyapunovFunction;
use crate::scalar::Scalar;
use crate::sdp::{maximize_margin, LmiBlock, MarginProblem, SdpConfig};

/// Largest nesting depth of elementary functions accepted by [`recast`].
pub const MAX_RECAST_DEPTH: usize = 10;
/// Smallest accepted Gram eigenvalue.
pub const GRAM_TOL: f64 = 1e-9;
/// Coefficient-match tolerance of accepted decompositions.
pub const MATCH_TOL: f64 = 1e-8;

/// `ẋ = f(x)` with right-hand sides built from polynomials and the
/// registered elementary functions `sin`, `cos`, `exp`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiPolynomialSystem {
    pub state_dim: usize,
    pub rhs: Vec<Expr>,
}

impl QuasiPolynomialSystem {
    pub fn new(state_dim: usize, rhs: Vec<Expr>) -> Result<Self> {
        let s = Self { state_dim, rhs };
        s.validate()
    }

    /// Checks arity and resolves named functions.
    pub fn validate(self) -> Result<Self> {
        check_dim(self.state_dim, self.rhs.len())?;
        let rhs = self
            .rhs
            .into_iter()
            .map(Expr::resolve)
            .collect::<Result<Vec<_>>>()?;
        if let Some(e) = rhs.iter().find(|e| e.arity() > self.state_dim) {
            return Err(Error::InvalidArgument(format!(
                "right-hand side uses variable {} of {}",
                e.arity() - 1,
                self.state_dim
            )));
        }
        Ok(Self {
            state_dim: self.state_dim,
            rhs,
        })
    }

    pub fn field<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.rhs.iter().map(|e| e.eval(x)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialSystem {
    pub nvars: usize,
    pub rhs: Vec<Polynomial>,
}

impl PolynomialSystem {
    pub fn new(rhs: Vec<Polynomial>) -> Result<Self> {
        let nvars = rhs.len();
        if rhs.iter().any(|p| p.nvars() != nvars) {
            return Err(Error::InvalidArgument(
                "polynomial system must be square".into(),
            ));
        }
        Ok(Self { nvars, rhs })
    }

    pub fn field<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        self.rhs.iter().map(|p| p.eval(x)).collect()
    }

    pub fn degree(&self) -> u32 {
        self.rhs.iter().map(Polynomial::degree).max().unwrap_or(0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiftKind {
    Sin,
    Cos,
    Exp,
}

/// New variable `y = kind(arg)` with `arg` a polynomial in earlier
/// variables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedVariable {
    pub kind: LiftKind,
    pub arg: Polynomial,
}

/// Polynomial system over `x̃ = (x, y)` equivalent to the original on the
/// lifted manifold `y = s(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recast {
    pub system: PolynomialSystem,
    pub original_dim: usize,
    pub lifts: Vec<LiftedVariable>,
    /// Polynomial equalities `r(x̃) = 0` holding on the manifold.
    pub constraints: Vec<Polynomial>,
}

impl Recast {
    /// `x ↦ (x, s(x))`.
    pub fn lift(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        for l in &self.lifts {
            let a = l.arg.eval(&out[..]);
            out.push(match l.kind {
                LiftKind::Sin => a.sin(),
                LiftKind::Cos => a.cos(),
                LiftKind::Exp => a.exp(),
            });
        }
        out
    }

    /// Selects the original coordinates: `x = E₁x̃`.
    pub fn e1(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.original_dim, self.system.nvars, |i, j| {
            (i == j) as u8 as f64
        })
    }

    /// Selects the new coordinates: `y = E₂x̃`.
    pub fn e2(&self) -> DMatrix<f64> {
        let n = self.original_dim;
        DMatrix::from_fn(self.lifts.len(), self.system.nvars, |i, j| {
            (j == n + i) as u8 as f64
        })
    }

    /// Largest `|y − s(x)|` and `|r(x̃)|`.
    pub fn manifold_residual(&self, xt: &[f64]) -> f64 {
        let lifted = self.lift(&xt[..self.original_dim]);
        let mut worst = lifted
            .iter()
            .zip(xt)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        for r in &self.constraints {
            worst = worst.max(r.eval(xt).abs());
        }
        worst
    }
}

struct Recaster {
    cap: usize,
    count: usize,
    lifts: Vec<LiftedVariable>,
}

impl Recaster {
    fn find(&self, kind: LiftKind, arg: &Polynomial) -> Option<usize> {
        self.lifts
            .iter()
            .position(|l| l.kind == kind && &l.arg == arg)
    }

    fn polyize(&mut self, e: &Expr, depth: usize) -> Result<Polynomial> {
        let cap = self.cap;
        Ok(match e {
            Expr::Var(k) => Polynomial::var(cap, *k),
            Expr::Const(c) => Polynomial::constant(cap, *c),
            Expr::Add(ts) => {
                let mut acc = Polynomial::zero(cap);
                for t in ts {
                    acc = acc + self.polyize(t, depth)?;
                }
                acc
            }
            Expr::Mul(fs) => {
                let mut acc = Polynomial::constant(cap, 1.0);
                for f in fs {
                    acc = &acc * &self.polyize(f, depth)?;
                }
                acc
            }
            Expr::Neg(a) => -self.polyize(a, depth)?,
            Expr::Pow(a, k) => self.polyize(a, depth)?.pow(*k),
            Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) => {
                if depth >= MAX_RECAST_DEPTH {
                    return Err(Error::DepthExceeded(MAX_RECAST_DEPTH));
                }
                let arg = self.polyize(a, depth + 1)?;
                let kind = match e {
                    Expr::Sin(_) => LiftKind::Sin,
                    Expr::Cos(_) => LiftKind::Cos,
                    _ => LiftKind::Exp,
                };
                let idx = match self.find(kind, &arg) {
                    Some(i) => i,
                    None => {
                        if kind == LiftKind::Exp {
                            self.lifts.push(LiftedVariable { kind, arg });
                        } else {
                            self.lifts.push(LiftedVariable {
                                kind: LiftKind::Sin,
                                arg: arg.clone(),
                            });
                            self.lifts.push(LiftedVariable {
                                kind: LiftKind::Cos,
                                arg,
                            });
                        }
                        self.find(kind, &self.lifts.last().expect("pushed").arg.clone())
                            .expect("just added")
                    }
                };
                Polynomial::var(cap, self.count + idx)
            }
            Expr::Func { name, .. } => return Err(Error::UnregisteredFunction(name.clone())),
        })
    }
}

fn count_elementary(e: &Expr) -> usize {
    match e {
        Expr::Var(_) | Expr::Const(_) => 0,
        Expr::Add(v) | Expr::Mul(v) => v.iter().map(count_elementary).sum(),
        Expr::Neg(a) | Expr::Pow(a, _) => count_elementary(a),
        Expr::Sin(a) | Expr::Cos(a) | Expr::Exp(a) | Expr::Func { arg: a, .. } => {
            2 + count_elementary(a)
        }
    }
}

/// Replaces every elementary-function factor by a new variable whose
/// derivative follows from the chain rule, until the system is polynomial.
/// `sin`/`cos` of one argument share a pair of variables tied by
/// `y_s² + y_c² = 1`.
pub fn recast(sys: &QuasiPolynomialSystem) -> Result<Recast> {
    let sys = sys.clone().validate()?;
    let n = sys.state_dim;
    let cap = n + sys.rhs.iter().map(count_elementary).sum::<usize>();
    let mut r = Recaster {
        cap,
        count: n,
        lifts: Vec::new(),
    };
    let mut rhs = Vec::with_capacity(cap);
    for e in &sys.rhs {
        rhs.push(r.polyize(e, 0)?);
    }
    let total = n + r.lifts.len();
    for (k, l) in r.lifts.iter().enumerate() {
        let y = n + k;
        let mut adot = Polynomial::zero(cap);
        for (v, dv) in l.arg.gradient().into_iter().enumerate().take(y) {
            if !dv.is_zero() {
                adot = adot + &dv * &rhs[v];
            }
        }
        let d = match l.kind {
            LiftKind::Sin => &Polynomial::var(cap, y + 1) * &adot,
            LiftKind::Cos => -(&Polynomial::var(cap, y - 1) * &adot),
            LiftKind::Exp => &Polynomial::var(cap, y) * &adot,
        };
        rhs.push(d);
    }
    let rhs = rhs
        .iter()
        .map(|p| p.with_nvars(total))
        .collect::<Result<Vec<_>>>()?;
    let lifts = r
        .lifts
        .iter()
        .map(|l| {
            Ok(LiftedVariable {
                kind: l.kind,
                arg: l.arg.with_nvars(total)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut constraints = Vec::new();
    for (k, l) in lifts.iter().enumerate() {
        if l.kind == LiftKind::Sin {
            let s = Polynomial::var(total, n + k);
            let c = Polynomial::var(total, n + k + 1);
            constraints.push(&s * &s + &c * &c - Polynomial::constant(total, 1.0));
        }
    }
    Ok(Recast {
        system: PolynomialSystem::new(rhs)?,
        original_dim: n,
        lifts,
        constraints,
    })
}

/// Linear equality system over Gram entries and free coefficients.
struct GramProgram {
    n_vars: usize,
    /// `(offset, basis)` per Gram block.
    blocks: Vec<(usize, Vec<Monomial>)>,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
}

/// Polynomial with coefficients affine in the program variables.
type LinPoly = BTreeMap<Monomial, Vec<(usize, f64)>>;

fn sym_index(k: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * k - i * (i + 1) / 2 + j
}

impl GramProgram {
    fn new() -> Self {
        Self {
            n_vars: 0,
            blocks: Vec::new(),
            rows: Vec::new(),
        }
    }

    fn add_block(&mut self, basis: Vec<Monomial>) -> usize {
        let k = basis.len();
        let off = self.n_vars;
        self.n_vars += k * (k + 1) / 2;
        self.blocks.push((off, basis));
        self.blocks.len() - 1
    }

    fn add_free(&mut self, count: usize) -> usize {
        let off = self.n_vars;
        self.n_vars += count;
        off
    }

    fn entry(&self, block: usize, i: usize, j: usize) -> usize {
        let (off, basis) = &self.blocks[block];
        off + sym_index(basis.len(), i, j)
    }

    /// `zᵀQz` as a coefficient map.
    fn gram_poly(&self, block: usize) -> LinPoly {
        let basis = &self.blocks[block].1;
        let mut out = LinPoly::new();
        for i in 0..basis.len() {
            for j in i..basis.len() {
                let w = if i == j { 1.0 } else { 2.0 };
                out.entry(monomial_product(&basis[i], &basis[j]))
                    .or_default()
                    .push((self.entry(block, i, j), w));
            }
        }
        out
    }

    /// Adds `lhs(z) = constant` coefficientwise.
    fn match_poly(&mut self, lhs: &LinPoly, constant: &Polynomial) {
        let mut keys: Vec<&Monomial> = lhs.keys().collect();
        for (m, _) in constant.terms() {
            if !lhs.contains_key(m) {
                keys.push(m);
            }
        }
        let keys: Vec<Monomial> = keys.into_iter().cloned().collect();
        for m in keys {
            let coeffs = lhs.get(&m).cloned().unwrap_or_default();
            self.rows.push((coeffs, constant.coeff(&m)));
        }
    }

    fn matrix(&self) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = DMatrix::zeros(self.rows.len(), self.n_vars);
        let mut b = DVector::zeros(self.rows.len());
        for (r, (coeffs, rhs)) in self.rows.iter().enumerate() {
            for &(v, c) in coeffs {
                a[(r, v)] += c;
            }
            b[r] = *rhs;
        }
        (a, b)
    }

    fn block_matrix(&self, block: usize, z: &DVector<f64>) -> DMatrix<f64> {
        let k = self.blocks[block].1.len();
        DMatrix::from_fn(k, k, |i, j| z[self.entry(block, i, j)])
    }

    /// Solves the equalities, removes basis elements whose diagonal is
    /// forced to zero, and maximizes the smallest Gram eigenvalue.
    fn solve(mut self) -> Result<GramSolution> {
        let mut removed: Vec<Vec<bool>> = self
            .blocks
            .iter()
            .map(|(_, b)| vec![false; b.len()])
            .collect();
        let (z0, null) = loop {
            let (a, b) = self.matrix();
            let z0 = linalg::lstsq(&a, &b, 1e-12);
            let res = (&a * &z0 - &b).amax();
            if res > 1e-9 * (1.0 + b.amax()) {
                return Err(Error::CertificateRejected(format!(
                    "coefficient equations are inconsistent (residual {res:e})"
                )));
            }
            let null = linalg::nullspace(&a, 1e-10);
            let mut changed = false;
            for bi in 0..self.blocks.len() {
                let k = self.blocks[bi].1.len();
                for i in 0..k {
                    if removed[bi][i] {
                        continue;
                    }
                    let v = self.entry(bi, i, i);
                    let free = null.ncols() > 0 && null.row(v).amax() > 1e-9;
                    if z0[v].abs() <= 1e-10 && !free {
                        removed[bi][i] = true;
                        changed = true;
                        for j in 0..k {
                            self.rows.push((vec![(self.entry(bi, i, j), 1.0)], 0.0));
                        }
                    }
                }
            }
            if !changed {
                break (z0, null);
            }
        };
        let keep: Vec<Vec<usize>> = removed
            .iter()
            .map(|r| (0..r.len()).filter(|&i| !r[i]).collect())
            .collect();
        let reduce = |m: DMatrix<f64>, keep: &[usize]| {
            DMatrix::from_fn(keep.len(), keep.len(), |i, j| m[(keep[i], keep[j])])
        };
        let nf = null.ncols();
        let mut blocks = Vec::new();
        for bi in 0..self.blocks.len() {
            if keep[bi].is_empty() {
                continue;
            }
            let constant = reduce(self.block_matrix(bi, &z0), &keep[bi]);
            let coeffs = (0..nf)
                .map(|c| {
                    reduce(
                        self.block_matrix(bi, &null.column(c).into_owned()),
                        &keep[bi],
                    )
                })
                .collect();
            blocks.push(LmiBlock {
                constant,
                coeffs,
                margin: true,
            });
        }
        let problem = MarginProblem {
            n_vars: nf,
            blocks,
            rows: Vec::new(),
            margin_cap: 1.0,
        };
        let (z, margin) = if nf == 0 {
            (z0.clone(), problem.achieved_margin(&[]))
        } else {
            let sol = maximize_margin(&problem, &SdpConfig::default())?;
            let z = &z0 + &null * &sol.z;
            (z, sol.margin)
        };
        let grams = (0..self.blocks.len())
            .map(|bi| self.block_matrix(bi, &z))
            .collect();
        Ok(GramSolution {
            z,
            margin,
            grams,
            bases: self.blocks.into_iter().map(|(_, b)| b).collect(),
        })
    }
}

struct GramSolution {
    z: DVector<f64>,
    margin: f64,
    grams: Vec<DMatrix<f64>>,
    bases: Vec<Vec<Monomial>>,
}

fn gram_expand(basis: &[Monomial], q: &DMatrix<f64>, nvars: usize) -> Polynomial {
    let mut p = Polynomial::zero(nvars);
    for i in 0..basis.len() {
        for j in 0..basis.len() {
            p.add_term(monomial_product(&basis[i], &basis[j]), q[(i, j)]);
        }
    }
    p
}

fn min_eig(q: &DMatrix<f64>) -> f64 {
    if q.nrows() == 0 {
        return 0.0;
    }
    linalg::min_eigenvalue(&linalg::symmetrize(q)).unwrap_or(f64::NEG_INFINITY)
}

/// Gram matrix of a sum-of-squares polynomial over a monomial basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GramDecomposition {
    pub basis: Vec<Monomial>,
    pub gram: Vec<Vec<f64>>,
    pub min_eigenvalue: f64,
    /// Largest coefficient mismatch of `zᵀQz` against the input.
    pub residual: f64,
}

/// Finds `Q ⪰ 0` with `p = zᵀQz`.
pub fn sos_decompose(p: &Polynomial) -> Result<GramDecomposition> {
    let n = p.nvars();
    let (lo, hi) = (p.min_degree(), p.degree());
    if p.is_zero() {
        return Ok(GramDecomposition {
            basis: Vec::new(),
            gram: Vec::new(),
            min_eigenvalue: 0.0,
            residual: 0.0,
        });
    }
    if hi % 2 == 1 || lo % 2 == 1 {
        return Err(Error::NotSos {
            margin: f64::NEG_INFINITY,
        });
    }
    let basis = monomials(n, lo / 2, hi / 2);
    let mut prog = GramProgram::new();
    let b = prog.add_block(basis);
    let g = prog.gram_poly(b);
    prog.match_poly(&g, p);
    let sol = prog.solve()?;
    let q = &sol.grams[0];
    let basis = &sol.bases[0];
    let residual = gram_expand(basis, q, n).distance(p);
    let min_eigenvalue = min_eig(q);
    if sol.margin < -GRAM_TOL
        || min_eigenvalue < -GRAM_TOL
        || residual > 1e-10 * (1.0 + p.max_abs_coeff())
    {
        return Err(Error::NotSos {
            margin: sol.margin.min(min_eigenvalue),
        });
    }
    Ok(GramDecomposition {
        basis: basis.clone(),
        gram: linalg::to_rows(q),
        min_eigenvalue,
        residual,
    })
}

/// SOS-convex Lyapunov function with its three Gram certificates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SosCertificate {
    /// `V` in absolute coordinates.
    pub v_poly: Polynomial,
    pub equilibrium: Vec<f64>,
    pub basis: Vec<Monomial>,
    pub gram: Vec<Vec<f64>>,
    /// Gram of `½V(u) + ½V(u + w) − V(u + w/2)` over `(u, w)`.
    pub convexity_basis: Vec<Monomial>,
    pub convexity_gram: Vec<Vec<f64>>,
    /// Gram of `−V̇ − Σ σ_k r_k`.
    pub decrease_basis: Vec<Monomial>,
    pub decrease_gram: Vec<Vec<f64>>,
    /// Multipliers `σ_k` of the equality constraints (absolute coordinates).
    pub multipliers: Vec<Polynomial>,
    pub margin: f64,
    pub min_eigenvalues: [f64; 3],
    /// Largest coefficient mismatch of the decrease identity.
    pub decrease_residual: f64,
}

impl SosCertificate {
    pub fn derivative(&self, sys: &PolynomialSystem, x: &[f64]) -> f64 {
        let f = sys.field(x);
        self.v_poly
            .gradient()
            .iter()
            .zip(&f)
            .map(|(g, fi)| g.eval(x) * fi)
            .sum()
    }
}

impl LyapunovFunction for SosCertificate {
    fn dim(&self) -> usize {
        self.v_poly.nvars()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.v_poly.eval(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.v_poly.gradient().iter().map(|g| g.eval(x)).collect()
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let g = self.v_poly.gradient();
        DMatrix::from_fn(n, n, |i, j| g[i].diff(j).eval(x))
    }
}

/// Searches a degree-`degree` polynomial `V` with `V(x̃°) = 0`, `∇V(x̃°) = 0`,
/// Gram trace equal to the basis size, `V` SOS, `V` SOS-convex (midpoint
/// form) and `−V̇ − Σ σ_k r_k` SOS with free multipliers `σ_k` on the
/// equality constraints `r_k = 0`. `region` constrains the leading
/// coordinates and must contain `x̃°` strictly.
pub fn find_sos_convex_cllf(
    sys: &PolynomialSystem,
    constraints: &[Polynomial],
    degree: u32,
    equilibrium: &[f64],
    region: &Polytope,
) -> Result<SosCertificate> {
    let n = sys.nvars;
    check_dim(n, equilibrium.len())?;
    if region.dim() > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: region.dim(),
        });
    }
    if degree < 2 || degree % 2 == 1 {
        return Err(Error::InvalidArgument(
            "degree must be even and at least 2".into(),
        ));
    }
    if region.max_residual(&equilibrium[..region.dim()])? >= 0.0 {
        return Err(Error::PolytopeError(
            "equilibrium is not inside the region".into(),
        ));
    }
    for r in constraints {
        check_dim(n, r.nvars())?;
        if r.eval(equilibrium).abs() > 1e-9 {
            return Err(Error::PolytopeError(
                "equilibrium violates the algebraic constraints".into(),
            ));
        }
    }
    let f0 = sys.field(equilibrium);
    if f0.iter().any(|v| v.abs() > 1e-9) {
        return Err(Error::HypothesisViolation(
            "point is not an equilibrium".into(),
        ));
    }
    // Shifted coordinates u = x̃ − x̃°.
    let h: Vec<Polynomial> = sys
        .rhs
        .iter()
        .map(|p| p.shifted(equilibrium))
        .collect::<Result<_>>()?;
    let r: Vec<Polynomial> = constraints
        .iter()
        .map(|p| p.shifted(equilibrium))
        .collect::<Result<_>>()?;

    let mut prog = GramProgram::new();
    let v_basis = monomials(n, 1, degree / 2);
    let bv = prog.add_block(v_basis.clone());
    let kv = v_basis.len();

    // Per Gram entry: its contribution to V, the midpoint expression and V̇.
    let two_n = 2 * n;
    let u_sub: Vec<Polynomial> = (0..n).map(|k| Polynomial::var(two_n, k)).collect();
    let uw_sub: Vec<Polynomial> = (0..n)
        .map(|k| Polynomial::var(two_n, k) + Polynomial::var(two_n, n + k))
        .collect();
    let mid_sub: Vec<Polynomial> = (0..n)
        .map(|k| Polynomial::var(two_n, k) + Polynomial::var(two_n, n + k).scale(0.5))
        .collect();
    let mut e_lin = LinPoly::new();
    let mut vdot_lin = LinPoly::new();
    let mut vdot_degree = 0;
    for i in 0..kv {
        for j in i..kv {
            let w = if i == j { 1.0 } else { 2.0 };
            let vij = Polynomial::monomial(monomial_product(&v_basis[i], &v_basis[j]), w);
            let var = prog.entry(bv, i, j);
            let e = vij.compose(&u_sub)?.scale(0.5) + vij.compose(&uw_sub)?.scale(0.5)
                - vij.compose(&mid_sub)?;
            for (m, c) in e.pruned(1e-14).terms() {
                e_lin.entry(m.clone()).or_default().push((var, c));
            }
            let mut vdot = Polynomial::zero(n);
            for (k, g) in vij.gradient().iter().enumerate() {
                if !g.is_zero() {
                    vdot = vdot + g * &h[k];
                }
            }
            vdot_degree = vdot_degree.max(vdot.degree());
            for (m, c) in vdot.terms() {
                vdot_lin.entry(m.clone()).or_default().push((var, -c));
            }
        }
    }
    // Trace normalization.
    prog.rows.push((
        (0..kv).map(|i| (prog.entry(bv, i, i), 1.0)).collect(),
        kv as f64,
    ));

    let e_basis: Vec<Monomial> = monomials(two_n, 1, degree / 2)
        .into_iter()
        .filter(|m| m[n..].iter().any(|&e| e > 0))
        .collect();
    let be = prog.add_block(e_basis);
    let ge = prog.gram_poly(be);
    let mut e_eq = e_lin;
    for (m, terms) in ge {
        e_eq.entry(m)
            .or_default()
            .extend(terms.into_iter().map(|(v, c)| (v, -c)));
    }
    prog.match_poly(&e_eq, &Polynomial::zero(two_n));

    // −V̇ − Σ σ_k r_k = zᵀQ_D z.
    let sigma_degree = vdot_degree.saturating_sub(1);
    let sigma_basis = monomials(n, 0, sigma_degree);
    let mut sigma_offsets = Vec::new();
    let mut d_lin = vdot_lin;
    let mut total_degree = vdot_degree;
    for rk in &r {
        let off = prog.add_free(sigma_basis.len());
        sigma_offsets.push(off);
        total_degree = total_degree.max(sigma_degree + rk.degree());
        for (s, mono) in sigma_basis.iter().enumerate() {
            for (m, c) in rk.terms() {
                d_lin
                    .entry(monomial_product(mono, m))
                    .or_default()
                    .push((off + s, -c));
            }
        }
    }
    let d_basis = monomials(n, 1, total_degree.div_ceil(2).max(1));
    let bd = prog.add_block(d_basis);
    for (m, terms) in prog.gram_poly(bd) {
        d_lin
            .entry(m)
            .or_default()
            .extend(terms.into_iter().map(|(v, c)| (v, -c)));
    }
    prog.match_poly(&d_lin, &Polynomial::zero(n));

    let sol = prog.solve()?;
    let z = &sol.z;
    let q_v = &sol.grams[bv];
    let v_shift = gram_expand(&v_basis, q_v, n);
    let neg_shift: Vec<f64> = equilibrium.iter().map(|v| -v).collect();
    let v_poly = v_shift.shifted(&neg_shift)?.pruned(1e-15);
    let sigmas_shift: Vec<Polynomial> = sigma_offsets
        .iter()
        .map(|&off| {
            let mut p = Polynomial::zero(n);
            for (s, m) in sigma_basis.iter().enumerate() {
                p.add_term(m.clone(), z[off + s]);
            }
            p
        })
        .collect();
    let mut decrease = Polynomial::zero(n);
    for (k, g) in v_shift.gradient().iter().enumerate() {
        decrease = decrease - g * &h[k];
    }
    for (s, rk) in sigmas_shift.iter().zip(&r) {
        decrease = decrease - s * rk;
    }
    let q_d = &sol.grams[bd];
    let decrease_residual = gram_expand(&sol.bases[bd], q_d, n).distance(&decrease);
    let min_eigenvalues = [min_eig(q_v), min_eig(&sol.grams[be]), min_eig(q_d)];
    if sol.margin < -GRAM_TOL
        || min_eigenvalues.iter().any(|&e| e < -GRAM_TOL)
        || decrease_residual > MATCH_TOL
    {
        return Err(Error::CertificateRejected(format!(
            "no SOS-convex certificate of degree {degree} (margin {:e}, residual {decrease_residual:e})",
            sol.margin
        )));
    }
    let multipliers = sigmas_shift
        .iter()
        .map(|s| s.shifted(&neg_shift))
        .collect::<Result<Vec<_>>>()?;
    Ok(SosCertificate {
        v_poly,
        equilibrium: equilibrium.to_vec(),
        basis: v_basis,
        gram: linalg::to_rows(q_v),
        convexity_basis: sol.bases[be].clone(),
        convexity_gram: linalg::to_rows(&sol.grams[be]),
        decrease_basis: sol.bases[bd].clone(),
        decrease_gram: linalg::to_rows(q_d),
        multipliers,
        margin: sol.margin,
        min_eigenvalues,
        decrease_residual,
    })
}

/// Quadratic certificate on a ball `‖x − x°‖ ≤ r` for `ẏ = Ay + G(y)y`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallCertificate {
    pub p_matrix: Vec<Vec<f64>>,
    pub radius: f64,
    /// `max ‖G‖` over the sampled ball and equilibria.
    pub gamma: f64,
    pub p_norm: f64,
    pub q_min_eigenvalue: f64,
    /// `λ_min(Q) − 2γ‖P‖`.
    pub margin: f64,
    /// Sublevel value `λ_min(P) r²` certified around every equilibrium.
    pub level: f64,
}

impl BallCertificate {
    pub fn p(&self) -> DMatrix<f64> {
        linalg::to_dmatrix(&self.p_matrix).expect("square by construction")
    }
}

fn ball_samples(n: usize, radius: f64, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(samples + 2 * n);
    if n == 1 {
        let k = samples.max(2);
        for i in 0..k {
            out.push(vec![-radius + 2.0 * radius * i as f64 / (k - 1) as f64]);
        }
        return out;
    }
    for i in 0..n {
        for s in [-1.0, 1.0] {
            let mut e = vec![0.0; n];
            e[i] = s * radius;
            out.push(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..samples {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-300);
        let scale = if k % 2 == 0 {
            radius
        } else {
            radius * rng.gen::<f64>().powf(1.0 / n as f64)
        };
        out.push(v.iter().map(|a| a * scale / norm).collect());
    }
    out
}

/// Solves `PA + AᵀP = −I` and accepts the ball of radius `r` iff
/// `2γ‖P‖ < λ_min(Q)` with `γ` the sampled maximum of `‖G(x°, y)‖`.
pub fn ball_certificate<G>(
    a: &DMatrix<f64>,
    g: G,
    equilibria: &[Vec<f64>],
    radius: f64,
    samples: usize,
) -> Result<BallCertificate>
where
    G: Fn(&[f64], &[f64]) -> DMatrix<f64>,
{
    linalg::check_hurwitz(a)?;
    let n = a.nrows();
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument("radius must be positive".into()));
    }
    if equilibria.is_empty() {
        return Err(Error::InvalidArgument("no equilibria given".into()));
    }
    let q = DMatrix::identity(n, n);
    let p = linalg::solve_lyapunov(a, &q)?;
    let p_norm = linalg::spectral_norm(&p);
    let q_min = linalg::min_eigenvalue(&q)?;
    let ball = ball_samples(n, radius, samples, 7);
    let mut gamma = 0.0f64;
    for x0 in equilibria {
        check_dim(n, x0.len())?;
        for y in &ball {
            gamma = gamma.max(linalg::spectral_norm(&g(x0, y)));
        }
    }
    let margin = q_min - 2.0 * gamma * p_norm;
    if margin <= 0.0 {
        return Err(Error::CertificateRejected(format!(
            "2γ‖P‖ = {:e} exceeds λ_min(Q) = {q_min:e}",
            2.0 * gamma * p_norm
        )));
    }
    let level = linalg::min_eigenvalue(&p)? * radius * radius;
    Ok(BallCertificate {
        p_matrix: linalg::to_rows(&p),
        radius,
        gamma,
        p_norm,
        q_min_eigenvalue: q_min,
        margin,
        level,
    })
}

/// Samples of `x` in the box `[lo, hi]`, lifted onto the manifold.
pub fn lifted_samples(
    recast: &Recast,
    lo: &[f64],
    hi: &[f64],
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(a, b)| rng.gen_range(*a..=*b))
                .collect();
            recast.lift(&x)
        })
        .collect()
}
