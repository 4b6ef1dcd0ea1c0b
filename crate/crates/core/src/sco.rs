//! Single-level stability-constrained optimization: the optimal control
//! problem plus the Taylor map to the fault-cleared state, the sublevel
//! condition `V(x^c) ≤ V^min` and a description of `V^min` through facet
//! minima.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::lure::{convex_relaxation_coeffs, inner_approximation_coeffs, LinearBound};
use crate::manifold::EquilibriumManifold;
use crate::nlp::{self, NlpConfig, NlpEval, NlpModel, NlpSolution, NlpStatus};
use crate::poly::Polynomial;
use crate::polytope::Polytope;
use crate::quadratic::LyapunovFunction;
use crate::scalar::{Jet, Scalar};
use crate::scenario::{taylor_flow, DisturbanceScenario};
use crate::vmin::{facet_minimize, v_min};

/// Tolerance of the facet-bound tightness check at an optimum.
pub const TIGHTNESS_TOL: f64 = 1e-6;

/// An optimal control problem over decisions `w` whose equilibria are
/// parameterized as `x° = x°(w, q)`.
pub trait ScoModel: EquilibriumManifold {
    fn param_dim(&self) -> usize;
    fn equilibrium<S: Scalar>(&self, w: &[S], q: &[S]) -> Vec<S>;
    fn cost<S: Scalar>(&self, w: &[S], x: &[S]) -> S;
    /// During-fault vector field at control `w`.
    fn fault_field<S: Scalar>(&self, w: &[S], x: &[S]) -> Vec<S>;
    /// Constraints `≤ 0` on the equilibria covered by the common certificate.
    fn certificate_domain<S: Scalar>(&self, _w: &[S], _x: &[S]) -> Vec<S> {
        Vec::new()
    }
    /// Starting `(w, q)`.
    fn initial_guess(&self) -> (Vec<f64>, Vec<f64>);
    /// Bounds on `(w, q)` stacked.
    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.control_dim() + self.param_dim();
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }
    /// Typical cost magnitude.
    fn cost_scale(&self) -> f64 {
        1.0
    }
}

/// Default objective weight `min(1e-3, 1e-6·cost scale)`.
pub fn default_epsilon<M: ScoModel>(model: &M) -> f64 {
    (1e-6 * model.cost_scale().abs()).clamp(1e-12, 1e-3)
}

/// Common Lyapunov function `V(x − x°)`, shared by all equilibria.
#[derive(Clone, Debug, PartialEq)]
pub enum CommonLyapunov {
    Quadratic(DMatrix<f64>),
    Polynomial(Polynomial),
}

impl CommonLyapunov {
    pub fn quadratic(p: DMatrix<f64>) -> Result<Self> {
        linalg::check_square(&p)?;
        linalg::check_symmetric(&p, 1e-12 * p.amax().max(1.0))?;
        let p = linalg::symmetrize(&p);
        let m = linalg::min_eigenvalue(&p)?;
        if m <= linalg::PD_TOL {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: m });
        }
        Ok(Self::Quadratic(p))
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic(p) => p.nrows(),
            Self::Polynomial(v) => v.nvars(),
        }
    }

    pub fn value<S: Scalar>(&self, y: &[S]) -> S {
        match self {
            Self::Quadratic(p) => {
                let n = p.nrows();
                let mut acc = S::zero();
                for i in 0..n {
                    let mut row = S::zero();
                    for j in 0..n {
                        row += y[j].scale(p[(i, j)]);
                    }
                    acc += y[i] * row;
                }
                acc
            }
            Self::Polynomial(v) => v.eval(y),
        }
    }

    pub fn gradient<S: Scalar>(&self, y: &[S]) -> Vec<S> {
        match self {
            Self::Quadratic(p) => {
                let n = p.nrows();
                (0..n)
                    .map(|i| {
                        let mut row = S::zero();
                        for j in 0..n {
                            row += y[j].scale(2.0 * p[(i, j)]);
                        }
                        row
                    })
                    .collect()
            }
            Self::Polynomial(v) => v.gradient().iter().map(|g| g.eval(y)).collect(),
        }
    }

    /// `V` recentred at `centre` as a plain Lyapunov function.
    pub fn centred(&self, centre: &[f64]) -> CentredLyapunov<'_> {
        CentredLyapunov {
            v: self,
            centre: centre.to_vec(),
            hessian: match self {
                Self::Quadratic(_) => Vec::new(),
                Self::Polynomial(p) => {
                    let g = p.gradient();
                    g.iter()
                        .map(|gi| (0..p.nvars()).map(|k| gi.diff(k)).collect())
                        .collect()
                }
            },
        }
    }
}

pub struct CentredLyapunov<'a> {
    v: &'a CommonLyapunov,
    centre: Vec<f64>,
    hessian: Vec<Vec<Polynomial>>,
}

impl CentredLyapunov<'_> {
    fn shift(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.centre).map(|(a, b)| a - b).collect()
    }
}

impl LyapunovFunction for CentredLyapunov<'_> {
    fn dim(&self) -> usize {
        self.v.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.v.value(&self.shift(x))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.v.gradient(&self.shift(x))
    }

    fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        match self.v {
            CommonLyapunov::Quadratic(p) => p * 2.0,
            CommonLyapunov::Polynomial(_) => {
                let y = self.shift(x);
                let n = y.len();
                DMatrix::from_fn(n, n, |i, j| self.hessian[i][j].eval(&y))
            }
        }
    }
}

/// How the per-facet values of a quadratic `V` enter the problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacetForm {
    /// `V^min ≤ (dᵢ − Cᵢᵀx°)² / (CᵢᵀP⁻¹Cᵢ)` per facet.
    Concave,
    /// Secant relaxation over each paired facet, with `Cᵢᵀx°` ranges.
    ConvexRelaxation { ranges: Vec<(f64, f64)> },
    /// Inner approximation over each paired facet, with `Cᵢᵀx°` ranges.
    InnerApproximation { ranges: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum StabilityCertificate {
    /// Quadratic `V` with facet minimizers eliminated in closed form.
    ClosedForm {
        p: DMatrix<f64>,
        polytope: Polytope,
        form: FacetForm,
    },
    /// Facet points and multipliers as explicit variables with their
    /// stationarity conditions.
    FacetKkt {
        v: CommonLyapunov,
        polytope: Polytope,
    },
    /// Ball of radius `r` around `x°`: `V^min = λ_min(P) r²`.
    Ball { p: DMatrix<f64>, radius: f64 },
}

pub struct ScoProblem<'a, M> {
    pub model: &'a M,
    pub certificate: StabilityCertificate,
    pub scenario: DisturbanceScenario,
    pub epsilon: f64,
}

enum Stability {
    Closed {
        v: CommonLyapunov,
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
        /// `CᵢᵀP⁻¹Cᵢ`.
        inv_forms: Vec<f64>,
        /// Linear bounds per paired facet `(normal index, bounds)`.
        linear: Vec<(usize, [LinearBound; 2])>,
        /// Facets handled by the concave constraint.
        concave: Vec<usize>,
    },
    Kkt {
        v: CommonLyapunov,
        normals: Vec<Vec<f64>>,
        offsets: Vec<f64>,
    },
    Ball {
        v: CommonLyapunov,
        level: f64,
    },
}

/// The assembled single-level problem as an NLP over
/// `(w, q, x¹, λ₁, …, x^N, λ_N, V^min)`.
pub struct Ssco<'a, M> {
    model: &'a M,
    scenario: DisturbanceScenario,
    epsilon: f64,
    stability: Stability,
    polytope: Option<Polytope>,
    m: usize,
    r: usize,
    n: usize,
    n_eq_model: usize,
    n_ineq_model: usize,
    n_domain: usize,
    start: Vec<f64>,
}

/// Decision vector split into its blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct SscoPoint {
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    pub facet_points: Vec<Vec<f64>>,
    pub facet_multipliers: Vec<f64>,
    pub v_min: f64,
}

fn validate_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon <= 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "epsilon {epsilon} outside (0, 1e-3]"
        )));
    }
    Ok(())
}

fn polytope_rows(poly: &Polytope) -> (Vec<Vec<f64>>, Vec<f64>) {
    let normals = (0..poly.n_facets())
        .map(|i| poly.normal(i).iter().copied().collect())
        .collect();
    (normals, poly.offsets().iter().copied().collect())
}

/// Builds the single-level NLP.
pub fn assemble_ssco<'a, M: ScoModel>(problem: &ScoProblem<'a, M>) -> Result<Ssco<'a, M>> {
    validate_epsilon(problem.epsilon)?;
    problem.scenario.validate()?;
    let model = problem.model;
    let m = model.control_dim();
    let r = model.param_dim();
    let n = model.state_dim();
    let (w0, q0) = model.initial_guess();
    check_dim(m, w0.len())?;
    check_dim(r, q0.len())?;
    let x0 = model.equilibrium(&w0, &q0);
    check_dim(n, x0.len())?;
    let n_eq_model = model.steady_state_residual(&x0, &w0).len();
    let n_ineq_model = model.bound_constraints(&x0, &w0).len();
    let n_domain = model.certificate_domain(&w0, &x0).len();
    let (stability, polytope) = match &problem.certificate {
        StabilityCertificate::ClosedForm { p, polytope, form } => {
            check_dim(n, polytope.dim())?;
            let v = CommonLyapunov::quadratic(p.clone())?;
            let CommonLyapunov::Quadratic(p) = &v else {
                unreachable!()
            };
            let chol = p.clone().cholesky().ok_or(Error::Singular)?;
            let (normals, offsets) = polytope_rows(polytope);
            let inv_forms = normals
                .iter()
                .map(|c| {
                    let c = DVector::from_column_slice(c);
                    c.dot(&chol.solve(&c))
                })
                .collect();
            let mut linear = Vec::new();
            let mut concave: Vec<usize> = (0..polytope.n_facets()).collect();
            let ranges = match form {
                FacetForm::Concave => None,
                FacetForm::ConvexRelaxation { ranges }
                | FacetForm::InnerApproximation { ranges } => Some(ranges),
            };
            if let Some(ranges) = ranges {
                check_dim(polytope.pairing().len(), ranges.len())?;
                for (&(lo, hi), &(x_lo, x_hi)) in polytope.pairing().iter().zip(ranges) {
                    let d_hi = polytope.offset(hi);
                    let d_lo = -polytope.offset(lo);
                    let lines = match form {
                        FacetForm::ConvexRelaxation { .. } => {
                            convex_relaxation_coeffs(x_lo, x_hi, d_lo, d_hi)?.lines()
                        }
                        _ => inner_approximation_coeffs(x_lo, x_hi, d_lo, d_hi)?.lines,
                    };
                    linear.push((hi, lines));
                    concave.retain(|&k| k != lo && k != hi);
                }
            }
            (
                Stability::Closed {
                    v,
                    normals,
                    offsets,
                    inv_forms,
                    linear,
                    concave,
                },
                Some(polytope.clone()),
            )
        }
        StabilityCertificate::FacetKkt { v, polytope } => {
            check_dim(n, polytope.dim())?;
            check_dim(n, v.dim())?;
            let (normals, offsets) = polytope_rows(polytope);
            (
                Stability::Kkt {
                    v: v.clone(),
                    normals,
                    offsets,
                },
                Some(polytope.clone()),
            )
        }
        StabilityCertificate::Ball { p, radius } => {
            if !(*radius > 0.0) {
                return Err(Error::InvalidArgument(
                    "ball radius must be positive".into(),
                ));
            }
            let v = CommonLyapunov::quadratic(p.clone())?;
            let CommonLyapunov::Quadratic(pm) = &v else {
                unreachable!()
            };
            let level = linalg::min_eigenvalue(pm)? * radius * radius;
            (Stability::Ball { v, level }, None)
        }
    };
    if let Some(poly) = &polytope {
        if poly.max_residual(&x0)? >= 0.0 {
            return Err(Error::HypothesisViolation(
                "initial equilibrium is not strictly inside the polytope".into(),
            ));
        }
    }
    let mut ssco = Ssco {
        model,
        scenario: problem.scenario,
        epsilon: problem.epsilon,
        stability,
        polytope,
        m,
        r,
        n,
        n_eq_model,
        n_ineq_model,
        n_domain,
        start: Vec::new(),
    };
    ssco.start = ssco.build_start(&w0, &q0, &x0)?;
    Ok(ssco)
}

impl<M: ScoModel> Ssco<'_, M> {
    fn n_facets(&self) -> usize {
        match &self.stability {
            Stability::Kkt { normals, .. } => normals.len(),
            _ => 0,
        }
    }

    fn v(&self) -> &CommonLyapunov {
        match &self.stability {
            Stability::Closed { v, .. } | Stability::Kkt { v, .. } | Stability::Ball { v, .. } => v,
        }
    }

    fn build_start(&self, w0: &[f64], q0: &[f64], x0: &[f64]) -> Result<Vec<f64>> {
        let mut z = w0.to_vec();
        z.extend_from_slice(q0);
        let values = match &self.stability {
            Stability::Kkt { v, .. } => {
                let poly = self.polytope.as_ref().expect("facet form has a polytope");
                let centred = v.centred(x0);
                let mut values = Vec::new();
                for i in 0..poly.n_facets() {
                    let fm = facet_minimize(&centred, poly, i, None)?;
                    z.extend_from_slice(&fm.minimizer);
                    z.push(fm.multiplier);
                    values.push(fm.value);
                }
                values
            }
            _ => self.facet_values(w0, x0),
        };
        let vm = values.iter().copied().fold(f64::INFINITY, f64::min);
        z.push(if vm.is_finite() { vm } else { 0.0 });
        Ok(z)
    }

    /// Values `V(x̂ⁱ)` of the facet bounds at `(w, x°)`; for the explicit
    /// form these are read from the facet variables instead.
    fn facet_values(&self, _w: &[f64], x: &[f64]) -> Vec<f64> {
        match &self.stability {
            Stability::Closed {
                normals,
                offsets,
                inv_forms,
                ..
            } => normals
                .iter()
                .zip(offsets)
                .zip(inv_forms)
                .map(|((c, d), k)| {
                    let cx: f64 = c.iter().zip(x).map(|(a, b)| a * b).sum();
                    (d - cx).powi(2) / k
                })
                .collect(),
            Stability::Ball { level, .. } => vec![*level],
            Stability::Kkt { .. } => Vec::new(),
        }
    }

    pub fn unpack(&self, z: &[f64]) -> SscoPoint {
        let nf = self.n_facets();
        let base = self.m + self.r;
        SscoPoint {
            w: z[..self.m].to_vec(),
            q: z[self.m..base].to_vec(),
            facet_points: (0..nf)
                .map(|i| z[base + i * (self.n + 1)..base + i * (self.n + 1) + self.n].to_vec())
                .collect(),
            facet_multipliers: (0..nf)
                .map(|i| z[base + i * (self.n + 1) + self.n])
                .collect(),
            v_min: z[z.len() - 1],
        }
    }

    /// `x^c` from the Taylor expansion of the fault field at `x°`.
    pub fn cleared_state<S: Scalar>(&self, w: &[S], x: &[S]) -> Vec<S> {
        let wj: Vec<Jet<S>> = w.iter().map(|&v| Jet::constant(v)).collect();
        taylor_flow(
            |xj: &[Jet<S>]| self.model.fault_field(&wj, xj),
            x,
            self.scenario.duration(),
            self.scenario.taylor_order,
        )
        .expect("order validated at assembly")
    }

    pub fn scenario(&self) -> &DisturbanceScenario {
        &self.scenario
    }
}

fn dot<S: Scalar>(c: &[f64], x: &[S]) -> S {
    let mut acc = S::zero();
    for (a, b) in c.iter().zip(x) {
        acc += b.scale(*a);
    }
    acc
}

impl<M: ScoModel> NlpModel for Ssco<'_, M> {
    fn n_vars(&self) -> usize {
        self.m + self.r + self.n_facets() * (self.n + 1) + 1
    }

    fn n_eq(&self) -> usize {
        self.n_eq_model + self.n_facets() * (self.n + 1)
    }

    fn n_ineq(&self) -> usize {
        let facet_rows = match &self.stability {
            Stability::Closed {
                linear, concave, ..
            } => 2 * linear.len() + concave.len(),
            Stability::Kkt { normals, .. } => normals.len() * normals.len(),
            Stability::Ball { .. } => 1,
        };
        self.n_ineq_model + self.n_domain + 1 + facet_rows
    }

    fn eval<S: Scalar>(&self, z: &[S]) -> NlpEval<S> {
        let m = self.m;
        let base = m + self.r;
        let w = &z[..m];
        let q = &z[m..base];
        let vmin = z[z.len() - 1];
        let x = self.model.equilibrium(w, q);
        let objective = self.model.cost(w, &x) - vmin.scale(self.epsilon);
        let mut eq = self.model.steady_state_residual(&x, w);
        let mut ineq = self.model.bound_constraints(&x, w);
        ineq.extend(self.model.certificate_domain(w, &x));
        let xc = self.cleared_state(w, &x);
        let y: Vec<S> = xc.iter().zip(&x).map(|(a, b)| *a - *b).collect();
        ineq.push(self.v().value(&y) - vmin);
        match &self.stability {
            Stability::Closed {
                normals,
                offsets,
                inv_forms,
                linear,
                concave,
                ..
            } => {
                for &i in concave {
                    let gap = S::from_f64(offsets[i]) - dot(&normals[i], &x);
                    ineq.push(vmin - (gap * gap).scale(1.0 / inv_forms[i]));
                }
                for (i, lines) in linear {
                    let cx = dot(&normals[*i], &x);
                    for l in lines {
                        ineq.push(
                            vmin.scale(inv_forms[*i])
                                - cx.scale(l.slope)
                                - S::from_f64(l.intercept),
                        );
                    }
                }
            }
            Stability::Kkt {
                v,
                normals,
                offsets,
            } => {
                let nf = normals.len();
                for i in 0..nf {
                    let off = base + i * (self.n + 1);
                    let xi = &z[off..off + self.n];
                    let lam = z[off + self.n];
                    let yi: Vec<S> = xi.iter().zip(&x).map(|(a, b)| *a - *b).collect();
                    let g = v.gradient(&yi);
                    for k in 0..self.n {
                        eq.push(g[k] - lam.scale(normals[i][k]));
                    }
                    eq.push(dot(&normals[i], xi) - S::from_f64(offsets[i]));
                    ineq.push(vmin - v.value(&yi));
                    for j in 0..nf {
                        if j != i {
                            ineq.push(dot(&normals[j], xi) - S::from_f64(offsets[j]));
                        }
                    }
                }
            }
            Stability::Ball { level, .. } => ineq.push(vmin - S::from_f64(*level)),
        }
        NlpEval {
            objective,
            eq,
            ineq,
        }
    }

    fn initial_point(&self) -> Vec<f64> {
        self.start.clone()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let (mut lb, mut ub) = self.model.variable_bounds();
        let extra = self.n_vars() - lb.len();
        lb.extend(std::iter::repeat(f64::NEG_INFINITY).take(extra));
        ub.extend(std::iter::repeat(f64::INFINITY).take(extra));
        (lb, ub)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScoSolution {
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    pub equilibrium: Vec<f64>,
    pub v_min: f64,
    pub cleared_state: Vec<f64>,
    pub v_cleared: f64,
    /// `V(x̂ⁱ)` for every facet bound.
    pub facet_values: Vec<f64>,
    /// `minᵢ V(x̂ⁱ) − V^min`.
    pub tightness_gap: f64,
    pub tight: bool,
    pub cost: f64,
    /// Boundary minimum recomputed by the facet solver at the optimum.
    pub vmin_check: Option<f64>,
    pub nlp: NlpSolution,
}

impl ScoSolution {
    pub fn status(&self) -> NlpStatus {
        self.nlp.status
    }
}

/// Assembles and solves the single-level problem.
pub fn solve_sco<M: ScoModel>(
    problem: &ScoProblem<'_, M>,
    config: &NlpConfig,
) -> Result<ScoSolution> {
    let ssco = assemble_ssco(problem)?;
    let nlp_sol = nlp::solve(&ssco, config)?;
    let z = &nlp_sol.point;
    let pt = ssco.unpack(z);
    let x = problem.model.equilibrium(&pt.w, &pt.q);
    let xc = ssco.cleared_state(&pt.w, &x);
    let y: Vec<f64> = xc.iter().zip(&x).map(|(a, b)| a - b).collect();
    let v_cleared = ssco.v().value(&y);
    let facet_values = match &ssco.stability {
        Stability::Kkt { v, .. } => pt
            .facet_points
            .iter()
            .map(|xi| {
                let yi: Vec<f64> = xi.iter().zip(&x).map(|(a, b)| a - b).collect();
                v.value(&yi)
            })
            .collect(),
        _ => ssco.facet_values(&pt.w, &x),
    };
    let tightness_gap = facet_values.iter().copied().fold(f64::INFINITY, f64::min) - pt.v_min;
    let vmin_check = match (&ssco.polytope, nlp_sol.status) {
        (Some(poly), NlpStatus::Optimal) if poly.max_residual(&x)? < 0.0 => {
            Some(v_min(&ssco.v().centred(&x), poly, &x)?.v_min)
        }
        _ => None,
    };
    Ok(ScoSolution {
        cost: problem.model.cost(&pt.w, &x),
        w: pt.w,
        q: pt.q,
        equilibrium: x,
        v_min: pt.v_min,
        cleared_state: xc,
        v_cleared,
        facet_values,
        tight: tightness_gap.abs() <= TIGHTNESS_TOL,
        tightness_gap,
        vmin_check,
        nlp: nlp_sol,
    })
}

/// The optimal control problem without stability constraints.
struct Unconstrained<'a, M> {
    model: &'a M,
    start: Vec<f64>,
    n_eq: usize,
    n_ineq: usize,
}

impl<M: ScoModel> NlpModel for Unconstrained<'_, M> {
    fn n_vars(&self) -> usize {
        self.start.len()
    }

    fn n_eq(&self) -> usize {
        self.n_eq
    }

    fn n_ineq(&self) -> usize {
        self.n_ineq
    }

    fn eval<S: Scalar>(&self, z: &[S]) -> NlpEval<S> {
        let m = self.model.control_dim();
        let (w, q) = z.split_at(m);
        let x = self.model.equilibrium(w, q);
        NlpEval {
            objective: self.model.cost(w, &x),
            eq: self.model.steady_state_residual(&x, w),
            ineq: self.model.bound_constraints(&x, w),
        }
    }

    fn initial_point(&self) -> Vec<f64> {
        self.start.clone()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        self.model.variable_bounds()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeSolution {
    pub w: Vec<f64>,
    pub q: Vec<f64>,
    pub equilibrium: Vec<f64>,
    pub cost: f64,
    pub nlp: NlpSolution,
}

/// Solves the problem with the stability constraints removed.
pub fn solve_stability_free<M: ScoModel>(model: &M, config: &NlpConfig) -> Result<FreeSolution> {
    let (w0, q0) = model.initial_guess();
    let x0 = model.equilibrium(&w0, &q0);
    let mut start = w0.clone();
    start.extend_from_slice(&q0);
    let nlp_model = Unconstrained {
        model,
        n_eq: model.steady_state_residual(&x0, &w0).len(),
        n_ineq: model.bound_constraints(&x0, &w0).len(),
        start,
    };
    let sol = nlp::solve(&nlp_model, config)?;
    let (w, q) = sol.point.split_at(model.control_dim());
    let x = model.equilibrium(w, q);
    Ok(FreeSolution {
        cost: model.cost(w, &x),
        w: w.to_vec(),
        q: q.to_vec(),
        equilibrium: x,
        nlp: sol,
    })
}
