//! Small dense nonlinear programming: augmented Lagrangian outer loop with
//! BFGS inner solves, followed by a Newton polish of the KKT system on the
//! identified active set. Derivatives come from forward-mode AD.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Dual, Scalar};

/// Objective and constraints at a point; inequalities use `g(x) ≤ 0`.
#[derive(Clone, Debug)]
pub struct NlpEval<S> {
    pub objective: S,
    pub eq: Vec<S>,
    pub ineq: Vec<S>,
}

/// A nonlinear program written against a generic scalar type so that
/// derivatives are exact.
pub trait NlpModel: Sync {
    fn n_vars(&self) -> usize;
    fn n_eq(&self) -> usize;
    fn n_ineq(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S]) -> NlpEval<S>;
    fn initial_point(&self) -> Vec<f64>;
    /// Lower and upper variable bounds (infinite when absent).
    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_vars();
        (vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NlpStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NlpSolution {
    pub point: Vec<f64>,
    pub objective_value: f64,
    pub kkt_residual: f64,
    pub max_violation: f64,
    pub status: NlpStatus,
    /// Multipliers `λ` of `∇f + Σλᵢ∇hᵢ + Σμⱼ∇gⱼ = 0`.
    pub eq_multipliers: Vec<f64>,
    pub ineq_multipliers: Vec<f64>,
    /// Positive for an active upper bound, negative for an active lower bound.
    pub bound_multipliers: Vec<f64>,
    pub evaluations: usize,
    pub start_index: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NlpConfig {
    pub outer_tol: f64,
    pub kkt_tol: f64,
    pub feas_tol: f64,
    pub max_outer: usize,
    /// Cap on gradient evaluations per start.
    pub max_evaluations: usize,
    pub multistart: usize,
    pub seed: u64,
    /// Relative size of multistart perturbations.
    pub perturbation: f64,
}

impl Default for NlpConfig {
    fn default() -> Self {
        Self {
            outer_tol: 1e-8,
            kkt_tol: 1e-7,
            feas_tol: 1e-8,
            max_outer: 50,
            max_evaluations: 10_000,
            multistart: 5,
            seed: 42,
            perturbation: 0.1,
        }
    }
}

/// Internal view: model inequalities followed by finite variable bounds.
struct Problem<'a, M: NlpModel> {
    model: &'a M,
    n: usize,
    me: usize,
    mi: usize,
    lower: Vec<(usize, f64)>,
    upper: Vec<(usize, f64)>,
}

struct Point {
    f: f64,
    h: DVector<f64>,
    g: DVector<f64>,
}

struct Derivs {
    grad: DVector<f64>,
    jh: DMatrix<f64>,
    jg: DMatrix<f64>,
}

impl<'a, M: NlpModel> Problem<'a, M> {
    fn new(model: &'a M) -> Self {
        let (lb, ub) = model.bounds();
        let lower = lb
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, &v)| (k, v))
            .collect();
        let upper = ub
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(k, &v)| (k, v))
            .collect();
        Self {
            model,
            n: model.n_vars(),
            me: model.n_eq(),
            mi: model.n_ineq(),
            lower,
            upper,
        }
    }

    fn n_g(&self) -> usize {
        self.mi + self.lower.len() + self.upper.len()
    }

    fn eval_generic<S: Scalar>(&self, x: &[S]) -> (S, Vec<S>, Vec<S>) {
        let e = self.model.eval(x);
        let mut g = e.ineq;
        for &(k, v) in &self.lower {
            g.push(S::from_f64(v) - x[k]);
        }
        for &(k, v) in &self.upper {
            g.push(x[k] - S::from_f64(v));
        }
        (e.objective, e.eq, g)
    }

    fn point(&self, x: &[f64]) -> Point {
        let (f, h, g) = self.eval_generic(x);
        Point {
            f,
            h: DVector::from_vec(h),
            g: DVector::from_vec(g),
        }
    }

    fn derivs(&self, x: &[f64]) -> (Point, Derivs) {
        let n = self.n;
        let ng = self.n_g();
        let mut xs: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
        let mut grad = DVector::zeros(n);
        let mut jh = DMatrix::zeros(self.me, n);
        let mut jg = DMatrix::zeros(ng, n);
        let mut pt = None;
        for k in 0..n {
            xs[k].du = 1.0;
            let (f, h, g) = self.eval_generic(&xs);
            xs[k].du = 0.0;
            grad[k] = f.du;
            for (i, v) in h.iter().enumerate() {
                jh[(i, k)] = v.du;
            }
            for (i, v) in g.iter().enumerate() {
                jg[(i, k)] = v.du;
            }
            if pt.is_none() {
                pt = Some(Point {
                    f: f.re,
                    h: DVector::from_iterator(h.len(), h.iter().map(|d| d.re)),
                    g: DVector::from_iterator(g.len(), g.iter().map(|d| d.re)),
                });
            }
        }
        let pt = pt.unwrap_or_else(|| self.point(x));
        (pt, Derivs { grad, jh, jg })
    }
}

fn violation(pt: &Point) -> f64 {
    let h = pt.h.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let g = pt.g.iter().fold(0.0f64, |a, v| a.max(*v));
    h.max(g)
}

/// Scaled KKT residual: stationarity, dual feasibility and complementarity.
fn kkt_residual(pt: &Point, d: &Derivs, lam: &DVector<f64>, mu: &DVector<f64>) -> f64 {
    let r = &d.grad + d.jh.transpose() * lam + d.jg.transpose() * mu;
    let scale = 1.0 + d.grad.amax();
    let stat = r.amax() / scale;
    let dual = mu.iter().fold(0.0f64, |a, v| a.max(-v));
    let comp = mu
        .iter()
        .zip(pt.g.iter())
        .fold(0.0f64, |a, (m, g)| a.max((m * g).abs()))
        / scale;
    stat.max(dual).max(comp)
}

/// Compares forward-mode derivatives with central differences.
pub fn derivative_audit<M: NlpModel>(model: &M, x: &[f64]) -> f64 {
    let p = Problem::new(model);
    let (_, d) = p.derivs(x);
    let mut worst = 0.0f64;
    for k in 0..p.n {
        let hstep = 1e-6 * (1.0 + x[k].abs());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += hstep;
        xm[k] -= hstep;
        let a = p.point(&xp);
        let b = p.point(&xm);
        let mut check = |ad: f64, fd: f64| {
            let err = (ad - fd).abs() / (1.0 + ad.abs().max(fd.abs()));
            worst = worst.max(err);
        };
        check(d.grad[k], (a.f - b.f) / (2.0 * hstep));
        for i in 0..p.me {
            check(d.jh[(i, k)], (a.h[i] - b.h[i]) / (2.0 * hstep));
        }
        for i in 0..p.n_g() {
            check(d.jg[(i, k)], (a.g[i] - b.g[i]) / (2.0 * hstep));
        }
    }
    worst
}

struct Run {
    x: DVector<f64>,
    lam: DVector<f64>,
    mu: DVector<f64>,
    evaluations: usize,
    exhausted: bool,
    rho_maxed: bool,
}

fn augmented_lagrangian<M: NlpModel>(
    p: &Problem<M>,
    x0: &[f64],
    cfg: &NlpConfig,
    fscale: f64,
) -> Run {
    let ng = p.n_g();
    let mut x = DVector::from_column_slice(x0);
    let mut lam = DVector::zeros(p.me);
    let mut mu = DVector::zeros(ng);
    let mut rho: f64 = 10.0;
    const RHO_MAX: f64 = 1e10;
    let mut omega = 1e-3;
    let mut evaluations = 0usize;
    let mut prev_viol = f64::INFINITY;
    let mut exhausted = false;

    let phi_val = |pt: &Point, lam: &DVector<f64>, mu: &DVector<f64>, rho: f64| -> f64 {
        let mut v = fscale * pt.f + lam.dot(&pt.h) + 0.5 * rho * pt.h.norm_squared();
        for i in 0..pt.g.len() {
            let t = (mu[i] + rho * pt.g[i]).max(0.0);
            v += (t * t - mu[i] * mu[i]) / (2.0 * rho);
        }
        v
    };
    let phi_grad =
        |pt: &Point, d: &Derivs, lam: &DVector<f64>, mu: &DVector<f64>, rho: f64| -> DVector<f64> {
            let eqw = lam + &pt.h * rho;
            let inw = DVector::from_fn(pt.g.len(), |i, _| (mu[i] + rho * pt.g[i]).max(0.0));
            &d.grad * fscale + d.jh.transpose() * eqw + d.jg.transpose() * inw
        };

    for _outer in 0..cfg.max_outer {
        // BFGS on the augmented Lagrangian.
        let (mut pt, d) = p.derivs(x.as_slice());
        evaluations += 1;
        let mut val = phi_val(&pt, &lam, &mu, rho);
        let mut grad = phi_grad(&pt, &d, &lam, &mu, rho);
        let mut hinv = DMatrix::identity(p.n, p.n);
        let mut first = true;
        for _inner in 0..2000 {
            if grad.amax() <= omega {
                break;
            }
            if evaluations >= cfg.max_evaluations {
                exhausted = true;
                break;
            }
            let mut dir = -(&hinv * &grad);
            let mut slope = grad.dot(&dir);
            if slope >= 0.0 {
                hinv = DMatrix::identity(p.n, p.n);
                dir = -grad.clone();
                slope = grad.dot(&dir);
            }
            let mut alpha = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let xt = &x + &dir * alpha;
                let pt_t = p.point(xt.as_slice());
                let vt = phi_val(&pt_t, &lam, &mu, rho);
                if vt.is_finite() && vt <= val + 1e-4 * alpha * slope {
                    accepted = Some(xt);
                    break;
                }
                alpha *= 0.5;
            }
            let Some(xn) = accepted else {
                break;
            };
            let (pt_n, d_n) = p.derivs(xn.as_slice());
            evaluations += 1;
            let grad_n = phi_grad(&pt_n, &d_n, &lam, &mu, rho);
            let s = &xn - &x;
            let y = &grad_n - &grad;
            let sy = s.dot(&y);
            if sy > 1e-12 * s.norm() * y.norm() {
                if first {
                    hinv *= sy / y.norm_squared();
                    first = false;
                }
                let r = 1.0 / sy;
                let hy = &hinv * &y;
                let yhy = y.dot(&hy);
                hinv += (&s * s.transpose()) * (r * r * yhy + r)
                    - (&hy * s.transpose() + &s * hy.transpose()) * r;
            }
            let step = s.amax();
            x = xn;
            pt = pt_n;
            val = phi_val(&pt, &lam, &mu, rho);
            grad = grad_n;
            if step <= 1e-15 * (1.0 + x.amax()) {
                break;
            }
        }
        // Multiplier update.
        lam += &pt.h * rho;
        for i in 0..ng {
            mu[i] = (mu[i] + rho * pt.g[i]).max(0.0);
        }
        let viol = violation(&pt);
        if exhausted {
            break;
        }
        if viol <= cfg.outer_tol && omega <= cfg.outer_tol {
            break;
        }
        if viol > 0.25 * prev_viol && viol > cfg.outer_tol {
            rho = (rho * 10.0).min(RHO_MAX);
        }
        prev_viol = viol;
        omega = (omega * 0.1).max(cfg.outer_tol);
    }
    Run {
        x,
        lam,
        mu,
        evaluations,
        exhausted,
        rho_maxed: rho >= RHO_MAX,
    }
}

/// Gradient of the Lagrangian (true objective scale).
fn lagrangian_grad<M: NlpModel>(
    p: &Problem<M>,
    x: &[f64],
    lam: &DVector<f64>,
    mu: &DVector<f64>,
) -> DVector<f64> {
    let (_, d) = p.derivs(x);
    &d.grad + d.jh.transpose() * lam + d.jg.transpose() * mu
}

/// Newton iterations on the KKT system restricted to an active set.
fn polish<M: NlpModel>(
    p: &Problem<M>,
    x0: DVector<f64>,
    lam0: DVector<f64>,
    mu0: DVector<f64>,
    cfg: &NlpConfig,
) -> (DVector<f64>, DVector<f64>, DVector<f64>, f64, f64) {
    let n = p.n;
    let ng = p.n_g();
    let score = |x: &DVector<f64>, lam: &DVector<f64>, mu: &DVector<f64>| {
        let (pt, d) = p.derivs(x.as_slice());
        (kkt_residual(&pt, &d, lam, mu), violation(&pt))
    };
    let mut best = (x0.clone(), lam0.clone(), mu0.clone());
    let (mut best_kkt, mut best_viol) = score(&x0, &lam0, &mu0);
    let (mut x, mut lam, mut mu) = (x0, lam0, mu0);
    let pt0 = p.point(x.as_slice());
    let gscale = 1.0 + pt0.g.amax().abs();
    let mut active: Vec<bool> = (0..ng)
        .map(|i| mu[i] > 1e-10 || pt0.g[i] > -1e-7 * gscale)
        .collect();
    for _ in 0..30 {
        let (pt, d) = p.derivs(x.as_slice());
        let act: Vec<usize> = (0..ng).filter(|&i| active[i]).collect();
        let na = act.len();
        // Hessian of the Lagrangian by differences of exact gradients.
        let mut hess = DMatrix::zeros(n, n);
        for k in 0..n {
            let hstep = 1e-6 * (1.0 + x[k].abs());
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += hstep;
            xm[k] -= hstep;
            let col = (lagrangian_grad(p, xp.as_slice(), &lam, &mu)
                - lagrangian_grad(p, xm.as_slice(), &lam, &mu))
                / (2.0 * hstep);
            hess.set_column(k, &col);
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let dim = n + p.me + na;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&hess);
        for i in 0..p.me {
            for k in 0..n {
                kkt[(n + i, k)] = d.jh[(i, k)];
                kkt[(k, n + i)] = d.jh[(i, k)];
            }
            rhs[n + i] = -pt.h[i];
        }
        for (r, &i) in act.iter().enumerate() {
            for k in 0..n {
                kkt[(n + p.me + r, k)] = d.jg[(i, k)];
                kkt[(k, n + p.me + r)] = d.jg[(i, k)];
            }
            rhs[n + p.me + r] = -pt.g[i];
        }
        let mut mu_act = DVector::zeros(ng);
        for &i in &act {
            mu_act[i] = mu[i];
        }
        let lg = &d.grad + d.jh.transpose() * &lam + d.jg.transpose() * &mu_act;
        for k in 0..n {
            rhs[k] = -lg[k];
        }
        let step = crate::linalg::lstsq(&kkt, &rhs, 1e-13);
        let xn = &x + step.rows(0, n);
        let lamn = &lam + step.rows(n, p.me);
        let mut mun = DVector::zeros(ng);
        for (r, &i) in act.iter().enumerate() {
            mun[i] = mu[i] + step[n + p.me + r];
        }
        // Active-set corrections.
        let ptn = p.point(xn.as_slice());
        let mut changed = false;
        for i in 0..ng {
            if active[i] && mun[i] < -1e-12 {
                active[i] = false;
                mun[i] = 0.0;
                changed = true;
            } else if !active[i] && ptn.g[i] > cfg.feas_tol {
                active[i] = true;
                changed = true;
            }
        }
        x = xn;
        lam = lamn;
        mu = mun.map(|v| v.max(0.0));
        let (k, v) = score(&x, &lam, &mu);
        if !k.is_finite() || !v.is_finite() {
            break;
        }
        let better =
            (v <= cfg.feas_tol && k < best_kkt) || (v < best_viol && best_viol > cfg.feas_tol);
        if better {
            best = (x.clone(), lam.clone(), mu.clone());
            best_kkt = k;
            best_viol = v;
        }
        if !changed && k <= 1e-13 && v <= 1e-14 {
            break;
        }
    }
    (best.0, best.1, best.2, best_kkt, best_viol)
}

fn solve_from<M: NlpModel>(
    p: &Problem<M>,
    x0: &[f64],
    cfg: &NlpConfig,
    start_index: usize,
) -> NlpSolution {
    let (pt0, d0) = p.derivs(x0);
    let fscale = 1.0
        / (1.0 + d0.grad.amax())
            .max(pt0.f.abs().min(1e6) * 1e-3)
            .max(1.0);
    let run = augmented_lagrangian(p, x0, cfg, fscale);
    let lam = &run.lam / fscale;
    let mu = &run.mu / fscale;
    let (x, lam, mu, kkt, viol) = polish(p, run.x, lam, mu, cfg);
    let pt = p.point(x.as_slice());
    let status = if kkt <= cfg.kkt_tol && viol <= cfg.feas_tol {
        NlpStatus::Optimal
    } else if viol > 1e-6 && (run.rho_maxed || !run.exhausted) {
        NlpStatus::Infeasible
    } else {
        NlpStatus::IterLimit
    };
    let mut bound_multipliers = vec![0.0; p.n];
    for (r, &(k, _)) in p.lower.iter().enumerate() {
        bound_multipliers[k] -= mu[p.mi + r];
    }
    for (r, &(k, _)) in p.upper.iter().enumerate() {
        bound_multipliers[k] += mu[p.mi + p.lower.len() + r];
    }
    NlpSolution {
        point: x.iter().copied().collect(),
        objective_value: pt.f,
        kkt_residual: kkt,
        max_violation: viol,
        status,
        eq_multipliers: lam.iter().copied().collect(),
        ineq_multipliers: mu.rows(0, p.mi).iter().copied().collect(),
        bound_multipliers,
        evaluations: run.evaluations,
        start_index,
    }
}

/// Solves from the model's initial point plus `multistart − 1` perturbed
/// starts; the best optimal run wins (ties go to the lowest start index).
pub fn solve<M: NlpModel>(model: &M, config: &NlpConfig) -> Result<NlpSolution> {
    let p = Problem::new(model);
    let (lb, ub) = model.bounds();
    let x0 = model.initial_point();
    crate::error::check_dim(p.n, x0.len())?;
    crate::error::check_dim(p.n, lb.len())?;
    crate::error::check_dim(p.n, ub.len())?;
    if lb.iter().zip(&ub).any(|(l, u)| l > u) {
        let pt = p.point(&x0);
        return Ok(NlpSolution {
            point: x0,
            objective_value: pt.f,
            kkt_residual: f64::INFINITY,
            max_violation: violation(&pt),
            status: NlpStatus::Infeasible,
            eq_multipliers: vec![0.0; p.me],
            ineq_multipliers: vec![0.0; p.mi],
            bound_multipliers: vec![0.0; p.n],
            evaluations: 0,
            start_index: 0,
        });
    }
    if x0
        .iter()
        .zip(lb.iter().zip(&ub))
        .any(|(x, (l, u))| x < l || x > u || !x.is_finite())
    {
        return Err(Error::InvalidArgument(
            "initial point violates the variable bounds".into(),
        ));
    }
    let audit = derivative_audit(model, &x0);
    if !(audit <= 1e-5) {
        return Err(Error::Nlp(format!("derivative audit failed ({audit:e})")));
    }
    let starts: Vec<Vec<f64>> = (0..config.multistart.max(1))
        .map(|k| {
            if k == 0 {
                return x0.clone();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(k as u64));
            x0.iter()
                .zip(lb.iter().zip(&ub))
                .map(|(&x, (&l, &u))| {
                    let z: f64 = rng.gen_range(-1.0..1.0);
                    (x + config.perturbation * (1.0 + x.abs()) * z).clamp(l, u)
                })
                .collect()
        })
        .collect();
    let runs: Vec<NlpSolution> = starts
        .par_iter()
        .enumerate()
        .map(|(k, s)| solve_from(&p, s, config, k))
        .collect();
    Ok(select_best(runs))
}

fn select_best(runs: Vec<NlpSolution>) -> NlpSolution {
    let mut best: Option<NlpSolution> = None;
    for r in runs {
        let better = match &best {
            None => true,
            Some(b) => match (
                r.status == NlpStatus::Optimal,
                b.status == NlpStatus::Optimal,
            ) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => r.objective_value < b.objective_value,
                (false, false) => r.max_violation < b.max_violation,
            },
        };
        if better {
            best = Some(r);
        }
    }
    best.expect("at least one start")
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Bounded;
    impl NlpModel for Bounded {
        fn n_vars(&self) -> usize {
            1
        }
        fn n_eq(&self) -> usize {
            0
        }
        fn n_ineq(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> NlpEval<S> {
            NlpEval {
                objective: x[0] * x[0],
                eq: vec![],
                ineq: vec![S::one() - x[0]],
            }
        }
        fn initial_point(&self) -> Vec<f64> {
            vec![3.0]
        }
    }

    struct Rosenbrock;
    impl NlpModel for Rosenbrock {
        fn n_vars(&self) -> usize {
            2
        }
        fn n_eq(&self) -> usize {
            0
        }
        fn n_ineq(&self) -> usize {
            0
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> NlpEval<S> {
            let a = S::one() - x[0];
            let b = x[1] - x[0] * x[0];
            NlpEval {
                objective: a * a + b * b.scale(100.0),
                eq: vec![],
                ineq: vec![],
            }
        }
        fn initial_point(&self) -> Vec<f64> {
            vec![-1.2, 1.0]
        }
    }

    struct Projection;
    impl NlpModel for Projection {
        fn n_vars(&self) -> usize {
            2
        }
        fn n_eq(&self) -> usize {
            1
        }
        fn n_ineq(&self) -> usize {
            0
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> NlpEval<S> {
            NlpEval {
                objective: x[0] * x[0] + x[1] * x[1],
                eq: vec![x[0] + x[1] - S::one()],
                ineq: vec![],
            }
        }
        fn initial_point(&self) -> Vec<f64> {
            vec![0.0, 0.0]
        }
    }

    #[test]
    fn bound_constraint() {
        let s = solve(&Bounded, &NlpConfig::default()).unwrap();
        assert_eq!(s.status, NlpStatus::Optimal);
        assert!((s.point[0] - 1.0).abs() < 1e-8);
        assert!((s.objective_value - 1.0).abs() < 1e-8);
        assert!((s.ineq_multipliers[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let s = solve(&Rosenbrock, &NlpConfig::default()).unwrap();
        assert_eq!(s.status, NlpStatus::Optimal);
        assert!((s.point[0] - 1.0).abs() < 1e-6 && (s.point[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn projection() {
        let s = solve(&Projection, &NlpConfig::default()).unwrap();
        assert_eq!(s.status, NlpStatus::Optimal);
        assert!((s.point[0] - 0.5).abs() < 1e-9 && (s.point[1] - 0.5).abs() < 1e-9);
        assert!((s.objective_value - 0.5).abs() < 1e-9);
        assert!(s.kkt_residual <= 1e-7);
    }

    #[test]
    fn deterministic() {
        let a = solve(&Rosenbrock, &NlpConfig::default()).unwrap();
        let b = solve(&Rosenbrock, &NlpConfig::default()).unwrap();
        assert_eq!(a.point, b.point);
        assert_eq!(a.evaluations, b.evaluations);
    }

    struct Contradictory;
    impl NlpModel for Contradictory {
        fn n_vars(&self) -> usize {
            1
        }
        fn n_eq(&self) -> usize {
            0
        }
        fn n_ineq(&self) -> usize {
            2
        }
        fn eval<S: Scalar>(&self, x: &[S]) -> NlpEval<S> {
            NlpEval {
                objective: x[0] * x[0],
                eq: vec![],
                ineq: vec![x[0] - S::one(), S::from_f64(2.0) - x[0]],
            }
        }
        fn initial_point(&self) -> Vec<f64> {
            vec![0.0]
        }
    }

    #[test]
    fn infeasible() {
        let s = solve(&Contradictory, &NlpConfig::default()).unwrap();
        assert_eq!(s.status, NlpStatus::Infeasible);
    }
}
