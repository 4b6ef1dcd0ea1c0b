//! Dense strictly convex quadratic programming by the Goldfarb–Idnani dual
//! active-set method.
//!
//! Solves `min ½xᵀGx + aᵀx` subject to `Ex = e` and `Cx ≤ d`. Multipliers
//! follow the Lagrangian `f + λᵀ(Ex − e) + μᵀ(Cx − d)` with `μ ≥ 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    pub eq_multipliers: DVector<f64>,
    pub ineq_multipliers: DVector<f64>,
    /// Indices of inequality constraints active at the solution.
    pub active: Vec<usize>,
    pub iterations: usize,
}

struct Workspace<'a> {
    ginv: DMatrix<f64>,
    e: &'a DMatrix<f64>,
    e_rhs: &'a DVector<f64>,
    c: &'a DMatrix<f64>,
    d: &'a DVector<f64>,
    x: DVector<f64>,
    active: Vec<usize>,
    u: Vec<f64>,
    iterations: usize,
}

impl Workspace<'_> {
    fn n_eq(&self) -> usize {
        self.e.nrows()
    }

    /// Internal form `nᵀx ≥ b`.
    fn normal(&self, k: usize) -> (DVector<f64>, f64) {
        let me = self.n_eq();
        if k < me {
            (self.e.row(k).transpose(), self.e_rhs[k])
        } else {
            (-self.c.row(k - me).transpose(), -self.d[k - me])
        }
    }

    fn directions(&self, np: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let q = self.active.len();
        let gn = &self.ginv * np;
        if q == 0 {
            return Some((gn, DVector::zeros(0)));
        }
        let mut nmat = DMatrix::zeros(np.len(), q);
        for (j, &k) in self.active.iter().enumerate() {
            nmat.set_column(j, &self.normal(k).0);
        }
        let gin = &self.ginv * &nmat;
        let m = nmat.transpose() * &gin;
        let r = m.lu().solve(&(nmat.transpose() * &gn))?;
        let z = gn - gin * &r;
        Some((z, r))
    }

    fn add(&mut self, p: usize, tol: f64) -> Result<bool> {
        let is_eq = p < self.n_eq();
        let (np, bp) = self.normal(p);
        let scale = np.norm().max(1e-300);
        let mut up = 0.0;
        loop {
            self.iterations += 1;
            if self.iterations > 50 * (self.x.len() + self.c.nrows() + self.n_eq() + 10) {
                return Err(Error::NoConvergence {
                    iterations: self.iterations,
                    residual: f64::NAN,
                });
            }
            let (z, r) = self.directions(&np).ok_or(Error::Singular)?;
            let me = self.n_eq();
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (j, &k) in self.active.iter().enumerate() {
                if k >= me && r[j] > 1e-14 {
                    let ratio = self.u[j] / r[j];
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(j);
                    }
                }
            }
            let s = np.dot(&self.x) - bp;
            let zn = z.dot(&np);
            let gn_norm = (&self.ginv * &np).norm();
            let degenerate = self.active.len() >= self.x.len()
                || z.norm() <= 1e-10 * gn_norm
                || zn <= 1e-13 * scale * scale;
            if is_eq {
                if degenerate {
                    if s.abs() <= tol * scale {
                        return Ok(false);
                    }
                    return Err(Error::InfeasibleQp);
                }
                let t = -s / zn;
                self.x += &z * t;
                for (uj, rj) in self.u.iter_mut().zip(r.iter()) {
                    *uj -= t * rj;
                }
                self.active.push(p);
                self.u.push(t);
                return Ok(true);
            }
            let t2 = if degenerate { f64::INFINITY } else { -s / zn };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::InfeasibleQp);
            }
            if !degenerate {
                self.x += &z * t;
            }
            for (uj, rj) in self.u.iter_mut().zip(r.iter()) {
                *uj -= t * rj;
            }
            up += t;
            if t2 <= t1 {
                self.active.push(p);
                self.u.push(up);
                return Ok(true);
            }
            let j = drop.expect("finite t1 has a blocking index");
            self.active.remove(j);
            self.u.remove(j);
        }
    }
}

/// Solves the QP. `g` must be positive definite.
pub fn solve_qp(
    g: &DMatrix<f64>,
    a: &DVector<f64>,
    e: &DMatrix<f64>,
    e_rhs: &DVector<f64>,
    c: &DMatrix<f64>,
    d: &DVector<f64>,
) -> Result<QpSolution> {
    let n = a.len();
    check_dim(n, g.nrows())?;
    check_dim(n, g.ncols())?;
    if e.nrows() > 0 {
        check_dim(n, e.ncols())?;
    }
    if c.nrows() > 0 {
        check_dim(n, c.ncols())?;
    }
    check_dim(e.nrows(), e_rhs.len())?;
    check_dim(c.nrows(), d.len())?;
    let chol = g.clone().cholesky().ok_or(Error::NotPositiveDefinite {
        min_eigenvalue: f64::NAN,
    })?;
    let ginv = chol.inverse();
    let x = -(&ginv * a);
    let tol = 1e-11 * (1.0 + a.amax() + d.amax().max(e_rhs.amax()));
    let mut ws = Workspace {
        ginv,
        e,
        e_rhs,
        c,
        d,
        x,
        active: Vec::new(),
        u: Vec::new(),
        iterations: 0,
    };
    for k in 0..e.nrows() {
        ws.add(k, tol)?;
    }
    let me = e.nrows();
    loop {
        let mut worst = None;
        let mut worst_s = 0.0;
        for k in 0..c.nrows() {
            if ws.active.contains(&(me + k)) {
                continue;
            }
            let row = c.row(k);
            let scale = row.norm().max(1e-300);
            let s = (d[k] - row.dot(&ws.x.transpose())) / scale;
            if s < -tol && s < worst_s {
                worst_s = s;
                worst = Some(me + k);
            }
        }
        match worst {
            None => break,
            Some(p) => {
                ws.add(p, tol)?;
            }
        }
    }
    let mut eq_mult = DVector::zeros(me);
    let mut ineq_mult = DVector::zeros(c.nrows());
    let mut active = Vec::new();
    for (&k, &uk) in ws.active.iter().zip(&ws.u) {
        if k < me {
            eq_mult[k] = -uk;
        } else {
            ineq_mult[k - me] = uk;
            active.push(k - me);
        }
    }
    active.sort_unstable();
    let objective = 0.5 * ws.x.dot(&(g * &ws.x)) + a.dot(&ws.x);
    Ok(QpSolution {
        x: ws.x,
        objective,
        eq_multipliers: eq_mult,
        ineq_multipliers: ineq_mult,
        active,
        iterations: ws.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty(n: usize) -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::zeros(0, n), DVector::zeros(0))
    }

    #[test]
    fn unconstrained() {
        let g = DMatrix::identity(2, 2);
        let a = DVector::from_vec(vec![-1.0, 2.0]);
        let (e, er) = empty(2);
        let sol = solve_qp(&g, &a, &e, &er, &e, &er).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14 && (sol.x[1] + 2.0).abs() < 1e-14);
    }

    #[test]
    fn bound_active() {
        // min x² s.t. x ≥ 1
        let g = DMatrix::from_element(1, 1, 2.0);
        let a = DVector::zeros(1);
        let (e, er) = empty(1);
        let c = DMatrix::from_element(1, 1, -1.0);
        let d = DVector::from_element(1, -1.0);
        let sol = solve_qp(&g, &a, &e, &er, &c, &d).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-14);
        assert!((sol.ineq_multipliers[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn equality_projection() {
        let g = DMatrix::identity(2, 2) * 2.0;
        let a = DVector::zeros(2);
        let e = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let er = DVector::from_element(1, 1.0);
        let (c, d) = empty(2);
        let sol = solve_qp(&g, &a, &e, &er, &c, &d).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-14);
        // ∇f + Eᵀλ = 0 → λ = −1
        assert!((sol.eq_multipliers[0] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let g = DMatrix::identity(1, 1);
        let a = DVector::zeros(1);
        let (e, er) = empty(1);
        let c = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let d = DVector::from_vec(vec![0.0, -1.0]);
        assert!(matches!(
            solve_qp(&g, &a, &e, &er, &c, &d),
            Err(Error::InfeasibleQp)
        ));
    }

    #[test]
    fn infeasible_with_nearly_parallel_rows() {
        // Equality line almost parallel to an inequality and outside the box.
        let g = DMatrix::from_row_slice(2, 2, &[5.0, -6.2, -6.2, 25.4]);
        let a = DVector::zeros(2);
        let e = DMatrix::from_row_slice(1, 2, &[-0.5442901873149495, -0.2516957273195568]);
        let er = DVector::from_element(1, 1.376908829101595);
        let c = DMatrix::from_row_slice(
            5,
            2,
            &[
                1.0,
                0.0,
                -1.0,
                0.0,
                0.0,
                1.0,
                0.0,
                -1.0,
                -0.7363909838368241,
                -0.34330056424640976,
            ],
        );
        let d = DVector::from_vec(vec![1.82, 1.32, 1.68, 1.79, 0.7301505714701152]);
        assert!(matches!(
            solve_qp(&g, &a, &e, &er, &c, &d),
            Err(Error::InfeasibleQp)
        ));
    }

    #[test]
    fn drops_constraint() {
        // min (x-2)² + (y-1)² s.t. x + y ≤ 2, x ≤ 1.5, -y ≤ 0
        let g = DMatrix::identity(2, 2) * 2.0;
        let a = DVector::from_vec(vec![-4.0, -2.0]);
        let (e, er) = empty(2);
        let c = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 1.0, 0.0, 0.0, -1.0]);
        let d = DVector::from_vec(vec![2.0, 1.5, 0.0]);
        let sol = solve_qp(&g, &a, &e, &er, &c, &d).unwrap();
        assert!((sol.x[0] - 1.5).abs() < 1e-12 && (sol.x[1] - 0.5).abs() < 1e-12);
        assert!(sol.active.contains(&0));
        assert!((sol.ineq_multipliers[0] - 1.0).abs() < 1e-12);
    }
}
