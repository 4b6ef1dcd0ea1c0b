//! Margin maximization for affine matrix inequalities by a primal-dual
//! interior-point method (HKM search direction, Mehrotra predictor-corrector).
//!
//! Maximizes `t` over `(z, t)` subject to
//! `F_b(z) = F_b0 + Σ_k z_k F_bk ⪰ t·I` for margin blocks, `F_b(z) ⪰ 0` for
//! plain blocks, scalar rows `c + gᵀz ≥ t` (or `≥ 0`), and `t ≤ t_cap`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::linalg;

/// Affine symmetric matrix function `F(z) = F0 + Σ z_k F_k`.
#[derive(Clone, Debug)]
pub struct LmiBlock {
    pub constant: DMatrix<f64>,
    /// One coefficient matrix per decision variable (zero matrices allowed).
    pub coeffs: Vec<DMatrix<f64>>,
    /// Whether the margin `t` is subtracted from this block.
    pub margin: bool,
}

impl LmiBlock {
    pub fn eval(&self, z: &[f64]) -> DMatrix<f64> {
        let mut m = self.constant.clone();
        for (zk, fk) in z.iter().zip(&self.coeffs) {
            if *zk != 0.0 {
                m += fk * *zk;
            }
        }
        m
    }
}

/// Scalar affine constraint `c + gᵀz ≥ t` (margin) or `≥ 0`.
#[derive(Clone, Debug)]
pub struct ScalarRow {
    pub constant: f64,
    pub coeffs: Vec<f64>,
    pub margin: bool,
}

#[derive(Clone, Debug)]
pub struct MarginProblem {
    pub n_vars: usize,
    pub blocks: Vec<LmiBlock>,
    pub rows: Vec<ScalarRow>,
    /// Upper bound on the margin, which keeps the problem bounded.
    pub margin_cap: f64,
}

#[derive(Clone, Debug)]
pub struct SdpConfig {
    pub max_iter: usize,
    pub gap_tol: f64,
    pub feas_tol: f64,
}

impl Default for SdpConfig {
    fn default() -> Self {
        Self {
            max_iter: 150,
            gap_tol: 1e-11,
            feas_tol: 1e-11,
        }
    }
}

#[derive(Clone, Debug)]
pub struct MarginSolution {
    pub z: DVector<f64>,
    /// Smallest margin actually achieved at `z`, recomputed from the blocks.
    pub margin: f64,
    pub iterations: usize,
    pub converged: bool,
    pub duality_gap: f64,
}

impl MarginProblem {
    /// Smallest eigenvalue / scalar slack over margin constraints at `z`
    /// (plain constraints reported only if violated).
    pub fn achieved_margin(&self, z: &[f64]) -> f64 {
        let mut worst = f64::INFINITY;
        for b in &self.blocks {
            let m = linalg::symmetrize(&b.eval(z));
            let ev = m.symmetric_eigenvalues().min();
            if b.margin || ev < 0.0 {
                worst = worst.min(ev);
            }
        }
        for r in &self.rows {
            let v = r.constant + r.coeffs.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
            if r.margin || v < 0.0 {
                worst = worst.min(v);
            }
        }
        worst
    }
}

struct BlockState {
    x: DMatrix<f64>,
    s: DMatrix<f64>,
}

/// Maximizes the margin `t`.
pub fn maximize_margin(problem: &MarginProblem, config: &SdpConfig) -> Result<MarginSolution> {
    let m = problem.n_vars;
    let ny = m + 1;
    for b in &problem.blocks {
        linalg::check_symmetric(&b.constant, 1e-9 * (1.0 + b.constant.amax()))?;
        crate::error::check_dim(m, b.coeffs.len())?;
    }
    for r in &problem.rows {
        crate::error::check_dim(m, r.coeffs.len())?;
    }
    // Dual-form data: S = C − Σ y_i A_i, objective bᵀy = t.
    let a_blocks: Vec<Vec<DMatrix<f64>>> = problem
        .blocks
        .iter()
        .map(|b| {
            let dim = b.constant.nrows();
            let mut v: Vec<DMatrix<f64>> =
                b.coeffs.iter().map(|f| -linalg::symmetrize(f)).collect();
            v.push(if b.margin {
                DMatrix::identity(dim, dim)
            } else {
                DMatrix::zeros(dim, dim)
            });
            v
        })
        .collect();
    let c_blocks: Vec<DMatrix<f64>> = problem
        .blocks
        .iter()
        .map(|b| linalg::symmetrize(&b.constant))
        .collect();
    let mut c_lp: Vec<f64> = Vec::new();
    let mut a_lp: Vec<DVector<f64>> = Vec::new();
    for r in &problem.rows {
        c_lp.push(r.constant);
        let mut a = DVector::zeros(ny);
        for k in 0..m {
            a[k] = -r.coeffs[k];
        }
        a[m] = if r.margin { 1.0 } else { 0.0 };
        a_lp.push(a);
    }
    // margin cap row t_cap − t ≥ 0
    c_lp.push(problem.margin_cap);
    let mut cap = DVector::zeros(ny);
    cap[m] = 1.0;
    a_lp.push(cap);
    let mut bvec = DVector::zeros(ny);
    bvec[m] = 1.0;

    // Strictly dual-feasible start at z = 0.
    let mut t0 = f64::INFINITY;
    for (b, c) in problem.blocks.iter().zip(&c_blocks) {
        let ev = c.symmetric_eigenvalues().min();
        if b.margin {
            t0 = t0.min(ev);
        } else if ev <= 0.0 {
            return Err(Error::InvalidArgument(
                "plain block must be positive definite at the origin".into(),
            ));
        }
    }
    for r in &problem.rows {
        if r.margin {
            t0 = t0.min(r.constant);
        } else if r.constant <= 0.0 {
            return Err(Error::InvalidArgument(
                "plain scalar row must be positive at the origin".into(),
            ));
        }
    }
    if !t0.is_finite() {
        t0 = 0.0;
    }
    t0 = t0.min(problem.margin_cap) - 1.0;
    let mut y = DVector::zeros(ny);
    y[m] = t0;

    let slack_of = |y: &DVector<f64>| -> (Vec<DMatrix<f64>>, Vec<f64>) {
        let sb = c_blocks
            .iter()
            .zip(&a_blocks)
            .map(|(c, ab)| {
                let mut s = c.clone();
                for (yi, ai) in y.iter().zip(ab) {
                    if *yi != 0.0 {
                        s -= ai * *yi;
                    }
                }
                s
            })
            .collect();
        let sl = c_lp.iter().zip(&a_lp).map(|(c, a)| c - a.dot(y)).collect();
        (sb, sl)
    };

    let (s0, sl0) = slack_of(&y);
    let mut blocks: Vec<BlockState> = s0
        .into_iter()
        .map(|s| BlockState {
            x: DMatrix::identity(s.nrows(), s.nrows()),
            s,
        })
        .collect();
    let mut x_lp = vec![1.0; c_lp.len()];
    let mut s_lp = sl0;
    let n_total: usize = blocks.iter().map(|b| b.x.nrows()).sum::<usize>() + x_lp.len();
    let scale_b = 1.0 + bvec.norm();
    let scale_c = 1.0
        + c_blocks.iter().map(|c| c.norm()).fold(0.0, f64::max)
        + c_lp.iter().fold(0.0f64, |a, c| a.max(c.abs()));

    let mut converged = false;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    for it in 0..config.max_iter {
        iterations = it + 1;
        // Residuals.
        let ax = apply_a(
            &a_blocks,
            &a_lp,
            &blocks.iter().map(|b| &b.x).collect::<Vec<_>>(),
            &x_lp,
            ny,
        );
        let rp = &bvec - &ax;
        let (s_cur, sl_cur) = slack_of(&y);
        let rd: Vec<DMatrix<f64>> = s_cur.iter().zip(&blocks).map(|(sc, b)| sc - &b.s).collect();
        let rd_lp: Vec<f64> = sl_cur.iter().zip(&s_lp).map(|(a, b)| a - b).collect();
        let xs: f64 = blocks.iter().map(|b| b.x.dot(&b.s)).sum::<f64>()
            + x_lp.iter().zip(&s_lp).map(|(a, b)| a * b).sum::<f64>();
        let mu = xs / n_total as f64;
        let pobj: f64 = c_blocks
            .iter()
            .zip(&blocks)
            .map(|(c, b)| c.dot(&b.x))
            .sum::<f64>()
            + c_lp.iter().zip(&x_lp).map(|(c, x)| c * x).sum::<f64>();
        let dobj = bvec.dot(&y);
        gap = (pobj - dobj).abs().max(xs.abs());
        let pinf = rp.norm() / scale_b;
        let dinf = (rd.iter().map(|r| r.norm_squared()).sum::<f64>()
            + rd_lp.iter().map(|r| r * r).sum::<f64>())
        .sqrt()
            / scale_c;
        let rel_gap = gap / (1.0 + pobj.abs() + dobj.abs());
        if rel_gap <= config.gap_tol && pinf <= config.feas_tol && dinf <= config.feas_tol {
            converged = true;
            break;
        }

        let chol_s: Vec<Cholesky<f64, Dyn>> = match blocks
            .iter()
            .map(|b| b.s.clone().cholesky())
            .collect::<Option<Vec<_>>>()
        {
            Some(c) => c,
            None => break,
        };
        let s_inv: Vec<DMatrix<f64>> = chol_s.iter().map(|c| c.inverse()).collect();

        // Schur complement M_ij = Σ_b ⟨A_i, X A_j S⁻¹⟩ + Σ_lp a_i a_j x/s.
        let mut mmat = DMatrix::zeros(ny, ny);
        for (bi, b) in blocks.iter().enumerate() {
            let ab = &a_blocks[bi];
            let xs_inv: Vec<DMatrix<f64>> = ab.iter().map(|aj| &b.x * aj * &s_inv[bi]).collect();
            for i in 0..ny {
                if ab[i].amax() == 0.0 {
                    continue;
                }
                for j in i..ny {
                    let v = ab[i].dot(&xs_inv[j]);
                    mmat[(i, j)] += v;
                    if i != j {
                        mmat[(j, i)] += v;
                    }
                }
            }
        }
        for (k, a) in a_lp.iter().enumerate() {
            let w = x_lp[k] / s_lp[k];
            mmat += a * a.transpose() * w;
        }
        let reg = 1e-14 * (1.0 + mmat.diagonal().amax());
        for i in 0..ny {
            mmat[(i, i)] += reg;
        }
        let Some(mchol) = mmat.clone().cholesky() else {
            break;
        };

        let solve_dir = |sigma_mu: f64,
                         corr: Option<(&[DMatrix<f64>], &[f64], &[DMatrix<f64>], &[f64])>|
         -> (
            DVector<f64>,
            Vec<DMatrix<f64>>,
            Vec<f64>,
            Vec<DMatrix<f64>>,
            Vec<f64>,
        ) {
            // Rc = σμS⁻¹ − X − corr·S⁻¹
            let rc: Vec<DMatrix<f64>> = blocks
                .iter()
                .enumerate()
                .map(|(bi, b)| {
                    let mut r = &s_inv[bi] * sigma_mu - &b.x;
                    if let Some((dxa, _, dsa, _)) = corr {
                        r -= &dxa[bi] * &dsa[bi] * &s_inv[bi];
                    }
                    linalg::symmetrize(&r)
                })
                .collect();
            let rc_lp: Vec<f64> = (0..x_lp.len())
                .map(|k| {
                    let mut r = sigma_mu / s_lp[k] - x_lp[k];
                    if let Some((_, dxl, _, dsl)) = corr {
                        r -= dxl[k] * dsl[k] / s_lp[k];
                    }
                    r
                })
                .collect();
            let xrd: Vec<DMatrix<f64>> = blocks
                .iter()
                .enumerate()
                .map(|(bi, b)| linalg::symmetrize(&(&b.x * &rd[bi] * &s_inv[bi])))
                .collect();
            let xrd_lp: Vec<f64> = (0..x_lp.len())
                .map(|k| x_lp[k] * rd_lp[k] / s_lp[k])
                .collect();
            let rhs = &rp - apply_a(&a_blocks, &a_lp, &rc.iter().collect::<Vec<_>>(), &rc_lp, ny)
                + apply_a(
                    &a_blocks,
                    &a_lp,
                    &xrd.iter().collect::<Vec<_>>(),
                    &xrd_lp,
                    ny,
                );
            let dy = mchol.solve(&rhs);
            let mut ds = Vec::with_capacity(blocks.len());
            let mut dx = Vec::with_capacity(blocks.len());
            for (bi, b) in blocks.iter().enumerate() {
                let mut d = rd[bi].clone();
                for (yi, ai) in dy.iter().zip(&a_blocks[bi]) {
                    if *yi != 0.0 {
                        d -= ai * *yi;
                    }
                }
                let dxb = &rc[bi] - &b.x * &d * &s_inv[bi];
                dx.push(linalg::symmetrize(&dxb));
                ds.push(d);
            }
            let ds_lp: Vec<f64> = (0..x_lp.len())
                .map(|k| rd_lp[k] - a_lp[k].dot(&dy))
                .collect();
            let dx_lp: Vec<f64> = (0..x_lp.len())
                .map(|k| rc_lp[k] - x_lp[k] * ds_lp[k] / s_lp[k])
                .collect();
            (dy, dx, dx_lp, ds, ds_lp)
        };

        let (_, dxa, dxla, dsa, dsla) = solve_dir(0.0, None);
        let ap = max_step(
            &blocks.iter().map(|b| &b.x).collect::<Vec<_>>(),
            &dxa,
            &x_lp,
            &dxla,
        );
        let ad = max_step(
            &blocks.iter().map(|b| &b.s).collect::<Vec<_>>(),
            &dsa,
            &s_lp,
            &dsla,
        );
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mut xs_aff = 0.0;
        for (bi, b) in blocks.iter().enumerate() {
            xs_aff += (&b.x + &dxa[bi] * ap).dot(&(&b.s + &dsa[bi] * ad));
        }
        for k in 0..x_lp.len() {
            xs_aff += (x_lp[k] + ap * dxla[k]) * (s_lp[k] + ad * dsla[k]);
        }
        let sigma = (xs_aff / xs).clamp(0.0, 1.0).powi(3);
        let (dy, dx, dxl, ds, dsl) = solve_dir(sigma * mu, Some((&dxa, &dxla, &dsa, &dsla)));
        let ap = (0.95
            * max_step(
                &blocks.iter().map(|b| &b.x).collect::<Vec<_>>(),
                &dx,
                &x_lp,
                &dxl,
            ))
        .min(1.0);
        let ad = (0.95
            * max_step(
                &blocks.iter().map(|b| &b.s).collect::<Vec<_>>(),
                &ds,
                &s_lp,
                &dsl,
            ))
        .min(1.0);
        for (bi, b) in blocks.iter_mut().enumerate() {
            b.x += &dx[bi] * ap;
            b.s += &ds[bi] * ad;
            b.x = linalg::symmetrize(&b.x);
            b.s = linalg::symmetrize(&b.s);
        }
        for k in 0..x_lp.len() {
            x_lp[k] += ap * dxl[k];
            s_lp[k] += ad * dsl[k];
        }
        y += &dy * ad;
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
    }
    let z = y.rows(0, m).into_owned();
    let margin = problem.achieved_margin(z.as_slice());
    Ok(MarginSolution {
        z,
        margin,
        iterations,
        converged,
        duality_gap: gap,
    })
}

fn apply_a(
    a_blocks: &[Vec<DMatrix<f64>>],
    a_lp: &[DVector<f64>],
    x: &[&DMatrix<f64>],
    x_lp: &[f64],
    ny: usize,
) -> DVector<f64> {
    let mut out = DVector::zeros(ny);
    for (ab, xb) in a_blocks.iter().zip(x) {
        for i in 0..ny {
            out[i] += ab[i].dot(*xb);
        }
    }
    for (a, xl) in a_lp.iter().zip(x_lp) {
        out += a * *xl;
    }
    out
}

fn max_step(x: &[&DMatrix<f64>], dx: &[DMatrix<f64>], xl: &[f64], dxl: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, dxb) in x.iter().zip(dx) {
        let Some(ch) = (*xb).clone().cholesky() else {
            return 0.0;
        };
        let l = ch.l();
        let Some(linv) = l.clone().try_inverse() else {
            return 0.0;
        };
        let y = linalg::symmetrize(&(&linv * dxb * linv.transpose()));
        let ev = y.symmetric_eigenvalues().min();
        if ev < 0.0 {
            alpha = alpha.min(-1.0 / ev);
        }
    }
    for (v, dv) in xl.iter().zip(dxl) {
        if *dv < 0.0 {
            alpha = alpha.min(-v / dv);
        }
    }
    alpha
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_margin() {
        // F(z) = diag(z, 2 − z): best margin 1 at z = 1.
        let p = MarginProblem {
            n_vars: 1,
            blocks: vec![LmiBlock {
                constant: DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 2.0])),
                coeffs: vec![DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))],
                margin: true,
            }],
            rows: vec![],
            margin_cap: 10.0,
        };
        let sol = maximize_margin(&p, &SdpConfig::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.z[0] - 1.0).abs() < 1e-8);
        assert!((sol.margin - 1.0).abs() < 1e-8);
    }

    #[test]
    fn eigenvalue_of_offdiagonal() {
        // F(z) = [[1, z], [z, 1]] − best margin 1 at z = 0; cap inactive.
        let p = MarginProblem {
            n_vars: 1,
            blocks: vec![LmiBlock {
                constant: DMatrix::identity(2, 2),
                coeffs: vec![DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])],
                margin: true,
            }],
            rows: vec![],
            margin_cap: 5.0,
        };
        let sol = maximize_margin(&p, &SdpConfig::default()).unwrap();
        assert!(sol.z[0].abs() < 1e-7);
        assert!((sol.margin - 1.0).abs() < 1e-8);
    }

    #[test]
    fn cap_binds_when_unbounded() {
        let p = MarginProblem {
            n_vars: 1,
            blocks: vec![],
            rows: vec![ScalarRow {
                constant: 0.0,
                coeffs: vec![1.0],
                margin: true,
            }],
            margin_cap: 2.0,
        };
        let sol = maximize_margin(&p, &SdpConfig::default()).unwrap();
        assert!(sol.margin >= 2.0 - 1e-7);
    }

    #[test]
    fn negative_optimum() {
        // F(z) = diag(z, −1 − z): best margin −0.5 at z = −0.5.
        let p = MarginProblem {
            n_vars: 1,
            blocks: vec![LmiBlock {
                constant: DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -1.0])),
                coeffs: vec![DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))],
                margin: true,
            }],
            rows: vec![],
            margin_cap: 1.0,
        };
        let sol = maximize_margin(&p, &SdpConfig::default()).unwrap();
        assert!((sol.margin + 0.5).abs() < 1e-8);
    }
}
