//! Minimum of a convex Lyapunov function over the boundary of a polytope,
//! computed facet by facet from the KKT conditions.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::polytope::Polytope;
use crate::qp::solve_qp;
use crate::quadratic::LyapunovFunction;

const MAX_ITER: usize = 200;
const KKT_TOL: f64 = 1e-9;

/// Minimizer of `V` over one facet.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FacetMinimum {
    pub facet_index: usize,
    pub minimizer: Vec<f64>,
    /// Multiplier `λ` with `∇V(x̂) = λCᵢ + Σ μⱼ(−Cⱼ)` over other active facets.
    pub multiplier: f64,
    /// Multipliers of the remaining half-spaces (zero when inactive).
    pub other_multipliers: Vec<f64>,
    pub value: f64,
}

impl FacetMinimum {
    /// `‖∇V(x̂) − λCᵢ + Σⱼ μⱼCⱼ‖`.
    pub fn stationarity_residual<V: LyapunovFunction + ?Sized>(
        &self,
        v: &V,
        poly: &Polytope,
    ) -> f64 {
        let g = DVector::from_vec(v.gradient(&self.minimizer));
        let mut r = g - poly.normal(self.facet_index) * self.multiplier;
        for (j, &mu) in self.other_multipliers.iter().enumerate() {
            if mu != 0.0 {
                r += poly.normal(j) * mu;
            }
        }
        r.norm()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VminResult {
    pub per_facet: Vec<FacetMinimum>,
    pub v_min: f64,
    pub argmin_facet: usize,
    pub empty_facets: Vec<usize>,
}

/// Minimizes `V` over facet `facet` of `poly` by sequential quadratic
/// programming; one QP solve is exact for quadratic `V`.
pub fn facet_minimize<V: LyapunovFunction + ?Sized>(
    v: &V,
    poly: &Polytope,
    facet: usize,
    warm_start: Option<&[f64]>,
) -> Result<FacetMinimum> {
    let n = poly.dim();
    check_dim(n, v.dim())?;
    if facet >= poly.n_facets() {
        return Err(Error::InvalidArgument(format!(
            "facet {facet} out of range (polytope has {})",
            poly.n_facets()
        )));
    }
    let ci = poly.normal(facet);
    let di = poly.offset(facet);
    let mut x = match warm_start {
        Some(w) => {
            check_dim(n, w.len())?;
            DVector::from_column_slice(w)
        }
        None => {
            let p = poly.interior_point();
            p + &ci * ((di - ci.dot(p)) / ci.norm_squared())
        }
    };
    let m = poly.n_facets();
    let others: Vec<usize> = (0..m).filter(|&j| j != facet).collect();
    let c_other = DMatrix::from_fn(others.len(), n, |r, k| poly.normals()[(others[r], k)]);
    let e = DMatrix::from_fn(1, n, |_, k| ci[k]);

    let mut eq_mult = 0.0;
    let mut ineq_mult = DVector::zeros(others.len());
    let mut converged = false;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let g = DVector::from_vec(v.gradient(x.as_slice()));
        let mut h = v.hessian(x.as_slice());
        let hmin = linalg::min_eigenvalue(&linalg::symmetrize(&h)).unwrap_or(0.0);
        let floor = 1e-10 * (1.0 + h.amax());
        if hmin < floor {
            for k in 0..n {
                h[(k, k)] += floor - hmin;
            }
        }
        let er = DVector::from_element(1, di - ci.dot(&x));
        let d_other = DVector::from_fn(others.len(), |r, _| {
            poly.offset(others[r]) - poly.normals().row(others[r]).dot(&x.transpose())
        });
        let sol = match solve_qp(&h, &g, &e, &er, &c_other, &d_other) {
            Ok(s) => s,
            Err(Error::InfeasibleQp) => return Err(Error::EmptyFacet { facet }),
            Err(err) => return Err(err),
        };
        let step = sol.x;
        let v0 = v.value(x.as_slice());
        let mut alpha = 1.0;
        let feasible_now = poly.max_residual(x.as_slice())? <= 1e-9
            && (ci.dot(&x) - di).abs() <= 1e-9 * (1.0 + di.abs());
        if feasible_now {
            let slope = g.dot(&step);
            while alpha > 1e-8 {
                let trial = &x + &step * alpha;
                if v.value(trial.as_slice()) <= v0 + 1e-4 * alpha * slope + 1e-15 * (1.0 + v0.abs())
                {
                    break;
                }
                alpha *= 0.5;
            }
        }
        x += &step * alpha;
        eq_mult = sol.eq_multipliers[0];
        ineq_mult = sol.ineq_multipliers;
        // KKT residual at the new point with the QP multipliers.
        let gn = DVector::from_vec(v.gradient(x.as_slice()));
        let mut r = gn + &ci * eq_mult;
        for (row, &mu) in ineq_mult.iter().enumerate() {
            r += poly.normal(others[row]) * mu;
        }
        residual = r.norm();
        let scale = 1.0 + DVector::from_vec(v.gradient(x.as_slice())).norm();
        if residual <= KKT_TOL * scale && step.norm() * alpha <= 1e-7 * (1.0 + x.norm()) {
            converged = true;
            break;
        }
        if alpha == 1.0 && step.norm() <= 1e-14 * (1.0 + x.norm()) {
            converged = residual <= 1e-7 * scale;
            break;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: MAX_ITER,
            residual,
        });
    }
    let mut other_multipliers = vec![0.0; m];
    for (row, &mu) in ineq_mult.iter().enumerate() {
        other_multipliers[others[row]] = mu;
    }
    Ok(FacetMinimum {
        facet_index: facet,
        value: v.value(x.as_slice()),
        minimizer: x.iter().copied().collect(),
        multiplier: -eq_mult,
        other_multipliers,
    })
}

/// Aggregates facet minima; empty facets are dropped and ties resolve to the
/// lowest facet index.
pub fn v_min<V: LyapunovFunction + ?Sized>(
    v: &V,
    poly: &Polytope,
    x0: &[f64],
) -> Result<VminResult> {
    check_dim(poly.dim(), x0.len())?;
    if poly.max_residual(x0)? >= 0.0 {
        return Err(Error::HypothesisViolation(
            "equilibrium is not strictly inside the polytope".into(),
        ));
    }
    let results: Vec<Result<FacetMinimum>> = (0..poly.n_facets())
        .into_par_iter()
        .map(|i| {
            let ci = poly.normal(i);
            let x = DVector::from_column_slice(x0);
            let proj = &x + &ci * ((poly.offset(i) - ci.dot(&x)) / ci.norm_squared());
            facet_minimize(v, poly, i, Some(proj.as_slice()))
        })
        .collect();
    let mut per_facet = Vec::new();
    let mut empty_facets = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(fm) => per_facet.push(fm),
            Err(Error::EmptyFacet { .. }) => empty_facets.push(i),
            Err(e) => return Err(e),
        }
    }
    let best = per_facet
        .iter()
        .fold(None::<&FacetMinimum>, |acc, fm| match acc {
            Some(b) if b.value <= fm.value => Some(b),
            _ => Some(fm),
        })
        .ok_or(Error::DegeneratePolytope)?;
    Ok(VminResult {
        v_min: best.value,
        argmin_facet: best.facet_index,
        per_facet,
        empty_facets,
    })
}

/// Brute-force minimum of `V` over grids laid on every facet, refined by
/// repeated zooming around the best sample. Intended as a test oracle.
pub fn v_min_oracle<V: LyapunovFunction + ?Sized>(
    v: &V,
    poly: &Polytope,
    grid_density: usize,
) -> Result<f64> {
    let n = poly.dim();
    check_dim(n, v.dim())?;
    if n > 4 {
        return Err(Error::DimensionTooLarge(n));
    }
    let mut best = f64::INFINITY;
    for i in 0..poly.n_facets() {
        if let Some(val) = facet_grid_min(v, poly, i, grid_density.max(2))? {
            best = best.min(val);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::DegeneratePolytope)
    }
}

fn facet_grid_min<V: LyapunovFunction + ?Sized>(
    v: &V,
    poly: &Polytope,
    i: usize,
    density: usize,
) -> Result<Option<f64>> {
    let n = poly.dim();
    let ci = poly.normal(i);
    let base = &ci * (poly.offset(i) / ci.norm_squared());
    let tol = 1e-10 * (1.0 + poly.offsets().amax());
    if n == 1 {
        let x = [base[0]];
        return Ok(if poly.max_residual(&x)? <= tol {
            Some(v.value(&x))
        } else {
            None
        });
    }
    let basis = linalg::nullspace(&DMatrix::from_fn(1, n, |_, k| ci[k]), 1e-12);
    let k = basis.ncols();
    // Facet in local coordinates t: C U t ≤ d − C base, other facets only.
    let mut rows = Vec::new();
    let mut offs = Vec::new();
    for j in 0..poly.n_facets() {
        if j == i {
            continue;
        }
        let row = poly.normals().row(j) * &basis;
        let off = poly.offset(j) - poly.normals().row(j).dot(&base.transpose());
        if row.norm() <= 1e-12 * poly.normals().row(j).norm() {
            if off < -tol {
                return Ok(None);
            }
            continue;
        }
        rows.push(row.iter().copied().collect::<Vec<f64>>());
        offs.push(off);
    }
    let local = match Polytope::new(linalg::to_dmatrix(&rows)?, DVector::from_vec(offs)) {
        Ok(p) => p,
        Err(Error::InvalidPolytope(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let (mut lo, mut hi) = local.bounding_box()?;
    let to_x = |t: &[f64]| -> Vec<f64> {
        let tv = DVector::from_column_slice(t);
        (&base + &basis * tv).iter().copied().collect()
    };
    let mut best = f64::INFINITY;
    let mut best_t = vec![0.0; k];
    for _level in 0..6 {
        let mut idx = vec![0usize; k];
        let steps: Vec<f64> = (0..k)
            .map(|a| (hi[a] - lo[a]) / (density - 1) as f64)
            .collect();
        loop {
            let t: Vec<f64> = (0..k).map(|a| lo[a] + steps[a] * idx[a] as f64).collect();
            if local.max_residual(&t)? <= tol {
                let val = v.value(&to_x(&t));
                if val < best {
                    best = val;
                    best_t = t;
                }
            }
            let mut a = 0;
            while a < k {
                idx[a] += 1;
                if idx[a] < density {
                    break;
                }
                idx[a] = 0;
                a += 1;
            }
            if a == k {
                break;
            }
        }
        if !best.is_finite() {
            return Ok(None);
        }
        for a in 0..k {
            let w = 2.0 * steps[a];
            lo[a] = best_t[a] - w;
            hi[a] = best_t[a] + w;
        }
    }
    Ok(Some(best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadratic::QuadraticCertificate;

    fn cert(p: &[f64], x0: &[f64]) -> QuadraticCertificate {
        let n = x0.len();
        QuadraticCertificate::new(
            DMatrix::from_row_slice(n, n, p),
            DVector::from_column_slice(x0),
        )
        .unwrap()
    }

    fn unit_box(n: usize) -> Polytope {
        Polytope::from_box(&vec![-1.0; n], &vec![1.0; n]).unwrap()
    }

    #[test]
    fn facet_identity() {
        let v = cert(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        let fm = facet_minimize(&v, &unit_box(2), 0, None).unwrap();
        assert!((fm.minimizer[0] - 1.0).abs() < 1e-12 && fm.minimizer[1].abs() < 1e-12);
        assert!((fm.value - 1.0).abs() < 1e-12);
        assert!((fm.multiplier - 2.0).abs() < 1e-10);
    }

    #[test]
    fn facet_offset_centre() {
        let v = cert(&[1.0, 0.0, 0.0, 1.0], &[0.5, 0.0]);
        let fm = facet_minimize(&v, &unit_box(2), 0, None).unwrap();
        assert!((fm.value - 0.25).abs() < 1e-12);
        let r = v_min(&v, &unit_box(2), &[0.5, 0.0]).unwrap();
        assert!((r.v_min - 0.25).abs() < 1e-12);
        assert_eq!(r.argmin_facet, 0);
    }

    #[test]
    fn facet_anisotropic() {
        let v = cert(&[1.0, 0.0, 0.0, 4.0], &[0.0, 0.0]);
        let fm = facet_minimize(&v, &unit_box(2), 0, None).unwrap();
        assert!((fm.minimizer[0] - 1.0).abs() < 1e-12 && fm.minimizer[1].abs() < 1e-12);
        assert!((fm.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let v = cert(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        let r = v_min(&v, &unit_box(2), &[0.0, 0.0]).unwrap();
        assert_eq!(r.argmin_facet, 0);
        assert_eq!(r.per_facet.len(), 4);
    }

    #[test]
    fn corner_minimizer_uses_neighbour_multiplier() {
        // Centre far outside the facet's extent: minimizer sits at a corner.
        let v = cert(&[1.0, 0.0, 0.0, 1.0], &[0.9, 0.9]);
        let poly = Polytope::new(
            DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
            DVector::from_vec(vec![0.0, 0.0, 2.0]),
        )
        .unwrap();
        let fm = facet_minimize(&v, &poly, 0, None).unwrap();
        assert!(fm.minimizer[0].abs() < 1e-12);
        assert!(fm.stationarity_residual(&v, &poly) < 1e-9);
    }

    #[test]
    fn empty_facet_is_reported() {
        // x ≤ 1 is redundant next to x ≤ 0.5 and does not touch the region.
        let poly = Polytope::new(
            DMatrix::from_row_slice(3, 1, &[1.0, 1.0, -1.0]),
            DVector::from_vec(vec![1.0, 0.5, 1.0]),
        )
        .unwrap();
        let v = cert(&[1.0], &[0.0]);
        assert!(matches!(
            facet_minimize(&v, &poly, 0, None),
            Err(Error::EmptyFacet { facet: 0 })
        ));
        let r = v_min(&v, &poly, &[0.0]).unwrap();
        assert_eq!(r.empty_facets, vec![0]);
        assert!((r.v_min - 0.25).abs() < 1e-12);
    }

    #[test]
    fn oracle_examples() {
        let v = cert(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        assert!((v_min_oracle(&v, &unit_box(2), 1000).unwrap() - 1.0).abs() < 1e-6);
        let v3 = cert(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], &[0.0; 3]);
        assert!((v_min_oracle(&v3, &unit_box(3), 50).unwrap() - 1.0).abs() < 1e-6);
        let v5 = cert(
            &{
                let mut p = vec![0.0; 25];
                for k in 0..5 {
                    p[k * 6] = 1.0;
                }
                p
            },
            &[0.0; 5],
        );
        assert!(matches!(
            v_min_oracle(&v5, &unit_box(5), 10),
            Err(Error::DimensionTooLarge(5))
        ));
    }

    #[test]
    fn requires_interior_equilibrium() {
        let v = cert(&[1.0, 0.0, 0.0, 1.0], &[1.0, 0.0]);
        assert!(v_min(&v, &unit_box(2), &[1.0, 0.0]).is_err());
    }
}
