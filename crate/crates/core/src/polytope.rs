//! Polyhedral regions `{x | Cx ≤ d}`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::qp::solve_qp;

/// Region `{x | Cx − d ≤ 0}` with one row of `C` per facet.
///
/// Unbounded slabs are accepted (Lur'e polytopes constrain only `Cx`);
/// [`Polytope::is_bounded`] reports which case applies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeData", into = "PolytopeData")]
pub struct Polytope {
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
    pairing: Vec<(usize, usize)>,
    interior: DVector<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeData {
    pub facet_normals: Vec<Vec<f64>>,
    pub facet_offsets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pairing: Vec<(usize, usize)>,
}

impl TryFrom<PolytopeData> for Polytope {
    type Error = Error;

    fn try_from(data: PolytopeData) -> Result<Self> {
        let normals = crate::linalg::to_dmatrix(&data.facet_normals)?;
        let p = Polytope::new(normals, DVector::from_vec(data.facet_offsets))?;
        p.with_pairing(data.pairing)
    }
}

impl From<Polytope> for PolytopeData {
    fn from(p: Polytope) -> Self {
        PolytopeData {
            facet_normals: crate::linalg::to_rows(&p.normals),
            facet_offsets: p.offsets.iter().copied().collect(),
            pairing: p.pairing,
        }
    }
}

impl Polytope {
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        check_dim(normals.nrows(), offsets.len())?;
        if normals.nrows() == 0 || normals.ncols() == 0 {
            return Err(Error::InvalidPolytope("no facets".into()));
        }
        for i in 0..normals.nrows() {
            let norm = normals.row(i).norm();
            if !(norm > 0.0) || !norm.is_finite() || !offsets[i].is_finite() {
                return Err(Error::InvalidPolytope(format!(
                    "facet {i} has a zero or non-finite normal"
                )));
            }
        }
        let interior = interior_point(&normals, &offsets)?;
        Ok(Self {
            normals,
            offsets,
            pairing: Vec::new(),
            interior,
        })
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        check_dim(lo.len(), hi.len())?;
        let n = lo.len();
        let c = DMatrix::identity(n, n);
        Self::from_bounds(
            &c,
            &DVector::from_column_slice(lo),
            &DVector::from_column_slice(hi),
        )
    }

    /// Parallel-facet polytope `lo ≤ Cx ≤ hi`; facet `k` is the upper and
    /// `l + k` the lower side of row `k`.
    pub fn from_bounds(c: &DMatrix<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> Result<Self> {
        let l = c.nrows();
        check_dim(l, lo.len())?;
        check_dim(l, hi.len())?;
        let mut normals = DMatrix::zeros(2 * l, c.ncols());
        let mut offsets = DVector::zeros(2 * l);
        for k in 0..l {
            normals.set_row(k, &c.row(k));
            normals.set_row(l + k, &(-c.row(k)));
            offsets[k] = hi[k];
            offsets[l + k] = -lo[k];
        }
        let p = Self::new(normals, offsets)?;
        p.with_pairing((0..l).map(|k| (l + k, k)).collect())
    }

    /// Attaches `(lower, upper)` index pairs of parallel facets.
    pub fn with_pairing(mut self, pairing: Vec<(usize, usize)>) -> Result<Self> {
        for &(lo, hi) in &pairing {
            if lo >= self.n_facets() || hi >= self.n_facets() {
                return Err(Error::InvalidPolytope(format!(
                    "pair ({lo}, {hi}) out of range"
                )));
            }
            let sum = self.normals.row(lo) + self.normals.row(hi);
            if sum.amax() > 1e-12 * (1.0 + self.normals.row(hi).amax()) {
                return Err(Error::InvalidPolytope(format!(
                    "facets {lo} and {hi} are not opposite"
                )));
            }
            if self.offsets[hi] < -self.offsets[lo] {
                return Err(Error::InvalidPolytope(format!(
                    "pair ({lo}, {hi}) has upper offset below lower offset"
                )));
            }
        }
        self.pairing = pairing;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    pub fn n_facets(&self) -> usize {
        self.normals.nrows()
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    pub fn pairing(&self) -> &[(usize, usize)] {
        &self.pairing
    }

    pub fn normal(&self, i: usize) -> DVector<f64> {
        self.normals.row(i).transpose()
    }

    pub fn offset(&self, i: usize) -> f64 {
        self.offsets[i]
    }

    /// A point strictly inside the polytope, found at construction.
    pub fn interior_point(&self) -> &DVector<f64> {
        &self.interior
    }

    /// `Cx − d`.
    pub fn residual(&self, x: &[f64]) -> Result<DVector<f64>> {
        check_dim(self.dim(), x.len())?;
        let xv = DVector::from_column_slice(x);
        Ok(&self.normals * xv - &self.offsets)
    }

    /// True iff `Cx − d ≤ tol` componentwise.
    pub fn contains(&self, x: &[f64], tol: f64) -> Result<bool> {
        Ok(self.residual(x)?.iter().all(|&r| r <= tol))
    }

    /// Largest facet residual, nonpositive inside.
    pub fn max_residual(&self, x: &[f64]) -> Result<f64> {
        Ok(self.residual(x)?.max())
    }

    /// Bounded iff `C` has full column rank and some `λ > 0` gives `Cᵀλ = 0`.
    pub fn is_bounded(&self) -> bool {
        let n = self.dim();
        let m = self.n_facets();
        let rank = self
            .normals
            .clone()
            .svd(false, false)
            .rank(1e-10 * self.normals.amax());
        if rank < n {
            return false;
        }
        let g = DMatrix::identity(m, m);
        let a = DVector::zeros(m);
        let e = self.normals.transpose();
        let er = DVector::zeros(n);
        let c = -DMatrix::identity(m, m);
        let d = -DVector::from_element(m, 1.0);
        solve_qp(&g, &a, &e, &er, &c, &d).is_ok()
    }

    /// Shrinks the polytope toward `center` by `factor ∈ (0, 1]`.
    pub fn scaled(&self, center: &[f64], factor: f64) -> Result<Self> {
        check_dim(self.dim(), center.len())?;
        let cx = &self.normals * DVector::from_column_slice(center);
        let offsets = &cx + (&self.offsets - &cx) * factor;
        Self::new(self.normals.clone(), offsets)?.with_pairing(self.pairing.clone())
    }

    /// Vertices by enumerating `n`-subsets of facets (small problems only).
    pub fn vertices(&self) -> Result<Vec<DVector<f64>>> {
        let n = self.dim();
        let m = self.n_facets();
        if n > 6 || m > 40 {
            return Err(Error::DimensionTooLarge(n));
        }
        let mut out: Vec<DVector<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..n).collect();
        if m < n {
            return Ok(out);
        }
        loop {
            let a = DMatrix::from_fn(n, n, |i, j| self.normals[(idx[i], j)]);
            let b = DVector::from_fn(n, |i, _| self.offsets[idx[i]]);
            if let Some(x) = a.lu().solve(&b) {
                let scale = 1.0 + x.amax();
                if x.iter().all(|v| v.is_finite())
                    && self.max_residual(x.as_slice())? <= 1e-9 * scale
                    && !out.iter().any(|v| (v - &x).amax() <= 1e-9 * scale)
                {
                    out.push(x);
                }
            }
            // next combination
            let mut k = n;
            loop {
                if k == 0 {
                    return Ok(out);
                }
                k -= 1;
                if idx[k] < m - n + k {
                    idx[k] += 1;
                    for j in k + 1..n {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    /// Axis-aligned bounding box from the vertices (bounded polytopes only).
    pub fn bounding_box(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        if !self.is_bounded() {
            return Err(Error::PolytopeError("polytope is unbounded".into()));
        }
        let verts = self.vertices()?;
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for v in &verts {
            for k in 0..n {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Ok((lo, hi))
    }

    /// Uniform rejection samples from the polytope intersected with a box.
    pub fn sample<R: Rng>(
        &self,
        rng: &mut R,
        count: usize,
        lo: &[f64],
        hi: &[f64],
    ) -> Result<Vec<Vec<f64>>> {
        check_dim(self.dim(), lo.len())?;
        check_dim(self.dim(), hi.len())?;
        let mut out = Vec::with_capacity(count);
        let mut tries = 0usize;
        while out.len() < count {
            tries += 1;
            if tries > 1000 * count + 10_000 {
                return Err(Error::PolytopeError(
                    "rejection sampling found too few interior points".into(),
                ));
            }
            let x: Vec<f64> = lo
                .iter()
                .zip(hi)
                .map(|(&a, &b)| if b > a { rng.gen_range(a..=b) } else { a })
                .collect();
            if self.contains(&x, 0.0)? {
                out.push(x);
            }
        }
        Ok(out)
    }
}

fn interior_point(c: &DMatrix<f64>, d: &DVector<f64>) -> Result<DVector<f64>> {
    let n = c.ncols();
    let m = c.nrows();
    let margin = 1e-9 * (1.0 + d.amax());
    let shrunk = DVector::from_fn(m, |i, _| d[i] - margin * c.row(i).norm());
    let g = DMatrix::identity(n, n);
    let a = DVector::zeros(n);
    let e = DMatrix::zeros(0, n);
    let er = DVector::zeros(0);
    match solve_qp(&g, &a, &e, &er, c, &shrunk) {
        Ok(sol) => Ok(sol.x),
        Err(Error::InfeasibleQp) => Err(Error::InvalidPolytope(
            "polytope has an empty interior".into(),
        )),
        Err(e) => Err(e),
    }
}
