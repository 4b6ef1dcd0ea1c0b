//! Quadratic certificates for Lur'e systems `ẋ = A(x − x°) + Bφ(C(x − x°))`:
//! sector bounds, the S-procedure LMI, closed-form facet minima and the two
//! convexifications of the resulting concave constraints.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::expr::{cst, var, Expr};
use crate::linalg;
use crate::polytope::Polytope;
use crate::quadratic::QuadraticCertificate;
use crate::scalar::Scalar;
use crate::sdp::{maximize_margin, LmiBlock, MarginProblem, ScalarRow, SdpConfig};

/// Tolerance on the LMI block matrix's largest eigenvalue.
pub const LMI_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LureData", into = "LureData")]
pub struct LureSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    nonlinearity: Vec<Expr>,
    equilibrium: DVector<f64>,
}

/// Serialized form; each nonlinearity is an expression in `{"var": 0}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LureData {
    pub a_matrix: Vec<Vec<f64>>,
    pub b_matrix: Vec<Vec<f64>>,
    pub c_matrix: Vec<Vec<f64>>,
    pub nonlinearity: Vec<Expr>,
    pub equilibrium: Vec<f64>,
}

impl TryFrom<LureData> for LureSystem {
    type Error = Error;

    fn try_from(d: LureData) -> Result<Self> {
        LureSystem::new(
            linalg::to_dmatrix(&d.a_matrix)?,
            linalg::to_dmatrix(&d.b_matrix)?,
            linalg::to_dmatrix(&d.c_matrix)?,
            d.nonlinearity,
            DVector::from_vec(d.equilibrium),
        )
    }
}

impl From<LureSystem> for LureData {
    fn from(s: LureSystem) -> Self {
        LureData {
            a_matrix: linalg::to_rows(&s.a),
            b_matrix: linalg::to_rows(&s.b),
            c_matrix: linalg::to_rows(&s.c),
            nonlinearity: s.nonlinearity,
            equilibrium: s.equilibrium.iter().copied().collect(),
        }
    }
}

impl LureSystem {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        nonlinearity: Vec<Expr>,
        equilibrium: DVector<f64>,
    ) -> Result<Self> {
        linalg::check_square(&a)?;
        let n = a.nrows();
        let l = nonlinearity.len();
        check_dim(n, b.nrows())?;
        check_dim(l, b.ncols())?;
        check_dim(l, c.nrows())?;
        check_dim(n, c.ncols())?;
        check_dim(n, equilibrium.len())?;
        let nonlinearity = nonlinearity
            .into_iter()
            .map(Expr::resolve)
            .collect::<Result<Vec<_>>>()?;
        for (i, phi) in nonlinearity.iter().enumerate() {
            if phi.arity() > 1 {
                return Err(Error::InvalidArgument(format!(
                    "nonlinearity {i} must depend on its channel input only"
                )));
            }
            let at0 = phi.eval(&[0.0f64]);
            if !(at0.abs() <= 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "nonlinearity {i} does not vanish at the equilibrium ({at0:e})"
                )));
            }
        }
        linalg::check_hurwitz(&a)?;
        Ok(Self {
            a,
            b,
            c,
            nonlinearity,
            equilibrium,
        })
    }

    /// Builds the system after the loop transformation `A + γBC`,
    /// `φ(s) − γs`, which moves the sector `[γ, β]` to `[0, β − γ]`.
    pub fn loop_transformed(
        a0: &DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        nonlinearity: Vec<Expr>,
        equilibrium: DVector<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let a = a0 + &b * &c * gamma;
        let shifted = nonlinearity
            .into_iter()
            .map(|phi| phi - cst(gamma) * var(0))
            .collect();
        Self::new(a, b, c, shifted, equilibrium)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn channels(&self) -> usize {
        self.nonlinearity.len()
    }

    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b_matrix(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c_matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn equilibrium(&self) -> &DVector<f64> {
        &self.equilibrium
    }

    pub fn nonlinearity(&self) -> &[Expr] {
        &self.nonlinearity
    }

    pub fn phi(&self, channel: usize, s: f64) -> f64 {
        self.nonlinearity[channel].eval(&[s])
    }

    pub fn phi_prime(&self, channel: usize, s: f64) -> f64 {
        self.nonlinearity[channel].diff(0).eval(&[s])
    }

    /// Right-hand side at `x` over any scalar type.
    pub fn field<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let n = self.dim();
        let dx: Vec<S> = (0..n)
            .map(|k| x[k] - S::from_f64(self.equilibrium[k]))
            .collect();
        let mut out = vec![S::zero(); n];
        for (i, phi) in self.nonlinearity.iter().enumerate() {
            let mut s = S::zero();
            for k in 0..n {
                s += dx[k].scale(self.c[(i, k)]);
            }
            let p = phi.eval(&[s]);
            for (r, o) in out.iter_mut().enumerate() {
                *o += p.scale(self.b[(r, i)]);
            }
        }
        for (r, o) in out.iter_mut().enumerate() {
            for k in 0..n {
                *o += dx[k].scale(self.a[(r, k)]);
            }
        }
        out
    }

    /// `V̇ = 2(x − x°)ᵀP ẋ`.
    pub fn lyapunov_derivative(&self, p: &DMatrix<f64>, x: &[f64]) -> f64 {
        let f = DVector::from_vec(self.field(x));
        let dx = DVector::from_column_slice(x) - &self.equilibrium;
        2.0 * dx.dot(&(p * f))
    }

    /// Ranges of the channel inputs `s = C(x − x°)` over a polytope built from
    /// `C` with finite lower and upper offsets.
    pub fn channel_ranges(&self, poly: &Polytope) -> Result<Vec<(f64, f64)>> {
        check_dim(self.dim(), poly.dim())?;
        let mut out = Vec::with_capacity(self.channels());
        for i in 0..self.channels() {
            let ci = self.c.row(i);
            let tol = 1e-12 * (1.0 + ci.amax());
            let mut hi = None;
            let mut lo = None;
            for j in 0..poly.n_facets() {
                let row = poly.normals().row(j);
                if (row - ci).amax() <= tol {
                    hi = Some(poly.offset(j));
                } else if (row + ci).amax() <= tol {
                    lo = Some(-poly.offset(j));
                }
            }
            let (Some(lo), Some(hi)) = (lo, hi) else {
                return Err(Error::SectorFailure(format!(
                    "polytope has no parallel facet pair for channel {i}"
                )));
            };
            let shift = ci.dot(&self.equilibrium.transpose());
            out.push((lo - shift, hi - shift));
        }
        Ok(out)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorBound {
    pub gamma: f64,
    pub beta: f64,
}

impl SectorBound {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if !(gamma < beta) || !gamma.is_finite() || !beta.is_finite() {
            return Err(Error::SectorFailure(format!(
                "invalid sector [{gamma}, {beta}]"
            )));
        }
        Ok(Self { gamma, beta })
    }

    /// `(φ − γs)(φ − βs)`, negative strictly inside the sector.
    pub fn residual(&self, s: f64, phi: f64) -> f64 {
        (phi - self.gamma * s) * (phi - self.beta * s)
    }

    /// Checks the strict sector inequality on `samples` points per channel
    /// (the origin excluded).
    pub fn verify(&self, sys: &LureSystem, ranges: &[(f64, f64)], samples: usize) -> bool {
        ranges.iter().enumerate().all(|(i, &(lo, hi))| {
            (0..samples).all(|k| {
                let s = lo + (hi - lo) * (k as f64 + 0.5) / samples as f64;
                s == 0.0 || self.residual(s, sys.phi(i, s)) < 0.0
            })
        })
    }
}

/// Sweeps the slope `φᵢ(s)/s` over every channel's range.
pub fn estimate_sector(sys: &LureSystem, poly: &Polytope, samples: usize) -> Result<SectorBound> {
    let ranges = sys.channel_ranges(poly)?;
    let samples = samples.max(2);
    let mut lo_slope = f64::INFINITY;
    let mut hi_slope = f64::NEG_INFINITY;
    for (i, &(lo, hi)) in ranges.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::SectorFailure(format!(
                "channel {i} has an invalid range"
            )));
        }
        let mut consider = |slope: f64| {
            lo_slope = lo_slope.min(slope);
            hi_slope = hi_slope.max(slope);
        };
        if lo <= 0.0 && hi >= 0.0 {
            consider(sys.phi_prime(i, 0.0));
        }
        for k in 0..=samples {
            let s = lo + (hi - lo) * k as f64 / samples as f64;
            if s.abs() > 1e-12 {
                consider(sys.phi(i, s) / s);
            }
        }
    }
    if !lo_slope.is_finite() || !hi_slope.is_finite() {
        return Err(Error::SectorFailure("non-finite slope".into()));
    }
    let sector = SectorBound::new(lo_slope - 1e-6, hi_slope + 1e-6)?;
    if !sector.verify(sys, &ranges, 10_000) {
        return Err(Error::SectorFailure(
            "sampled sector violated between sweep points".into(),
        ));
    }
    Ok(sector)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmiCertificate {
    pub p_matrix: Vec<Vec<f64>>,
    pub tau: f64,
    /// Largest eigenvalue of the LMI block matrix.
    pub residual: f64,
    /// Interior-point margin (positive means strictly feasible).
    pub margin: f64,
}

impl LmiCertificate {
    pub fn p(&self) -> DMatrix<f64> {
        linalg::to_dmatrix(&self.p_matrix).expect("square by construction")
    }

    pub fn certificate(&self, equilibrium: &[f64]) -> Result<QuadraticCertificate> {
        QuadraticCertificate::new(self.p(), DVector::from_column_slice(equilibrium))
    }
}

/// `[[AᵀP + PA − τγβCᵀC, PB + τ(γ+β)/2·Cᵀ], [·, −τI]]`.
pub fn lmi_block_matrix(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    sector: &SectorBound,
    p: &DMatrix<f64>,
    tau: f64,
) -> DMatrix<f64> {
    let n = a.nrows();
    let l = b.ncols();
    let mut m = DMatrix::zeros(n + l, n + l);
    let tl = a.transpose() * p + p * a - c.transpose() * c * (tau * sector.gamma * sector.beta);
    let tr = p * b + c.transpose() * (tau * 0.5 * (sector.gamma + sector.beta));
    m.view_mut((0, 0), (n, n)).copy_from(&tl);
    m.view_mut((0, n), (n, l)).copy_from(&tr);
    m.view_mut((n, 0), (l, n)).copy_from(&tr.transpose());
    m.view_mut((n, n), (l, l))
        .copy_from(&(DMatrix::identity(l, l) * -tau));
    m
}

/// Basis of symmetric trace-zero matrices.
fn traceless_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut e = DMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            out.push(e);
        }
    }
    for k in 0..n.saturating_sub(1) {
        let mut e = DMatrix::zeros(n, n);
        e[(k, k)] = 1.0;
        e[(n - 1, n - 1)] = -1.0;
        out.push(e);
    }
    out
}

/// Finds `P ≻ 0` (trace `n`) and `τ ≥ 0` with the LMI block negative
/// semidefinite by maximizing the common eigenvalue margin.
pub fn solve_lmi(sys: &LureSystem, sector: &SectorBound) -> Result<LmiCertificate> {
    linalg::check_hurwitz(&sys.a)?;
    let n = sys.dim();
    let basis = traceless_basis(n);
    let eye = DMatrix::identity(n, n);
    let zero_sector_tau =
        |p: &DMatrix<f64>, tau: f64| lmi_block_matrix(&sys.a, &sys.b, &sys.c, sector, p, tau);
    let base = zero_sector_tau(&eye, 0.0);
    let mut coeffs: Vec<DMatrix<f64>> =
        basis.iter().map(|bk| -(zero_sector_tau(bk, 0.0))).collect();
    let zero_p = DMatrix::zeros(n, n);
    coeffs.push(-(zero_sector_tau(&zero_p, 1.0)));
    let nv = basis.len() + 1;
    let mut p_coeffs: Vec<DMatrix<f64>> = basis.clone();
    p_coeffs.push(DMatrix::zeros(n, n));
    let mut tau_row = vec![0.0; nv];
    tau_row[nv - 1] = 1.0;
    let problem = MarginProblem {
        n_vars: nv,
        blocks: vec![
            LmiBlock {
                constant: -base,
                coeffs,
                margin: true,
            },
            LmiBlock {
                constant: eye.clone(),
                coeffs: p_coeffs,
                margin: true,
            },
        ],
        rows: vec![ScalarRow {
            constant: 0.0,
            coeffs: tau_row,
            margin: true,
        }],
        margin_cap: 1.0,
    };
    let sol = maximize_margin(&problem, &SdpConfig::default())?;
    let mut p = eye;
    for (zk, bk) in sol.z.iter().zip(&basis) {
        p += bk * *zk;
    }
    let p = linalg::symmetrize(&p);
    let tau = sol.z[nv - 1].max(0.0);
    let block = lmi_block_matrix(&sys.a, &sys.b, &sys.c, sector, &p, tau);
    let residual = linalg::max_eigenvalue(&linalg::symmetrize(&block))?;
    let p_min = linalg::min_eigenvalue(&p)?;
    if residual > LMI_TOL || p_min <= LMI_TOL || sol.margin <= 0.0 {
        return Err(Error::SdpInfeasible { margin: sol.margin });
    }
    Ok(LmiCertificate {
        p_matrix: linalg::to_rows(&p),
        tau,
        residual,
        margin: sol.margin,
    })
}

/// `min{(Cᵢᵀx° − d̲)², (Cᵢᵀx° − d̄)²} / (CᵢᵀP⁻¹Cᵢ)`.
pub fn facet_vmin_closed_form(
    cert: &QuadraticCertificate,
    c_row: &[f64],
    d_lo: f64,
    d_hi: f64,
) -> Result<f64> {
    check_dim(cert.equilibrium().len(), c_row.len())?;
    let c = DVector::from_column_slice(c_row);
    if c.amax() == 0.0 {
        return Err(Error::InvalidArgument("zero facet normal".into()));
    }
    let x = c.dot(cert.equilibrium());
    if !(d_lo <= x && x <= d_hi) {
        return Err(Error::HypothesisViolation(format!(
            "Cᵀx° = {x} outside [{d_lo}, {d_hi}]"
        )));
    }
    let denom = cert.inverse_form(&c)?;
    Ok(concave_bound(x, d_lo, d_hi) / denom)
}

/// `min{(X − d̲)², (X − d̄)²}`.
pub fn concave_bound(x: f64, d_lo: f64, d_hi: f64) -> f64 {
    (x - d_lo).powi(2).min((x - d_hi).powi(2))
}

/// Upper bound `V ≤ slope·X + intercept` (scaled by `CᵢᵀP⁻¹Cᵢ`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearBound {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearBound {
    pub fn eval(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Secant lines of the two parabola branches between the kink and the ends
/// of `[X̲, X̄]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexRelaxation {
    pub a: f64,
    pub b: f64,
    pub a_prime: f64,
    pub b_prime: f64,
}

impl ConvexRelaxation {
    pub fn lines(&self) -> [LinearBound; 2] {
        [
            LinearBound {
                slope: self.a,
                intercept: self.b,
            },
            LinearBound {
                slope: self.a_prime,
                intercept: self.b_prime,
            },
        ]
    }
}

fn check_midpoint(x_lo: f64, x_hi: f64, d_lo: f64, d_hi: f64) -> Result<()> {
    let m = 0.5 * (d_hi + d_lo);
    if !(x_lo <= m && m <= x_hi && d_lo <= d_hi) {
        return Err(Error::HypothesisViolation(format!(
            "midpoint {m} not in [{x_lo}, {x_hi}]"
        )));
    }
    Ok(())
}

pub fn convex_relaxation_coeffs(
    x_lo: f64,
    x_hi: f64,
    d_lo: f64,
    d_hi: f64,
) -> Result<ConvexRelaxation> {
    check_midpoint(x_lo, x_hi, d_lo, d_hi)?;
    Ok(ConvexRelaxation {
        a: x_hi - 1.5 * d_hi + 0.5 * d_lo,
        b: d_hi * d_hi - (d_hi + d_lo) * x_hi / 2.0,
        a_prime: x_lo - 1.5 * d_lo + 0.5 * d_hi,
        b_prime: d_lo * d_lo - (d_hi + d_lo) * x_lo / 2.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InnerConstruction {
    /// `V ≤ cX − X̄X̲ + Δd²` and `V ≤ 2ΔdX − Δd²`.
    Printed,
    /// Tangents of both parabola branches at the kink `(d̄ + d̲)/2`.
    Tangent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerApproximation {
    pub lines: [LinearBound; 2],
    pub construction: InnerConstruction,
}

impl InnerApproximation {
    pub fn bound(&self, x: f64) -> f64 {
        self.lines[0].eval(x).min(self.lines[1].eval(x))
    }
}

const INNER_SAMPLES: usize = 10_000;

fn inner_verified(lines: &[LinearBound; 2], x_lo: f64, x_hi: f64, d_lo: f64, d_hi: f64) -> bool {
    let scale = 1.0 + (d_hi - d_lo).powi(2) + x_lo.abs().max(x_hi.abs()).powi(2);
    (0..INNER_SAMPLES).all(|k| {
        let x = x_lo + (x_hi - x_lo) * k as f64 / (INNER_SAMPLES - 1) as f64;
        let v = lines[0].eval(x).min(lines[1].eval(x));
        v <= concave_bound(x, d_lo, d_hi) + 1e-12 * scale
    })
}

/// Two linear bounds whose intersection lies inside the concave set; the
/// printed construction is tried first and replaced by kink tangents when
/// sampling shows it is not an inner approximation.
pub fn inner_approximation_coeffs(
    x_lo: f64,
    x_hi: f64,
    d_lo: f64,
    d_hi: f64,
) -> Result<InnerApproximation> {
    check_midpoint(x_lo, x_hi, d_lo, d_hi)?;
    let dd = 0.5 * (d_hi - d_lo);
    let printed = [
        LinearBound {
            slope: x_hi + x_lo + 2.0 * dd,
            intercept: dd * dd - x_hi * x_lo,
        },
        LinearBound {
            slope: 2.0 * dd,
            intercept: -dd * dd,
        },
    ];
    if inner_verified(&printed, x_lo, x_hi, d_lo, d_hi) {
        return Ok(InnerApproximation {
            lines: printed,
            construction: InnerConstruction::Printed,
        });
    }
    let m = 0.5 * (d_hi + d_lo);
    let tangent = [
        LinearBound {
            slope: -2.0 * dd,
            intercept: dd * dd + 2.0 * dd * m,
        },
        LinearBound {
            slope: 2.0 * dd,
            intercept: dd * dd - 2.0 * dd * m,
        },
    ];
    if inner_verified(&tangent, x_lo, x_hi, d_lo, d_hi) {
        return Ok(InnerApproximation {
            lines: tangent,
            construction: InnerConstruction::Tangent,
        });
    }
    Err(Error::InnerApproxFailure)
}

/// Vertices of the relaxation polygon `{X̲ ≤ X ≤ X̄, 0 ≤ V ≤ both secants}`.
pub fn relaxation_polygon(x_lo: f64, x_hi: f64, d_lo: f64, d_hi: f64) -> Result<Vec<[f64; 2]>> {
    let r = convex_relaxation_coeffs(x_lo, x_hi, d_lo, d_hi)?;
    let [l1, l2] = r.lines();
    let upper = |x: f64| l1.eval(x).min(l2.eval(x)).max(0.0);
    let mut pts = vec![
        [x_lo, 0.0],
        [x_hi, 0.0],
        [x_hi, upper(x_hi)],
        [x_lo, upper(x_lo)],
    ];
    if (l1.slope - l2.slope).abs() > 1e-300 {
        let xi = (l2.intercept - l1.intercept) / (l1.slope - l2.slope);
        if xi > x_lo && xi < x_hi {
            pts.push([xi, upper(xi)]);
        }
    }
    Ok(convex_hull_2d(&pts))
}

/// Convex hull by Andrew's monotone chain, counter-clockwise, collinear
/// points removed.
pub fn convex_hull_2d(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pendulum() -> LureSystem {
        LureSystem::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -10.0, -1.0]),
            DMatrix::from_column_slice(2, 1, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            vec![cst(10.0) * (var(0) - var(0).sin())],
            DVector::zeros(2),
        )
        .unwrap()
    }

    #[test]
    fn sin_sector() {
        let sys = LureSystem::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![var(0).sin()],
            DVector::zeros(1),
        )
        .unwrap();
        let h = std::f64::consts::FRAC_PI_2;
        let poly = Polytope::from_box(&[-h], &[h]).unwrap();
        let s = estimate_sector(&sys, &poly, 31_416).unwrap();
        assert!((s.gamma - 2.0 / std::f64::consts::PI).abs() < 2e-6);
        assert!((s.beta - 1.0).abs() < 2e-6);
    }

    #[test]
    fn linear_sector() {
        let sys = LureSystem::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![var(0)],
            DVector::zeros(1),
        )
        .unwrap();
        let poly = Polytope::from_box(&[-1.0], &[1.0]).unwrap();
        let s = estimate_sector(&sys, &poly, 100).unwrap();
        assert!((s.gamma - (1.0 - 1e-6)).abs() < 1e-12);
        assert!((s.beta - (1.0 + 1e-6)).abs() < 1e-12);
    }

    #[test]
    fn scalar_lmi() {
        let sys = LureSystem::new(
            DMatrix::from_element(1, 1, -1.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![cst(0.5) * var(0)],
            DVector::zeros(1),
        )
        .unwrap();
        let cert = solve_lmi(&sys, &SectorBound::new(0.0, 1.0).unwrap()).unwrap();
        assert!((cert.p_matrix[0][0] - 1.0).abs() < 1e-12);
        assert!(cert.residual <= LMI_TOL);
        let block = lmi_block_matrix(
            sys.a_matrix(),
            sys.b_matrix(),
            sys.c_matrix(),
            &SectorBound::new(0.0, 1.0).unwrap(),
            &DMatrix::from_element(1, 1, 1.0),
            0.0,
        );
        assert_eq!(
            block,
            DMatrix::from_diagonal(&DVector::from_vec(vec![-2.0, 0.0]))
        );
    }

    #[test]
    fn rejects_unstable_linear_part() {
        let r = LureSystem::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            DMatrix::from_element(1, 1, 1.0),
            vec![var(0)],
            DVector::zeros(1),
        );
        assert!(matches!(r, Err(Error::NotHurwitz { .. })));
    }

    #[test]
    fn pendulum_lmi() {
        let sys = pendulum();
        let h = std::f64::consts::FRAC_PI_2;
        let poly = Polytope::from_bounds(
            &DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            &DVector::from_vec(vec![-h]),
            &DVector::from_vec(vec![h]),
        )
        .unwrap();
        let sector = estimate_sector(&sys, &poly, 10_000).unwrap();
        assert!(sector.gamma.abs() < 2e-6);
        assert!((sector.beta - 10.0 * (1.0 - 2.0 / std::f64::consts::PI)).abs() < 2e-6);
        let cert = solve_lmi(&sys, &sector).unwrap();
        assert!(cert.residual <= LMI_TOL);
        let p = cert.p();
        for k in 0..200 {
            let x1 = -h + 2.0 * h * k as f64 / 199.0;
            for x2 in [-3.0, -0.5, 0.0, 0.7, 4.0] {
                assert!(sys.lyapunov_derivative(&p, &[x1, x2]) <= 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        let id = QuadraticCertificate::new(DMatrix::identity(2, 2), DVector::zeros(2)).unwrap();
        assert!((facet_vmin_closed_form(&id, &[1.0, 0.0], -1.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        let off = id.recentred(&[0.5, 0.0]).unwrap();
        assert!(
            (facet_vmin_closed_form(&off, &[1.0, 0.0], -1.0, 1.0).unwrap() - 0.25).abs() < 1e-15
        );
        assert!(facet_vmin_closed_form(&off, &[1.0, 0.0], 0.6, 1.0).is_err());
    }

    #[test]
    fn relaxation_examples() {
        let r = convex_relaxation_coeffs(-0.5, 0.5, -1.0, 1.0).unwrap();
        assert_eq!((r.a, r.b), (-1.5, 1.0));
        assert!((r.a * 0.5 + r.b - 0.25).abs() < 1e-15);
        assert!((r.b - 1.0).abs() < 1e-15);
        // mirror symmetry
        assert!((r.a_prime + r.a).abs() < 1e-15 && (r.b_prime - r.b).abs() < 1e-15);
        assert!(matches!(
            convex_relaxation_coeffs(0.1, 0.5, -1.0, 1.0),
            Err(Error::HypothesisViolation(_))
        ));
    }

    #[test]
    fn inner_examples() {
        let h = std::f64::consts::FRAC_PI_2;
        let inner = inner_approximation_coeffs(-h + 0.01, h - 0.01, -h, h).unwrap();
        assert_eq!(inner.construction, InnerConstruction::Tangent);
        let degenerate = inner_approximation_coeffs(-0.5, 0.5, 0.0, 0.0).unwrap();
        for x in [-0.5, 0.0, 0.3] {
            assert!(degenerate.bound(x) <= 0.0);
        }
    }

    #[test]
    fn hull_of_square_with_interior_point() {
        let h = convex_hull_2d(&[
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.5, 0.0],
        ]);
        assert_eq!(h.len(), 4);
    }
}
