//! Quadratic Lyapunov functions `V(x) = (x − x°)ᵀP(x − x°)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Convex function with first and second derivatives.
pub trait LyapunovFunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn hessian(&self, x: &[f64]) -> DMatrix<f64>;
}

/// Positive-definite quadratic certificate centred at an equilibrium.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "QuadraticData", into = "QuadraticData")]
pub struct QuadraticCertificate {
    p: DMatrix<f64>,
    equilibrium: DVector<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticData {
    pub p_matrix: Vec<Vec<f64>>,
    pub equilibrium: Vec<f64>,
}

impl TryFrom<QuadraticData> for QuadraticCertificate {
    type Error = Error;

    fn try_from(d: QuadraticData) -> Result<Self> {
        QuadraticCertificate::new(
            linalg::to_dmatrix(&d.p_matrix)?,
            DVector::from_vec(d.equilibrium),
        )
    }
}

impl From<QuadraticCertificate> for QuadraticData {
    fn from(c: QuadraticCertificate) -> Self {
        QuadraticData {
            p_matrix: linalg::to_rows(&c.p),
            equilibrium: c.equilibrium.iter().copied().collect(),
        }
    }
}

impl QuadraticCertificate {
    pub fn new(p: DMatrix<f64>, equilibrium: DVector<f64>) -> Result<Self> {
        linalg::check_square(&p)?;
        check_dim(p.nrows(), equilibrium.len())?;
        linalg::check_symmetric(&p, 1e-12 * p.amax().max(1.0))?;
        let p = linalg::symmetrize(&p);
        let min_eigenvalue = linalg::min_eigenvalue(&p)?;
        if min_eigenvalue <= linalg::PD_TOL {
            return Err(Error::NotPositiveDefinite { min_eigenvalue });
        }
        Ok(Self { p, equilibrium })
    }

    pub fn p_matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn equilibrium(&self) -> &DVector<f64> {
        &self.equilibrium
    }

    /// Same `P`, new centre.
    pub fn recentred(&self, equilibrium: &[f64]) -> Result<Self> {
        check_dim(self.p.nrows(), equilibrium.len())?;
        Ok(Self {
            p: self.p.clone(),
            equilibrium: DVector::from_column_slice(equilibrium),
        })
    }

    /// `(x − c)ᵀP(x − c)` for an arbitrary centre over any scalar type.
    pub fn eval_centred<S: Scalar>(&self, x: &[S], centre: &[S]) -> S {
        let n = self.p.nrows();
        let dx: Vec<S> = x.iter().zip(centre).map(|(&a, &b)| a - b).collect();
        let mut acc = S::zero();
        for i in 0..n {
            let mut row = S::zero();
            for j in 0..n {
                row += dx[j].scale(self.p[(i, j)]);
            }
            acc += dx[i] * row;
        }
        acc
    }

    pub fn eval_generic<S: Scalar>(&self, x: &[S]) -> S {
        let centre: Vec<S> = self.equilibrium.iter().map(|&v| S::from_f64(v)).collect();
        self.eval_centred(x, &centre)
    }

    /// `CᵢᵀP⁻¹Cᵢ`.
    pub fn inverse_form(&self, c: &DVector<f64>) -> Result<f64> {
        check_dim(self.p.nrows(), c.len())?;
        let y = self.p.clone().cholesky().ok_or(Error::Singular)?.solve(c);
        Ok(c.dot(&y))
    }
}

impl LyapunovFunction for QuadraticCertificate {
    fn dim(&self) -> usize {
        self.p.nrows()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let dx = DVector::from_column_slice(x) - &self.equilibrium;
        dx.dot(&(&self.p * &dx))
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let dx = DVector::from_column_slice(x) - &self.equilibrium;
        (&self.p * dx * 2.0).iter().copied().collect()
    }

    fn hessian(&self, _x: &[f64]) -> DMatrix<f64> {
        &self.p * 2.0
    }
}

/// `(x − x°)ᵀP(x − x°)`.
pub fn eval_quadratic(cert: &QuadraticCertificate, x: &[f64]) -> Result<f64> {
    check_dim(cert.dim(), x.len())?;
    Ok(cert.value(x).max(0.0))
}

/// `2P(x − x°)`.
pub fn eval_quadratic_gradient(cert: &QuadraticCertificate, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(cert.dim(), x.len())?;
    Ok(cert.gradient(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cert(p: &[f64], x0: &[f64]) -> QuadraticCertificate {
        let n = x0.len();
        QuadraticCertificate::new(
            DMatrix::from_row_slice(n, n, p),
            DVector::from_column_slice(x0),
        )
        .unwrap()
    }

    #[test]
    fn value_examples() {
        let id = cert(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        assert_eq!(eval_quadratic(&id, &[1.0, 1.0]).unwrap(), 2.0);
        assert_eq!(eval_quadratic(&id, &[0.0, 0.0]).unwrap(), 0.0);
        let d = cert(&[2.0, 0.0, 0.0, 1.0], &[1.0, 0.0]);
        assert_eq!(eval_quadratic(&d, &[2.0, 1.0]).unwrap(), 3.0);
        assert_eq!(eval_quadratic(&d, &[1.0, 0.0]).unwrap(), 0.0);
        assert!(eval_quadratic(&d, &[1.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let id = cert(&[1.0, 0.0, 0.0, 1.0], &[0.0, 0.0]);
        assert_eq!(
            eval_quadratic_gradient(&id, &[1.0, 0.0]).unwrap(),
            vec![2.0, 0.0]
        );
        assert_eq!(
            eval_quadratic_gradient(&id, &[0.0, 0.0]).unwrap(),
            vec![0.0, 0.0]
        );
        let d = cert(&[2.0, 0.0, 0.0, 1.0], &[1.0, 0.0]);
        assert_eq!(
            eval_quadratic_gradient(&d, &[2.0, 1.0]).unwrap(),
            vec![4.0, 2.0]
        );
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(
            QuadraticCertificate::new(p, DVector::zeros(2)),
            Err(Error::NotPositiveDefinite { .. })
        ));
        let p = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            QuadraticCertificate::new(p, DVector::zeros(2)),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn inverse_form_diag() {
        let c = cert(&[1.0, 0.0, 0.0, 4.0], &[0.0, 0.0]);
        let f = c.inverse_form(&DVector::from_vec(vec![0.0, 2.0])).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
    }
}
