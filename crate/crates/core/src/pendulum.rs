//! The driven pendulum `ẋ₁ = x₂ − u`, `ẋ₂ = −g sin x₁ − d x₂ + w + u`
//! with a constant torque `w` and a disturbance pulse `u`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{cst, var};
use crate::lure::{solve_lmi, LmiCertificate, LureSystem, SectorBound};
use crate::manifold::EquilibriumManifold;
use crate::polytope::Polytope;
use crate::scalar::Scalar;
use crate::sco::ScoModel;
use crate::sim::{FieldMode, VectorField};

/// Slope of the chord of `sin` from `t` to `π/2`.
pub fn chord_slope(t: f64) -> f64 {
    (1.0 - t.sin()) / (FRAC_PI_2 - t)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pendulum {
    pub gravity: f64,
    pub damping: f64,
    /// Pulse amplitude `u` during the disturbance.
    pub pulse: f64,
    /// Admissible equilibrium angles `|x₁°| ≤ domain`.
    pub domain: f64,
}

impl Default for Pendulum {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            damping: 1.0,
            pulse: -14.0,
            domain: 0.3,
        }
    }
}

impl Pendulum {
    pub fn validate(&self) -> Result<()> {
        if !(self.gravity > 0.0 && self.damping > 0.0) {
            return Err(Error::InvalidArgument(
                "gravity and damping must be positive".into(),
            ));
        }
        if !(self.domain > 0.0 && self.domain < FRAC_PI_2) {
            return Err(Error::InvalidArgument(
                "equilibrium domain must lie in (0, π/2)".into(),
            ));
        }
        if !self.pulse.is_finite() {
            return Err(Error::InvalidArgument("pulse must be finite".into()));
        }
        Ok(())
    }

    /// Equilibrium for torque `w`.
    pub fn equilibrium(&self, w: f64) -> Result<Vec<f64>> {
        let r = w / self.gravity;
        if r.abs() > 1.0 {
            return Err(Error::InvalidArgument(format!(
                "torque {w} has no equilibrium"
            )));
        }
        Ok(vec![r.asin(), 0.0])
    }

    pub fn field_at<S: Scalar>(&self, w: S, u: f64, x: &[S]) -> Vec<S> {
        vec![
            x[1] - S::from_f64(u),
            w - x[0].sin().scale(self.gravity) - x[1].scale(self.damping) + S::from_f64(u),
        ]
    }

    /// Slab `|x₁| ≤ π/2`.
    pub fn polytope(&self) -> Polytope {
        Polytope::from_bounds(
            &DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
            &DVector::from_element(1, -FRAC_PI_2),
            &DVector::from_element(1, FRAC_PI_2),
        )
        .expect("valid slab")
    }

    /// Sector of `g(sin(x° + s) − sin x°)` valid for every admissible `x°`
    /// while `x° + s` stays in the slab.
    pub fn common_sector(&self) -> SectorBound {
        SectorBound {
            gamma: self.gravity * chord_slope(self.domain) - 1e-9,
            beta: self.gravity + 1e-9,
        }
    }

    /// Loop-transformed Lur'e form at the upright-free equilibrium, with the
    /// sector moved to `[0, β − γ]`.
    pub fn common_lure(&self) -> Result<(LureSystem, SectorBound)> {
        let sector = self.common_sector();
        let a0 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -self.damping]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, -1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let phi = cst(self.gravity) * var(0).sin();
        let sys =
            LureSystem::loop_transformed(&a0, b, c, vec![phi], DVector::zeros(2), sector.gamma)?;
        Ok((sys, SectorBound::new(0.0, sector.beta - sector.gamma)?))
    }

    /// Common quadratic certificate for all admissible equilibria.
    pub fn certificate(&self) -> Result<LmiCertificate> {
        let (sys, sector) = self.common_lure()?;
        solve_lmi(&sys, &sector)
    }

    /// Unforced pendulum about the origin as `A = [[0,1],[−g,−d]]`,
    /// `B = (0,1)ᵀ`, `φ(s) = g(s − sin s)`.
    pub fn origin_lure(&self) -> Result<LureSystem> {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -self.gravity, -self.damping]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let phi = cst(self.gravity) * (var(0) - var(0).sin());
        LureSystem::new(a, b, c, vec![phi], DVector::zeros(2))
    }

    pub fn with_torque(&self, w: f64) -> PulsedPendulum {
        PulsedPendulum {
            model: *self,
            torque: w,
        }
    }
}

/// The pendulum at a fixed torque as a simulation model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PulsedPendulum {
    pub model: Pendulum,
    pub torque: f64,
}

impl VectorField for PulsedPendulum {
    fn dim(&self) -> usize {
        2
    }

    fn eval<S: Scalar>(&self, x: &[S], mode: FieldMode) -> Vec<S> {
        let u = match mode {
            FieldMode::Nominal => 0.0,
            FieldMode::Fault => self.model.pulse,
        };
        self.model.field_at(S::from_f64(self.torque), u, x)
    }
}

impl EquilibriumManifold for Pendulum {
    fn state_dim(&self) -> usize {
        2
    }

    fn control_dim(&self) -> usize {
        1
    }

    fn steady_state_residual<S: Scalar>(&self, x: &[S], w: &[S]) -> Vec<S> {
        vec![w[0] - x[0].sin().scale(self.gravity)]
    }

    fn bound_constraints<S: Scalar>(&self, _x: &[S], _w: &[S]) -> Vec<S> {
        Vec::new()
    }
}

/// Maximizes the torque `w` over equilibria `x° = (q, 0)`.
impl ScoModel for Pendulum {
    fn param_dim(&self) -> usize {
        1
    }

    fn equilibrium<S: Scalar>(&self, _w: &[S], q: &[S]) -> Vec<S> {
        vec![q[0], S::zero()]
    }

    fn cost<S: Scalar>(&self, w: &[S], _x: &[S]) -> S {
        -w[0]
    }

    fn fault_field<S: Scalar>(&self, w: &[S], x: &[S]) -> Vec<S> {
        self.field_at(w[0], self.pulse, x)
    }

    fn initial_guess(&self) -> (Vec<f64>, Vec<f64>) {
        (vec![0.0], vec![0.0])
    }

    fn variable_bounds(&self) -> (Vec<f64>, Vec<f64>) {
        (
            vec![-self.gravity, -self.domain],
            vec![self.gravity, self.domain],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use crate::lure::{lmi_block_matrix, LMI_TOL};

    #[test]
    fn common_sector_covers_domain() {
        let p = Pendulum::default();
        let s = p.common_sector();
        for i in 0..=60 {
            let x0 = -p.domain + 2.0 * p.domain * i as f64 / 60.0;
            for k in 0..=400 {
                let x = -FRAC_PI_2 + std::f64::consts::PI * k as f64 / 400.0;
                let d = x - x0;
                if d.abs() < 1e-9 {
                    continue;
                }
                let slope = p.gravity * (x.sin() - x0.sin()) / d;
                assert!(slope >= s.gamma && slope <= s.beta, "{x0} {x} {slope}");
            }
        }
    }

    #[test]
    fn common_lmi_is_feasible() {
        let p = Pendulum::default();
        let (sys, sector) = p.common_lure().unwrap();
        assert!((sys.a_matrix()[(1, 0)] + p.common_sector().gamma).abs() < 1e-12);
        let cert = p.certificate().unwrap();
        let m = lmi_block_matrix(
            sys.a_matrix(),
            sys.b_matrix(),
            sys.c_matrix(),
            &sector,
            &cert.p(),
            cert.tau,
        );
        assert!(linalg::max_eigenvalue(&m).unwrap() <= LMI_TOL);
        assert!(linalg::min_eigenvalue(&cert.p()).unwrap() >= 1e-8);
    }

    #[test]
    fn origin_lure_matches_field() {
        let p = Pendulum::default();
        let sys = p.origin_lure().unwrap();
        let x = [0.4, -0.7];
        let f = sys.field(&x);
        let g = p.field_at(0.0, 0.0, &x);
        assert!((f[0] - g[0]).abs() < 1e-14 && (f[1] - g[1]).abs() < 1e-14);
    }
}
