//! Equilibrium sets `{(x°, w) | f(x°, w, 0) = 0, g(x°, w) ≤ 0}`.

use crate::scalar::Scalar;

/// Steady-state equations and bounds parameterized by the decision `w`.
pub trait EquilibriumManifold: Sync {
    fn state_dim(&self) -> usize;
    fn control_dim(&self) -> usize;
    /// Residual of `f(x°, w, 0) = 0`.
    fn steady_state_residual<S: Scalar>(&self, x: &[S], w: &[S]) -> Vec<S>;
    /// Residual of `g(x°, w) ≤ 0`.
    fn bound_constraints<S: Scalar>(&self, x: &[S], w: &[S]) -> Vec<S>;
}
