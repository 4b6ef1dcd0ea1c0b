//! Disturbance scenarios and the Taylor map to the fault-cleared state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Jet, Scalar, JET_LEN};

/// Largest supported Taylor order.
pub const MAX_TAYLOR_ORDER: usize = JET_LEN - 1;

/// A disturbance active on `[t0, tc)`; the during-fault field is supplied
/// by the system model. `tc = t0` is the undisturbed scenario.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceScenario {
    pub t0: f64,
    pub tc: f64,
    #[serde(default = "default_order")]
    pub taylor_order: usize,
}

fn default_order() -> usize {
    2
}

impl DisturbanceScenario {
    pub fn new(t0: f64, tc: f64, taylor_order: usize) -> Result<Self> {
        let s = Self {
            t0,
            tc,
            taylor_order,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0.is_finite() && self.tc.is_finite() && self.t0 >= 0.0) {
            return Err(Error::InvalidArgument(
                "scenario times must be finite and t0 ≥ 0".into(),
            ));
        }
        if self.tc < self.t0 {
            return Err(Error::InvalidArgument(format!(
                "clearing time {} precedes fault time {}",
                self.tc, self.t0
            )));
        }
        if self.taylor_order == 0 || self.taylor_order > MAX_TAYLOR_ORDER {
            return Err(Error::InvalidArgument(format!(
                "Taylor order must be in 1..={MAX_TAYLOR_ORDER}"
            )));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.tc - self.t0
    }

    pub fn is_identity(&self) -> bool {
        self.tc == self.t0
    }

    pub fn with_clearing_time(&self, tc: f64) -> Result<Self> {
        Self::new(self.t0, tc, self.taylor_order)
    }
}

/// `x(Δt) ≈ Σ_{k≤N} x_k Δt^k` for `ẋ = f(x)`, `x(0) = x0`, with the Taylor
/// coefficients generated by the recurrence `x_{k+1} = f(x)_k / (k + 1)`.
pub fn taylor_flow<S, F>(f: F, x0: &[S], dt: f64, order: usize) -> Result<Vec<S>>
where
    S: Scalar,
    F: Fn(&[Jet<S>]) -> Vec<Jet<S>>,
{
    if order == 0 || order > MAX_TAYLOR_ORDER {
        return Err(Error::InvalidArgument(format!(
            "Taylor order must be in 1..={MAX_TAYLOR_ORDER}"
        )));
    }
    let mut x: Vec<Jet<S>> = x0.iter().map(|&v| Jet::constant(v)).collect();
    for k in 0..order {
        let fx = f(&x);
        if fx.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: fx.len(),
            });
        }
        for (xi, fi) in x.iter_mut().zip(&fx) {
            xi.c[k + 1] = fi.c[k].scale(1.0 / (k + 1) as f64);
        }
    }
    Ok(x.iter()
        .map(|xi| {
            let mut acc = xi.c[order];
            for k in (0..order).rev() {
                acc = acc.scale(dt) + xi.c[k];
            }
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field_first_order() {
        let xc = taylor_flow(
            |x: &[Jet<f64>]| vec![Jet::constant(3.0); x.len()],
            &[1.0, 2.0],
            0.1,
            1,
        )
        .unwrap();
        assert!((xc[0] - 1.3).abs() < 1e-15 && (xc[1] - 2.3).abs() < 1e-15);
    }

    #[test]
    fn constant_acceleration() {
        // δ̇ = ω, ω̇ = K with K = 1: δ(0.1) = δ + 0.005.
        let f = |x: &[Jet<f64>]| vec![x[1], Jet::constant(1.0)];
        let xc = taylor_flow(f, &[0.3, 0.0], 0.1, 2).unwrap();
        assert!((xc[0] - 0.305).abs() < 1e-15);
        assert!((xc[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn exponential_series() {
        let f = |x: &[Jet<f64>]| vec![-x[0]];
        let xc = taylor_flow(f, &[1.0], 0.5, 7).unwrap();
        let exact: f64 = (0..=7)
            .map(|k| (-0.5f64).powi(k) / (1..=k).product::<i32>().max(1) as f64)
            .sum();
        assert!((xc[0] - exact).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_scenarios() {
        assert!(DisturbanceScenario::new(0.2, 0.1, 2).is_err());
        assert!(DisturbanceScenario::new(0.0, 0.1, 0).is_err());
        assert!(DisturbanceScenario::new(0.0, 0.1, 8).is_err());
        assert!(DisturbanceScenario::new(0.1, 0.1, 2).unwrap().is_identity());
    }
}
