//! Fixed-step RK4 simulation of nominal and faulted systems, the stability
//! classifier and the certificate soundness sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::polytope::Polytope;
use crate::quadratic::LyapunovFunction;
use crate::scalar::{Jet, Scalar};
use crate::scenario::{taylor_flow, DisturbanceScenario};
use crate::trajectory::Trajectory;
use crate::vmin::v_min;

/// States beyond this norm stop the integration.
pub const BLOW_UP: f64 = 1e6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldMode {
    Nominal,
    Fault,
}

/// Autonomous vector field with a nominal and a during-fault mode.
pub trait VectorField: Sync {
    fn dim(&self) -> usize;
    fn eval<S: Scalar>(&self, x: &[S], mode: FieldMode) -> Vec<S>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityLabel {
    Stable,
    Unstable,
    Uncertified,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub horizon: f64,
    pub step: f64,
    /// Convergence tolerance on `‖x(t) − x°‖`.
    pub tol: f64,
    pub settle_window: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 20.0,
            step: 1e-3,
            tol: 1e-3,
            settle_window: 2.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite() && self.settle_window >= 0.0) {
            return Err(Error::InvalidArgument(
                "horizon and settle window must be non-negative".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tolerance must be positive".into()));
        }
        Ok(())
    }
}

fn rk4_step<F: VectorField>(field: &F, mode: FieldMode, x: &[f64], h: f64) -> Vec<f64> {
    let k1 = field.eval(x, mode);
    let x2: Vec<f64> = x.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = field.eval(&x2, mode);
    let x3: Vec<f64> = x.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = field.eval(&x3, mode);
    let x4: Vec<f64> = x.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = field.eval(&x4, mode);
    (0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrates from `t = 0`; the fault field is active on `[t0, tc)` and
/// step boundaries are snapped to both switching times.
pub fn integrate<F: VectorField>(
    field: &F,
    x_init: &[f64],
    scenario: Option<&DisturbanceScenario>,
    config: &SimConfig,
) -> Result<Trajectory> {
    check_dim(field.dim(), x_init.len())?;
    config.validate()?;
    let mut segments = Vec::new();
    match scenario {
        Some(s) => {
            s.validate()?;
            if s.tc > config.horizon {
                return Err(Error::InvalidArgument(
                    "clearing time beyond the horizon".into(),
                ));
            }
            segments.push((0.0, s.t0, FieldMode::Nominal));
            segments.push((s.t0, s.tc, FieldMode::Fault));
            segments.push((s.tc, config.horizon, FieldMode::Nominal));
        }
        None => segments.push((0.0, config.horizon, FieldMode::Nominal)),
    }
    let mut times = vec![0.0];
    let mut states = vec![x_init.to_vec()];
    let mut x = x_init.to_vec();
    let mut diverged = false;
    'outer: for (a, b, mode) in segments {
        let len = b - a;
        if len <= 0.0 {
            continue;
        }
        let steps = ((len / config.step) - 1e-9).ceil().max(1.0) as usize;
        let h = len / steps as f64;
        for k in 1..=steps {
            x = rk4_step(field, mode, &x, h);
            let t = if k == steps { b } else { a + h * k as f64 };
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() || norm > BLOW_UP {
                diverged = true;
                break 'outer;
            }
            times.push(t);
            states.push(x.clone());
        }
    }
    Ok(Trajectory::from_parts(times, states, diverged))
}

/// Stable iff the run reached the horizon without diverging and stayed
/// within `tol` of `x°` over the final settle window.
pub fn classify_stability(
    traj: &Trajectory,
    equilibrium: &[f64],
    config: &SimConfig,
) -> StabilityLabel {
    let window = config.settle_window.min(config.horizon);
    let Some(&t_end) = traj.times().last() else {
        return StabilityLabel::Unstable;
    };
    if traj.diverged || t_end < config.horizon - 1e-9 || traj.dim() != equilibrium.len() {
        return StabilityLabel::Unstable;
    }
    let settled = traj
        .times()
        .iter()
        .zip(traj.states())
        .filter(|(t, _)| **t >= t_end - window - 1e-12)
        .all(|(_, x)| {
            let d: f64 = x
                .iter()
                .zip(equilibrium)
                .map(|(a, b)| (a - b).powi(2))
                .sum();
            d.sqrt() <= config.tol
        });
    if settled {
        StabilityLabel::Stable
    } else {
        StabilityLabel::Unstable
    }
}

/// One disturbance case for the soundness sweep. The certificate must be
/// centred at `equilibrium`.
pub struct SoundnessCase<F, V> {
    pub field: F,
    pub equilibrium: Vec<f64>,
    pub scenario: DisturbanceScenario,
    pub certificate: V,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub case: usize,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub v_min: f64,
    pub v_cleared: f64,
    pub fired: bool,
    pub label: StabilityLabel,
    /// Largest step-to-step increase of `V` while inside the polytope.
    pub max_increase: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub cases: usize,
    pub fired: usize,
    pub not_certified: usize,
    pub counterexamples: Vec<Counterexample>,
    pub max_lyapunov_increase: f64,
    pub outcomes: Vec<CaseOutcome>,
}

/// Fault-cleared state from the truncated Taylor series of the fault flow
/// started at `x0`.
pub fn taylor_fault_state<F: VectorField>(
    field: &F,
    x0: &[f64],
    scenario: &DisturbanceScenario,
) -> Result<Vec<f64>> {
    scenario.validate()?;
    check_dim(field.dim(), x0.len())?;
    taylor_flow(
        |x: &[Jet<f64>]| field.eval(x, FieldMode::Fault),
        x0,
        scenario.duration(),
        scenario.taylor_order,
    )
}

/// Tolerance of the step-to-step Lyapunov monotonicity check.
pub const MONOTONICITY_TOL: f64 = 1e-7;

fn run_case<F: VectorField, V: LyapunovFunction>(
    case: &SoundnessCase<F, V>,
    poly: &Polytope,
    config: &SimConfig,
) -> Result<(CaseOutcome, Option<String>)> {
    let vm = v_min(&case.certificate, poly, &case.equilibrium)?.v_min;
    let traj = integrate(&case.field, &case.equilibrium, Some(&case.scenario), config)?;
    let tc = case.scenario.tc;
    let ic = traj.times().iter().position(|&t| t == tc);
    let Some(ic) = ic else {
        let outcome = CaseOutcome {
            v_min: vm,
            v_cleared: f64::INFINITY,
            fired: false,
            label: StabilityLabel::Unstable,
            max_increase: 0.0,
        };
        return Ok((outcome, None));
    };
    let xc = &traj.states()[ic];
    let v_cleared = case.certificate.value(xc);
    let fired = v_cleared <= vm && poly.contains(xc, 0.0)?;
    let label = classify_stability(&traj, &case.equilibrium, config);
    let mut max_increase = f64::NEG_INFINITY;
    let mut left = None;
    let post = &traj.states()[ic..];
    for (k, w) in post.windows(2).enumerate() {
        if !poly.contains(&w[1], 1e-9)? {
            left.get_or_insert(traj.times()[ic + k + 1]);
            continue;
        }
        max_increase =
            max_increase.max(case.certificate.value(&w[1]) - case.certificate.value(&w[0]));
    }
    let mut reason = None;
    if fired {
        if let Some(t) = left {
            reason = Some(format!("trajectory left the polytope at t = {t}"));
        } else if label != StabilityLabel::Stable {
            reason = Some("certified trajectory did not converge".into());
        } else if max_increase > MONOTONICITY_TOL {
            reason = Some(format!("Lyapunov value increased by {max_increase:e}"));
        }
    }
    let outcome = CaseOutcome {
        v_min: vm,
        v_cleared,
        fired,
        label,
        max_increase: max_increase.max(0.0),
    };
    Ok((outcome, reason))
}

/// Simulates every case; a case whose cleared state satisfies
/// `V(x^c) ≤ V^min` and `x^c ∈ P` must stay in `P` and converge.
pub fn certificate_soundness_trial<F: VectorField, V: LyapunovFunction>(
    cases: &[SoundnessCase<F, V>],
    poly: &Polytope,
    config: &SimConfig,
) -> Result<SoundnessReport> {
    let results: Vec<Result<(CaseOutcome, Option<String>)>> = cases
        .par_iter()
        .map(|c| run_case(c, poly, config))
        .collect();
    let mut report = SoundnessReport {
        cases: cases.len(),
        fired: 0,
        not_certified: 0,
        counterexamples: Vec::new(),
        max_lyapunov_increase: 0.0,
        outcomes: Vec::with_capacity(cases.len()),
    };
    for (k, r) in results.into_iter().enumerate() {
        let (outcome, reason) = r?;
        if outcome.fired {
            report.fired += 1;
            report.max_lyapunov_increase = report.max_lyapunov_increase.max(outcome.max_increase);
        } else {
            report.not_certified += 1;
        }
        if let Some(reason) = reason {
            report
                .counterexamples
                .push(Counterexample { case: k, reason });
        }
        report.outcomes.push(outcome);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;
    impl VectorField for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, x: &[S], _mode: FieldMode) -> Vec<S> {
            vec![-x[0]]
        }
    }

    #[test]
    fn exponential_decay() {
        let cfg = SimConfig {
            horizon: 10.0,
            ..SimConfig::default()
        };
        let traj = integrate(&Decay, &[1.0], None, &cfg).unwrap();
        let x = traj.last_state().unwrap()[0];
        assert!((x - (-10.0f64).exp()).abs() < 1e-9);
        assert_eq!(*traj.times().last().unwrap(), 10.0);
        assert_eq!(
            classify_stability(&traj, &[0.0], &cfg),
            StabilityLabel::Stable
        );
    }

    struct Growth;
    impl VectorField for Growth {
        fn dim(&self) -> usize {
            1
        }
        fn eval<S: Scalar>(&self, x: &[S], _mode: FieldMode) -> Vec<S> {
            vec![x[0] * x[0]]
        }
    }

    #[test]
    fn blow_up_is_flagged() {
        let traj = integrate(&Growth, &[1.0], None, &SimConfig::default()).unwrap();
        assert!(traj.diverged);
        assert!(*traj.times().last().unwrap() < 1.1);
        assert_eq!(
            classify_stability(&traj, &[0.0], &SimConfig::default()),
            StabilityLabel::Unstable
        );
    }

    #[test]
    fn switching_times_are_grid_points() {
        let s = DisturbanceScenario::new(0.0105, 0.1337, 2).unwrap();
        let cfg = SimConfig {
            horizon: 1.0,
            ..SimConfig::default()
        };
        let traj = integrate(&Decay, &[1.0], Some(&s), &cfg).unwrap();
        assert!(traj.times().contains(&0.0105));
        assert!(traj.times().contains(&0.1337));
    }
}
