mod common;

use lyasco::pendulum::Pendulum;
use lyasco::problem::{verify, ProblemFile};
use lyasco::quadratic::QuadraticCertificate;
use lyasco::scalar::Scalar;
use lyasco::scenario::DisturbanceScenario;
use lyasco::sim::{
    certificate_soundness_trial, classify_stability, integrate, FieldMode, SimConfig,
    SoundnessCase, StabilityLabel, VectorField,
};
use lyasco::trajectory::Trajectory;
use nalgebra::DVector;

struct Swinging;

impl VectorField for Swinging {
    fn dim(&self) -> usize {
        2
    }

    fn eval<S: Scalar>(&self, x: &[S], _mode: FieldMode) -> Vec<S> {
        vec![x[1], -x[0].sin().scale(10.0) - x[1]]
    }
}

fn final_state(step: f64) -> Vec<f64> {
    let cfg = SimConfig {
        horizon: 2.0,
        step,
        tol: 1e-3,
        settle_window: 0.0,
    };
    integrate(&Swinging, &[1.0, 0.0], None, &cfg)
        .unwrap()
        .last_state()
        .unwrap()
        .to_vec()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[test]
fn rk4_is_fourth_order() {
    let reference = final_state(1e-4);
    let e1 = dist(&final_state(0.04), &reference);
    let e2 = dist(&final_state(0.02), &reference);
    let order = (e1 / e2).log2();
    assert!(order >= 3.8, "observed order {order}");
}

#[test]
fn richardson_ratio_is_sixteen() {
    let (a, b, c) = (final_state(0.04), final_state(0.02), final_state(0.01));
    let ratio = dist(&a, &b) / dist(&b, &c);
    assert!((ratio - 16.0).abs() < 1.5, "ratio {ratio}");
}

#[test]
fn switching_times_are_hit_exactly() {
    let pend = common::pendulum();
    let s = DisturbanceScenario::new(0.0371, 0.1234, 2).unwrap();
    let cfg = SimConfig {
        horizon: 1.0,
        step: 0.05,
        ..SimConfig::default()
    };
    let traj = integrate(&pend.with_torque(0.0), &[0.0, 0.0], Some(&s), &cfg).unwrap();
    assert!(traj.times().contains(&0.0371));
    assert!(traj.times().contains(&0.1234));
    assert_eq!(*traj.times().last().unwrap(), 1.0);
    assert!(traj.times().windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn pulse_displaces_then_pendulum_returns() {
    let pend = common::pendulum();
    let s = DisturbanceScenario::new(0.0, 0.1, 2).unwrap();
    let cfg = SimConfig::default();
    let eq = pend.equilibrium(0.0).unwrap();
    let traj = integrate(&pend.with_torque(0.0), &eq, Some(&s), &cfg).unwrap();
    let at = |t: f64| {
        let k = traj.times().iter().position(|&u| u >= t - 1e-12).unwrap();
        traj.states()[k].clone()
    };
    // From rest: x₁ ≈ −ut + ut²/2, x₂ ≈ ut + 9ut²/2.
    let (u, t) = (pend.pulse, 0.01);
    let x = at(t);
    assert!((x[0] - (-u * t + 0.5 * u * t * t)).abs() < 1e-4, "{x:?}");
    assert!((x[1] - (u * t + 4.5 * u * t * t)).abs() < 1e-4, "{x:?}");
    assert!(at(0.1)[0] > at(0.05)[0] && at(0.05)[0] > 0.0);
    assert_eq!(classify_stability(&traj, &eq, &cfg), StabilityLabel::Stable);
}

#[test]
fn pendulum_sweep_is_sound() {
    let p = ProblemFile::from_json(common::PENDULUM).unwrap();
    let r = verify(&p, 60, 5).unwrap();
    assert!(
        r.counterexamples.is_empty(),
        "{:?}",
        r.counterexamples.first()
    );
    assert!(r.fired > 0 && r.not_certified > 0);
    assert_eq!(r.fired + r.not_certified, r.cases);
    assert!(
        r.max_lyapunov_increase <= 1e-7,
        "{}",
        r.max_lyapunov_increase
    );
    for o in &r.outcomes {
        if o.fired {
            assert!(o.v_cleared <= o.v_min);
            assert_eq!(o.label, StabilityLabel::Stable);
        }
    }
}

#[test]
fn three_bus_sweep_is_sound() {
    let p = ProblemFile::from_json(common::THREE_BUS).unwrap();
    let r = verify(&p, 60, 6).unwrap();
    assert!(
        r.counterexamples.is_empty(),
        "{:?}",
        r.counterexamples.first()
    );
    assert!(r.fired > 0);
    assert_eq!(r.fired + r.not_certified, r.cases);
    assert!(
        r.max_lyapunov_increase <= 1e-7,
        "{}",
        r.max_lyapunov_increase
    );
    for o in r.outcomes.iter().filter(|o| o.fired) {
        assert_eq!(o.label, StabilityLabel::Stable);
    }
}

#[test]
fn strong_pulse_is_recorded_as_not_certified() {
    let base = common::pendulum();
    let model = Pendulum {
        pulse: -200.0,
        ..base
    };
    let eq = model.equilibrium(0.0).unwrap();
    let case = SoundnessCase {
        field: model.with_torque(0.0),
        certificate: QuadraticCertificate::new(
            base.certificate().unwrap().p(),
            DVector::from_column_slice(&eq),
        )
        .unwrap(),
        equilibrium: eq,
        scenario: DisturbanceScenario::new(0.0, 0.3, 2).unwrap(),
    };
    let r = certificate_soundness_trial(&[case], &base.polytope(), &SimConfig::default()).unwrap();
    assert_eq!(r.fired, 0);
    assert_eq!(r.not_certified, 1);
    assert!(r.counterexamples.is_empty());
    assert!(r.outcomes[0].v_cleared > r.outcomes[0].v_min);
}

#[test]
fn csv_header_and_round_trip() {
    let cfg = SimConfig {
        horizon: 0.5,
        ..SimConfig::default()
    };
    let traj = integrate(&Swinging, &[0.4, 0.0], None, &cfg).unwrap();
    let csv = traj.to_csv(7);
    assert_eq!(csv.lines().next(), Some("t,x1,x2"));
    let back = Trajectory::from_csv(&csv).unwrap();
    assert_eq!(*back.times().last().unwrap(), 0.5);
    assert_eq!(back.len(), (traj.len() - 1).div_ceil(7) + 1);
    for (a, b) in back.states().iter().zip(traj.states().iter().step_by(7)) {
        assert!(dist(a, b) <= 1e-11 * (1.0 + b[0].abs().max(b[1].abs())));
    }
    assert!(Trajectory::from_csv("x,t\n0,1\n").is_err());
}

struct Runaway;

impl VectorField for Runaway {
    fn dim(&self) -> usize {
        1
    }

    fn eval<S: Scalar>(&self, x: &[S], _mode: FieldMode) -> Vec<S> {
        vec![x[0] * x[0]]
    }
}

#[test]
fn divergence_is_unstable() {
    let cfg = SimConfig::default();
    let traj = integrate(&Runaway, &[2.0], None, &cfg).unwrap();
    assert!(traj.diverged);
    assert_eq!(
        classify_stability(&traj, &[0.0], &cfg),
        StabilityLabel::Unstable
    );
}
