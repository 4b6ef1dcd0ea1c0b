mod common;

use std::f64::consts::FRAC_PI_2;

use lyasco::error::Error;
use lyasco::expr::{cst, var};
use lyasco::linalg::min_eigenvalue;
use lyasco::poly::{monomial_product, monomials, Polynomial};
use lyasco::polytope::Polytope;
use lyasco::quadratic::LyapunovFunction;
use lyasco::sos::{
    ball_certificate, find_sos_convex_cllf, lifted_samples, recast, sos_decompose,
    QuasiPolynomialSystem,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn damped_pendulum() -> QuasiPolynomialSystem {
    QuasiPolynomialSystem::new(2, vec![var(1), cst(-10.0) * var(0).sin() - var(1)]).unwrap()
}

fn poly(n: usize, terms: &[(&[u32], f64)]) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for (m, c) in terms {
        p.add_term(m.to_vec(), *c);
    }
    p
}

#[test]
fn pendulum_recast_follows_the_chain_rule() {
    let r = recast(&damped_pendulum()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..1000 {
        let x = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let xt = r.lift(&x);
        let f = r.system.field(&xt);
        let x1dot = x[1];
        let x2dot = -10.0 * x[0].sin() - x[1];
        assert!((f[0] - x1dot).abs() < 1e-12);
        assert!((f[1] - x2dot).abs() < 1e-12);
        // d/dt sin x₁ = cos x₁ ẋ₁, d/dt cos x₁ = −sin x₁ ẋ₁.
        assert!((f[2] - x[0].cos() * x1dot).abs() < 1e-12);
        assert!((f[3] + x[0].sin() * x1dot).abs() < 1e-12);
        // Constraints are invariant: ∇r · f̃ = 0 on the manifold.
        for c in &r.constraints {
            let d: f64 = c
                .gradient()
                .iter()
                .zip(&f)
                .map(|(g, v)| g.eval(&xt[..]) * v)
                .sum();
            assert!(d.abs() < 1e-12);
        }
    }
}

#[test]
fn exp_recast_follows_the_chain_rule() {
    let sys = QuasiPolynomialSystem::new(1, vec![cst(1.0) - var(0).exp()]).unwrap();
    let r = recast(&sys).unwrap();
    assert_eq!(r.lifts.len(), 1);
    for k in 0..=100 {
        let x = -2.0 + 4.0 * k as f64 / 100.0;
        let xt = r.lift(&[x]);
        let f = r.system.field(&xt);
        assert!((f[0] - (1.0 - x.exp())).abs() < 1e-12);
        assert!((f[1] - x.exp() * (1.0 - x.exp())).abs() < 1e-12 * (1.0 + x.exp().powi(2)));
    }
}

#[test]
fn lifted_samples_lie_on_the_manifold() {
    let r = recast(&damped_pendulum()).unwrap();
    for xt in lifted_samples(&r, &[-3.0, -3.0], &[3.0, 3.0], 1000, 42) {
        assert!(r.manifold_residual(&xt) < 1e-14);
        assert_eq!(r.e1().ncols(), xt.len());
    }
}

/// `zᵀQz` expanded term by term.
fn expand(basis: &[Vec<u32>], gram: &[Vec<f64>], n: usize) -> Polynomial {
    let mut p = Polynomial::zero(n);
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            p.add_term(monomial_product(a, b), gram[i][j]);
        }
    }
    p
}

#[test]
fn gram_decomposition_round_trips_random_sums_of_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..20 {
        let n = rng.gen_range(1..=2);
        let basis = monomials(n, 1, 2);
        let mut p = Polynomial::zero(n);
        for _ in 0..rng.gen_range(1..=3) {
            let mut q = Polynomial::zero(n);
            for m in &basis {
                q.add_term(m.clone(), rng.gen_range(-1.0..1.0));
            }
            p = p + &q * &q;
        }
        let d = sos_decompose(&p).unwrap();
        assert!(expand(&d.basis, &d.gram, n).distance(&p) <= 1e-10 * (1.0 + p.max_abs_coeff()));
        let q = DMatrix::from_fn(d.basis.len(), d.basis.len(), |i, j| d.gram[i][j]);
        assert!(min_eigenvalue(&q).unwrap() >= -1e-9);
    }
}

/// `½V(u) + ½V(u + w) − V(u + w/2)` over `(u, w)` for univariate `V`.
fn midpoint_form(v: &Polynomial) -> Polynomial {
    let u = Polynomial::var(2, 0);
    let w = Polynomial::var(2, 1);
    let uw = &u + &w;
    let mid = &u + &w.scale(0.5);
    v.compose(&[u]).unwrap().scale(0.5) + v.compose(&[uw]).unwrap().scale(0.5)
        - v.compose(&[mid]).unwrap()
}

#[test]
fn quartic_is_sos_convex_and_double_well_is_not() {
    let quartic = poly(1, &[(&[4], 1.0)]);
    assert!(sos_decompose(&midpoint_form(&quartic)).is_ok());
    let well = poly(1, &[(&[4], 1.0), (&[2], -1.0)]);
    assert!(sos_decompose(&midpoint_form(&well)).is_err());
}

#[test]
fn odd_degree_is_not_sos() {
    assert!(matches!(
        sos_decompose(&poly(1, &[(&[3], 1.0)])),
        Err(Error::NotSos { .. })
    ));
}

#[test]
fn pendulum_certificate_is_convex_positive_and_decreasing() {
    let r = recast(&damped_pendulum()).unwrap();
    let region = Polytope::from_box(&[-FRAC_PI_2, -4.0], &[FRAC_PI_2, 4.0]).unwrap();
    let eq = r.lift(&[0.0, 0.0]);
    let cert = find_sos_convex_cllf(&r.system, &r.constraints, 2, &eq, &region).unwrap();
    assert!(cert.value(&eq).abs() < 1e-9);
    assert!(cert.min_eigenvalues.iter().all(|&e| e >= -1e-8));
    let h = 1e-6;
    for xt in lifted_samples(&r, &[-FRAC_PI_2, -4.0], &[FRAC_PI_2, 4.0], 5000, 44) {
        let dist: f64 = xt
            .iter()
            .zip(&eq)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        if dist > 1e-3 {
            assert!(cert.value(&xt) > 0.0, "{xt:?}");
        }
        assert!(min_eigenvalue(&cert.hessian(&xt)).unwrap() >= -1e-8);
        let vdot = cert.derivative(&r.system, &xt);
        assert!(vdot <= 1e-8, "{xt:?}: {vdot}");
        // Central difference of V along the lifted flow.
        let f = r.system.field(&xt);
        let plus: Vec<f64> = xt.iter().zip(&f).map(|(a, b)| a + h * b).collect();
        let minus: Vec<f64> = xt.iter().zip(&f).map(|(a, b)| a - h * b).collect();
        let fd = (cert.value(&plus) - cert.value(&minus)) / (2.0 * h);
        assert!((fd - vdot).abs() <= 1e-5 * (1.0 + vdot.abs()));
    }
}

#[test]
fn ball_certificate_with_zero_perturbation_accepts_any_radius() {
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
    let g = |_x0: &[f64], _y: &[f64]| DMatrix::zeros(2, 2);
    for r in [0.1, 1.0, 100.0] {
        let c = ball_certificate(&a, g, &[vec![0.0, 0.0]], r, 200).unwrap();
        assert_eq!(c.gamma, 0.0);
        assert!((c.margin - 1.0).abs() < 1e-12);
    }
}

#[test]
fn diagonal_ball_certificate_threshold() {
    // P = diag(1/2, 1/4), ‖G(y)‖ = max |y_i| ≤ r, accepted iff r < 1.
    let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -2.0]));
    let g =
        |_x0: &[f64], y: &[f64]| DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(y));
    let eq = [vec![0.0, 0.0]];
    let c = ball_certificate(&a, g, &eq, 0.5, 500).unwrap();
    assert!((c.p_norm - 0.5).abs() < 1e-12);
    assert!((c.gamma - 0.5).abs() < 1e-12);
    assert!((c.level - 0.25 * 0.25).abs() < 1e-12);
    let mut last = true;
    for k in 1..=40 {
        let r = 0.05 * k as f64;
        let ok = ball_certificate(&a, g, &eq, r, 500).is_ok();
        assert!(last || !ok, "acceptance regained at r = {r}");
        assert_eq!(ok, r < 1.0 - 1e-12, "r = {r}");
        last = ok;
    }
}

#[test]
fn ball_certificate_rejects_unstable_linear_part() {
    let a = DMatrix::from_element(1, 1, 0.5);
    let g = |_x0: &[f64], _y: &[f64]| DMatrix::zeros(1, 1);
    assert!(ball_certificate(&a, g, &[vec![0.0]], 0.1, 10).is_err());
    let a = DMatrix::from_element(1, 1, -1.0);
    assert!(ball_certificate(&a, g, &[vec![0.0]], -1.0, 10).is_err());
    assert!(ball_certificate(&a, g, &[], 0.1, 10).is_err());
}
