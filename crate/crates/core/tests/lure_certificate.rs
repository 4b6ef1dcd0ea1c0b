mod common;

use std::f64::consts::{FRAC_PI_2, PI};

use lyasco::expr::var;
use lyasco::linalg::{max_eigenvalue, min_eigenvalue};
use lyasco::lure::{
    concave_bound, convex_relaxation_coeffs, estimate_sector, inner_approximation_coeffs,
    lmi_block_matrix, solve_lmi, LureSystem, LMI_TOL,
};
use lyasco::polytope::Polytope;
use lyasco::power::common_certificate;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn slab(n: usize, c: &[f64], half: f64) -> Polytope {
    Polytope::from_bounds(
        &DMatrix::from_row_slice(1, n, c),
        &DVector::from_element(1, -half),
        &DVector::from_element(1, half),
    )
    .unwrap()
}

#[test]
fn sine_sector_on_half_period() {
    let sys = LureSystem::new(
        DMatrix::from_element(1, 1, -1.0),
        DMatrix::from_element(1, 1, 0.0),
        DMatrix::from_element(1, 1, 1.0),
        vec![var(0).sin()],
        DVector::zeros(1),
    )
    .unwrap();
    let poly = slab(1, &[1.0], FRAC_PI_2);
    let s = estimate_sector(&sys, &poly, 20_000).unwrap();
    assert!((s.gamma - 2.0 / PI).abs() < 1e-4, "{s:?}");
    assert!((s.beta - 1.0).abs() < 1e-4);
    let ranges = sys.channel_ranges(&poly).unwrap();
    assert!(s.verify(&sys, &ranges, 10_000));
}

#[test]
fn printed_three_bus_sector() {
    let (grid, _) = common::three_bus();
    let s = grid.printed_sector(0.0).unwrap();
    assert!((s.gamma - 0.739 / FRAC_PI_2).abs() < 1e-12);
    assert!((s.gamma - 0.4704).abs() < 1e-4);
    assert!((s.beta - 1.941).abs() < 1e-12);
}

#[test]
fn origin_pendulum_certificate_decreases_on_samples() {
    let pend = common::pendulum();
    let sys = pend.origin_lure().unwrap();
    let poly = slab(2, &[1.0, 0.0], FRAC_PI_2);
    let sector = estimate_sector(&sys, &poly, 20_000).unwrap();
    let cert = solve_lmi(&sys, &sector).unwrap();
    let p = cert.p();
    let block = lmi_block_matrix(
        sys.a_matrix(),
        sys.b_matrix(),
        sys.c_matrix(),
        &sector,
        &p,
        cert.tau,
    );
    assert!(max_eigenvalue(&block).unwrap() <= LMI_TOL);
    assert!(min_eigenvalue(&p).unwrap() >= 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for x in poly
        .sample(&mut rng, 10_000, &[-FRAC_PI_2, -6.0], &[FRAC_PI_2, 6.0])
        .unwrap()
    {
        assert!(sys.lyapunov_derivative(&p, &x) <= 1e-9, "{x:?}");
    }
}

#[test]
fn three_bus_lure_certificate_decreases_on_samples() {
    let (grid, _) = common::three_bus();
    let (lure, cert) = common_certificate(&grid).unwrap();
    let p = cert.p();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let lo = [-FRAC_PI_2, -FRAC_PI_2, -20.0, -20.0, -20.0];
    let hi = [FRAC_PI_2, FRAC_PI_2, 20.0, 20.0, 20.0];
    for x in lure.polytope.sample(&mut rng, 10_000, &lo, &hi).unwrap() {
        assert!(lure.system.lyapunov_derivative(&p, &x) <= 1e-9, "{x:?}");
    }
}

fn random_parameters(rng: &mut ChaCha8Rng) -> (f64, f64, f64, f64) {
    let d_lo = rng.gen_range(-2.0..0.0);
    let d_hi = rng.gen_range(0.1..2.0);
    let mid = 0.5 * (d_lo + d_hi);
    (
        rng.gen_range(d_lo..mid),
        rng.gen_range(mid..d_hi),
        d_lo,
        d_hi,
    )
}

#[test]
fn inner_set_is_inside_concave_set_inside_relaxation() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let (x_lo, x_hi, d_lo, d_hi) = random_parameters(&mut rng);
        let inner = inner_approximation_coeffs(x_lo, x_hi, d_lo, d_hi).unwrap();
        let [l1, l2] = convex_relaxation_coeffs(x_lo, x_hi, d_lo, d_hi)
            .unwrap()
            .lines();
        for k in 0..10_000 {
            let x = x_lo + (x_hi - x_lo) * k as f64 / 9_999.0;
            let exact = concave_bound(x, d_lo, d_hi);
            let relax = l1.eval(x).min(l2.eval(x));
            assert!(inner.bound(x) <= exact + 1e-12);
            assert!(exact <= relax + 1e-12, "x {x}: {exact} > {relax}");
        }
    }
}

#[test]
fn symmetric_half_pi_inner_approximation() {
    let inner = inner_approximation_coeffs(-0.8, 0.8, -FRAC_PI_2, FRAC_PI_2).unwrap();
    for k in 0..10_000 {
        let x = -0.8 + 1.6 * k as f64 / 9_999.0;
        assert!(inner.bound(x) <= concave_bound(x, -FRAC_PI_2, FRAC_PI_2) + 1e-12);
    }
}

#[test]
fn degenerate_width_gives_trivial_inner_set() {
    let inner = inner_approximation_coeffs(0.3, 0.3, 0.3, 0.3).unwrap();
    assert!(inner.bound(0.3).abs() < 1e-15);
}

#[test]
fn relaxation_rejects_midpoint_violations() {
    assert!(convex_relaxation_coeffs(0.6, 0.9, -1.0, 1.0).is_err());
    assert!(inner_approximation_coeffs(-0.9, -0.2, -1.0, 1.0).is_err());
}
