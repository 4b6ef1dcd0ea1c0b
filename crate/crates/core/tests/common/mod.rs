#![allow(dead_code)]

use lyasco::pendulum::Pendulum;
use lyasco::power::{line_trip_scenario, GridModel, LineTrip};
use lyasco::problem::ProblemFile;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub const THREE_BUS: &str = include_str!("../../../../data/threebus.json");
pub const PENDULUM: &str = include_str!("../../../../data/pendulum.json");

pub fn three_bus() -> (GridModel, LineTrip) {
    let ProblemFile::Grid(p) = ProblemFile::from_json(THREE_BUS).unwrap() else {
        panic!("bundled three-bus file is not a grid problem");
    };
    let d = p.disturbance;
    let trip = line_trip_scenario(&p.grid, d.line, d.t0, d.tc, d.taylor_order).unwrap();
    (p.grid, trip)
}

pub fn pendulum() -> Pendulum {
    let ProblemFile::Pendulum(p) = ProblemFile::from_json(PENDULUM).unwrap() else {
        panic!("bundled pendulum file is not a pendulum problem");
    };
    p.pendulum
}

/// `QDQᵀ` with eigenvalues log-uniform in `[1, cond]`.
pub fn random_spd<R: Rng>(rng: &mut R, n: usize, cond: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let q = m.qr().q();
    let d = DVector::from_fn(n, |_, _| cond.powf(rng.gen::<f64>()));
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

/// Smallest root of `det(A − λI)` located by a sign scan and bisection.
pub fn char_poly_min_root(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let bound = a.norm() + 1.0;
    let det = |l: f64| (a - DMatrix::identity(n, n) * l).determinant();
    let steps = 20_000;
    let h = 2.0 * bound / steps as f64;
    let mut lo = -bound;
    let mut f_lo = det(lo);
    for k in 1..=steps {
        let hi = -bound + h * k as f64;
        let f_hi = det(hi);
        if f_lo == 0.0 {
            return lo;
        }
        if f_lo.signum() != f_hi.signum() {
            let (mut a0, mut b0, mut fa) = (lo, hi, f_lo);
            for _ in 0..200 {
                let m = 0.5 * (a0 + b0);
                let fm = det(m);
                if fm.signum() == fa.signum() {
                    a0 = m;
                    fa = fm;
                } else {
                    b0 = m;
                }
            }
            return 0.5 * (a0 + b0);
        }
        lo = hi;
        f_lo = f_hi;
    }
    panic!("no eigenvalue bracketed");
}

/// Minimizer of `½xᵀHx + gᵀx` subject to `Ax ≤ b` by enumerating every
/// active set (small problems only).
pub fn active_set_oracle(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Option<DVector<f64>> {
    let n = h.nrows();
    let m = a.nrows();
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let act: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = act.len();
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        for (r, &i) in act.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + r)] = a[(i, j)];
                kkt[(n + r, j)] = a[(i, j)];
            }
            rhs[n + r] = b[i];
        }
        for j in 0..n {
            rhs[j] = -g[j];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            continue;
        };
        let x = sol.rows(0, n).into_owned();
        let lam = sol.rows(n, k);
        if lam.iter().any(|&l| l < -1e-10) {
            continue;
        }
        if (a * &x - b).iter().any(|&r| r > 1e-9) {
            continue;
        }
        let f = 0.5 * x.dot(&(h * &x)) + g.dot(&x);
        if best.as_ref().map_or(true, |(bf, _)| f < *bf - 1e-12) {
            best = Some((f, x));
        }
    }
    best.map(|(_, x)| x)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}
