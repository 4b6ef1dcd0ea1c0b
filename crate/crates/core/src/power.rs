//! Lossless transmission networks: optimal power flow, swing dynamics in
//! Lur'e form, line-trip disturbances and the stability-constrained
//! dispatch.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::expr::{cst, var};
use crate::linalg;
use crate::lure::{solve_lmi, LmiCertificate, LureSystem, SectorBound};
use crate::manifold::EquilibriumManifold;
use crate::nlp::NlpConfig;
use crate::pendulum::chord_slope;
use crate::polytope::Polytope;
use crate::scalar::Scalar;
use crate::scenario::DisturbanceScenario;
use crate::sco::{
    solve_sco, solve_stability_free, FacetForm, ScoModel, ScoProblem, ScoSolution,
    StabilityCertificate,
};
use crate::sim::{
    classify_stability, integrate, FieldMode, SimConfig, StabilityLabel, VectorField,
};
use crate::trajectory::Trajectory;

/// Tolerance of the zero-row-sum and symmetry checks on susceptances.
pub const NETWORK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridModel {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    /// Power base converting per-unit generation to MW.
    pub base_mva: f64,
    pub susceptance_prefault: Vec<Vec<f64>>,
    pub susceptance_onfault: Vec<Vec<f64>>,
    /// Per-bus loads in per unit.
    pub loads: Vec<f64>,
    pub voltages: Vec<f64>,
    pub inertia: Vec<f64>,
    pub damping: Vec<f64>,
    /// `$/MW`.
    pub cost_linear: Vec<f64>,
    /// `$/MW²`.
    pub cost_quadratic: Vec<f64>,
    /// Bound on steady-state angle differences (rad).
    pub angle_limit: f64,
    /// Bound on angle differences of equilibria covered by the common
    /// certificate (rad).
    pub certificate_angle_limit: f64,
    #[serde(default)]
    pub reference_bus: usize,
}

impl GridModel {
    pub fn n_buses(&self) -> usize {
        self.loads.len()
    }

    pub fn prefault(&self) -> DMatrix<f64> {
        linalg::to_dmatrix(&self.susceptance_prefault).expect("validated")
    }

    pub fn onfault(&self) -> DMatrix<f64> {
        linalg::to_dmatrix(&self.susceptance_onfault).expect("validated")
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_buses();
        if n < 2 {
            return Err(Error::InvalidArgument(
                "a grid needs at least two buses".into(),
            ));
        }
        for v in [
            &self.voltages,
            &self.inertia,
            &self.damping,
            &self.cost_linear,
            &self.cost_quadratic,
        ] {
            check_dim(n, v.len())?;
        }
        for (name, b) in [
            ("prefault", &self.susceptance_prefault),
            ("onfault", &self.susceptance_onfault),
        ] {
            let m = linalg::to_dmatrix(b)?;
            check_dim(n, m.nrows())?;
            linalg::check_square(&m)?;
            linalg::check_symmetric(&m, NETWORK_TOL)?;
            for i in 0..n {
                let s: f64 = m.row(i).sum();
                if s.abs() > NETWORK_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "{name} susceptance row {i} sums to {s:e}"
                    )));
                }
            }
        }
        if self.voltages.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("voltages must be positive".into()));
        }
        if self
            .inertia
            .iter()
            .chain(&self.damping)
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidArgument(
                "inertia and damping must be positive".into(),
            ));
        }
        if self.cost_quadratic.iter().any(|&a| a < 0.0) {
            return Err(Error::InvalidArgument(
                "quadratic cost coefficients must be non-negative".into(),
            ));
        }
        if !(self.base_mva > 0.0) {
            return Err(Error::InvalidArgument("base_mva must be positive".into()));
        }
        if !(self.angle_limit > 0.0 && self.angle_limit < FRAC_PI_2) {
            return Err(Error::InvalidArgument(
                "angle_limit must lie in (0, π/2)".into(),
            ));
        }
        if !(self.certificate_angle_limit > 0.0 && self.certificate_angle_limit < FRAC_PI_2) {
            return Err(Error::InvalidArgument(
                "certificate_angle_limit must lie in (0, π/2)".into(),
            ));
        }
        if self.reference_bus != 0 {
            return Err(Error::InvalidArgument(
                "bus 0 must be the reference bus".into(),
            ));
        }
        if self.lines().is_empty() {
            return Err(Error::InvalidArgument("network has no lines".into()));
        }
        Ok(())
    }

    /// Lines `(i, j)`, `i < j`, with nonzero pre-fault coupling.
    pub fn lines(&self) -> Vec<(usize, usize)> {
        let n = self.n_buses();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.susceptance_prefault[i][j] != 0.0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Reduced state dimension `(δ₂ − δ₁, …, δₙ − δ₁, ω₁, …, ωₙ)`.
    pub fn state_dim(&self) -> usize {
        2 * self.n_buses() - 1
    }

    /// `v_i Σ_j v_j B_ij sin(θ_i − θ_j)` with `θ₀ = 0`.
    pub fn injections<S: Scalar>(&self, b: &[Vec<f64>], rel_angles: &[S]) -> Vec<S> {
        let n = self.n_buses();
        let angle = |i: usize| if i == 0 { S::zero() } else { rel_angles[i - 1] };
        (0..n)
            .map(|i| {
                let mut acc = S::zero();
                for j in 0..n {
                    if j != i && b[i][j] != 0.0 {
                        acc += (angle(i) - angle(j))
                            .sin()
                            .scale(self.voltages[i] * self.voltages[j] * b[i][j]);
                    }
                }
                acc
            })
            .collect()
    }

    /// Swing dynamics over the reduced state at generation `p` (p.u.).
    pub fn swing_field<S: Scalar>(&self, b: &[Vec<f64>], p: &[S], x: &[S]) -> Vec<S> {
        let n = self.n_buses();
        let omega = &x[n - 1..];
        let flows = self.injections(b, &x[..n - 1]);
        let mut out = Vec::with_capacity(2 * n - 1);
        for i in 1..n {
            out.push(omega[i] - omega[0]);
        }
        for i in 0..n {
            let acc =
                p[i] - S::from_f64(self.loads[i]) - flows[i] - omega[i].scale(self.damping[i]);
            out.push(acc.scale(1.0 / self.inertia[i]));
        }
        out
    }

    /// Row of `C` giving `δ_i − δ_j` on the reduced state.
    pub fn incidence_row(&self, i: usize, j: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.state_dim()];
        if i > 0 {
            r[i - 1] += 1.0;
        }
        if j > 0 {
            r[j - 1] -= 1.0;
        }
        r
    }

    pub fn incidence(&self) -> DMatrix<f64> {
        let lines = self.lines();
        let rows: Vec<Vec<f64>> = lines
            .iter()
            .map(|&(i, j)| self.incidence_row(i, j))
            .collect();
        linalg::to_dmatrix(&rows).expect("nonempty")
    }

    /// Polytope `|δ_i − δ_j| ≤ π/2` over all lines.
    pub fn polytope(&self) -> Result<Polytope> {
        let l = self.lines().len();
        Polytope::from_bounds(
            &self.incidence(),
            &DVector::from_element(l, -FRAC_PI_2),
            &DVector::from_element(l, FRAC_PI_2),
        )
    }

    /// `[V²B̲(1 − sin θ̄)/(π/2 − θ̄), V̄²B̄]` over the line susceptances
    /// (unnormalized channels).
    pub fn printed_sector(&self, theta_bound: f64) -> Result<SectorBound> {
        let b = self.prefault();
        let lines = self.lines();
        let b_lo = lines
            .iter()
            .map(|&(i, j)| b[(i, j)].abs())
            .fold(f64::INFINITY, f64::min);
        let b_hi = (0..self.n_buses())
            .map(|i| b[(i, i)].abs())
            .fold(0.0, f64::max);
        let v_lo = self.voltages.iter().copied().fold(f64::INFINITY, f64::min);
        let v_hi = self.voltages.iter().copied().fold(0.0, f64::max);
        SectorBound::new(
            v_lo * v_lo * b_lo * chord_slope(theta_bound.abs()),
            v_hi * v_hi * b_hi,
        )
    }

    /// Common sector of the normalized channels `sin(θ_k + s) − sin θ_k`
    /// for `|θ_k| ≤ theta_bound` and `|θ_k + s| ≤ π/2`.
    pub fn normalized_sector(&self, theta_bound: f64) -> Result<SectorBound> {
        SectorBound::new(chord_slope(theta_bound.abs()) - 1e-9, 1.0 + 1e-9)
    }
}

/// A Lur'e realization of the post-fault swing dynamics.
#[derive(Clone, Debug)]
pub struct SwingLure {
    /// Loop-transformed system with sector `[0, β − γ]`.
    pub system: LureSystem,
    /// Sector of the original channels.
    pub sector: SectorBound,
    /// Sector after the loop transformation.
    pub transformed_sector: SectorBound,
    pub polytope: Polytope,
}

/// Builds `ẋ = A(x − x°) + Bφ(C(x − x°))` at relative angles `theta` with
/// one normalized channel per line; the sector covers every equilibrium
/// with line angles within `theta_bound`.
pub fn swing_to_lure(grid: &GridModel, theta: &[f64], theta_bound: f64) -> Result<SwingLure> {
    grid.validate()?;
    let n = grid.n_buses();
    check_dim(n - 1, theta.len())?;
    let lines = grid.lines();
    let b = grid.prefault();
    let dim = grid.state_dim();
    let angle = |i: usize| if i == 0 { 0.0 } else { theta[i - 1] };
    for &(i, j) in &lines {
        let t = angle(i) - angle(j);
        if t.abs() >= FRAC_PI_2 || t.abs() > theta_bound + 1e-12 {
            return Err(Error::HypothesisViolation(format!(
                "line ({i}, {j}) angle {t} outside the certified range"
            )));
        }
    }
    let mut a0 = DMatrix::zeros(dim, dim);
    for i in 1..n {
        a0[(i - 1, n - 1 + i)] = 1.0;
        a0[(i - 1, n - 1)] = -1.0;
    }
    for i in 0..n {
        a0[(n - 1 + i, n - 1 + i)] = -grid.damping[i] / grid.inertia[i];
    }
    let mut bm = DMatrix::zeros(dim, lines.len());
    let mut phis = Vec::with_capacity(lines.len());
    for (k, &(i, j)) in lines.iter().enumerate() {
        let w = grid.voltages[i] * grid.voltages[j] * b[(i, j)];
        bm[(n - 1 + i, k)] = -w / grid.inertia[i];
        bm[(n - 1 + j, k)] = w / grid.inertia[j];
        let t = angle(i) - angle(j);
        phis.push((var(0) + cst(t)).sin() - cst(t.sin()));
    }
    let c = grid.incidence();
    let sector = grid.normalized_sector(theta_bound)?;
    let mut eq = vec![0.0; dim];
    eq[..n - 1].copy_from_slice(theta);
    let system =
        LureSystem::loop_transformed(&a0, bm, c, phis, DVector::from_vec(eq), sector.gamma)?;
    Ok(SwingLure {
        system,
        sector,
        transformed_sector: SectorBound::new(0.0, sector.beta - sector.gamma)?,
        polytope: grid.polytope()?,
    })
}

/// One quadratic certificate for every equilibrium within the
/// certificate angle limit.
pub fn common_certificate(grid: &GridModel) -> Result<(SwingLure, LmiCertificate)> {
    let lure = swing_to_lure(
        grid,
        &vec![0.0; grid.n_buses() - 1],
        grid.certificate_angle_limit,
    )?;
    let cert = solve_lmi(&lure.system, &lure.transformed_sector)?;
    Ok((lure, cert))
}

/// Temporary outage of one line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineTrip {
    pub line: (usize, usize),
    pub scenario: DisturbanceScenario,
    pub susceptance_onfault: Vec<Vec<f64>>,
}

/// Removes line `(i, j)` on `[t0, tc)`; diagonals absorb the removed
/// coupling so rows keep summing to zero.
pub fn line_trip_scenario(
    grid: &GridModel,
    line: (usize, usize),
    t0: f64,
    tc: f64,
    taylor_order: usize,
) -> Result<LineTrip> {
    let (i, j) = line;
    let n = grid.n_buses();
    if i >= n || j >= n || i == j || grid.susceptance_prefault[i][j] == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "no line between buses {i} and {j}"
        )));
    }
    let scenario = DisturbanceScenario::new(t0, tc, taylor_order)?;
    let mut b = grid.susceptance_prefault.clone();
    let bij = b[i][j];
    b[i][j] = 0.0;
    b[j][i] = 0.0;
    b[i][i] += bij;
    b[j][j] += bij;
    Ok(LineTrip {
        line,
        scenario,
        susceptance_onfault: b,
    })
}

/// Economic dispatch over `(p^G, θ₂…θₙ)`; the fault field uses the given
/// during-fault susceptances.
pub struct DispatchModel<'a> {
    pub grid: &'a GridModel,
    pub onfault: Vec<Vec<f64>>,
}

impl<'a> DispatchModel<'a> {
    pub fn new(grid: &'a GridModel, onfault: Vec<Vec<f64>>) -> Result<Self> {
        grid.validate()?;
        check_dim(grid.n_buses(), onfault.len())?;
        Ok(Self { grid, onfault })
    }

    fn line_angles<S: Scalar>(&self, x: &[S]) -> Vec<S> {
        let angle = |i: usize| if i == 0 { S::zero() } else { x[i - 1] };
        self.grid
            .lines()
            .iter()
            .map(|&(i, j)| angle(i) - angle(j))
            .collect()
    }

    fn angle_bounds<S: Scalar>(&self, x: &[S], limit: f64) -> Vec<S> {
        let mut out = Vec::new();
        for t in self.line_angles(x) {
            out.push(t - S::from_f64(limit));
            out.push(-t - S::from_f64(limit));
        }
        out
    }

    /// Objective in currency units at generation `p` (p.u.).
    pub fn generation_cost<S: Scalar>(&self, p: &[S]) -> S {
        let g = self.grid;
        let mut acc = S::zero();
        for i in 0..g.n_buses() {
            let mw = p[i].scale(g.base_mva);
            acc += mw.scale(g.cost_linear[i]) + (mw * mw).scale(g.cost_quadratic[i]);
        }
        acc
    }
}

impl EquilibriumManifold for DispatchModel<'_> {
    fn state_dim(&self) -> usize {
        self.grid.state_dim()
    }

    fn control_dim(&self) -> usize {
        self.grid.n_buses()
    }

    fn steady_state_residual<S: Scalar>(&self, x: &[S], w: &[S]) -> Vec<S> {
        let g = self.grid;
        let flows = g.injections(&g.susceptance_prefault, &x[..g.n_buses() - 1]);
        (0..g.n_buses())
            .map(|i| w[i] - S::from_f64(g.loads[i]) - flows[i])
            .collect()
    }

    fn bound_constraints<S: Scalar>(&self, x: &[S], _w: &[S]) -> Vec<S> {
        self.angle_bounds(x, self.grid.angle_limit)
    }
}

impl ScoModel for DispatchModel<'_> {
    fn param_dim(&self) -> usize {
        self.grid.n_buses() - 1
    }

    fn equilibrium<S: Scalar>(&self, _w: &[S], q: &[S]) -> Vec<S> {
        let mut x = q.to_vec();
        x.extend(std::iter::repeat(S::zero()).take(self.grid.n_buses()));
        x
    }

    fn cost<S: Scalar>(&self, w: &[S], _x: &[S]) -> S {
        self.generation_cost(w)
    }

    fn fault_field<S: Scalar>(&self, w: &[S], x: &[S]) -> Vec<S> {
        self.grid.swing_field(&self.onfault, w, x)
    }

    fn certificate_domain<S: Scalar>(&self, _w: &[S], x: &[S]) -> Vec<S> {
        self.angle_bounds(x, self.grid.certificate_angle_limit)
    }

    fn initial_guess(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.grid.n_buses();
        let total: f64 = self.grid.loads.iter().sum();
        (vec![total / n as f64; n], vec![0.0; n - 1])
    }

    fn cost_scale(&self) -> f64 {
        let (w, _) = self.initial_guess();
        self.generation_cost(&w).abs().max(1.0)
    }
}

/// Simulation model of a grid under a line trip.
#[derive(Clone, Debug)]
pub struct SwingSystem {
    pub grid: GridModel,
    pub generation: Vec<f64>,
    pub onfault: Vec<Vec<f64>>,
}

impl VectorField for SwingSystem {
    fn dim(&self) -> usize {
        self.grid.state_dim()
    }

    fn eval<S: Scalar>(&self, x: &[S], mode: FieldMode) -> Vec<S> {
        let p: Vec<S> = self.generation.iter().map(|&v| S::from_f64(v)).collect();
        let b = match mode {
            FieldMode::Nominal => &self.grid.susceptance_prefault,
            FieldMode::Fault => &self.onfault,
        };
        self.grid.swing_field(b, &p, x)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub generation_pu: Vec<f64>,
    pub generation_mw: Vec<f64>,
    /// Bus angles relative to the reference bus, in degrees.
    pub angles_deg: Vec<f64>,
    pub objective: f64,
    pub stability_label: StabilityLabel,
    /// Largest power-balance mismatch (p.u.).
    pub balance_residual: f64,
}

impl DispatchSolution {
    fn from_point(model: &DispatchModel<'_>, p: &[f64], theta: &[f64]) -> Self {
        let g = model.grid;
        let x = model.equilibrium(p, theta);
        let balance_residual = model
            .steady_state_residual(&x, p)
            .iter()
            .fold(0.0f64, |m, r| m.max(r.abs()));
        let mut angles_deg = vec![0.0];
        angles_deg.extend(theta.iter().map(|t| t.to_degrees()));
        Self {
            generation_pu: p.to_vec(),
            generation_mw: p.iter().map(|v| v * g.base_mva).collect(),
            angles_deg,
            objective: model.generation_cost(p),
            stability_label: StabilityLabel::Uncertified,
            balance_residual,
        }
    }

    /// Relative angles in radians (reference bus dropped).
    pub fn relative_angles(&self) -> Vec<f64> {
        self.angles_deg[1..]
            .iter()
            .map(|d| d.to_radians())
            .collect()
    }

    /// Reduced equilibrium state.
    pub fn equilibrium(&self) -> Vec<f64> {
        let mut x = self.relative_angles();
        x.extend(std::iter::repeat(0.0).take(self.generation_pu.len()));
        x
    }
}

/// Cost-minimal dispatch without stability constraints.
pub fn solve_opf(grid: &GridModel, config: &NlpConfig) -> Result<DispatchSolution> {
    let model = DispatchModel::new(grid, grid.susceptance_onfault.clone())?;
    let sol = solve_stability_free(&model, config)?;
    if sol.nlp.status != crate::nlp::NlpStatus::Optimal {
        return Err(Error::NoConvergence {
            iterations: sol.nlp.evaluations,
            residual: sol.nlp.max_violation.max(sol.nlp.kkt_residual),
        });
    }
    Ok(DispatchSolution::from_point(&model, &sol.w, &sol.q))
}

/// Simulates the trip from a dispatch and labels the outcome.
pub fn simulate_dispatch(
    grid: &GridModel,
    trip: &LineTrip,
    dispatch: &DispatchSolution,
    config: &SimConfig,
) -> Result<(Trajectory, StabilityLabel)> {
    let sys = SwingSystem {
        grid: grid.clone(),
        generation: dispatch.generation_pu.clone(),
        onfault: trip.susceptance_onfault.clone(),
    };
    let x0 = dispatch.equilibrium();
    let traj = integrate(&sys, &x0, Some(&trip.scenario), config)?;
    let label = classify_stability(&traj, &x0, config);
    Ok((traj, label))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TscopfResult {
    pub dispatch: DispatchSolution,
    pub sco: ScoSolution,
    pub p_matrix: Vec<Vec<f64>>,
}

/// Dispatch with the fault-cleared state inside the certified sublevel
/// set; the label comes from simulating the trip.
pub fn solve_tscopf(
    grid: &GridModel,
    trip: &LineTrip,
    nlp: &NlpConfig,
    sim: &SimConfig,
) -> Result<TscopfResult> {
    let model = DispatchModel::new(grid, trip.susceptance_onfault.clone())?;
    let (lure, cert) = common_certificate(grid)?;
    let problem = ScoProblem {
        model: &model,
        certificate: StabilityCertificate::ClosedForm {
            p: cert.p(),
            polytope: lure.polytope,
            form: FacetForm::Concave,
        },
        scenario: trip.scenario,
        epsilon: crate::sco::default_epsilon(&model),
    };
    let sco = solve_sco(&problem, nlp)?;
    let mut dispatch = DispatchSolution::from_point(&model, &sco.w, &sco.q);
    dispatch.stability_label = match sco.status() {
        crate::nlp::NlpStatus::Optimal => simulate_dispatch(grid, trip, &dispatch, sim)?.1,
        _ => StabilityLabel::Uncertified,
    };
    Ok(TscopfResult {
        dispatch,
        sco,
        p_matrix: cert.p_matrix,
    })
}
