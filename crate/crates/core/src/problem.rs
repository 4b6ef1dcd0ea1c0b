//! Problem and solution files shared by the command-line tool and the
//! Python bindings.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lure::{estimate_sector, solve_lmi, LureSystem, SectorBound};
use crate::nlp::{NlpConfig, NlpStatus};
use crate::pendulum::{Pendulum, PulsedPendulum};
use crate::poly::Polynomial;
use crate::polytope::Polytope;
use crate::power::{
    common_certificate, line_trip_scenario, simulate_dispatch, solve_opf, solve_tscopf,
    DispatchSolution, GridModel, SwingSystem,
};
use crate::quadratic::{LyapunovFunction, QuadraticCertificate};
use crate::scenario::DisturbanceScenario;
use crate::sco::{solve_sco, FacetForm, ScoProblem, StabilityCertificate};
use crate::sim::{
    certificate_soundness_trial, classify_stability, integrate, SimConfig, SoundnessCase,
    SoundnessReport, StabilityLabel,
};
use crate::sos::{find_sos_convex_cllf, recast, PolynomialSystem, QuasiPolynomialSystem};
use crate::trajectory::Trajectory;
use crate::vmin::v_min;

/// Samples per channel when a Lur'e sector is estimated.
const SECTOR_SAMPLES: usize = 2000;
/// Boundary rays used for sampled boundary minima.
const BOUNDARY_RAYS: usize = 20_000;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemFile {
    Lure(LureProblem),
    QuasiPolynomial(QuasiPolynomialProblem),
    Polynomial(PolynomialProblem),
    Grid(GridProblem),
    Pendulum(PendulumProblem),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LureProblem {
    pub system: LureSystem,
    pub polytope: Polytope,
    /// Estimated from the channel ranges when absent.
    #[serde(default)]
    pub sector: Option<SectorBound>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuasiPolynomialProblem {
    pub system: QuasiPolynomialSystem,
    pub equilibrium: Vec<f64>,
    /// Region in the original coordinates.
    pub region: Polytope,
    #[serde(default = "default_degree")]
    pub degree: u32,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialProblem {
    pub system: PolynomialSystem,
    /// Equalities `r(x) = 0` holding along trajectories.
    #[serde(default)]
    pub constraints: Vec<Polynomial>,
    pub equilibrium: Vec<f64>,
    pub region: Polytope,
    #[serde(default = "default_degree")]
    pub degree: u32,
}

fn default_degree() -> u32 {
    2
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineOutage {
    pub line: (usize, usize),
    pub t0: f64,
    pub tc: f64,
    #[serde(default = "default_order")]
    pub taylor_order: usize,
}

fn default_order() -> usize {
    2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridProblem {
    pub grid: GridModel,
    pub disturbance: LineOutage,
    #[serde(default)]
    pub nlp: Option<NlpConfig>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumProblem {
    #[serde(default)]
    pub pendulum: Pendulum,
    pub scenario: DisturbanceScenario,
    /// Torque whose equilibrium `certify` reports.
    #[serde(default)]
    pub torque: f64,
    #[serde(default)]
    pub nlp: Option<NlpConfig>,
    #[serde(default)]
    pub sim: Option<SimConfig>,
}

/// Command-line style overrides applied on top of a problem file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub kkt_tol: Option<f64>,
    pub taylor_order: Option<usize>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let p: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Lure(_) => "lure",
            Self::QuasiPolynomial(_) => "quasi_polynomial",
            Self::Polynomial(_) => "polynomial",
            Self::Grid(_) => "grid",
            Self::Pendulum(_) => "pendulum",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Lure(p) => {
                crate::error::check_dim(p.system.dim(), p.polytope.dim())?;
                Ok(())
            }
            Self::QuasiPolynomial(p) => {
                p.system.clone().validate()?;
                crate::error::check_dim(p.system.state_dim, p.equilibrium.len())?;
                crate::error::check_dim(p.system.state_dim, p.region.dim())
            }
            Self::Polynomial(p) => {
                let sys = PolynomialSystem::new(p.system.rhs.clone())?;
                crate::error::check_dim(sys.nvars, p.system.nvars)?;
                crate::error::check_dim(p.system.nvars, p.equilibrium.len())?;
                crate::error::check_dim(p.system.nvars, p.region.dim())
            }
            Self::Grid(p) => {
                p.grid.validate()?;
                line_trip_scenario(
                    &p.grid,
                    p.disturbance.line,
                    p.disturbance.t0,
                    p.disturbance.tc,
                    p.disturbance.taylor_order,
                )?;
                p.sim.unwrap_or_default().validate()
            }
            Self::Pendulum(p) => {
                p.pendulum.validate()?;
                p.scenario.validate()?;
                p.sim.unwrap_or_default().validate()
            }
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        let (nlp, sim) = match self {
            Self::Grid(p) => {
                if let Some(k) = o.taylor_order {
                    p.disturbance.taylor_order = k;
                }
                (&mut p.nlp, &mut p.sim)
            }
            Self::Pendulum(p) => {
                if let Some(k) = o.taylor_order {
                    p.scenario.taylor_order = k;
                }
                (&mut p.nlp, &mut p.sim)
            }
            _ => return,
        };
        let n = nlp.get_or_insert_with(NlpConfig::default);
        if let Some(t) = o.kkt_tol {
            n.kkt_tol = t;
        }
        if let Some(s) = o.seed {
            n.seed = s;
        }
        let s = sim.get_or_insert_with(SimConfig::default);
        if let Some(h) = o.horizon {
            s.horizon = h;
            s.settle_window = s.settle_window.min(h);
        }
    }

    fn nlp(&self) -> NlpConfig {
        match self {
            Self::Grid(p) => p.nlp.clone(),
            Self::Pendulum(p) => p.nlp.clone(),
            _ => None,
        }
        .unwrap_or_default()
    }

    fn sim(&self) -> SimConfig {
        match self {
            Self::Grid(p) => p.sim,
            Self::Pendulum(p) => p.sim,
            _ => None,
        }
        .unwrap_or_default()
    }
}

/// Summary of a certificate construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyReport {
    pub kind: String,
    pub equilibrium: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_matrix: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sector: Option<SectorBound>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<Polynomial>,
    /// Certificate margin (LMI or smallest Gram eigenvalue).
    pub margin: f64,
    pub v_min: f64,
    /// How `v_min` was obtained.
    pub v_min_method: String,
}

fn quadratic_report(
    kind: &str,
    cert: &crate::lure::LmiCertificate,
    sector: SectorBound,
    equilibrium: &[f64],
    poly: &Polytope,
) -> Result<CertifyReport> {
    let q = cert.certificate(equilibrium)?;
    let vm = v_min(&q, poly, equilibrium)?;
    Ok(CertifyReport {
        kind: kind.into(),
        equilibrium: equilibrium.to_vec(),
        p_matrix: Some(cert.p_matrix.clone()),
        sector: Some(sector),
        tau: Some(cert.tau),
        lyapunov: None,
        margin: cert.margin,
        v_min: vm.v_min,
        v_min_method: "facet_kkt".into(),
    })
}

/// Smallest `f` over boundary points hit by seeded rays from `x0`.
pub fn sampled_boundary_min<F: Fn(&[f64]) -> f64>(
    f: F,
    poly: &Polytope,
    x0: &[f64],
    rays: usize,
    seed: u64,
) -> Result<f64> {
    let n = poly.dim();
    crate::error::check_dim(n, x0.len())?;
    let x = DVector::from_column_slice(x0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..rays {
        let d = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let mut t = f64::INFINITY;
        for i in 0..poly.n_facets() {
            let c = poly.normal(i);
            let cd = c.dot(&d);
            if cd > 0.0 {
                t = t.min((poly.offset(i) - c.dot(&x)) / cd);
            }
        }
        if t.is_finite() {
            let p = &x + &d * t;
            best = best.min(f(p.as_slice()));
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::PolytopeError("no boundary point reached".into()))
    }
}

/// Builds the stability certificate of a problem.
pub fn certify(problem: &ProblemFile) -> Result<CertifyReport> {
    match problem {
        ProblemFile::Lure(p) => {
            let sector = match p.sector {
                Some(s) => s,
                None => estimate_sector(&p.system, &p.polytope, SECTOR_SAMPLES)?,
            };
            let cert = solve_lmi(&p.system, &sector)?;
            let eq: Vec<f64> = p.system.equilibrium().iter().copied().collect();
            quadratic_report("lure", &cert, sector, &eq, &p.polytope)
        }
        ProblemFile::Pendulum(p) => {
            let (_, sector) = p.pendulum.common_lure()?;
            let cert = p.pendulum.certificate()?;
            let eq = p.pendulum.equilibrium(p.torque)?;
            if eq[0].abs() > p.pendulum.domain {
                return Err(Error::HypothesisViolation(format!(
                    "torque {} puts the equilibrium outside the certified domain",
                    p.torque
                )));
            }
            quadratic_report("pendulum", &cert, sector, &eq, &p.pendulum.polytope())
        }
        ProblemFile::Grid(p) => {
            let (lure, cert) = common_certificate(&p.grid)?;
            let opf = solve_opf(&p.grid, &problem.nlp())?;
            quadratic_report(
                "grid",
                &cert,
                lure.transformed_sector,
                &opf.equilibrium(),
                &lure.polytope,
            )
        }
        ProblemFile::Polynomial(p) => {
            let c = find_sos_convex_cllf(
                &p.system,
                &p.constraints,
                p.degree,
                &p.equilibrium,
                &p.region,
            )?;
            let vm = v_min(&c, &p.region, &p.equilibrium)?;
            Ok(CertifyReport {
                kind: "polynomial".into(),
                equilibrium: p.equilibrium.clone(),
                p_matrix: None,
                sector: None,
                tau: None,
                lyapunov: Some(c.v_poly.clone()),
                margin: c.margin,
                v_min: vm.v_min,
                v_min_method: "facet_kkt".into(),
            })
        }
        ProblemFile::QuasiPolynomial(p) => {
            let r = recast(&p.system)?;
            let eq = r.lift(&p.equilibrium);
            let c = find_sos_convex_cllf(&r.system, &r.constraints, p.degree, &eq, &p.region)?;
            let vm = sampled_boundary_min(
                |x| c.value(&r.lift(x)),
                &p.region,
                &p.equilibrium,
                BOUNDARY_RAYS,
                0,
            )?;
            Ok(CertifyReport {
                kind: "quasi_polynomial".into(),
                equilibrium: eq,
                p_matrix: None,
                sector: None,
                tau: None,
                lyapunov: Some(c.v_poly.clone()),
                margin: c.margin,
                v_min: vm,
                v_min_method: "sampled_boundary".into(),
            })
        }
    }
}

/// Result of `solve-sco`, accepted unchanged by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub kind: String,
    pub decision: Vec<f64>,
    pub parameters: Vec<f64>,
    pub equilibrium: Vec<f64>,
    pub objective: f64,
    pub v_min: f64,
    pub v_cleared: f64,
    pub tightness_gap: f64,
    pub status: NlpStatus,
    pub stability_label: StabilityLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dispatch: Option<DispatchSolution>,
}

/// Solves the stability-constrained problem of a pendulum or grid file.
pub fn solve(problem: &ProblemFile) -> Result<SolutionFile> {
    let nlp = problem.nlp();
    let sim = problem.sim();
    match problem {
        ProblemFile::Pendulum(p) => {
            let cert = p.pendulum.certificate()?;
            let sp = ScoProblem {
                model: &p.pendulum,
                certificate: StabilityCertificate::ClosedForm {
                    p: cert.p(),
                    polytope: p.pendulum.polytope(),
                    form: FacetForm::Concave,
                },
                scenario: p.scenario,
                epsilon: crate::sco::default_epsilon(&p.pendulum),
            };
            let s = solve_sco(&sp, &nlp)?;
            let stability_label = if s.status() == NlpStatus::Optimal {
                pendulum_label(&p.pendulum, &p.scenario, s.w[0], &s.equilibrium, &sim)?.1
            } else {
                StabilityLabel::Uncertified
            };
            Ok(SolutionFile {
                kind: "pendulum".into(),
                decision: s.w.clone(),
                parameters: s.q.clone(),
                equilibrium: s.equilibrium.clone(),
                objective: s.cost,
                v_min: s.v_min,
                v_cleared: s.v_cleared,
                tightness_gap: s.tightness_gap,
                status: s.status(),
                stability_label,
                dispatch: None,
            })
        }
        ProblemFile::Grid(p) => {
            let trip = grid_trip(p)?;
            let r = solve_tscopf(&p.grid, &trip, &nlp, &sim)?;
            Ok(SolutionFile {
                kind: "grid".into(),
                decision: r.sco.w.clone(),
                parameters: r.sco.q.clone(),
                equilibrium: r.sco.equilibrium.clone(),
                objective: r.sco.cost,
                v_min: r.sco.v_min,
                v_cleared: r.sco.v_cleared,
                tightness_gap: r.sco.tightness_gap,
                status: r.sco.status(),
                stability_label: r.dispatch.stability_label,
                dispatch: Some(r.dispatch),
            })
        }
        _ => Err(Error::InvalidArgument(format!(
            "solve-sco needs a pendulum or grid problem, got {}",
            problem.kind()
        ))),
    }
}

fn grid_trip(p: &GridProblem) -> Result<crate::power::LineTrip> {
    let d = &p.disturbance;
    line_trip_scenario(&p.grid, d.line, d.t0, d.tc, d.taylor_order)
}

fn pendulum_label(
    model: &Pendulum,
    scenario: &DisturbanceScenario,
    torque: f64,
    equilibrium: &[f64],
    sim: &SimConfig,
) -> Result<(Trajectory, StabilityLabel)> {
    let traj = integrate(&model.with_torque(torque), equilibrium, Some(scenario), sim)?;
    let label = classify_stability(&traj, equilibrium, sim);
    Ok((traj, label))
}

/// Simulates the disturbance from a solution produced by [`solve`].
pub fn simulate(
    problem: &ProblemFile,
    solution: &SolutionFile,
) -> Result<(Trajectory, StabilityLabel)> {
    if solution.kind != problem.kind() {
        return Err(Error::InvalidArgument(format!(
            "solution of kind {} does not match a {} problem",
            solution.kind,
            problem.kind()
        )));
    }
    let sim = problem.sim();
    match problem {
        ProblemFile::Pendulum(p) => {
            let torque = *solution
                .decision
                .first()
                .ok_or_else(|| Error::InvalidArgument("solution has no torque".into()))?;
            crate::error::check_dim(2, solution.equilibrium.len())?;
            pendulum_label(
                &p.pendulum,
                &p.scenario,
                torque,
                &solution.equilibrium,
                &sim,
            )
        }
        ProblemFile::Grid(p) => {
            let dispatch = solution
                .dispatch
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("grid solution has no dispatch".into()))?;
            crate::error::check_dim(p.grid.n_buses(), dispatch.generation_pu.len())?;
            simulate_dispatch(&p.grid, &grid_trip(p)?, dispatch, &sim)
        }
        _ => Err(Error::InvalidArgument(format!(
            "simulate needs a pendulum or grid problem, got {}",
            problem.kind()
        ))),
    }
}

/// Randomized soundness sweep of the common certificate.
pub fn verify(problem: &ProblemFile, cases: usize, seed: u64) -> Result<SoundnessReport> {
    let sim = problem.sim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match problem {
        ProblemFile::Pendulum(p) => {
            let base = p.pendulum;
            let cert = base.certificate()?;
            let w_max = base.gravity * base.domain.sin();
            let mut list = Vec::with_capacity(cases);
            for _ in 0..cases {
                let torque = rng.gen_range(-w_max..=w_max);
                let pulse = rng.gen_range(-2.0 * base.gravity..=2.0 * base.gravity);
                let tc = p.scenario.t0 + rng.gen_range(0.02..=0.3);
                let model = Pendulum { pulse, ..base };
                let eq = model.equilibrium(torque)?;
                list.push(SoundnessCase {
                    field: PulsedPendulum { model, torque },
                    certificate: QuadraticCertificate::new(
                        cert.p(),
                        DVector::from_column_slice(&eq),
                    )?,
                    equilibrium: eq,
                    scenario: p.scenario.with_clearing_time(tc)?,
                });
            }
            certificate_soundness_trial(&list, &base.polytope(), &sim)
        }
        ProblemFile::Grid(p) => {
            let (lure, cert) = common_certificate(&p.grid)?;
            let nlp = problem.nlp();
            let base_trip = grid_trip(p)?;
            let opf = solve_opf(&p.grid, &nlp)?;
            let mut dispatches = vec![opf];
            if let Ok(r) = solve_tscopf(&p.grid, &base_trip, &nlp, &sim) {
                if r.sco.status() == NlpStatus::Optimal {
                    dispatches.push(r.dispatch);
                }
            }
            let lines = p.grid.lines();
            let mut list = Vec::with_capacity(cases);
            for _ in 0..cases {
                let d = &dispatches[rng.gen_range(0..dispatches.len())];
                let line = lines[rng.gen_range(0..lines.len())];
                let tc = p.disturbance.t0 + rng.gen_range(0.02..=0.14);
                let trip = line_trip_scenario(
                    &p.grid,
                    line,
                    p.disturbance.t0,
                    tc,
                    p.disturbance.taylor_order,
                )?;
                let eq = d.equilibrium();
                list.push(SoundnessCase {
                    field: SwingSystem {
                        grid: p.grid.clone(),
                        generation: d.generation_pu.clone(),
                        onfault: trip.susceptance_onfault,
                    },
                    certificate: QuadraticCertificate::new(
                        cert.p(),
                        DVector::from_column_slice(&eq),
                    )?,
                    equilibrium: eq,
                    scenario: trip.scenario,
                });
            }
            certificate_soundness_trial(&list, &lure.polytope, &sim)
        }
        _ => Err(Error::InvalidArgument(format!(
            "verify needs a pendulum or grid problem, got {}",
            problem.kind()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM: &str = r#"{
        "kind": "pendulum",
        "pendulum": {"gravity": 10.0, "damping": 1.0, "pulse": -14.0, "domain": 0.3},
        "scenario": {"t0": 0.0, "tc": 0.1, "taylor_order": 2}
    }"#;

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ProblemFile::from_json(PENDULUM).is_ok());
        let bad = PENDULUM
            .replace("\"torque_x\"", "")
            .replace("\"domain\": 0.3", "\"domain\": 0.3, \"mass\": 1");
        assert!(ProblemFile::from_json(&bad).is_err());
        let bad = PENDULUM.replace(
            "\"kind\": \"pendulum\",",
            "\"kind\": \"pendulum\", \"extra\": 1,",
        );
        assert!(ProblemFile::from_json(&bad).is_err());
        let bad = PENDULUM.replace("pendulum\",", "oscillator\",");
        assert!(ProblemFile::from_json(&bad).is_err());
    }

    #[test]
    fn pendulum_certificate_has_positive_vmin() {
        let p = ProblemFile::from_json(PENDULUM).unwrap();
        let r = certify(&p).unwrap();
        assert!(r.v_min > 0.0);
        assert_eq!(r.p_matrix.as_ref().unwrap().len(), 2);
    }

    #[test]
    fn boundary_rays_of_a_box() {
        let poly = Polytope::from_box(&[-1.0, -2.0], &[1.0, 2.0]).unwrap();
        let m = sampled_boundary_min(|x| x[0] * x[0] + x[1] * x[1], &poly, &[0.0, 0.0], 5000, 1)
            .unwrap();
        assert!((m - 1.0).abs() < 1e-3);
    }
}
