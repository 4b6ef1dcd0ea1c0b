use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lyasco::nlp::NlpConfig;
use lyasco::pendulum::Pendulum;
use lyasco::power::{
    line_trip_scenario, simulate_dispatch, solve_opf, solve_tscopf, DispatchSolution,
};
use lyasco::problem::{self, Overrides, ProblemFile, SolutionFile};
use lyasco::sco::solve_stability_free;
use lyasco::sim::{classify_stability, integrate, SimConfig, StabilityLabel};
use lyasco::trajectory::fmt_sig;
use serde::Serialize;
use serde_json::Value;

const THREE_BUS: &str = include_str!("../../../data/threebus.json");
const PENDULUM: &str = include_str!("../../../data/pendulum.json");

#[derive(Parser, Debug)]
#[command(
    name = "lyasco",
    version,
    about = "Stability-constrained optimization with Lyapunov certificates"
)]
struct Cli {
    /// KKT tolerance of the nonlinear solver.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Order of the fault-cleared state expansion.
    #[arg(long, global = true)]
    taylor_order: Option<usize>,
    /// Seed for multistart and randomized sweeps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Simulation horizon in seconds.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Directory for output files; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a Lyapunov certificate and report its boundary minimum.
    Certify { file: PathBuf },
    /// Solve the stability-constrained problem and emit the solution JSON.
    SolveSco { file: PathBuf },
    /// Simulate the disturbance from a solution and emit the trajectory CSV.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        from: PathBuf,
        /// Keep every n-th step in the CSV.
        #[arg(long, default_value_t = 10)]
        stride: usize,
    },
    /// Run a bundled case end to end.
    Demo { case: DemoCase },
    /// Randomized soundness sweep of the certificate.
    Verify {
        file: PathBuf,
        #[arg(long, default_value_t = 100)]
        cases: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DemoCase {
    ThreeBus,
    Pendulum,
}

enum Failure {
    Input(String),
    Infeasible(String),
}

impl From<lyasco::Error> for Failure {
    fn from(e: lyasco::Error) -> Self {
        if e.is_infeasibility() {
            Failure::Infeasible(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(t) = std::env::var("LYASCO_THREADS") {
        match t.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("error: LYASCO_THREADS must be a positive integer");
                return ExitCode::from(1);
            }
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Infeasible(m)) => {
            eprintln!("infeasible: {m}");
            ExitCode::from(2)
        }
    }
}

fn overrides(cli: &Cli) -> Overrides {
    Overrides {
        kkt_tol: cli.tol,
        taylor_order: cli.taylor_order,
        seed: cli.seed,
        horizon: cli.horizon,
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    }
    match &cli.command {
        Command::Certify { file } => {
            let p = load_problem(file, cli)?;
            let report = problem::certify(&p)?;
            emit_json(cli, "certificate.json", &report)?;
            if cli.out.is_some() {
                println!("v_min {}", fmt_sig(report.v_min));
            }
            Ok(())
        }
        Command::SolveSco { file } => {
            let p = load_problem(file, cli)?;
            let sol = problem::solve(&p)?;
            emit_json(cli, "solution.json", &sol)?;
            if cli.out.is_some() {
                println!(
                    "status {:?} objective {} label {:?}",
                    sol.status,
                    fmt_sig(sol.objective),
                    sol.stability_label
                );
            }
            if sol.status == lyasco::nlp::NlpStatus::Infeasible {
                return Err(Failure::Infeasible("no feasible point found".into()));
            }
            Ok(())
        }
        Command::Simulate { file, from, stride } => {
            let p = load_problem(file, cli)?;
            let text = read(from)?;
            let sol: SolutionFile = parse_json(&text, from)?;
            let (traj, label) = problem::simulate(&p, &sol)?;
            let csv = traj.to_csv((*stride).max(1));
            match &cli.out {
                Some(dir) => {
                    write(&dir.join("trajectory.csv"), &csv)?;
                    println!("label {label:?}");
                }
                None => {
                    print!("{csv}");
                    eprintln!("label {label:?}");
                }
            }
            Ok(())
        }
        Command::Verify { file, cases } => {
            let p = load_problem(file, cli)?;
            let report = problem::verify(&p, *cases, cli.seed.unwrap_or(42))?;
            let summary = format!(
                "cases {} fired {} not_certified {} counterexamples {} max_lyapunov_increase {}",
                report.cases,
                report.fired,
                report.not_certified,
                report.counterexamples.len(),
                fmt_sig(report.max_lyapunov_increase)
            );
            if cli.out.is_some() {
                emit_json(cli, "report.json", &report)?;
                println!("{summary}");
            } else {
                println!("{summary}");
                for c in &report.counterexamples {
                    println!("counterexample {}: {}", c.case, c.reason);
                }
            }
            if report.counterexamples.is_empty() {
                Ok(())
            } else {
                Err(Failure::Infeasible(format!(
                    "{} counterexamples",
                    report.counterexamples.len()
                )))
            }
        }
        Command::Demo { case } => match case {
            DemoCase::ThreeBus => demo_three_bus(cli),
            DemoCase::Pendulum => demo_pendulum(cli),
        },
    }
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => {
                let _ = write!(out, "/{index}");
            }
            Segment::Map { key } => {
                let _ = write!(out, "/{}", key.replace('~', "~0").replace('/', "~1"));
            }
            Segment::Enum { variant } => {
                let _ = write!(out, "/{variant}");
            }
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, source: &Path) -> CliResult<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        if e.inner().is_syntax() || e.inner().is_eof() {
            Failure::Input(format!("{}: {}", source.display(), e.inner()))
        } else {
            Failure::Input(format!(
                "{}: at {}: {}",
                source.display(),
                json_pointer(e.path()),
                e.inner()
            ))
        }
    })
}

fn parse_value<T: serde::de::DeserializeOwned>(v: Value, source: &Path) -> CliResult<T> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        Failure::Input(format!(
            "{}: at {}: {}",
            source.display(),
            json_pointer(e.path()),
            e.inner()
        ))
    })
}

/// Reads `kind` first so schema errors keep their path.
fn parse_problem(text: &str, source: &Path, cli: &Cli) -> CliResult<ProblemFile> {
    let mut v: Value = parse_json(text, source)?;
    let Some(obj) = v.as_object_mut() else {
        return Err(Failure::Input(format!(
            "{}: at /: expected an object",
            source.display()
        )));
    };
    let kind = match obj.remove("kind") {
        Some(Value::String(k)) => k,
        Some(_) => {
            return Err(Failure::Input(format!(
                "{}: at /kind: expected a string",
                source.display()
            )))
        }
        None => {
            return Err(Failure::Input(format!(
                "{}: at /kind: missing field",
                source.display()
            )))
        }
    };
    let mut p = match kind.as_str() {
        "lure" => ProblemFile::Lure(parse_value(v, source)?),
        "quasi_polynomial" => ProblemFile::QuasiPolynomial(parse_value(v, source)?),
        "polynomial" => ProblemFile::Polynomial(parse_value(v, source)?),
        "grid" => ProblemFile::Grid(parse_value(v, source)?),
        "pendulum" => ProblemFile::Pendulum(parse_value(v, source)?),
        other => {
            return Err(Failure::Input(format!(
                "{}: at /kind: unknown kind `{other}`, expected one of lure, quasi_polynomial, polynomial, grid, pendulum",
                source.display()
            )))
        }
    };
    p.apply(&overrides(cli));
    p.validate()
        .map_err(|e| Failure::Input(format!("{}: {e}", source.display())))?;
    Ok(p)
}

fn load_problem(path: &Path, cli: &Cli) -> CliResult<ProblemFile> {
    let text = read(path)?;
    parse_problem(&text, path, cli)
}

/// Rounds every number to 12 significant digits.
fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) => match (n.is_f64(), n.as_f64()) {
            (true, Some(f)) => {
                let r: f64 = fmt_sig(f).parse().unwrap_or(f);
                serde_json::Number::from_f64(r)
                    .map(Value::Number)
                    .unwrap_or(Value::Null)
            }
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => {
            Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect())
        }
        other => other,
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let v = serde_json::to_value(value).map_err(|e| Failure::Input(e.to_string()))?;
    let mut s =
        serde_json::to_string_pretty(&round_value(v)).map_err(|e| Failure::Input(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn emit_json<T: Serialize>(cli: &Cli, name: &str, value: &T) -> CliResult<()> {
    let s = to_json(value)?;
    match &cli.out {
        Some(dir) => write(&dir.join(name), &s),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}

fn row(label: &str, a: &str, b: &str) -> String {
    format!("{label:<22}{a:>18}{b:>18}\n")
}

fn demo_three_bus(cli: &Cli) -> CliResult<()> {
    let p = parse_problem(THREE_BUS, Path::new("data/threebus.json"), cli)?;
    let ProblemFile::Grid(gp) = &p else {
        return Err(Failure::Input(
            "bundled three-bus case is not a grid problem".into(),
        ));
    };
    let nlp = gp.nlp.clone().unwrap_or_default();
    let sim = gp.sim.unwrap_or_default();
    let d = gp.disturbance;
    let trip = line_trip_scenario(&gp.grid, d.line, d.t0, d.tc, d.taylor_order)?;
    let mut opf = solve_opf(&gp.grid, &nlp)?;
    let (opf_traj, opf_label) = simulate_dispatch(&gp.grid, &trip, &opf, &sim)?;
    opf.stability_label = opf_label;
    let ts = solve_tscopf(&gp.grid, &trip, &nlp, &sim)?;
    let tsd = &ts.dispatch;
    let mut table = format!(
        "line {}-{} outage on [{}, {}) s\n",
        d.line.0 + 1,
        d.line.1 + 1,
        fmt_sig(d.t0),
        fmt_sig(d.tc)
    );
    table += &row("", "OPF", "TSCOPF");
    for i in 0..opf.generation_mw.len() {
        table += &row(
            &format!("p_G{} (MW)", i + 1),
            &fmt_sig(opf.generation_mw[i]),
            &fmt_sig(tsd.generation_mw[i]),
        );
    }
    for i in 0..opf.angles_deg.len() {
        table += &row(
            &format!("theta_{} (deg)", i + 1),
            &fmt_sig(opf.angles_deg[i]),
            &fmt_sig(tsd.angles_deg[i]),
        );
    }
    table += &row("cost", &fmt_sig(opf.objective), &fmt_sig(tsd.objective));
    table += &row(
        "stability",
        &format!("{:?}", opf.stability_label),
        &format!("{:?}", tsd.stability_label),
    );
    let gap = (tsd.objective - opf.objective) / opf.objective;
    table += &format!("relative cost gap {}\n", fmt_sig(gap));
    table += &format!(
        "V^min {} V(x^c) {} status {:?}\n",
        fmt_sig(ts.sco.v_min),
        fmt_sig(ts.sco.v_cleared),
        ts.sco.status()
    );
    print!("{table}");
    if let Some(dir) = &cli.out {
        #[derive(Serialize)]
        struct Demo<'a> {
            opf: &'a DispatchSolution,
            tscopf: &'a DispatchSolution,
            v_min: f64,
            v_cleared: f64,
        }
        let demo = Demo {
            opf: &opf,
            tscopf: tsd,
            v_min: ts.sco.v_min,
            v_cleared: ts.sco.v_cleared,
        };
        write(&dir.join("three_bus.json"), &to_json(&demo)?)?;
        write(&dir.join("opf_trajectory.csv"), &opf_traj.to_csv(10))?;
        let (ts_traj, _) = simulate_dispatch(&gp.grid, &trip, tsd, &sim)?;
        write(&dir.join("tscopf_trajectory.csv"), &ts_traj.to_csv(10))?;
    }
    Ok(())
}

fn pendulum_run(
    model: &Pendulum,
    scenario: &lyasco::scenario::DisturbanceScenario,
    w: f64,
    eq: &[f64],
    sim: &SimConfig,
) -> CliResult<(lyasco::Trajectory, StabilityLabel)> {
    let traj = integrate(&model.with_torque(w), eq, Some(scenario), sim)?;
    let label = classify_stability(&traj, eq, sim);
    Ok((traj, label))
}

fn demo_pendulum(cli: &Cli) -> CliResult<()> {
    let p = parse_problem(PENDULUM, Path::new("data/pendulum.json"), cli)?;
    let ProblemFile::Pendulum(pp) = &p else {
        return Err(Failure::Input(
            "bundled pendulum case is not a pendulum problem".into(),
        ));
    };
    let nlp: NlpConfig = pp.nlp.clone().unwrap_or_default();
    let sim = pp.sim.unwrap_or_default();
    let free = solve_stability_free(&pp.pendulum, &nlp)?;
    let (free_traj, free_label) = pendulum_run(
        &pp.pendulum,
        &pp.scenario,
        free.w[0],
        &free.equilibrium,
        &sim,
    )?;
    let sol = problem::solve(&p)?;
    let (sco_traj, _) = pendulum_run(
        &pp.pendulum,
        &pp.scenario,
        sol.decision[0],
        &sol.equilibrium,
        &sim,
    )?;
    let mut table = format!(
        "pulse {} on [{}, {}) s\n",
        fmt_sig(pp.pendulum.pulse),
        fmt_sig(pp.scenario.t0),
        fmt_sig(pp.scenario.tc)
    );
    table += &row("", "unconstrained", "constrained");
    table += &row("torque w", &fmt_sig(free.w[0]), &fmt_sig(sol.decision[0]));
    table += &row(
        "x1 (rad)",
        &fmt_sig(free.equilibrium[0]),
        &fmt_sig(sol.equilibrium[0]),
    );
    table += &row(
        "stability",
        &format!("{free_label:?}"),
        &format!("{:?}", sol.stability_label),
    );
    table += &format!(
        "V^min {} V(x^c) {} status {:?}\n",
        fmt_sig(sol.v_min),
        fmt_sig(sol.v_cleared),
        sol.status
    );
    print!("{table}");
    if let Some(dir) = &cli.out {
        write(&dir.join("pendulum_solution.json"), &to_json(&sol)?)?;
        write(
            &dir.join("unconstrained_trajectory.csv"),
            &free_traj.to_csv(10),
        )?;
        write(
            &dir.join("constrained_trajectory.csv"),
            &sco_traj.to_csv(10),
        )?;
    }
    Ok(())
}
