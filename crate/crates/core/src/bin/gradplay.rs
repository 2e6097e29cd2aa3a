//! Command-line front end.
//!
//! Exit codes: 0 affirmative, 1 negative verdict, 2 input error,
//! 3 precondition failure, 4 numeric failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::Serialize;

use gradplay::control::{
    check_eigenvector_coverage, davison_condition, log_grid, mu_sweep, parity_test_2x2, pbh_detectable,
    pbh_stabilizable, spectral_abscissa, DavisonReport, EigenBlockCheck, ParityReport, ParityVerdict, RankTest,
    StabilityVerdict, STABILITY_TOL,
};
use gradplay::dynamics::DynamicsSpec;
use gradplay::game::{make_jordan, NeCertificate, NE_TOL};
use gradplay::io::{parse_game, parse_specs, write_sweep_csv, write_trajectory_csv};
use gradplay::linearize::{assemble_local_matrix, assemble_plant, closed_loop_for};
use gradplay::simulate::{
    detect_convergence, displaced_profile, initial_states, run_scenario, simulate_coupled_from, ConvergenceReport,
    ScenarioOverrides, SimConfig, WashoutInit, SCENARIOS,
};
use gradplay::{Error, PolymatrixGame, StrategyProfile};

#[derive(Parser)]
#[command(name = "gradplay", version, about = "Higher-order gradient play in polymatrix games")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check whether a profile is a Nash equilibrium (exit 0 iff it is).
    Verify {
        #[arg(long)]
        game: PathBuf,
        /// "uniform", "auto" (interior equilibrium) or rows like "0.5,0.5;1,0".
        #[arg(long, default_value = "uniform")]
        profile: String,
        #[arg(long, default_value_t = NE_TOL)]
        tol: f64,
    },
    /// Local stability and decentralized stabilizability report (exit 0 iff stable).
    Analyze {
        #[arg(long)]
        game: PathBuf,
        /// Per-player dynamics; players without an entry use gradient play.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "auto")]
        profile: String,
        #[arg(long, default_value_t = NE_TOL)]
        ne_tol: f64,
        #[arg(long, default_value_t = STABILITY_TOL)]
        tol: f64,
    },
    /// Root locus of the rescaled Jordan game over the payoff scale mu.
    Sweep {
        #[arg(long, value_enum, default_value_t = Template::Jordan)]
        template: Template,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0.01)]
        mu_min: f64,
        #[arg(long, default_value_t = 100.0)]
        mu_max: f64,
        #[arg(long, default_value_t = 200)]
        points: usize,
        /// Explicit comma-separated grid; must be strictly increasing.
        #[arg(long, conflicts_with_all = ["mu_min", "mu_max", "points"])]
        grid: Option<String>,
        #[arg(long, default_value_t = STABILITY_TOL)]
        tol: f64,
        /// Root-locus CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate the coupled dynamics (exit 0 iff converged to a verified equilibrium).
    Simulate {
        #[arg(long)]
        game: PathBuf,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[command(flatten)]
        sim: SimArgs,
        /// Initial profile; defaults to the target displaced by --offset.
        #[arg(long)]
        init: Option<String>,
        /// Equilibrium to measure convergence against.
        #[arg(long, default_value = "auto")]
        target: String,
        #[arg(long, default_value_t = 0.05)]
        offset: f64,
        #[arg(long, default_value = "trajectory.csv")]
        out: PathBuf,
    },
    /// Run a bundled experiment and write its artifacts.
    Scenario {
        name: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        h: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long, value_enum)]
        washout: Option<Washout>,
        #[arg(long)]
        offset: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Diagonal perturbation "d1,d2,d3".
        #[arg(long)]
        delta: Option<String>,
        #[arg(long)]
        large_delta: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Template {
    Jordan,
}

#[derive(Clone, Copy, ValueEnum)]
enum Washout {
    SteadyState,
    Zero,
}

impl From<Washout> for WashoutInit {
    fn from(w: Washout) -> Self {
        match w {
            Washout::SteadyState => WashoutInit::SteadyState,
            Washout::Zero => WashoutInit::Zero,
        }
    }
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    #[arg(long, default_value_t = 200.0)]
    horizon: f64,
    /// Convergence tolerance (max-norm).
    #[arg(long, default_value_t = 1e-3)]
    tol: f64,
    #[arg(long, default_value_t = 10)]
    stride: usize,
    #[arg(long, value_enum, default_value_t = Washout::SteadyState)]
    washout: Washout,
}

enum Failure {
    Input(String),
    Precondition(String),
    Numeric(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NonFinite { .. } | Error::Numerical(_) => Failure::Numeric(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

type Outcome = Result<bool, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match cli.cmd {
        Cmd::Verify { game, profile, tol } => cmd_verify(&game, &profile, tol),
        Cmd::Analyze {
            game,
            spec,
            profile,
            ne_tol,
            tol,
        } => cmd_analyze(&game, spec.as_deref(), &profile, ne_tol, tol),
        Cmd::Sweep {
            template: Template::Jordan,
            spec,
            mu_min,
            mu_max,
            points,
            grid,
            tol,
            out,
        } => cmd_sweep(spec.as_deref(), mu_min, mu_max, points, grid.as_deref(), tol, out.as_deref()),
        Cmd::Simulate {
            game,
            spec,
            sim,
            init,
            target,
            offset,
            out,
        } => cmd_simulate(&game, spec.as_deref(), &sim, init.as_deref(), &target, offset, &out),
        Cmd::Scenario {
            name,
            out,
            h,
            horizon,
            tol,
            stride,
            washout,
            offset,
            mu,
            sigma,
            seed,
            delta,
            large_delta,
        } => parse_delta(delta.as_deref()).and_then(|delta| {
            let ov = ScenarioOverrides {
                h,
                horizon,
                tol,
                stride,
                washout: washout.map(Into::into),
                offset,
                mu,
                sigma,
                seed,
                delta,
                large_delta,
                ..Default::default()
            };
            cmd_scenario(&name, &ov, &out)
        }),
    };
    match r {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            let (code, msg) = match f {
                Failure::Input(m) => (2, m),
                Failure::Precondition(m) => (3, m),
                Failure::Numeric(m) => (4, m),
            };
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_game(path: &Path) -> Result<PolymatrixGame, Failure> {
    parse_game(&read(path)?).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn load_specs(path: Option<&Path>, dims: &[usize]) -> Result<Vec<DynamicsSpec>, Failure> {
    match path {
        Some(p) => parse_specs(&read(p)?, dims).map_err(|e| Failure::Input(format!("{}: {e}", p.display()))),
        None => Ok(vec![DynamicsSpec::GradientPlay; dims.len()]),
    }
}

fn parse_floats(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Failure::Input(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

fn parse_delta(s: Option<&str>) -> Result<Option<[f64; 3]>, Failure> {
    let Some(s) = s else { return Ok(None) };
    let v = parse_floats(s)?;
    <[f64; 3]>::try_from(v)
        .map(Some)
        .map_err(|v| Failure::Input(format!("expected three perturbations, got {}", v.len())))
}

/// `uniform`, `auto` (interior equilibrium) or `;`-separated rows of
/// comma-separated probabilities.
fn parse_profile(s: &str, game: &PolymatrixGame, tol: f64) -> Result<StrategyProfile, Failure> {
    match s.trim() {
        "uniform" => Ok(StrategyProfile::uniform(game.dims())),
        "auto" => game
            .interior_equilibrium(tol)
            .map_err(|e| Failure::Precondition(format!("no completely mixed equilibrium found: {e}"))),
        rows => {
            let strategies = rows
                .split(';')
                .map(|r| parse_floats(r).map(DVector::from_vec))
                .collect::<Result<Vec<_>, _>>()?;
            if strategies.len() != game.n() || strategies.iter().zip(game.dims()).any(|(x, &k)| x.len() != k) {
                return Err(Failure::Input(format!(
                    "profile shape does not match strategy counts {:?}",
                    game.dims()
                )));
            }
            StrategyProfile::new_lenient(strategies, 1e-9).map_err(Failure::from)
        }
    }
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string_pretty(v).expect("report serializes"));
}

fn cmd_verify(game: &Path, profile: &str, tol: f64) -> Outcome {
    let g = load_game(game)?;
    let p = parse_profile(profile, &g, tol)?;
    let cert = g.verify_ne(&p, tol)?;
    print_json(&cert);
    Ok(cert.is_ne)
}

#[derive(Serialize)]
struct PlayerControl {
    player: usize,
    stabilizable: RankTest,
    detectable: RankTest,
}

#[derive(Serialize)]
struct AnalyzeReport {
    equilibrium: NeCertificate,
    /// Fixed-order gradient play at the equilibrium.
    gradient_play: StabilityVerdict,
    closed_loop: StabilityVerdict,
    plant_stabilizable: RankTest,
    plant_detectable: RankTest,
    players: Vec<PlayerControl>,
    eigenvector_coverage: EigenBlockCheck,
    davison: Option<DavisonReport>,
    parity: Option<ParityReport>,
    not_strongly_stabilizable: Option<bool>,
}

const DAVISON_MAX_PLAYERS: usize = 12;

fn cmd_analyze(game: &Path, spec: Option<&Path>, profile: &str, ne_tol: f64, tol: f64) -> Outcome {
    let g = load_game(game)?;
    let specs = load_specs(spec, g.dims())?;
    let ne = parse_profile(profile, &g, ne_tol)?;
    let cert = g.verify_ne(&ne, ne_tol)?;
    if !cert.is_ne {
        return Err(Failure::Precondition(format!(
            "profile is not a Nash equilibrium (violation {:e})",
            cert.max_violation
        )));
    }
    if !cert.completely_mixed {
        return Err(Failure::Precondition(
            "equilibrium is not completely mixed; local analysis undefined".into(),
        ));
    }
    let local = assemble_local_matrix(&g, &ne, ne_tol)?;
    let closed = closed_loop_for(&g, &specs)?;
    let plant = assemble_plant(&local);
    let players = (0..plant.players())
        .map(|i| {
            Ok(PlayerControl {
                player: i,
                stabilizable: pbh_stabilizable(&plant.a, &plant.b_blocks[i], tol, None)?,
                detectable: pbh_detectable(&plant.a, &plant.c_blocks[i], tol, None)?,
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let parity = if g.dims() == [2, 2] {
        Some(parity_test_2x2(&g)?)
    } else {
        None
    };
    let report = AnalyzeReport {
        equilibrium: cert,
        gradient_play: spectral_abscissa(&local.m, tol)?,
        closed_loop: spectral_abscissa(&closed.j, tol)?,
        plant_stabilizable: pbh_stabilizable(&plant.a, &plant.b_full(), tol, None)?,
        plant_detectable: pbh_detectable(&plant.a, &plant.c_full(), tol, None)?,
        players,
        eigenvector_coverage: check_eigenvector_coverage(&local, tol)?,
        davison: if g.n() <= DAVISON_MAX_PLAYERS {
            Some(davison_condition(&plant, tol, None)?)
        } else {
            None
        },
        not_strongly_stabilizable: parity
            .as_ref()
            .map(|p| p.verdict == ParityVerdict::NotStronglyStabilizable),
        parity,
    };
    print_json(&report);
    Ok(report.closed_loop.stable)
}

#[derive(Serialize)]
struct SweepReport<'a> {
    points: usize,
    crossings: &'a [gradplay::control::Crossing],
    stable: Vec<bool>,
}

fn cmd_sweep(
    spec: Option<&Path>,
    mu_min: f64,
    mu_max: f64,
    points: usize,
    grid: Option<&str>,
    tol: f64,
    out: Option<&Path>,
) -> Outcome {
    let dims = [2, 2, 2];
    let specs = load_specs(spec, &dims)?;
    let grid = match grid {
        Some(s) => parse_floats(s)?,
        None => log_grid(mu_min, mu_max, points)?,
    };
    let builder = |mu: f64| Ok(closed_loop_for(&make_jordan(mu)?, &specs)?.j);
    let sweep = mu_sweep(builder, &grid, tol)?;
    if let Some(p) = out {
        let f = fs::File::create(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
        write_sweep_csv(f, &sweep)?;
    }
    print_json(&SweepReport {
        points: sweep.points.len(),
        crossings: &sweep.crossings,
        stable: sweep.points.iter().map(|p| p.stable).collect(),
    });
    Ok(true)
}

#[derive(Serialize)]
struct SimulateReport {
    convergence: ConvergenceReport,
    target_is_ne: bool,
    settled: bool,
    max_simplex_violation: f64,
    final_strategies: Vec<Vec<f64>>,
    config: SimConfig,
}

fn cmd_simulate(
    game: &Path,
    spec: Option<&Path>,
    sim: &SimArgs,
    init: Option<&str>,
    target: &str,
    offset: f64,
    out: &Path,
) -> Outcome {
    let g = load_game(game)?;
    let specs = load_specs(spec, g.dims())?;
    let target = parse_profile(target, &g, NE_TOL)?;
    let target_is_ne = g.verify_ne(&target, NE_TOL)?.is_ne;
    let init = match init {
        Some(s) => parse_profile(s, &g, NE_TOL)?,
        None => displaced_profile(&target, offset)?,
    };
    let cfg = SimConfig {
        h: sim.h,
        horizon: sim.horizon,
        tol: sim.tol,
        stride: sim.stride,
        washout: sim.washout.into(),
    };
    let states = initial_states(&g, &specs, &init, cfg.washout)?;
    let traj = simulate_coupled_from(&g, &specs, states, &cfg)?;
    let f = fs::File::create(out).map_err(|e| Failure::Input(format!("{}: {e}", out.display())))?;
    write_trajectory_csv(f, &traj)?;
    let convergence = detect_convergence(&traj, &target, cfg.tol);
    let ok = convergence.converged && target_is_ne;
    print_json(&SimulateReport {
        convergence,
        target_is_ne,
        settled: traj.settled,
        max_simplex_violation: traj.max_simplex_violation(),
        final_strategies: traj.limit_estimate.iter().map(|x| x.iter().copied().collect()).collect(),
        config: cfg,
    });
    Ok(ok)
}

fn cmd_scenario(name: &str, ov: &ScenarioOverrides, out: &Path) -> Outcome {
    if !SCENARIOS.contains(&name) {
        return Err(Failure::Input(format!(
            "unknown scenario {name:?}; valid names: {}",
            SCENARIOS.join(", ")
        )));
    }
    let o = run_scenario(name, ov)?;
    let dir = out.join(name);
    let written = o.write_artifacts(&dir)?;
    println!("{}", o.report_json());
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(o.consistent)
}
