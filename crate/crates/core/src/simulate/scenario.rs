//! The bundled experiment suite. Parameters live in `data/*.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    detect_convergence, displaced_profile, open_loop_initial, simulate_coupled, simulate_open_loop, ConvergenceReport,
    SimConfig, Trajectory, WashoutInit,
};
use crate::control::{log_grid, mu_sweep, spectral_abscissa, StabilityVerdict, SweepResult, STABILITY_TOL};
use crate::dynamics::DynamicsSpec;
use crate::game::{perturb_jordan_diagonal, perturb_random, PolymatrixGame, StrategyProfile, NE_TOL};
use crate::io::{parse_game, parse_specs, write_sweep_csv, write_trajectory_csv};
use crate::linearize::{assemble_closed_loop, closed_loop_for, gradient_compensators, GameLocalMatrix};
use crate::{Error, Result};

pub const SCENARIOS: [&str; 6] = [
    "jordan-single",
    "jordan-random",
    "jordan-diagonal",
    "jordan-rescaled",
    "coordination-stabilize",
    "coordination-openloop",
];

fn data_file(name: &str) -> Result<&'static str> {
    Ok(match name {
        "jordan.json" => include_str!("../../data/jordan.json"),
        "coordination.json" => include_str!("../../data/coordination.json"),
        "jordan_single.spec.json" => include_str!("../../data/jordan_single.spec.json"),
        "jordan_rescaled.spec.json" => include_str!("../../data/jordan_rescaled.spec.json"),
        "coordination.spec.json" => include_str!("../../data/coordination.spec.json"),
        other => return Err(Error::Domain(format!("no bundled data file {other:?}"))),
    })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepParams {
    mu_min: f64,
    mu_max: f64,
    points: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioParams {
    game: String,
    spec: String,
    h: f64,
    horizon: f64,
    sigma: Option<f64>,
    seed: Option<u64>,
    delta: Option<[f64; 3]>,
    delta_large: Option<[f64; 3]>,
    mu: Option<f64>,
    sweep: Option<SweepParams>,
    player: Option<usize>,
    p_star: Option<Vec<f64>>,
    washout: Option<String>,
}

fn scenario_table() -> Result<BTreeMap<String, ScenarioParams>> {
    serde_json::from_str(include_str!("../../data/scenarios.json"))
        .map_err(|e| Error::Domain(format!("bundled scenario table: {e}")))
}

/// Optional replacements for the bundled parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScenarioOverrides {
    pub h: Option<f64>,
    pub horizon: Option<f64>,
    pub tol: Option<f64>,
    pub stride: Option<usize>,
    pub washout: Option<WashoutInit>,
    /// Initial displacement along the first tangent direction.
    pub offset: Option<f64>,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub seed: Option<u64>,
    pub delta: Option<[f64; 3]>,
    /// Use the bundled large diagonal perturbation.
    pub large_delta: bool,
    pub sweep_points: Option<usize>,
    pub sweep_range: Option<(f64, f64)>,
}

/// Default initial displacement along the first tangent direction.
pub const DEFAULT_OFFSET: f64 = 0.05;

#[derive(Debug, Clone, Serialize)]
pub struct OpenLoopReport {
    pub best_response: Vec<f64>,
    pub limit: Vec<f64>,
    pub distance_to_best_response: f64,
    pub xi_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub name: String,
    pub game: PolymatrixGame,
    pub specs: Vec<DynamicsSpec>,
    /// Profile the simulation is measured against.
    pub target: StrategyProfile,
    pub config: SimConfig,
    pub trajectory: Trajectory,
    pub convergence: ConvergenceReport,
    /// Verdict of the linearization the simulation is compared with.
    pub verdict: StabilityVerdict,
    pub jacobian: DMatrix<f64>,
    /// Stable verdict and simulated convergence agree.
    pub consistent: bool,
    pub sweep: Option<SweepResult>,
    pub open_loop: Option<OpenLoopReport>,
    pub parameters: serde_json::Value,
}

#[derive(Serialize)]
struct Report<'a> {
    scenario: &'a str,
    parameters: &'a serde_json::Value,
    target: Vec<Vec<f64>>,
    verdict: &'a StabilityVerdict,
    convergence: &'a ConvergenceReport,
    consistent: bool,
    max_simplex_violation: f64,
    crossings: Option<&'a [crate::control::Crossing]>,
    open_loop: Option<&'a OpenLoopReport>,
}

impl ScenarioOutcome {
    pub fn report_json(&self) -> String {
        let r = Report {
            scenario: &self.name,
            parameters: &self.parameters,
            target: self.target.strategies.iter().map(|x| x.iter().copied().collect()).collect(),
            verdict: &self.verdict,
            convergence: &self.convergence,
            consistent: self.consistent,
            max_simplex_violation: self.trajectory.max_simplex_violation(),
            crossings: self.sweep.as_ref().map(|s| s.crossings.as_slice()),
            open_loop: self.open_loop.as_ref(),
        };
        serde_json::to_string_pretty(&r).expect("report serializes")
    }

    /// Writes `trajectory.csv`, `report.json` and, for sweeps,
    /// `root_locus.csv` into `dir`. Returns the written paths.
    pub fn write_artifacts(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::Domain(format!("{}: {e}", dir.display())))?;
        let create = |name: &str| -> Result<(PathBuf, fs::File)> {
            let p = dir.join(name);
            let f = fs::File::create(&p).map_err(|e| Error::Domain(format!("{}: {e}", p.display())))?;
            Ok((p, f))
        };
        let mut out = Vec::new();
        let (p, f) = create("trajectory.csv")?;
        write_trajectory_csv(f, &self.trajectory)?;
        out.push(p);
        let p = dir.join("report.json");
        fs::write(&p, self.report_json()).map_err(|e| Error::Domain(format!("{}: {e}", p.display())))?;
        out.push(p);
        if let Some(s) = &self.sweep {
            let (p, f) = create("root_locus.csv")?;
            write_sweep_csv(f, s)?;
            out.push(p);
        }
        Ok(out)
    }
}

fn parse_washout(s: &str) -> Result<WashoutInit> {
    match s {
        "steady_state" => Ok(WashoutInit::SteadyState),
        "zero" => Ok(WashoutInit::Zero),
        other => Err(Error::Domain(format!("unknown washout init {other:?}"))),
    }
}

fn scale_pair(game: &mut PolymatrixGame, i: usize, j: usize, s: f64) -> Result<()> {
    let m = game.pair_or_zero(i, j) * s;
    game.set_pair(i, j, m)
}

/// Runs one of [`SCENARIOS`].
pub fn run_scenario(name: &str, ov: &ScenarioOverrides) -> Result<ScenarioOutcome> {
    let table = scenario_table()?;
    let p = table.get(name).ok_or_else(|| {
        Error::Domain(format!("unknown scenario {name:?}; valid names: {}", SCENARIOS.join(", ")))
    })?;
    let mut game = parse_game(data_file(&p.game)?)?;
    let specs = parse_specs(data_file(&p.spec)?, game.dims())?;
    let washout = match (ov.washout, &p.washout) {
        (Some(w), _) => w,
        (None, Some(s)) => parse_washout(s)?,
        (None, None) => WashoutInit::SteadyState,
    };
    let cfg = SimConfig {
        h: ov.h.unwrap_or(p.h),
        horizon: ov.horizon.unwrap_or(p.horizon),
        tol: ov.tol.unwrap_or(SimConfig::default().tol),
        stride: ov.stride.unwrap_or(SimConfig::default().stride),
        washout,
    };
    let offset = ov.offset.unwrap_or(DEFAULT_OFFSET);
    let mut params = serde_json::json!({
        "h": cfg.h,
        "horizon": cfg.horizon,
        "tol": cfg.tol,
        "washout": cfg.washout,
        "offset": offset,
    });

    let mut sweep = None;
    match name {
        "jordan-random" => {
            let sigma = ov.sigma.or(p.sigma).unwrap_or(0.3);
            let seed = ov.seed.or(p.seed).unwrap_or(1);
            game = perturb_random(&game, sigma, seed)?;
            params["sigma"] = sigma.into();
            params["seed"] = seed.into();
        }
        "jordan-diagonal" => {
            let delta = match ov.delta {
                Some(d) => d,
                None if ov.large_delta => p.delta_large.ok_or_else(|| Error::Domain("no large delta".into()))?,
                None => p.delta.ok_or_else(|| Error::Domain("no delta".into()))?,
            };
            game = perturb_jordan_diagonal(delta)?;
            params["delta"] = serde_json::json!(delta);
        }
        "jordan-rescaled" => {
            let mu = ov.mu.or(p.mu).unwrap_or(5.0);
            if !(mu > 0.0) {
                return Err(Error::Domain(format!("mu must be positive, got {mu}")));
            }
            let base = game.clone();
            scale_pair(&mut game, 0, 1, mu)?;
            params["mu"] = mu.into();
            if let Some(sp) = &p.sweep {
                let (lo, hi) = ov.sweep_range.unwrap_or((sp.mu_min, sp.mu_max));
                let grid = log_grid(lo, hi, ov.sweep_points.unwrap_or(sp.points))?;
                let builder = |m: f64| -> Result<DMatrix<f64>> {
                    let mut g = base.clone();
                    scale_pair(&mut g, 0, 1, m)?;
                    Ok(closed_loop_for(&g, &specs)?.j)
                };
                sweep = Some(mu_sweep(builder, &grid, STABILITY_TOL)?);
                params["sweep"] = serde_json::json!({ "mu_min": lo, "mu_max": hi, "points": grid.len() });
            }
        }
        _ => {}
    }

    if name == "coordination-openloop" {
        return run_open_loop(name, game, specs, p, cfg, offset, params);
    }

    let target = if name == "jordan-random" {
        game.interior_equilibrium(NE_TOL)?
    } else {
        StrategyProfile::uniform(game.dims())
    };
    let cert = game.verify_ne(&target, NE_TOL)?;
    if !cert.is_ne || !cert.completely_mixed {
        return Err(Error::Domain("scenario equilibrium is not completely mixed".into()));
    }
    let cl = closed_loop_for(&game, &specs)?;
    let verdict = spectral_abscissa(&cl.j, STABILITY_TOL)?;
    let init = displaced_profile(&target, offset)?;
    let trajectory = simulate_coupled(&game, &specs, &init, &cfg)?;
    let convergence = detect_convergence(&trajectory, &target, cfg.tol);
    Ok(ScenarioOutcome {
        name: name.into(),
        consistent: verdict.stable == convergence.converged,
        game,
        specs,
        target,
        config: cfg,
        trajectory,
        convergence,
        verdict,
        jacobian: cl.j,
        sweep,
        open_loop: None,
        parameters: params,
    })
}

/// One player against a constant payoff. The linearization is the closed
/// loop with the game removed, whose spectrum is `{0, eig(E), -1}`.
fn run_open_loop(
    name: &str,
    game: PolymatrixGame,
    specs: Vec<DynamicsSpec>,
    p: &ScenarioParams,
    cfg: SimConfig,
    offset: f64,
    mut params: serde_json::Value,
) -> Result<ScenarioOutcome> {
    let player = p.player.unwrap_or(0);
    let spec = specs
        .get(player)
        .cloned()
        .ok_or_else(|| Error::Domain(format!("no player {player}")))?;
    let k = game.dims()[player];
    let p_star = DVector::from_vec(p.p_star.clone().ok_or_else(|| Error::Domain("missing p_star".into()))?);
    if p_star.len() != k {
        return Err(Error::Shape(format!("p_star has {} entries, player has {k}", p_star.len())));
    }
    params["player"] = player.into();
    params["p_star"] = serde_json::json!(p_star.as_slice());

    let ne = StrategyProfile::uniform(&[k]);
    let x0 = displaced_profile(&ne, offset)?.strategies.remove(0);
    let init = open_loop_initial(&spec, x0, &p_star, cfg.washout)?;
    let trajectory = simulate_open_loop(&spec, |_| p_star.clone(), init, &cfg)?;

    let solo = PolymatrixGame::new(vec![k])?;
    let single = std::slice::from_ref(&spec);
    let cl = assemble_closed_loop(&GameLocalMatrix::from_game(&solo), &gradient_compensators(single)?)?;
    let verdict = spectral_abscissa(&cl.j, STABILITY_TOL)?;

    let best = p_star.imax();
    let target = StrategyProfile::pure(&[k], &[best])?;
    let convergence = detect_convergence(&trajectory, &target, cfg.tol);
    let last = &trajectory.final_states()[0];
    let open_loop = OpenLoopReport {
        best_response: target.strategies[0].iter().copied().collect(),
        limit: last.x.iter().copied().collect(),
        distance_to_best_response: (&last.x - &target.strategies[0]).amax(),
        xi_norm: last.xi.norm(),
    };
    Ok(ScenarioOutcome {
        name: name.into(),
        game: solo,
        consistent: verdict.stable == convergence.converged,
        specs: vec![spec],
        target,
        config: cfg,
        trajectory,
        convergence,
        verdict,
        jacobian: cl.j,
        sweep: None,
        open_loop: Some(open_loop),
        parameters: params,
    })
}
