//! Time integration of the learning dynamics.
//!
//! The coupled system recomputes every player's payoff from the current
//! opponent strategies at each RK4 stage. The open-loop variant drives one
//! player with an exogenous payoff signal instead.

use nalgebra::DVector;
use serde::Serialize;

use crate::dynamics::{derivative, derivative_unchecked, DynamicsSpec, PlayerState};
use crate::game::{PolymatrixGame, StrategyProfile};
use crate::simplex::TangentBasis;
use crate::{Error, Result};

mod scenario;

pub use scenario::{run_scenario, ScenarioOutcome, ScenarioOverrides, SCENARIOS};

/// Distance from the equilibrium beyond which a run counts as having
/// escaped towards the boundary.
pub const ESCAPE_RADIUS: f64 = 0.45;

/// Initial value of the washout state `v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WashoutInit {
    /// `v(0) = N^T p(0)`: the filter starts at rest.
    SteadyState,
    /// `v(0) = 0`.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub h: f64,
    pub horizon: f64,
    pub tol: f64,
    /// Record every `stride` steps (the final step is always recorded).
    pub stride: usize,
    pub washout: WashoutInit,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            h: 0.01,
            horizon: 200.0,
            tol: 1e-3,
            stride: 10,
            washout: WashoutInit::SteadyState,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) || !(self.horizon > 0.0) || self.stride == 0 || !(self.tol > 0.0) {
            return Err(Error::Domain(format!(
                "invalid simulation config (h={}, horizon={}, stride={}, tol={})",
                self.h, self.horizon, self.stride, self.tol
            )));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.horizon / self.h).round().max(1.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Recorded states, one entry per player per record.
    pub states: Vec<Vec<PlayerState>>,
    /// The final 10% of records stay within `tol` of the last state.
    pub settled: bool,
    /// Last recorded strategies.
    pub limit_estimate: Vec<DVector<f64>>,
}

impl Trajectory {
    fn new(times: Vec<f64>, states: Vec<Vec<PlayerState>>, tol: f64) -> Self {
        let last = states.last().cloned().unwrap_or_default();
        let limit_estimate: Vec<_> = last.iter().map(|s| s.x.clone()).collect();
        let start = tail_start(&times);
        let settled = states[start..].iter().all(|rec| {
            rec.iter()
                .zip(&limit_estimate)
                .all(|(s, x)| (&s.x - x).amax() <= tol)
        });
        Self {
            times,
            states,
            settled,
            limit_estimate,
        }
    }

    pub fn final_states(&self) -> &[PlayerState] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// Largest distance from the simplex over all recorded strategies:
    /// negative mass or a sum away from one.
    pub fn max_simplex_violation(&self) -> f64 {
        self.states
            .iter()
            .flatten()
            .map(|s| {
                let neg = s.x.iter().fold(0.0f64, |m, &v| m.max(-v));
                neg.max((s.x.sum() - 1.0).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Index of the first record in the last 10% of the time span.
fn tail_start(times: &[f64]) -> usize {
    let (Some(&t0), Some(&t1)) = (times.first(), times.last()) else {
        return 0;
    };
    let cut = t1 - 0.1 * (t1 - t0);
    times.iter().position(|&t| t >= cut).unwrap_or(0)
}

/// Flat layout of per-player `(x, xi, v)` blocks.
#[derive(Debug, Clone)]
struct Layout {
    parts: Vec<(usize, usize, usize)>,
}

impl Layout {
    fn of(states: &[PlayerState]) -> Self {
        Self {
            parts: states.iter().map(|s| (s.x.len(), s.xi.len(), s.v.len())).collect(),
        }
    }

    fn pack(&self, states: &[PlayerState]) -> Vec<f64> {
        states
            .iter()
            .flat_map(|s| s.x.iter().chain(s.xi.iter()).chain(s.v.iter()).copied())
            .collect()
    }

    fn unpack(&self, y: &[f64]) -> Vec<PlayerState> {
        let mut at = 0;
        self.parts
            .iter()
            .map(|&(k, l, d)| {
                let s = PlayerState {
                    x: DVector::from_column_slice(&y[at..at + k]),
                    xi: DVector::from_column_slice(&y[at + k..at + k + l]),
                    v: DVector::from_column_slice(&y[at + k + l..at + k + l + d]),
                };
                at += k + l + d;
                s
            })
            .collect()
    }
}

/// One classic fourth-order Runge-Kutta step.
fn rk4_step<F>(f: &F, t: f64, y: &[f64], h: f64) -> Vec<f64>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, d)| x + s * d).collect() };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k1));
    let k3 = f(t + 0.5 * h, &axpy(y, 0.5 * h, &k2));
    let k4 = f(t + h, &axpy(y, h, &k3));
    y.iter()
        .enumerate()
        .map(|(i, yi)| yi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

fn integrate<F>(layout: &Layout, init: &[PlayerState], cfg: &SimConfig, field: F) -> Result<Trajectory>
where
    F: Fn(f64, &[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    let steps = cfg.steps();
    let mut y = layout.pack(init);
    let mut times = vec![0.0];
    let mut states = vec![init.to_vec()];
    for s in 1..=steps {
        let t = (s - 1) as f64 * cfg.h;
        y = rk4_step(&field, t, &y, cfg.h);
        let t_next = s as f64 * cfg.h;
        if let Some(bad) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: format!("state component {bad}"),
                time: t_next,
            });
        }
        if s % cfg.stride == 0 || s == steps {
            times.push(t_next);
            states.push(layout.unpack(&y));
        }
    }
    Ok(Trajectory::new(times, states, cfg.tol))
}

/// Default initial states: `xi = 0` and the washout per `washout`.
pub fn initial_states(
    game: &PolymatrixGame,
    specs: &[DynamicsSpec],
    init: &StrategyProfile,
    washout: WashoutInit,
) -> Result<Vec<PlayerState>> {
    if specs.len() != game.n() || init.n() != game.n() {
        return Err(Error::Shape(format!(
            "{} specs and {} strategies for {} players",
            specs.len(),
            init.n(),
            game.n()
        )));
    }
    let bases = game.tangent_bases();
    (0..game.n())
        .map(|i| {
            let p = game.payoff_map(i, init)?;
            let v = match washout {
                WashoutInit::SteadyState => bases[i].reduce(&p)?,
                WashoutInit::Zero => DVector::zeros(bases[i].dim()),
            };
            let s = PlayerState::for_spec(&specs[i], init.strategies[i].clone(), v);
            derivative(&specs[i], &s, &p, &bases[i])?;
            Ok(s)
        })
        .collect()
}

/// Integrates all players in feedback with the game from explicit states.
pub fn simulate_coupled_from(
    game: &PolymatrixGame,
    specs: &[DynamicsSpec],
    init: Vec<PlayerState>,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    if specs.len() != game.n() || init.len() != game.n() {
        return Err(Error::Shape("one spec and one state per player".into()));
    }
    let bases = game.tangent_bases();
    let xs: Vec<DVector<f64>> = init.iter().map(|s| s.x.clone()).collect();
    for i in 0..game.n() {
        derivative(&specs[i], &init[i], &game.payoff_from(i, &xs), &bases[i])?;
    }
    let layout = Layout::of(&init);
    let field = |_t: f64, y: &[f64]| -> Vec<f64> {
        let st = layout.unpack(y);
        let xs: Vec<DVector<f64>> = st.iter().map(|s| s.x.clone()).collect();
        let mut out = Vec::with_capacity(y.len());
        for i in 0..st.len() {
            let p = game.payoff_from(i, &xs);
            let d = derivative_unchecked(&specs[i], &st[i], &p, &bases[i]);
            out.extend(d.dx.iter().chain(d.dxi.iter()).chain(d.dv.iter()));
        }
        out
    };
    integrate(&layout, &init, cfg, field)
}

/// Coupled simulation from a strategy profile with default auxiliary states.
pub fn simulate_coupled(
    game: &PolymatrixGame,
    specs: &[DynamicsSpec],
    init: &StrategyProfile,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    let states = initial_states(game, specs, init, cfg.washout)?;
    simulate_coupled_from(game, specs, states, cfg)
}

/// Integrates a single player against the payoff signal `payoff(t)`.
pub fn simulate_open_loop<P>(spec: &DynamicsSpec, payoff: P, init: PlayerState, cfg: &SimConfig) -> Result<Trajectory>
where
    P: Fn(f64) -> DVector<f64>,
{
    let basis = TangentBasis::new(init.x.len())?;
    derivative(spec, &init, &payoff(0.0), &basis)?;
    let init = vec![init];
    let layout = Layout::of(&init);
    let field = |t: f64, y: &[f64]| -> Vec<f64> {
        let st = layout.unpack(y);
        let d = derivative_unchecked(spec, &st[0], &payoff(t), &basis);
        d.dx.iter().chain(d.dxi.iter()).chain(d.dv.iter()).copied().collect()
    };
    integrate(&layout, &init, cfg, field)
}

/// Open-loop initial state: `xi = 0` and the washout per `washout`
/// relative to the first payoff sample.
pub fn open_loop_initial(spec: &DynamicsSpec, x: DVector<f64>, p0: &DVector<f64>, washout: WashoutInit) -> Result<PlayerState> {
    let basis = TangentBasis::new(x.len())?;
    let v = match washout {
        WashoutInit::SteadyState => basis.reduce(p0)?,
        WashoutInit::Zero => DVector::zeros(basis.dim()),
    };
    Ok(PlayerState::for_spec(spec, x, v))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// Max-norm distance to the target stays below `tol` over the final
    /// 10% of the horizon.
    pub converged: bool,
    /// Time after which the distance stays below `tol`.
    pub hitting_time: Option<f64>,
    pub final_distance: f64,
    pub max_distance: f64,
    /// Distance exceeded [`ESCAPE_RADIUS`] at some point.
    pub escaped: bool,
    pub tolerance: f64,
}

pub fn detect_convergence(traj: &Trajectory, target: &StrategyProfile, tol: f64) -> ConvergenceReport {
    let dist: Vec<f64> = traj
        .states
        .iter()
        .map(|rec| {
            rec.iter()
                .zip(&target.strategies)
                .map(|(s, x)| (&s.x - x).amax())
                .fold(0.0, f64::max)
        })
        .collect();
    let start = tail_start(&traj.times);
    let converged = !dist.is_empty() && dist[start..].iter().all(|&d| d < tol);
    let hitting_time = converged.then(|| match dist.iter().rposition(|&d| d >= tol) {
        Some(i) => traj.times[i + 1],
        None => traj.times[0],
    });
    let max_distance = dist.iter().copied().fold(0.0, f64::max);
    ConvergenceReport {
        converged,
        hitting_time,
        final_distance: dist.last().copied().unwrap_or(f64::NAN),
        max_distance,
        escaped: max_distance > ESCAPE_RADIUS,
        tolerance: tol,
    }
}

/// `x* + offset * N e_1` for every player: a small displacement along the
/// first tangent direction.
pub fn displaced_profile(ne: &StrategyProfile, offset: f64) -> Result<StrategyProfile> {
    let strategies = ne
        .strategies
        .iter()
        .map(|x| {
            let b = TangentBasis::new(x.len())?;
            let mut w = DVector::zeros(b.dim());
            w[0] = offset;
            Ok(x + b.lift(&w)?)
        })
        .collect::<Result<Vec<_>>>()?;
    StrategyProfile::new_lenient(strategies, 1e-12)
}
