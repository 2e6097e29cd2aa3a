//! File formats: JSON game and dynamics files, CSV exports.
//!
//! Game file:
//!
//! ```json
//! {"n": 3, "dims": [2, 2, 2],
//!  "matrices": [{"i": 0, "j": 1, "rows": [[0, 1], [1, 0]]}]}
//! ```
//!
//! Players are 0-based; absent pairs are zero.
//!
//! Dynamics file: `{"players": [{"variant": ..., "params": {...}}]}` with
//! variants `gradient_play`, `replicator`, `smooth_fp` (`temperature`),
//! `higher_order` (`E`, `F`, `G`, `H` as row-major arrays) and
//! `anticipatory` (`lambda`, `gamma`, optional `gamma2` for the compensator
//! gain). Players beyond the end of the list use gradient play.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::control::SweepResult;
use crate::dynamics::{Compensator, DynamicsSpec, DEFAULT_TEMPERATURE};
use crate::game::PolymatrixGame;
use crate::simulate::Trajectory;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub n: usize,
    pub dims: Vec<usize>,
    pub matrices: Vec<PairEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairEntry {
    pub i: usize,
    pub j: usize,
    pub rows: Vec<Vec<f64>>,
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(Error::Shape("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl GameFile {
    pub fn from_game(game: &PolymatrixGame) -> Self {
        Self {
            n: game.n(),
            dims: game.dims().to_vec(),
            matrices: game
                .pairs()
                .map(|(&(i, j), m)| PairEntry {
                    i,
                    j,
                    rows: matrix_to_rows(m),
                })
                .collect(),
        }
    }

    pub fn to_game(&self) -> Result<PolymatrixGame> {
        if self.n != self.dims.len() {
            return Err(Error::InvalidGame(format!(
                "n = {} but {} dims given",
                self.n,
                self.dims.len()
            )));
        }
        let mut g = PolymatrixGame::new(self.dims.clone())?;
        for e in &self.matrices {
            if g.pair(e.i, e.j).is_some() {
                return Err(Error::InvalidGame(format!("pair ({},{}) listed twice", e.i, e.j)));
            }
            g.set_pair(e.i, e.j, matrix_from_rows(&e.rows)?)?;
        }
        Ok(g)
    }
}

pub fn parse_game(text: &str) -> Result<PolymatrixGame> {
    let f: GameFile = serde_json::from_str(text).map_err(|e| Error::InvalidGame(e.to_string()))?;
    f.to_game()
}

pub fn game_to_json(game: &PolymatrixGame) -> String {
    serde_json::to_string_pretty(&GameFile::from_game(game)).expect("game file serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub players: Vec<PlayerEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlayerEntry {
    pub variant: String,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub params: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SmoothFpParams {
    temperature: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct HigherOrderParams {
    #[serde(rename = "E")]
    e: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    f: Vec<Vec<f64>>,
    #[serde(rename = "G")]
    g: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnticipatoryParams {
    lambda: f64,
    gamma: f64,
    gamma2: Option<f64>,
}

fn params<T: for<'de> Deserialize<'de>>(i: usize, v: &Value) -> Result<T> {
    serde_json::from_value(v.clone()).map_err(|e| Error::Domain(format!("player {i} params: {e}")))
}

impl PlayerEntry {
    pub fn to_spec(&self, i: usize, k: usize) -> Result<DynamicsSpec> {
        let spec = match self.variant.as_str() {
            "gradient_play" => DynamicsSpec::GradientPlay,
            "replicator" => DynamicsSpec::Replicator,
            "smooth_fp" => {
                let t = if self.params.is_null() {
                    None
                } else {
                    params::<SmoothFpParams>(i, &self.params)?.temperature
                };
                DynamicsSpec::SmoothFp {
                    temperature: t.unwrap_or(DEFAULT_TEMPERATURE),
                }
            }
            "higher_order" => {
                let p: HigherOrderParams = params(i, &self.params)?;
                let c = Compensator::new(
                    matrix_from_rows(&p.e)?,
                    matrix_from_rows(&p.f)?,
                    matrix_from_rows(&p.g)?,
                    matrix_from_rows(&p.h)?,
                )?;
                if c.tangent_dim() != k - 1 {
                    return Err(Error::Shape(format!(
                        "player {i}: compensator acts on {} directions, k - 1 = {}",
                        c.tangent_dim(),
                        k - 1
                    )));
                }
                DynamicsSpec::HigherOrder(c)
            }
            "anticipatory" => {
                let p: AnticipatoryParams = params(i, &self.params)?;
                DynamicsSpec::HigherOrder(Compensator::anticipatory_split(
                    p.lambda,
                    p.gamma,
                    p.gamma2.unwrap_or(p.gamma),
                    k,
                )?)
            }
            other => return Err(Error::Domain(format!("player {i}: unknown variant {other:?}"))),
        };
        Ok(spec)
    }

    pub fn from_spec(spec: &DynamicsSpec) -> Self {
        let (variant, params) = match spec {
            DynamicsSpec::GradientPlay => ("gradient_play", Value::Null),
            DynamicsSpec::Replicator => ("replicator", Value::Null),
            DynamicsSpec::SmoothFp { temperature } => ("smooth_fp", serde_json::json!({ "temperature": temperature })),
            DynamicsSpec::HigherOrder(c) => (
                "higher_order",
                serde_json::json!({
                    "E": matrix_to_rows(&c.e),
                    "F": matrix_to_rows(&c.f),
                    "G": matrix_to_rows(&c.g),
                    "H": matrix_to_rows(&c.h),
                }),
            ),
        };
        Self {
            variant: variant.into(),
            params,
        }
    }
}

impl SpecFile {
    /// Specs for every player of a game with strategy counts `dims`.
    pub fn to_specs(&self, dims: &[usize]) -> Result<Vec<DynamicsSpec>> {
        if self.players.len() > dims.len() {
            return Err(Error::Shape(format!(
                "{} player specs for a {}-player game",
                self.players.len(),
                dims.len()
            )));
        }
        dims.iter()
            .enumerate()
            .map(|(i, &k)| match self.players.get(i) {
                Some(e) => e.to_spec(i, k),
                None => Ok(DynamicsSpec::GradientPlay),
            })
            .collect()
    }

    pub fn from_specs(specs: &[DynamicsSpec]) -> Self {
        Self {
            players: specs.iter().map(PlayerEntry::from_spec).collect(),
        }
    }
}

pub fn parse_specs(text: &str, dims: &[usize]) -> Result<Vec<DynamicsSpec>> {
    let f: SpecFile = serde_json::from_str(text).map_err(|e| Error::Domain(format!("spec file: {e}")))?;
    f.to_specs(dims)
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Numerical(format!("csv write failed: {e}"))
}

/// Row-major matrix CSV without header.
pub fn write_matrix_csv<W: Write>(out: W, m: &DMatrix<f64>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in m.row_iter() {
        w.write_record(r.iter().map(|&x| fmt_f64(x))).map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e))
}

/// Trajectory CSV: `t`, every `x`, then every `xi`, then every `v`.
pub fn write_trajectory_csv<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = traj.states.first() else {
        return w.flush().map_err(|e| csv_err(e));
    };
    let mut header = vec!["t".to_string()];
    for (i, s) in first.iter().enumerate() {
        header.extend((0..s.x.len()).map(|a| format!("x{}_{}", i + 1, a + 1)));
    }
    for (i, s) in first.iter().enumerate() {
        header.extend((0..s.xi.len()).map(|a| format!("xi{}_{}", i + 1, a + 1)));
    }
    for (i, s) in first.iter().enumerate() {
        header.extend((0..s.v.len()).map(|a| format!("v{}_{}", i + 1, a + 1)));
    }
    w.write_record(&header).map_err(csv_err)?;
    for (t, players) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(players.iter().flat_map(|s| s.x.iter().map(|&v| fmt_f64(v))));
        row.extend(players.iter().flat_map(|s| s.xi.iter().map(|&v| fmt_f64(v))));
        row.extend(players.iter().flat_map(|s| s.v.iter().map(|&v| fmt_f64(v))));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| csv_err(e))
}

/// Long-format root-locus CSV: one row per (mu, eigenvalue).
pub fn write_sweep_csv<W: Write>(out: W, sweep: &SweepResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["mu", "index", "re", "im", "stable"]).map_err(csv_err)?;
    for p in &sweep.points {
        for (k, z) in p.eigenvalues.iter().enumerate() {
            w.write_record([
                fmt_f64(p.mu),
                k.to_string(),
                fmt_f64(z.re),
                fmt_f64(z.im),
                p.stable.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| csv_err(e))
}
