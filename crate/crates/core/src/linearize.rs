//! Local matrices around a completely mixed equilibrium.
//!
//! In tangent coordinates `x_i = x_i* + N_i w_i` the coupled gradient play
//! reduces to `w' = M w` with block `(i, j)` of `M` equal to
//! `N_i^T M_ij N_j`. Adding washout states `v` and compensator states `xi`
//! gives the closed loop in `(w, xi, v)` order:
//!
//! ```text
//! [ (I+H) M   G   -H ]
//! [  F M      E   -F ]
//! [   M       0   -I ]
//! ```
//!
//! With the compensators left open, `(w, v)` form the plant
//! `A = [[M, 0], [M, -I]]`, `B_i = [E_i; 0]`, `C_i = [M_i., -E_i^T]`, where
//! `E_i` selects player `i`'s tangent block.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::{Compensator, DynamicsSpec};
use crate::game::{PolymatrixGame, StrategyProfile};
use crate::linalg::{block_diag, permute_symmetric};
use crate::simplex::TangentBasis;
use crate::{Error, Result};

/// `|det M|` below this (relative to `||M||^l`) marks a non-isolated equilibrium.
pub const SINGULAR_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameLocalMatrix {
    pub m: DMatrix<f64>,
    pub blocks: Vec<Range<usize>>,
}

impl GameLocalMatrix {
    /// Local matrix from `N_i^T M_ij N_j` directly. It does not depend on
    /// where the equilibrium sits, only on the pair matrices.
    pub fn from_game(game: &PolymatrixGame) -> Self {
        let bases = game.tangent_bases();
        let blocks = block_ranges(bases.iter().map(TangentBasis::dim));
        let l = blocks.last().map_or(0, |r| r.end);
        let mut m = DMatrix::zeros(l, l);
        for (&(i, j), mij) in game.pairs() {
            let b = bases[i].matrix().tr_mul(&(mij * bases[j].matrix()));
            m.view_mut((blocks[i].start, blocks[j].start), b.shape()).copy_from(&b);
        }
        Self { m, blocks }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn players(&self) -> usize {
        self.blocks.len()
    }

    /// Block row `M_i.` of player `i`.
    pub fn block_row(&self, i: usize) -> DMatrix<f64> {
        self.m.rows(self.blocks[i].start, self.blocks[i].len()).into_owned()
    }

    /// `|det M| <= SINGULAR_TOL * max(1, ||M||)^l`.
    pub fn is_singular(&self) -> bool {
        let scale = self.m.norm().max(1.0).powi(self.dim() as i32);
        self.m.determinant().abs() <= SINGULAR_TOL * scale
    }
}

pub(crate) fn block_ranges(dims: impl Iterator<Item = usize>) -> Vec<Range<usize>> {
    let mut at = 0;
    dims.map(|d| {
        let r = at..at + d;
        at += d;
        r
    })
    .collect()
}

/// Local game matrix at a verified completely mixed equilibrium.
pub fn assemble_local_matrix(game: &PolymatrixGame, ne: &StrategyProfile, tol: f64) -> Result<GameLocalMatrix> {
    let cert = game.verify_ne(ne, tol)?;
    if !cert.is_ne {
        return Err(Error::Domain(format!(
            "profile is not a Nash equilibrium (violation {:e})",
            cert.max_violation
        )));
    }
    if !cert.completely_mixed {
        return Err(Error::Domain("equilibrium is not completely mixed; local coordinates are undefined".into()));
    }
    Ok(GameLocalMatrix::from_game(game))
}

/// Closed-loop Jacobian in `(w, xi, v)` order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedLoopMatrix {
    pub j: DMatrix<f64>,
    /// Tangent dimension `l = sum (k_i - 1)`.
    pub tangent_dim: usize,
    /// Per-player ranges of the `xi` block, offsets relative to `xi` start.
    pub aux_blocks: Vec<Range<usize>>,
}

impl ClosedLoopMatrix {
    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    pub fn aux_dim(&self) -> usize {
        self.aux_blocks.last().map_or(0, |r| r.end)
    }
}

/// Builds the closed loop. `None` entries are fixed-order gradient players
/// (no `xi` block, `H_i = 0`); their washout states still appear in `v`
/// but never feed back.
pub fn assemble_closed_loop(local: &GameLocalMatrix, comps: &[Option<&Compensator>]) -> Result<ClosedLoopMatrix> {
    if comps.len() != local.players() {
        return Err(Error::Shape(format!(
            "{} compensators for {} players",
            comps.len(),
            local.players()
        )));
    }
    let l = local.dim();
    let mut es = Vec::new();
    let mut fs = Vec::new();
    let mut gs = Vec::new();
    let mut hs = Vec::new();
    for (i, (c, r)) in comps.iter().zip(&local.blocks).enumerate() {
        let d = r.len();
        match c {
            Some(c) => {
                if c.tangent_dim() != d {
                    return Err(Error::Shape(format!(
                        "player {i}: compensator acts on {} directions, tangent block has {d}",
                        c.tangent_dim()
                    )));
                }
                es.push(c.e.clone());
                fs.push(c.f.clone());
                gs.push(c.g.clone());
                hs.push(c.h.clone());
            }
            None => {
                es.push(DMatrix::zeros(0, 0));
                fs.push(DMatrix::zeros(0, d));
                gs.push(DMatrix::zeros(d, 0));
                hs.push(DMatrix::zeros(d, d));
            }
        }
    }
    let aux_blocks = block_ranges(es.iter().map(|e| e.nrows()));
    let e = block_diag(&es);
    let f = block_diag(&fs);
    let g = block_diag(&gs);
    let h = block_diag(&hs);
    let a = e.nrows();
    let m = &local.m;
    let id = DMatrix::<f64>::identity(l, l);

    let n = 2 * l + a;
    let mut j = DMatrix::zeros(n, n);
    j.view_mut((0, 0), (l, l)).copy_from(&((&id + &h) * m));
    j.view_mut((0, l), (l, a)).copy_from(&g);
    j.view_mut((0, l + a), (l, l)).copy_from(&(-&h));
    j.view_mut((l, 0), (a, l)).copy_from(&(&f * m));
    j.view_mut((l, l), (a, a)).copy_from(&e);
    j.view_mut((l, l + a), (a, l)).copy_from(&(-&f));
    j.view_mut((l + a, 0), (l, l)).copy_from(m);
    j.view_mut((l + a, l + a), (l, l)).copy_from(&(-&id));
    Ok(ClosedLoopMatrix {
        j,
        tangent_dim: l,
        aux_blocks,
    })
}

/// Convenience: closed loop of `game` under per-player `specs`. Only
/// gradient play and higher-order gradient play have this linearization.
pub fn closed_loop_for(game: &PolymatrixGame, specs: &[DynamicsSpec]) -> Result<ClosedLoopMatrix> {
    let comps = gradient_compensators(specs)?;
    assemble_closed_loop(&GameLocalMatrix::from_game(game), &comps)
}

pub(crate) fn gradient_compensators(specs: &[DynamicsSpec]) -> Result<Vec<Option<&Compensator>>> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| match s {
            DynamicsSpec::GradientPlay => Ok(None),
            DynamicsSpec::HigherOrder(c) => Ok(Some(c)),
            other => Err(Error::Domain(format!(
                "player {i}: no gradient-play linearization for {other:?}"
            ))),
        })
        .collect()
}

/// Open-loop plant for decentralized compensator design.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecentralizedPlant {
    pub a: DMatrix<f64>,
    pub b_blocks: Vec<DMatrix<f64>>,
    pub c_blocks: Vec<DMatrix<f64>>,
}

impl DecentralizedPlant {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn players(&self) -> usize {
        self.b_blocks.len()
    }

    /// `[B_1 ... B_n]`.
    pub fn b_full(&self) -> DMatrix<f64> {
        hstack(&self.b_blocks, self.state_dim())
    }

    /// `[C_1; ...; C_n]`.
    pub fn c_full(&self) -> DMatrix<f64> {
        vstack(&self.c_blocks, self.state_dim())
    }

    /// Inputs of the players selected by `mask` (bit `i` set = player `i`).
    pub fn b_subset(&self, mask: u64) -> DMatrix<f64> {
        let sel: Vec<_> = (0..self.players())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.b_blocks[i].clone())
            .collect();
        hstack(&sel, self.state_dim())
    }

    pub fn c_subset(&self, mask: u64) -> DMatrix<f64> {
        let sel: Vec<_> = (0..self.players())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| self.c_blocks[i].clone())
            .collect();
        vstack(&sel, self.state_dim())
    }
}

pub(crate) fn hstack(blocks: &[DMatrix<f64>], rows: usize) -> DMatrix<f64> {
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        out.view_mut((0, c), b.shape()).copy_from(b);
        c += b.ncols();
    }
    out
}

pub(crate) fn vstack(blocks: &[DMatrix<f64>], cols: usize) -> DMatrix<f64> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), b.shape()).copy_from(b);
        r += b.nrows();
    }
    out
}

pub fn assemble_plant(local: &GameLocalMatrix) -> DecentralizedPlant {
    let l = local.dim();
    let m = &local.m;
    let mut a = DMatrix::zeros(2 * l, 2 * l);
    a.view_mut((0, 0), (l, l)).copy_from(m);
    a.view_mut((l, 0), (l, l)).copy_from(m);
    a.view_mut((l, l), (l, l)).fill_with_identity();
    a.view_mut((l, l), (l, l)).neg_mut();

    let mut b_blocks = Vec::new();
    let mut c_blocks = Vec::new();
    for (i, r) in local.blocks.iter().enumerate() {
        let d = r.len();
        let mut b = DMatrix::zeros(2 * l, d);
        b.view_mut((r.start, 0), (d, d)).fill_with_identity();
        let mut c = DMatrix::zeros(d, 2 * l);
        c.view_mut((0, 0), (d, l)).copy_from(&local.block_row(i));
        c.view_mut((0, l + r.start), (d, d)).fill_with_identity();
        c.view_mut((0, l + r.start), (d, d)).neg_mut();
        b_blocks.push(b);
        c_blocks.push(c);
    }
    DecentralizedPlant { a, b_blocks, c_blocks }
}

/// Scalar compensator `(e, f, g, h)` for a two-strategy player.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarCompensator {
    pub e: f64,
    pub f: f64,
    pub g: f64,
    pub h: f64,
}

impl ScalarCompensator {
    pub fn anticipatory(lambda: f64, gamma_h: f64, gamma_g: f64) -> Self {
        Self {
            e: -lambda,
            f: lambda,
            g: -gamma_g * lambda,
            h: gamma_h * lambda,
        }
    }

    pub fn to_compensator(self) -> Compensator {
        Compensator::scalar(self.e, self.f, self.g, self.h, 2).expect("scalar compensator on k = 2")
    }
}

impl TryFrom<&Compensator> for ScalarCompensator {
    type Error = Error;

    fn try_from(c: &Compensator) -> Result<Self> {
        if c.aux_dim() != 1 || c.tangent_dim() != 1 {
            return Err(Error::Domain(format!(
                "expected a scalar compensator, got aux dim {} on {} directions",
                c.aux_dim(),
                c.tangent_dim()
            )));
        }
        Ok(Self {
            e: c.e[0],
            f: c.f[0],
            g: c.g[0],
            h: c.h[0],
        })
    }
}

/// Ordering used by the rank-one decomposition, as indices into the
/// `(w1, w2, w3, xi1, v1, xi2, v2, xi3, v3)` ordering of the Jacobian:
/// `(w1, w3, w2, xi1, v1, xi3, v3, xi2, v2)`.
pub const RESCALED_PERMUTATION: [usize; 9] = [0, 2, 1, 3, 4, 7, 8, 5, 6];

/// Closed-loop Jacobian of the rescaled Jordan game together with its
/// split `P J P^T = A - mu B C` into a `mu`-free part and a rank-one term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RescaledJordan {
    pub mu: f64,
    /// Jacobian in `(w1, w2, w3, xi1, v1, xi2, v2, xi3, v3)` order.
    pub jr: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub permutation: [usize; 9],
}

impl RescaledJordan {
    /// `A - mu B C`, in the permuted ordering.
    pub fn reassembled(&self, mu: f64) -> DMatrix<f64> {
        &self.a - (&self.b * &self.c) * mu
    }

    /// `P J P^T`.
    pub fn jr_permuted(&self) -> DMatrix<f64> {
        permute_symmetric(&self.jr, &self.permutation)
    }
}

/// Jacobian of the three-player rescaled Jordan cycle with every player on
/// a scalar compensator, using `N_i^T M_ij N_j = -1` on each link and
/// `-mu` on player 1's link.
pub fn assemble_rescaled_jordan(mu: f64, comps: [ScalarCompensator; 3]) -> RescaledJordan {
    let [c1, c2, c3] = comps;
    #[rustfmt::skip]
    let jr = DMatrix::from_row_slice(9, 9, &[
        0.0, -mu * (1.0 + c1.h), 0.0,  c1.g, -c1.h, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, -(1.0 + c2.h),       0.0, 0.0, c2.g, -c2.h, 0.0, 0.0,
        -(1.0 + c3.h), 0.0, 0.0,       0.0, 0.0, 0.0, 0.0, c3.g, -c3.h,
        0.0, -mu * c1.f, 0.0,          c1.e, -c1.f, 0.0, 0.0, 0.0, 0.0,
        0.0, -mu, 0.0,                 0.0, -1.0, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, -c2.f,               0.0, 0.0, c2.e, -c2.f, 0.0, 0.0,
        0.0, 0.0, -1.0,                0.0, 0.0, 0.0, -1.0, 0.0, 0.0,
        -c3.f, 0.0, 0.0,               0.0, 0.0, 0.0, 0.0, c3.e, -c3.f,
        -1.0, 0.0, 0.0,                0.0, 0.0, 0.0, 0.0, 0.0, -1.0,
    ]);
    #[rustfmt::skip]
    let a = DMatrix::from_row_slice(9, 9, &[
        0.0, 0.0, 0.0,                 c1.g, -c1.h, 0.0, 0.0, 0.0, 0.0,
        -(1.0 + c3.h), 0.0, 0.0,       0.0, 0.0, c3.g, -c3.h, 0.0, 0.0,
        0.0, -(1.0 + c2.h), 0.0,       0.0, 0.0, 0.0, 0.0, c2.g, -c2.h,
        0.0, 0.0, 0.0,                 c1.e, -c1.f, 0.0, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0,                 0.0, -1.0, 0.0, 0.0, 0.0, 0.0,
        -c3.f, 0.0, 0.0,               0.0, 0.0, c3.e, -c3.f, 0.0, 0.0,
        -1.0, 0.0, 0.0,                0.0, 0.0, 0.0, -1.0, 0.0, 0.0,
        0.0, -c2.f, 0.0,               0.0, 0.0, 0.0, 0.0, c2.e, -c2.f,
        0.0, -1.0, 0.0,                0.0, 0.0, 0.0, 0.0, 0.0, -1.0,
    ]);
    let b = DMatrix::from_column_slice(9, 1, &[c1.h + 1.0, 0.0, 0.0, c1.f, 1.0, 0.0, 0.0, 0.0, 0.0]);
    let mut c = DMatrix::zeros(1, 9);
    c[(0, 2)] = 1.0;
    RescaledJordan {
        mu,
        jr,
        a,
        b,
        c,
        permutation: RESCALED_PERMUTATION,
    }
}

/// Index map from the `(w, xi, v)` closed-loop ordering of a three-player,
/// scalar-aux game to the per-player interleaved `(w, xi1, v1, xi2, v2,
/// xi3, v3)` ordering: entry `a` is the closed-loop index of variable `a`.
pub const INTERLEAVED_FROM_CLOSED_LOOP: [usize; 9] = [0, 1, 2, 3, 6, 4, 7, 5, 8];
