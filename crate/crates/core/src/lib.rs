//! Higher-order gradient play in finite polymatrix games.
//!
//! The crate covers the whole pipeline around a completely mixed Nash
//! equilibrium: building games, running payoff-based learning rules,
//! linearizing the coupled dynamics in tangent coordinates, and testing the
//! resulting linear systems for stability, (decentralized) stabilizability
//! and strong stabilizability.
//!
//! Module map:
//!
//! - [`game`]: polymatrix games, payoffs, Nash verification, named games.
//! - [`simplex`]: Euclidean simplex projection and tangent bases.
//! - [`dynamics`]: replicator, smooth fictitious play, gradient play and
//!   higher-order gradient play as payoff-driven vector fields.
//! - [`linearize`]: the local game matrix, closed-loop Jacobian,
//!   decentralized plant and the rescaled-Jordan decomposition.
//! - [`control`]: spectra, PBH and Davison rank tests, Markov parameters,
//!   gain sweeps, the 2x2 parity test and robustness probing.
//! - [`simulate`]: RK4 integration of coupled and open-loop dynamics and the
//!   named experiment scenarios.
//! - [`io`]: JSON game/spec files and CSV export.

pub mod control;
pub mod dynamics;
mod error;
pub mod game;
pub mod io;
pub mod linalg;
pub mod linearize;
pub mod simplex;
pub mod simulate;

pub use error::{Error, Result};
pub use game::{PolymatrixGame, StrategyProfile};
pub use simplex::TangentBasis;
