//! Payoff-based learning rules.
//!
//! Each rule maps a player's own state and payoff vector to a state
//! derivative; nothing here knows about the game. Coupling through the
//! payoff matrices happens in [`crate::simulate`].
//!
//! Higher-order gradient play carries two auxiliary signals per player: a
//! washout state `v` tracking `N^T p`, and a compensator state `xi`:
//!
//! ```text
//! y     = N^T p - v
//! x'    = -x + Proj[x + p + N (G xi + H y)]
//! xi'   = E xi + F y
//! v'    = y
//! ```

use nalgebra::{DMatrix, DVector};

use crate::simplex::{project_unchecked, TangentBasis};
use crate::{Error, Result};

/// Temperature used for smooth fictitious play when none is given.
pub const DEFAULT_TEMPERATURE: f64 = 0.1;

/// Linear compensator `(E, F, G, H)` acting on the washed-out payoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Compensator {
    pub e: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub h: DMatrix<f64>,
}

impl Compensator {
    /// Validates shapes: `E` is `l x l`, `F` is `l x d`, `G` is `d x l`,
    /// `H` is `d x d`, with `d = k - 1` inferred from `H`.
    pub fn new(e: DMatrix<f64>, f: DMatrix<f64>, g: DMatrix<f64>, h: DMatrix<f64>) -> Result<Self> {
        let l = e.nrows();
        let d = h.nrows();
        let ok = e.shape() == (l, l) && f.shape() == (l, d) && g.shape() == (d, l) && h.shape() == (d, d);
        if !ok {
            return Err(Error::Shape(format!(
                "compensator shapes E{:?} F{:?} G{:?} H{:?} are inconsistent",
                e.shape(),
                f.shape(),
                g.shape(),
                h.shape()
            )));
        }
        if d == 0 {
            return Err(Error::Shape("compensator must act on at least one tangent direction".into()));
        }
        let all = e.iter().chain(f.iter()).chain(g.iter()).chain(h.iter());
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Domain("compensator has non-finite entries".into()));
        }
        Ok(Self { e, f, g, h })
    }

    /// Scalar-per-direction compensator `(e, f, g, h) * I` on `k - 1`
    /// tangent directions with one auxiliary state per direction.
    pub fn scalar(e: f64, f: f64, g: f64, h: f64, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("need k >= 2, got {k}")));
        }
        let id = DMatrix::<f64>::identity(k - 1, k - 1);
        Self::new(&id * e, &id * f, &id * g, &id * h)
    }

    /// Anticipatory form on the filtered payoff with separate gains for the
    /// direct term (`H = gamma_h * lambda`) and the compensator output
    /// (`G = -gamma_g * lambda`); `E = -lambda`, `F = lambda`.
    pub fn anticipatory_split(lambda: f64, gamma_h: f64, gamma_g: f64, k: usize) -> Result<Self> {
        if !(lambda > 0.0) || !(gamma_h > 0.0) || !(gamma_g > 0.0) {
            return Err(Error::Domain(format!(
                "anticipatory gains must be positive (lambda={lambda}, gamma={gamma_h}, gamma2={gamma_g})"
            )));
        }
        Self::scalar(-lambda, lambda, -gamma_g * lambda, gamma_h * lambda, k)
    }

    /// Auxiliary dimension `l`.
    pub fn aux_dim(&self) -> usize {
        self.e.nrows()
    }

    /// Tangent dimension `k - 1`.
    pub fn tangent_dim(&self) -> usize {
        self.h.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsSpec {
    Replicator,
    SmoothFp { temperature: f64 },
    GradientPlay,
    HigherOrder(Compensator),
}

impl DynamicsSpec {
    pub fn is_higher_order(&self) -> bool {
        matches!(self, Self::HigherOrder(_))
    }

    pub fn compensator(&self) -> Option<&Compensator> {
        match self {
            Self::HigherOrder(c) => Some(c),
            _ => None,
        }
    }

    /// Lengths of `(xi, v)` for a player with `k` strategies.
    pub fn aux_dims(&self, k: usize) -> (usize, usize) {
        match self {
            Self::HigherOrder(c) => (c.aux_dim(), k - 1),
            _ => (0, 0),
        }
    }

    fn check(&self, k: usize) -> Result<()> {
        match self {
            Self::SmoothFp { temperature } if !(*temperature > 0.0) => {
                Err(Error::Domain(format!("temperature must be positive, got {temperature}")))
            }
            Self::HigherOrder(c) if c.tangent_dim() != k - 1 => Err(Error::Shape(format!(
                "compensator acts on {} directions, player has k-1 = {}",
                c.tangent_dim(),
                k - 1
            ))),
            _ => Ok(()),
        }
    }
}

/// Anticipatory higher-order gradient play with a single gain `gamma`:
/// `(E, F, G, H) = (-lambda, lambda, -gamma lambda, gamma lambda) * I`.
pub fn make_anticipatory(lambda: f64, gamma: f64, k: usize) -> Result<DynamicsSpec> {
    Compensator::anticipatory_split(lambda, gamma, gamma, k).map(DynamicsSpec::HigherOrder)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerState {
    pub x: DVector<f64>,
    pub xi: DVector<f64>,
    pub v: DVector<f64>,
}

impl PlayerState {
    /// Fixed-order state with empty auxiliary vectors.
    pub fn fixed(x: DVector<f64>) -> Self {
        Self {
            x,
            xi: DVector::zeros(0),
            v: DVector::zeros(0),
        }
    }

    /// State for `spec` with `xi = 0` and the washout at `v`.
    pub fn for_spec(spec: &DynamicsSpec, x: DVector<f64>, v: DVector<f64>) -> Self {
        let (l, _) = spec.aux_dims(x.len());
        if spec.is_higher_order() {
            Self {
                x,
                xi: DVector::zeros(l),
                v,
            }
        } else {
            Self::fixed(x)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub dx: DVector<f64>,
    pub dxi: DVector<f64>,
    pub dv: DVector<f64>,
}

/// Gibbs distribution `exp(v/T) / sum exp(v/T)`, computed shift-stably.
pub fn softmax(v: &DVector<f64>, temperature: f64) -> Result<DVector<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive, got {temperature}")));
    }
    if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("softmax input must be finite and non-empty".into()));
    }
    let top = v.max();
    let e = v.map(|x| ((x - top) / temperature).exp());
    let z = e.sum();
    Ok(e / z)
}

fn check_state(spec: &DynamicsSpec, state: &PlayerState, p: &DVector<f64>, basis: &TangentBasis) -> Result<()> {
    let k = basis.k();
    if state.x.len() != k || p.len() != k {
        return Err(Error::Shape(format!(
            "strategy length {}, payoff length {}, basis k = {k}",
            state.x.len(),
            p.len()
        )));
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("payoff vector has non-finite entries".into()));
    }
    spec.check(k)?;
    let (l, d) = spec.aux_dims(k);
    if state.xi.len() != l || state.v.len() != d {
        return Err(Error::Shape(format!(
            "auxiliary state lengths (xi {}, v {}) expected ({l}, {d})",
            state.xi.len(),
            state.v.len()
        )));
    }
    Ok(())
}

/// `p + N (G xi + H (N^T p - v))`.
pub fn modified_payoff(
    comp: &Compensator,
    state: &PlayerState,
    p: &DVector<f64>,
    basis: &TangentBasis,
) -> Result<DVector<f64>> {
    let spec = DynamicsSpec::HigherOrder(comp.clone());
    check_state(&spec, state, p, basis)?;
    Ok(modified_payoff_unchecked(comp, state, p, basis))
}

fn washout_output(state: &PlayerState, p: &DVector<f64>, basis: &TangentBasis) -> DVector<f64> {
    basis.matrix().tr_mul(p) - &state.v
}

fn modified_payoff_unchecked(
    comp: &Compensator,
    state: &PlayerState,
    p: &DVector<f64>,
    basis: &TangentBasis,
) -> DVector<f64> {
    let y = washout_output(state, p, basis);
    let u = &comp.g * &state.xi + &comp.h * y;
    p + basis.matrix() * u
}

/// Time derivative of a single player's state under payoff `p`.
pub fn derivative(
    spec: &DynamicsSpec,
    state: &PlayerState,
    p: &DVector<f64>,
    basis: &TangentBasis,
) -> Result<StateDerivative> {
    check_state(spec, state, p, basis)?;
    Ok(derivative_unchecked(spec, state, p, basis))
}

pub(crate) fn derivative_unchecked(
    spec: &DynamicsSpec,
    state: &PlayerState,
    p: &DVector<f64>,
    basis: &TangentBasis,
) -> StateDerivative {
    let x = &state.x;
    let empty = || DVector::zeros(0);
    match spec {
        DynamicsSpec::Replicator => {
            let avg = x.dot(p);
            StateDerivative {
                dx: x.component_mul(&p.map(|v| v - avg)),
                dxi: empty(),
                dv: empty(),
            }
        }
        DynamicsSpec::SmoothFp { temperature } => StateDerivative {
            dx: softmax(p, *temperature).expect("validated input") - x,
            dxi: empty(),
            dv: empty(),
        },
        DynamicsSpec::GradientPlay => StateDerivative {
            dx: project_unchecked(&(x + p)) - x,
            dxi: empty(),
            dv: empty(),
        },
        DynamicsSpec::HigherOrder(c) => {
            let y = washout_output(state, p, basis);
            let u = &c.g * &state.xi + &c.h * &y;
            let target = x + p + basis.matrix() * u;
            StateDerivative {
                dx: project_unchecked(&target) - x,
                dxi: &c.e * &state.xi + &c.f * &y,
                dv: y,
            }
        }
    }
}

/// Residual of the vanishing-modification condition for the linear
/// higher-order form `z' = D z + E p`, `phi = F p + G z`.
#[derive(Debug, Clone, PartialEq)]
pub struct VanishingReport {
    /// Frobenius norm of `F - G D^{-1} E`; infinite when `D` is singular.
    pub residual: f64,
    pub satisfied: bool,
    pub diagnostic: Option<String>,
}

pub const VANISHING_TOL: f64 = 1e-9;

pub fn check_vanishing_linear(
    d: &DMatrix<f64>,
    e: &DMatrix<f64>,
    f: &DMatrix<f64>,
    g: &DMatrix<f64>,
) -> Result<VanishingReport> {
    if !d.is_square() || e.nrows() != d.nrows() || g.ncols() != d.ncols() || f.shape() != (g.nrows(), e.ncols()) {
        return Err(Error::Shape(format!(
            "D{:?} E{:?} F{:?} G{:?} are inconsistent",
            d.shape(),
            e.shape(),
            f.shape(),
            g.shape()
        )));
    }
    let Some(d_inv_e) = d.clone().lu().solve(e) else {
        return Ok(VanishingReport {
            residual: f64::INFINITY,
            satisfied: false,
            diagnostic: Some("D is singular".into()),
        });
    };
    let residual = (f - g * d_inv_e).norm();
    Ok(VanishingReport {
        residual,
        satisfied: residual <= VANISHING_TOL,
        diagnostic: None,
    })
}

impl Compensator {
    /// Vanishing check in linear form: the filter `z' = D z + E p` with
    /// modification `F p + G z` is `(D, E, F, G) = (E, F, H, G)` here.
    pub fn vanishing(&self) -> Result<VanishingReport> {
        check_vanishing_linear(&self.e, &self.f, &self.h, &self.g)
    }
}
