//! Finite polymatrix games.
//!
//! Player `i` receives `u_i(x) = x_i^T sum_{j != i} M_ij x_j`. Pair matrices
//! that are never set are zero, so sparse games like the three-player
//! Jordan cycle only store the links they use. Players are indexed from 0.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::simplex::TangentBasis;
use crate::{Error, Result};

/// Default tolerance for Nash verification and the completely-mixed test.
pub const NE_TOL: f64 = 1e-9;

/// Simplex membership tolerance for profiles.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolymatrixGame {
    dims: Vec<usize>,
    pairs: BTreeMap<(usize, usize), DMatrix<f64>>,
}

impl PolymatrixGame {
    /// Game with the given strategy counts and no interactions yet.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidGame("game needs at least one player".into()));
        }
        if let Some(k) = dims.iter().find(|&&k| k < 2) {
            return Err(Error::InvalidGame(format!(
                "every player needs at least 2 strategies, got {k}"
            )));
        }
        Ok(Self {
            dims,
            pairs: BTreeMap::new(),
        })
    }

    /// Sets `M_ij`, replacing any previous value.
    pub fn set_pair(&mut self, i: usize, j: usize, m: DMatrix<f64>) -> Result<()> {
        let n = self.n();
        if i >= n || j >= n {
            return Err(Error::InvalidGame(format!("pair ({i},{j}) out of range for {n} players")));
        }
        if i == j {
            return Err(Error::InvalidGame(format!("self-pair ({i},{i}) is not allowed")));
        }
        if m.shape() != (self.dims[i], self.dims[j]) {
            return Err(Error::InvalidGame(format!(
                "M_{i}{j} has shape {:?}, expected ({}, {})",
                m.shape(),
                self.dims[i],
                self.dims[j]
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGame(format!("M_{i}{j} has non-finite entries")));
        }
        self.pairs.insert((i, j), m);
        Ok(())
    }

    pub fn with_pair(mut self, i: usize, j: usize, m: DMatrix<f64>) -> Result<Self> {
        self.set_pair(i, j, m)?;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Stored pair matrix, if any.
    pub fn pair(&self, i: usize, j: usize) -> Option<&DMatrix<f64>> {
        self.pairs.get(&(i, j))
    }

    /// `M_ij`, zero when absent.
    pub fn pair_or_zero(&self, i: usize, j: usize) -> DMatrix<f64> {
        self.pairs
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| DMatrix::zeros(self.dims[i], self.dims[j]))
    }

    /// Stored pairs in `(i, j)` order.
    pub fn pairs(&self) -> impl Iterator<Item = (&(usize, usize), &DMatrix<f64>)> {
        self.pairs.iter()
    }

    pub fn tangent_bases(&self) -> Vec<TangentBasis> {
        self.dims
            .iter()
            .map(|&k| TangentBasis::new(k).expect("dims validated at construction"))
            .collect()
    }

    fn check_profile(&self, profile: &StrategyProfile) -> Result<()> {
        if profile.n() != self.n() {
            return Err(Error::InvalidGame(format!(
                "profile has {} players, game has {}",
                profile.n(),
                self.n()
            )));
        }
        for (i, (x, &k)) in profile.strategies.iter().zip(&self.dims).enumerate() {
            if x.len() != k {
                return Err(Error::InvalidGame(format!(
                    "player {i} strategy has length {}, expected {k}",
                    x.len()
                )));
            }
        }
        Ok(())
    }

    /// `P_i(x_{-i}) = sum_{j != i} M_ij x_j`.
    pub fn payoff_map(&self, i: usize, profile: &StrategyProfile) -> Result<DVector<f64>> {
        self.check_profile(profile)?;
        if i >= self.n() {
            return Err(Error::InvalidGame(format!("player {i} out of range")));
        }
        Ok(self.payoff_from(i, &profile.strategies))
    }

    /// Payoff vector from raw (unchecked) strategy vectors; used inside the
    /// integrator where stage states are not exactly on the simplex.
    pub(crate) fn payoff_from(&self, i: usize, xs: &[DVector<f64>]) -> DVector<f64> {
        let mut p = DVector::zeros(self.dims[i]);
        for ((a, b), m) in self.pairs.range((i, 0)..(i + 1, 0)) {
            debug_assert_eq!(*a, i);
            p.gemv(1.0, m, &xs[*b], 1.0);
        }
        p
    }

    /// `u_i = x_i^T P_i(x_{-i})`.
    pub fn utility(&self, i: usize, profile: &StrategyProfile) -> Result<f64> {
        let p = self.payoff_map(i, profile)?;
        Ok(profile.strategies[i].dot(&p))
    }

    /// Checks the best-response gap of every player.
    pub fn verify_ne(&self, profile: &StrategyProfile, tol: f64) -> Result<NeCertificate> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
        }
        self.check_profile(profile)?;
        let mut is_ne = true;
        let mut levels = Vec::with_capacity(self.n());
        let mut gaps = Vec::with_capacity(self.n());
        let mut max_violation: f64 = 0.0;
        let completely_mixed = profile.strategies.iter().all(|x| x.iter().all(|&v| v > tol));
        for i in 0..self.n() {
            let p = self.payoff_from(i, &profile.strategies);
            let u = profile.strategies[i].dot(&p);
            let gap = p.max() - u;
            if gap > tol {
                is_ne = false;
            }
            let alpha = p.mean();
            levels.push(alpha);
            gaps.push(gap);
            max_violation = max_violation.max(gap.max(0.0));
            if completely_mixed {
                let spread = p.iter().fold(0.0f64, |m, &v| m.max((v - alpha).abs()));
                max_violation = max_violation.max(spread);
            }
        }
        Ok(NeCertificate {
            profile: profile.clone(),
            is_ne,
            completely_mixed,
            payoff_levels: levels,
            best_response_gaps: gaps,
            max_violation,
            tolerance: tol,
        })
    }

    /// Completely mixed equilibrium candidate from the indifference
    /// conditions `N_i^T P_i(x) = 0`, solved in tangent coordinates around
    /// the uniform profile and then checked with [`Self::verify_ne`].
    ///
    /// Fails when the local game matrix is singular or the solution leaves
    /// the simplex interior.
    pub fn interior_equilibrium(&self, tol: f64) -> Result<StrategyProfile> {
        let bases = self.tangent_bases();
        let uniform = StrategyProfile::uniform(&self.dims);
        let offsets: Vec<usize> = bases
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.dim();
                Some(o)
            })
            .collect();
        let l: usize = bases.iter().map(|b| b.dim()).sum();
        let mut m = DMatrix::zeros(l, l);
        let mut rhs = DVector::zeros(l);
        for i in 0..self.n() {
            let ni = bases[i].matrix();
            let p0 = self.payoff_from(i, &uniform.strategies);
            rhs.rows_mut(offsets[i], bases[i].dim()).copy_from(&(-ni.tr_mul(&p0)));
            for ((_, j), mij) in self.pairs.range((i, 0)..(i + 1, 0)) {
                let block = ni.tr_mul(&(mij * bases[*j].matrix()));
                m.view_mut((offsets[i], offsets[*j]), block.shape()).copy_from(&block);
            }
        }
        let w = m
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Domain("local game matrix is singular; equilibrium is not isolated".into()))?;
        let strategies = (0..self.n())
            .map(|i| &uniform.strategies[i] + bases[i].matrix() * w.rows(offsets[i], bases[i].dim()))
            .collect::<Vec<_>>();
        if strategies.iter().any(|x| x.iter().any(|&v| v <= tol)) {
            return Err(Error::Domain("indifference solution lies outside the simplex interior".into()));
        }
        let profile = StrategyProfile::new_lenient(strategies, 1e-9)?;
        let cert = self.verify_ne(&profile, tol.max(1e-9))?;
        if !cert.is_ne {
            return Err(Error::Numerical(format!(
                "interior candidate fails verification (violation {:e})",
                cert.max_violation
            )));
        }
        Ok(profile)
    }
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub strategies: Vec<DVector<f64>>,
}

/// Serialized as a list of probability vectors.
impl Serialize for StrategyProfile {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<&[f64]> = self.strategies.iter().map(|x| x.as_slice()).collect();
        rows.serialize(s)
    }
}

impl StrategyProfile {
    pub fn new(strategies: Vec<DVector<f64>>) -> Result<Self> {
        Self::new_lenient(strategies, SIMPLEX_TOL)
    }

    /// Validates with a custom simplex tolerance and renormalizes the sum.
    pub fn new_lenient(strategies: Vec<DVector<f64>>, tol: f64) -> Result<Self> {
        let mut out = Vec::with_capacity(strategies.len());
        for (i, x) in strategies.into_iter().enumerate() {
            if x.iter().any(|v| !v.is_finite() || *v < -tol) {
                return Err(Error::Domain(format!("player {i} strategy has negative or non-finite entries")));
            }
            let s = x.sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::Domain(format!("player {i} strategy sums to {s}, not 1")));
            }
            out.push(x.map(|v| v.max(0.0)));
        }
        Ok(Self { strategies: out })
    }

    pub fn uniform(dims: &[usize]) -> Self {
        Self {
            strategies: dims
                .iter()
                .map(|&k| DVector::from_element(k, 1.0 / k as f64))
                .collect(),
        }
    }

    /// Every player on pure strategy `index`.
    pub fn pure(dims: &[usize], index: &[usize]) -> Result<Self> {
        if dims.len() != index.len() {
            return Err(Error::Shape("one pure index per player".into()));
        }
        let strategies = dims
            .iter()
            .zip(index)
            .map(|(&k, &s)| {
                if s >= k {
                    Err(Error::Domain(format!("pure strategy {s} out of range for k={k}")))
                } else {
                    let mut e = DVector::zeros(k);
                    e[s] = 1.0;
                    Ok(e)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { strategies })
    }

    pub fn n(&self) -> usize {
        self.strategies.len()
    }

    /// Max-norm distance to another profile of the same shape.
    pub fn max_distance(&self, other: &StrategyProfile) -> f64 {
        self.strategies
            .iter()
            .zip(&other.strategies)
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NeCertificate {
    pub profile: StrategyProfile,
    pub is_ne: bool,
    pub completely_mixed: bool,
    /// Mean payoff component per player (`alpha_i` at a mixed equilibrium).
    pub payoff_levels: Vec<f64>,
    /// `max_s P_i[s] - u_i` per player.
    pub best_response_gaps: Vec<f64>,
    /// Largest best-response gap, and for completely mixed profiles also the
    /// largest deviation of a payoff component from its player's level.
    pub max_violation: f64,
    pub tolerance: f64,
}

fn swap2() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

/// Jordan anti-coordination game with player 0's payoff scaled by `mu`:
/// `M_01 = mu [[0,1],[1,0]]`, `M_12 = M_20 = [[0,1],[1,0]]`.
pub fn make_jordan(mu: f64) -> Result<PolymatrixGame> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("payoff scale must be positive, got {mu}")));
    }
    PolymatrixGame::new(vec![2, 2, 2])?
        .with_pair(0, 1, swap2() * mu)?
        .with_pair(1, 2, swap2())?
        .with_pair(2, 0, swap2())
}

/// Two-player identical-interest game with `M_01 = M_10 = I`.
pub fn make_coordination() -> PolymatrixGame {
    PolymatrixGame::new(vec![2, 2])
        .and_then(|g| g.with_pair(0, 1, DMatrix::identity(2, 2)))
        .and_then(|g| g.with_pair(1, 0, DMatrix::identity(2, 2)))
        .expect("static game is valid")
}

/// Jordan game with `delta` added on the diagonals of `M_01`, `M_12`, `M_20`.
///
/// Accepts `0 <= delta_i < 1`; zero reproduces the unperturbed game.
pub fn perturb_jordan_diagonal(delta: [f64; 3]) -> Result<PolymatrixGame> {
    if let Some(d) = delta.iter().find(|d| !(0.0..1.0).contains(*d)) {
        return Err(Error::Domain(format!("diagonal perturbation must lie in [0, 1), got {d}")));
    }
    let links = [(0, 1), (1, 2), (2, 0)];
    let mut g = PolymatrixGame::new(vec![2, 2, 2])?;
    for (&(i, j), &d) in links.iter().zip(&delta) {
        g.set_pair(i, j, swap2() + DMatrix::identity(2, 2) * d)?;
    }
    Ok(g)
}

/// Adds i.i.d. `N(0, sigma^2)` noise to every stored pair matrix.
///
/// The generator is ChaCha8 seeded with `seed` (via `seed_from_u64`);
/// normals come from the Marsaglia polar method, consuming uniforms in
/// pair order `(i, j)` ascending and row-major within each matrix.
pub fn perturb_random(game: &PolymatrixGame, sigma: f64, seed: u64) -> Result<PolymatrixGame> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be non-negative, got {sigma}")));
    }
    let mut out = game.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut normals = PolarNormal::new(seed);
    for m in out.pairs.values_mut() {
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                m[(r, c)] += sigma * normals.sample();
            }
        }
    }
    Ok(out)
}

/// Standard normals by the Marsaglia polar method; the spare value of each
/// accepted pair is used before drawing again.
struct PolarNormal {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl PolarNormal {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn sample(&mut self) -> f64 {
        if let Some(s) = self.spare.take() {
            return s;
        }
        loop {
            let u = 2.0 * self.rng.gen::<f64>() - 1.0;
            let v = 2.0 * self.rng.gen::<f64>() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }
}
