//! Stability and stabilizability tests on the local linear systems.
//!
//! Rank tests only need to be evaluated at eigenvalues of `A` with
//! non-negative real part (up to `tol`): anywhere else `A - lambda I` is
//! invertible and the bordered matrices have full rank automatically.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::dynamics::DynamicsSpec;
use crate::game::PolymatrixGame;
use crate::linalg::{self, eigenvalues, null_space_c, rank_c, to_complex, C64};
use crate::linearize::{gradient_compensators, assemble_closed_loop, DecentralizedPlant, GameLocalMatrix};
use crate::simplex::TangentBasis;
use crate::{Error, Result};

/// Default margin for "strictly in the left half-plane".
pub const STABILITY_TOL: f64 = 1e-8;

/// Eigenvalues closer than this (relative to `max(1, ||M||)`) are treated
/// as one cluster when counting algebraic multiplicity.
const CLUSTER_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub spectral_abscissa: f64,
    pub stable: bool,
    #[serde(serialize_with = "ser_complex_list")]
    pub eigenvalues: Vec<C64>,
    pub tolerance: f64,
}

pub(crate) fn ser_complex_list<S: serde::Serializer>(v: &[C64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for z in v {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

fn ser_complex_opt<S: serde::Serializer>(v: &Option<C64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(z) => s.serialize_some(&[z.re, z.im]),
        None => s.serialize_none(),
    }
}

fn ser_complex<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
    [z.re, z.im].serialize(s)
}

/// Spectrum and stability verdict; stable iff every real part is below `-tol`.
pub fn spectral_abscissa(m: &DMatrix<f64>, tol: f64) -> Result<StabilityVerdict> {
    let eigs = eigenvalues(m)?;
    let a = linalg::spectral_abscissa(&eigs);
    Ok(StabilityVerdict {
        spectral_abscissa: a,
        stable: a < -tol,
        eigenvalues: eigs,
        tolerance: tol,
    })
}

/// Result of a PBH-type rank test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTest {
    pub holds: bool,
    /// An eigenvalue at which the rank drops.
    #[serde(serialize_with = "ser_complex_opt")]
    pub witness: Option<C64>,
    /// Eigenvalues that were tested.
    #[serde(serialize_with = "ser_complex_list")]
    pub tested: Vec<C64>,
}

/// Eigenvalues of `a` with real part at least `-tol`, one representative
/// per cluster.
fn critical_eigenvalues(a: &DMatrix<f64>, tol: f64) -> Result<Vec<C64>> {
    let eigs = eigenvalues(a)?;
    let scale = a.norm().max(1.0);
    let mut out: Vec<C64> = Vec::new();
    for z in eigs.into_iter().filter(|z| z.re >= -tol) {
        if !out.iter().any(|w| (w - z).norm() <= CLUSTER_TOL * scale) {
            out.push(z);
        }
    }
    Ok(out)
}

fn shifted(a: &DMatrix<f64>, lambda: C64) -> DMatrix<C64> {
    let mut m = to_complex(a);
    for i in 0..a.nrows() {
        m[(i, i)] -= lambda;
    }
    m
}

/// Rank of the bordered matrix `[[A - lambda I, B], [C, 0]]`.
fn bordered_rank(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, lambda: C64, rank_tol: Option<f64>) -> usize {
    let n = a.nrows();
    let (m, p) = (b.ncols(), c.nrows());
    let mut big = DMatrix::<C64>::zeros(n + p, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(&shifted(a, lambda));
    big.view_mut((0, n), (n, m)).copy_from(&to_complex(b));
    big.view_mut((n, 0), (p, n)).copy_from(&to_complex(c));
    rank_c(&big, rank_tol)
}

fn check_square(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Shape(format!("state matrix is {}x{}", a.nrows(), a.ncols())));
    }
    Ok(())
}

/// `(A, B)` stabilizable iff `[A - lambda I, B]` has full row rank at every
/// eigenvalue with `Re lambda >= -tol`.
pub fn pbh_stabilizable(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64, rank_tol: Option<f64>) -> Result<RankTest> {
    check_square(a)?;
    if b.nrows() != a.nrows() {
        return Err(Error::Shape(format!("B has {} rows, A has {}", b.nrows(), a.nrows())));
    }
    let n = a.nrows();
    let tested = critical_eigenvalues(a, tol)?;
    let empty = DMatrix::zeros(0, n);
    let witness = tested
        .iter()
        .copied()
        .find(|&z| bordered_rank(a, b, &empty, z, rank_tol) < n);
    Ok(RankTest {
        holds: witness.is_none(),
        witness,
        tested,
    })
}

/// `(A, C)` detectable iff `[C; A - lambda I]` has full column rank at every
/// eigenvalue with `Re lambda >= -tol`.
pub fn pbh_detectable(a: &DMatrix<f64>, c: &DMatrix<f64>, tol: f64, rank_tol: Option<f64>) -> Result<RankTest> {
    check_square(a)?;
    if c.ncols() != a.ncols() {
        return Err(Error::Shape(format!("C has {} columns, A has {}", c.ncols(), a.ncols())));
    }
    let n = a.nrows();
    let tested = critical_eigenvalues(a, tol)?;
    let empty = DMatrix::zeros(n, 0);
    let witness = tested
        .iter()
        .copied()
        .find(|&z| bordered_rank(a, &empty, c, z, rank_tol) < n);
    Ok(RankTest {
        holds: witness.is_none(),
        witness,
        tested,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    Violated,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenBlockReport {
    #[serde(serialize_with = "ser_complex")]
    pub eigenvalue: C64,
    pub algebraic_multiplicity: usize,
    pub geometric_multiplicity: usize,
    /// Every right eigenvector has a non-zero block for every player.
    pub right_ok: bool,
    /// Same for left eigenvectors.
    pub left_ok: bool,
    pub defective: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenBlockCheck {
    pub verdict: Verdict,
    pub eigenvalues: Vec<EigenBlockReport>,
}

/// Do all eigenvectors (left and right) for eigenvalues with
/// `Re lambda >= -tol` touch every player's block?
///
/// For an eigenspace with basis `V`, some eigenvector vanishes on block `i`
/// exactly when the rows of `V` in that block have rank below `dim V`.
/// Defective eigenvalues give an `Indeterminate` verdict.
pub fn check_eigenvector_coverage(local: &GameLocalMatrix, tol: f64) -> Result<EigenBlockCheck> {
    let m = &local.m;
    let scale = m.norm().max(1.0);
    let all = eigenvalues(m)?;
    let mut reports = Vec::new();
    let mut verdict = Verdict::Satisfied;
    for z in critical_eigenvalues(m, tol)? {
        let alg = all.iter().filter(|w| (*w - z).norm() <= CLUSTER_TOL * scale).count();
        let right = null_space_c(&shifted(m, z), 1e-8);
        let left = null_space_c(&shifted(&m.transpose(), z), 1e-8);
        let geo = right.ncols();
        let covers = |basis: &DMatrix<C64>| {
            let g = basis.ncols();
            g > 0
                && local.blocks.iter().all(|r| {
                    let sub = basis.rows(r.start, r.len()).into_owned();
                    let cut = 1e-8 * basis.norm().max(f64::MIN_POSITIVE);
                    rank_c(&sub, Some(cut)) == g
                })
        };
        let right_ok = covers(&right);
        let left_ok = covers(&left);
        let defective = alg > geo;
        if defective {
            if verdict == Verdict::Satisfied {
                verdict = Verdict::Indeterminate;
            }
        } else if !(right_ok && left_ok) {
            verdict = Verdict::Violated;
        }
        reports.push(EigenBlockReport {
            eigenvalue: z,
            algebraic_multiplicity: alg,
            geometric_multiplicity: geo,
            right_ok,
            left_ok,
            defective,
        });
    }
    Ok(EigenBlockCheck {
        verdict,
        eigenvalues: reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DavisonFailure {
    #[serde(serialize_with = "ser_complex")]
    pub eigenvalue: C64,
    /// Players whose inputs are kept.
    pub q: Vec<usize>,
    /// Players whose outputs are kept.
    pub r: Vec<usize>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DavisonReport {
    pub holds: bool,
    pub state_dim: usize,
    pub partitions_checked: usize,
    #[serde(serialize_with = "ser_complex_list")]
    pub eigenvalues_checked: Vec<C64>,
    pub failures: Vec<DavisonFailure>,
}

/// Rank of `[[A - lambda I, B_Q], [C_R, 0]]` for a partition given by `q_mask`
/// (the complement forms `R`).
pub fn davison_rank(plant: &DecentralizedPlant, lambda: C64, q_mask: u64, rank_tol: Option<f64>) -> usize {
    let all = (1u64 << plant.players()) - 1;
    bordered_rank(
        &plant.a,
        &plant.b_subset(q_mask),
        &plant.c_subset(all & !q_mask),
        lambda,
        rank_tol,
    )
}

/// Decentralized fixed-mode test over all `2^n` input/output partitions.
pub fn davison_condition(plant: &DecentralizedPlant, tol: f64, rank_tol: Option<f64>) -> Result<DavisonReport> {
    let n_players = plant.players();
    if n_players >= 63 {
        return Err(Error::Domain("too many players to enumerate partitions".into()));
    }
    let n = plant.state_dim();
    let lambdas = critical_eigenvalues(&plant.a, tol)?;
    let mut failures = Vec::new();
    for mask in 0..(1u64 << n_players) {
        for &z in &lambdas {
            let rank = davison_rank(plant, z, mask, rank_tol);
            if rank < n {
                failures.push(DavisonFailure {
                    eigenvalue: z,
                    q: (0..n_players).filter(|i| mask >> i & 1 == 1).collect(),
                    r: (0..n_players).filter(|i| mask >> i & 1 == 0).collect(),
                    rank,
                });
            }
        }
    }
    Ok(DavisonReport {
        holds: failures.is_empty(),
        state_dim: n,
        partitions_checked: 1 << n_players,
        eigenvalues_checked: lambdas,
        failures,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkovReport {
    /// Frobenius norms of `C A^k B` for `k = 0..=m_max`.
    pub markov_norms: Vec<f64>,
    pub cb_zero: bool,
    pub cab_zero: bool,
    /// Smallest `m >= 2` with `C A^m B != 0`.
    pub first_nonzero_m: Option<usize>,
    /// Algebraic multiplicity of the eigenvalue 0 of `A`, as `n - rank(A^n)`.
    pub zero_multiplicity: usize,
}

impl MarkovReport {
    /// Both large-gain and small-gain instability premises hold.
    pub fn hypotheses_hold(&self) -> bool {
        self.cb_zero && self.cab_zero && self.first_nonzero_m.is_some() && self.zero_multiplicity >= 3
    }
}

/// Markov parameters `C A^k B` and the multiplicity of the zero eigenvalue.
///
/// A parameter counts as zero when its norm is below
/// `1e-10 * ||C|| ||A||^k ||B||`.
pub fn markov_hypotheses(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>, m_max: usize) -> Result<MarkovReport> {
    check_square(a)?;
    if b.nrows() != a.nrows() || c.ncols() != a.ncols() {
        return Err(Error::Shape("B/C incompatible with A".into()));
    }
    if m_max < 2 {
        return Err(Error::Domain("m_max must be at least 2".into()));
    }
    let an = a.norm().max(1.0);
    let base = b.norm() * c.norm();
    let mut norms = Vec::with_capacity(m_max + 1);
    let mut is_zero = Vec::with_capacity(m_max + 1);
    let mut akb = b.clone();
    for k in 0..=m_max {
        let nk = (c * &akb).norm();
        norms.push(nk);
        is_zero.push(nk <= 1e-10 * base * an.powi(k as i32) || base == 0.0);
        akb = a * akb;
    }
    let first_nonzero_m = (2..=m_max).find(|&k| !is_zero[k]);

    let n = a.nrows();
    let mut an_pow = DMatrix::<f64>::identity(n, n);
    for _ in 0..n {
        an_pow = a * an_pow;
        // Keep entries in range; rank is scale-invariant.
        let s = an_pow.norm();
        if s > 0.0 {
            an_pow /= s;
        }
    }
    let zero_multiplicity = n - linalg::rank(&an_pow, Some(1e-9 * an_pow.norm().max(f64::MIN_POSITIVE)));
    Ok(MarkovReport {
        markov_norms: norms,
        cb_zero: is_zero[0],
        cab_zero: is_zero[1],
        first_nonzero_m,
        zero_multiplicity,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub mu: f64,
    #[serde(serialize_with = "ser_complex_list")]
    pub eigenvalues: Vec<C64>,
    pub spectral_abscissa: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    /// Refined bracket: stability flag differs at `lo` and `hi`.
    pub lo: f64,
    pub hi: f64,
    /// Stable below the crossing.
    pub stable_below: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub crossings: Vec<Crossing>,
    pub tolerance: f64,
}

/// Bracket width targeted by crossing refinement.
pub const CROSSING_WIDTH: f64 = 1e-4;

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi >= lo) || count == 0 {
        return Err(Error::Domain(format!("invalid log grid [{lo}, {hi}] x {count}")));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect())
}

/// Default gain grid: 200 log-spaced points on `[1e-2, 1e2]`.
pub fn default_mu_grid() -> Vec<f64> {
    log_grid(1e-2, 1e2, 200).expect("static grid")
}

/// Evaluates `builder(mu)` on the grid, then bisects every stability flip
/// down to a bracket of width [`CROSSING_WIDTH`].
pub fn mu_sweep<F>(builder: F, grid: &[f64], tol: f64) -> Result<SweepResult>
where
    F: Fn(f64) -> Result<DMatrix<f64>> + Sync,
{
    if grid.is_empty() {
        return Err(Error::Domain("empty gain grid".into()));
    }
    if grid.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Domain("gain grid must be positive".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("gain grid must be strictly increasing".into()));
    }
    let eval = |mu: f64| -> Result<SweepPoint> {
        let v = spectral_abscissa(&builder(mu)?, tol)?;
        Ok(SweepPoint {
            mu,
            eigenvalues: v.eigenvalues,
            spectral_abscissa: v.spectral_abscissa,
            stable: v.stable,
        })
    };
    let points = parallel_map(grid, &eval)?;
    let mut crossings = Vec::new();
    for w in points.windows(2) {
        if w[0].stable == w[1].stable {
            continue;
        }
        let stable_below = w[0].stable;
        let (mut lo, mut hi) = (w[0].mu, w[1].mu);
        while hi - lo > CROSSING_WIDTH {
            let mid = 0.5 * (lo + hi);
            if spectral_abscissa(&builder(mid)?, tol)?.stable == stable_below {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        crossings.push(Crossing { lo, hi, stable_below });
    }
    Ok(SweepResult {
        points,
        crossings,
        tolerance: tol,
    })
}

/// Order-preserving map over scoped threads.
fn parallel_map<T, U, F>(items: &[T], f: &F) -> Result<Vec<U>>
where
    T: Sync + Copy,
    U: Send,
    F: Fn(T) -> Result<U> + Sync,
{
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(8);
    if workers <= 1 || items.len() < 16 {
        return items.iter().map(|&t| f(t)).collect();
    }
    let chunk = items.len().div_ceil(workers);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(|&t| f(t)).collect::<Result<Vec<U>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("sweep worker panicked")?);
        }
        Ok(out)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityVerdict {
    /// A real unstable pole lies between the blocking zeros at 0 and
    /// infinity, so no stable compensator can stabilize the plant.
    NotStronglyStabilizable,
    /// The obstruction does not apply; no positive claim is made.
    ParityConditionPassed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityReport {
    pub m12: f64,
    pub m21: f64,
    pub verdict: ParityVerdict,
}

/// Parity-interlacing test for a two-player 2x2 game at its mixed
/// equilibrium: with `m_ij = N^T M_ij N` the plant has poles
/// `-1, -1, +-sqrt(m12 m21)`, so `m12 m21 > 0` puts one real unstable pole
/// between the real blocking zeros.
pub fn parity_test_2x2(game: &PolymatrixGame) -> Result<ParityReport> {
    if game.dims() != [2, 2] {
        return Err(Error::Domain(format!(
            "parity test needs a two-player 2x2 game, got dims {:?}",
            game.dims()
        )));
    }
    let n = TangentBasis::new(2)?;
    let reduce = |i, j| {
        let m = game.pair_or_zero(i, j);
        n.matrix().tr_mul(&(m * n.matrix()))[(0, 0)]
    };
    let (m12, m21) = (reduce(0, 1), reduce(1, 0));
    let scale = game.pairs().map(|(_, m)| m.norm()).fold(1.0, f64::max);
    if m12.abs() <= 1e-12 * scale || m21.abs() <= 1e-12 * scale {
        return Err(Error::Domain(format!(
            "m12 m21 = 0 (m12 = {m12}, m21 = {m21}); the equilibrium is not isolated"
        )));
    }
    let verdict = if m12 * m21 > 0.0 {
        ParityVerdict::NotStronglyStabilizable
    } else {
        ParityVerdict::ParityConditionPassed
    };
    Ok(ParityReport { m12, m21, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustnessReport {
    /// Largest scale verified stable.
    pub stable_delta: f64,
    /// Smallest scale found unstable, if any up to `max_delta`.
    pub unstable_delta: Option<f64>,
    pub nominal_abscissa: f64,
}

/// Perturbation direction: pair matrices `D_ij` added as `M_ij + delta D_ij`.
pub type Direction = Vec<((usize, usize), DMatrix<f64>)>;

/// Probes closed-loop stability of `game + delta * direction` for
/// `delta in [0, max_delta]`: a uniform scan of 200 steps locates the first
/// unstable scale, and bisection narrows the gap to at most `1e-3`.
///
/// The local matrix depends only on `N_i^T M_ij N_j`, so the perturbed
/// linearization is exact even when the equilibrium moves.
pub fn robustness_probe(
    game: &PolymatrixGame,
    specs: &[DynamicsSpec],
    direction: &Direction,
    max_delta: f64,
    tol: f64,
) -> Result<RobustnessReport> {
    if !(max_delta > 0.0) {
        return Err(Error::Domain("max_delta must be positive".into()));
    }
    let comps = gradient_compensators(specs)?;
    let abscissa_at = |delta: f64| -> Result<StabilityVerdict> {
        let mut g = game.clone();
        for ((i, j), d) in direction {
            let m = g.pair_or_zero(*i, *j) + d * delta;
            g.set_pair(*i, *j, m)?;
        }
        let cl = assemble_closed_loop(&GameLocalMatrix::from_game(&g), &comps)?;
        spectral_abscissa(&cl.j, tol)
    };
    let nominal = abscissa_at(0.0)?;
    if !nominal.stable {
        return Err(Error::Domain(format!(
            "nominal closed loop is unstable (abscissa {})",
            nominal.spectral_abscissa
        )));
    }
    const STEPS: usize = 200;
    let mut last_stable = 0.0;
    let mut first_unstable = None;
    for s in 1..=STEPS {
        let d = max_delta * s as f64 / STEPS as f64;
        if abscissa_at(d)?.stable {
            last_stable = d;
        } else {
            first_unstable = Some(d);
            break;
        }
    }
    if let Some(mut hi) = first_unstable {
        let mut lo = last_stable;
        while hi - lo > 1e-3 {
            let mid = 0.5 * (lo + hi);
            if abscissa_at(mid)?.stable {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(RobustnessReport {
            stable_delta: lo,
            unstable_delta: Some(hi),
            nominal_abscissa: nominal.spectral_abscissa,
        });
    }
    Ok(RobustnessReport {
        stable_delta: last_stable,
        unstable_delta: None,
        nominal_abscissa: nominal.spectral_abscissa,
    })
}

/// Sum of the eigenvalues' real parts; equals the trace for real matrices.
pub fn real_part_sum(v: &StabilityVerdict) -> f64 {
    v.eigenvalues.iter().map(|z| z.re).sum()
}

/// Largest deviation from conjugate symmetry of a real matrix's spectrum.
pub fn conjugate_pairing_error(eigs: &[C64]) -> f64 {
    eigs.iter()
        .map(|z| {
            eigs.iter()
                .map(|w| (w - z.conj()).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}
