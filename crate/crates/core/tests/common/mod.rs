#![allow(dead_code)]

use std::path::{Path, PathBuf};

use gradplay::dynamics::{Compensator, PlayerState};
use gradplay::{PolymatrixGame, StrategyProfile, TangentBasis};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn data_path(name: &str) -> PathBuf {
    manifest_dir().join("data").join(name)
}

pub fn data(name: &str) -> String {
    std::fs::read_to_string(data_path(name)).unwrap()
}

/// Euclidean projection onto the simplex by enumerating supports: for each
/// support S the KKT point is `y_S - tau` with `tau` fixing the sum, and
/// the projection is the closest feasible one.
pub fn projection_oracle(y: &DVector<f64>) -> DVector<f64> {
    let k = y.len();
    assert!(k <= 12);
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        let tau = (idx.iter().map(|&i| y[i]).sum::<f64>() - 1.0) / idx.len() as f64;
        let mut x = DVector::zeros(k);
        let mut feasible = true;
        for &i in &idx {
            x[i] = y[i] - tau;
            if x[i] < -1e-14 {
                feasible = false;
            }
        }
        if !feasible {
            continue;
        }
        let d = (&x - y).norm_squared();
        if best.as_ref().map_or(true, |(b, _)| d < *b) {
            best = Some((d, x));
        }
    }
    best.unwrap().1
}

/// Random polymatrix game with a planted completely mixed equilibrium.
///
/// Pair matrices are uniform on [-1, 1]; then each player's link to the
/// next player is corrected by a rank-one term so that the payoff vector
/// at the planted profile is constant.
pub fn random_game_with_mixed_ne(rng: &mut ChaCha8Rng) -> (PolymatrixGame, StrategyProfile) {
    let n = rng.gen_range(2..=4);
    let dims: Vec<usize> = (0..n).map(|_| rng.gen_range(2..=4)).collect();
    let xs: Vec<DVector<f64>> = dims
        .iter()
        .map(|&k| {
            let v = DVector::from_fn(k, |_, _| rng.gen_range(0.2..1.0));
            let s = v.sum();
            v / s
        })
        .collect();
    let mut g = PolymatrixGame::new(dims.clone()).unwrap();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let forced = j == (i + 1) % n;
            if forced || rng.gen_bool(0.6) {
                let m = DMatrix::from_fn(dims[i], dims[j], |_, _| rng.gen_range(-1.0..1.0));
                g.set_pair(i, j, m).unwrap();
            }
        }
    }
    for i in 0..n {
        let mut p = DVector::zeros(dims[i]);
        for j in 0..n {
            if let Some(m) = g.pair(i, j) {
                p += m * &xs[j];
            }
        }
        let level = p.mean();
        let j = (i + 1) % n;
        let fix = (DVector::from_element(dims[i], level) - p) * xs[j].transpose() / xs[j].norm_squared();
        let m = g.pair(i, j).unwrap() + fix;
        g.set_pair(i, j, m).unwrap();
    }
    (g, StrategyProfile::new_lenient(xs, 1e-12).unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `phi = N (G xi + H (N^T p - v))` computed from the definition.
pub fn phi(comp: &Compensator, s: &PlayerState, p: &DVector<f64>) -> DVector<f64> {
    let b = TangentBasis::new(p.len()).unwrap();
    let n = b.matrix();
    n * (&comp.g * &s.xi + &comp.h * (n.transpose() * p - &s.v))
}

pub fn validate(schema: &str, value: &serde_json::Value) -> Result<(), String> {
    let path = manifest_dir().join("schemas").join(schema);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let schema: serde_json::Value = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let v = jsonschema::validator_for(&schema).map_err(|e| e.to_string())?;
    let errors: Vec<String> = v.iter_errors(value).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(errors.join("; "))
    }
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
