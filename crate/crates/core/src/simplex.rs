//! Probability-simplex geometry: Euclidean projection and orthonormal
//! tangent bases for local coordinates around interior points.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::{Error, Result};

/// Euclidean projection onto `{s : s >= 0, sum(s) = 1}`.
///
/// Sort-and-threshold: find the largest `rho` with
/// `u_rho - (sum_{j<=rho} u_j - 1) / rho > 0` over the descending sort `u`,
/// then clip `x - theta` at zero.
pub fn project_to_simplex(x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.is_empty() {
        return Err(Error::Domain("cannot project an empty vector".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("projection input is not finite".into()));
    }
    Ok(project_unchecked(x))
}

pub(crate) fn project_unchecked(x: &DVector<f64>) -> DVector<f64> {
    let mut u: Vec<f64> = x.iter().copied().collect();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    x.map(|v| (v - theta).max(0.0))
}

/// Orthonormal basis of the tangent space `{d : 1^T d = 0}` of the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TangentBasis {
    k: usize,
    n: DMatrix<f64>,
}

impl TangentBasis {
    /// Helmert-style basis: column `j` (1-based) is
    /// `(1, ..., 1, -j, 0, ..., 0) / sqrt(j (j + 1))` with `j` leading ones.
    /// For `k = 2` this is `(1/sqrt 2, -1/sqrt 2)`.
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::Domain(format!("tangent basis needs k >= 2, got {k}")));
        }
        let mut n = DMatrix::zeros(k, k - 1);
        for j in 1..k {
            let scale = 1.0 / ((j * (j + 1)) as f64).sqrt();
            for r in 0..j {
                n[(r, j - 1)] = scale;
            }
            n[(j, j - 1)] = -(j as f64) * scale;
        }
        Ok(Self { k, n })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Tangent dimension `k - 1`.
    pub fn dim(&self) -> usize {
        self.k - 1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.n
    }

    /// `N^T v` for a length-`k` vector.
    pub fn reduce(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.k {
            return Err(Error::Shape(format!("expected length {}, got {}", self.k, v.len())));
        }
        Ok(self.n.tr_mul(v))
    }

    /// `N w` for a length-`k - 1` vector.
    pub fn lift(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        if w.len() != self.k - 1 {
            return Err(Error::Shape(format!(
                "expected length {}, got {}",
                self.k - 1,
                w.len()
            )));
        }
        Ok(&self.n * w)
    }
}

/// `w = N^T (x - x*)`.
pub fn to_local(x: &DVector<f64>, x_star: &DVector<f64>, basis: &TangentBasis) -> Result<DVector<f64>> {
    if x.len() != x_star.len() {
        return Err(Error::Shape(format!(
            "point has length {}, reference has length {}",
            x.len(),
            x_star.len()
        )));
    }
    basis.reduce(&(x - x_star))
}

/// `x = x* + N w`.
pub fn from_local(w: &DVector<f64>, x_star: &DVector<f64>, basis: &TangentBasis) -> Result<DVector<f64>> {
    if x_star.len() != basis.k() {
        return Err(Error::Shape(format!(
            "reference has length {}, basis expects {}",
            x_star.len(),
            basis.k()
        )));
    }
    Ok(x_star + basis.lift(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::SQRT_2;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_to_simplex(&v(&[0.5, 0.5])).unwrap(), v(&[0.5, 0.5]));
        let p = project_to_simplex(&v(&[1.5, 0.5])).unwrap();
        assert!((p - v(&[1.0, 0.0])).norm() < 1e-15);
        let p = project_to_simplex(&v(&[2.0, -1.0, 0.0])).unwrap();
        assert!((p - v(&[1.0, 0.0, 0.0])).norm() < 1e-15);
        assert_eq!(project_to_simplex(&v(&[7.0])).unwrap(), v(&[1.0]));
    }

    #[test]
    fn projection_rejects_empty() {
        assert!(matches!(
            project_to_simplex(&DVector::zeros(0)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn basis_k2_matches_reference() {
        let b = TangentBasis::new(2).unwrap();
        assert!((b.matrix()[(0, 0)] - 1.0 / SQRT_2).abs() < 1e-15);
        assert!((b.matrix()[(1, 0)] + 1.0 / SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn basis_rejects_k1() {
        assert!(TangentBasis::new(1).is_err());
    }

    #[test]
    fn basis_invariants() {
        for k in 2..8 {
            let b = TangentBasis::new(k).unwrap();
            let n = b.matrix();
            let ones = DVector::from_element(k, 1.0);
            assert!(n.tr_mul(&ones).norm() < 1e-12, "k={k}");
            let gram = n.tr_mul(n);
            assert!((gram - DMatrix::identity(k - 1, k - 1)).norm() < 1e-12, "k={k}");
            for c in 0..k - 1 {
                let first = n.column(c).iter().copied().find(|x| x.abs() > 0.0).unwrap();
                assert!(first > 0.0);
            }
        }
    }

    #[test]
    fn local_coordinates() {
        let b = TangentBasis::new(2).unwrap();
        let xs = v(&[0.5, 0.5]);
        let w = to_local(&v(&[0.6, 0.4]), &xs, &b).unwrap();
        assert!((w[0] - 0.2 / SQRT_2).abs() < 1e-15);
        assert!((w[0] - 0.14142135623730950).abs() < 1e-12);
        let x = from_local(&v(&[0.1 * SQRT_2]), &xs, &b).unwrap();
        assert!((x - v(&[0.6, 0.4])).norm() < 1e-15);
        assert_eq!(to_local(&xs, &xs, &b).unwrap(), v(&[0.0]));
        assert_eq!(from_local(&v(&[0.0]), &xs, &b).unwrap(), xs);
        assert!(to_local(&v(&[1.0, 0.0, 0.0]), &xs, &b).is_err());
    }

    #[test]
    fn local_round_trip_k4() {
        let b = TangentBasis::new(4).unwrap();
        let xs = v(&[0.25; 4]);
        let x = v(&[0.1, 0.2, 0.3, 0.4]);
        let back = from_local(&to_local(&x, &xs, &b).unwrap(), &xs, &b).unwrap();
        assert!((back - &x).norm() < 1e-15);
        let any = from_local(&v(&[3.0, -2.0, 0.7]), &xs, &b).unwrap();
        assert!((any.sum() - 1.0).abs() < 1e-12);
    }
}
