//! Dense linear-algebra helpers shared by the analysis modules.
//!
//! Eigenvalues come from balancing, Householder reduction to Hessenberg form
//! and Francis double-shift QR with exceptional shifts; ranks and null
//! spaces come from the SVD.

use nalgebra::{Complex, DMatrix, DVector, Hessenberg};

use crate::{Error, Result};

pub type C64 = Complex<f64>;

/// QR sweeps allowed per deflated eigenvalue.
const QR_MAX_ITER: usize = 60;

/// All eigenvalues of a real square matrix, sorted by descending real part
/// and then by descending imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::Shape(format!(
            "eigenvalues of a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix has non-finite entries".into()));
    }
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut a = m.clone();
    balance(&mut a);
    let h = Hessenberg::new(a).h();
    let mut eigs = hessenberg_qr(h)?;
    sort_eigenvalues(&mut eigs);
    Ok(eigs)
}

/// Diagonal similarity by powers of two that evens out row and column
/// norms (Parlett and Reinsch).
fn balance(a: &mut DMatrix<f64>) {
    const RADIX: f64 = 2.0;
    let n = a.nrows();
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let mut g = r / RADIX;
            let mut f = 1.0;
            let s = c + r;
            while c < g {
                f *= RADIX;
                c *= sqrdx;
            }
            g = r * RADIX;
            while c > g {
                f /= RADIX;
                c /= sqrdx;
            }
            if (c + r) / f < 0.95 * s {
                done = false;
                g = 1.0 / f;
                for j in 0..n {
                    a[(i, j)] *= g;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
}

/// Eigenvalues of an upper Hessenberg matrix by implicit double-shift QR.
fn hessenberg_qr(mut a: DMatrix<f64>) -> Result<Vec<C64>> {
    let n = a.nrows();
    let eps = f64::EPSILON;
    let mut anorm = 0.0;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[(i, j)].abs();
        }
    }
    let mut wr = vec![C64::new(0.0, 0.0); n];
    let mut nn = n as isize - 1;
    let mut t = 0.0;
    let mut its = 0;
    while nn >= 0 {
        let nu = nn as usize;
        let mut l = 0;
        for ll in (1..=nu).rev() {
            let mut s = a[(ll - 1, ll - 1)].abs() + a[(ll, ll)].abs();
            if s == 0.0 {
                s = anorm;
            }
            if a[(ll, ll - 1)].abs() <= eps * s {
                a[(ll, ll - 1)] = 0.0;
                l = ll;
                break;
            }
        }
        let mut x = a[(nu, nu)];
        if l == nu {
            wr[nu] = C64::new(x + t, 0.0);
            nn -= 1;
            its = 0;
            continue;
        }
        let mut y = a[(nu - 1, nu - 1)];
        let mut w = a[(nu, nu - 1)] * a[(nu - 1, nu)];
        if l == nu - 1 {
            let p = 0.5 * (y - x);
            let q = p * p + w;
            let z = q.abs().sqrt();
            x += t;
            if q >= 0.0 {
                let z = p + z.copysign(p);
                wr[nu - 1] = C64::new(x + z, 0.0);
                wr[nu] = if z != 0.0 { C64::new(x - w / z, 0.0) } else { C64::new(x + z, 0.0) };
            } else {
                wr[nu] = C64::new(x + p, -z);
                wr[nu - 1] = C64::new(x + p, z);
            }
            nn -= 2;
            its = 0;
            continue;
        }
        if its == QR_MAX_ITER {
            return Err(Error::Numerical(format!("QR iteration did not converge (n = {n})")));
        }
        if its > 0 && its % 10 == 0 {
            t += x;
            for i in 0..=nu {
                a[(i, i)] -= x;
            }
            let s = a[(nu, nu - 1)].abs() + a[(nu - 1, nu - 2)].abs();
            x = 0.75 * s;
            y = x;
            w = -0.4375 * s * s;
        }
        its += 1;
        let (mut p, mut q, mut r);
        let mut m = nu - 2;
        loop {
            let z = a[(m, m)];
            let rr = x - z;
            let ss = y - z;
            p = (rr * ss - w) / a[(m + 1, m)] + a[(m, m + 1)];
            q = a[(m + 1, m + 1)] - z - rr - ss;
            r = a[(m + 2, m + 1)];
            let s = p.abs() + q.abs() + r.abs();
            p /= s;
            q /= s;
            r /= s;
            if m == l {
                break;
            }
            let u = a[(m, m - 1)].abs() * (q.abs() + r.abs());
            let v = p.abs() * (a[(m - 1, m - 1)].abs() + z.abs() + a[(m + 1, m + 1)].abs());
            if u <= eps * v {
                break;
            }
            m -= 1;
        }
        for i in m..nu - 1 {
            a[(i + 2, i)] = 0.0;
            if i != m {
                a[(i + 2, i - 1)] = 0.0;
            }
        }
        for k in m..nu {
            if k != m {
                p = a[(k, k - 1)];
                q = a[(k + 1, k - 1)];
                r = if k + 1 != nu { a[(k + 2, k - 1)] } else { 0.0 };
                x = p.abs() + q.abs() + r.abs();
                if x != 0.0 {
                    p /= x;
                    q /= x;
                    r /= x;
                }
            }
            let s = (p * p + q * q + r * r).sqrt().copysign(p);
            if s == 0.0 {
                continue;
            }
            if k == m {
                if l != m {
                    a[(k, k - 1)] = -a[(k, k - 1)];
                }
            } else {
                a[(k, k - 1)] = -s * x;
            }
            p += s;
            x = p / s;
            y = q / s;
            let z = r / s;
            q /= p;
            r /= p;
            for j in k..=nu {
                let mut pp = a[(k, j)] + q * a[(k + 1, j)];
                if k + 1 != nu {
                    pp += r * a[(k + 2, j)];
                    a[(k + 2, j)] -= pp * z;
                }
                a[(k + 1, j)] -= pp * y;
                a[(k, j)] -= pp * x;
            }
            let mmin = nu.min(k + 3);
            for i in l..=mmin {
                let mut pp = x * a[(i, k)] + y * a[(i, k + 1)];
                if k + 1 != nu {
                    pp += z * a[(i, k + 2)];
                    a[(i, k + 2)] -= pp * r;
                }
                a[(i, k + 1)] -= pp * q;
                a[(i, k)] -= pp;
            }
        }
    }
    Ok(wr)
}

pub(crate) fn sort_eigenvalues(eigs: &mut [C64]) {
    eigs.sort_by(|a, b| {
        b.re.partial_cmp(&a.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

/// Largest real part over the spectrum; `-inf` for an empty matrix.
pub fn spectral_abscissa(eigs: &[C64]) -> f64 {
    eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Default singular-value cutoff: `max(rows, cols) * eps * sigma_max`.
pub fn default_rank_tol(sigma_max: f64, rows: usize, cols: usize) -> f64 {
    rows.max(cols) as f64 * f64::EPSILON * sigma_max
}

/// Singular values of a complex matrix, descending.
pub fn singular_values_c(m: &DMatrix<C64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Numerical rank with an absolute cutoff, or the default relative cutoff
/// when `tol` is `None`.
pub fn rank_c(m: &DMatrix<C64>, tol: Option<f64>) -> usize {
    let s = singular_values_c(m);
    let Some(&smax) = s.first() else { return 0 };
    let cut = tol.unwrap_or_else(|| default_rank_tol(smax, m.nrows(), m.ncols()));
    s.iter().filter(|&&v| v > cut).count()
}

pub fn rank(m: &DMatrix<f64>, tol: Option<f64>) -> usize {
    rank_c(&to_complex(m), tol)
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|v| C64::new(v, 0.0))
}

/// Orthonormal basis (as columns) of the numerical null space of `m`.
/// Singular values at or below `rel_tol * sigma_max` count as zero.
pub fn null_space_c(m: &DMatrix<C64>, rel_tol: f64) -> DMatrix<C64> {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to at least square so the SVD returns a full set of right vectors.
    let padded = if rows < cols {
        let mut p = DMatrix::<C64>::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = rel_tol * smax.max(f64::MIN_POSITIVE);
    let idx: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| s <= cut)
        .map(|(i, _)| i)
        .collect();
    let mut basis = DMatrix::<C64>::zeros(cols, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        for r in 0..cols {
            basis[(r, c)] = v_t[(i, r)].conj();
        }
    }
    basis
}

/// Block-diagonal assembly; empty blocks are skipped.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// `P M P^T` where row `a` of the result is row `perm[a]` of `m`.
pub fn permute_symmetric(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    DMatrix::from_fn(n, n, |a, b| m[(perm[a], perm[b])])
}

/// Frobenius norm of the residual divided by `max(1, |a|)`.
pub fn rel_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / a.norm().max(1.0)
}

pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
