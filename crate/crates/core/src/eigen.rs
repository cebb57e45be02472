//! Dense Hermitian eigensolver: Householder reduction to a Hermitian
//! tridiagonal matrix, a diagonal phase change to a real symmetric one, and
//! implicit QL with Wilkinson-type shifts.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_QL_ITERATIONS: usize = 64;

/// Eigenvalues in ascending order with the matching orthonormal eigenvectors
/// as columns.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

/// Full spectral decomposition of a Hermitian matrix. Only the lower
/// triangle and the real part of the diagonal are trusted.
///
/// Each eigenvector is scaled so that its first coordinate with modulus
/// above `1e-10` of the column maximum is real and positive. Eigenvalues are
/// sorted ascending; within a cluster of numerically equal eigenvalues the
/// columns are ordered by the index of that first coordinate.
pub fn hermitian_eigen(a: &DMatrix<Complex64>) -> Result<Eigen> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "matrix must be square");
    if n == 0 {
        return Ok(Eigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        });
    }
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);

    let (diag, sub, q) = tridiagonalize(a);

    // Phase change D with D* T D real: δ₀ = 1, δ_{i+1} = δ_i · sub_i/|sub_i|.
    let mut delta = vec![Complex64::new(1.0, 0.0); n];
    let mut off = vec![0.0; n];
    for i in 0..n - 1 {
        let r = sub[i].norm();
        off[i] = r;
        delta[i + 1] = if r > 0.0 {
            delta[i] * (sub[i] / r)
        } else {
            delta[i]
        };
    }

    let mut d = diag;
    let mut z = DMatrix::<f64>::identity(n, n);
    tql2(&mut d, &mut off, &mut z)?;

    // vectors = Q · D · Z
    let qd = DMatrix::from_fn(n, n, |i, j| q[(i, j)] * delta[j]);
    let zc = z.map(|x| Complex64::new(x, 0.0));
    let mut vectors = qd * zc;

    let leads: Vec<usize> = (0..n).map(|j| normalize_phase(&mut vectors, j)).collect();

    let tol = 1e-12 * (1.0 + scale);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    // Reorder clusters of equal eigenvalues by leading coordinate.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && d[order[end]] - d[order[end - 1]] <= tol {
            end += 1;
        }
        order[start..end].sort_by_key(|&c| (leads[c], c));
        start = end;
    }

    let values = order.iter().map(|&c| d[c]).collect();
    let vectors = DMatrix::from_fn(n, n, |i, j| vectors[(i, order[j])]);
    Ok(Eigen { values, vectors })
}

fn normalize_phase(v: &mut DMatrix<Complex64>, col: usize) -> usize {
    let n = v.nrows();
    let max = (0..n).map(|i| v[(i, col)].norm()).fold(0.0, f64::max);
    let lead = (0..n)
        .find(|&i| v[(i, col)].norm() > 1e-10 * max)
        .unwrap_or(0);
    let x = v[(lead, col)];
    if x.norm() > 0.0 {
        let ph = x.conj() / x.norm();
        for i in 0..n {
            v[(i, col)] *= ph;
        }
        v[(lead, col)] = Complex64::new(v[(lead, col)].re, 0.0);
    }
    lead
}

/// Householder reduction `A = Q T Q*`; returns the real diagonal of `T`,
/// its complex subdiagonal and `Q`.
fn tridiagonalize(a: &DMatrix<Complex64>) -> (Vec<f64>, Vec<Complex64>, DMatrix<Complex64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut q = DMatrix::<Complex64>::identity(n, n);
    let zero = Complex64::new(0.0, 0.0);
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];

    for j in 0..n.saturating_sub(2) {
        let tail: f64 = ((j + 2)..n).map(|i| a[(i, j)].norm_sqr()).sum();
        if tail == 0.0 {
            continue;
        }
        let x0 = a[(j + 1, j)];
        let norm = (tail + x0.norm_sqr()).sqrt();
        let phase = if x0.norm() > 0.0 {
            x0 / x0.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let alpha = -phase * norm;
        v.iter_mut().for_each(|x| *x = zero);
        v[j + 1] = x0 - alpha;
        for i in (j + 2)..n {
            v[i] = a[(i, j)];
        }
        let vnorm2: f64 = v[j + 1..].iter().map(|x| x.norm_sqr()).sum();
        let tau = 2.0 / vnorm2;

        // p = τ A v
        for (i, pi) in p.iter_mut().enumerate() {
            let mut acc = zero;
            for l in (j + 1)..n {
                acc += a[(i, l)] * v[l];
            }
            *pi = acc * tau;
        }
        // K = τ/2 · v*p (real for Hermitian A)
        let vp: Complex64 = ((j + 1)..n).map(|l| v[l].conj() * p[l]).sum();
        let kk = 0.5 * tau * vp.re;
        let w: Vec<Complex64> = p.iter().zip(&v).map(|(pi, vi)| pi - vi * kk).collect();
        // A ← A − v w* − w v*
        for c in 0..n {
            let (wc, vc) = (w[c].conj(), v[c].conj());
            for r in 0..n {
                if v[r] != zero || w[r] != zero {
                    a[(r, c)] -= v[r] * wc + w[r] * vc;
                }
            }
        }
        // Q ← Q (I − τ v v*)
        for r in 0..n {
            let mut qv = zero;
            for l in (j + 1)..n {
                qv += q[(r, l)] * v[l];
            }
            let qv = qv * tau;
            for l in (j + 1)..n {
                q[(r, l)] -= qv * v[l].conj();
            }
        }
    }

    let diag = (0..n).map(|i| a[(i, i)].re).collect();
    let sub = (0..n.saturating_sub(1)).map(|i| a[(i + 1, i)]).collect();
    (diag, sub, q)
}

/// Implicit QL on the symmetric tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i]` couples `i` and `i+1`, `e[n-1]` unused).
/// Eigenvectors are accumulated into `z`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut DMatrix<f64>) -> Result<()> {
    let n = d.len();
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    let off = e.iter().map(|x| x * x).sum::<f64>().sqrt();
                    return Err(Error::NoConvergence {
                        n,
                        off_diagonal: off,
                        iterations: iter,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let zh = z[(k, i + 1)];
                        z[(k, i + 1)] = s * z[(k, i)] + c * zh;
                        z[(k, i)] = c * z[(k, i)] - s * zh;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// `max_j ‖A v_j − λ_j v_j‖₂`.
pub fn residual(a: &DMatrix<Complex64>, eig: &Eigen) -> f64 {
    let av = a * &eig.vectors;
    (0..a.nrows())
        .map(|j| {
            (0..a.nrows())
                .map(|i| (av[(i, j)] - eig.vectors[(i, j)] * eig.values[j]).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// `‖V*V − I‖_max`.
pub fn orthonormality_defect(v: &DMatrix<Complex64>) -> f64 {
    let g = v.adjoint() * v;
    let n = g.nrows();
    (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let target = if i == j { 1.0 } else { 0.0 };
            (g[(i, j)] - target).norm()
        })
        .fold(0.0, f64::max)
}

/// Spectral norm bound `‖A‖₂ ≤ ‖A‖_F`, used for relative tolerances.
pub fn frobenius(a: &DMatrix<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
