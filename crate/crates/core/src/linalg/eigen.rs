//! Dense symmetric eigendecomposition.
//!
//! Householder reduction to tridiagonal form followed by the implicit QL
//! iteration with Wilkinson-style shifts (the classical tred2/tql2 pair).
//! Cost is O(n³) with a small constant, which keeps the 512×512 Laplacian
//! pencils of the lower-bound module well under a second.

use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Per-eigenvalue QL iteration budget.
pub const MAX_QL_ITERATIONS: usize = 128;

/// Eigenpairs of a symmetric matrix, eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub eigenvectors: Matrix,
}

impl SymEigen {
    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        let n = self.eigenvectors.rows();
        (0..n).map(|i| self.eigenvectors[(i, k)]).collect()
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.eigenvectors.rows();
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += self.eigenvectors[(i, k)] * self.eigenvalues[k] * self.eigenvectors[(j, k)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    if !m.is_square() {
        return Err(Error::NotSquare { rows: m.rows(), row: 0, cols: m.cols() });
    }
    for (idx, v) in m.as_slice().iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite { i: idx / m.cols(), j: idx % m.cols() });
        }
    }
    let (diff, i, j) = m.asymmetry();
    if diff > 1e-12 * m.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { i, j, diff });
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix.
pub fn sym_eigen(m: &Matrix) -> Result<SymEigen> {
    check_symmetric(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(SymEigen { eigenvalues: vec![], eigenvectors: Matrix::zeros(0, 0) });
    }
    // symmetrize exactly so rounding asymmetry does not leak into the result
    let mut v: Vec<f64> = Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])).as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e, true);
    // QL works on eigenvector rows: w[k][i] = v[i][k]
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            w[k * n + i] = v[i * n + k];
        }
    }
    tql2(n, &mut w, &mut d, &mut e, true)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    let eigenvalues = order.iter().map(|&k| d[k]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, c| w[order[c] * n + i]);
    Ok(SymEigen { eigenvalues, eigenvectors })
}

/// Eigenvalues only, sorted descending.
pub fn sym_eigenvalues(m: &Matrix) -> Result<Vec<f64>> {
    check_symmetric(m)?;
    let n = m.rows();
    if n == 0 {
        return Ok(vec![]);
    }
    let mut v: Vec<f64> = Matrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])).as_slice().to_vec();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e, false);
    tql2(n, &mut [], &mut d, &mut e, false)?;
    d.sort_by(|a, b| b.total_cmp(a));
    Ok(d)
}

fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64], vectors: bool) {
    let at = |i: usize, j: usize| i * n + j;
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
                v[at(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[at(k, j)] * d[k];
                    e[k] += v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    if !vectors {
        for j in 0..n {
            d[j] = v[at(j, j)];
        }
        e[0] = 0.0;
        return;
    }
    for i in 0..n - 1 {
        v[at(n - 1, i)] = v[at(i, i)];
        v[at(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[at(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[at(k, i + 1)] * v[at(k, j)];
                }
                for k in 0..=i {
                    v[at(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[at(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[at(n - 1, j)];
        v[at(n - 1, j)] = 0.0;
    }
    v[at(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL on the tridiagonal `(d, e)`; `w` holds eigenvectors as rows.
fn tql2(n: usize, w: &mut [f64], d: &mut [f64], e: &mut [f64], vectors: bool) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::Convergence { iterations: MAX_QL_ITERATIONS });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
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
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if !vectors {
                        continue;
                    }
                    let (lo, hi) = w.split_at_mut((i + 1) * n);
                    let row_i = &mut lo[i * n..];
                    let row_i1 = &mut hi[..n];
                    for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn values_only_path_agrees() {
        for (n, seed) in [(1, 0), (2, 1), (7, 2), (40, 3)] {
            let m = random_symmetric(n, seed);
            let full = sym_eigen(&m).unwrap().eigenvalues;
            let vals = sym_eigenvalues(&m).unwrap();
            for (a, b) in full.iter().zip(&vals) {
                assert!((a - b).abs() < 1e-12, "{a} {b}");
            }
        }
    }

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = crate::rng::stream(seed, "eigen-test", 0);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    #[test]
    fn path_laplacian() {
        let m = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let e = sym_eigen(&m).unwrap();
        assert!((e.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert!(e.eigenvalues[1].abs() < 1e-14);
    }

    #[test]
    fn identity_spectrum() {
        let e = sym_eigen(&Matrix::identity(7)).unwrap();
        assert!(e.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn one_by_one_and_empty() {
        let e = sym_eigen(&Matrix::from_rows(&[vec![-3.5]]).unwrap()).unwrap();
        assert_eq!(e.eigenvalues, vec![-3.5]);
        assert!(sym_eigen(&Matrix::zeros(0, 0)).unwrap().eigenvalues.is_empty());
    }

    #[test]
    fn random_reconstruction_and_orthonormality() {
        for (n, seed) in [(10, 1), (10, 2), (37, 3)] {
            let m = random_symmetric(n, seed);
            let e = sym_eigen(&m).unwrap();
            let r = e.reconstruct();
            let res = r.lin_comb(1.0, &m, -1.0).max_abs();
            assert!(res <= 1e-9 * m.max_abs(), "residual {res}");
            let vtv = e.eigenvectors.transpose().matmul(&e.eigenvectors);
            let orth = vtv.lin_comb(1.0, &Matrix::identity(n), -1.0).max_abs();
            assert!(orth <= 1e-10, "orthonormality {orth}");
            let sum: f64 = e.eigenvalues.iter().sum();
            assert!((sum - m.trace()).abs() <= 1e-9 * m.trace().abs().max(1.0));
            assert!(e.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rejects_asymmetric() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(sym_eigen(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn repeated_eigenvalues() {
        // K_{3,3} Laplacian: spectrum {6, 3 (x4), 0}
        let n = 6;
        let m = Matrix::from_fn(n, n, |i, j| {
            if i == j {
                3.0
            } else if (i < 3) != (j < 3) {
                -1.0
            } else {
                0.0
            }
        });
        let e = sym_eigen(&m).unwrap();
        let expect = [6.0, 3.0, 3.0, 3.0, 3.0, 0.0];
        for (a, b) in e.eigenvalues.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
