//! Classical multidimensional scaling.

use super::cloud::PointCloud;
use super::eigen::sym_eigen;
use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::metric::FiniteMetricSpace;

/// Default relative eigenvalue cutoff (times the largest Gram eigenvalue).
pub const DEFAULT_MDS_TOL: f64 = 1e-9;

/// `−½ · J · D² · J` with `J = I − 11ᵀ/n`.
pub fn centered_gram(x: &FiniteMetricSpace) -> Matrix {
    let n = x.len();
    let sq = Matrix::from_fn(n, n, |i, j| x.d(i, j) * x.d(i, j));
    let row_mean: Vec<f64> = (0..n).map(|i| sq.row(i).iter().sum::<f64>() / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    Matrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row_mean[i] - row_mean[j] + grand))
}

/// Coordinates from the positive part of the Gram spectrum.
fn coordinates(n: usize, eigenvalues: &[f64], vectors: &Matrix, cutoff: f64) -> PointCloud {
    let keep: Vec<usize> = (0..n).filter(|&k| eigenvalues[k] > cutoff).collect();
    let mut cloud = PointCloud::zeros(n, keep.len());
    for i in 0..n {
        let p = cloud.point_mut(i);
        for (c, &k) in keep.iter().enumerate() {
            p[c] = vectors[(i, k)] * eigenvalues[k].sqrt();
        }
    }
    cloud
}

/// Isometric Euclidean coordinates for `x`, or `NotEuclidean` with the most
/// negative Gram eigenvalue. `tol` is relative to the largest eigenvalue.
pub fn mds_isometric_embed(x: &FiniteMetricSpace, tol: f64) -> Result<PointCloud> {
    let n = x.len();
    if n == 1 {
        return Ok(PointCloud::empty_dim(1));
    }
    let eig = sym_eigen(&centered_gram(x))?;
    let cutoff = tol * eig.max_eigenvalue().max(0.0);
    let min = eig.min_eigenvalue();
    if min < -cutoff {
        return Err(Error::NotEuclidean { min_eigenvalue: min });
    }
    Ok(coordinates(n, &eig.eigenvalues, &eig.eigenvectors, cutoff))
}

/// MDS with negative eigenvalues clipped to zero; never fails on a valid space.
pub fn mds_best_effort(x: &FiniteMetricSpace) -> Result<PointCloud> {
    let n = x.len();
    if n == 1 {
        return Ok(PointCloud::empty_dim(1));
    }
    let eig = sym_eigen(&centered_gram(x))?;
    let cutoff = DEFAULT_MDS_TOL * eig.max_eigenvalue().max(0.0);
    Ok(coordinates(n, &eig.eigenvalues, &eig.eigenvectors, cutoff))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{distortion_of, validate_metric};

    fn space(n: usize, f: impl Fn(usize, usize) -> f64) -> FiniteMetricSpace {
        validate_metric(&Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { f(i, j) })).unwrap()
    }

    #[test]
    fn simplex_embeds_in_n_minus_one() {
        for n in [2, 3, 5, 9] {
            let x = space(n, |_, _| 2.0);
            let c = mds_isometric_embed(&x, DEFAULT_MDS_TOL).unwrap();
            assert_eq!(c.dim(), n - 1);
            for i in 0..n {
                for j in (i + 1)..n {
                    assert!((c.distance(i, j) - 2.0).abs() < 2e-8);
                }
            }
        }
    }

    #[test]
    fn two_points() {
        let x = space(2, |_, _| 5.0);
        let c = mds_isometric_embed(&x, DEFAULT_MDS_TOL).unwrap();
        assert_eq!(c.dim(), 1);
        assert!((c.distance(0, 1) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn four_cycle_is_not_euclidean() {
        let x = space(4, |i, j| if (i + j) % 2 == 0 { 2.0 } else { 1.0 });
        let err = mds_isometric_embed(&x, DEFAULT_MDS_TOL).unwrap_err();
        let Error::NotEuclidean { min_eigenvalue } = err else { panic!("{err:?}") };
        // oracle: the centered Gram matrix's spectrum computed independently
        let g = centered_gram(&x);
        let direct = crate::linalg::sym_eigen(&g).unwrap().min_eigenvalue();
        assert!(min_eigenvalue < 0.0);
        assert!((min_eigenvalue - direct).abs() < 1e-12);
        // the clipped fallback still produces finite coordinates
        let c = mds_best_effort(&x).unwrap();
        assert!(distortion_of(&x, &c, None).unwrap().distortion > 1.0);
    }

    #[test]
    fn equilateral_triangle_roundtrip() {
        let x = space(3, |_, _| 1.0);
        let c = mds_isometric_embed(&x, DEFAULT_MDS_TOL).unwrap();
        let r = distortion_of(&x, &c, None).unwrap();
        assert!((r.distortion - 1.0).abs() < 1e-9);
    }
}
