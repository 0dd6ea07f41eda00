//! Library results checked against slow, independent reference computations.

use metric_union::linalg::{mds_isometric_embed, sym_eigen, sym_eigenvalues, Matrix};
use metric_union::lower_bound::{draw_split, laplacian, measure_delta, median_delta, sandwich_holds, BipartiteSplit, DELTA_MARGIN};
use metric_union::metric::{distortion_of, validate_metric};
use metric_union::rng::stream;
use metric_union::Error;
use rand::Rng;

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
fn jacobi_eigenvalues(m: &Matrix) -> Vec<f64> {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = m.to_rows();
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn random_symmetric(seed: u64, index: u64, n: usize) -> Matrix {
    let mut rng = stream(seed, "oracle.sym", index);
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v: f64 = rng.random_range(-1.0..1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

#[test]
fn eigenvalues_match_jacobi() {
    for (k, n) in [1usize, 2, 3, 7, 16, 30].into_iter().enumerate() {
        let m = random_symmetric(1, k as u64, n);
        let want = jacobi_eigenvalues(&m);
        let got = sym_eigenvalues(&m).unwrap();
        let full = sym_eigen(&m).unwrap();
        for i in 0..n {
            assert!((want[i] - got[i]).abs() < 1e-10, "n={n} i={i}: {} vs {}", want[i], got[i]);
            assert!((want[i] - full.eigenvalues[i]).abs() < 1e-10);
        }
        let back = full.reconstruct();
        for i in 0..n {
            for j in 0..n {
                assert!((back[(i, j)] - m[(i, j)]).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn repeated_eigenvalues() {
    // J has eigenvalue n once and 0 with multiplicity n − 1
    let n = 9;
    let j = Matrix::from_fn(n, n, |_, _| 1.0);
    let ev = sym_eigenvalues(&j).unwrap();
    assert!((ev[0] - n as f64).abs() < 1e-12);
    assert!(ev[1..].iter().all(|v| v.abs() < 1e-12));
}

#[test]
fn four_cycle_is_not_euclidean() {
    let d = Matrix::from_rows(&[
        vec![0.0, 1.0, 2.0, 1.0],
        vec![1.0, 0.0, 1.0, 2.0],
        vec![2.0, 1.0, 0.0, 1.0],
        vec![1.0, 2.0, 1.0, 0.0],
    ])
    .unwrap();
    let x = validate_metric(&d).unwrap();
    // −½·J·D²·J by hand
    let n = 4;
    let sq = Matrix::from_fn(n, n, |i, j| d[(i, j)] * d[(i, j)]);
    let row: Vec<f64> = (0..n).map(|i| sq.row(i).iter().sum::<f64>() / n as f64).collect();
    let all: f64 = row.iter().sum::<f64>() / n as f64;
    let gram = Matrix::from_fn(n, n, |i, j| -0.5 * (sq[(i, j)] - row[i] - row[j] + all));
    let oracle_min = *jacobi_eigenvalues(&gram).last().unwrap();
    assert!(oracle_min < -0.1);
    match mds_isometric_embed(&x, 1e-9) {
        Err(Error::NotEuclidean { min_eigenvalue }) => assert!((min_eigenvalue - oracle_min).abs() < 1e-10),
        other => panic!("expected NotEuclidean, got {other:?}"),
    }
}

#[test]
fn mds_recovers_random_clouds() {
    for k in 0..5 {
        let mut rng = stream(2, "oracle.mds", k);
        let dim = rng.random_range(1..=6usize);
        let pts: Vec<Vec<f64>> = (0..25).map(|_| (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let d = Matrix::from_fn(25, 25, |i, j| metric_union::linalg::dist(&pts[i], &pts[j]));
        let x = validate_metric(&d).unwrap();
        let c = mds_isometric_embed(&x, 1e-9).unwrap();
        assert!(c.dim() <= 24);
        let r = distortion_of(&x, &c, None).unwrap();
        assert!(r.distortion <= 1.0 + 1e-7, "{r:?}");
    }
}

/// `M ⪰ 0` by the Jacobi oracle, up to a tolerance relative to `scale`.
fn psd(m: &Matrix, scale: f64) -> bool {
    *jacobi_eigenvalues(m).last().unwrap() >= -1e-9 * scale
}

fn oracle_sandwich(l: &Matrix, l1: &Matrix, l2: &Matrix, delta: f64) -> bool {
    [l1, l2].iter().all(|li| {
        let upper = Matrix::from_fn(l.rows(), l.rows(), |i, j| (1.0 + delta) * li[(i, j)] - 0.5 * l[(i, j)]);
        let lower = Matrix::from_fn(l.rows(), l.rows(), |i, j| 0.5 * l[(i, j)] - li[(i, j)] / (1.0 + delta));
        psd(&upper, l.max_abs()) && psd(&lower, l.max_abs())
    })
}

/// Smallest feasible `δ` by bisection on the PSD oracle.
fn bisect_delta(l: &Matrix, l1: &Matrix, l2: &Matrix) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while !oracle_sandwich(l, l1, l2, hi) {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if oracle_sandwich(l, l1, l2, mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn connected_draw(n: usize, seed: u64) -> BipartiteSplit {
    (0..64).find_map(|a| draw_split(n, seed, a).ok()).expect("a connected draw")
}

#[test]
fn delta_matches_bisection() {
    for (k, n) in [4usize, 6, 8, 12].into_iter().enumerate() {
        let split = connected_draw(n, 40 + k as u64);
        let (l, l1, l2) = split.laplacians().unwrap();
        let measured = measure_delta(&l, &l1, &l2).unwrap();
        assert!((measured + DELTA_MARGIN - split.delta_star).abs() < 1e-15);
        let oracle = bisect_delta(&l, &l1, &l2);
        assert!((measured - oracle).abs() < 1e-6 * (1.0 + oracle), "n={n}: {measured} vs {oracle}");
        assert!(sandwich_holds(&l, &l1, &l2, split.delta_star).unwrap());
        assert!(oracle_sandwich(&l, &l1, &l2, split.delta_star));
        assert!(!sandwich_holds(&l, &l1, &l2, 0.9 * measured).unwrap());
        assert!(!oracle_sandwich(&l, &l1, &l2, 0.9 * measured));
    }
}

#[test]
fn laplacian_energy_identity() {
    let split = connected_draw(6, 9);
    let l = laplacian(12, &split.e1).unwrap();
    let mut rng = stream(9, "oracle.energy", 0);
    for _ in 0..20 {
        let x: Vec<f64> = (0..12).map(|_| rng.random_range(-2.0..2.0)).collect();
        let energy: f64 = split.e1.iter().map(|&(u, v)| (x[u] - x[v]).powi(2)).sum();
        assert!((l.quadratic_form(&x) - energy).abs() < 1e-10 * energy.max(1.0));
    }
}

#[test]
fn median_delta_shrinks_with_n() {
    let m16 = median_delta(16, 5, 20).unwrap();
    let m64 = median_delta(64, 5, 20).unwrap();
    let m256 = median_delta(256, 5, 20).unwrap();
    assert!(m16 > m64 && m64 > m256, "{m16} {m64} {m256}");
    // roughly c/√n once n is moderate
    for (n, m) in [(64.0_f64, m64), (256.0, m256)] {
        let c = m * n.sqrt();
        assert!((4.0..8.0).contains(&c), "n={n} c={c}");
    }
}
