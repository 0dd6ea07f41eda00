//! Unions of two simplices that need distortion close to 3.
//!
//! Split the edges of `K_{n,n}` at random into `E₁`, `E₂`. When both halves
//! are spectrally close to half of `K_{n,n}`,
//!
//! ```text
//! (1+δ)⁻¹ L_i ⪯ L/2 ⪯ (1+δ) L_i,   i = 1, 2,
//! ```
//!
//! the metric with distance 1 on `E₁`, 3 on `E₂` and 2 inside each side is a
//! union of two regular simplices, yet every Euclidean embedding of it has
//! distortion at least `3/(1+δ)²`. Here `δ` is measured for each sample
//! from the generalized spectrum of the pencils `(L/2, L_i)`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigenvalues, Matrix, PointCloud};
use crate::metric::{build_partition, validate_metric, FiniteMetricSpace, UnionPartition};
use crate::rng::stream;

pub const MAX_ATTEMPTS: usize = 64;
/// Added to the measured sandwich parameter so it passes the PSD check.
pub const DELTA_MARGIN: f64 = 1e-9;
/// PSD checks accept eigenvalues down to `−PSD_REL_TOL·‖L‖_max`.
pub const PSD_REL_TOL: f64 = 1e-9;
pub const MIN_N: usize = 4;
pub const EPSILON_START_N: usize = 16;
pub const EPSILON_MAX_N: usize = 512;
pub const EPSILON_SAMPLES: usize = 5;

/// Graph Laplacian of a simple undirected graph.
pub fn laplacian(n_vertices: usize, edges: &[(usize, usize)]) -> Result<Matrix> {
    let mut l = Matrix::zeros(n_vertices, n_vertices);
    for &(u, v) in edges {
        if u >= n_vertices || v >= n_vertices {
            return Err(Error::IndexOutOfRange { index: u.max(v), n: n_vertices });
        }
        if u == v {
            return Err(Error::SelfLoop { v });
        }
        if l[(u, v)] != 0.0 {
            return Err(Error::DuplicateEdge { u, v });
        }
        l[(u, v)] = -1.0;
        l[(v, u)] = -1.0;
        l[(u, u)] += 1.0;
        l[(v, v)] += 1.0;
    }
    Ok(l)
}

/// A random split of the edges of `K_{n,n}`; vertex `a < n` is on side `A`,
/// vertex `n + b` on side `B`, and edges are stored as `(a, n + b)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BipartiteSplit {
    pub n: usize,
    pub e1: Vec<(usize, usize)>,
    pub e2: Vec<(usize, usize)>,
    pub delta_star: f64,
    pub seed: u64,
    /// Samples drawn, including the accepted one.
    pub attempts: usize,
}

impl BipartiteSplit {
    pub fn all_edges(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        (0..n).flat_map(|a| (0..n).map(move |b| (a, n + b))).collect()
    }

    pub fn laplacians(&self) -> Result<(Matrix, Matrix, Matrix)> {
        let v = 2 * self.n;
        Ok((laplacian(v, &self.all_edges())?, laplacian(v, &self.e1)?, laplacian(v, &self.e2)?))
    }
}

fn connected(n_vertices: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n_vertices).collect();
    fn root(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    let mut parts = n_vertices;
    for &(u, v) in edges {
        let (ru, rv) = (root(&mut parent, u), root(&mut parent, v));
        if ru != rv {
            parent[ru] = rv;
            parts -= 1;
        }
    }
    parts <= 1
}

/// One draw: an independent fair coin per edge, with `δ` measured
/// (plus [`DELTA_MARGIN`]) and no acceptance test. Disconnected halves
/// give `SingularPencil`.
pub fn draw_split(n: usize, seed: u64, attempt: usize) -> Result<BipartiteSplit> {
    let mut rng = stream(seed, "lower_bound.split", attempt as u64);
    let (mut e1, mut e2) = (Vec::new(), Vec::new());
    for a in 0..n {
        for b in 0..n {
            if rng.random::<bool>() {
                e1.push((a, n + b));
            } else {
                e2.push((a, n + b));
            }
        }
    }
    for (g, e) in [(1, &e1), (2, &e2)] {
        if !connected(2 * n, e) {
            return Err(Error::SingularPencil { graph: g });
        }
    }
    let mut split = BipartiteSplit { n, e1, e2, delta_star: 0.0, seed, attempts: attempt + 1 };
    let (l, l1, l2) = split.laplacians()?;
    split.delta_star = measure_delta(&l, &l1, &l2)? + DELTA_MARGIN;
    Ok(split)
}

/// Draw splits until both halves are connected and `δ < 1`.
pub fn sample_split(n: usize, seed: u64) -> Result<BipartiteSplit> {
    if n < MIN_N {
        return Err(Error::InvalidInput(format!("n must be at least {MIN_N}, got {n}")));
    }
    for attempt in 0..MAX_ATTEMPTS {
        match draw_split(n, seed, attempt) {
            Ok(s) if s.delta_star < 1.0 => return Ok(s),
            Ok(_) | Err(Error::SingularPencil { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::RetryBudgetExceeded { attempts: MAX_ATTEMPTS })
}

/// Solve `C X = B` for lower-triangular `C`, all columns at once.
fn lower_solve(c: &Matrix, b: &Matrix) -> Matrix {
    let n = c.rows();
    let mut x = b.clone();
    for i in 0..n {
        for k in 0..i {
            let cik = c[(i, k)];
            if cik == 0.0 {
                continue;
            }
            let (head, tail) = (x.row(k).to_vec(), x.row_mut(i));
            for (t, h) in tail.iter_mut().zip(&head) {
                *t -= cik * h;
            }
        }
        let d = c[(i, i)];
        for t in x.row_mut(i) {
            *t /= d;
        }
    }
    x
}

/// Generalized eigenvalues of the pencil `(M, L_i)` on the complement of the
/// all-ones vector, ascending.
///
/// Both matrices get `11ᵀ/n` added, which leaves the other eigenpairs alone
/// and sends the all-ones direction to eigenvalue exactly 1.
pub fn pencil_eigenvalues(m: &Matrix, li: &Matrix, graph: usize) -> Result<Vec<f64>> {
    let n = m.rows();
    let j = 1.0 / n as f64;
    let a = Matrix::from_fn(n, n, |r, c| li[(r, c)] + j);
    let b = Matrix::from_fn(n, n, |r, c| m[(r, c)] + j);
    let chol = a.cholesky(PSD_REL_TOL * li.max_abs()).ok_or(Error::SingularPencil { graph })?;
    let y = lower_solve(&chol, &b);
    let w = lower_solve(&chol, &y.transpose());
    let w = Matrix::from_fn(n, n, |r, c| 0.5 * (w[(r, c)] + w[(c, r)]));
    let mut mu = sym_eigenvalues(&w)?;
    mu.reverse();
    // drop one eigenvalue at 1 for the all-ones direction
    let pos = mu
        .iter()
        .enumerate()
        .min_by(|x, y| (x.1 - 1.0).abs().total_cmp(&(y.1 - 1.0).abs()))
        .map(|(k, _)| k)
        .unwrap_or(0);
    mu.remove(pos);
    Ok(mu)
}

/// Smallest `δ` with `(1+δ)⁻¹ L_i ⪯ L/2 ⪯ (1+δ) L_i` for both `i`.
pub fn measure_delta(l: &Matrix, l1: &Matrix, l2: &Matrix) -> Result<f64> {
    let half = l.scaled(0.5);
    let mut delta = 0.0_f64;
    for (g, li) in [(1, l1), (2, l2)] {
        let mu = pencil_eigenvalues(&half, li, g)?;
        let (lo, hi) = (mu[0], mu[mu.len() - 1]);
        delta = delta.max(hi - 1.0).max(1.0 / lo - 1.0);
    }
    Ok(delta.max(0.0))
}

/// Direct PSD check of both sandwich inequalities at `delta`.
pub fn sandwich_holds(l: &Matrix, l1: &Matrix, l2: &Matrix, delta: f64) -> Result<bool> {
    let margin = PSD_REL_TOL * l.max_abs();
    for li in [l1, l2] {
        let upper = li.lin_comb(1.0 + delta, l, -0.5);
        let lower = l.lin_comb(0.5, li, -1.0 / (1.0 + delta));
        for m in [upper, lower] {
            let min = *sym_eigenvalues(&m)?.last().unwrap_or(&0.0);
            if min < -margin {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// The metric with distance 1 on `E₁`, 3 on `E₂` and 2 within a side.
pub fn build_123_metric(split: &BipartiteSplit) -> Result<(FiniteMetricSpace, UnionPartition)> {
    let n = split.n;
    let mut d = Matrix::from_fn(2 * n, 2 * n, |i, j| if i == j { 0.0 } else { 2.0 });
    for &(u, v) in &split.e1 {
        d[(u, v)] = 1.0;
        d[(v, u)] = 1.0;
    }
    for &(u, v) in &split.e2 {
        d[(u, v)] = 3.0;
        d[(v, u)] = 3.0;
    }
    let x = validate_metric(&d)?;
    let a: Vec<usize> = (0..n).collect();
    let b: Vec<usize> = (n..2 * n).collect();
    let p = build_partition(&x, &a, &b)?;
    Ok((x, p))
}

/// `3/(1+δ)²`.
pub fn certified_bound(delta: f64) -> f64 {
    3.0 / ((1.0 + delta) * (1.0 + delta))
}

/// Distortion every Euclidean embedding of the split's metric must reach.
pub fn certified_lower_bound(split: &BipartiteSplit) -> f64 {
    certified_bound(split.delta_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatioCheck {
    /// Mean squared image distance over `E₁` divided by the mean over `E`.
    pub e1_ratio: f64,
    pub e2_ratio: f64,
    pub lo: f64,
    pub hi: f64,
}

fn mean_sq(images: &PointCloud, edges: &[(usize, usize)]) -> f64 {
    let s: f64 = edges.iter().map(|&(u, v)| images.distance(u, v).powi(2)).sum();
    s / edges.len() as f64
}

/// Edge-set energy ratios of an embedding, which must lie in
/// `[(1+δ)⁻², (1+δ)²]` for any images whatsoever.
pub fn ratio_check(split: &BipartiteSplit, images: &PointCloud) -> Result<RatioCheck> {
    if images.len() != 2 * split.n {
        return Err(Error::LengthMismatch { expected: 2 * split.n, found: images.len() });
    }
    let all = mean_sq(images, &split.all_edges());
    if !(all > 0.0) {
        return Err(Error::DegenerateImages);
    }
    let f = (1.0 + split.delta_star).powi(2);
    let out = RatioCheck { e1_ratio: mean_sq(images, &split.e1) / all, e2_ratio: mean_sq(images, &split.e2) / all, lo: 1.0 / f, hi: f };
    for (which, r) in [("e1", out.e1_ratio), ("e2", out.e2_ratio)] {
        if !(r >= out.lo * (1.0 - 1e-12) && r <= out.hi * (1.0 + 1e-12)) {
            return Err(Error::RangeViolation { which: which.into(), measured: r, lo: out.lo, hi: out.hi });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonTarget {
    pub epsilon: f64,
    pub n: usize,
    pub median_delta: f64,
    pub bound: f64,
    /// Whether `bound ≥ 3 − ε` was reached before the size cap.
    pub reached: bool,
    /// `(n, median δ)` for every size tried.
    pub trail: Vec<(usize, f64)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// Median `δ` over `samples` unfiltered splits of size `n`, seeds derived
/// from `seed`. Disconnected draws are redrawn.
pub fn median_delta(n: usize, seed: u64, samples: usize) -> Result<f64> {
    let one = |k: usize| -> Result<f64> {
        let s = stream(seed, "lower_bound.median", (n as u64) << 16 | k as u64).random::<u64>();
        for attempt in 0..MAX_ATTEMPTS {
            match draw_split(n, s, attempt) {
                Ok(sp) => return Ok(sp.delta_star),
                Err(Error::SingularPencil { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
        Err(Error::RetryBudgetExceeded { attempts: MAX_ATTEMPTS })
    };
    Ok(median(crate::par::map_range(samples, one).into_iter().collect::<Result<Vec<_>>>()?))
}

/// Smallest power-of-two `n` (from 16, capped at 512) whose median `δ`
/// certifies distortion at least `3 − ε`.
pub fn target_epsilon(epsilon: f64, seed: u64) -> Result<EpsilonTarget> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidInput(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let mut trail = Vec::new();
    let mut n = EPSILON_START_N;
    loop {
        let med = median_delta(n, seed, EPSILON_SAMPLES)?;
        trail.push((n, med));
        let bound = certified_bound(med);
        if bound >= 3.0 - epsilon || n >= EPSILON_MAX_N {
            return Ok(EpsilonTarget { epsilon, n, median_delta: med, bound, reached: bound >= 3.0 - epsilon, trail });
        }
        n *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_laplacians() {
        let l = laplacian(2, &[(0, 1)]).unwrap();
        assert_eq!(l.to_rows(), vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        let k22 = laplacian(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        for i in 0..4 {
            assert_eq!(k22[(i, i)], 2.0);
        }
        assert_eq!(k22[(0, 2)], -1.0);
        assert_eq!(k22[(0, 1)], 0.0);
        assert!(matches!(laplacian(3, &[(0, 1), (1, 0)]), Err(Error::DuplicateEdge { .. })));
        assert!(matches!(laplacian(3, &[(2, 2)]), Err(Error::SelfLoop { v: 2 })));
    }

    #[test]
    fn identity_pencil_has_zero_delta() {
        let l = laplacian(4, &[(0, 2), (0, 3), (1, 2), (1, 3)]).unwrap();
        let half = l.scaled(0.5);
        assert!(measure_delta(&l, &half, &half).unwrap() < 1e-12);
    }

    #[test]
    fn matching_is_singular() {
        let n = 4;
        let m: Vec<(usize, usize)> = (0..n).map(|a| (a, n + a)).collect();
        let l = laplacian(2 * n, &(0..n).flat_map(|a| (0..n).map(move |b| (a, n + b))).collect::<Vec<_>>()).unwrap();
        let lm = laplacian(2 * n, &m).unwrap();
        assert!(matches!(measure_delta(&l, &lm, &lm), Err(Error::SingularPencil { graph: 1 })));
    }

    #[test]
    fn split_partitions_edges() {
        let s = draw_split(16, 3, 0).unwrap();
        assert_eq!(s.e1.len() + s.e2.len(), 256);
        let mut all: Vec<_> = s.e1.iter().chain(&s.e2).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 256);
        let s = sample_split(64, 3).unwrap();
        assert!(s.delta_star < 1.0);
        assert!(sample_split(3, 0).is_err());
    }

    #[test]
    fn bound_arithmetic() {
        assert_eq!(certified_bound(0.0), 3.0);
        assert!((certified_bound(0.2) - 3.0 / 1.44).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_metric_is_valid() {
        let s = BipartiteSplit { n: 2, e1: vec![(0, 2), (1, 3)], e2: vec![(0, 3), (1, 2)], delta_star: 0.0, seed: 0, attempts: 1 };
        let (x, p) = build_123_metric(&s).unwrap();
        assert_eq!(x.len(), 4);
        assert_eq!(p.r_a, vec![1.0, 1.0]);
    }

    #[test]
    fn epsilon_range() {
        assert!(target_epsilon(0.0, 1).is_err());
        assert!(target_epsilon(1.0, 1).is_err());
    }
}
