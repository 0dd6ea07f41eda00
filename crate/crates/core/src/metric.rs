//! Finite metric spaces, union partitions `X = A ∪ B`, and distortion.

use serde::{Deserialize, Serialize};

use crate::error::{Error, MetricViolation, Result};
use crate::linalg::{Matrix, PointCloud};
use crate::par;

/// Relative slack allowed in the triangle inequality and symmetry checks.
pub const METRIC_REL_TOL: f64 = 1e-12;

/// At most this many violations are listed in an `InvalidMetric` error.
pub const MAX_REPORTED_VIOLATIONS: usize = 64;

/// A validated finite metric space.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    dist: Matrix,
    labels: Vec<String>,
}

impl FiniteMetricSpace {
    pub fn len(&self) -> usize {
        self.dist.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn d(&self, i: usize, j: usize) -> f64 {
        self.dist[(i, j)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.dist
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Largest distance.
    pub fn diameter(&self) -> f64 {
        self.dist.max_abs()
    }

    /// Sub-space on the given indices (in that order).
    pub fn restrict(&self, idx: &[usize]) -> FiniteMetricSpace {
        let dist = Matrix::from_fn(idx.len(), idx.len(), |i, j| self.d(idx[i], idx[j]));
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        FiniteMetricSpace { dist, labels }
    }

    /// Distance from `i` to the nearest point of `set`.
    pub fn dist_to_set(&self, i: usize, set: &[usize]) -> f64 {
        set.iter().map(|&j| self.d(i, j)).fold(f64::INFINITY, f64::min)
    }

    /// Metric induced by a point cloud (Euclidean distances).
    pub fn from_cloud(cloud: &PointCloud) -> Result<Self> {
        let n = cloud.len();
        let dist = Matrix::from_fn(n, n, |i, j| cloud.distance(i, j));
        validate_metric_labeled(dist, default_labels(n))
    }
}

pub fn default_labels(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

/// Check a candidate distance matrix and return the validated space.
pub fn validate_metric(dist: &Matrix) -> Result<FiniteMetricSpace> {
    validate_metric_labeled(dist.clone(), default_labels(dist.rows()))
}

pub fn validate_metric_labeled(dist: Matrix, labels: Vec<String>) -> Result<FiniteMetricSpace> {
    if !dist.is_square() {
        return Err(Error::NotSquare { rows: dist.rows(), row: 0, cols: dist.cols() });
    }
    let n = dist.rows();
    if n == 0 {
        return Err(Error::InvalidInput("metric space must have at least one point".into()));
    }
    if labels.len() != n {
        return Err(Error::LengthMismatch { expected: n, found: labels.len() });
    }
    for i in 0..n {
        for j in 0..n {
            if !dist[(i, j)].is_finite() {
                return Err(Error::NonFinite { i, j });
            }
        }
    }
    let scale = dist.max_abs();
    let tol = METRIC_REL_TOL * scale;

    let mut violations = Vec::new();
    for i in 0..n {
        if dist[(i, i)] != 0.0 {
            violations.push(MetricViolation::NonZeroDiagonal { i, value: dist[(i, i)] });
        }
        for j in (i + 1)..n {
            let (a, b) = (dist[(i, j)], dist[(j, i)]);
            if (a - b).abs() > tol {
                violations.push(MetricViolation::Asymmetry { i, j, diff: a - b });
            }
            if a < 0.0 || b < 0.0 {
                violations.push(MetricViolation::NegativeDistance { i, j, value: a.min(b) });
            } else if a == 0.0 || b == 0.0 {
                violations.push(MetricViolation::ZeroOffDiagonal { i, j });
            }
        }
    }

    let sym = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { 0.5 * (dist[(i, j)] + dist[(j, i)]) });
    // triangle check, i < j, over all intermediate k
    let rows = par::map_range(n, |i| {
        let mut out = Vec::new();
        let ri = sym.row(i);
        for j in (i + 1)..n {
            let dij = ri[j];
            let rj = sym.row(j);
            for k in 0..n {
                if k == i || k == j {
                    continue;
                }
                let slack = dij - (ri[k] + rj[k]);
                if slack > tol {
                    out.push(MetricViolation::TriangleViolation { i, j, k, slack });
                }
            }
        }
        out
    });
    for r in rows {
        violations.extend(r);
    }

    if violations.is_empty() {
        Ok(FiniteMetricSpace { dist: sym, labels })
    } else {
        let total = violations.len();
        violations.truncate(MAX_REPORTED_VIOLATIONS);
        Err(Error::InvalidMetric { violations, total })
    }
}

/// Index sets `A`, `B` with `A ∪ B = X` and their distances to the opposite side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnionPartition {
    pub idx_a: Vec<usize>,
    pub idx_b: Vec<usize>,
    /// `r_a[k] = d(idx_a[k], B)`.
    pub r_a: Vec<f64>,
    /// `r_b[k] = d(idx_b[k], A)`.
    pub r_b: Vec<f64>,
    #[serde(skip)]
    pos_a: Vec<Option<usize>>,
    #[serde(skip)]
    pos_b: Vec<Option<usize>>,
}

impl UnionPartition {
    pub fn n(&self) -> usize {
        self.pos_a.len()
    }

    /// Position of global index `x` within `idx_a`.
    pub fn pos_in_a(&self, x: usize) -> Option<usize> {
        self.pos_a[x]
    }

    pub fn pos_in_b(&self, x: usize) -> Option<usize> {
        self.pos_b[x]
    }

    pub fn in_a(&self, x: usize) -> bool {
        self.pos_a[x].is_some()
    }

    pub fn in_b(&self, x: usize) -> bool {
        self.pos_b[x].is_some()
    }

    /// `R_x` for `x ∈ A`.
    pub fn r_of_a(&self, x: usize) -> f64 {
        self.r_a[self.pos_a[x].expect("point not in A")]
    }

    pub fn r_of_b(&self, x: usize) -> f64 {
        self.r_b[self.pos_b[x].expect("point not in B")]
    }

    pub fn overlap(&self) -> Vec<usize> {
        self.idx_a.iter().copied().filter(|&x| self.in_b(x)).collect()
    }

    /// Same partition with the roles of `A` and `B` exchanged.
    pub fn swapped(&self) -> UnionPartition {
        UnionPartition {
            idx_a: self.idx_b.clone(),
            idx_b: self.idx_a.clone(),
            r_a: self.r_b.clone(),
            r_b: self.r_a.clone(),
            pos_a: self.pos_b.clone(),
            pos_b: self.pos_a.clone(),
        }
    }
}

/// JSON form of a partition: `{ "a": [...], "b": [...] }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub a: Vec<usize>,
    pub b: Vec<usize>,
}

fn normalize_side(name: &str, idx: &[usize], n: usize) -> Result<Vec<usize>> {
    if idx.is_empty() {
        return Err(Error::EmptySide { side: name.into() });
    }
    let mut v = idx.to_vec();
    v.sort_unstable();
    v.dedup();
    if let Some(&bad) = v.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, n });
    }
    Ok(v)
}

pub fn build_partition(x: &FiniteMetricSpace, idx_a: &[usize], idx_b: &[usize]) -> Result<UnionPartition> {
    let n = x.len();
    let idx_a = normalize_side("A", idx_a, n)?;
    let idx_b = normalize_side("B", idx_b, n)?;
    let mut pos_a = vec![None; n];
    let mut pos_b = vec![None; n];
    for (k, &i) in idx_a.iter().enumerate() {
        pos_a[i] = Some(k);
    }
    for (k, &i) in idx_b.iter().enumerate() {
        pos_b[i] = Some(k);
    }
    if let Some(index) = (0..n).find(|&i| pos_a[i].is_none() && pos_b[i].is_none()) {
        return Err(Error::Coverage { index });
    }
    let r_a = idx_a.iter().map(|&i| x.dist_to_set(i, &idx_b)).collect();
    let r_b = idx_b.iter().map(|&i| x.dist_to_set(i, &idx_a)).collect();
    Ok(UnionPartition { idx_a, idx_b, r_a, r_b, pos_a, pos_b })
}

/// Lipschitz data of an embedding restricted to a set of points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistortionReport {
    /// `max ‖f(x) − f(y)‖ / d(x, y)`.
    pub expansion: f64,
    /// `max d(x, y) / ‖f(x) − f(y)‖`.
    pub contraction: f64,
    pub distortion: f64,
    /// Pair (global indices) attaining the expansion.
    pub expansion_pair: Option<(usize, usize)>,
    pub contraction_pair: Option<(usize, usize)>,
    pub pairs: usize,
}

impl DistortionReport {
    /// Smallest ratio `‖f(x) − f(y)‖ / d(x, y)`.
    pub fn min_ratio(&self) -> f64 {
        1.0 / self.contraction
    }
}

struct RowExtrema {
    max_ratio: f64,
    max_at: Option<(usize, usize)>,
    min_ratio: f64,
    min_at: Option<(usize, usize)>,
    collapsed: Option<(usize, usize)>,
    pairs: usize,
}

/// Expansion, contraction and distortion of `images` as a map from `X`
/// (or from the points listed in `subset`, in that order).
pub fn distortion_of(x: &FiniteMetricSpace, images: &PointCloud, subset: Option<&[usize]>) -> Result<DistortionReport> {
    let all: Vec<usize>;
    let idx = match subset {
        Some(s) => s,
        None => {
            all = (0..x.len()).collect();
            &all
        }
    };
    if images.len() != idx.len() {
        return Err(Error::LengthMismatch { expected: idx.len(), found: images.len() });
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= x.len()) {
        return Err(Error::IndexOutOfRange { index: bad, n: x.len() });
    }
    let m = idx.len();
    let rows = par::map_range(m, |p| {
        let mut r = RowExtrema {
            max_ratio: f64::NEG_INFINITY,
            max_at: None,
            min_ratio: f64::INFINITY,
            min_at: None,
            collapsed: None,
            pairs: 0,
        };
        let fp = images.point(p);
        for q in (p + 1)..m {
            let d = x.d(idx[p], idx[q]);
            let e = crate::linalg::dist(fp, images.point(q));
            r.pairs += 1;
            if e == 0.0 {
                r.collapsed.get_or_insert((idx[p], idx[q]));
                continue;
            }
            let ratio = e / d;
            if ratio > r.max_ratio {
                r.max_ratio = ratio;
                r.max_at = Some((idx[p], idx[q]));
            }
            if ratio < r.min_ratio {
                r.min_ratio = ratio;
                r.min_at = Some((idx[p], idx[q]));
            }
        }
        r
    });

    let mut max_ratio = f64::NEG_INFINITY;
    let mut min_ratio = f64::INFINITY;
    let (mut max_at, mut min_at) = (None, None);
    let mut pairs = 0;
    for r in rows {
        if let Some((i, j)) = r.collapsed {
            return Err(Error::CollapsedPair { i, j });
        }
        pairs += r.pairs;
        if r.max_ratio > max_ratio {
            max_ratio = r.max_ratio;
            max_at = r.max_at;
        }
        if r.min_ratio < min_ratio {
            min_ratio = r.min_ratio;
            min_at = r.min_at;
        }
    }
    if pairs == 0 {
        return Ok(DistortionReport {
            expansion: 1.0,
            contraction: 1.0,
            distortion: 1.0,
            expansion_pair: None,
            contraction_pair: None,
            pairs: 0,
        });
    }
    let contraction = 1.0 / min_ratio;
    // ratio of extrema over the same pair set is always >= 1; clamp rounding
    let distortion = (max_ratio * contraction).max(1.0);
    Ok(DistortionReport {
        expansion: max_ratio,
        contraction,
        distortion,
        expansion_pair: max_at,
        contraction_pair: min_at,
        pairs,
    })
}

/// JSON form of a space: `{ "labels": [...], "dist": [[...]] }`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceSpec {
    #[serde(default)]
    pub labels: Option<Vec<serde_json::Value>>,
    pub dist: Vec<Vec<f64>>,
}

impl SpaceSpec {
    pub fn validate(&self) -> Result<FiniteMetricSpace> {
        let dist = Matrix::from_rows(&self.dist)?;
        if !dist.is_square() {
            return Err(Error::NotSquare { rows: dist.rows(), row: 0, cols: dist.cols() });
        }
        let labels = match &self.labels {
            Some(ls) => ls
                .iter()
                .map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect(),
            None => default_labels(dist.rows()),
        };
        validate_metric_labeled(dist, labels)
    }

    pub fn from_space(x: &FiniteMetricSpace) -> Self {
        SpaceSpec {
            labels: Some(x.labels.iter().cloned().map(serde_json::Value::String).collect()),
            dist: x.dist.to_rows(),
        }
    }
}
