use serde::{Deserialize, Serialize};

use super::matrix::dist;
use crate::error::{Error, Result};

/// Ordered list of points in a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    count: usize,
    coords: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PointCloudRepr {
    dim: usize,
    points: Vec<Vec<f64>>,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        let mut coords = Vec::with_capacity(dim * points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::LengthMismatch { expected: dim, found: p.len() });
            }
            if let Some(j) = p.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { i, j });
            }
            coords.extend_from_slice(p);
        }
        Ok(Self { dim, count: points.len(), coords })
    }

    /// Infer the dimension from the first point (0 for an empty list).
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        Self::new(dim, points)
    }

    pub fn zeros(count: usize, dim: usize) -> Self {
        Self { dim, count, coords: vec![0.0; count * dim] }
    }

    /// `count` points of dimension zero.
    pub fn empty_dim(count: usize) -> Self {
        Self::zeros(count, 0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn point(&self, i: usize) -> &[f64] {
        assert!(i < self.count, "point index {i} out of range");
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        assert!(i < self.count, "point index {i} out of range");
        let d = self.dim;
        &mut self.coords[i * d..(i + 1) * d]
    }

    pub fn set_point(&mut self, i: usize, p: &[f64]) {
        assert_eq!(p.len(), self.dim);
        self.point_mut(i).copy_from_slice(p);
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.count).map(move |i| self.point(i))
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        dist(self.point(i), self.point(j))
    }

    /// Points at the given positions, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut coords = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            coords.extend_from_slice(self.point(i));
        }
        Self { dim: self.dim, count: idx.len(), coords }
    }

    pub fn push(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
        self.count += 1;
    }

    /// Apply `f` to every coordinate vector.
    pub fn map_points(&self, out_dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Self> {
        let mut out = Self::new(out_dim, self.iter().map(f).collect())?;
        out.count = self.count;
        Ok(out)
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coords {
            *c *= s;
        }
        out
    }
}

impl Serialize for PointCloud {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PointCloudRepr { dim: self.dim, points: self.to_vecs() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PointCloud {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PointCloudRepr::deserialize(d)?;
        if r.dim == 0 {
            if r.points.iter().any(|p| !p.is_empty()) {
                return Err(serde::de::Error::custom("dim 0 with non-empty points"));
            }
            return Ok(PointCloud::empty_dim(r.points.len()));
        }
        PointCloud::new(r.dim, r.points).map_err(serde::de::Error::custom)
    }
}

/// Concatenate coordinates pointwise: `(u ⊕ v)_i = (u_i, v_i)`.
pub fn direct_sum(clouds: &[&PointCloud]) -> Result<PointCloud> {
    let Some(first) = clouds.first() else {
        return Err(Error::InvalidInput("direct_sum of no clouds".into()));
    };
    let count = first.len();
    for c in clouds {
        if c.len() != count {
            return Err(Error::LengthMismatch { expected: count, found: c.len() });
        }
    }
    let dim: usize = clouds.iter().map(|c| c.dim()).sum();
    let mut coords = Vec::with_capacity(dim * count);
    for i in 0..count {
        for c in clouds {
            coords.extend_from_slice(c.point(i));
        }
    }
    Ok(PointCloud { dim, count, coords })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn three_four_five() {
        let u = PointCloud::new(1, vec![vec![0.0], vec![3.0]]).unwrap();
        let v = PointCloud::new(1, vec![vec![0.0], vec![4.0]]).unwrap();
        let s = direct_sum(&[&u, &v]).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.distance(0, 1), 5.0);
    }

    #[test]
    fn zero_dim_is_identity() {
        let u = PointCloud::new(2, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap();
        let z = PointCloud::empty_dim(3);
        assert_eq!(z.len(), 3);
        assert_eq!(direct_sum(&[&u, &z]).unwrap(), u);
        assert_eq!(direct_sum(&[&z, &u]).unwrap(), u);
    }

    #[test]
    fn squared_distances_add() {
        let mut rng = crate::rng::stream(3, "cloud-test", 0);
        let mut mk = |d: usize| {
            PointCloud::new(d, (0..6).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect())
                .unwrap()
        };
        let (a, b, c) = (mk(2), mk(3), mk(4));
        let s = direct_sum(&[&a, &b, &c]).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let want = a.distance(i, j).powi(2) + b.distance(i, j).powi(2) + c.distance(i, j).powi(2);
                let got = s.distance(i, j).powi(2);
                assert!((want - got).abs() <= 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn mismatched_lengths() {
        let u = PointCloud::new(1, vec![vec![0.0]]).unwrap();
        let v = PointCloud::new(1, vec![vec![0.0], vec![1.0]]).unwrap();
        assert!(matches!(direct_sum(&[&u, &v]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn json_shape() {
        let u = PointCloud::new(2, vec![vec![1.0, 2.0]]).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"dim":2,"points":[[1.0,2.0]]}"#);
        let back: PointCloud = serde_json::from_str(r#"{"dim":2,"points":[[1,2]]}"#).unwrap();
        assert_eq!(back, u);
    }
}
