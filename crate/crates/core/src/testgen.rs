//! Seeded test instances: two Euclidean point sets glued by long cross edges.
//!
//! Points of `A` live in `ℝ^a`, points of `B` in `ℝ^b`. Intra-side distances
//! are Euclidean; every cross pair gets a weight drawn from `[M, 2M]` with
//! `M = max(diam A, diam B)`, and `d` is the shortest-path metric of the
//! complete weighted graph. A path that leaves a side costs at least `2M`,
//! so both sides stay isometrically Euclidean.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::glue::GlueInstance;
use crate::linalg::{Matrix, PointCloud};
use crate::metric::{build_partition, validate_metric, FiniteMetricSpace, UnionPartition};
use crate::rng::stream;

pub const MIN_SIDE: usize = 10;
pub const MAX_SIDE: usize = 60;
pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 8;

#[derive(Debug, Clone)]
pub struct UnionInstance {
    pub space: FiniteMetricSpace,
    pub partition: UnionPartition,
    /// Exact coordinates of `A` (isometric).
    pub phi_a: PointCloud,
    /// Exact coordinates of `B` (isometric).
    pub phi_b: PointCloud,
}

fn gaussian_cloud<R: Rng>(rng: &mut R, count: usize, dim: usize) -> PointCloud {
    let mut c = PointCloud::zeros(count, dim);
    for i in 0..count {
        for v in c.point_mut(i) {
            *v = rng.sample(StandardNormal);
        }
    }
    c
}

/// Diameter of a cloud.
fn diam(c: &PointCloud) -> f64 {
    let mut d = 0.0_f64;
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            d = d.max(c.distance(i, j));
        }
    }
    d
}

/// Shortest-path closure in place.
pub fn floyd_warshall(d: &mut Matrix) {
    let n = d.rows();
    for k in 0..n {
        let dk: Vec<f64> = d.row(k).to_vec();
        for i in 0..n {
            let dik = d[(i, k)];
            let row = d.row_mut(i);
            for j in 0..n {
                let via = dik + dk[j];
                if via < row[j] {
                    row[j] = via;
                }
            }
        }
    }
}

/// Glue the clouds `pa` (as `A`) and `pb` (as `B`) with random cross weights.
pub fn glue_clouds(pa: &PointCloud, pb: &PointCloud, seed: u64, index: u64) -> Result<UnionInstance> {
    let mut rng = stream(seed, "testgen.cross", index);
    let (na, nb) = (pa.len(), pb.len());
    let n = na + nb;
    let m = diam(pa).max(diam(pb)).max(f64::MIN_POSITIVE);
    let mut d = Matrix::zeros(n, n);
    for i in 0..na {
        for j in 0..na {
            d.row_mut(i)[j] = pa.distance(i, j);
        }
    }
    for i in 0..nb {
        for j in 0..nb {
            d.row_mut(na + i)[na + j] = pb.distance(i, j);
        }
    }
    for i in 0..na {
        for j in 0..nb {
            let w = rng.random_range(m..=2.0 * m);
            d.row_mut(i)[na + j] = w;
            d.row_mut(na + j)[i] = w;
        }
    }
    floyd_warshall(&mut d);
    let space = validate_metric(&d)?;
    let idx_a: Vec<usize> = (0..na).collect();
    let idx_b: Vec<usize> = (na..n).collect();
    let partition = build_partition(&space, &idx_a, &idx_b)?;
    Ok(UnionInstance { space, partition, phi_a: pa.clone(), phi_b: pb.clone() })
}

/// Instance number `index` of the family keyed by `seed`: side sizes in
/// `[MIN_SIDE, MAX_SIDE]`, dimensions in `[MIN_DIM, MAX_DIM]`.
pub fn random_instance(seed: u64, index: u64) -> Result<UnionInstance> {
    let mut rng = stream(seed, "testgen.shape", index);
    let na = rng.random_range(MIN_SIDE..=MAX_SIDE);
    let nb = rng.random_range(MIN_SIDE..=MAX_SIDE);
    let a = rng.random_range(MIN_DIM..=MAX_DIM);
    let b = rng.random_range(MIN_DIM..=MAX_DIM);
    let mut prng = stream(seed, "testgen.points", index);
    let pa = gaussian_cloud(&mut prng, na, a);
    let pb = gaussian_cloud(&mut prng, nb, b);
    glue_clouds(&pa, &pb, seed, index)
}

/// Scale coordinate `k` by `1 + (d − 1)·k/(dim − 1)`: non-contracting with
/// Lipschitz constant `d` (exactly `d` in dimension ≥ 2).
pub fn diagonal_distort(c: &PointCloud, d: f64) -> PointCloud {
    let dim = c.dim();
    let scales: Vec<f64> = (0..dim)
        .map(|k| if dim <= 1 { d } else { 1.0 + (d - 1.0) * k as f64 / (dim - 1) as f64 })
        .collect();
    let mut out = c.clone();
    for i in 0..out.len() {
        for (v, s) in out.point_mut(i).iter_mut().zip(&scales) {
            *v *= s;
        }
    }
    out
}

/// `{0, 1, 2} → {0, 2, 1}` on the line, with a few extra ambient points
/// on each side. No continuous injective map of the line extends it.
pub fn order_reversing_glue() -> Result<GlueInstance> {
    let u = PointCloud::from_points([0.0, 1.0, 2.0, -1.0, 0.5, 3.5].iter().map(|&x| vec![x]).collect())?;
    let v = PointCloud::from_points([0.0, 1.0, 2.0, 1.5, -2.0, 4.0].iter().map(|&x| vec![x]).collect())?;
    GlueInstance::new(u, v, vec![0, 1, 2], vec![0, 1, 2], vec![0, 2, 1])
}

/// Random bi-Lipschitz glue instance: `f` is a coordinate scaling by factors
/// in `[1, 3]` followed by a random shuffle of `A`'s images, applied to a
/// handful of points (the shuffle makes `f` non-linear).
pub fn random_glue(seed: u64, index: u64) -> Result<GlueInstance> {
    let mut rng = stream(seed, "testgen.glue", index);
    let a = rng.random_range(1..=3usize);
    let b = a + rng.random_range(0..=2usize);
    let nu = rng.random_range(6..=20usize);
    let na = rng.random_range(1..=nu.min(8));
    let extra_v = rng.random_range(2..=12usize);
    let u = gaussian_cloud(&mut rng, nu, a);
    let scales: Vec<f64> = (0..a).map(|_| rng.random_range(1.0..=3.0)).collect();
    let shift: Vec<f64> = (0..b).map(|_| rng.random_range(-5.0..=5.0)).collect();
    let mut v = PointCloud::zeros(0, b);
    for i in 0..na {
        let mut p = shift.clone();
        for (k, s) in scales.iter().enumerate() {
            p[k] += s * u.point(i)[k];
        }
        v.push(&p);
    }
    let free = gaussian_cloud(&mut rng, extra_v, b);
    for i in 0..extra_v {
        let p: Vec<f64> = free.point(i).iter().zip(&shift).map(|(x, s)| 3.0 * x + s).collect();
        v.push(&p);
    }
    // swap two images now and then so f is not affine
    let mut pairing: Vec<usize> = (0..na).collect();
    if na >= 2 && rng.random::<bool>() {
        let i = rng.random_range(0..na);
        let j = (i + 1 + rng.random_range(0..na - 1)) % na;
        pairing.swap(i, j);
    }
    GlueInstance::new(u, v, (0..na).collect(), (0..na).collect(), pairing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::distortion_of;

    #[test]
    fn sides_stay_isometric() {
        for k in 0..5 {
            let inst = random_instance(11, k).unwrap();
            let p = &inst.partition;
            let ra = distortion_of(&inst.space, &inst.phi_a, Some(&p.idx_a)).unwrap();
            let rb = distortion_of(&inst.space, &inst.phi_b, Some(&p.idx_b)).unwrap();
            assert!((ra.distortion - 1.0).abs() < 1e-12, "{ra:?}");
            assert!((rb.distortion - 1.0).abs() < 1e-12, "{rb:?}");
            assert!((MIN_SIDE..=MAX_SIDE).contains(&p.idx_a.len()));
            assert!((MIN_DIM..=MAX_DIM).contains(&inst.phi_b.dim()));
        }
    }

    #[test]
    fn reproducible() {
        let a = random_instance(3, 4).unwrap();
        let b = random_instance(3, 4).unwrap();
        assert_eq!(a.space.matrix(), b.space.matrix());
        assert_ne!(random_instance(3, 5).unwrap().space.len(), 0);
    }

    #[test]
    fn diagonal_distortion_is_exact() {
        let inst = random_instance(5, 0).unwrap();
        let p = &inst.partition;
        let phi = diagonal_distort(&inst.phi_a, 2.0);
        let r = distortion_of(&inst.space, &phi, Some(&p.idx_a)).unwrap();
        assert!(r.contraction <= 1.0 + 1e-12);
        assert!(r.expansion <= 2.0 + 1e-12 && r.distortion > 1.2);
    }

    #[test]
    fn glue_instances_are_valid() {
        let g = order_reversing_glue().unwrap();
        let (e, c) = g.f_distortion();
        assert_eq!((e, c), (2.0, 2.0));
        for k in 0..10 {
            let g = random_glue(2, k).unwrap();
            assert_eq!(g.a_idx.len(), g.b_idx.len());
        }
    }

    #[test]
    fn shortest_paths() {
        let mut d = Matrix::from_rows(&[vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]]).unwrap();
        floyd_warshall(&mut d);
        assert_eq!(d[(0, 2)], 2.0);
    }
}
