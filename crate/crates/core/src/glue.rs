//! External extensions of a bi-Lipschitz map `f: A → B`, `A ⊆ U′ ⊂ ℝ^a`,
//! `B ⊆ V′ ⊂ ℝ^b`.
//!
//! Glue `U′` and `V′` along `a ~ f(a)` with the quotient metric
//!
//! ```text
//! d(u, u′) = ‖u − u′‖
//! d(u, v)  = min_x ‖u − x‖ + ‖f(x) − v‖
//! d(v, v′) = min(‖v − v′‖, min_{x,y} ‖v − f(x)‖ + ‖x − y‖ + ‖f(y) − v′‖)
//! ```
//!
//! (`x, y` over `A`, `V′` rescaled so that `f` is non-contracting), then
//! embed the glued space as the union of `U′` and `V′`. Restricting the
//! embedding to each side gives `f₁`, `f₂` with `f₁(a) = f₂(f(a))`.

use serde::{Deserialize, Serialize};

use crate::audit::{first_failure, AuditEntry, AUDIT_REL_TOL};
use crate::error::{Error, Result};
use crate::kirszbraun::DEFAULT_TOL;
use crate::linalg::{Matrix, PointCloud};
use crate::metric::{build_partition, distortion_of, validate_metric, FiniteMetricSpace, UnionPartition};
use crate::union_embed::{embed_union_auto, UnionEmbedding};

#[derive(Debug, Clone, PartialEq)]
pub struct GlueInstance {
    pub u_points: PointCloud,
    pub v_points: PointCloud,
    pub a_idx: Vec<usize>,
    pub b_idx: Vec<usize>,
    /// `pairing[k]` is the position in `b_idx` of `f(a_idx[k])`.
    pub pairing: Vec<usize>,
}

/// JSON form; `pairing` defaults to the identity order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlueSpec {
    pub u_points: Vec<Vec<f64>>,
    pub v_points: Vec<Vec<f64>>,
    pub a_idx: Vec<usize>,
    pub b_idx: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<Vec<usize>>,
}

impl GlueSpec {
    pub fn to_instance(&self) -> Result<GlueInstance> {
        let cloud = |pts: &[Vec<f64>], what: &str| -> Result<PointCloud> {
            if pts.is_empty() {
                return Err(Error::InvalidInput(format!("{what} is empty")));
            }
            PointCloud::from_points(pts.to_vec())
        };
        let pairing = self.pairing.clone().unwrap_or_else(|| (0..self.a_idx.len()).collect());
        GlueInstance::new(cloud(&self.u_points, "u_points")?, cloud(&self.v_points, "v_points")?, self.a_idx.clone(), self.b_idx.clone(), pairing)
    }

    pub fn from_instance(g: &GlueInstance) -> Self {
        Self {
            u_points: g.u_points.to_vecs(),
            v_points: g.v_points.to_vecs(),
            a_idx: g.a_idx.clone(),
            b_idx: g.b_idx.clone(),
            pairing: Some(g.pairing.clone()),
        }
    }
}

fn check_indices(idx: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    for &i in idx {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if seen[i] {
            return Err(Error::InvalidInput(format!("index {i} listed twice")));
        }
        seen[i] = true;
    }
    Ok(())
}

fn check_distinct(c: &PointCloud, what: &str) -> Result<()> {
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            if c.distance(i, j) == 0.0 {
                return Err(Error::InvalidInput(format!("{what} points {i} and {j} coincide")));
            }
        }
    }
    Ok(())
}

impl GlueInstance {
    pub fn new(u_points: PointCloud, v_points: PointCloud, a_idx: Vec<usize>, b_idx: Vec<usize>, pairing: Vec<usize>) -> Result<Self> {
        if a_idx.is_empty() {
            return Err(Error::EmptySide { side: "A".into() });
        }
        if a_idx.len() != b_idx.len() {
            return Err(Error::LengthMismatch { expected: a_idx.len(), found: b_idx.len() });
        }
        if pairing.len() != a_idx.len() {
            return Err(Error::LengthMismatch { expected: a_idx.len(), found: pairing.len() });
        }
        check_indices(&a_idx, u_points.len())?;
        check_indices(&b_idx, v_points.len())?;
        check_indices(&pairing, b_idx.len())?;
        check_distinct(&u_points, "u")?;
        check_distinct(&v_points, "v")?;
        Ok(Self { u_points, v_points, a_idx, b_idx, pairing })
    }

    /// `f(a_idx[k])` as an index into `v_points`.
    pub fn f_of(&self, k: usize) -> usize {
        self.b_idx[self.pairing[k]]
    }

    /// Expansion and contraction of `f` measured pairwise.
    pub fn f_distortion(&self) -> (f64, f64) {
        let m = self.a_idx.len();
        let (mut exp, mut con) = (0.0_f64, 0.0_f64);
        for s in 0..m {
            for t in (s + 1)..m {
                let du = self.u_points.distance(self.a_idx[s], self.a_idx[t]);
                let dv = self.v_points.distance(self.f_of(s), self.f_of(t));
                exp = exp.max(dv / du);
                con = con.max(du / dv);
            }
        }
        if m < 2 {
            (1.0, 1.0)
        } else {
            (exp, con)
        }
    }
}

/// The glued space with bookkeeping.
#[derive(Debug, Clone)]
pub struct GluedSpace {
    pub space: FiniteMetricSpace,
    /// `U′` is side `A`, `V′` side `B`; identified points are the overlap.
    pub partition: UnionPartition,
    /// Glued index of each `v_points[i]`; `u_points[i]` has glued index `i`.
    pub v_to_glued: Vec<usize>,
    /// Factor applied to `V′` so that `f` is non-contracting.
    pub v_scale: f64,
    /// Distortion of `f` (expansion × contraction).
    pub d_f: f64,
}

pub fn glued_metric(g: &GlueInstance) -> Result<GluedSpace> {
    let (exp, con) = g.f_distortion();
    let v_scale = con;
    let d_f = (exp * con).max(1.0);
    let nu = g.u_points.len();
    let nv = g.v_points.len();

    let mut merged_with = vec![None; nv];
    for k in 0..g.a_idx.len() {
        merged_with[g.f_of(k)] = Some(g.a_idx[k]);
    }
    let mut v_to_glued = vec![0; nv];
    let mut free_v = Vec::new();
    for v in 0..nv {
        v_to_glued[v] = match merged_with[v] {
            Some(u) => u,
            None => {
                free_v.push(v);
                nu + free_v.len() - 1
            }
        };
    }
    let n = nu + free_v.len();
    let du = |i: usize, j: usize| g.u_points.distance(i, j);
    let dv = |i: usize, j: usize| v_scale * g.v_points.distance(i, j);
    let a = &g.a_idx;
    let fa: Vec<usize> = (0..a.len()).map(|k| g.f_of(k)).collect();

    // u to a free v, entering V at some f(x)
    let cross = |u: usize, v: usize| (0..a.len()).map(|k| du(u, a[k]) + dv(fa[k], v)).fold(f64::INFINITY, f64::min);
    // direct, or out through f(x), across A, and back in through f(y)
    let routed = |v: usize, w: usize| {
        let mut best = dv(v, w);
        for k in 0..a.len() {
            let head = dv(v, fa[k]);
            for l in 0..a.len() {
                best = best.min(head + du(a[k], a[l]) + dv(fa[l], w));
            }
        }
        best
    };

    let mut d = Matrix::zeros(n, n);
    for i in 0..nu {
        for j in (i + 1)..nu {
            d[(i, j)] = du(i, j);
        }
    }
    for i in 0..nu {
        for (s, &v) in free_v.iter().enumerate() {
            d[(i, nu + s)] = cross(i, v);
        }
    }
    for (s, &v) in free_v.iter().enumerate() {
        for (t, &w) in free_v.iter().enumerate().skip(s + 1) {
            d[(nu + s, nu + t)] = routed(v, w);
        }
    }
    for i in 0..n {
        for j in 0..i {
            d[(i, j)] = d[(j, i)];
        }
    }
    let space = validate_metric(&d)?;
    let side_a: Vec<usize> = (0..nu).collect();
    let mut side_b: Vec<usize> = v_to_glued.clone();
    side_b.sort_unstable();
    let partition = build_partition(&space, &side_a, &side_b)?;
    Ok(GluedSpace { space, partition, v_to_glued, v_scale, d_f })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExternalExtension {
    pub f1: PointCloud,
    pub f2: PointCloud,
    pub distortion_f1: f64,
    pub distortion_f2: f64,
    pub d_f: f64,
    pub v_scale: f64,
    /// `9·d_f + 2`.
    pub bound: f64,
    pub glued_points: usize,
    pub audit: Vec<AuditEntry>,
    #[serde(skip)]
    pub embedding: UnionEmbedding,
}

impl ExternalExtension {
    pub fn passed(&self) -> bool {
        self.audit.iter().all(|e| e.pass) && self.embedding.passed()
    }

    pub fn first_failure(&self) -> Option<Error> {
        first_failure(&self.audit).or_else(|| self.embedding.first_failure())
    }
}

/// `9·D + 2`.
pub fn extension_bound(d_f: f64) -> f64 {
    9.0 * d_f + 2.0
}

pub fn external_extend(g: &GlueInstance) -> Result<ExternalExtension> {
    external_extend_tol(g, DEFAULT_TOL)
}

pub fn external_extend_tol(g: &GlueInstance, tol: f64) -> Result<ExternalExtension> {
    let glued = glued_metric(g)?;
    let p = &glued.partition;
    let phi_a = g.u_points.clone();
    // φ_B lists V points in glued-index order
    let mut order: Vec<usize> = (0..g.v_points.len()).collect();
    order.sort_by_key(|&v| glued.v_to_glued[v]);
    let phi_b = g.v_points.select(&order).scaled(glued.v_scale);
    let emb = embed_union_auto(&glued.space, p, Some(&phi_a), Some(&phi_b), None, Some(tol))?;

    let f1 = emb.full.select(&(0..g.u_points.len()).collect::<Vec<_>>());
    let f2 = emb.full.select(&glued.v_to_glued);
    let ux = FiniteMetricSpace::from_cloud(&g.u_points)?;
    let vx = FiniteMetricSpace::from_cloud(&g.v_points)?;
    let r1 = distortion_of(&ux, &f1, None)?;
    let r2 = distortion_of(&vx, &f2, None)?;
    let bound = extension_bound(glued.d_f);

    let mut audit = Vec::new();
    let mismatches: Vec<usize> = (0..g.a_idx.len()).filter(|&k| f1.point(g.a_idx[k]) != f2.point(g.f_of(k))).collect();
    audit.push(AuditEntry::zero_count(
        "compatibility",
        mismatches.len(),
        mismatches.first().map(|&k| (g.a_idx[k], g.f_of(k))),
        g.a_idx.len(),
    ));
    audit.push(AuditEntry::upper("f1.distortion", bound, r1.distortion, r1.expansion_pair, r1.pairs));
    audit.push(AuditEntry::upper("f2.distortion", bound, r2.distortion, r2.expansion_pair, r2.pairs));
    // f2 dominates the rescaled V distances
    let mut worst = (f64::INFINITY, None);
    for i in 0..f2.len() {
        for j in (i + 1)..f2.len() {
            let r = f2.distance(i, j) / (glued.v_scale * g.v_points.distance(i, j));
            if r < worst.0 {
                worst = (r, Some((i, j)));
            }
        }
    }
    let pairs = f2.len() * f2.len().saturating_sub(1) / 2;
    audit.push(AuditEntry::lower_tol("f2.noncontracting", 1.0, worst.0, worst.1, pairs, 1e-12));
    let _ = AUDIT_REL_TOL;

    Ok(ExternalExtension {
        f1,
        f2,
        distortion_f1: r1.distortion,
        distortion_f2: r2.distortion,
        d_f: glued.d_f,
        v_scale: glued.v_scale,
        bound,
        glued_points: glued.space.len(),
        audit,
        embedding: emb,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(v: &[f64]) -> PointCloud {
        PointCloud::from_points(v.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn isometry_merges_everything() {
        let u = pc(&[0.0, 1.0, 3.0]);
        let v = pc(&[10.0, 11.0, 13.0]);
        let g = GlueInstance::new(u, v, vec![0, 1, 2], vec![0, 1, 2], vec![0, 1, 2]).unwrap();
        let s = glued_metric(&g).unwrap();
        assert_eq!(s.space.len(), 3);
        assert_eq!(s.d_f, 1.0);
        assert_eq!(s.space.d(0, 2), 3.0);
    }

    #[test]
    fn singleton_a_cross_distance() {
        let u = pc(&[0.0, 1.0]);
        let v = pc(&[0.0, 1.0]);
        let g = GlueInstance::new(u, v, vec![0], vec![0], vec![0]).unwrap();
        let s = glued_metric(&g).unwrap();
        assert_eq!(s.space.len(), 3);
        let v1 = s.v_to_glued[1];
        assert_eq!(s.space.d(1, v1), 2.0);
        assert_eq!(s.space.d(0, v1), 1.0);
        let e = external_extend(&g).unwrap();
        assert_eq!(e.f1.point(0), e.f2.point(0));
        assert!(e.passed(), "{:?}", e.first_failure());
    }

    #[test]
    fn within_v_shortcut() {
        // f(0) = 0, f(1) = 100: the V points next to them are close through A
        let u = pc(&[0.0, 1.0]);
        let v = pc(&[0.0, 100.0, 0.5, 100.5]);
        let g = GlueInstance::new(u, v, vec![0, 1], vec![0, 1], vec![0, 1]).unwrap();
        let s = glued_metric(&g).unwrap();
        // f stretches by 100, so V is shrunk by the same factor
        assert_eq!(s.v_scale, 0.01);
        let (p, q) = (s.v_to_glued[2], s.v_to_glued[3]);
        let direct: f64 = 0.01 * 100.0;
        let routed = 0.01 * 0.5 + 1.0 + 0.01 * 0.5;
        assert!((s.space.d(p, q) - direct.min(routed)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_pairing() {
        let u = pc(&[0.0, 1.0]);
        let v = pc(&[0.0, 1.0]);
        assert!(GlueInstance::new(u.clone(), v.clone(), vec![0, 1], vec![0, 1], vec![0, 0]).is_err());
        assert!(GlueInstance::new(u, v, vec![], vec![], vec![]).is_err());
    }
}
