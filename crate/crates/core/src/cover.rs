//! α-covers of `A` with respect to `B` and the nearest-point map `f: A′ → B`.
//!
//! An α-cover `A′ ⊆ A` satisfies
//!
//! 1. every `a ∈ A` has some `a′ ∈ A′` with `R_{a′} ≤ R_a` and `d(a, a′) ≤ α·R_a`;
//! 2. distinct `a₁′, a₂′ ∈ A′` satisfy `d(a₁′, a₂′) ≥ α·min(R_{a₁′}, R_{a₂′})`.
//!
//! The construction repeatedly takes the remaining point closest to `B`
//! (lowest index on ties), keeps it, and discards its closed ball of radius
//! `α·R_u`. With property 2, the nearest-point map is `2(1 + 1/α)`-Lipschitz.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{FiniteMetricSpace, UnionPartition};

/// Additive slack on the `2(1 + 1/α)` certificate.
pub const F_LIP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverResult {
    pub alpha: f64,
    /// Cover points (global indices), ascending.
    pub cover_idx: Vec<usize>,
    /// `nearest[k] = f(cover_idx[k])`, a global index in `B`.
    pub nearest: Vec<usize>,
    /// Cover points in the order the construction picked them.
    pub selection_order: Vec<usize>,
    /// Measured Lipschitz constant of `f`.
    pub lip_f: f64,
}

impl CoverResult {
    pub fn f(&self, a: usize) -> Option<usize> {
        self.cover_idx.binary_search(&a).ok().map(|k| self.nearest[k])
    }

    pub fn contains(&self, a: usize) -> bool {
        self.cover_idx.binary_search(&a).is_ok()
    }
}

/// `2(1 + 1/α)`.
pub fn f_lipschitz_bound(alpha: f64) -> f64 {
    2.0 * (1.0 + 1.0 / alpha)
}

/// Nearest point of `B` to `a`; points of `A ∩ B` map to themselves.
pub fn nearest_in_b(x: &FiniteMetricSpace, p: &UnionPartition, a: usize) -> usize {
    if p.in_b(a) {
        return a;
    }
    let mut best = p.idx_b[0];
    let mut best_d = x.d(a, best);
    for &b in &p.idx_b[1..] {
        let d = x.d(a, b);
        if d < best_d {
            best = b;
            best_d = d;
        }
    }
    best
}

pub fn build_cover(x: &FiniteMetricSpace, p: &UnionPartition, alpha: f64) -> Result<CoverResult> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    if p.n() != x.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: p.n() });
    }
    // positions into idx_a still in the working set
    let mut working: Vec<usize> = (0..p.idx_a.len()).collect();
    let mut selection_order = Vec::new();
    while !working.is_empty() {
        let mut pick = working[0];
        for &k in &working[1..] {
            // idx_a is ascending, so strict < keeps the lowest index on ties
            if p.r_a[k] < p.r_a[pick] {
                pick = k;
            }
        }
        let u = p.idx_a[pick];
        let radius = alpha * p.r_a[pick];
        working.retain(|&k| x.d(u, p.idx_a[k]) > radius);
        selection_order.push(u);
    }
    let mut cover_idx = selection_order.clone();
    cover_idx.sort_unstable();
    let nearest = cover_idx.iter().map(|&a| nearest_in_b(x, p, a)).collect();
    let mut c = CoverResult { alpha, cover_idx, nearest, selection_order, lip_f: 0.0 };
    c.lip_f = certify_f_lipschitz(x, p, &c)?;
    Ok(c)
}

/// Measured Lipschitz constant of `f` over all cover pairs, checked against `2(1 + 1/α)`.
pub fn certify_f_lipschitz(x: &FiniteMetricSpace, _p: &UnionPartition, c: &CoverResult) -> Result<f64> {
    let bound = f_lipschitz_bound(c.alpha);
    let mut lip = 0.0_f64;
    let m = c.cover_idx.len();
    for s in 0..m {
        for t in (s + 1)..m {
            let (a1, a2) = (c.cover_idx[s], c.cover_idx[t]);
            let ratio = x.d(c.nearest[s], c.nearest[t]) / x.d(a1, a2);
            if ratio > bound + F_LIP_SLACK {
                return Err(Error::CertificateViolation { i: a1, j: a2, ratio, bound });
            }
            lip = lip.max(ratio);
        }
    }
    Ok(lip)
}

/// Outcome of the exhaustive check of a cover against its defining properties.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CoverCheck {
    /// A point of `A` with no valid representative.
    pub property1_violation: Option<usize>,
    /// A pair of cover points that are too close.
    pub property2_violation: Option<(usize, usize)>,
    /// A cover point whose `f` image is not at distance `R_{a′}`.
    pub nearest_violation: Option<usize>,
    /// Smallest `d(a₁′, a₂′) − α·min(R)` over cover pairs (∞ when fewer than two).
    pub property2_min_slack: f64,
}

impl CoverCheck {
    pub fn is_valid(&self) -> bool {
        self.property1_violation.is_none() && self.property2_violation.is_none() && self.nearest_violation.is_none()
    }
}

pub fn check_cover(x: &FiniteMetricSpace, p: &UnionPartition, c: &CoverResult) -> CoverCheck {
    let alpha = c.alpha;
    let mut out = CoverCheck { property2_min_slack: f64::INFINITY, ..Default::default() };
    for (k, &a) in p.idx_a.iter().enumerate() {
        let ra = p.r_a[k];
        let ok = c.cover_idx.iter().any(|&a2| p.r_of_a(a2) <= ra && x.d(a, a2) <= alpha * ra);
        if !ok && out.property1_violation.is_none() {
            out.property1_violation = Some(a);
        }
    }
    for (s, &a1) in c.cover_idx.iter().enumerate() {
        for &a2 in &c.cover_idx[s + 1..] {
            let need = alpha * p.r_of_a(a1).min(p.r_of_a(a2));
            let slack = x.d(a1, a2) - need;
            out.property2_min_slack = out.property2_min_slack.min(slack);
            if slack < 0.0 && out.property2_violation.is_none() {
                out.property2_violation = Some((a1, a2));
            }
        }
    }
    for (k, &a) in c.cover_idx.iter().enumerate() {
        let b = c.nearest[k];
        let bad = !p.in_b(b) || x.d(a, b) != p.r_of_a(a) || (p.in_b(a) && b != a);
        if bad && out.nearest_violation.is_none() {
            out.nearest_violation = Some(a);
        }
    }
    out
}
