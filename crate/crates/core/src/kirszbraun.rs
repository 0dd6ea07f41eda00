//! Finite Kirszbraun extension.
//!
//! Given a Lipschitz map on finitely many points of `ℓ₂^a` with values in
//! `ℓ₂^b`, place a new point `x` by solving
//!
//! ```text
//! minimize_y  max_i ‖y − target_i‖ / ‖x − source_i‖
//! ```
//!
//! Kirszbraun's theorem says the optimum never exceeds the Lipschitz constant
//! of the map, so a solution accurate to a relative `tol` keeps the extended
//! map `lip·(1 + tol)`-Lipschitz.
//!
//! The solver works on the epigraph form `min s  s.t. κ_i‖z − τ_i‖² ≤ s`
//! (normalized coordinates) with a log-barrier Newton method. Stopping uses a
//! duality-gap certificate: the barrier multipliers, renormalized onto the
//! simplex, give a closed-form lower bound on the optimum.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dist, solve_dense, Matrix, PointCloud};

/// Default relative tolerance of the extension.
pub const DEFAULT_TOL: f64 = 1e-7;

/// Sources closer than this (relative to the problem scale) are duplicates.
pub const DUPLICATE_REL_TOL: f64 = 1e-12;

const BARRIER_GROWTH: f64 = 8.0;
const MAX_OUTER: usize = 64;
const MAX_NEWTON: usize = 80;

/// A map known on finitely many points, with its measured Lipschitz constant.
#[derive(Debug, Clone)]
pub struct PartialMap {
    sources: PointCloud,
    targets: PointCloud,
    lip: f64,
}

impl PartialMap {
    pub fn new(sources: PointCloud, targets: PointCloud) -> Result<Self> {
        if sources.len() != targets.len() {
            return Err(Error::LengthMismatch { expected: sources.len(), found: targets.len() });
        }
        let scale = diameter(&sources);
        let dup = DUPLICATE_REL_TOL * scale;
        let mut lip = 0.0_f64;
        for i in 0..sources.len() {
            for j in (i + 1)..sources.len() {
                let ds = sources.distance(i, j);
                let dt = targets.distance(i, j);
                if ds <= dup {
                    if dt != 0.0 {
                        return Err(Error::InconsistentDuplicate { index: j });
                    }
                    continue;
                }
                lip = lip.max(dt / ds);
            }
        }
        Ok(Self { sources, targets, lip })
    }

    pub fn sources(&self) -> &PointCloud {
        &self.sources
    }

    pub fn targets(&self) -> &PointCloud {
        &self.targets
    }

    pub fn lip(&self) -> f64 {
        self.lip
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.len() == 0
    }
}

fn diameter(c: &PointCloud) -> f64 {
    let mut d = 0.0_f64;
    for i in 0..c.len() {
        for j in (i + 1)..c.len() {
            d = d.max(c.distance(i, j));
        }
    }
    d
}

/// Result of a single-point extension.
#[derive(Debug, Clone, Serialize)]
pub struct ExtensionPoint {
    pub y: Vec<f64>,
    /// `max_i ‖y − target_i‖ / ‖x − source_i‖` (0 for exact duplicates).
    pub objective: f64,
    /// Certified lower bound on the optimal objective.
    pub lower_bound: f64,
    /// Norm of the convex combination of active unit directions at `y`.
    pub kkt_residual: f64,
    pub newton_steps: usize,
}

/// Place `x`; see [`solve_extension`] for the certificate data.
pub fn extend_one_point(m: &PartialMap, x: &[f64], tol: f64) -> Result<Vec<f64>> {
    Ok(solve_extension(m, x, tol)?.y)
}

pub fn solve_extension(m: &PartialMap, x: &[f64], tol: f64) -> Result<ExtensionPoint> {
    if m.is_empty() {
        return Err(Error::InvalidInput("extension needs at least one constraint".into()));
    }
    if x.len() != m.sources.dim() {
        return Err(Error::LengthMismatch { expected: m.sources.dim(), found: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { i: 0, j: x.iter().position(|v| !v.is_finite()).unwrap_or(0) });
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidInput(format!("tol must be nonnegative, got {tol}")));
    }
    let d: Vec<f64> = m.sources.iter().map(|s| dist(x, s)).collect();
    let scale = d.iter().copied().fold(0.0, f64::max).max(diameter(&m.sources));
    let dup = DUPLICATE_REL_TOL * scale;

    // exact or near duplicates pin the answer
    let mut pinned: Option<usize> = None;
    for (i, &di) in d.iter().enumerate() {
        if di <= dup {
            match pinned {
                None => pinned = Some(i),
                Some(p) if m.targets.point(p) != m.targets.point(i) => {
                    return Err(Error::InconsistentDuplicate { index: i });
                }
                _ => {}
            }
        }
    }
    if let Some(p) = pinned {
        let y = m.targets.point(p).to_vec();
        let objective = objective_at(m, &d, &y, dup);
        if objective > m.lip * (1.0 + tol) * (1.0 + 1e-12) {
            return Err(Error::InconsistentDuplicate { index: p });
        }
        return Ok(ExtensionPoint { y, objective, lower_bound: objective, kkt_residual: 0.0, newton_steps: 0 });
    }

    let target = m.lip * (1.0 + tol);
    let sol = barrier_minimax(&m.targets, &d, tol)?;
    let objective = objective_at(m, &d, &sol.y, dup);
    if objective > target * (1.0 + 1e-12) && objective > 0.0 {
        // Kirszbraun guarantees an optimum <= lip; reaching here means the
        // certificate could not be closed
        return Err(Error::SolverStall { objective, target, iterations: sol.newton_steps });
    }
    Ok(ExtensionPoint { objective, ..sol })
}

fn objective_at(m: &PartialMap, d: &[f64], y: &[f64], dup: f64) -> f64 {
    let mut obj = 0.0_f64;
    for (i, &di) in d.iter().enumerate() {
        if di > dup {
            obj = obj.max(dist(y, m.targets.point(i)) / di);
        }
    }
    obj
}

/// Minimize `max_i ‖y − t_i‖ / d_i` for strictly positive `d_i`.
fn barrier_minimax(targets: &PointCloud, d: &[f64], tol: f64) -> Result<ExtensionPoint> {
    let m = d.len();
    let dim = targets.dim();

    // weighted centroid, weights 1/d²
    let w: Vec<f64> = d.iter().map(|di| 1.0 / (di * di)).collect();
    let wsum: f64 = w.iter().sum();
    let mut center = vec![0.0; dim];
    for (i, wi) in w.iter().enumerate() {
        for (c, t) in center.iter_mut().zip(targets.point(i)) {
            *c += wi * t / wsum;
        }
    }
    let rho = targets.iter().map(|t| dist(t, &center)).fold(0.0, f64::max);
    let trivial = |y: Vec<f64>| ExtensionPoint { y, objective: 0.0, lower_bound: 0.0, kkt_residual: 0.0, newton_steps: 0 };
    if m == 1 {
        return Ok(trivial(targets.point(0).to_vec()));
    }
    let first = targets.point(0);
    if rho == 0.0 || targets.iter().all(|t| t == first) {
        return Ok(trivial(first.to_vec()));
    }

    // normalized problem: z = (y − c)/ρ, q_i(z) = κ_i ‖z − τ_i‖², max_i q_i(0) = 1
    let tau: Vec<Vec<f64>> = targets.iter().map(|t| t.iter().zip(&center).map(|(a, c)| (a - c) / rho).collect()).collect();
    let raw: Vec<f64> = d.iter().map(|di| rho * rho / (di * di)).collect();
    let s0 = (0..m).map(|i| raw[i] * tau[i].iter().map(|v| v * v).sum::<f64>()).fold(0.0, f64::max);
    let kappa: Vec<f64> = raw.iter().map(|r| r / s0).collect();

    let q = |z: &[f64], i: usize| kappa[i] * z.iter().zip(&tau[i]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let primal = |z: &[f64]| (0..m).map(|i| q(z, i)).fold(0.0, f64::max);

    // inner relative tolerance leaves room for sequential placements
    let inner = tol / 4.0;
    let gap_factor = 1.0 - 1.0 / ((1.0 + inner) * (1.0 + inner));

    let n = dim + 1;
    let mut z = vec![0.0; dim];
    let mut s = 2.0;
    let mut t = m as f64;
    let mut steps = 0usize;
    let mut best_gap = f64::INFINITY;
    let mut stalled_rounds = 0;
    let mut best_lower = 0.0_f64;

    for _outer in 0..MAX_OUTER {
        // centering
        for _ in 0..MAX_NEWTON {
            let r: Vec<f64> = (0..m).map(|i| s - q(&z, i)).collect();
            let mut grad = vec![0.0; n];
            let mut h = Matrix::zeros(n, n);
            grad[dim] = t;
            for i in 0..m {
                let inv = 1.0 / r[i];
                let inv2 = inv * inv;
                let g: Vec<f64> = z.iter().zip(&tau[i]).map(|(a, b)| 2.0 * kappa[i] * (a - b)).collect();
                grad[dim] -= inv;
                h[(dim, dim)] += inv2;
                for a in 0..dim {
                    grad[a] += g[a] * inv;
                    h[(a, dim)] -= g[a] * inv2;
                    h[(dim, a)] -= g[a] * inv2;
                    h[(a, a)] += 2.0 * kappa[i] * inv;
                    for b in 0..dim {
                        h[(a, b)] += g[a] * g[b] * inv2;
                    }
                }
            }
            let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
            let Some(step) = solve_dense(&h, &neg) else { break };
            let decrement: f64 = -grad.iter().zip(&step).map(|(a, b)| a * b).sum::<f64>();
            if !(decrement > 2e-14) {
                break;
            }
            steps += 1;
            let f0 = t * s - r.iter().map(|v| v.ln()).sum::<f64>();
            let mut lr = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let zn: Vec<f64> = z.iter().zip(&step).map(|(a, b)| a + lr * b).collect();
                let sn = s + lr * step[dim];
                let rn: Vec<f64> = (0..m).map(|i| sn - q(&zn, i)).collect();
                if rn.iter().all(|&v| v > 0.0) {
                    let f1 = t * sn - rn.iter().map(|v| v.ln()).sum::<f64>();
                    if f1 <= f0 - 0.25 * lr * decrement {
                        z = zn;
                        s = sn;
                        moved = true;
                        break;
                    }
                }
                lr *= 0.5;
            }
            if !moved {
                break;
            }
        }

        // dual certificate from barrier multipliers
        let lam: Vec<f64> = (0..m).map(|i| 1.0 / (t * (s - q(&z, i)))).collect();
        let lsum: f64 = lam.iter().sum();
        let lower = dual_value(&lam, lsum, &kappa, &tau, dim);
        let p = primal(&z);
        best_lower = best_lower.max(lower);
        if p == 0.0 || p - lower < gap_factor * p {
            let y: Vec<f64> = z.iter().zip(&center).map(|(a, c)| c + rho * a).collect();
            let kkt = kkt_residual(&lam, &kappa, &tau, &z);
            let to_obj = |v: f64| (v.max(0.0) * s0).sqrt();
            return Ok(ExtensionPoint {
                y,
                objective: to_obj(p),
                lower_bound: to_obj(lower),
                kkt_residual: kkt,
                newton_steps: steps,
            });
        }
        // progress is judged on the gap: the primal can plateau early
        let gap = p - lower;
        if gap < best_gap * 0.5 {
            best_gap = gap;
            stalled_rounds = 0;
        } else {
            stalled_rounds += 1;
            if stalled_rounds >= 3 {
                break;
            }
        }
        t *= BARRIER_GROWTH;
    }
    let p = primal(&z);
    Err(Error::SolverStall { objective: (p * s0).sqrt(), target: (best_lower.max(0.0) * s0).sqrt(), iterations: steps })
}

/// `min_z Σ λ_i κ_i ‖z − τ_i‖²` with `λ` renormalized to the simplex.
fn dual_value(lam: &[f64], lsum: f64, kappa: &[f64], tau: &[Vec<f64>], dim: usize) -> f64 {
    let mut wsum = 0.0;
    let mut mean = vec![0.0; dim];
    let mut sq = 0.0;
    for i in 0..lam.len() {
        let wi = lam[i] / lsum * kappa[i];
        wsum += wi;
        for (m, t) in mean.iter_mut().zip(&tau[i]) {
            *m += wi * t;
        }
        sq += wi * tau[i].iter().map(|v| v * v).sum::<f64>();
    }
    sq - mean.iter().map(|v| v * v).sum::<f64>() / wsum
}

/// `‖Σ w_i u_i‖` where `u_i` are unit directions from the targets to `z` and
/// `w_i ∝ λ_i κ_i ‖z − τ_i‖` sum to one.
fn kkt_residual(lam: &[f64], kappa: &[f64], tau: &[Vec<f64>], z: &[f64]) -> f64 {
    let mut acc = vec![0.0; z.len()];
    let mut wsum = 0.0;
    for i in 0..lam.len() {
        let diff: Vec<f64> = z.iter().zip(&tau[i]).map(|(a, b)| a - b).collect();
        let len = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len == 0.0 {
            continue;
        }
        let wi = lam[i] * kappa[i] * len;
        wsum += wi;
        for (a, v) in acc.iter_mut().zip(&diff) {
            *a += wi * v / len;
        }
    }
    if wsum == 0.0 {
        return 0.0;
    }
    acc.iter().map(|v| (v / wsum) * (v / wsum)).sum::<f64>().sqrt()
}

/// Extend `m` to every point of `xs` in order, adding each placed point to
/// the constraint set before the next, then verify the Lipschitz certificate
/// on `sources ∪ xs`.
pub fn extend_sequential(m: &PartialMap, xs: &PointCloud, tol: f64) -> Result<PointCloud> {
    if xs.dim() != m.sources.dim() && !xs.is_empty() {
        return Err(Error::LengthMismatch { expected: m.sources.dim(), found: xs.dim() });
    }
    let mut work = PartialMap { sources: m.sources.clone(), targets: m.targets.clone(), lip: m.lip };
    let mut out = PointCloud::zeros(0, m.targets.dim());
    for x in xs.iter() {
        let y = extend_one_point(&work, x, tol)?;
        work.sources.push(x);
        work.targets.push(&y);
        out.push(&y);
    }
    let bound = m.lip * (1.0 + tol);
    if let Some((i, j, ratio)) = lipschitz_excess(&work.sources, &work.targets, bound) {
        return Err(Error::CertificateViolation { i, j, ratio, bound });
    }
    Ok(out)
}

/// First pair whose ratio exceeds `bound` (up to rounding), if any.
pub fn lipschitz_excess(sources: &PointCloud, targets: &PointCloud, bound: f64) -> Option<(usize, usize, f64)> {
    let scale = diameter(sources);
    for i in 0..sources.len() {
        for j in (i + 1)..sources.len() {
            let ds = sources.distance(i, j);
            let dt = targets.distance(i, j);
            if ds <= DUPLICATE_REL_TOL * scale {
                if dt != 0.0 {
                    return Some((i, j, f64::INFINITY));
                }
                continue;
            }
            let ratio = dt / ds;
            if ratio > bound * (1.0 + 1e-12) {
                return Some((i, j, ratio));
            }
        }
    }
    None
}

/// Largest pairwise ratio `‖t_i − t_j‖ / ‖s_i − s_j‖`.
pub fn lipschitz_constant(sources: &PointCloud, targets: &PointCloud) -> f64 {
    let mut lip = 0.0_f64;
    for i in 0..sources.len() {
        for j in (i + 1)..sources.len() {
            let ds = sources.distance(i, j);
            if ds > 0.0 {
                lip = lip.max(targets.distance(i, j) / ds);
            }
        }
    }
    lip
}
