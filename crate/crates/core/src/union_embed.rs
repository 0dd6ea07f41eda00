//! Embedding `X = A ∪ B` into `ℓ₂^{a+b+1}` from embeddings of `A` and `B`.
//!
//! `ψ_B: X → ℓ₂^b` equals `φ_B` on `B`. On an α-cover `A′` of `A` it is
//! `φ_B ∘ f` (`f` the nearest-point map to `B`), and on the rest of `A` it is
//! the Kirszbraun extension of `g = φ_B f φ_A⁻¹` evaluated at `φ_A(a)`.
//! `ψ_A` is the same construction with the sides exchanged, and
//! `ψ_Δ(a) = γR_a`, `ψ_Δ(b) = −γR_b`. The result is
//! `Ψ = ψ_A ⊕ ψ_B ⊕ ψ_Δ`.
//!
//! Every inequality the bounds rest on is re-measured pairwise and recorded
//! as an [`AuditEntry`].

use serde::Serialize;

use crate::audit::{first_failure, pair_extremum, pairwise_distances, AuditEntry, AUDIT_REL_TOL};
use crate::cover::{build_cover, check_cover, f_lipschitz_bound, CoverResult};
use crate::error::{Error, Result};
use crate::kirszbraun::{extend_sequential, PartialMap, DEFAULT_TOL};
use crate::linalg::{direct_sum, mds_isometric_embed, PointCloud, DEFAULT_MDS_TOL};
use crate::metric::{distortion_of, DistortionReport, FiniteMetricSpace, UnionPartition};

/// α for general input distortions.
pub const ALPHA_GENERAL: f64 = 0.5;
/// α when both sides embed isometrically.
pub const ALPHA_ISOMETRIC: f64 = 0.3114;
/// Distortion bound at `ALPHA_ISOMETRIC` with `D_A = D_B = 1`.
pub const ISOMETRIC_BOUND: f64 = 8.93;
/// Tolerance for treating a distortion as exactly 1.
pub const UNIT_DISTORTION_TOL: f64 = 1e-12;
/// Non-contraction of `Ψ` is audited to this relative tolerance.
pub const NONCONTRACTION_TOL: f64 = 1e-9;
/// Floor on the slack granted to input embeddings (distance rounding).
pub const INPUT_ROUNDING: f64 = 1e-12;

pub fn select_alpha(d_a: f64, d_b: f64) -> f64 {
    if (d_a - 1.0).abs() <= UNIT_DISTORTION_TOL && (d_b - 1.0).abs() <= UNIT_DISTORTION_TOL {
        ALPHA_ISOMETRIC
    } else {
        ALPHA_GENERAL
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmbedParams {
    pub alpha: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub beta: f64,
    pub gamma: f64,
    pub tol: f64,
}

impl EmbedParams {
    pub fn new(alpha: f64, d_a: f64, d_b: f64, tol: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        if !(d_a >= 1.0 && d_b >= 1.0 && d_a.is_finite() && d_b.is_finite()) {
            return Err(Error::InvalidInput(format!("distortions must be finite and >= 1, got {d_a}, {d_b}")));
        }
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidInput(format!("tol must be nonnegative, got {tol}")));
        }
        let beta = (1.0 + alpha) * (2.0 * d_a * d_b + 1.0);
        let gamma = (0.5_f64).sqrt() * beta;
        Ok(Self { alpha, d_a, d_b, beta, gamma, tol })
    }

    /// Parameters with `alpha` picked by [`select_alpha`].
    pub fn auto(d_a: f64, d_b: f64, tol: f64) -> Result<Self> {
        Self::new(select_alpha(d_a, d_b), d_a, d_b, tol)
    }

    /// Override `γ`; used to check that the audit notices a broken `ψ_Δ`.
    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn swapped(&self) -> Self {
        Self { d_a: self.d_b, d_b: self.d_a, ..*self }
    }

    pub fn is_isometric_case(&self) -> bool {
        self.alpha == ALPHA_ISOMETRIC
            && (self.d_a - 1.0).abs() <= UNIT_DISTORTION_TOL
            && (self.d_b - 1.0).abs() <= UNIT_DISTORTION_TOL
    }

    /// `2(1+1/α)·D_A·D_B`
    pub fn psi_a_pair_bound(&self) -> f64 {
        f_lipschitz_bound(self.alpha) * self.d_a * self.d_b
    }

    /// `2(1+α)·D_A·D_B + (2+α)·D_B`
    pub fn psi_cross_bound(&self) -> f64 {
        2.0 * (1.0 + self.alpha) * self.d_a * self.d_b + (2.0 + self.alpha) * self.d_b
    }

    /// `ξ_A = 2(1+α)·D_A·D_B + (2+α)·D_A`
    pub fn xi_a(&self) -> f64 {
        2.0 * (1.0 + self.alpha) * self.d_a * self.d_b + (2.0 + self.alpha) * self.d_a
    }

    pub fn xi_b(&self) -> f64 {
        2.0 * (1.0 + self.alpha) * self.d_a * self.d_b + (2.0 + self.alpha) * self.d_b
    }

    /// Squared expansion bound for pairs inside `A`.
    pub fn a_pair_sq_bound(&self) -> f64 {
        let s = f_lipschitz_bound(self.alpha) * self.d_a * self.d_b;
        self.d_a * self.d_a + s * s + self.gamma * self.gamma
    }

    pub fn b_pair_sq_bound(&self) -> f64 {
        let s = f_lipschitz_bound(self.alpha) * self.d_a * self.d_b;
        self.d_b * self.d_b + s * s + self.gamma * self.gamma
    }

    pub fn cross_sq_bound(&self) -> f64 {
        self.xi_a().powi(2) + self.xi_b().powi(2) + 4.0 * self.gamma * self.gamma
    }

    /// `7·D_A·D_B + 2(D_A + D_B)`
    pub fn general_bound(&self) -> f64 {
        7.0 * self.d_a * self.d_b + 2.0 * (self.d_a + self.d_b)
    }

    /// The distortion bound that applies to these parameters.
    pub fn distortion_bound(&self) -> f64 {
        if self.is_isometric_case() {
            ISOMETRIC_BOUND
        } else if self.alpha == ALPHA_GENERAL {
            self.general_bound()
        } else {
            self.a_pair_sq_bound().max(self.b_pair_sq_bound()).max(self.cross_sq_bound()).sqrt()
        }
    }
}

/// Contraction and expansion of `phi` as a map from the points `idx`.
pub fn input_distortion(x: &FiniteMetricSpace, idx: &[usize], phi: &PointCloud) -> Result<DistortionReport> {
    distortion_of(x, phi, Some(idx))
}

fn check_input(x: &FiniteMetricSpace, idx: &[usize], phi: &PointCloud, bound: f64, tol: f64, side: &str) -> Result<()> {
    if phi.len() != idx.len() {
        return Err(Error::LengthMismatch { expected: idx.len(), found: phi.len() });
    }
    let r = input_distortion(x, idx, phi)?;
    let tol = tol.max(INPUT_ROUNDING);
    if r.contraction > 1.0 + tol || r.expansion > bound * (1.0 + tol) {
        return Err(Error::InputDistortion {
            side: side.to_string(),
            contraction: r.contraction,
            expansion: r.expansion,
            bound,
        });
    }
    Ok(())
}

/// `ψ_B` together with the data used to build it.
#[derive(Debug, Clone, Serialize)]
pub struct PsiMap {
    pub psi: PointCloud,
    pub cover: CoverResult,
    /// Lipschitz constant of `g = φ_B f φ_A⁻¹` on `φ_A(A′)`.
    pub g_lip: f64,
    /// Points of `A` placed by Kirszbraun extension, in placement order.
    pub extended: Vec<usize>,
    pub audit: Vec<AuditEntry>,
}

/// Build `ψ: X → ℓ₂^b` from `φ_A` (over `A`) and `φ_B` (over `B`).
///
/// Invalid inputs are errors; inequality failures are recorded in
/// `audit` so the caller can report them.
pub fn build_psi(
    x: &FiniteMetricSpace,
    p: &UnionPartition,
    phi_a: &PointCloud,
    phi_b: &PointCloud,
    params: &EmbedParams,
) -> Result<PsiMap> {
    if p.n() != x.len() {
        return Err(Error::LengthMismatch { expected: x.len(), found: p.n() });
    }
    check_input(x, &p.idx_a, phi_a, params.d_a, params.tol, "A")?;
    check_input(x, &p.idx_b, phi_b, params.d_b, params.tol, "B")?;

    let cover = build_cover(x, p, params.alpha)?;
    let phi_a_at = |g: usize| phi_a.point(p.pos_in_a(g).expect("index in A"));
    let phi_b_at = |g: usize| phi_b.point(p.pos_in_b(g).expect("index in B"));

    let sources = PointCloud::from_points(cover.cover_idx.iter().map(|&a| phi_a_at(a).to_vec()).collect())?;
    let targets = PointCloud::from_points(cover.nearest.iter().map(|&b| phi_b_at(b).to_vec()).collect())?;
    let (sources, targets) = with_dims(sources, phi_a.dim(), targets, phi_b.dim());
    let g = PartialMap::new(sources, targets)?;
    let g_lip = g.lip();

    let extended: Vec<usize> = p.idx_a.iter().copied().filter(|&a| !cover.contains(a)).collect();
    let mut xs = PointCloud::zeros(0, phi_a.dim());
    for &a in &extended {
        xs.push(phi_a_at(a));
    }
    let ys = if extended.is_empty() { PointCloud::zeros(0, phi_b.dim()) } else { extend_sequential(&g, &xs, params.tol)? };

    let mut psi = PointCloud::zeros(x.len(), phi_b.dim());
    for (k, &b) in p.idx_b.iter().enumerate() {
        psi.set_point(b, phi_b.point(k));
    }
    for (k, &a) in cover.cover_idx.iter().enumerate() {
        if !p.in_b(a) {
            psi.set_point(a, phi_b_at(cover.nearest[k]));
        }
    }
    for (k, &a) in extended.iter().enumerate() {
        psi.set_point(a, ys.point(k));
    }

    let audit = audit_psi(x, p, &psi, &cover, g_lip, params);
    Ok(PsiMap { psi, cover, g_lip, extended, audit })
}

// from_points cannot infer a dimension from zero points
fn with_dims(s: PointCloud, sd: usize, t: PointCloud, td: usize) -> (PointCloud, PointCloud) {
    let s = if s.is_empty() { PointCloud::zeros(0, sd) } else { s };
    let t = if t.is_empty() { PointCloud::zeros(0, td) } else { t };
    (s, t)
}

fn audit_psi(
    x: &FiniteMetricSpace,
    p: &UnionPartition,
    psi: &PointCloud,
    cover: &CoverResult,
    g_lip: f64,
    params: &EmbedParams,
) -> Vec<AuditEntry> {
    let n = x.len();
    let e = pairwise_distances(psi);
    let ratio = |i: usize, j: usize| e[(i, j)] / x.d(i, j);
    let mut out = Vec::new();

    let chk = check_cover(x, p, cover);
    out.push(AuditEntry::zero_count(
        "cover.property1",
        chk.property1_violation.is_some() as usize,
        chk.property1_violation.map(|a| (a, a)),
        p.idx_a.len(),
    ));
    out.push(AuditEntry::zero_count("cover.property2", chk.property2_violation.is_some() as usize, chk.property2_violation, cover.cover_idx.len()));
    out.push(AuditEntry::zero_count(
        "cover.nearest",
        chk.nearest_violation.is_some() as usize,
        chk.nearest_violation.map(|a| (a, a)),
        cover.cover_idx.len(),
    ));
    out.push(AuditEntry::upper("f.lipschitz", f_lipschitz_bound(params.alpha), cover.lip_f, None, cover.cover_idx.len()));
    out.push(AuditEntry::upper("g.lipschitz", f_lipschitz_bound(params.alpha) * params.d_b, g_lip, None, cover.cover_idx.len()));

    let (m, w, c) = pair_extremum(n, true, |i, j| (p.in_a(i) && p.in_a(j)).then(|| ratio(i, j)));
    out.push(AuditEntry::upper("A_pairs.expansion", params.psi_a_pair_bound(), m, w, c));

    let (m, w, c) = pair_extremum(n, false, |i, j| (p.in_b(i) && p.in_b(j)).then(|| ratio(i, j)));
    out.push(AuditEntry::lower("B_pairs.contraction", 1.0, m, w, c));
    let (m, w, c) = pair_extremum(n, true, |i, j| (p.in_b(i) && p.in_b(j)).then(|| ratio(i, j)));
    out.push(AuditEntry::upper("B_pairs.expansion", params.d_b, m, w, c));

    let cross = |i: usize, j: usize| -> Option<(usize, usize)> {
        if p.in_a(i) && p.in_b(j) {
            Some((i, j))
        } else if p.in_a(j) && p.in_b(i) {
            Some((j, i))
        } else {
            None
        }
    };
    let (m, w, c) = pair_extremum(n, true, |i, j| cross(i, j).map(|_| ratio(i, j)));
    out.push(AuditEntry::upper("cross_pairs.expansion", params.psi_cross_bound(), m, w, c));
    // d(a,b) − β·R_a ≤ ‖ψ(a) − ψ(b)‖, normalized by d(a,b)
    let (m, w, c) = pair_extremum(n, false, |i, j| {
        cross(i, j).map(|(a, _)| (e[(i, j)] - x.d(i, j) + params.beta * p.r_of_a(a)) / x.d(i, j))
    });
    out.push(AuditEntry::lower("cross_pairs.lower", 0.0, m, w, c));
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct UnionEmbedding {
    pub params: EmbedParams,
    pub psi_a: PointCloud,
    pub psi_b: PointCloud,
    pub psi_delta: PointCloud,
    pub full: PointCloud,
    pub report: DistortionReport,
    pub audit: Vec<AuditEntry>,
    /// Cover of `A` used for `ψ_B`.
    pub cover_a: CoverResult,
    /// Cover of `B` used for `ψ_A`.
    pub cover_b: CoverResult,
}

impl UnionEmbedding {
    pub fn passed(&self) -> bool {
        self.audit.iter().all(|e| e.pass)
    }

    pub fn first_failure(&self) -> Option<Error> {
        first_failure(&self.audit)
    }

    pub fn audit_entry(&self, name: &str) -> Option<&AuditEntry> {
        self.audit.iter().find(|e| e.name == name)
    }
}

pub fn embed_union(
    x: &FiniteMetricSpace,
    p: &UnionPartition,
    phi_a: &PointCloud,
    phi_b: &PointCloud,
    params: &EmbedParams,
) -> Result<UnionEmbedding> {
    let sb = build_psi(x, p, phi_a, phi_b, params)?;
    let sa = build_psi(x, &p.swapped(), phi_b, phi_a, &params.swapped())?;

    let mut psi_delta = PointCloud::zeros(x.len(), 1);
    for (k, &a) in p.idx_a.iter().enumerate() {
        psi_delta.point_mut(a)[0] = params.gamma * p.r_a[k];
    }
    for (k, &b) in p.idx_b.iter().enumerate() {
        if !p.in_a(b) {
            psi_delta.point_mut(b)[0] = -params.gamma * p.r_b[k];
        }
    }
    let full = direct_sum(&[&sa.psi, &sb.psi, &psi_delta])?;
    let report = match distortion_of(x, &full, None) {
        Err(Error::CollapsedPair { i, j }) => collapsed_report(x.len(), i, j),
        r => r?,
    };

    let mut audit = Vec::new();
    audit.extend(sb.audit.into_iter().map(|mut e| {
        e.name = format!("psi_B.{}", e.name);
        e
    }));
    audit.extend(sa.audit.into_iter().map(|mut e| {
        e.name = format!("psi_A.{}", e.name);
        // witnesses of the swapped audit already use global indices
        e
    }));
    audit.extend(audit_full(x, p, phi_a, phi_b, &psi_delta, &full, &report, params));

    Ok(UnionEmbedding {
        params: *params,
        psi_a: sa.psi,
        psi_b: sb.psi,
        psi_delta,
        full,
        report,
        audit,
        cover_a: sb.cover,
        cover_b: sa.cover,
    })
}

// a collapsed pair is reported as infinite contraction so the audit can name it
fn collapsed_report(n: usize, i: usize, j: usize) -> DistortionReport {
    DistortionReport {
        expansion: f64::NAN,
        contraction: f64::INFINITY,
        distortion: f64::INFINITY,
        expansion_pair: None,
        contraction_pair: Some((i, j)),
        pairs: n * (n - 1) / 2,
    }
}

#[allow(clippy::too_many_arguments)]
fn audit_full(
    x: &FiniteMetricSpace,
    p: &UnionPartition,
    phi_a: &PointCloud,
    phi_b: &PointCloud,
    psi_delta: &PointCloud,
    full: &PointCloud,
    report: &DistortionReport,
    params: &EmbedParams,
) -> Vec<AuditEntry> {
    let n = x.len();
    let e = pairwise_distances(full);
    let ratio = |i: usize, j: usize| e[(i, j)] / x.d(i, j);
    let mut out = Vec::new();

    let (m, w, c) = pair_extremum(n, false, |i, j| Some(ratio(i, j)));
    out.push(AuditEntry::lower_tol("Psi.noncontracting", 1.0, m, w, c, NONCONTRACTION_TOL));

    let (m, w, c) = pair_extremum(n, true, |i, j| (p.in_a(i) && p.in_a(j)).then(|| ratio(i, j).powi(2)));
    out.push(AuditEntry::upper("Psi.A_pairs.expansion_sq", params.a_pair_sq_bound(), m, w, c));
    let (m, w, c) = pair_extremum(n, true, |i, j| (p.in_b(i) && p.in_b(j)).then(|| ratio(i, j).powi(2)));
    out.push(AuditEntry::upper("Psi.B_pairs.expansion_sq", params.b_pair_sq_bound(), m, w, c));

    let cross = |i: usize, j: usize| -> Option<(usize, usize)> {
        if p.in_a(i) && p.in_b(j) {
            Some((i, j))
        } else if p.in_a(j) && p.in_b(i) {
            Some((j, i))
        } else {
            None
        }
    };
    let (m, w, c) = pair_extremum(n, true, |i, j| cross(i, j).map(|_| ratio(i, j).powi(2)));
    out.push(AuditEntry::upper("Psi.cross_pairs.expansion_sq", params.cross_sq_bound(), m, w, c));

    // the three cases of the contraction argument, by where d(a,b) sits
    // relative to β·min(R_a, R_b) and β·max(R_a, R_b)
    let case_of = |i: usize, j: usize| -> Option<u8> {
        let (a, b) = cross(i, j)?;
        let (ra, rb) = (p.r_of_a(a), p.r_of_b(b));
        let d = x.d(i, j);
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        Some(if params.beta * hi <= d {
            1
        } else if params.beta * lo <= d {
            2
        } else {
            3
        })
    };
    for case in 1..=3u8 {
        let (m, w, c) = pair_extremum(n, false, |i, j| (case_of(i, j) == Some(case)).then(|| ratio(i, j)));
        out.push(AuditEntry::lower_tol(format!("Psi.cross_pairs.contraction.case{case}"), 1.0, m, w, c, NONCONTRACTION_TOL));
    }

    let bound = params.distortion_bound();
    let entry = if params.is_isometric_case() {
        AuditEntry::strict_upper("Psi.distortion", bound, report.distortion, report.expansion_pair, report.pairs)
    } else {
        AuditEntry::upper("Psi.distortion", bound, report.distortion, report.expansion_pair, report.pairs)
    };
    out.push(entry);

    // furthermore clause: Ψ dominates φ_A on A and φ_B on B
    let (m, w, c) = pair_extremum(n, false, |i, j| {
        let (pi, pj) = (p.pos_in_a(i)?, p.pos_in_a(j)?);
        Some(e[(i, j)] / phi_a.distance(pi, pj))
    });
    out.push(AuditEntry::lower_tol("Psi.dominates_phi_A", 1.0, m, w, c, 1e-12));
    let (m, w, c) = pair_extremum(n, false, |i, j| {
        let (pi, pj) = (p.pos_in_b(i)?, p.pos_in_b(j)?);
        Some(e[(i, j)] / phi_b.distance(pi, pj))
    });
    out.push(AuditEntry::lower_tol("Psi.dominates_phi_B", 1.0, m, w, c, 1e-12));

    let (m, w, c) = pair_extremum(n, true, |i, j| {
        (p.in_a(i) && p.in_a(j)).then(|| psi_delta.distance(i, j) / x.d(i, j))
    });
    out.push(AuditEntry::upper("psi_delta.lipschitz_on_A", params.gamma, m, w, c));
    let (m, w, c) = pair_extremum(n, true, |i, j| {
        (p.in_b(i) && p.in_b(j)).then(|| psi_delta.distance(i, j) / x.d(i, j))
    });
    out.push(AuditEntry::upper("psi_delta.lipschitz_on_B", params.gamma, m, w, c));
    let overlap = p.overlap();
    let worst = overlap.iter().map(|&v| psi_delta.point(v)[0].abs()).fold(0.0, f64::max);
    out.push(AuditEntry::upper_tol("psi_delta.overlap_zero", 0.0, worst, None, overlap.len(), 0.0));
    let _ = AUDIT_REL_TOL;
    out
}

/// Inputs after measurement: `φ_A`, `φ_B` and their distortions.
#[derive(Debug, Clone, Serialize)]
pub struct PreparedInputs {
    pub phi_a: PointCloud,
    pub phi_b: PointCloud,
    pub d_a: f64,
    pub d_b: f64,
    /// Factors applied to make each input non-contracting.
    pub scale_a: f64,
    pub scale_b: f64,
}

/// Fill in missing embeddings by MDS, rescale each side to be
/// non-contracting, and measure `D_A`, `D_B` from the data.
///
/// Measured distortions within `tol` of 1 are taken to be exactly 1.
pub fn prepare_inputs(
    x: &FiniteMetricSpace,
    p: &UnionPartition,
    phi_a: Option<&PointCloud>,
    phi_b: Option<&PointCloud>,
    tol: f64,
) -> Result<PreparedInputs> {
    let side = |idx: &[usize], phi: Option<&PointCloud>| -> Result<(PointCloud, f64, f64)> {
        let phi = match phi {
            Some(c) => c.clone(),
            None => mds_isometric_embed(&x.restrict(idx), DEFAULT_MDS_TOL)?,
        };
        let r = input_distortion(x, idx, &phi)?;
        let scale = if r.contraction > 1.0 { r.contraction } else { 1.0 };
        let phi = if scale != 1.0 { phi.scaled(scale) } else { phi };
        let mut d = r.distortion.max(1.0);
        if d - 1.0 <= tol {
            d = 1.0;
        }
        Ok((phi, d, scale))
    };
    let (phi_a, d_a, scale_a) = side(&p.idx_a, phi_a)?;
    let (phi_b, d_b, scale_b) = side(&p.idx_b, phi_b)?;
    Ok(PreparedInputs { phi_a, phi_b, d_a, d_b, scale_a, scale_b })
}

/// [`embed_union`] with inputs prepared by [`prepare_inputs`] and `α` chosen
/// by [`select_alpha`] unless given.
pub fn embed_union_auto(
    x: &FiniteMetricSpace,
    p: &UnionPartition,
    phi_a: Option<&PointCloud>,
    phi_b: Option<&PointCloud>,
    alpha: Option<f64>,
    tol: Option<f64>,
) -> Result<UnionEmbedding> {
    let tol = tol.unwrap_or(DEFAULT_TOL);
    let inp = prepare_inputs(x, p, phi_a, phi_b, tol)?;
    let alpha = alpha.unwrap_or_else(|| select_alpha(inp.d_a, inp.d_b));
    let params = EmbedParams::new(alpha, inp.d_a, inp.d_b, tol)?;
    embed_union(x, p, &inp.phi_a, &inp.phi_b, &params)
}
