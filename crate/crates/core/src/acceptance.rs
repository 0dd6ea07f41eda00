//! The acceptance suite, shared by the `selftest` command and the test target.

use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::glue::{external_extend, glued_metric, ExternalExtension};
use crate::kirszbraun::{extend_sequential, lipschitz_excess, solve_extension, PartialMap, DEFAULT_TOL};
use crate::linalg::{mds_best_effort, Matrix, PointCloud};
use crate::lower_bound::{build_123_metric, certified_lower_bound, draw_split, ratio_check, sample_split, BipartiteSplit, MAX_ATTEMPTS};
use crate::metric::{distortion_of, validate_metric, FiniteMetricSpace};
use crate::rng::stream;
use crate::testgen::{diagonal_distort, order_reversing_glue, random_glue, random_instance};
use crate::union_embed::{embed_union, embed_union_auto, EmbedParams, UnionEmbedding, ALPHA_GENERAL, ALPHA_ISOMETRIC, ISOMETRIC_BOUND};

pub const MAIN_INSTANCES: u64 = 50;
pub const DISTORTED_INSTANCES: u64 = 20;
pub const DISTORTED_LEVELS: [f64; 3] = [1.5, 2.0, 3.0];
pub const KIRSZBRAUN_MAPS: u64 = 100;
pub const PLANAR_CASES: u64 = 20;
pub const PLANAR_TOL: f64 = 1e-3;
pub const LOWER_BOUND_SIZES: [usize; 3] = [16, 64, 256];
pub const RANDOM_PROJECTIONS: u64 = 10;
pub const GLUE_INSTANCES: u64 = 20;
pub const MAIN_RUNTIME_LIMIT: Duration = Duration::from_secs(60);
pub const BOUND_SLACK: f64 = 1e-6;
pub const NONCONTRACTION_SLACK: f64 = 1e-9;
pub const LOWER_BOUND_SLACK: f64 = 1e-9;
pub const METRIC_CHECK_MAX_POINTS: usize = 128;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub detail: String,
    /// Wall time; kept out of the JSON so reports stay byte-identical.
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub criteria: Vec<CriterionResult>,
    pub all_pass: bool,
}

impl SuiteReport {
    /// One `PASS`/`FAIL` line per criterion.
    pub fn table(&self) -> String {
        let mut s = String::new();
        for c in &self.criteria {
            s.push_str(&format!("[{}] {:>2} {:<28} {}\n", if c.pass { "PASS" } else { "FAIL" }, c.id, c.name, c.detail));
        }
        s
    }
}

fn record(id: u32, name: &str, start: Instant, outcome: Result<(bool, String)>) -> CriterionResult {
    let (pass, detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error {}: {e}", e.name())),
    };
    CriterionResult { id, name: name.to_string(), pass, detail, elapsed: start.elapsed() }
}

/// Embeddings produced by criteria 1–3, reused by 4 and 5.
struct EmbedRuns {
    runs: Vec<UnionEmbedding>,
}

fn failed_psi_entries(u: &UnionEmbedding, prefix: &str) -> Vec<String> {
    let mut bad = Vec::new();
    for side in ["psi_A.", "psi_B."] {
        for e in u.audit.iter().filter(|e| e.name.starts_with(side) && e.name[side.len()..].starts_with(prefix)) {
            if !e.pass {
                bad.push(format!("{} measured {:.6e} bound {:.6e} at {:?}", e.name, e.measured, e.bound, e.witness));
            }
        }
    }
    bad
}

fn criterion_main(seed: u64, alpha: f64, runs: &mut EmbedRuns) -> Result<(bool, String, f64, f64)> {
    let mut worst_min_ratio = f64::INFINITY;
    let mut worst_distortion = 0.0_f64;
    let mut failures = Vec::new();
    for k in 0..MAIN_INSTANCES {
        let inst = random_instance(seed, k)?;
        let params = EmbedParams::new(alpha, 1.0, 1.0, DEFAULT_TOL)?;
        let u = embed_union(&inst.space, &inst.partition, &inst.phi_a, &inst.phi_b, &params)?;
        worst_min_ratio = worst_min_ratio.min(u.report.min_ratio());
        worst_distortion = worst_distortion.max(u.report.distortion);
        let ok = if alpha == ALPHA_ISOMETRIC {
            u.report.distortion < ISOMETRIC_BOUND
        } else {
            u.report.distortion <= params.general_bound() + BOUND_SLACK
        };
        if !ok || u.report.min_ratio() < 1.0 - NONCONTRACTION_SLACK {
            failures.push(k);
        }
        runs.runs.push(u);
    }
    Ok((failures.is_empty(), format!("failing instances {failures:?}"), worst_min_ratio, worst_distortion))
}

fn criterion_distorted(seed: u64, runs: &mut EmbedRuns) -> Result<(bool, String)> {
    let mut failures = Vec::new();
    let mut worst_ratio = 0.0_f64;
    for k in 0..DISTORTED_INSTANCES {
        let inst = random_instance(seed, 1000 + k)?;
        let da = DISTORTED_LEVELS[(k % 3) as usize];
        let db = DISTORTED_LEVELS[((k / 3) % 3) as usize];
        let phi_a = diagonal_distort(&inst.phi_a, da);
        let phi_b = diagonal_distort(&inst.phi_b, db);
        let params = EmbedParams::new(ALPHA_GENERAL, da, db, DEFAULT_TOL)?;
        let u = embed_union(&inst.space, &inst.partition, &phi_a, &phi_b, &params)?;
        let bound = params.general_bound();
        worst_ratio = worst_ratio.max(u.report.distortion / bound);
        if u.report.distortion > bound + BOUND_SLACK || u.report.min_ratio() < 1.0 - NONCONTRACTION_SLACK {
            failures.push(k);
        }
        runs.runs.push(u);
    }
    Ok((failures.is_empty(), format!("max distortion/bound {worst_ratio:.6}, failing {failures:?}")))
}

fn criterion_psi_bounds(runs: &EmbedRuns) -> (bool, String) {
    let mut bad = Vec::new();
    let mut min_slack = f64::INFINITY;
    for (k, u) in runs.runs.iter().enumerate() {
        for prefix in ["A_pairs.", "B_pairs.", "cross_pairs."] {
            for msg in failed_psi_entries(u, prefix) {
                bad.push(format!("run {k}: {msg}"));
            }
        }
        for e in u.audit.iter().filter(|e| e.name.ends_with("cross_pairs.lower")) {
            min_slack = min_slack.min(e.slack);
        }
    }
    let first = bad.first().cloned().unwrap_or_default();
    (bad.is_empty(), format!("{} runs, min cross lower slack {:.3e}, violations {} {}", runs.runs.len(), min_slack, bad.len(), first))
}

fn criterion_cover(runs: &EmbedRuns) -> (bool, String) {
    let mut bad = Vec::new();
    let mut worst_lip = 0.0_f64;
    for (k, u) in runs.runs.iter().enumerate() {
        for msg in failed_psi_entries(u, "cover.").into_iter().chain(failed_psi_entries(u, "f.lipschitz")) {
            bad.push(format!("run {k}: {msg}"));
        }
        let bound = crate::cover::f_lipschitz_bound(u.params.alpha);
        worst_lip = worst_lip.max(u.cover_a.lip_f / bound).max(u.cover_b.lip_f / bound);
    }
    let first = bad.first().cloned().unwrap_or_default();
    (bad.is_empty(), format!("max lip(f)/bound {worst_lip:.4}, violations {} {}", bad.len(), first))
}

fn gaussian<R: Rng>(rng: &mut R, count: usize, dim: usize) -> PointCloud {
    let mut c = PointCloud::zeros(count, dim);
    for i in 0..count {
        for v in c.point_mut(i) {
            *v = rng.sample(StandardNormal);
        }
    }
    c
}

/// `min_y max_i ‖y − t_i‖ / d_i` by repeated grid refinement in the plane.
pub fn planar_grid_oracle(targets: &PointCloud, d: &[f64]) -> (Vec<f64>, f64) {
    let f = |y: &[f64]| {
        (0..targets.len()).map(|i| crate::linalg::dist(y, targets.point(i)) / d[i]).fold(0.0, f64::max)
    };
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for t in targets.iter() {
        for k in 0..2 {
            lo[k] = lo[k].min(t[k]);
            hi[k] = hi[k].max(t[k]);
        }
    }
    let mut center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
    let mut half = ((hi[0] - lo[0]).max(hi[1] - lo[1]) / 2.0).max(1e-9) * 1.01;
    const STEPS: i32 = 40;
    let mut best = (center.to_vec(), f(&center));
    for _ in 0..80 {
        let h = half / STEPS as f64;
        for i in -STEPS..=STEPS {
            for j in -STEPS..=STEPS {
                let y = [center[0] + i as f64 * h, center[1] + j as f64 * h];
                let v = f(&y);
                if v < best.1 {
                    best = (y.to_vec(), v);
                }
            }
        }
        center = [best.0[0], best.0[1]];
        half *= 0.5;
    }
    best
}

fn criterion_kirszbraun(seed: u64) -> Result<(bool, String)> {
    let mut bad = Vec::new();
    for k in 0..KIRSZBRAUN_MAPS {
        let mut rng = stream(seed, "acceptance.kirszbraun", k);
        let a = rng.random_range(1..=8usize);
        let b = rng.random_range(1..=8usize);
        let m = rng.random_range(2..=20usize);
        let extra = rng.random_range(1..=(40 - m));
        let map = PartialMap::new(gaussian(&mut rng, m, a), gaussian(&mut rng, m, b))?;
        let xs = gaussian(&mut rng, extra, a);
        let ys = extend_sequential(&map, &xs, DEFAULT_TOL)?;
        let mut s = map.sources().clone();
        let mut t = map.targets().clone();
        for i in 0..xs.len() {
            s.push(xs.point(i));
            t.push(ys.point(i));
        }
        if let Some(w) = lipschitz_excess(&s, &t, map.lip() * (1.0 + DEFAULT_TOL)) {
            bad.push(format!("map {k}: pair ({}, {}) ratio {:.9e}", w.0, w.1, w.2));
        }
    }
    let mut worst_planar = 0.0_f64;
    for k in 0..PLANAR_CASES {
        let mut rng = stream(seed, "acceptance.planar", k);
        let m = rng.random_range(2..=8usize);
        let map = PartialMap::new(gaussian(&mut rng, m, 2), gaussian(&mut rng, m, 2))?;
        let x: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
        let sol = solve_extension(&map, &x, DEFAULT_TOL)?;
        let d: Vec<f64> = map.sources().iter().map(|s| crate::linalg::dist(&x, s)).collect();
        let (_, v) = planar_grid_oracle(map.targets(), &d);
        // the optimal value is well conditioned; the minimiser need not be
        let err = (v - sol.objective).abs() / v.max(1.0);
        worst_planar = worst_planar.max(err);
        if err > PLANAR_TOL || sol.objective > v * (1.0 + DEFAULT_TOL) {
            bad.push(format!("planar {k}: error {err:.3e}"));
        }
    }
    let first = bad.first().cloned().unwrap_or_default();
    Ok((bad.is_empty(), format!("planar max error {worst_planar:.2e}, violations {} {}", bad.len(), first)))
}

/// Distortion with collapsed pairs counted as infinite.
fn distortion_or_inf(x: &FiniteMetricSpace, c: &PointCloud) -> Result<f64> {
    match distortion_of(x, c, None) {
        Ok(r) => Ok(r.distortion),
        Err(Error::CollapsedPair { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn random_projection(c: &PointCloud, out_dim: usize, seed: u64, index: u64) -> Result<PointCloud> {
    let mut rng = stream(seed, "acceptance.projection", index);
    let g = Matrix::from_fn(out_dim, c.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    c.map_points(out_dim, |p| g.matvec(p))
}

struct LowerBoundCase {
    split: BipartiteSplit,
    accepted: bool,
}

fn lower_bound_split(n: usize, seed: u64) -> Result<LowerBoundCase> {
    match sample_split(n, seed) {
        Ok(split) => Ok(LowerBoundCase { split, accepted: true }),
        Err(Error::RetryBudgetExceeded { .. }) => {
            // keep checking the certificate on the best draw available
            let mut best: Option<BipartiteSplit> = None;
            for attempt in 0..MAX_ATTEMPTS {
                if let Ok(s) = draw_split(n, seed, attempt) {
                    if best.as_ref().is_none_or(|b| s.delta_star < b.delta_star) {
                        best = Some(s);
                    }
                }
            }
            let split = best.ok_or(Error::RetryBudgetExceeded { attempts: MAX_ATTEMPTS })?;
            Ok(LowerBoundCase { split, accepted: false })
        }
        Err(e) => Err(e),
    }
}

fn criterion_lower_bound(seed: u64, s: usize, n: usize, spaces: &mut Vec<FiniteMetricSpace>) -> Result<(bool, String)> {
    let case = lower_bound_split(n, stream(seed, "acceptance.lower_bound", s as u64).random())?;
    let split = &case.split;
    let bound = certified_lower_bound(split);
    let (x, p) = build_123_metric(split)?;
    let emb = embed_union_auto(&x, &p, None, None, None, None)?;
    let own = emb.report.distortion;
    let mds = mds_best_effort(&x)?;
    let mds_d = distortion_or_inf(&x, &mds)?;
    let mut images = vec![emb.full.clone(), mds.clone()];
    let mut proj_min = f64::INFINITY;
    for k in 0..RANDOM_PROJECTIONS {
        let c = random_projection(&emb.full, emb.full.dim().min(2 * n), seed, (n as u64) << 8 | k)?;
        proj_min = proj_min.min(distortion_or_inf(&x, &c)?);
        images.push(c);
    }
    let mut ratio_ok = true;
    for c in &images {
        match ratio_check(split, c) {
            Ok(_) => {}
            Err(Error::RangeViolation { .. }) => ratio_ok = false,
            Err(e) => return Err(e),
        }
    }
    let respected = [own, mds_d, proj_min].iter().all(|&d| d >= bound - LOWER_BOUND_SLACK);
    let ok = case.accepted && split.delta_star < 1.0 && respected && ratio_ok;
    let detail = format!(
        "delta*={:.4}{} bound={:.4} own={:.4} mds={:.4} proj_min={:.4} ratio={}",
        split.delta_star,
        if case.accepted { "" } else { " (no draw below 1)" },
        bound,
        own,
        mds_d,
        proj_min,
        if ratio_ok { "ok" } else { "violated" }
    );
    if x.len() <= METRIC_CHECK_MAX_POINTS {
        spaces.push(x);
    }
    Ok((ok, detail))
}

/// Extra small 1/2/3 spaces for the validity check.
fn small_123_spaces(seed: u64) -> Vec<FiniteMetricSpace> {
    let mut out = Vec::new();
    for n in [4usize, 8, 16, 32] {
        for attempt in 0..4 {
            if let Ok(split) = draw_split(n, seed, attempt) {
                if let Ok((x, _)) = build_123_metric(&split) {
                    out.push(x);
                }
            }
        }
    }
    out
}

fn criterion_metric_validity(spaces: &[FiniteMetricSpace], glued: &[FiniteMetricSpace]) -> (bool, String) {
    let mut bad = 0;
    let mut checked = 0;
    for x in spaces.iter().chain(glued) {
        if x.len() > METRIC_CHECK_MAX_POINTS {
            continue;
        }
        checked += 1;
        if validate_metric(x.matrix()).is_err() {
            bad += 1;
        }
    }
    (bad == 0 && checked > 0, format!("{checked} spaces checked ({} glued), {bad} invalid", glued.len()))
}

fn criterion_glue(seed: u64, glued: &mut Vec<FiniteMetricSpace>) -> Result<(bool, String)> {
    let mut bad = Vec::new();
    let mut worst = 0.0_f64;
    for k in 0..GLUE_INSTANCES {
        let g = if k == 0 { order_reversing_glue()? } else { random_glue(seed, k)? };
        glued.push(glued_metric(&g)?.space);
        let e: ExternalExtension = external_extend(&g)?;
        let compatible = (0..g.a_idx.len()).all(|i| e.f1.point(g.a_idx[i]) == e.f2.point(g.f_of(i)));
        let dmax = e.distortion_f1.max(e.distortion_f2);
        worst = worst.max(dmax / e.bound);
        if !compatible || dmax > e.bound + BOUND_SLACK {
            bad.push(k);
        }
    }
    Ok((bad.is_empty(), format!("max distortion/(9d_f+2) {worst:.4}, failing {bad:?}")))
}

/// Run every criterion with instances derived from `seed`.
pub fn run_suite(seed: u64) -> SuiteReport {
    let mut criteria = Vec::new();
    let mut runs = EmbedRuns { runs: Vec::new() };

    let t = Instant::now();
    let main = criterion_main(seed, ALPHA_GENERAL, &mut runs);
    let elapsed = t.elapsed();
    let out = main.map(|(ok, msg, r, d)| {
        let fast = elapsed <= MAIN_RUNTIME_LIMIT;
        (ok && fast, format!("min ratio {r:.12}, max distortion {d:.6} (bound 11), {msg}{}", if fast { "" } else { ", over time limit" }))
    });
    criteria.push(record(1, "main bound alpha=1/2", t, out));

    let t = Instant::now();
    let iso = criterion_main(seed, ALPHA_ISOMETRIC, &mut runs).map(|(ok, msg, _, d)| (ok, format!("max distortion {d:.6} (bound 8.93), {msg}")));
    criteria.push(record(2, "isometric bound alpha=0.3114", t, iso));

    let t = Instant::now();
    criteria.push(record(3, "distorted inputs", t, criterion_distorted(seed, &mut runs)));

    let t = Instant::now();
    criteria.push(record(4, "psi pair bounds", t, Ok(criterion_psi_bounds(&runs))));

    let t = Instant::now();
    criteria.push(record(5, "alpha-cover properties", t, Ok(criterion_cover(&runs))));

    let t = Instant::now();
    criteria.push(record(6, "Kirszbraun certificate", t, criterion_kirszbraun(seed)));

    let mut lb_spaces = small_123_spaces(seed);
    for (s, &n) in LOWER_BOUND_SIZES.iter().enumerate() {
        let t = Instant::now();
        let name = format!("distortion lower bound n={n}");
        criteria.push(record(7, &name, t, criterion_lower_bound(seed, s, n, &mut lb_spaces)));
    }

    let mut glued = Vec::new();
    let t9 = Instant::now();
    let glue = criterion_glue(seed, &mut glued);
    let glue_elapsed = t9.elapsed();

    let t = Instant::now();
    criteria.push(record(8, "metric validity", t, Ok(criterion_metric_validity(&lb_spaces, &glued))));

    let mut c9 = record(9, "external extension", t9, glue);
    c9.elapsed = glue_elapsed;
    criteria.push(c9);

    let all_pass = criteria.iter().all(|c| c.pass);
    SuiteReport { seed, criteria, all_pass }
}

#[derive(Debug, Clone, Serialize)]
pub struct MutationReport {
    /// Dropping `ψ_Δ` must trip a contraction audit.
    pub gamma_zero_caught: bool,
    pub gamma_zero_audit: Option<String>,
    pub gamma_zero_witness: Option<(usize, usize)>,
    /// `tol = 0` must surface as a solver stall.
    pub tol_zero_error: Option<String>,
}

impl MutationReport {
    pub fn pass(&self) -> bool {
        self.gamma_zero_caught && self.tol_zero_error.as_deref() == Some("SolverStall")
    }
}

/// Deliberately broken runs that the audit must catch.
pub fn run_mutations(seed: u64) -> Result<MutationReport> {
    let inst = random_instance(seed, 0)?;
    let params = EmbedParams::new(ALPHA_GENERAL, 1.0, 1.0, DEFAULT_TOL)?.with_gamma(0.0);
    let broken = embed_union(&inst.space, &inst.partition, &inst.phi_a, &inst.phi_b, &params)?;
    let fail = broken.audit.iter().find(|e| !e.pass && e.name.contains("contraction") || !e.pass && e.name == "Psi.noncontracting");
    let tol_zero = EmbedParams::new(ALPHA_GENERAL, 1.0, 1.0, 0.0)?;
    let tol_zero_error = match embed_union(&inst.space, &inst.partition, &inst.phi_a, &inst.phi_b, &tol_zero) {
        Ok(_) => None,
        Err(e) => Some(e.name().to_string()),
    };
    Ok(MutationReport {
        gamma_zero_caught: fail.is_some(),
        gamma_zero_audit: fail.map(|e| e.name.clone()),
        gamma_zero_witness: fail.and_then(|e| e.witness),
        tol_zero_error,
    })
}
