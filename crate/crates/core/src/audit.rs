//! Named inequality checks with recorded slack.

use serde::Serialize;

use crate::error::Error;
use crate::linalg::{Matrix, PointCloud};
use crate::par;

/// Relative tolerance applied to audit bounds unless a check overrides it.
pub const AUDIT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `measured ≤ bound`
    Upper,
    /// `measured ≥ bound`
    Lower,
    /// `measured < bound`
    StrictUpper,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditEntry {
    pub name: String,
    pub kind: CheckKind,
    pub bound: f64,
    pub measured: f64,
    /// Positive when the inequality holds with room to spare.
    pub slack: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub witness: Option<(usize, usize)>,
    /// Number of pairs (or points) the check ranged over.
    pub count: usize,
}

impl AuditEntry {
    pub fn upper(name: impl Into<String>, bound: f64, measured: f64, witness: Option<(usize, usize)>, count: usize) -> Self {
        Self::upper_tol(name, bound, measured, witness, count, AUDIT_REL_TOL)
    }

    pub fn upper_tol(
        name: impl Into<String>,
        bound: f64,
        measured: f64,
        witness: Option<(usize, usize)>,
        count: usize,
        tolerance: f64,
    ) -> Self {
        let slack = bound - measured;
        let pass = count == 0 || slack >= -tolerance * bound.abs();
        Self { name: name.into(), kind: CheckKind::Upper, bound, measured, slack, tolerance, pass, witness, count }
    }

    pub fn lower(name: impl Into<String>, bound: f64, measured: f64, witness: Option<(usize, usize)>, count: usize) -> Self {
        Self::lower_tol(name, bound, measured, witness, count, AUDIT_REL_TOL)
    }

    pub fn lower_tol(
        name: impl Into<String>,
        bound: f64,
        measured: f64,
        witness: Option<(usize, usize)>,
        count: usize,
        tolerance: f64,
    ) -> Self {
        let slack = measured - bound;
        let pass = count == 0 || slack >= -tolerance * bound.abs().max(1.0);
        Self { name: name.into(), kind: CheckKind::Lower, bound, measured, slack, tolerance, pass, witness, count }
    }

    pub fn strict_upper(name: impl Into<String>, bound: f64, measured: f64, witness: Option<(usize, usize)>, count: usize) -> Self {
        let slack = bound - measured;
        let pass = count == 0 || measured < bound;
        Self { name: name.into(), kind: CheckKind::StrictUpper, bound, measured, slack, tolerance: 0.0, pass, witness, count }
    }

    /// A count of violations that must be zero.
    pub fn zero_count(name: impl Into<String>, violations: usize, witness: Option<(usize, usize)>, checked: usize) -> Self {
        let pass = violations == 0;
        Self {
            name: name.into(),
            kind: CheckKind::Upper,
            bound: 0.0,
            measured: violations as f64,
            slack: -(violations as f64),
            tolerance: 0.0,
            pass,
            witness,
            count: checked,
        }
    }

    pub fn to_error(&self) -> Error {
        Error::AuditViolation { name: self.name.clone(), witness: self.witness, measured: self.measured, bound: self.bound }
    }
}

/// First failing entry as an `AuditViolation`.
pub fn first_failure(entries: &[AuditEntry]) -> Option<Error> {
    entries.iter().find(|e| !e.pass).map(AuditEntry::to_error)
}

/// All pairwise Euclidean distances of a cloud.
pub fn pairwise_distances(c: &PointCloud) -> Matrix {
    let n = c.len();
    let rows = par::map_range(n, |i| (0..n).map(|j| c.distance(i, j)).collect::<Vec<f64>>());
    Matrix::from_row_major(n, n, rows.into_iter().flatten().collect()).expect("square by construction")
}

/// Extremum of `value(i, j)` over unordered pairs `i < j` where it is `Some`.
///
/// Returns `(extremum, witness, count)`; the extremum is `−∞`/`+∞` for an
/// empty set. Ties keep the lexicographically first pair, independent of
/// the thread count.
pub fn pair_extremum<F>(n: usize, maximize: bool, value: F) -> (f64, Option<(usize, usize)>, usize)
where
    F: Fn(usize, usize) -> Option<f64> + Sync + Send,
{
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let init = if maximize { f64::NEG_INFINITY } else { f64::INFINITY };
    let rows = par::map_range(n, |i| {
        let mut best = (init, None, 0usize);
        for j in (i + 1)..n {
            if let Some(v) = value(i, j) {
                best.2 += 1;
                if better(v, best.0) || best.1.is_none() {
                    best.0 = v;
                    best.1 = Some((i, j));
                }
            }
        }
        best
    });
    let mut out = (init, None, 0usize);
    for (v, w, c) in rows {
        out.2 += c;
        if w.is_some() && (out.1.is_none() || better(v, out.0)) {
            out.0 = v;
            out.1 = w;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_and_lower_slack() {
        let e = AuditEntry::upper("x", 10.0, 9.0, None, 1);
        assert!(e.pass && e.slack == 1.0);
        let e = AuditEntry::upper("x", 10.0, 10.001, None, 1);
        assert!(!e.pass);
        let e = AuditEntry::lower("y", 1.0, 1.0 - 1e-7, None, 1);
        assert!(e.pass);
        let e = AuditEntry::strict_upper("z", 8.93, 8.93, None, 1);
        assert!(!e.pass);
    }

    #[test]
    fn extremum_is_deterministic() {
        let (v, w, c) = pair_extremum(5, true, |i, j| Some(((i + j) % 3) as f64));
        assert_eq!((v, w, c), (2.0, Some((0, 2)), 10));
        let (v, w, c) = pair_extremum(4, false, |i, _| (i > 0).then_some(1.0));
        assert_eq!((v, w, c), (1.0, Some((1, 2)), 3));
        let (_, w, c) = pair_extremum(3, false, |_, _| None);
        assert_eq!((w, c), (None, 0));
    }
}
