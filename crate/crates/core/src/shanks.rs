//! Shanks transformations of partial-sum sequences: scalar (applied per
//! surface point), vector, repeated, and the two-mode variant that first
//! strips a known mode.

use crate::eigen::EigenBasis;
use crate::exec::{self, Execution};
use crate::linalg::{self, CMatrix, ZERO};
use crate::lr_series::SeriesState;
use num_complex::Complex64;
use serde::Serialize;
use std::fmt::Write as _;
use thiserror::Error;

/// Scalar denominators at or below this fraction of the local magnitude
/// are treated as degenerate.
pub const SCALAR_GUARD: f64 = 1e-12;
/// `|lambda_n - 1|` at or below this passes `S_{n+1}` through.
pub const RATIO_GUARD: f64 = 1e-10;
/// `||dS_n||` at or below this passes `S_{n+1}` through.
pub const DIFFERENCE_GUARD: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShanksError {
    #[error("sequence of length {len} is too short (need at least {needed})")]
    TooShort { len: usize, needed: usize },
    #[error("item {index} has length {actual}, expected {expected}")]
    Ragged { index: usize, expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceOrigin {
    LrPartialSums,
    Synthetic,
    Transformed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorSequence {
    items: Vec<Vec<Complex64>>,
    origin: SequenceOrigin,
}

impl VectorSequence {
    pub fn new(items: Vec<Vec<Complex64>>, origin: SequenceOrigin) -> Result<Self, ShanksError> {
        if let Some(first) = items.first() {
            let expected = first.len();
            if let Some((index, bad)) = items.iter().enumerate().find(|(_, v)| v.len() != expected) {
                return Err(ShanksError::Ragged {
                    index,
                    expected,
                    actual: bad.len(),
                });
            }
        }
        Ok(Self { items, origin })
    }

    pub fn synthetic(items: Vec<Vec<Complex64>>) -> Result<Self, ShanksError> {
        Self::new(items, SequenceOrigin::Synthetic)
    }

    pub fn from_series(state: &SeriesState) -> Self {
        Self {
            items: state.partial_sums.clone(),
            origin: SequenceOrigin::LrPartialSums,
        }
    }

    pub fn items(&self) -> &[Vec<Complex64>] {
        &self.items
    }

    pub fn into_items(self) -> Vec<Vec<Complex64>> {
        self.items
    }

    pub fn origin(&self) -> SequenceOrigin {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.items.first().map_or(0, Vec::len)
    }

    fn require(&self, needed: usize) -> Result<(), ShanksError> {
        if self.len() < needed {
            return Err(ShanksError::TooShort { len: self.len(), needed });
        }
        Ok(())
    }

    fn transformed(items: Vec<Vec<Complex64>>) -> Self {
        Self {
            items,
            origin: SequenceOrigin::Transformed,
        }
    }
}

/// Per-pass record of the vector transform.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ShanksDiagnostics {
    /// `lambda_n`, one per output item; guarded items hold the raw estimate
    /// or zero when `dS_n` vanished.
    pub lambdas: Vec<Complex64>,
    /// Unit, phase-fixed direction of the removed mode at the last
    /// unguarded index.
    pub shanks_vector: Option<Vec<Complex64>>,
    pub guard_hits: usize,
}

impl ShanksDiagnostics {
    /// Applies `f` to the Shanks vector and renormalizes, e.g. to carry it
    /// from solution space to data space.
    pub fn map_vector<E>(
        &self,
        f: impl FnOnce(&[Complex64]) -> Result<Vec<Complex64>, E>,
    ) -> Result<Self, E> {
        let shanks_vector = match &self.shanks_vector {
            Some(v) => linalg::normalize_phase(&f(v)?),
            None => None,
        };
        Ok(Self {
            shanks_vector,
            ..self.clone()
        })
    }
}

/// Scalar Shanks transform; returns the transformed sequence and the number
/// of guarded (pass-through) entries.
pub fn scalar_shanks(seq: &[Complex64]) -> Result<(Vec<Complex64>, usize), ShanksError> {
    if seq.len() < 3 {
        return Err(ShanksError::TooShort { len: seq.len(), needed: 3 });
    }
    let mut hits = 0;
    let out = seq
        .windows(3)
        .map(|w| {
            let v = scalar_step(w[0], w[1], w[2]);
            if v.is_none() {
                hits += 1;
            }
            v.unwrap_or(w[1])
        })
        .collect();
    Ok((out, hits))
}

/// `S_{n+2} - (dS_{n+1})^2 / d2S_n`, algebraically equal to the textbook form.
fn scalar_step(s0: Complex64, s1: Complex64, s2: Complex64) -> Option<Complex64> {
    let d1 = s1 - s0;
    let d2 = s2 - s1;
    let den = d2 - d1;
    let scale = s0.norm().max(s1.norm()).max(s2.norm());
    if den.norm() <= SCALAR_GUARD * scale || den.norm() == 0.0 {
        return None;
    }
    Some(s2 - d2 * d2 / den)
}

/// Scalar transform applied independently at each surface point.
pub fn pointwise_shanks(seq: &VectorSequence, exec: Execution) -> Result<(VectorSequence, usize), ShanksError> {
    seq.require(3)?;
    let (m, n) = (seq.len(), seq.dim());
    let columns: Vec<(Vec<Complex64>, usize)> = exec::map_range(exec, n, |p| {
        let col: Vec<Complex64> = seq.items.iter().map(|s| s[p]).collect();
        scalar_shanks(&col).expect("length checked")
    });
    let hits = columns.iter().map(|c| c.1).sum();
    let items = (0..m - 2)
        .map(|j| columns.iter().map(|c| c.0[j]).collect())
        .collect();
    Ok((VectorSequence::transformed(items), hits))
}

/// Vector Shanks transform with a single complex ratio per step.
pub fn vector_shanks(seq: &VectorSequence) -> Result<(VectorSequence, ShanksDiagnostics), ShanksError> {
    seq.require(3)?;
    let diffs: Vec<Vec<Complex64>> = seq.items.windows(2).map(|w| linalg::sub(&w[1], &w[0])).collect();
    let mut diag = ShanksDiagnostics::default();
    let mut items = Vec::with_capacity(seq.len() - 2);
    for j in 0..seq.len() - 2 {
        let (d0, d1) = (&diffs[j], &diffs[j + 1]);
        let n0 = linalg::norm2(d0);
        if n0 <= DIFFERENCE_GUARD {
            diag.lambdas.push(ZERO);
            diag.guard_hits += 1;
            items.push(seq.items[j + 1].clone());
            continue;
        }
        let lambda = linalg::inner(d1, d0) / (n0 * n0);
        diag.lambdas.push(lambda);
        if (lambda - 1.0).norm() <= RATIO_GUARD {
            diag.guard_hits += 1;
            items.push(seq.items[j + 1].clone());
            continue;
        }
        // G_n = S_n - dS_n / (lambda - 1)
        let removed = linalg::scale(d0, Complex64::new(1.0, 0.0) / (lambda - 1.0));
        items.push(linalg::sub(&seq.items[j], &removed));
        if let Some(v) = linalg::normalize_phase(&removed) {
            diag.shanks_vector = Some(v);
        }
    }
    Ok((VectorSequence::transformed(items), diag))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transform {
    Pointwise,
    Vector,
}

/// `m`-fold composition of `transform`; diagnostics per order (pointwise
/// orders carry only guard counts).
pub fn repeated(
    transform: Transform,
    seq: &VectorSequence,
    order: usize,
    exec: Execution,
) -> Result<(VectorSequence, Vec<ShanksDiagnostics>), ShanksError> {
    seq.require(2 * order + 1)?;
    let mut cur = seq.clone();
    let mut diags = Vec::with_capacity(order);
    for _ in 0..order {
        let (next, diag) = match transform {
            Transform::Pointwise => {
                let (s, hits) = pointwise_shanks(&cur, exec)?;
                (
                    s,
                    ShanksDiagnostics {
                        guard_hits: hits,
                        ..Default::default()
                    },
                )
            }
            Transform::Vector => vector_shanks(&cur)?,
        };
        diags.push(diag);
        cur = next;
    }
    Ok((cur, diags))
}

/// Recovered second mode of the two-mode model.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMode {
    pub delta: Complex64,
    /// Amplitude-bearing: `S_k = S + lambda^k v + delta^k w`.
    pub w: Vec<Complex64>,
    pub diagnostics: ShanksDiagnostics,
}

/// Removes the known mode `lambda^k v` (k counted from the first item) and
/// applies the vector transform to the remainder.
pub fn two_mode_shanks(
    seq: &VectorSequence,
    lambda: Complex64,
    v: &[Complex64],
) -> Result<(VectorSequence, SecondMode), ShanksError> {
    seq.require(3)?;
    if v.len() != seq.dim() {
        return Err(ShanksError::Ragged {
            index: 0,
            expected: seq.dim(),
            actual: v.len(),
        });
    }
    let mut p = Complex64::new(1.0, 0.0);
    let mut reduced = Vec::with_capacity(seq.len());
    for s in &seq.items {
        let mut d = s.clone();
        linalg::axpy(&mut d, -p, v);
        reduced.push(d);
        p *= lambda;
    }
    let reduced = VectorSequence::transformed(reduced);
    let (out, diagnostics) = vector_shanks(&reduced)?;

    // w from the last unguarded step: dD_j = delta^j (delta - 1) w
    let mut delta = ZERO;
    let mut w = vec![ZERO; seq.dim()];
    for j in (0..diagnostics.lambdas.len()).rev() {
        let d = diagnostics.lambdas[j];
        let d0 = linalg::sub(&reduced.items[j + 1], &reduced.items[j]);
        if linalg::norm2(&d0) <= DIFFERENCE_GUARD || (d - 1.0).norm() <= RATIO_GUARD {
            continue;
        }
        delta = d;
        let denom = d.powi(j as i32) * (d - 1.0);
        if denom.norm() > 0.0 {
            w = linalg::scale(&d0, Complex64::new(1.0, 0.0) / denom);
        }
        break;
    }
    Ok((out, SecondMode { delta, w, diagnostics }))
}

/// Agreement between Shanks vectors (one per order) and the eigenvectors
/// of the iterating operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrespondenceReport {
    /// `|<v1_shanks, w1>|` for unit vectors.
    pub colinearity: f64,
    /// Relative distance of `w2` from span of the first two Shanks vectors;
    /// absent with fewer than two orders.
    pub coplanarity_residual: Option<f64>,
    /// Principal angles (radians) between the spans of the first `p`
    /// Shanks vectors and the first `p` eigenvectors.
    pub principal_angles: Vec<f64>,
}

pub fn shanks_vs_eigen(diags: &[ShanksDiagnostics], basis: &EigenBasis) -> Option<CorrespondenceReport> {
    let vectors: Vec<&Vec<Complex64>> = diags.iter().map_while(|d| d.shanks_vector.as_ref()).collect();
    if vectors.is_empty() || basis.len() < 2 {
        return None;
    }
    let w = |i: usize| &basis.pairs[i].v;
    let colinearity = linalg::colinearity(vectors[0], w(0));
    let coplanarity_residual = if vectors.len() >= 2 {
        let q = orthonormalize(&vectors[..2]);
        Some(projection_residual(&q, w(1)))
    } else {
        None
    };
    let p = vectors.len().min(basis.len());
    let qs = orthonormalize(&vectors[..p]);
    let eig: Vec<&Vec<Complex64>> = (0..p).map(w).collect();
    let qe = orthonormalize(&eig);
    Some(CorrespondenceReport {
        colinearity,
        coplanarity_residual,
        principal_angles: principal_angles(&qs, &qe),
    })
}

/// Modified Gram-Schmidt, dropping numerically dependent vectors.
fn orthonormalize(vs: &[&Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let mut q: Vec<Vec<Complex64>> = Vec::new();
    for v in vs {
        let mut u = (*v).clone();
        let n0 = linalg::norm2(&u);
        for b in &q {
            let c = linalg::inner(&u, b);
            linalg::axpy(&mut u, -c, b);
        }
        let n = linalg::norm2(&u);
        if n > 1e-12 * n0 {
            q.push(linalg::scale(&u, Complex64::new(1.0 / n, 0.0)));
        }
    }
    q
}

fn projection_residual(q: &[Vec<Complex64>], w: &[Complex64]) -> f64 {
    let mut r = w.to_vec();
    for b in q {
        let c = linalg::inner(&r, b);
        linalg::axpy(&mut r, -c, b);
    }
    linalg::norm2(&r) / linalg::norm2(w)
}

/// Angles from the singular values of `Qa^H Qb`, ascending.
fn principal_angles(qa: &[Vec<Complex64>], qb: &[Vec<Complex64>]) -> Vec<f64> {
    if qa.is_empty() || qb.is_empty() {
        return vec![];
    }
    let m = CMatrix::from_fn(qa.len(), qb.len(), |i, j| linalg::inner(&qb[j], &qa[i]));
    let Ok(sv) = m.to_faer().singular_values() else {
        return vec![];
    };
    let mut angles: Vec<f64> = sv.iter().map(|s| s.clamp(0.0, 1.0).acos()).collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Original-series terms needed for item `index` of the order-`m` transform.
pub fn terms_consumed(index: usize, order: usize) -> usize {
    index + 2 * order + 1
}

/// One row of a transform trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub orig_terms_consumed: usize,
    pub order: usize,
    pub residual: f64,
    pub error_vs_oracle: f64,
}

/// `orig_terms_consumed,order,residual,error_vs_oracle`; NaN where no
/// oracle was available.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut s = String::from("orig_terms_consumed,order,residual,error_vs_oracle\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:e},{:e}",
            r.orig_terms_consumed, r.order, r.residual, r.error_vs_oracle
        );
    }
    s
}
