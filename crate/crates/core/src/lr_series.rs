//! The Left-Right operator series `H = L^{-1} sum_m B^m psi_inc`, with the
//! data residual of every partial sum and a residual-minimum stopping rule.

use crate::kernel::{Discretization, KernelError};
use crate::linalg::{self, ZERO};
use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

/// Iteration aborts once a term exceeds this multiple of the first term.
pub const DIVERGENCE_GUARD: f64 = 1e12;

pub const DEFAULT_PATIENCE: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SeriesError {
    #[error("max_terms must be at least 1")]
    NoTerms,
    #[error("incident field is identically zero")]
    ZeroIncident,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Terms `t_m = L^{-1} B^m psi`, partial sums `S_m` and relative residuals
/// `||A S_m - psi|| / ||psi||`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesState {
    pub terms: Vec<Vec<Complex64>>,
    pub partial_sums: Vec<Vec<Complex64>>,
    pub residuals: Vec<f64>,
    pub best_index: usize,
    /// Set when the divergence guard stopped the recurrence early.
    pub diverged: bool,
}

impl SeriesState {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn term_norms(&self) -> Vec<f64> {
        self.terms.iter().map(|t| linalg::norm2(t)).collect()
    }

    pub fn stop_index(&self, patience: usize) -> usize {
        stop_rule(&self.residuals, patience)
    }

    pub fn best(&self) -> &[Complex64] {
        &self.partial_sums[self.best_index]
    }

    /// `iter,residual,error_vs_oracle,term_norm`; the error column is `NaN`
    /// when no reference was supplied.
    pub fn trace_csv(&self, errors: Option<&[f64]>) -> String {
        let mut s = String::from("iter,residual,error_vs_oracle,term_norm\n");
        for (m, (r, t)) in self.residuals.iter().zip(self.term_norms()).enumerate() {
            let e = errors.and_then(|e| e.get(m).copied()).unwrap_or(f64::NAN);
            let _ = writeln!(s, "{m},{r},{e},{t}");
        }
        s
    }
}

/// Runs the recurrence `u_0 = psi`, `t_m = L^{-1} u_m`, `u_{m+1} = -R t_m`
/// for up to `max_terms` terms. One triangular solve and two triangular
/// products (`R` and, for the residual, `A`) per term. Stops early when the
/// next data vector is exactly zero.
pub fn iterate(
    disc: &Discretization,
    psi: &[Complex64],
    max_terms: usize,
) -> Result<SeriesState, SeriesError> {
    if max_terms == 0 {
        return Err(SeriesError::NoTerms);
    }
    let psi_norm = linalg::norm2(psi);
    if !(psi_norm > 0.0) {
        return Err(SeriesError::ZeroIncident);
    }
    let n = disc.n();
    let mut state = SeriesState {
        terms: Vec::with_capacity(max_terms),
        partial_sums: Vec::with_capacity(max_terms),
        residuals: Vec::with_capacity(max_terms),
        best_index: 0,
        diverged: false,
    };
    let mut u = psi.to_vec();
    let mut sum = vec![ZERO; n];
    let mut first_norm = 0.0;
    for m in 0..max_terms {
        let t = disc.solve_l(&u)?;
        let tn = linalg::norm2(&t);
        if m == 0 {
            first_norm = tn;
        }
        linalg::axpy(&mut sum, Complex64::new(1.0, 0.0), &t);
        let r = residual(disc, &sum, psi)?;
        state.residuals.push(r);
        if r < state.residuals[state.best_index] {
            state.best_index = m;
        }
        state.partial_sums.push(sum.clone());
        let next = if m + 1 < max_terms {
            let ru = disc.apply_r(&t)?;
            Some(ru.into_iter().map(|z| -z).collect::<Vec<_>>())
        } else {
            None
        };
        state.terms.push(t);
        if tn > DIVERGENCE_GUARD * first_norm || !tn.is_finite() {
            state.diverged = true;
            break;
        }
        match next {
            // every later term would vanish identically
            Some(v) if v.iter().all(|z| *z == ZERO) => break,
            Some(v) => u = v,
            None => break,
        }
    }
    Ok(state)
}

/// `||A candidate - psi|| / ||psi||`.
pub fn residual(disc: &Discretization, candidate: &[Complex64], psi: &[Complex64]) -> Result<f64, SeriesError> {
    Ok(disc.relative_residual(candidate, psi)?)
}

/// Index of the smallest residual, returned as soon as the residual has
/// risen for `patience` consecutive steps after it; otherwise the overall
/// minimum. Ties keep the first occurrence. `patience = 0` never stops
/// early.
pub fn stop_rule(residuals: &[f64], patience: usize) -> usize {
    let mut best = 0;
    let mut rises = 0;
    for i in 1..residuals.len() {
        if residuals[i] < residuals[best] {
            best = i;
            rises = 0;
        } else if residuals[i] > residuals[i - 1] {
            rises += 1;
            if patience > 0 && rises >= patience {
                return best;
            }
        } else {
            rises = 0;
        }
    }
    best
}

/// `||S_m - oracle|| / ||oracle||` for every partial sum.
pub fn error_vs_oracle(state: &SeriesState, oracle: &[Complex64]) -> Vec<f64> {
    state
        .partial_sums
        .iter()
        .map(|s| linalg::rel_err(s, oracle))
        .collect()
}

/// Pearson correlation of `ln a` against `ln b`, over entries where both are
/// positive.
pub fn log_correlation(a: &[f64], b: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pairs.len() as f64;
    if pairs.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = pairs.iter().fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (mx / n, my / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in &pairs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}
