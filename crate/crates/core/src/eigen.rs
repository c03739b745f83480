//! Eigenpairs of the iterating operator `B`, oblique removal of dominant
//! eigencomponents from the incident field, and the closed-form solution
//! `A^{-1} v = L^{-1} v / (1 - lambda)` at an eigenvector.

use crate::exec::Execution;
use crate::kernel::{Discretization, KernelError};
use crate::linalg::{self, CMatrix, LinalgError, LuFactors, ZERO};
use num_complex::Complex64;
use std::fmt::Write as _;
use thiserror::Error;

/// Bases whose eigenvector matrix is worse conditioned than this are
/// rejected for subtraction.
pub const MAX_BASIS_CONDITION: f64 = 1e12;

/// Relative tolerance declared for eigenvalues estimated from series terms.
pub const SERIES_ESTIMATE_TOL: f64 = 1e-3;

/// Largest angle (radians) between the last two terms for them to count as
/// dominated by one mode.
pub const COLINEAR_ANGLE: f64 = 0.1;

const RESONANCE_GAP: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("power iteration did not converge in {iters} iterations (residual {residual:e})")]
    NoConvergence { iters: usize, residual: f64 },
    #[error("starting vector is zero")]
    ZeroStart,
    #[error("dense eigendecomposition failed: {0}")]
    Decomposition(String),
    #[error("eigenpair {index} has residual {residual:e} above tolerance {tol:e}")]
    Residual { index: usize, residual: f64, tol: f64 },
    #[error("eigenvector matrix is ill-conditioned (cond ~ {cond:e})")]
    IllConditioned { cond: f64 },
    #[error("cannot remove {k} components from a basis of size {n}")]
    TooMany { k: usize, n: usize },
    #[error("eigenvalue {lambda} is within {gap:e} of 1")]
    Resonance { lambda: Complex64, gap: f64 },
    #[error("series terms are not dominated by a single growing mode: {0}")]
    NotDominated(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Eigenvalue with unit-norm, phase-fixed eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub lambda: Complex64,
    pub v: Vec<Complex64>,
}

impl EigenPair {
    pub fn new(lambda: Complex64, v: &[Complex64]) -> Option<Self> {
        linalg::normalize_phase(v).map(|v| Self { lambda, v })
    }

    pub fn is_dilating(&self) -> bool {
        self.lambda.norm() > 1.0
    }
}

/// Complete eigendecomposition sorted by decreasing `|lambda|`.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub pairs: Vec<EigenPair>,
    /// Eigenvectors as columns, in `pairs` order.
    pub vectors: CMatrix,
    pub vectors_inv: CMatrix,
    /// `||V||_1 ||V^{-1}||_1`
    pub condition: f64,
}

impl EigenBasis {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn lambdas(&self) -> Vec<Complex64> {
        self.pairs.iter().map(|p| p.lambda).collect()
    }

    /// Coefficients of `psi` in the eigenvector basis, `V^{-1} psi`.
    pub fn coefficients(&self, psi: &[Complex64]) -> Result<Vec<Complex64>, EigenError> {
        Ok(self.vectors_inv.mul_vec(psi)?)
    }

    /// `index,re_lambda,im_lambda,abs_lambda`
    pub fn spectrum_csv(&self) -> String {
        let mut s = String::from("index,re_lambda,im_lambda,abs_lambda\n");
        for (i, p) in self.pairs.iter().enumerate() {
            let _ = writeln!(s, "{i},{},{},{}", p.lambda.re, p.lambda.im, p.lambda.norm());
        }
        s
    }
}

/// Dominant eigenpair by repeated application of `apply`.
///
/// The estimate is `lambda = <B v, v>` for unit `v`; iteration stops once
/// `||B v - lambda v|| <= tol |lambda|`.
pub fn power_iteration<F>(
    apply: F,
    u0: &[Complex64],
    max_iters: usize,
    tol: f64,
) -> Result<EigenPair, EigenError>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>, KernelError>,
{
    let mut v = linalg::normalize_phase(u0).ok_or(EigenError::ZeroStart)?;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let w = apply(&v)?;
        let lambda = linalg::inner(&w, &v);
        let mut r = w.clone();
        linalg::axpy(&mut r, -lambda, &v);
        residual = linalg::norm2(&r);
        if residual <= tol * lambda.norm() || linalg::norm2(&w) == 0.0 {
            return Ok(EigenPair { lambda, v });
        }
        v = match linalg::normalize_phase(&w) {
            Some(v) => v,
            None => return Ok(EigenPair { lambda, v }),
        };
    }
    Err(EigenError::NoConvergence {
        iters: max_iters,
        residual,
    })
}

/// Dense nonsymmetric eigendecomposition (Schur reduction via `faer`),
/// checked against `||B v - lambda v|| <= tol ||B||_F` for every pair.
pub fn full_eigen(b: &CMatrix, tol: f64) -> Result<EigenBasis, EigenError> {
    if !b.is_square() {
        return Err(LinalgError::NotSquare {
            rows: b.rows(),
            cols: b.cols(),
        }
        .into());
    }
    let n = b.rows();
    let evd = b
        .to_faer()
        .eigen()
        .map_err(|e| EigenError::Decomposition(format!("{e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = Complex64::new(s[i].re, s[i].im);
        let col: Vec<Complex64> = (0..n).map(|r| Complex64::new(u[(r, i)].re, u[(r, i)].im)).collect();
        let pair = EigenPair::new(lambda, &col)
            .ok_or_else(|| EigenError::Decomposition(format!("zero eigenvector {i}")))?;
        pairs.push(pair);
    }
    pairs.sort_by(|a, b| b.lambda.norm().total_cmp(&a.lambda.norm()));

    let scale = b.norm_fro();
    for (index, p) in pairs.iter().enumerate() {
        let bv = b.mul_vec(&p.v)?;
        let mut r = bv;
        linalg::axpy(&mut r, -p.lambda, &p.v);
        let residual = linalg::norm2(&r);
        if residual > tol * scale {
            return Err(EigenError::Residual {
                index,
                residual,
                tol: tol * scale,
            });
        }
    }
    let vectors = CMatrix::from_fn(n, n, |i, j| pairs[j].v[i]);
    let vectors_inv = match LuFactors::factor(&vectors, Execution::default()) {
        Ok(lu) => lu.inverse(),
        Err(_) => {
            return Err(EigenError::IllConditioned { cond: f64::INFINITY });
        }
    };
    let condition = vectors.norm_one() * vectors_inv.norm_one();
    Ok(EigenBasis {
        pairs,
        vectors,
        vectors_inv,
        condition,
    })
}

/// Eigendecomposition of the iterating operator of `disc`.
pub fn eigen_of_b(disc: &Discretization, tol: f64) -> Result<EigenBasis, EigenError> {
    let b = disc.materialize_b()?;
    full_eigen(&b, tol)
}

/// Number of eigenvalues with `|lambda| > 1`.
pub fn count_dilating(basis: &EigenBasis) -> usize {
    count_above(basis, 1.0)
}

pub fn count_above(basis: &EigenBasis, threshold: f64) -> usize {
    basis.pairs.iter().filter(|p| p.lambda.norm() > threshold).count()
}

/// `psi - sum_{k < K} c_k v_k` with `c = V^{-1} psi`.
pub fn subtract_dominant(psi: &[Complex64], basis: &EigenBasis, k: usize) -> Result<Vec<Complex64>, EigenError> {
    Ok(split_dominant(psi, basis, k)?.0)
}

/// Returns the modified field together with the removed coefficients.
fn split_dominant(
    psi: &[Complex64],
    basis: &EigenBasis,
    k: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>), EigenError> {
    let n = basis.len();
    if k >= n.max(1) {
        return Err(EigenError::TooMany { k, n });
    }
    if k == 0 {
        return Ok((psi.to_vec(), vec![]));
    }
    if basis.condition > MAX_BASIS_CONDITION || !basis.condition.is_finite() {
        return Err(EigenError::IllConditioned { cond: basis.condition });
    }
    let coeffs = basis.coefficients(psi)?;
    let mut out = psi.to_vec();
    for (c, p) in coeffs.iter().zip(&basis.pairs).take(k) {
        linalg::axpy(&mut out, -c, &p.v);
    }
    Ok((out, coeffs[..k].to_vec()))
}

/// Result of removing the `K` leading eigencomponents from the data and
/// solving for them exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenCorrection {
    pub modified_incident: Vec<Complex64>,
    /// `sum_{k < K} c_k L^{-1} v_k / (1 - lambda_k)`
    pub exact_part: Vec<Complex64>,
}

pub fn eigen_correction(
    disc: &Discretization,
    psi: &[Complex64],
    basis: &EigenBasis,
    k: usize,
) -> Result<EigenCorrection, EigenError> {
    let (modified_incident, coeffs) = split_dominant(psi, basis, k)?;
    let mut exact_part = vec![ZERO; psi.len()];
    for (c, p) in coeffs.iter().zip(&basis.pairs) {
        let x = exact_eigensolution(disc, p)?;
        linalg::axpy(&mut exact_part, *c, &x);
    }
    Ok(EigenCorrection {
        modified_incident,
        exact_part,
    })
}

/// `A^{-1} v = L^{-1} v / (1 - lambda)` for an eigenpair of `B`.
pub fn exact_eigensolution(disc: &Discretization, pair: &EigenPair) -> Result<Vec<Complex64>, EigenError> {
    let gap = (pair.lambda - 1.0).norm();
    if gap <= RESONANCE_GAP {
        return Err(EigenError::Resonance {
            lambda: pair.lambda,
            gap: RESONANCE_GAP,
        });
    }
    let t = disc.solve_l(&pair.v)?;
    let f = Complex64::new(1.0, 0.0) / (Complex64::new(1.0, 0.0) - pair.lambda);
    Ok(linalg::scale(&t, f))
}

/// Ratio and direction of the mode dominating the tail of `terms`.
///
/// `lambda = <t_m, t_{m-1}> / ||t_{m-1}||^2`; the direction is the last term,
/// normalized. Requires the last three norms to be strictly increasing and
/// the last two terms to be colinear to within [`COLINEAR_ANGLE`].
pub fn dominant_mode(terms: &[Vec<Complex64>]) -> Result<EigenPair, EigenError> {
    let m = terms.len();
    if m < 3 {
        return Err(EigenError::NotDominated(format!("need 3 terms, got {m}")));
    }
    let norms: Vec<f64> = terms[m - 3..].iter().map(|t| linalg::norm2(t)).collect();
    if !(norms[0] < norms[1] && norms[1] < norms[2]) {
        return Err(EigenError::NotDominated("term norms are not growing".into()));
    }
    let (prev, last) = (&terms[m - 2], &terms[m - 1]);
    let angle = linalg::colinearity(last, prev).acos();
    if angle > COLINEAR_ANGLE {
        return Err(EigenError::NotDominated(format!(
            "last two terms are {angle:.3} rad apart"
        )));
    }
    let lambda = linalg::inner(last, prev) / (norms[1] * norms[1]);
    EigenPair::new(lambda, last).ok_or_else(|| EigenError::NotDominated("zero term".into()))
}

/// Dilating eigenpair of `B` read off divergent series terms `t_m`: the
/// ratio of consecutive terms gives `lambda`, and `L t_m` gives the
/// eigenvector.
pub fn estimate_dilating_from_series(
    disc: &Discretization,
    terms: &[Vec<Complex64>],
) -> Result<EigenPair, EigenError> {
    let mode = dominant_mode(terms)?;
    let v = disc.apply_l(&mode.v)?;
    EigenPair::new(mode.lambda, &v).ok_or_else(|| EigenError::NotDominated("zero eigenvector".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::*;
    use crate::linalg::ONE;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn dense_apply(m: CMatrix) -> impl Fn(&[Complex64]) -> Result<Vec<Complex64>, KernelError> {
        move |v| Ok(m.mul_vec(v).unwrap())
    }

    fn synthetic_disc() -> Discretization {
        Discretization::from_matrix(CMatrix::from_real_rows(&[&[1.0, 2.0], &[1.0, 1.0]]), 1.0).unwrap()
    }

    /// Random diagonally weighted operator so that L is well conditioned.
    fn random_disc(seed: u64, n: usize, offdiag: f64) -> Discretization {
        let mut r = rng(seed);
        let mut m = random_matrix(&mut r, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] *= offdiag;
            }
            m[(i, i)] = c(1.0);
        }
        Discretization::from_matrix(m, 1.0).unwrap()
    }

    #[test]
    fn power_iteration_diagonal() {
        let d = CMatrix::from_real_rows(&[&[2.0, 0.0], &[0.0, 0.5]]);
        let p = power_iteration(dense_apply(d.clone()), &[ONE, ONE], 200, 1e-12).unwrap();
        assert!((p.lambda - 2.0).norm() < 1e-10);
        assert!((p.v[0] - 1.0).norm() < 1e-10 && p.v[1].norm() < 1e-10);
        // a start orthogonal to the dominant axis stays on the second one
        let q = power_iteration(dense_apply(d), &[ZERO, ONE], 200, 1e-12).unwrap();
        assert!((q.lambda - 0.5).norm() < 1e-12);
    }

    #[test]
    fn power_iteration_synthetic_b() {
        let disc = synthetic_disc();
        // (1, 1) spans the null space of B
        let p = power_iteration(|v| disc.apply_b(v), &[ONE, c(0.5)], 200, 1e-12).unwrap();
        assert!((p.lambda - 2.0).norm() < 1e-10);
        assert!((p.v[0] - 1.0).norm() < 1e-10 && p.v[1].norm() < 1e-10);
    }

    #[test]
    fn power_iteration_reports_failure() {
        // rotation: two eigenvalues of equal modulus
        let rot = CMatrix::from_real_rows(&[&[0.0, -1.0], &[1.0, 0.0]]);
        let err = power_iteration(dense_apply(rot), &[ONE, ZERO], 50, 1e-10).unwrap_err();
        assert!(matches!(err, EigenError::NoConvergence { .. }));
        assert!(matches!(
            power_iteration(|v| Ok(v.to_vec()), &[ZERO], 5, 1e-10),
            Err(EigenError::ZeroStart)
        ));
    }

    #[test]
    fn full_eigen_triangular_and_synthetic() {
        let t = CMatrix::from_real_rows(&[&[3.0, 1.0, 2.0], &[0.0, -2.0, 1.0], &[0.0, 0.0, 0.5]]);
        let basis = full_eigen(&t, 1e-12).unwrap();
        let l = basis.lambdas();
        assert!((l[0] - 3.0).norm() < 1e-12 && (l[1] + 2.0).norm() < 1e-12 && (l[2] - 0.5).norm() < 1e-12);

        let b = synthetic_disc().materialize_b().unwrap();
        let basis = full_eigen(&b, 1e-12).unwrap();
        assert!((basis.pairs[0].lambda - 2.0).norm() < 1e-12);
        assert!(basis.pairs[1].lambda.norm() < 1e-12);
        assert_eq!(count_dilating(&basis), 1);
        for p in &basis.pairs {
            assert!((linalg::norm2(&p.v) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_eigen_reconstructs_random() {
        let mut r = rng(29);
        let b = random_matrix(&mut r, 16);
        let basis = full_eigen(&b, 1e-10).unwrap();
        let lam = CMatrix::from_fn(16, 16, |i, j| if i == j { basis.pairs[i].lambda } else { ZERO });
        let rec = basis.vectors.matmul(&lam).unwrap().matmul(&basis.vectors_inv).unwrap();
        assert!(rec.sub(&b).norm_fro() / b.norm_fro() <= 1e-8);
        for w in basis.pairs.windows(2) {
            assert!(w[0].lambda.norm() >= w[1].lambda.norm());
        }
    }

    #[test]
    fn power_and_dense_agree() {
        // first seed whose operator has a usable spectral gap
        let (disc, basis) = (31..80)
            .map(|seed| {
                let d = random_disc(seed, 24, 0.4);
                let b = eigen_of_b(&d, 1e-10).unwrap();
                (d, b)
            })
            .find(|(_, b)| b.pairs[0].lambda.norm() >= 1.2 * b.pairs[1].lambda.norm())
            .unwrap();
        let l1 = basis.pairs[0].lambda.norm();
        let p = power_iteration(|v| disc.apply_b(v), &vec![ONE; 24], 5000, 1e-13).unwrap();
        assert!((p.lambda - basis.pairs[0].lambda).norm() / l1 < 1e-6);
    }

    #[test]
    fn flat_surface_has_no_dilating_modes() {
        let s = crate::surface::flat(32, 0.1).unwrap();
        let d = Discretization::assemble(&s, 2.0 * std::f64::consts::PI).unwrap();
        let basis = eigen_of_b(&d, 1e-10).unwrap();
        assert_eq!(count_dilating(&basis), 0);
    }

    #[test]
    fn threshold_monotone() {
        let disc = random_disc(37, 16, 0.5);
        let basis = eigen_of_b(&disc, 1e-10).unwrap();
        let mut prev = usize::MAX;
        for t in [0.0, 0.1, 0.3, 0.5, 1.0, 2.0, 10.0] {
            let c = count_above(&basis, t);
            assert!(c <= prev);
            prev = c;
        }
    }

    #[test]
    fn subtraction_cases() {
        let mut r = rng(41);
        let b = random_matrix(&mut r, 8);
        let basis = full_eigen(&b, 1e-10).unwrap();
        let psi = random_vec(&mut r, 8);
        assert_eq!(subtract_dominant(&psi, &basis, 0).unwrap(), psi);

        let v1 = basis.pairs[0].v.clone();
        let out = subtract_dominant(&v1, &basis, 1).unwrap();
        assert!(linalg::norm2(&out) <= 1e-10);

        let out = subtract_dominant(&psi, &basis, 7).unwrap();
        assert!(linalg::colinearity(&out, &basis.pairs[7].v) > 1.0 - 1e-10);
        assert!(matches!(subtract_dominant(&psi, &basis, 8), Err(EigenError::TooMany { .. })));
    }

    #[test]
    fn exact_solution_two_by_two() {
        let disc = synthetic_disc();
        let pair = EigenPair::new(c(2.0), &[ONE, ZERO]).unwrap();
        let x = exact_eigensolution(&disc, &pair).unwrap();
        assert!((x[0] + 1.0).norm() < 1e-15 && (x[1] - 1.0).norm() < 1e-15);
        let ax = disc.apply_a(&x).unwrap();
        assert!((ax[0] - 1.0).norm() < 1e-15 && ax[1].norm() < 1e-15);

        let null = EigenPair::new(ZERO, &[ONE, ONE]).unwrap();
        let x = exact_eigensolution(&disc, &null).unwrap();
        assert_eq!(x, disc.solve_l(&null.v).unwrap());

        let res = EigenPair::new(Complex64::new(1.0 + 1e-10, 0.0), &[ONE, ZERO]).unwrap();
        assert!(matches!(exact_eigensolution(&disc, &res), Err(EigenError::Resonance { .. })));
    }

    #[test]
    fn eigenvalue_map_and_closed_form() {
        let disc = random_disc(43, 16, 0.3);
        let basis = eigen_of_b(&disc, 1e-10).unwrap();
        assert!(basis.condition < 1e6, "cond {}", basis.condition);
        for p in &basis.pairs {
            let x = disc.solve_l(&p.v).unwrap();
            let ax = disc.apply_a(&x).unwrap();
            let expect = linalg::scale(&p.v, Complex64::new(1.0, 0.0) - p.lambda);
            assert!(linalg::norm2(&linalg::sub(&ax, &expect)) <= 1e-8);
            let sol = exact_eigensolution(&disc, p).unwrap();
            assert!(linalg::norm2(&linalg::sub(&disc.apply_a(&sol).unwrap(), &p.v)) <= 1e-8);
        }
        let mut r = rng(44);
        let psi = random_vec(&mut r, 16);
        let coeffs = basis.coefficients(&psi).unwrap();
        let mut sum = vec![ZERO; 16];
        for (c, p) in coeffs.iter().zip(&basis.pairs) {
            linalg::axpy(&mut sum, *c, &exact_eigensolution(&disc, p).unwrap());
        }
        let oracle = disc.direct_solve(&psi).unwrap();
        assert!(linalg::rel_err(&sum, &oracle) <= 1e-8);

        // full correction reproduces the oracle for K = n - 1 plus one series term
        let corr = eigen_correction(&disc, &psi, &basis, 15).unwrap();
        let tail = exact_eigensolution(&disc, &basis.pairs[15]).unwrap();
        let c15 = basis.coefficients(&corr.modified_incident).unwrap()[15];
        let total = linalg::add(&corr.exact_part, &linalg::scale(&tail, c15));
        assert!(linalg::rel_err(&total, &oracle) <= 1e-8);
    }

    #[test]
    fn series_estimate_pure_mode() {
        let disc = synthetic_disc();
        let st = crate::lr_series::iterate(&disc, &[ONE, ZERO], 8).unwrap();
        let p = estimate_dilating_from_series(&disc, &st.terms).unwrap();
        assert!((p.lambda - 2.0).norm() < 1e-10);
        assert!((p.v[0] - 1.0).norm() < 1e-10 && p.v[1].norm() < 1e-10);
    }

    #[test]
    fn series_estimate_two_modes() {
        // t_k = 2^k v + 0.5^k w
        let v = vec![ONE, c(0.5), ZERO];
        let w = vec![ZERO, ONE, c(-1.0)];
        let terms: Vec<Vec<Complex64>> = (0..20)
            .map(|k| linalg::add(&linalg::scale(&v, c(2f64.powi(k))), &linalg::scale(&w, c(0.5f64.powi(k)))))
            .collect();
        let p = dominant_mode(&terms).unwrap();
        assert!((p.lambda - 2.0).norm() < 1e-5);
    }

    #[test]
    fn series_estimate_rejects_convergent() {
        let terms: Vec<Vec<Complex64>> = (0..6).map(|k| vec![c(0.5f64.powi(k)), ONE * 0.1]).collect();
        assert!(matches!(dominant_mode(&terms), Err(EigenError::NotDominated(_))));
    }

    #[test]
    fn spectrum_csv_schema() {
        let b = synthetic_disc().materialize_b().unwrap();
        let basis = full_eigen(&b, 1e-12).unwrap();
        let csv = basis.spectrum_csv();
        assert!(csv.starts_with("index,re_lambda,im_lambda,abs_lambda\n0,2,"));
    }
}
