//! Nyström discretization of the TM (Neumann) surface integral equation
//! `H_inc = H - ∫ ∂G/∂n' H dS`, its Left/Right triangular split, and the
//! iterating operator `B = -R L^{-1}`.
//!
//! Off-diagonal entries use the midpoint rule on the uniform `x` grid with
//! arc-length weight `w_j = sqrt(1 + h'_j^2)`:
//!
//! ```text
//! A_ij = -dx w_j (ik/4) H1(k rho_ij) n_j·(r_j - r_i) / rho_ij
//!      = -dx (ik/4) H1(k rho_ij) [h'_j (x_j - x_i) - (h_j - h_i)] / rho_ij
//! ```
//!
//! with `n_j = (h'_j, -1) / w_j` the downward normal. The diagonal is the
//! jump term plus the curvature limit of the kernel,
//! `A_ii = 1/2 - (dx / 4 pi) h''_i / (1 + h'_i^2)`, so a flat surface gives
//! `A = I/2` exactly.

use crate::exec::{self, Execution};
use crate::linalg::{self, CMatrix, LinalgError, LuFactors, ONE, ZERO};
use crate::specfun::{hankel1_1, SpecfunError};
use crate::surface::SurfaceProfile;
use num_complex::Complex64;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;
use std::sync::OnceLock;
use thiserror::Error;

/// Largest `n` for which [`Discretization::materialize_b`] will build `B`.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;

const DIAGONAL_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("grid too coarse: k*dx = {kdx:.4} exceeds pi/2 (fewer than 4 points per wavelength)")]
    Resolution { kdx: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("L has a vanishing diagonal entry at row {row}")]
    SingularDiagonal { row: usize },
    #[error("vector length {actual} does not match system size {expected}")]
    Length { expected: usize, actual: usize },
    #[error("n = {n} exceeds the dense limit {limit}")]
    SizeLimit { n: usize, limit: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Specfun(#[from] SpecfunError),
    #[error("evaluation point ({x}, {z}) lies on or below the surface")]
    BelowSurface { x: f64, z: f64 },
}

/// Assembled operator `A = L + R`.
#[derive(Debug)]
pub struct Discretization {
    a: CMatrix,
    k: f64,
    surface: Option<SurfaceProfile>,
    lu: OnceLock<LuFactors>,
}

impl Clone for Discretization {
    fn clone(&self) -> Self {
        Self {
            a: self.a.clone(),
            k: self.k,
            surface: self.surface.clone(),
            lu: OnceLock::new(),
        }
    }
}

impl Discretization {
    pub fn assemble(surface: &SurfaceProfile, k: f64) -> Result<Self, KernelError> {
        Self::assemble_with(surface, k, Execution::default())
    }

    pub fn assemble_with(
        surface: &SurfaceProfile,
        k: f64,
        exec: Execution,
    ) -> Result<Self, KernelError> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(KernelError::InvalidParameter(format!("wavenumber must be > 0, got {k}")));
        }
        let dx = surface.dx();
        let kdx = k * dx;
        if kdx > FRAC_PI_2 {
            return Err(KernelError::Resolution { kdx });
        }
        let n = surface.len();
        let (x, h, dh, d2h) = (surface.x(), surface.h(), surface.dh(), surface.d2h());
        let pref = Complex64::new(0.0, -0.25 * k * dx);
        let mut data = vec![ZERO; n * n];
        let failures = std::sync::Mutex::new(None::<KernelError>);
        exec::for_each_chunk_mut(exec, &mut data, n, |i, row| {
            for j in 0..n {
                let value = if i == j {
                    let slope2 = dh[i] * dh[i];
                    Complex64::new(0.5 - dx / (4.0 * PI) * d2h[i] / (1.0 + slope2), 0.0)
                } else {
                    let ddx = x[j] - x[i];
                    let ddz = h[j] - h[i];
                    let rho = ddx.hypot(ddz);
                    let proj = dh[j] * ddx - ddz;
                    match hankel1_1(k * rho) {
                        Ok(h1) => pref * h1 * (proj / rho),
                        Err(e) => {
                            failures.lock().unwrap().get_or_insert(e.into());
                            ZERO
                        }
                    }
                };
                row[j] = value;
            }
        });
        if let Some(e) = failures.into_inner().unwrap() {
            return Err(e);
        }
        let a = CMatrix::from_raw(n, n, data);
        let disc = Self::from_parts(a, k, Some(surface.clone()))?;
        Ok(disc)
    }

    /// Wraps an arbitrary square matrix, for synthetic operators.
    pub fn from_matrix(a: CMatrix, k: f64) -> Result<Self, KernelError> {
        Self::from_parts(a, k, None)
    }

    fn from_parts(a: CMatrix, k: f64, surface: Option<SurfaceProfile>) -> Result<Self, KernelError> {
        if !a.is_square() {
            return Err(LinalgError::NotSquare {
                rows: a.rows(),
                cols: a.cols(),
            }
            .into());
        }
        let n = a.rows();
        for i in 0..n {
            for (j, z) in a.row(i).iter().enumerate() {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(KernelError::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(Self {
            a,
            k,
            surface,
            lu: OnceLock::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.a
    }

    pub fn surface(&self) -> Option<&SurfaceProfile> {
        self.surface.as_ref()
    }

    pub fn points_per_wavelength(&self) -> Option<f64> {
        self.surface.as_ref().map(|s| 2.0 * PI / (self.k * s.dx()))
    }

    fn check_len(&self, v: &[Complex64]) -> Result<(), KernelError> {
        if v.len() == self.n() {
            Ok(())
        } else {
            Err(KernelError::Length {
                expected: self.n(),
                actual: v.len(),
            })
        }
    }

    /// Dense copies of the lower (with diagonal) and strictly upper parts.
    pub fn split(&self) -> (CMatrix, CMatrix) {
        let n = self.n();
        let a = &self.a;
        let l = CMatrix::from_fn(n, n, |i, j| if j <= i { a[(i, j)] } else { ZERO });
        let r = CMatrix::from_fn(n, n, |i, j| if j > i { a[(i, j)] } else { ZERO });
        (l, r)
    }

    pub fn apply_a(&self, v: &[Complex64]) -> Result<Vec<Complex64>, KernelError> {
        self.check_len(v)?;
        Ok(self.a.mul_vec(v)?)
    }

    pub fn apply_l(&self, v: &[Complex64]) -> Result<Vec<Complex64>, KernelError> {
        self.check_len(v)?;
        Ok((0..self.n())
            .map(|i| linalg::dot_u(&self.a.row(i)[..=i], &v[..=i]))
            .collect())
    }

    pub fn apply_r(&self, v: &[Complex64]) -> Result<Vec<Complex64>, KernelError> {
        self.check_len(v)?;
        Ok((0..self.n())
            .map(|i| linalg::dot_u(&self.a.row(i)[i + 1..], &v[i + 1..]))
            .collect())
    }

    /// Forward substitution `L v = rhs`.
    pub fn solve_l(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, KernelError> {
        self.check_len(rhs)?;
        let n = self.n();
        let mut v = vec![ZERO; n];
        for i in 0..n {
            let row = self.a.row(i);
            let d = row[i];
            if d.norm() < DIAGONAL_FLOOR {
                return Err(KernelError::SingularDiagonal { row: i });
            }
            let s = linalg::dot_u(&row[..i], &v[..i]);
            v[i] = (rhs[i] - s) / d;
        }
        Ok(v)
    }

    /// `B v = -R (L^{-1} v)` without forming `B`.
    pub fn apply_b(&self, v: &[Complex64]) -> Result<Vec<Complex64>, KernelError> {
        let t = self.solve_l(v)?;
        let mut out = self.apply_r(&t)?;
        out.iter_mut().for_each(|z| *z = -*z);
        Ok(out)
    }

    pub fn materialize_b(&self) -> Result<CMatrix, KernelError> {
        self.materialize_b_with(DEFAULT_DENSE_LIMIT, Execution::default())
    }

    pub fn materialize_b_with(&self, limit: usize, exec: Execution) -> Result<CMatrix, KernelError> {
        let n = self.n();
        if n > limit {
            return Err(KernelError::SizeLimit { n, limit });
        }
        let cols: Vec<Result<Vec<Complex64>, KernelError>> = exec::map_range(exec, n, |j| {
            let mut e = vec![ZERO; n];
            e[j] = ONE;
            self.apply_b(&e)
        });
        let mut b = CMatrix::zeros(n, n);
        for (j, col) in cols.into_iter().enumerate() {
            let col = col?;
            for i in 0..n {
                b[(i, j)] = col[i];
            }
        }
        Ok(b)
    }

    fn lu(&self) -> Result<&LuFactors, KernelError> {
        if let Some(lu) = self.lu.get() {
            return Ok(lu);
        }
        let lu = LuFactors::factor(&self.a, Execution::default())?;
        Ok(self.lu.get_or_init(|| lu))
    }

    /// Dense LU solve of `A x = rhs`, the reference solution.
    pub fn direct_solve(&self, rhs: &[Complex64]) -> Result<Vec<Complex64>, KernelError> {
        self.check_len(rhs)?;
        Ok(self.lu()?.solve(rhs)?)
    }

    /// `(A v - rhs)` relative to `rhs`.
    pub fn relative_residual(&self, v: &[Complex64], rhs: &[Complex64]) -> Result<f64, KernelError> {
        let av = self.apply_a(v)?;
        let nr = linalg::norm2(rhs);
        let d = linalg::norm2(&linalg::sub(&av, rhs));
        Ok(if nr > 0.0 { d / nr } else { d })
    }

    /// Interleaved `re,im` CSV of `A`, with a header row.
    pub fn matrix_csv(&self) -> String {
        matrix_csv(&self.a)
    }

    /// Scattered field `H_s(x, z) = ∫ ∂G/∂n' H dS` at a point above the
    /// surface, by the same midpoint rule as the matrix fill.
    pub fn scattered_field(&self, field: &[Complex64], x: f64, z: f64) -> Result<Complex64, KernelError> {
        self.check_len(field)?;
        let s = self
            .surface
            .as_ref()
            .ok_or_else(|| KernelError::InvalidParameter("no surface attached".into()))?;
        if let Some(hz) = interpolate_height(s, x) {
            if z <= hz {
                return Err(KernelError::BelowSurface { x, z });
            }
        }
        let k = self.k;
        let pref = Complex64::new(0.0, 0.25 * k * s.dx());
        let mut acc = ZERO;
        for j in 0..s.len() {
            let ddx = s.x()[j] - x;
            let ddz = s.h()[j] - z;
            let rho = ddx.hypot(ddz);
            let proj = s.dh()[j] * ddx - ddz;
            acc += pref * hankel1_1(k * rho)? * (proj / rho) * field[j];
        }
        Ok(acc)
    }
}

fn interpolate_height(s: &SurfaceProfile, x: f64) -> Option<f64> {
    let x0 = s.x()[0];
    let t = (x - x0) / s.dx();
    if t < 0.0 || t > (s.len() - 1) as f64 {
        return None;
    }
    let i = (t.floor() as usize).min(s.len() - 2);
    let f = t - i as f64;
    Some(s.h()[i] * (1.0 - f) + s.h()[i + 1] * f)
}

pub fn matrix_csv(m: &CMatrix) -> String {
    let mut s = String::new();
    let header: Vec<String> = (0..m.cols()).flat_map(|j| [format!("re{j}"), format!("im{j}")]).collect();
    s.push_str(&header.join(","));
    s.push('\n');
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().flat_map(|z| [z.re.to_string(), z.im.to_string()]).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

/// Surface trace of the tapered incident plane wave.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidentField {
    pub values: Vec<Complex64>,
    pub grazing_angle: f64,
    pub k: f64,
    pub taper_width: f64,
}

impl IncidentField {
    /// Wraps an arbitrary right-hand side (synthetic tests, modified fields).
    pub fn from_values(values: Vec<Complex64>) -> Self {
        Self {
            values,
            grazing_angle: f64::NAN,
            k: f64::NAN,
            taper_width: f64::INFINITY,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn to_csv(&self, x: &[f64]) -> String {
        let mut s = String::from("x,re,im\n");
        for (xi, v) in x.iter().zip(&self.values) {
            let _ = writeln!(s, "{},{},{}", xi, v.re, v.im);
        }
        s
    }
}

/// `exp(ik(x cos θ - h sin θ)) exp(-(x - x_c)^2 / g^2)`; `g = ∞` disables the
/// taper.
pub fn incident_plane_wave(
    surface: &SurfaceProfile,
    k: f64,
    grazing_angle: f64,
    taper_width: f64,
) -> Result<IncidentField, KernelError> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(KernelError::InvalidParameter(format!("wavenumber must be > 0, got {k}")));
    }
    if !(grazing_angle > 0.0 && grazing_angle < FRAC_PI_2) {
        return Err(KernelError::InvalidParameter(format!(
            "grazing angle must lie in (0, pi/2), got {grazing_angle}"
        )));
    }
    if !(taper_width > 0.0) {
        return Err(KernelError::InvalidParameter(format!(
            "taper width must be > 0, got {taper_width}"
        )));
    }
    let xc = surface.midpoint();
    let (s, c) = grazing_angle.sin_cos();
    let values = surface
        .x()
        .iter()
        .zip(surface.h())
        .map(|(&x, &h)| {
            let taper = if taper_width.is_infinite() {
                1.0
            } else {
                let u = (x - xc) / taper_width;
                (-u * u).exp()
            };
            Complex64::from_polar(taper, k * (x * c - h * s))
        })
        .collect();
    Ok(IncidentField {
        values,
        grazing_angle,
        k,
        taper_width,
    })
}

/// Incident field evaluated off the surface at `(x, z)`, same taper.
pub fn incident_at(inc: &IncidentField, xc: f64, x: f64, z: f64) -> Complex64 {
    let (s, c) = inc.grazing_angle.sin_cos();
    let taper = if inc.taper_width.is_infinite() {
        1.0
    } else {
        let u = (x - xc) / inc.taper_width;
        (-u * u).exp()
    };
    Complex64::from_polar(taper, inc.k * (x * c - z * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::*;
    use crate::surface;

    fn two_by_two() -> Discretization {
        Discretization::from_matrix(CMatrix::from_real_rows(&[&[1.0, 2.0], &[1.0, 1.0]]), 1.0).unwrap()
    }

    #[test]
    fn flat_surface_gives_half_identity() {
        let s = surface::flat(64, 0.1).unwrap();
        for exec in [Execution::Sequential, Execution::Parallel] {
            let d = Discretization::assemble_with(&s, 2.0 * PI, exec).unwrap();
            let half = CMatrix::identity(64);
            let m = d.matrix();
            for i in 0..64 {
                for j in 0..64 {
                    assert_eq!(m[(i, j)], half[(i, j)] * 0.5);
                }
            }
        }
    }

    #[test]
    fn sinusoid_diagonal_is_curvature_term() {
        let dx = 0.1;
        let s = surface::sinusoid(64, dx, 0.05, 1.6, 0.2).unwrap();
        let d = Discretization::assemble(&s, 2.0 * PI).unwrap();
        for i in 0..64 {
            let expect = 0.5 - dx / (4.0 * PI) * s.d2h()[i] / (1.0 + s.dh()[i].powi(2));
            assert!((d.matrix()[(i, i)] - Complex64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn three_point_entry_by_hand() {
        let dx = 0.1;
        let k = 2.0 * PI;
        let h = vec![0.0, 0.03, -0.01];
        let dh = vec![0.2, -0.1, 0.4];
        let s = SurfaceProfile::from_parts(0.0, dx, h.clone(), dh.clone(), vec![0.0; 3]).unwrap();
        let d = Discretization::assemble(&s, k).unwrap();
        // entry (0, 1) evaluated from the defining formula with the normal
        // vector built explicitly
        let (xi, zi) = (0.0, h[0]);
        let (xj, zj) = (dx, h[1]);
        let wj = (1.0 + dh[1] * dh[1]).sqrt();
        let nj = (dh[1] / wj, -1.0 / wj);
        let rho = ((xj - xi).powi(2) + (zj - zi).powi(2)).sqrt();
        let ndot = nj.0 * (xj - xi) + nj.1 * (zj - zi);
        let h1 = hankel1_1(k * rho).unwrap();
        let expect = -Complex64::new(dx * wj, 0.0) * Complex64::new(0.0, k / 4.0) * h1 * (ndot / rho);
        assert!((d.matrix()[(0, 1)] - expect).norm() < 1e-12);
    }

    #[test]
    fn resolution_guard() {
        let s = surface::flat(16, 0.3).unwrap();
        assert!(matches!(
            Discretization::assemble(&s, 2.0 * PI),
            Err(KernelError::Resolution { .. })
        ));
    }

    #[test]
    fn split_two_by_two() {
        let d = two_by_two();
        let (l, r) = d.split();
        assert_eq!(l, CMatrix::from_real_rows(&[&[1.0, 0.0], &[1.0, 1.0]]));
        assert_eq!(r, CMatrix::from_real_rows(&[&[0.0, 2.0], &[0.0, 0.0]]));
        let mut sum = l.clone();
        for i in 0..2 {
            for j in 0..2 {
                sum[(i, j)] += r[(i, j)];
            }
        }
        assert_eq!(sum.sub(d.matrix()).max_abs(), 0.0);
    }

    #[test]
    fn apply_b_two_by_two() {
        let d = two_by_two();
        let bv = d.apply_b(&[ONE, ZERO]).unwrap();
        assert_eq!(bv, vec![Complex64::new(2.0, 0.0), ZERO]);
        let b = d.materialize_b().unwrap();
        assert_eq!(b, CMatrix::from_real_rows(&[&[2.0, -2.0], &[0.0, 0.0]]));
    }

    #[test]
    fn solve_l_cases() {
        let half = Discretization::from_matrix(
            CMatrix::from_fn(3, 3, |i, j| if i == j { Complex64::new(0.5, 0.0) } else { ZERO }),
            1.0,
        )
        .unwrap();
        let psi = vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5), ONE];
        assert_eq!(half.solve_l(&psi).unwrap(), linalg::scale(&psi, Complex64::new(2.0, 0.0)));

        let mut r = rng(11);
        let m = random_matrix(&mut r, 8);
        let d = Discretization::from_matrix(m, 1.0).unwrap();
        let ones = vec![ONE; 8];
        let rhs = d.apply_l(&ones).unwrap();
        assert!(linalg::rel_err(&d.solve_l(&rhs).unwrap(), &ones) < 1e-12);
        let rhs = random_vec(&mut r, 8);
        let v = d.solve_l(&rhs).unwrap();
        assert!(linalg::rel_err(&d.apply_l(&v).unwrap(), &rhs) < 1e-12);

        let sing = Discretization::from_matrix(CMatrix::from_real_rows(&[&[1.0, 0.0], &[1.0, 0.0]]), 1.0).unwrap();
        assert!(matches!(sing.solve_l(&[ONE, ONE]), Err(KernelError::SingularDiagonal { row: 1 })));
    }

    #[test]
    fn apply_b_matches_dense_oracle() {
        let mut r = rng(17);
        for _ in 0..4 {
            let mut m = random_matrix(&mut r, 16);
            for i in 0..16 {
                m[(i, i)] += Complex64::new(4.0, 0.0);
            }
            let d = Discretization::from_matrix(m, 1.0).unwrap();
            let (l, rr) = d.split();
            let linv = LuFactors::factor(&l, Execution::Sequential).unwrap().inverse();
            let dense = rr.matmul(&linv).unwrap();
            let v = random_vec(&mut r, 16);
            let expect: Vec<Complex64> = dense.mul_vec(&v).unwrap().into_iter().map(|z| -z).collect();
            let got = d.apply_b(&v).unwrap();
            assert!(linalg::rel_err(&got, &expect) < 1e-12);
            let b = d.materialize_b().unwrap();
            assert!(linalg::rel_err(&b.mul_vec(&v).unwrap(), &got) < 1e-12);
        }
    }

    #[test]
    fn materialize_flat_and_limit() {
        let s = surface::flat(32, 0.1).unwrap();
        let d = Discretization::assemble(&s, 2.0 * PI).unwrap();
        assert_eq!(d.materialize_b().unwrap().max_abs(), 0.0);
        assert!(matches!(
            d.materialize_b_with(16, Execution::Sequential),
            Err(KernelError::SizeLimit { .. })
        ));
    }

    #[test]
    fn direct_solve_cases() {
        let d = two_by_two();
        let x = d.direct_solve(&[ONE, ZERO]).unwrap();
        assert!((x[0] + 1.0).norm() < 1e-15 && (x[1] - 1.0).norm() < 1e-15);
        let mut r = rng(23);
        let d = Discretization::from_matrix(random_matrix(&mut r, 32), 1.0).unwrap();
        let b = random_vec(&mut r, 32);
        let x = d.direct_solve(&b).unwrap();
        assert!(d.relative_residual(&x, &b).unwrap() < 1e-10);
    }

    #[test]
    fn flat_surface_doubling() {
        let s = surface::flat(128, 0.125).unwrap();
        let d = Discretization::assemble(&s, 2.0 * PI).unwrap();
        let inc = incident_plane_wave(&s, 2.0 * PI, 0.2, 4.0).unwrap();
        let x = d.direct_solve(&inc.values).unwrap();
        let two = linalg::scale(&inc.values, Complex64::new(2.0, 0.0));
        assert!(linalg::rel_err(&x, &two) < 1e-10);
    }

    #[test]
    fn kernel_distance_is_symmetric() {
        let s = surface::generate_gaussian(64, 0.1, 0.05, 0.5, 3).unwrap();
        for i in 0..64 {
            for j in 0..64 {
                let a = (s.x()[j] - s.x()[i]).hypot(s.h()[j] - s.h()[i]);
                let b = (s.x()[i] - s.x()[j]).hypot(s.h()[i] - s.h()[j]);
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn incident_field_properties() {
        let s = surface::generate_gaussian(64, 0.1, 0.05, 0.5, 3).unwrap();
        let k = 2.0 * PI;
        let g = 1.5;
        let a = incident_plane_wave(&s, k, 0.1, g).unwrap();
        let b = incident_plane_wave(&s, k, 1.2, g).unwrap();
        for j in 0..64 {
            let u = (s.x()[j] - s.midpoint()) / g;
            assert!((a.values[j].norm() - (-u * u).exp()).abs() < 1e-14);
            assert!((a.values[j].norm() - b.values[j].norm()).abs() < 1e-14);
        }
        let flat = surface::flat(64, 0.1).unwrap();
        let c = incident_plane_wave(&flat, k, 1e-9, f64::INFINITY).unwrap();
        for j in 0..64 {
            assert!((c.values[j].norm() - 1.0).abs() < 1e-15);
            let pure = Complex64::from_polar(1.0, k * flat.x()[j]);
            assert!((c.values[j] - pure).norm() < 1e-7);
        }
        assert!(incident_plane_wave(&s, k, 0.0, g).is_err());
        assert!(incident_plane_wave(&s, k, FRAC_PI_2, g).is_err());
        assert!(incident_plane_wave(&s, k, 0.3, -1.0).is_err());
    }

    #[test]
    fn grid_refinement_consistency() {
        // smooth sinusoid at 8 and 16 points per wavelength; compare the
        // surface field at the shared grid points
        let k = 2.0 * PI;
        let solve = |ppw: usize, n: usize| {
            let dx = 1.0 / ppw as f64;
            let s = surface::sinusoid(n, dx, 0.05, 6.0, 0.0).unwrap();
            let d = Discretization::assemble(&s, k).unwrap();
            let inc = incident_plane_wave(&s, k, 0.3, s.length() / 4.0).unwrap();
            d.direct_solve(&inc.values).unwrap()
        };
        let coarse = solve(8, 384);
        let fine = solve(16, 767);
        let fine_on_coarse: Vec<Complex64> = fine.iter().step_by(2).copied().collect();
        let err = linalg::rel_err(&coarse, &fine_on_coarse[..coarse.len()]);
        assert!(err <= 0.02, "refinement change {err}");
    }
}
