//! Rough surface realizations on a uniform grid.
//!
//! Periodic synthetic surfaces (Gaussian spectrum, sinusoid) carry exact
//! spectral/analytic derivatives. Composite surfaces built by
//! [`embed_patch`] are differentiated with fourth-order finite differences,
//! one-sided at the ends.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurfaceError {
    #[error("invalid surface parameter: {0}")]
    InvalidParameter(String),
    #[error("patch of {patch} samples at offset {offset} with ramp {ramp} does not fit in {base} samples")]
    OutOfBounds {
        base: usize,
        patch: usize,
        offset: usize,
        ramp: usize,
    },
    #[error("malformed surface csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    GaussianSpectrum,
    Flat,
    Sinusoid,
    EmbeddedPatch,
}

/// Statistical description of a surface realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceStats {
    pub rms_height: f64,
    pub corr_length: f64,
    pub seed: u64,
    pub kind: SurfaceKind,
}

impl SurfaceStats {
    pub fn validate(&self) -> Result<(), SurfaceError> {
        if !(self.rms_height >= 0.0) || !self.rms_height.is_finite() {
            return Err(SurfaceError::InvalidParameter(format!(
                "rms_height must be >= 0, got {}",
                self.rms_height
            )));
        }
        if !(self.corr_length > 0.0) || !self.corr_length.is_finite() {
            return Err(SurfaceError::InvalidParameter(format!(
                "corr_length must be > 0, got {}",
                self.corr_length
            )));
        }
        Ok(())
    }
}

/// Sampled surface `z = h(x)` with first and second derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceProfile {
    x: Vec<f64>,
    h: Vec<f64>,
    dh: Vec<f64>,
    d2h: Vec<f64>,
    dx: f64,
}

impl SurfaceProfile {
    /// Assembles a profile from explicit samples. `x` is `x0 + j*dx`.
    pub fn from_parts(
        x0: f64,
        dx: f64,
        h: Vec<f64>,
        dh: Vec<f64>,
        d2h: Vec<f64>,
    ) -> Result<Self, SurfaceError> {
        let n = h.len();
        if n < 2 {
            return Err(SurfaceError::InvalidParameter(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        if dh.len() != n || d2h.len() != n {
            return Err(SurfaceError::InvalidParameter(
                "h, dh and d2h lengths differ".into(),
            ));
        }
        check_positive("dx", dx)?;
        if h.iter().chain(&dh).chain(&d2h).any(|v| !v.is_finite()) {
            return Err(SurfaceError::InvalidParameter("non-finite sample".into()));
        }
        let x = (0..n).map(|j| x0 + j as f64 * dx).collect();
        Ok(Self { x, h, dh, d2h, dx })
    }

    /// Heights only; derivatives by fourth-order finite differences.
    pub fn from_heights(x0: f64, dx: f64, h: Vec<f64>) -> Result<Self, SurfaceError> {
        check_positive("dx", dx)?;
        let (dh, d2h) = fd4_derivatives(&h, dx);
        Self::from_parts(x0, dx, h, dh, d2h)
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn dh(&self) -> &[f64] {
        &self.dh
    }

    pub fn d2h(&self) -> &[f64] {
        &self.d2h
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Extent `x_last - x_first`.
    pub fn length(&self) -> f64 {
        self.x[self.len() - 1] - self.x[0]
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.x[0] + self.x[self.len() - 1])
    }

    pub fn rms_height(&self) -> f64 {
        (self.h.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn rms_slope(&self) -> f64 {
        (self.dh.iter().map(|v| v * v).sum::<f64>() / self.len() as f64).sqrt()
    }

    pub fn is_flat(&self) -> bool {
        self.h.iter().chain(&self.dh).chain(&self.d2h).all(|&v| v == 0.0)
    }

    /// CSV with header `x,h,dh,d2h`, shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,h,dh,d2h\n");
        for j in 0..self.len() {
            let _ = writeln!(s, "{},{},{},{}", self.x[j], self.h[j], self.dh[j], self.d2h[j]);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, SurfaceError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next().map(str::trim) {
            Some("x,h,dh,d2h") => {}
            other => return Err(SurfaceError::Csv(format!("bad header {other:?}"))),
        }
        let (mut x, mut h, mut dh, mut d2h) = (vec![], vec![], vec![], vec![]);
        for (lineno, line) in lines.enumerate() {
            let vals: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| SurfaceError::Csv(format!("row {}: {e}", lineno + 1)))?;
            if vals.len() != 4 {
                return Err(SurfaceError::Csv(format!("row {}: expected 4 fields", lineno + 1)));
            }
            x.push(vals[0]);
            h.push(vals[1]);
            dh.push(vals[2]);
            d2h.push(vals[3]);
        }
        if x.len() < 2 {
            return Err(SurfaceError::Csv("need at least 2 rows".into()));
        }
        let dx = x[1] - x[0];
        let tol = 1e-9 * (x[x.len() - 1].abs() + dx.abs());
        if x.iter().enumerate().any(|(j, &xj)| (xj - x[0] - j as f64 * dx).abs() > tol) {
            return Err(SurfaceError::Csv("x is not uniformly spaced".into()));
        }
        let mut p = Self::from_parts(x[0], dx, h, dh, d2h)?;
        // keep the exact abscissae that were read
        p.x = x;
        Ok(p)
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), SurfaceError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SurfaceError::InvalidParameter(format!("{name} must be > 0, got {v}")))
    }
}

pub fn flat(n: usize, dx: f64) -> Result<SurfaceProfile, SurfaceError> {
    SurfaceProfile::from_parts(0.0, dx, vec![0.0; n], vec![0.0; n], vec![0.0; n])
}

/// `h(x) = amplitude * sin(2 pi x / period + phase)` with analytic derivatives.
pub fn sinusoid(
    n: usize,
    dx: f64,
    amplitude: f64,
    period: f64,
    phase: f64,
) -> Result<SurfaceProfile, SurfaceError> {
    check_positive("dx", dx)?;
    if !(period >= 4.0 * dx) || !period.is_finite() {
        return Err(SurfaceError::InvalidParameter(format!(
            "period must be >= 4*dx, got {period}"
        )));
    }
    if !amplitude.is_finite() || !phase.is_finite() {
        return Err(SurfaceError::InvalidParameter("non-finite amplitude or phase".into()));
    }
    let w = 2.0 * PI / period;
    let mut h = Vec::with_capacity(n);
    let mut dh = Vec::with_capacity(n);
    let mut d2h = Vec::with_capacity(n);
    for j in 0..n {
        let arg = w * j as f64 * dx + phase;
        let (s, c) = arg.sin_cos();
        h.push(amplitude * s);
        dh.push(amplitude * w * c);
        d2h.push(-amplitude * w * w * s);
    }
    SurfaceProfile::from_parts(0.0, dx, h, dh, d2h)
}

/// Two-sided Gaussian power spectrum whose autocorrelation is
/// `rms^2 exp(-tau^2 / corr^2)`.
pub fn gaussian_spectrum(wavenumber: f64, rms_height: f64, corr_length: f64) -> f64 {
    rms_height * rms_height * corr_length / (2.0 * PI.sqrt())
        * (-0.25 * wavenumber * wavenumber * corr_length * corr_length).exp()
}

/// Grid wavenumbers in FFT order for a periodic grid of `n` samples.
fn fft_wavenumbers(n: usize, dx: f64) -> Vec<f64> {
    let dk = 2.0 * PI / (n as f64 * dx);
    (0..n)
        .map(|m| {
            let m = if m <= n / 2 { m as f64 } else { m as f64 - n as f64 };
            m * dk
        })
        .collect()
}

/// Periodic Gaussian-correlated surface by spectral filtering of white
/// Gaussian noise.
///
/// Modes `m = 1 .. n/2-1` draw `(a, b)` from a `ChaCha8Rng` seeded with
/// `seed`, in increasing `m`; the coefficient is
/// `sqrt(W(K_m) dK / 2) (a + i b)` and the negative-frequency mode is its
/// conjugate. The mean and Nyquist modes are zero.
pub fn generate_gaussian(
    n: usize,
    dx: f64,
    rms_height: f64,
    corr_length: f64,
    seed: u64,
) -> Result<SurfaceProfile, SurfaceError> {
    if n < 16 || !n.is_power_of_two() {
        return Err(SurfaceError::InvalidParameter(format!(
            "n must be a power of two >= 16, got {n}"
        )));
    }
    check_positive("dx", dx)?;
    if !(rms_height >= 0.0) || !rms_height.is_finite() {
        return Err(SurfaceError::InvalidParameter(format!(
            "rms_height must be >= 0, got {rms_height}"
        )));
    }
    if !(corr_length >= 2.0 * dx) || !corr_length.is_finite() {
        return Err(SurfaceError::InvalidParameter(format!(
            "corr_length must be >= 2*dx, got {corr_length}"
        )));
    }
    let ks = fft_wavenumbers(n, dx);
    let dk = 2.0 * PI / (n as f64 * dx);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    for m in 1..n / 2 {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        let amp = (0.5 * gaussian_spectrum(ks[m], rms_height, corr_length) * dk).sqrt();
        coeffs[m] = Complex64::new(a, b) * amp;
        coeffs[n - m] = coeffs[m].conj();
    }
    let (h, dh, d2h) = synthesize(&coeffs, &ks);
    SurfaceProfile::from_parts(0.0, dx, h, dh, d2h)
}

/// Inverse transforms `c`, `iK c` and `-K^2 c`, keeping real parts.
fn synthesize(coeffs: &[Complex64], ks: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = coeffs.len();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut h = coeffs.to_vec();
    let mut dh: Vec<Complex64> = coeffs.iter().zip(ks).map(|(c, &k)| c * Complex64::new(0.0, k)).collect();
    let mut d2h: Vec<Complex64> = coeffs.iter().zip(ks).map(|(c, &k)| c * (-k * k)).collect();
    ifft.process(&mut h);
    ifft.process(&mut dh);
    ifft.process(&mut d2h);
    let re = |v: Vec<Complex64>| v.into_iter().map(|z| z.re).collect::<Vec<_>>();
    (re(h), re(dh), re(d2h))
}

/// Spectral first and second derivatives of a periodic sample vector whose
/// length is the period. The Nyquist mode is dropped.
pub fn spectral_derivatives(h: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let mut c: Vec<Complex64> = h.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft.process(&mut c);
    let inv_n = 1.0 / n as f64;
    for z in c.iter_mut() {
        *z *= inv_n;
    }
    if n.is_multiple_of(2) {
        c[n / 2] = Complex64::new(0.0, 0.0);
    }
    let ks = fft_wavenumbers(n, dx);
    let (_, dh, d2h) = synthesize(&c, &ks);
    (dh, d2h)
}

/// Fourth-order central differences with fourth-order one-sided stencils at
/// the two end samples on each side. Below 6 samples the scheme drops to
/// second order.
pub fn fd4_derivatives(h: &[f64], dx: f64) -> (Vec<f64>, Vec<f64>) {
    let n = h.len();
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    if n < 2 {
        return (d1, d2);
    }
    if n < 6 {
        for i in 0..n {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            d1[i] = (h[b] - h[a]) / ((b - a) as f64 * dx);
        }
        if n >= 3 {
            for i in 0..n {
                let c = i.clamp(1, n - 2);
                d2[i] = (h[c - 1] - 2.0 * h[c] + h[c + 1]) / (dx * dx);
            }
        }
        return (d1, d2);
    }
    let i12 = 1.0 / (12.0 * dx);
    let i12sq = 1.0 / (12.0 * dx * dx);
    for i in 2..n - 2 {
        d1[i] = (h[i - 2] - 8.0 * h[i - 1] + 8.0 * h[i + 1] - h[i + 2]) * i12;
        d2[i] = (-h[i - 2] + 16.0 * h[i - 1] - 30.0 * h[i] + 16.0 * h[i + 1] - h[i + 2]) * i12sq;
    }
    let one_sided = |f: &dyn Fn(usize) -> f64| -> [f64; 4] {
        [
            (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4)) * i12,
            (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4)) * i12,
            (45.0 * f(0) - 154.0 * f(1) + 214.0 * f(2) - 156.0 * f(3) + 61.0 * f(4) - 10.0 * f(5)) * i12sq,
            (10.0 * f(0) - 15.0 * f(1) - 4.0 * f(2) + 14.0 * f(3) - 6.0 * f(4) + f(5)) * i12sq,
        ]
    };
    let left = one_sided(&|k| h[k]);
    d1[0] = left[0];
    d1[1] = left[1];
    d2[0] = left[2];
    d2[1] = left[3];
    // mirrored stencil: first derivative flips sign
    let right = one_sided(&|k| h[n - 1 - k]);
    d1[n - 1] = -right[0];
    d1[n - 2] = -right[1];
    d2[n - 1] = right[2];
    d2[n - 2] = right[3];
    (d1, d2)
}

/// Places `patch` at `offset` on an otherwise flat surface of `base_n`
/// samples. Either side of the patch, `ramp_len` samples blend the patch's
/// linear edge continuation to zero with a raised-cosine weight, so the
/// result is flat on `[0, offset - ramp_len]` and on
/// `[offset + patch_len + ramp_len - 1, base_n)`.
pub fn embed_patch(
    base_n: usize,
    dx: f64,
    patch: &SurfaceProfile,
    offset: usize,
    ramp_len: usize,
) -> Result<SurfaceProfile, SurfaceError> {
    check_positive("dx", dx)?;
    let pn = patch.len();
    if offset < ramp_len || offset + pn + ramp_len > base_n {
        return Err(SurfaceError::OutOfBounds {
            base: base_n,
            patch: pn,
            offset,
            ramp: ramp_len,
        });
    }
    let mut h = vec![0.0; base_n];
    h[offset..offset + pn].copy_from_slice(patch.h());
    let weight = |p: usize| {
        // p in 1..=ramp_len samples away from the patch edge
        let t = (ramp_len - p) as f64 / ramp_len as f64;
        0.5 * (1.0 - (PI * t).cos())
    };
    let (h0, s0) = (patch.h()[0], patch.dh()[0]);
    let (h1, s1) = (patch.h()[pn - 1], patch.dh()[pn - 1]);
    for p in 1..=ramp_len {
        let d = p as f64 * dx;
        h[offset - p] = weight(p) * (h0 - s0 * d);
        h[offset + pn - 1 + p] = weight(p) * (h1 + s1 * d);
    }
    SurfaceProfile::from_heights(0.0, dx, h)
}
