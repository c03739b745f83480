use lrsplit::surface::{gaussian_spectrum, generate_gaussian};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;

const N: usize = 1024;
const DX: f64 = 0.125;
const RMS: f64 = 0.3;
const CORR: f64 = 1.0;
const ENSEMBLE: u64 = 60;

fn ensemble() -> Vec<Vec<f64>> {
    (0..ENSEMBLE)
        .map(|s| generate_gaussian(N, DX, RMS, CORR, 100 + s).unwrap().h().to_vec())
        .collect()
}

fn circular_autocorrelation(h: &[f64], lag: usize) -> f64 {
    let n = h.len();
    (0..n).map(|j| h[j] * h[(j + lag) % n]).sum::<f64>() / n as f64
}

#[test]
fn rms_and_correlation_length() {
    let surfaces = ensemble();
    let var: f64 = surfaces.iter().map(|h| circular_autocorrelation(h, 0)).sum::<f64>() / ENSEMBLE as f64;
    assert!((var.sqrt() - RMS).abs() <= 0.1 * RMS, "rms {}", var.sqrt());
    // C(tau) = rms^2 exp(-tau^2 / corr^2)
    let lag = (CORR / DX).round() as usize;
    let c: f64 = surfaces.iter().map(|h| circular_autocorrelation(h, lag)).sum::<f64>() / ENSEMBLE as f64;
    let expect = (-1.0f64).exp();
    assert!((c / var - expect).abs() <= 0.15 * expect, "C(corr)/C(0) = {}", c / var);
}

#[test]
fn periodogram_matches_spectrum() {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(N);
    let len = N as f64 * DX;
    let dk = 2.0 * PI / len;
    let mut power = vec![0.0; N / 2];
    for h in ensemble() {
        let mut buf: Vec<Complex<f64>> = h.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft.process(&mut buf);
        // mode m carries E|c_m|^2 = W(K_m) dK, and the forward FFT returns N c_m
        for (m, p) in power.iter_mut().enumerate() {
            *p += buf[m].norm_sqr() / (N as f64 * N as f64 * dk);
        }
    }
    // bands of four bins, compared up to where W falls to 1e-3 of its peak
    let mut sq = 0.0;
    let mut count = 0.0;
    for band in power[1..].chunks(4) {
        let start = 1 + count as usize * 4;
        let (mut measured, mut w) = (0.0, 0.0);
        for (i, p) in band.iter().enumerate() {
            measured += p / ENSEMBLE as f64;
            w += gaussian_spectrum((start + i) as f64 * dk, RMS, CORR);
        }
        if w < 4e-3 * gaussian_spectrum(0.0, RMS, CORR) {
            break;
        }
        sq += (measured / w - 1.0).powi(2);
        count += 1.0;
    }
    let rms_dev = (sq / count).sqrt();
    assert!(count >= 5.0);
    assert!(rms_dev <= 0.15, "relative rms deviation {rms_dev}");
}
