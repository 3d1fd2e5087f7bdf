//! FFT deconvolution baselines and spectral error metrics.
//!
//! Convolution here is the classical circular `y[k] = Σ_m h[m] x[k - m]`,
//! i.e. `Y = H X` bin by bin.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{domain, GpdcError, Result};

/// Samples on a uniform grid: `values[k]` is at `origin + k * step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformSignal {
    pub values: Vec<f64>,
    pub step: f64,
    pub origin: f64,
}

impl UniformSignal {
    pub fn new(values: Vec<f64>, step: f64, origin: f64) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return domain(format!("grid step must be positive, got {step}"));
        }
        if values.len() < 2 {
            return domain("a uniform signal needs at least two samples");
        }
        if !origin.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return domain("signal values must be finite");
        }
        Ok(Self { values, step, origin })
    }

    /// A unit-area impulse at time 0 sampled on `n` points starting at `origin`.
    pub fn impulse(n: usize, step: f64, origin: f64) -> Result<Self> {
        let mut s = Self::new(vec![0.0; n], step, origin)?;
        let k = (-origin / step).round();
        if k < 0.0 || k >= n as f64 {
            return domain("time 0 lies outside the grid");
        }
        s.values[k as usize] = 1.0;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.origin + k as f64 * self.step).collect()
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        Self { values, step: self.step, origin: self.origin }
    }
}

fn fft(values: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut buf = values.to_vec();
    let mut planner = FftPlanner::new();
    let plan = if inverse { planner.plan_fft_inverse(buf.len()) } else { planner.plan_fft_forward(buf.len()) };
    plan.process(&mut buf);
    buf
}

fn real_fft(values: &[f64]) -> Vec<Complex64> {
    fft(&values.iter().map(|v| Complex64::new(*v, 0.0)).collect::<Vec<_>>(), false)
}

fn real_ifft(spec: &[Complex64]) -> Vec<f64> {
    let n = spec.len() as f64;
    fft(spec, true).into_iter().map(|c| c.re / n).collect()
}

/// Spectrum of `h` zero-padded to `n` bins, each sample placed at its time lag (mod n).
fn filter_spectrum(h: &UniformSignal, y: &UniformSignal) -> Result<Vec<Complex64>> {
    if (h.step - y.step).abs() > 1e-9 * y.step {
        return domain(format!("filter step {} differs from signal step {}", h.step, y.step));
    }
    let n = y.len();
    if h.len() > n {
        return domain("filter is longer than the signal");
    }
    let mut padded = vec![0.0; n];
    for (k, v) in h.values.iter().enumerate() {
        let lag = ((h.origin + k as f64 * h.step) / h.step).round() as i64;
        padded[lag.rem_euclid(n as i64) as usize] += v;
    }
    Ok(real_fft(&padded))
}

fn check_finite(values: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(GpdcError::Instability(format!("{what} produced non-finite values")));
    }
    Ok(values)
}

/// Pointwise spectral division `Y / (H + eps H/|H|)`.
///
/// `eps` defaults to `1e-12 max |H|`; with `eps = 0` an exactly zero bin is reported as instability.
pub fn inverse_ft_deconv(y: &UniformSignal, h: &UniformSignal, eps: Option<f64>) -> Result<UniformSignal> {
    if y.is_empty() || h.is_empty() {
        return domain("empty signal");
    }
    let hs = filter_spectrum(h, y)?;
    let eps = eps.unwrap_or_else(|| 1e-12 * hs.iter().map(|c| c.norm()).fold(0.0, f64::max));
    let ys = real_fft(&y.values);
    let xs: Vec<Complex64> = ys
        .iter()
        .zip(&hs)
        .map(|(yv, hv)| {
            let mag = hv.norm();
            let guard = if mag > 0.0 { hv / mag * eps } else { Complex64::new(eps, 0.0) };
            yv / (hv + guard)
        })
        .collect();
    Ok(y.with_values(check_finite(real_ifft(&xs), "inverse-FT deconvolution")?))
}

/// Wiener deconvolution `conj(H) Y / (|H|² + r)`.
pub fn wiener_deconv(y: &UniformSignal, h: &UniformSignal, noise_to_signal: f64) -> Result<UniformSignal> {
    if !(noise_to_signal.is_finite() && noise_to_signal >= 0.0) {
        return domain(format!("noise-to-signal ratio must be >= 0, got {noise_to_signal}"));
    }
    let hs = filter_spectrum(h, y)?;
    let ys = real_fft(&y.values);
    let xs: Vec<Complex64> =
        ys.iter().zip(&hs).map(|(yv, hv)| hv.conj() * yv / (hv.norm_sqr() + noise_to_signal)).collect();
    Ok(y.with_values(check_finite(real_ifft(&xs), "Wiener deconvolution")?))
}

/// `σ_n² n / Σ y²` when the noise variance is known, otherwise 0.01.
pub fn default_noise_to_signal(y: &[f64], noise_var: Option<f64>) -> f64 {
    match noise_var {
        Some(v) => {
            let energy: f64 = y.iter().map(|v| v * v).sum();
            if energy > 0.0 {
                v * y.len() as f64 / energy
            } else {
                0.01
            }
        }
        None => 0.01,
    }
}

/// Circular convolution of `x` with `h` on `x`'s grid.
pub fn convolve_circular(x: &UniformSignal, h: &UniformSignal) -> Result<UniformSignal> {
    let hs = filter_spectrum(h, x)?;
    let xs = real_fft(&x.values);
    let ys: Vec<Complex64> = xs.iter().zip(&hs).map(|(a, b)| a * b).collect();
    Ok(x.with_values(real_ifft(&ys)))
}

/// Power values on the nonnegative frequencies `k / (n step)`, `k = 0..=n/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
    pub normalized: bool,
}

impl Psd {
    /// Probability vector: entries floored at `1e-12`, then scaled to sum to one.
    pub fn normalize(&self) -> Self {
        let floored: Vec<f64> = self.power.iter().map(|p| p.max(1e-12)).collect();
        let total: f64 = floored.iter().sum();
        Self { freqs: self.freqs.clone(), power: floored.iter().map(|p| p / total).collect(), normalized: true }
    }
}

/// `|FFT(s)|² / n` on the nonnegative frequencies.
pub fn periodogram(s: &UniformSignal) -> Psd {
    let n = s.len();
    let spec = real_fft(&s.values);
    let half = n / 2;
    Psd {
        freqs: (0..=half).map(|k| k as f64 / (n as f64 * s.step)).collect(),
        power: spec[..=half].iter().map(|c| c.norm_sqr() / n as f64).collect(),
        normalized: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse_time: f64,
    pub mse_psd: f64,
    pub kl_psd: f64,
    pub wasserstein_psd: f64,
}

/// `Σ p log(p / q)` for probability vectors.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

/// 1-Wasserstein distance between probability vectors on the bin-index line.
pub fn wasserstein_index(p: &[f64], q: &[f64]) -> f64 {
    let (mut cp, mut cq, mut acc) = (0.0, 0.0, 0.0);
    for (a, b) in p.iter().zip(q) {
        cp += a;
        cq += b;
        acc += (cp - cq).abs();
    }
    acc
}

/// `estimate` circularly shifted to maximize its cross-correlation with `truth`.
pub fn align_circular(truth: &UniformSignal, estimate: &UniformSignal) -> Result<UniformSignal> {
    if truth.len() != estimate.len() {
        return domain(format!("lengths differ: {} vs {}", truth.len(), estimate.len()));
    }
    let n = truth.len();
    let a = real_fft(&truth.values);
    let b = real_fft(&estimate.values);
    let cross = real_ifft(&a.iter().zip(&b).map(|(x, y)| x * y.conj()).collect::<Vec<_>>());
    let shift = (0..n).fold(0, |best, k| if cross[k] > cross[best] { k } else { best });
    let values = (0..n).map(|k| estimate.values[(k + n - shift) % n]).collect();
    Ok(estimate.with_values(values))
}

pub fn metrics(truth: &UniformSignal, estimate: &UniformSignal, align: bool) -> Result<Metrics> {
    if truth.len() != estimate.len() {
        return domain(format!("lengths differ: {} vs {}", truth.len(), estimate.len()));
    }
    let estimate = if align { align_circular(truth, estimate)? } else { estimate.clone() };
    let n = truth.len() as f64;
    let mse_time = truth.values.iter().zip(&estimate.values).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    let (pt, pe) = (periodogram(truth), periodogram(&estimate));
    let mse_psd = pt.power.iter().zip(&pe.power).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / pt.power.len() as f64;
    let (p, q) = (pt.normalize(), pe.normalize());
    Ok(Metrics {
        mse_time,
        mse_psd,
        kl_psd: kl_divergence(&p.power, &q.power),
        wasserstein_psd: wasserstein_index(&p.power, &q.power),
    })
}

fn fft2(data: &mut [Complex64], rows: usize, cols: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let row_plan = if inverse { planner.plan_fft_inverse(cols) } else { planner.plan_fft_forward(cols) };
    for row in data.chunks_mut(cols) {
        row_plan.process(row);
    }
    let col_plan = if inverse { planner.plan_fft_inverse(rows) } else { planner.plan_fft_forward(rows) };
    let mut col = vec![Complex64::new(0.0, 0.0); rows];
    for c in 0..cols {
        for r in 0..rows {
            col[r] = data[r * cols + c];
        }
        col_plan.process(&mut col);
        for r in 0..rows {
            data[r * cols + c] = col[r];
        }
    }
}

/// 2D Wiener deconvolution of a row-major image. The kernel `h` (`kshape`)
/// has its centre element `(kr/2, kc/2)` at lag zero.
pub fn wiener_deconv_2d(
    y: &[f64],
    shape: [usize; 2],
    h: &[f64],
    kshape: [usize; 2],
    noise_to_signal: f64,
) -> Result<Vec<f64>> {
    let [rows, cols] = shape;
    let [kr, kc] = kshape;
    if y.len() != rows * cols || h.len() != kr * kc || kr > rows || kc > cols || rows == 0 || cols == 0 {
        return domain("image and kernel shapes are inconsistent");
    }
    if !(noise_to_signal.is_finite() && noise_to_signal >= 0.0) {
        return domain(format!("noise-to-signal ratio must be >= 0, got {noise_to_signal}"));
    }
    let mut hs = vec![Complex64::new(0.0, 0.0); rows * cols];
    for i in 0..kr {
        for j in 0..kc {
            let r = (i as i64 - (kr / 2) as i64).rem_euclid(rows as i64) as usize;
            let c = (j as i64 - (kc / 2) as i64).rem_euclid(cols as i64) as usize;
            hs[r * cols + c] += h[i * kc + j];
        }
    }
    fft2(&mut hs, rows, cols, false);
    let mut ys: Vec<Complex64> = y.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    fft2(&mut ys, rows, cols, false);
    let mut xs: Vec<Complex64> =
        ys.iter().zip(&hs).map(|(yv, hv)| hv.conj() * yv / (hv.norm_sqr() + noise_to_signal)).collect();
    fft2(&mut xs, rows, cols, true);
    let n = (rows * cols) as f64;
    check_finite(xs.into_iter().map(|c| c.re / n).collect(), "2D Wiener deconvolution")
}
