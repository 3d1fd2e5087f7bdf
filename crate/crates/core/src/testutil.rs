//! Oracles shared by unit tests. Independent of the code paths they check.

use num_complex::Complex64;
use rustfft::FftPlanner;

/// Numerical Fourier transform of `g` sampled every `dt` on `n` points centred at zero.
/// Returns nonnegative bin frequencies and `dt * DFT` at those bins.
pub fn fft_transform(g: impl Fn(f64) -> f64, dt: f64, n: usize) -> (Vec<f64>, Vec<Complex64>) {
    let mut buf: Vec<Complex64> = (0..n)
        .map(|k| {
            let idx = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
            Complex64::new(g(idx * dt), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let freqs = (0..n / 2).map(|k| k as f64 / (n as f64 * dt)).collect();
    let values = buf[..n / 2].iter().map(|z| z * dt).collect();
    (freqs, values)
}

/// Midpoint rule for `∫ g` over `[a, b]`.
pub fn midpoint(g: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..n).map(|i| g(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}
