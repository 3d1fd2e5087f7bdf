//! Stationary source kernels and convolution filters.
//!
//! All Fourier quantities use the convention `F{g}(xi) = ∫ g(t) exp(-j 2π xi t) dt`
//! with `xi` in cycles per input unit.

mod filter;
mod repr;
mod source;

pub use filter::{DiscreteFilter, FilterSpec, GridLayout};
pub use source::KernelSpec;

use std::f64::consts::PI;

/// Normalized sinc `sin(πu)/(πu)`, with a series branch near the origin.
#[inline]
pub fn sinc(u: f64) -> f64 {
    let x = PI * u;
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Fourier transform of `exp(-t^2 / (2 l^2))`.
#[inline]
pub(crate) fn gaussian_ft(lengthscale: f64, freq: f64) -> f64 {
    (2.0 * PI).sqrt() * lengthscale * (-2.0 * PI * PI * lengthscale * lengthscale * freq * freq).exp()
}

pub(crate) fn check_positive(name: &str, value: f64) -> crate::Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        crate::error::param(format!("{name} must be finite and > 0, got {value}"))
    }
}

/// Converts an SE rate `gamma = 1 / (2 l^2)` into a lengthscale.
pub fn lengthscale_from_rate(gamma: f64) -> f64 {
    (0.5 / gamma).sqrt()
}

pub fn rate_from_lengthscale(lengthscale: f64) -> f64 {
    0.5 / (lengthscale * lengthscale)
}
