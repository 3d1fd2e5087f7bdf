use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::repr::RawSpec;
use super::{check_positive, gaussian_ft, lengthscale_from_rate, sinc};
use crate::error::{param, GpdcError, Result};

/// Stationary covariance of the latent source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub enum KernelSpec {
    /// Square exponential `σ² exp(-|t|² / (2 l²))`, isotropic when `dim == 2`.
    Se { sigma: f64, lengthscale: f64, dim: usize },
    /// Sinc `σ² sin(Δπt) / (Δπt)`, band-limited to `|xi| <= Δ/2`.
    Sinc { sigma: f64, width: f64 },
    /// Single-component spectral mixture `σ² exp(-t² / (2 l²)) cos(2π ν t)`.
    Sm { sigma: f64, lengthscale: f64, freq: f64 },
}

impl KernelSpec {
    pub fn se(sigma: f64, lengthscale: f64) -> Result<Self> {
        let spec = Self::Se { sigma, lengthscale, dim: 1 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn se_rate(sigma: f64, gamma: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Self::se(sigma, lengthscale_from_rate(gamma))
    }

    /// Isotropic SE kernel on the plane.
    pub fn se_2d(sigma: f64, lengthscale: f64) -> Result<Self> {
        let spec = Self::Se { sigma, lengthscale, dim: 2 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sinc(sigma: f64, width: f64) -> Result<Self> {
        let spec = Self::Sinc { sigma, width };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sm(sigma: f64, lengthscale: f64, freq: f64) -> Result<Self> {
        let spec = Self::Sm { sigma, lengthscale, freq };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sm_rate(sigma: f64, gamma: f64, freq: f64) -> Result<Self> {
        check_positive("gamma", gamma)?;
        Self::sm(sigma, lengthscale_from_rate(gamma), freq)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Se { sigma, lengthscale, dim } => {
                check_positive("sigma", sigma)?;
                check_positive("lengthscale", lengthscale)?;
                if dim != 1 && dim != 2 {
                    return Err(GpdcError::UnsupportedDimension(format!("SE kernel dimension {dim}")));
                }
                Ok(())
            }
            Self::Sinc { sigma, width } => {
                check_positive("sigma", sigma)?;
                check_positive("width", width)
            }
            Self::Sm { sigma, lengthscale, freq } => {
                check_positive("sigma", sigma)?;
                check_positive("lengthscale", lengthscale)?;
                if !(freq.is_finite() && freq >= 0.0) {
                    return param(format!("freq must be finite and >= 0, got {freq}"));
                }
                Ok(())
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Se { dim, .. } => *dim,
            _ => 1,
        }
    }

    pub fn sigma(&self) -> f64 {
        match *self {
            Self::Se { sigma, .. } | Self::Sinc { sigma, .. } | Self::Sm { sigma, .. } => sigma,
        }
    }

    /// `K(0) = σ²`.
    pub fn variance(&self) -> f64 {
        let s = self.sigma();
        s * s
    }

    /// Copy of this kernel with magnitude replaced.
    pub fn with_sigma(&self, sigma: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Se { sigma: s, .. } | Self::Sinc { sigma: s, .. } | Self::Sm { sigma: s, .. } => *s = sigma,
        }
        out
    }

    /// Checked evaluation at a lag whose length must equal the kernel dimension.
    pub fn eval(&self, lag: &[f64]) -> Result<f64> {
        self.validate()?;
        if lag.len() != self.dim() {
            return Err(GpdcError::UnsupportedDimension(format!(
                "lag of dimension {} for a {}D kernel",
                lag.len(),
                self.dim()
            )));
        }
        Ok(self.value(lag))
    }

    /// Evaluation at a scalar lag (for 2D kernels, along one axis).
    #[inline]
    pub fn eval_1d(&self, t: f64) -> f64 {
        match *self {
            Self::Se { sigma, lengthscale, .. } => sigma * sigma * (-0.5 * t * t / (lengthscale * lengthscale)).exp(),
            Self::Sinc { sigma, width } => sigma * sigma * sinc(width * t),
            Self::Sm { sigma, lengthscale, freq } => {
                sigma * sigma * (-0.5 * t * t / (lengthscale * lengthscale)).exp() * (2.0 * PI * freq * t).cos()
            }
        }
    }

    /// Unchecked evaluation; lag length is assumed to match.
    #[inline]
    pub(crate) fn value(&self, lag: &[f64]) -> f64 {
        match (self, lag) {
            (_, [t]) => self.eval_1d(*t),
            (Self::Se { sigma, lengthscale, .. }, _) => {
                let r2: f64 = lag.iter().map(|v| v * v).sum();
                sigma * sigma * (-0.5 * r2 / (lengthscale * lengthscale)).exp()
            }
            _ => f64::NAN,
        }
    }

    /// Power spectral density (Fourier transform of the 1D kernel).
    pub fn psd(&self, freq: f64) -> Result<f64> {
        self.validate()?;
        if self.dim() != 1 {
            return Err(GpdcError::UnsupportedDimension("PSD is only defined for 1D kernels".into()));
        }
        Ok(self.psd_unchecked(freq))
    }

    #[inline]
    pub(crate) fn psd_unchecked(&self, freq: f64) -> f64 {
        match *self {
            Self::Se { sigma, lengthscale, .. } => sigma * sigma * gaussian_ft(lengthscale, freq),
            Self::Sinc { sigma, width } => {
                if freq.abs() <= 0.5 * width {
                    sigma * sigma / width
                } else {
                    0.0
                }
            }
            Self::Sm { sigma, lengthscale, freq: nu } => {
                0.5 * sigma * sigma * (gaussian_ft(lengthscale, freq - nu) + gaussian_ft(lengthscale, freq + nu))
            }
        }
    }

    /// Frequencies beyond which the PSD is zero or numerically negligible.
    pub(crate) fn spectral_extent(&self) -> f64 {
        match *self {
            Self::Se { lengthscale, .. } => 1.4 / lengthscale,
            Self::Sinc { width, .. } => 0.5 * width,
            Self::Sm { lengthscale, freq, .. } => freq + 1.4 / lengthscale,
        }
    }

    /// Points where the PSD is discontinuous.
    pub(crate) fn spectral_breakpoints(&self) -> Vec<f64> {
        match *self {
            Self::Sinc { width, .. } => vec![-0.5 * width, 0.5 * width],
            _ => Vec::new(),
        }
    }

    /// `∫|K|` over the real line when the kernel is integrable.
    pub fn l1_norm(&self) -> Option<f64> {
        match *self {
            Self::Se { sigma, lengthscale, dim: 1 } => Some(sigma * sigma * (2.0 * PI).sqrt() * lengthscale),
            Self::Sm { sigma, lengthscale, freq } => {
                if freq == 0.0 {
                    return Some(sigma * sigma * (2.0 * PI).sqrt() * lengthscale);
                }
                // |cos| breaks the closed form; integrate the even integrand numerically.
                let half = 12.0 * lengthscale;
                let n = 200_000;
                let dt = half / n as f64;
                let sum: f64 = (0..n).map(|i| self.eval_1d((i as f64 + 0.5) * dt).abs()).sum();
                Some(2.0 * sum * dt)
            }
            _ => None,
        }
    }
}
