//! Gaussian process deconvolution.
//!
//! A latent source `x ~ GP(0, K_x)` is observed only through noisy, possibly
//! incomplete samples of its convolution `f(t) = ∫ x(τ) h(τ - t) dτ` with a
//! filter `h`. Because `f` is again Gaussian, the posterior over `x` given the
//! observations has a closed form, and the model hyperparameters (including a
//! discrete approximation of an unknown filter) can be trained by maximum
//! likelihood.
//!
//! Module map:
//! - [`kernels`]: source kernels, filters, their Fourier transforms.
//! - [`covops`]: convolved covariance `K_f` and cross-covariance `K_xf`.
//! - [`gp`]: jittered Cholesky, Gaussian conditioning, likelihood, sampling.
//! - [`model`]: joint sampling of source and convolution.
//! - [`deconv`]: posterior deconvolution and recoverability diagnostics.
//! - [`train`]: maximum-likelihood and blind fitting.
//! - [`baselines`]: inverse-FT and Wiener deconvolution, spectral metrics.

pub mod baselines;
pub mod covops;
pub mod deconv;
mod error;
pub mod gp;
pub mod kernels;
mod locations;
pub mod model;
pub mod train;

#[cfg(test)]
mod testutil;

pub use covops::{build_bundle, ConvKernel, ConvKernelPair, CovMethod, CovarianceBundle};
pub use deconv::{deconvolve, predict_convolution, Deconvolver, ObservationSet, PosteriorField, SpectralReport};
pub use error::{GpdcError, Result};
pub use kernels::{DiscreteFilter, FilterSpec, KernelSpec};
pub use locations::{linspace, Locations};
