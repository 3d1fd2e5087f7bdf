//! Posterior inference of the source from observations of its convolution.

mod spectrum;

pub use spectrum::{
    default_frequency_grid, recovery_diagnostic, windowed_spectrum_posterior, HannWindow, SpectralReport, WindowedSpectrum,
};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covops::{ConvKernel, ConvKernelPair, CovMethod};
use crate::error::{domain, GpdcError, Result};
use crate::gp::{self, cholesky, SpdFactor};
use crate::kernels::{FilterSpec, KernelSpec};
use crate::locations::Locations;

/// Which pixels of a `rows x cols` image were observed (row-major).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMask {
    pub rows: usize,
    pub cols: usize,
    pub observed: Vec<bool>,
}

impl ImageMask {
    pub fn full(rows: usize, cols: usize) -> Self {
        Self { rows, cols, observed: vec![true; rows * cols] }
    }

    pub fn count(&self) -> usize {
        self.observed.iter().filter(|o| **o).count()
    }

    pub fn observed_indices(&self) -> Vec<usize> {
        self.observed.iter().enumerate().filter(|(_, o)| **o).map(|(i, _)| i).collect()
    }
}

/// Noisy samples `y_i = f(t_i) + ε_i` with `ε_i ~ N(0, σ_n²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    locations: Locations,
    values: Vec<f64>,
    noise_var: f64,
    mask: Option<ImageMask>,
}

impl ObservationSet {
    pub fn new(locations: Locations, values: Vec<f64>, noise_var: f64) -> Result<Self> {
        if locations.len() != values.len() {
            return domain(format!("{} locations but {} values", locations.len(), values.len()));
        }
        if values.iter().chain(locations.as_flat()).any(|v| !v.is_finite()) {
            return domain("observations must be finite");
        }
        if !(noise_var.is_finite() && noise_var >= 0.0) {
            return domain(format!("noise variance must be >= 0, got {noise_var}"));
        }
        if let Some(i) = first_duplicate(&locations) {
            return domain(format!("duplicate observation location at index {i}"));
        }
        Ok(Self { locations, values, noise_var, mask: None })
    }

    pub fn one_d(locations: Vec<f64>, values: Vec<f64>, noise_var: f64) -> Result<Self> {
        Self::new(Locations::one_d(locations), values, noise_var)
    }

    pub fn empty(dim: usize, noise_var: f64) -> Self {
        Self { locations: Locations::empty(dim), values: Vec::new(), noise_var, mask: None }
    }

    /// Observed pixels of a row-major image; masked-out pixels are dropped.
    pub fn from_image(image: &[f64], mask: ImageMask, noise_var: f64) -> Result<Self> {
        if image.len() != mask.rows * mask.cols || mask.observed.len() != image.len() {
            return domain("image and mask sizes differ");
        }
        let idx = mask.observed_indices();
        let grid = Locations::pixel_grid(mask.rows, mask.cols);
        let locations = grid.select(&idx);
        let values = idx.iter().map(|&i| image[i]).collect();
        let mut obs = Self::new(locations, values, noise_var)?;
        obs.mask = Some(mask);
        Ok(obs)
    }

    pub fn locations(&self) -> &Locations {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn mask(&self) -> Option<&ImageMask> {
        self.mask.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.locations.dim()
    }

    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        let mut out = Self::new(self.locations.clone(), self.values.clone(), noise_var)?;
        out.mask = self.mask.clone();
        Ok(out)
    }

    /// The observations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let values = indices.iter().map(|&i| self.values[i]).collect();
        Self::new(self.locations.select(indices), values, self.noise_var)
    }
}

fn first_duplicate(locs: &Locations) -> Option<usize> {
    let mut order: Vec<usize> = (0..locs.len()).collect();
    order.sort_by(|&a, &b| {
        locs.point(a)
            .iter()
            .zip(locs.point(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    order.windows(2).find(|w| locs.point(w[0]) == locs.point(w[1])).map(|w| w[0].max(w[1]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Source,
    Convolution,
}

/// What produced a posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub target: Target,
    pub source: KernelSpec,
    pub filter: FilterSpec,
    pub method: CovMethod,
    pub noise_var: f64,
    pub num_observations: usize,
    pub jitter: f64,
}

/// Posterior mean and covariance at a set of query locations.
#[derive(Debug, Clone)]
pub struct PosteriorField {
    pub queries: Locations,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub provenance: Provenance,
}

impl PosteriorField {
    pub fn variance(&self) -> DVector<f64> {
        self.cov.diagonal()
    }

    pub fn std(&self) -> DVector<f64> {
        self.cov.diagonal().map(f64::sqrt)
    }
}

/// A factored observation covariance, reusable across query sets.
#[derive(Debug, Clone)]
pub struct Deconvolver {
    pair: ConvKernelPair,
    kernel: ConvKernel,
    obs: ObservationSet,
    factor: SpdFactor,
    alpha: DVector<f64>,
}

impl Deconvolver {
    pub fn new(obs: &ObservationSet, pair: ConvKernelPair) -> Result<Self> {
        let kernel = pair.prepare()?;
        if obs.dim() != kernel.dim() {
            return Err(GpdcError::UnsupportedDimension(format!(
                "{}D observations for a {}D model",
                obs.dim(),
                kernel.dim()
            )));
        }
        let mut ky = kernel.kf_matrix(obs.locations())?;
        for i in 0..ky.nrows() {
            ky[(i, i)] += obs.noise_var();
        }
        let factor = cholesky(&ky)?;
        let y = DVector::from_column_slice(obs.values());
        let alpha = if obs.is_empty() { y } else { factor.solve(&y) };
        Ok(Self { pair, kernel, obs: obs.clone(), factor, alpha })
    }

    pub fn kernel(&self) -> &ConvKernel {
        &self.kernel
    }

    pub fn pair(&self) -> &ConvKernelPair {
        &self.pair
    }

    pub fn observations(&self) -> &ObservationSet {
        &self.obs
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// `K_y⁻¹ y`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        gp::log_marginal_likelihood(&self.factor, &DVector::from_column_slice(self.obs.values()))
            .expect("factor built from these observations")
    }

    fn check_queries(&self, queries: &Locations) -> Result<()> {
        if queries.dim() != self.kernel.dim() {
            return Err(GpdcError::UnsupportedDimension(format!(
                "{}D queries for a {}D model",
                queries.dim(),
                self.kernel.dim()
            )));
        }
        Ok(())
    }

    fn provenance(&self, target: Target) -> Provenance {
        Provenance {
            target,
            source: self.pair.source.clone(),
            filter: self.pair.filter.clone(),
            method: self.pair.method,
            noise_var: self.obs.noise_var(),
            num_observations: self.obs.len(),
            jitter: self.factor.jitter(),
        }
    }

    fn cross(&self, target: Target, queries: &Locations) -> Result<DMatrix<f64>> {
        match target {
            Target::Source => self.kernel.kxf_matrix(queries, self.obs.locations()),
            Target::Convolution => self.kernel.kf_cross(queries, self.obs.locations()),
        }
    }

    fn field(&self, target: Target, queries: &Locations) -> Result<PosteriorField> {
        self.check_queries(queries)?;
        let prior = match target {
            Target::Source => self.kernel.kx_matrix(queries)?,
            Target::Convolution => self.kernel.kf_matrix(queries)?,
        };
        let cross = self.cross(target, queries)?;
        let y = DVector::from_column_slice(self.obs.values());
        let post = gp::condition(&prior, &cross, &self.factor, &y, None)?;
        Ok(PosteriorField { queries: queries.clone(), mean: post.mean, cov: post.cov, provenance: self.provenance(target) })
    }

    fn moments(&self, target: Target, queries: &Locations) -> Result<(DVector<f64>, DVector<f64>)> {
        self.check_queries(queries)?;
        let cross = self.cross(target, queries)?;
        let prior_var = match target {
            Target::Source => self.kernel.kx(&vec![0.0; queries.dim()]),
            Target::Convolution => self.kernel.kf(&vec![0.0; queries.dim()]),
        };
        let mean = &cross * &self.alpha;
        let var = gp::condition_variance(&DVector::from_element(queries.len(), prior_var), &cross, &self.factor)?;
        Ok((mean, var))
    }

    /// Full posterior of the source at `queries`.
    pub fn source_posterior(&self, queries: &Locations) -> Result<PosteriorField> {
        self.field(Target::Source, queries)
    }

    /// Posterior mean and marginal variance of the source, without the full covariance.
    pub fn source_moments(&self, queries: &Locations) -> Result<(DVector<f64>, DVector<f64>)> {
        self.moments(Target::Source, queries)
    }

    pub fn source_mean(&self, queries: &Locations) -> Result<DVector<f64>> {
        self.check_queries(queries)?;
        Ok(self.cross(Target::Source, queries)? * &self.alpha)
    }

    /// Full posterior of the noiseless convolution at `queries`.
    pub fn convolution_posterior(&self, queries: &Locations) -> Result<PosteriorField> {
        self.field(Target::Convolution, queries)
    }

    pub fn convolution_moments(&self, queries: &Locations) -> Result<(DVector<f64>, DVector<f64>)> {
        self.moments(Target::Convolution, queries)
    }
}

/// Posterior over the source at `queries` given observations of the convolution.
pub fn deconvolve(
    obs: &ObservationSet,
    source: &KernelSpec,
    filter: &FilterSpec,
    method: CovMethod,
    queries: &Locations,
) -> Result<PosteriorField> {
    let pair = ConvKernelPair::new(source.clone(), filter.clone(), method)?;
    Deconvolver::new(obs, pair)?.source_posterior(queries)
}

/// Posterior over the noiseless convolution at `queries`.
pub fn predict_convolution(
    obs: &ObservationSet,
    source: &KernelSpec,
    filter: &FilterSpec,
    method: CovMethod,
    queries: &Locations,
) -> Result<PosteriorField> {
    let pair = ConvKernelPair::new(source.clone(), filter.clone(), method)?;
    Deconvolver::new(obs, pair)?.convolution_posterior(queries)
}
